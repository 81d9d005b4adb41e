//! Reference computations over the joint-space inertia matrix.

use nalgebra::{DMatrix, Matrix6xX, Vector6};

use crate::delassus::DelassusMatrix;
use crate::error::DynamicsError;
use crate::model::{ConstraintKind, ConstraintSet, KinematicTree};
use crate::spatial::{Abi, Arith, PluckerTransform};
use crate::Configuration;

/// Joint-space inertia matrix with its per-DoF parent array.
#[derive(Debug, Clone, PartialEq)]
pub struct Jsim {
    pub m: DMatrix<f64>,
    /// Previous DoF on the root path of each DoF (`None` at the root).
    pub dof_parent: Vec<Option<usize>>,
}

/// Constraint Jacobian `J` (`m x n`), row blocks in end-effector order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintJacobian {
    pub j: DMatrix<f64>,
    pub row_offsets: Vec<usize>,
}

/// Per-DoF parent array: DoFs of one joint form a chain, and the first DoF of
/// a joint hangs off the last DoF of the nearest ancestor joint.
pub fn dof_parents(tree: &KinematicTree) -> Vec<Option<usize>> {
    let mut out = vec![None; tree.nv()];
    for i in 1..=tree.n_bodies() {
        let r = tree.v_range(i);
        let mut prev = tree.ancestors(i).find(|&a| a != 0 && !tree.v_range(a).is_empty()).map(|a| tree.v_range(a).end - 1);
        for d in r {
            out[d] = prev;
            prev = Some(d);
        }
    }
    out
}

/// World-to-link transforms `⁰X_i` for every link (index 0 is the identity).
pub fn forward_kinematics(
    ar: &Arith,
    tree: &KinematicTree,
    q: &Configuration,
) -> Result<Vec<PluckerTransform>, DynamicsError> {
    let local = tree.local_transforms(ar, q)?;
    Ok(compose_world(ar, tree, &local))
}

fn compose_world(ar: &Arith, tree: &KinematicTree, local: &[PluckerTransform]) -> Vec<PluckerTransform> {
    let mut world = vec![PluckerTransform::identity(); tree.n_bodies() + 1];
    for i in 1..=tree.n_bodies() {
        let p = tree.parent(i);
        world[i] = if p == 0 { local[i] } else { local[i].compose(ar, &world[p]) };
    }
    world
}

/// Composite-rigid-body JSIM, built in link-local frames.
pub fn crba_jsim(ar: &Arith, tree: &KinematicTree, q: &Configuration) -> Result<Jsim, DynamicsError> {
    let local = tree.local_transforms(ar, q)?;
    Ok(crba_with_transforms(ar, tree, &local))
}

fn crba_with_transforms(ar: &Arith, tree: &KinematicTree, local: &[PluckerTransform]) -> Jsim {
    let nb = tree.n_bodies();
    let mut m = DMatrix::zeros(tree.nv(), tree.nv());
    let mut ic: Vec<Abi> = (0..=nb).map(|i| *tree.inertia_matrix(i)).collect();
    for i in (1..=nb).rev() {
        let p = tree.parent(i);
        if p != 0 {
            let moved = local[i].inertia_inv(ar, &ic[i]);
            ic[p] = add_abi(ar, &ic[p], &moved);
        }
        let s = tree.joint(i).subspace();
        let ri = tree.v_range(i);
        let mut f = s.inertia_times(ar, &ic[i]);
        let mii = s.project_square(ar, &f);
        m.view_mut((ri.start, ri.start), (ri.len(), ri.len())).copy_from(&mii);
        let mut j = i;
        while tree.parent(j) != 0 {
            local[j].force_inv_columns(ar, &mut f);
            j = tree.parent(j);
            let rj = tree.v_range(j);
            let block = tree.joint(j).subspace().project_columns(ar, &f);
            m.view_mut((rj.start, ri.start), (rj.len(), ri.len())).copy_from(&block);
            m.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(&block.transpose());
        }
    }
    Jsim { m, dof_parent: dof_parents(tree) }
}

pub(crate) fn add_abi(ar: &Arith, a: &Abi, b: &Abi) -> Abi {
    Abi::from_fn(|r, c| ar.add(a[(r, c)], b[(r, c)]))
}

/// `J`: row block `e` is `K_e` applied to the motion Jacobian of its parent
/// link, expressed in that link's frame.
pub fn constraint_jacobian(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    q: &Configuration,
) -> Result<ConstraintJacobian, DynamicsError> {
    let world = forward_kinematics(ar, tree, q)?;
    Ok(jacobian_with_world(ar, tree, cons, &world))
}

fn jacobian_with_world(ar: &Arith, tree: &KinematicTree, cons: &ConstraintSet, world: &[PluckerTransform]) -> ConstraintJacobian {
    // joint motion directions in world coordinates
    let mut s_world: Vec<Matrix6xX<f64>> = vec![Matrix6xX::zeros(0); tree.n_bodies() + 1];
    let needed = needed_links(tree, cons);
    for i in 1..=tree.n_bodies() {
        if !needed[i] {
            continue;
        }
        let s = tree.joint(i).subspace().to_matrix();
        let mut w = Matrix6xX::zeros(s.ncols());
        for c in 0..s.ncols() {
            let col: Vector6<f64> = s.column(c).into_owned();
            w.set_column(c, &world[i].motion_inv(ar, &col));
        }
        s_world[i] = w;
    }
    let offsets = cons.row_offsets();
    let mut jac = DMatrix::zeros(cons.m(), tree.nv());
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        let p = ee.parent;
        let path = std::iter::once(p).chain(tree.ancestors(p)).filter(|&a| a != 0);
        for a in path {
            let ra = tree.v_range(a);
            for (c, col) in s_world[a].column_iter().enumerate() {
                let v = world[p].motion(ar, &col.into_owned());
                let rows = apply_k(ar, &ee.kind, &ee.k, &v);
                for (r, x) in rows.iter().enumerate() {
                    jac[(offsets[k] + r, ra.start + c)] = *x;
                }
            }
        }
    }
    ConstraintJacobian { j: jac, row_offsets: offsets }
}

/// Links on the root path of some end-effector.
fn needed_links(tree: &KinematicTree, cons: &ConstraintSet) -> Vec<bool> {
    let mut needed = vec![false; tree.n_bodies() + 1];
    for ee in cons.end_effectors() {
        let mut i = ee.parent;
        while i != 0 && !needed[i] {
            needed[i] = true;
            i = tree.parent(i);
        }
    }
    needed
}

/// `K v`; a weld selects all of `v` at no cost.
pub(crate) fn apply_k(ar: &Arith, kind: &ConstraintKind, k: &DMatrix<f64>, v: &Vector6<f64>) -> Vec<f64> {
    match kind {
        ConstraintKind::Weld => v.iter().copied().collect(),
        _ => (0..k.nrows()).map(|r| ar.dot(k.row(r).iter().copied(), v.iter().copied())).collect(),
    }
}

/// Dense `Λ⁻¹ = J M⁻¹ Jᵀ` through a full Cholesky factorization of `M`.
pub fn naive_delassus(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    q: &Configuration,
) -> Result<DelassusMatrix, DynamicsError> {
    let local = tree.local_transforms(ar, q)?;
    let world = compose_world(ar, tree, &local);
    let jsim = crba_with_transforms(ar, tree, &local);
    let jac = jacobian_with_world(ar, tree, cons, &world);
    if cons.m() == 0 {
        return Ok(DelassusMatrix::zeros(0));
    }
    let l = ar.cholesky(&jsim.m).ok_or(DynamicsError::SingularJsim)?;
    let mut y = jac.j.transpose();
    ar.forward_substitute(&l, &mut y);
    Ok(DelassusMatrix::new(ar.matmul_tn(&y, &y)))
}

/// In-place `M = Lᵀ L` factorization over the DoF parent array.
///
/// Only entries on root paths are read or written, so `L` keeps the sparsity
/// pattern of `M`. The strictly upper part of the result is zero.
pub fn ltl_factor(ar: &Arith, jsim: &Jsim) -> Result<DMatrix<f64>, DynamicsError> {
    let lambda = &jsim.dof_parent;
    let mut h = DMatrix::zeros(jsim.m.nrows(), jsim.m.ncols());
    for k in 0..h.nrows() {
        h[(k, k)] = jsim.m[(k, k)];
        let mut i = lambda[k];
        while let Some(a) = i {
            h[(k, a)] = jsim.m[(k, a)];
            i = lambda[a];
        }
    }
    for k in (0..h.nrows()).rev() {
        if !(h[(k, k)] > 0.0) {
            return Err(DynamicsError::SingularJsim);
        }
        let d = ar.sqrt(h[(k, k)]);
        h[(k, k)] = d;
        let mut i = lambda[k];
        while let Some(a) = i {
            h[(k, a)] = ar.div(h[(k, a)], d);
            i = lambda[a];
        }
        let mut i = lambda[k];
        while let Some(a) = i {
            let mut j = Some(a);
            while let Some(b) = j {
                h[(a, b)] = ar.mul_sub(h[(a, b)], h[(k, a)], h[(k, b)]);
                j = lambda[b];
            }
            i = lambda[a];
        }
    }
    Ok(h)
}

/// `Λ⁻¹ = Y Yᵀ` with `Y = J L⁻¹`, exploiting branching sparsity throughout.
pub fn ltl_delassus(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    q: &Configuration,
) -> Result<DelassusMatrix, DynamicsError> {
    let local = tree.local_transforms(ar, q)?;
    let world = compose_world(ar, tree, &local);
    let jsim = crba_with_transforms(ar, tree, &local);
    let jac = jacobian_with_world(ar, tree, cons, &world);
    let l = ltl_factor(ar, &jsim)?;
    let lambda = &jsim.dof_parent;
    let last_dof = |link: usize| -> Option<usize> {
        std::iter::once(link).chain(tree.ancestors(link)).find(|&a| a != 0 && !tree.v_range(a).is_empty()).map(|a| tree.v_range(a).end - 1)
    };

    // Y L = J, solved leaf-to-root along each end-effector's DoF chain.
    let mut y = jac.j.clone();
    let offsets = &jac.row_offsets;
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        let top = last_dof(ee.parent);
        for r in offsets[k]..offsets[k] + ee.rows() {
            let mut c = top;
            while let Some(cc) = c {
                let v = ar.div(y[(r, cc)], l[(cc, cc)]);
                y[(r, cc)] = v;
                let mut i = lambda[cc];
                while let Some(a) = i {
                    y[(r, a)] = ar.mul_sub(y[(r, a)], l[(cc, a)], v);
                    i = lambda[a];
                }
                c = lambda[cc];
            }
        }
    }

    let mb = cons.len();
    let mut out = DMatrix::zeros(cons.m(), cons.m());
    for e in 0..mb {
        for f in e..mb {
            let (pe, pf) = (cons.ee(e).parent, cons.ee(f).parent);
            let common = common_link(tree, pe, pf);
            let top = if common == 0 { None } else { last_dof(common) };
            for r in offsets[e]..offsets[e] + cons.ee(e).rows() {
                for s in offsets[f]..offsets[f] + cons.ee(f).rows() {
                    let mut acc = None;
                    let mut c = top;
                    while let Some(cc) = c {
                        acc = Some(match acc {
                            None => ar.mul(y[(r, cc)], y[(s, cc)]),
                            Some(a) => ar.mul_add(a, y[(r, cc)], y[(s, cc)]),
                        });
                        c = lambda[cc];
                    }
                    let v = acc.unwrap_or(0.0);
                    out[(r, s)] = v;
                    out[(s, r)] = v;
                }
            }
        }
    }
    Ok(DelassusMatrix::new(out))
}

fn common_link(tree: &KinematicTree, mut a: usize, mut b: usize) -> usize {
    while a != b {
        if tree.depth_of(a) >= tree.depth_of(b) {
            a = tree.parent(a);
        } else {
            b = tree.parent(b);
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generators::{self, Base};
    use crate::model::random::{random_configuration, random_model, random_tree, random_velocity, RandomModelSpec};
    use crate::model::JointModel;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn silent() -> Arith {
        Arith::silent()
    }

    #[test]
    fn neutral_fk_composes_placements() {
        let t = generators::gen_chain(3, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let ar = silent();
        let w = forward_kinematics(&ar, &t, &t.neutral_configuration()).unwrap();
        let p = generators::chain_placement();
        let expected = p.compose(&ar, &p);
        assert_relative_eq!(w[3].rotation, expected.rotation, epsilon = 1e-15);
        assert_relative_eq!(w[3].translation, expected.translation, epsilon = 1e-15);
        assert_relative_eq!(w[3].translation, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_frame() {
        let t = generators::gen_chain(1, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let w = forward_kinematics(&silent(), &t, &Configuration::new(vec![std::f64::consts::FRAC_PI_2])).unwrap();
        // link x axis along world y, link y along world -x
        let axes = w[1].rotation.transpose();
        assert_relative_eq!(axes.column(0).into_owned(), Vector3::y(), epsilon = 1e-15);
        assert_relative_eq!(axes.column(1).into_owned(), -Vector3::x(), epsilon = 1e-15);
    }

    #[test]
    fn fk_child_is_local_step_of_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ar = silent();
        let t = random_tree(&mut rng, 10);
        let q = random_configuration(&mut rng, &t);
        let w = forward_kinematics(&ar, &t, &q).unwrap();
        for i in 1..=10 {
            let l = t.link(i);
            let step = l.joint.transform(&ar, &l.placement, &q.values[t.q_range(i)]);
            let expect = step.to_motion_matrix() * w[t.parent(i)].to_motion_matrix();
            assert_relative_eq!(w[i].to_motion_matrix(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn fk_dimension_mismatch() {
        let t = generators::gen_chain(2, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let err = forward_kinematics(&silent(), &t, &Configuration::new(vec![0.0])).unwrap_err();
        assert_eq!(err, DynamicsError::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn single_rod_moment_of_inertia() {
        let t = generators::gen_chain(1, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let m = crba_jsim(&silent(), &t, &t.neutral_configuration()).unwrap().m;
        // box about its end: m (l² + w²) / 12 + m (l/2)²
        let expected = (1.0 + 0.01) / 12.0 + 0.25;
        assert_relative_eq!(m[(0, 0)], expected, epsilon = 1e-14);
    }

    /// Per-link motion Jacobians in link coordinates, from world transforms.
    fn link_jacobians(t: &KinematicTree, q: &Configuration) -> Vec<DMatrix<f64>> {
        let ar = silent();
        let w = forward_kinematics(&ar, t, q).unwrap();
        (0..=t.n_bodies())
            .map(|i| {
                let mut j = DMatrix::zeros(6, t.nv());
                if i == 0 {
                    return j;
                }
                for a in std::iter::once(i).chain(t.ancestors(i)).filter(|&a| a != 0) {
                    let x = w[i].to_motion_matrix() * w[a].to_motion_matrix().try_inverse().unwrap();
                    let s = x * t.joint(a).subspace().to_matrix();
                    j.view_mut((0, t.v_range(a).start), (6, s.ncols())).copy_from(&s);
                }
                j
            })
            .collect()
    }

    #[test]
    fn jsim_matches_link_jacobian_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let t = random_tree(&mut rng, 8);
            let q = random_configuration(&mut rng, &t);
            let m = crba_jsim(&silent(), &t, &q).unwrap().m;
            let js = link_jacobians(&t, &q);
            let mut expected = DMatrix::zeros(t.nv(), t.nv());
            for i in 1..=t.n_bodies() {
                let h = DMatrix::from_column_slice(6, 6, t.inertia_matrix(i).as_slice());
                expected += js[i].transpose() * h * &js[i];
            }
            assert!((&m - &expected).amax() < 1e-12 * expected.amax());
            assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
        }
    }

    #[test]
    fn jacobian_sparsity_and_floating_weld() {
        let t = generators::gen_chain(1, JointModel::revolute(Vector3::z()), Base::Floating).unwrap();
        let c = ConstraintSet::new(1).attach(1, ConstraintKind::Weld).unwrap();
        let j = constraint_jacobian(&silent(), &t, &c, &t.neutral_configuration()).unwrap().j;
        assert_relative_eq!(j, DMatrix::identity(6, 6), epsilon = 1e-15);

        let (t, c) = generators::fig1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_configuration(&mut rng, &t);
        let jac = constraint_jacobian(&silent(), &t, &c, &q).unwrap();
        // end-effector 7 hangs on link 6, so links 3, 4, 5 contribute nothing
        for link in [3, 4, 5] {
            for col in t.v_range(link) {
                for r in 0..6 {
                    assert_eq!(jac.j[(r, col)], 0.0);
                }
            }
        }
    }

    /// Position residual of a constraint point, for finite differences.
    fn point_position(t: &KinematicTree, q: &Configuration, link: usize, p: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let w = forward_kinematics(&silent(), t, q).unwrap();
        let x = &w[link];
        (x.translation + x.rotation.transpose() * p, x.rotation.transpose())
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..5 {
            let t = random_tree(&mut rng, 7);
            let link = t.n_bodies();
            let p = Vector3::new(0.2, -0.1, 0.3);
            let c = ConstraintSet::new(7).attach(link, ConstraintKind::Connect { point: p }).unwrap();
            let q = random_configuration(&mut rng, &t);
            let v = random_velocity(&mut rng, &t);
            let jv = &constraint_jacobian(&silent(), &t, &c, &q).unwrap().j * DMatrix::from_column_slice(t.nv(), 1, &v);
            let h = 1e-6;
            let (xp, _) = point_position(&t, &q.integrate(&t, &v, h), link, &p);
            let (xm, _) = point_position(&t, &q.integrate(&t, &v, -h), link, &p);
            let (_, axes) = point_position(&t, &q, link, &p);
            // world velocity of the point, rotated into link axes
            let fd = axes.transpose() * (xp - xm) / (2.0 * h);
            for r in 0..3 {
                assert!((jv[r] - fd[r]).abs() < 1e-5, "row {r}: {} vs {}", jv[r], fd[r]);
            }
        }
    }

    #[test]
    fn naive_single_floating_body_is_inverse_inertia() {
        let t = generators::gen_chain(1, JointModel::revolute(Vector3::z()), Base::Floating).unwrap();
        let c = ConstraintSet::new(1).attach(1, ConstraintKind::Weld).unwrap();
        let lam = naive_delassus(&silent(), &t, &c, &t.neutral_configuration()).unwrap();
        let hinv = t.inertia_matrix(1).try_inverse().unwrap();
        assert!((lam.matrix - DMatrix::from_column_slice(6, 6, hinv.as_slice())).amax() < 1e-12 * hinv.amax());
    }

    #[test]
    fn naive_without_constraints_is_empty() {
        let t = generators::gen_chain(3, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let lam = naive_delassus(&silent(), &t, &ConstraintSet::new(3), &t.neutral_configuration()).unwrap();
        assert_eq!(lam.dim(), 0);
    }

    #[test]
    fn star_tree_ltl_is_diagonal_sqrt() {
        let mut links = generators::gen_chain(4, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap().links().to_vec();
        for l in &mut links {
            l.parent = 0;
        }
        let t = KinematicTree::new(links);
        let jsim = crba_jsim(&silent(), &t, &t.neutral_configuration()).unwrap();
        let l = ltl_factor(&silent(), &jsim).unwrap();
        assert_eq!(l, DMatrix::from_diagonal(&jsim.m.diagonal().map(f64::sqrt)));
    }

    #[test]
    fn ltl_reconstructs_jsim_and_keeps_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 12);
            let q = random_configuration(&mut rng, &t);
            let jsim = crba_jsim(&silent(), &t, &q).unwrap();
            let l = ltl_factor(&silent(), &jsim).unwrap();
            let back = l.transpose() * &l;
            assert!((&back - &jsim.m).amax() <= 1e-10 * jsim.m.amax());
            let on_path = |a: usize, b: usize| {
                let mut i = Some(a);
                while let Some(x) = i {
                    if x == b {
                        return true;
                    }
                    i = jsim.dof_parent[x];
                }
                false
            };
            for r in 0..l.nrows() {
                for c in 0..l.ncols() {
                    if !on_path(r, c) {
                        assert_eq!(l[(r, c)].to_bits(), 0.0f64.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn ltl_matches_naive_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let (t, c) = random_model(&mut rng, &RandomModelSpec::default());
            let q = random_configuration(&mut rng, &t);
            let a = naive_delassus(&silent(), &t, &c, &q).unwrap();
            let b = ltl_delassus(&silent(), &t, &c, &q).unwrap();
            assert!(b.relative_error(&a) < 1e-8, "{}", b.relative_error(&a));
        }
    }
}
