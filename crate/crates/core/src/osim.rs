//! Propagator-based Delassus algorithms in the link-local formulation.
//!
//! Every link quantity lives in that link's own frame. The force propagator
//! of joint `i` is applied as `Xᵢᵀ (f − Uᵢ Dᵢ⁻¹ Sᵢᵀ f)`, with
//! `Uᵢ = Hᵢᴬ Sᵢ` and `Dᵢ = Sᵢᵀ Uᵢ`, and never formed as a 6x6 matrix inside
//! the algorithms. Constraint-space propagators are stored as 6 x w blocks of
//! force columns (`Kᵀ` rather than `K`).

use nalgebra::{DMatrix, Matrix6, Matrix6xX, Vector6};

use crate::baseline::add_abi;
use crate::delassus::DelassusMatrix;
use crate::error::DynamicsError;
use crate::model::{ConstraintKind, ConstraintSet, IndexSets, KinematicTree};
use crate::spatial::{Abi, Arith, MotionSubspace, PluckerTransform};
use crate::Configuration;

type Cols = Matrix6xX<f64>;

/// Articulated-body quantities of every link (index 0 unused).
#[derive(Debug, Clone, PartialEq)]
pub struct JointAbiData {
    pub parent: Vec<usize>,
    pub subspace: Vec<MotionSubspace>,
    /// Parent-to-link transforms `Xᵢ`.
    pub x: Vec<PluckerTransform>,
    pub h_a: Vec<Abi>,
    /// `Uᵢ = Hᵢᴬ Sᵢ`
    pub u: Vec<Cols>,
    pub d: Vec<DMatrix<f64>>,
    pub dinv: Vec<DMatrix<f64>>,
}

impl JointAbiData {
    pub fn n_bodies(&self) -> usize {
        self.x.len() - 1
    }

    /// `1 − Uᵢ Dᵢ⁻¹ Sᵢᵀ`: the joint's force projector in link `i` coordinates.
    pub fn projector(&self, i: usize) -> Matrix6<f64> {
        let s = dense(&self.subspace[i].to_matrix());
        let u = dense(&self.u[i]);
        let p = DMatrix::identity(6, 6) - u * &self.dinv[i] * s.transpose();
        Matrix6::from_column_slice(p.as_slice())
    }

    /// `^π(i)Pᵢ`: maps a force on link `i` (link-`i` coordinates) to the force
    /// transmitted to the parent (parent coordinates).
    pub fn propagator(&self, i: usize) -> Matrix6<f64> {
        self.x[i].to_motion_matrix().transpose() * self.projector(i)
    }

    /// `^π(i)Ωᵢ = Sᵢ Dᵢ⁻¹ Sᵢᵀ` in link `i` coordinates.
    pub fn omega(&self, i: usize) -> Matrix6<f64> {
        let s = dense(&self.subspace[i].to_matrix());
        let o = &s * &self.dinv[i] * s.transpose();
        Matrix6::from_column_slice(o.as_slice())
    }
}

fn dense(m: &Cols) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, m.ncols(), m.as_slice())
}

/// Leaf-to-root articulated-body sweep shared by all three algorithms.
pub fn abi_backward(ar: &Arith, tree: &KinematicTree, q: &Configuration) -> Result<JointAbiData, DynamicsError> {
    let x = tree.local_transforms(ar, q)?;
    let nb = tree.n_bodies();
    let mut h_a: Vec<Abi> = (0..=nb).map(|i| *tree.inertia_matrix(i)).collect();
    let mut u = vec![Cols::zeros(0); nb + 1];
    let mut d = vec![DMatrix::zeros(0, 0); nb + 1];
    let mut dinv = vec![DMatrix::zeros(0, 0); nb + 1];
    let mut subspace = vec![MotionSubspace::Fixed; nb + 1];
    let mut parent = vec![0; nb + 1];
    for i in (1..=nb).rev() {
        let s = tree.joint(i).subspace();
        subspace[i] = s;
        parent[i] = tree.parent(i);
        let ui = s.inertia_times(ar, &h_a[i]);
        let di = s.project_square(ar, &ui);
        let dii = ar.spd_inverse(&di).ok_or(DynamicsError::SingularD { link: i })?;
        let p = tree.parent(i);
        if p != 0 {
            let reduced = reduce_inertia(ar, &h_a[i], &ui, &dii);
            let moved = x[i].inertia_inv(ar, &reduced);
            h_a[p] = add_abi(ar, &h_a[p], &moved);
        }
        u[i] = ui;
        d[i] = di;
        dinv[i] = dii;
    }
    Ok(JointAbiData { parent, subspace, x, h_a, u, d, dinv })
}

/// `Hᴬ − U D⁻¹ Uᵀ`, evaluated on the upper triangle and mirrored.
fn reduce_inertia(ar: &Arith, h: &Abi, u: &Cols, dinv: &DMatrix<f64>) -> Abi {
    let n = u.ncols();
    let w = Cols::from_fn(n, |r, c| ar.dot((0..n).map(|k| u[(r, k)]), (0..n).map(|k| dinv[(k, c)])));
    let mut out = *h;
    for r in 0..6 {
        for c in r..6 {
            let mut v = h[(r, c)];
            for k in 0..n {
                v = ar.mul_sub(v, w[(r, k)], u[(c, k)]);
            }
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    out
}

/// `a ← a + b` for symmetric operands.
fn add_sym_assign(ar: &Arith, a: &mut DMatrix<f64>, b: &DMatrix<f64>) {
    for c in 0..a.ncols() {
        for r in 0..=c {
            let v = ar.add(a[(r, c)], b[(r, c)]);
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
    }
}

/// `D⁻¹ B` for an `n x w` block.
fn dinv_times(ar: &Arith, dinv: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    ar.matmul(dinv, b)
}

/// `m ← m − U t`
fn sub_u_times(ar: &Arith, m: &mut Cols, u: &Cols, t: &DMatrix<f64>) {
    for c in 0..m.ncols() {
        for r in 0..6 {
            let mut v = m[(r, c)];
            for k in 0..u.ncols() {
                v = ar.mul_sub(v, u[(r, k)], t[(k, c)]);
            }
            m[(r, c)] = v;
        }
    }
}

/// `omega ← omega + aᵀ b` for a symmetric update: upper triangle, mirrored.
fn add_sym_tn(ar: &Arith, omega: &mut DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) {
    for c in 0..b.ncols() {
        for r in 0..=c {
            let mut v = omega[(r, c)];
            for k in 0..a.nrows() {
                v = ar.mul_add(v, a[(k, r)], b[(k, c)]);
            }
            omega[(r, c)] = v;
            omega[(c, r)] = v;
        }
    }
}

/// `aᵀ b` for two 6-row blocks.
fn cols_tn(ar: &Arith, a: &Cols, b: &Cols) -> DMatrix<f64> {
    DMatrix::from_fn(a.ncols(), b.ncols(), |r, c| ar.dot(a.column(r).iter().copied(), b.column(c).iter().copied()))
}

/// `aᵀ b` when the product is known to be symmetric.
fn cols_tn_sym(ar: &Arith, a: &Cols, b: &Cols) -> DMatrix<f64> {
    let n = a.ncols();
    let mut out = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let v = ar.dot(a.column(r).iter().copied(), b.column(c).iter().copied());
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    out
}

/// `a b` for a 6 x 6 block times a 6 x w block.
fn cols_mul(ar: &Arith, a: &Cols, b: &Cols) -> Cols {
    Cols::from_fn(b.ncols(), |r, c| ar.dot(a.row(r).iter().copied(), b.column(c).iter().copied()))
}

/// `o b` for a symmetric 6x6 (or any square) block stored densely.
fn square_times_cols(ar: &Arith, o: &DMatrix<f64>, b: &Cols) -> Cols {
    Cols::from_fn(b.ncols(), |r, c| ar.dot(o.row(r).iter().copied(), b.column(c).iter().copied()))
}

/// A 6 x w block of force columns that may be the structural identity.
///
/// A weld's `Kᵀ` and a freshly reset segment propagator are the identity;
/// products with them are copies and cost nothing.
#[derive(Debug, Clone, PartialEq)]
enum Block {
    Identity,
    Dense(Cols),
}

impl Block {
    fn empty() -> Self {
        Block::Dense(Cols::zeros(0))
    }

    fn of_end_effector(ee: &crate::model::EndEffector) -> Self {
        match ee.kind {
            ConstraintKind::Weld => Block::Identity,
            _ => Block::Dense(k_transpose(&ee.k)),
        }
    }

    fn to_dense(&self) -> Cols {
        match self {
            Block::Identity => Cols::identity(6),
            Block::Dense(c) => c.clone(),
        }
    }
}

/// `o b`
fn square_times_block(ar: &Arith, o: &DMatrix<f64>, b: &Block) -> Cols {
    match b {
        Block::Identity => Cols::from_column_slice(o.as_slice()),
        Block::Dense(c) => square_times_cols(ar, o, c),
    }
}

/// `aᵀ b`
fn block_tn(ar: &Arith, a: &Block, b: &Cols) -> DMatrix<f64> {
    match a {
        Block::Identity => dense(b),
        Block::Dense(c) => cols_tn(ar, c, b),
    }
}

/// `aᵀ b` with a symmetric result.
fn block_tn_sym(ar: &Arith, a: &Block, b: &Cols) -> DMatrix<f64> {
    match a {
        Block::Identity => dense(b),
        Block::Dense(c) => cols_tn_sym(ar, c, b),
    }
}

/// `a b`
fn block_mul(ar: &Arith, a: &Block, b: &Block) -> Block {
    match (a, b) {
        (Block::Identity, x) | (x, Block::Identity) => x.clone(),
        (Block::Dense(a), Block::Dense(b)) => Block::Dense(cols_mul(ar, a, b)),
    }
}

/// Structurally nonzero entries `(row, col, value)` of `S`; `None` marks a unit entry.
fn subspace_entries(s: &MotionSubspace) -> Vec<(usize, usize, Option<f64>)> {
    match s {
        MotionSubspace::Revolute(a) => (0..3).map(|r| (r, 0, Some(a[r]))).collect(),
        MotionSubspace::Prismatic(a) => (0..3).map(|r| (r + 3, 0, Some(a[r]))).collect(),
        MotionSubspace::Spherical => (0..3).map(|k| (k, k, None)).collect(),
        MotionSubspace::Free => (0..6).map(|k| (k, k, None)).collect(),
        MotionSubspace::Fixed => Vec::new(),
    }
}

/// One joint of a backward constraint sweep on the force block `m` at link `i`.
///
/// Adds `(Sᵀm)ᵀ D⁻¹ (Sᵀm)` to `omega` when given, then, if `propagate`,
/// moves `m` to the parent frame through the joint's force propagator.
/// Returns `Sᵀ m`. An identity `m` requires `omega` to be zero.
fn joint_step(
    ar: &Arith,
    abi: &JointAbiData,
    i: usize,
    m: &mut Block,
    omega: Option<&mut DMatrix<f64>>,
    propagate: bool,
) -> DMatrix<f64> {
    let Block::Dense(cols) = m else {
        return identity_step(ar, abi, i, m, omega, propagate);
    };
    let ks = abi.subspace[i].project_columns(ar, cols);
    let t = dinv_times(ar, &abi.dinv[i], &ks);
    if let Some(o) = omega {
        add_sym_tn(ar, o, &ks, &t);
    }
    if propagate {
        sub_u_times(ar, cols, &abi.u[i], &t);
        abi.x[i].force_inv_columns(ar, cols);
    }
    ks
}

/// [`joint_step`] on the identity block, skipping products with structural zeros and ones.
fn identity_step(
    ar: &Arith,
    abi: &JointAbiData,
    i: usize,
    m: &mut Block,
    omega: Option<&mut DMatrix<f64>>,
    propagate: bool,
) -> DMatrix<f64> {
    let s = &abi.subspace[i];
    let n = s.dof();
    let entries = subspace_entries(s);
    let dinv = &abi.dinv[i];
    let mut ks = DMatrix::zeros(n, 6);
    for &(r, k, v) in &entries {
        ks[(k, r)] = v.unwrap_or(1.0);
    }

    // t = D⁻¹ Sᵀ, column c nonzero only where row c of S is
    // every row of S holds at most one entry
    let mut t = DMatrix::zeros(n, 6);
    let mut live = [false; 6];
    for &(c, j, v) in &entries {
        live[c] = true;
        for k in 0..n {
            t[(k, c)] = v.map_or(dinv[(k, j)], |x| ar.mul(dinv[(k, j)], x));
        }
    }

    if let Some(o) = omega {
        debug_assert!(o.iter().all(|&x| x == 0.0));
        for c in (0..6).filter(|&c| live[c]) {
            for r in (0..=c).filter(|&r| live[r]) {
                let mut acc: Option<f64> = None;
                for &(_, k, v) in entries.iter().filter(|e| e.0 == r) {
                    let term = v.map_or(t[(k, c)], |x| ar.mul(x, t[(k, c)]));
                    acc = Some(acc.map_or(term, |a| ar.add(a, term)));
                }
                let val = acc.unwrap_or(0.0);
                o[(r, c)] = val;
                o[(c, r)] = val;
            }
        }
    }

    if propagate {
        let u = &abi.u[i];
        let x = &abi.x[i];
        let mut out = Cols::zeros(6);
        for c in 0..6 {
            let col = if live[c] {
                let mut v = Vector6::zeros();
                for r in 0..6 {
                    let ut = ar.dot((0..n).map(|k| u[(r, k)]), (0..n).map(|k| t[(k, c)]));
                    v[r] = if r == c { ar.sub(1.0, ut) } else { -ut };
                }
                x.force_inv(ar, &v)
            } else if c < 3 {
                // Xᵀ of a unit moment: a row of E
                let e = x.rotation.row(c).transpose();
                Vector6::new(e[0], e[1], e[2], 0.0, 0.0, 0.0)
            } else {
                let f = x.rotation.row(c - 3).transpose();
                let mom = ar.cross3(&x.translation, &f);
                Vector6::new(mom[0], mom[1], mom[2], f[0], f[1], f[2])
            };
            out.set_column(c, &col);
        }
        *m = Block::Dense(out);
    }
    ks
}

fn k_transpose(k: &DMatrix<f64>) -> Cols {
    Cols::from_fn(k.nrows(), |r, c| k[(c, r)])
}

/// Force-propagator product `^jPᵢ` between two links (or a 6 x mₑ block at an end-effector).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPropagator {
    /// Ancestor frame the result is expressed in.
    pub target: usize,
    /// Link whose forces are propagated.
    pub source: usize,
    pub matrix: Cols,
}

impl ExtendedPropagator {
    /// `^iPᵢ = 1`
    pub fn identity(i: usize) -> Self {
        Self { target: i, source: i, matrix: Cols::identity(6) }
    }

    /// `^π(i)Pᵢ` of a single joint.
    pub fn edge(abi: &JointAbiData, i: usize) -> Self {
        let p = abi.propagator(i);
        Self { target: abi.parent[i], source: i, matrix: Cols::from_column_slice(p.as_slice()) }
    }

    /// `^jPᵢ` along the tree path.
    pub fn along_path(abi: &JointAbiData, j: usize, i: usize) -> Result<Self, DynamicsError> {
        let mut acc = Self::identity(i);
        let mut cur = i;
        while cur != j {
            if cur == 0 {
                return Err(DynamicsError::NotAncestor { ancestor: j, link: i });
            }
            acc = efp_compose(&Self::edge(abi, cur), &acc)?;
            cur = abi.parent[cur];
        }
        Ok(acc)
    }
}

/// `^jPᵢ = ^jPₖ ^kPᵢ`
pub fn efp_compose(outer: &ExtendedPropagator, inner: &ExtendedPropagator) -> Result<ExtendedPropagator, DynamicsError> {
    if outer.source != inner.target {
        return Err(DynamicsError::ChainMismatch { left_source: outer.source, right_target: inner.target });
    }
    let m = dense(&outer.matrix) * dense(&inner.matrix);
    Ok(ExtendedPropagator {
        target: outer.target,
        source: inner.source,
        matrix: Cols::from_column_slice(m.as_slice()),
    })
}

/// `^jΩᵢ = Σ_{k ∈ path(j,i)} ^kPᵢᵀ ^π(k)Ωₖ ^kPᵢ`, in link `i` coordinates.
pub fn path_inverse_inertia(abi: &JointAbiData, j: usize, i: usize) -> Result<Matrix6<f64>, DynamicsError> {
    if i == 0 || i == j {
        return Err(DynamicsError::NotAncestor { ancestor: j, link: i });
    }
    let mut total = Matrix6::zeros();
    let mut k = i;
    while k != j {
        if k == 0 {
            return Err(DynamicsError::NotAncestor { ancestor: j, link: i });
        }
        let p = ExtendedPropagator::along_path(abi, k, i)?;
        let pm = Matrix6::from_column_slice(p.matrix.as_slice());
        total += pm.transpose() * abi.omega(k) * pm;
        k = abi.parent[k];
    }
    Ok(total)
}

/// Two-sweep algorithm: stacked constraint propagators with a running
/// constraint-space inverse inertia per link.
pub fn pv_osim(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    sets: &IndexSets,
    q: &Configuration,
) -> Result<DelassusMatrix, DynamicsError> {
    let abi = abi_backward(ar, tree, q)?;
    let nb = tree.n_bodies();
    let offsets = cons.row_offsets();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nb + 1];
    let mut kt: Vec<Block> = vec![Block::empty(); nb + 1];
    let mut la: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); nb + 1];
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        let p = ee.parent;
        let block = Block::of_end_effector(ee);
        append(&mut rows[p], &mut kt[p], &mut la[p], (offsets[k]..offsets[k] + ee.rows()).collect(), block, DMatrix::zeros(ee.rows(), ee.rows()));
    }
    let mut out = DMatrix::zeros(cons.m(), cons.m());
    for i in (1..=nb).rev() {
        if sets.es(i).is_empty() {
            continue;
        }
        let p = tree.parent(i);
        let mut m = std::mem::replace(&mut kt[i], Block::empty());
        let mut l = std::mem::replace(&mut la[i], DMatrix::zeros(0, 0));
        joint_step(ar, &abi, i, &mut m, Some(&mut l), p != 0);
        let r = std::mem::take(&mut rows[i]);
        if p == 0 {
            scatter(&mut out, &r, &l);
        } else {
            append(&mut rows[p], &mut kt[p], &mut la[p], r, m, l);
        }
    }
    Ok(DelassusMatrix::new(out))
}

/// Stacks a child's block under the parent's, block-diagonally in `L`.
fn append(rows: &mut Vec<usize>, kt: &mut Block, la: &mut DMatrix<f64>, new_rows: Vec<usize>, block: Block, l: DMatrix<f64>) {
    if rows.is_empty() {
        *rows = new_rows;
        *kt = block;
        *la = l;
        return;
    }
    let w0 = rows.len();
    let w = w0 + new_rows.len();
    let mut k2 = Cols::zeros(w);
    k2.columns_mut(0, w0).copy_from(&kt.to_dense());
    k2.columns_mut(w0, new_rows.len()).copy_from(&block.to_dense());
    let mut l2 = DMatrix::zeros(w, w);
    l2.view_mut((0, 0), (w0, w0)).copy_from(la);
    l2.view_mut((w0, w0), (new_rows.len(), new_rows.len())).copy_from(&l);
    rows.extend(new_rows);
    *kt = Block::Dense(k2);
    *la = l2;
}

fn scatter(out: &mut DMatrix<f64>, rows: &[usize], l: &DMatrix<f64>) {
    for (a, &ra) in rows.iter().enumerate() {
        for (b, &rb) in rows.iter().enumerate() {
            out[(ra, rb)] = l[(a, b)];
        }
    }
}

/// Three-sweep algorithm over per-end-effector constraint propagators.
pub fn efpa(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    sets: &IndexSets,
    q: &Configuration,
) -> Result<DelassusMatrix, DynamicsError> {
    let abi = abi_backward(ar, tree, q)?;
    let nb = tree.n_bodies();
    let first_ee = nb + 1;
    let slot = |i: usize, e: usize| sets.es(i).binary_search(&e).expect("end-effector supported by link");

    // backward: ^iK_jᵀ for every link i and j ∈ ES(i), with Sᵢᵀ ^iK_jᵀ cached
    let mut kt: Vec<Vec<Block>> = (0..=nb).map(|i| vec![Block::empty(); sets.es(i).len()]).collect();
    let mut ks: Vec<Vec<DMatrix<f64>>> = (0..=nb).map(|i| vec![DMatrix::zeros(0, 0); sets.es(i).len()]).collect();
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        kt[ee.parent][slot(ee.parent, first_ee + k)] = Block::of_end_effector(ee);
    }
    for i in (1..=nb).rev() {
        let p = tree.parent(i);
        for (s, &e) in sets.es(i).iter().enumerate() {
            let mut m = kt[i][s].clone();
            ks[i][s] = joint_step(ar, &abi, i, &mut m, None, p != 0);
            if p != 0 {
                kt[p][slot(p, e)] = m;
            }
        }
    }

    // forward: W[i][j] = ^0Ωᵢ ^iK_jᵀ as motion columns in link i coordinates
    let mut w: Vec<Vec<Cols>> = (0..=nb).map(|i| vec![Cols::zeros(0); sets.es(i).len()]).collect();
    for i in 1..=nb {
        let p = tree.parent(i);
        let s = &abi.subspace[i];
        for (sl, &e) in sets.es(i).iter().enumerate() {
            let width = cons.ee(e - first_ee).rows();
            let mut out = Cols::zeros(width);
            for c in 0..width {
                let col = if p == 0 {
                    let coef = ar.matmul(&abi.dinv[i], &ks[i][sl].columns(c, 1).into_owned());
                    s.expand(ar, coef.as_slice())
                } else {
                    let w1 = abi.x[i].motion(ar, &w[p][slot(p, e)].column(c).into_owned());
                    let n = s.dof();
                    let r = DMatrix::from_fn(n, 1, |k, _| {
                        let ut = ar.dot(abi.u[i].column(k).iter().copied(), w1.iter().copied());
                        ar.sub(ut, ks[i][sl][(k, c)])
                    });
                    let coef = ar.matmul(&abi.dinv[i], &r);
                    sub_expand(ar, s, w1, coef.as_slice())
                };
                out.set_column(c, &col);
            }
            w[i][sl] = out;
        }
    }

    // assembly through closest common ancestors
    let offsets = cons.row_offsets();
    let mut out = DMatrix::zeros(cons.m(), cons.m());
    for a in 0..cons.len() {
        for b in a..cons.len() {
            let (e, f) = (first_ee + a, first_ee + b);
            let c = if a == b { cons.ee(a).parent } else { sets.cca(e, f) };
            if c == 0 {
                continue;
            }
            let (ke, wf) = (&kt[c][slot(c, e)], &w[c][slot(c, f)]);
            let block = if a == b { block_tn_sym(ar, ke, wf) } else { block_tn(ar, ke, wf) };
            place(&mut out, offsets[a], offsets[b], &block);
        }
    }
    Ok(DelassusMatrix::new(out))
}

/// `w − S c`, touching only the rows `S` can reach.
fn sub_expand(ar: &Arith, s: &MotionSubspace, mut w: Vector6<f64>, c: &[f64]) -> Vector6<f64> {
    match s {
        MotionSubspace::Revolute(a) | MotionSubspace::Prismatic(a) => {
            let off = s.support().start;
            for k in 0..3 {
                w[off + k] = ar.mul_sub(w[off + k], a[k], c[0]);
            }
        }
        _ => {
            for (k, r) in s.support().enumerate() {
                w[r] = ar.sub(w[r], c[k]);
            }
        }
    }
    w
}

fn place(out: &mut DMatrix<f64>, r0: usize, c0: usize, block: &DMatrix<f64>) {
    out.view_mut((r0, c0), block.shape()).copy_from(block);
    if r0 != c0 {
        out.view_mut((c0, r0), (block.ncols(), block.nrows())).copy_from(&block.transpose());
    }
}

/// Links touched by each phase of [`pv_osimr_instrumented`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisitLog {
    /// Links whose joint was processed by the segment sweep.
    pub segment_sweep: Vec<usize>,
    pub inverse_inertia_sweep: Vec<usize>,
    pub propagator_sweep: Vec<usize>,
    pub assembly: Vec<usize>,
}

/// Four-phase algorithm restricted to branching links.
pub fn pv_osimr(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    sets: &IndexSets,
    q: &Configuration,
) -> Result<DelassusMatrix, DynamicsError> {
    pv_osimr_instrumented(ar, tree, cons, sets, q).map(|(l, _)| l)
}

pub fn pv_osimr_instrumented(
    ar: &Arith,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    sets: &IndexSets,
    q: &Configuration,
) -> Result<(DelassusMatrix, VisitLog), DynamicsError> {
    let abi = abi_backward(ar, tree, q)?;
    let nb = tree.n_bodies();
    let first_ee = nb + 1;
    let total = nb + cons.len() + 1;
    let mut log = VisitLog::default();

    // (a) segment propagators ^𝒜(b)P_b and inverse inertias ^𝒜(b)Ω_b
    let mut seg_p: Vec<Block> = vec![Block::empty(); total];
    let mut seg_o: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); total];
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        seg_p[first_ee + k] = Block::of_end_effector(ee);
        seg_o[first_ee + k] = DMatrix::zeros(ee.rows(), ee.rows());
    }
    for i in (1..=nb).rev() {
        let Some(b) = sets.desc_branch(i) else { continue };
        log.segment_sweep.push(i);
        if b == i {
            seg_p[i] = Block::Identity;
            seg_o[i] = DMatrix::zeros(6, 6);
        }
        let p = tree.parent(i);
        joint_step(ar, &abi, i, &mut seg_p[b], Some(&mut seg_o[b]), p != 0);
    }

    // (b) ^0Ω_b over branching links, root to leaves
    // y_b = ^0Ω_𝒜(b) ^𝒜(b)P_b is kept for the assembly
    let mut omega0: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); total];
    let mut y: Vec<Option<Cols>> = vec![None; total];
    for &b in sets.branching().iter().filter(|&&b| b != 0) {
        log.inverse_inertia_sweep.push(b);
        let a = sets.anc_branch(b).unwrap_or(0);
        let mut o = seg_o[b].clone();
        if a != 0 {
            let yb = square_times_block(ar, &omega0[a], &seg_p[b]);
            let inner = block_tn_sym(ar, &seg_p[b], &yb);
            if seg_p[b] == Block::Identity {
                o = inner;
            } else {
                add_sym_assign(ar, &mut o, &inner);
            }
            y[b] = Some(yb);
        }
        omega0[b] = o;
    }

    // (c) ^jK_eᵀ for every end-effector and the ancestral branching links it needs
    let me = cons.len();
    let mut top: Vec<Option<usize>> = vec![None; me];
    for a in 0..me {
        for b in 0..me {
            let c = if a == b { 0 } else { sets.cca(first_ee + a, first_ee + b) };
            if c != 0 && top[a].is_none_or(|t| sets.depth(c) < sets.depth(t)) {
                top[a] = Some(c);
            }
        }
    }
    let mut cemp: Vec<Vec<(usize, Block)>> = vec![Vec::new(); me];
    for a in 0..me {
        let Some(stop) = top[a] else { continue };
        let e = first_ee + a;
        let mut j = sets.anc_branch(e).unwrap_or(0);
        let mut cur = seg_p[e].clone();
        loop {
            log.propagator_sweep.push(j);
            cemp[a].push((j, cur.clone()));
            if j == stop {
                break;
            }
            cur = block_mul(ar, &seg_p[j], &cur);
            j = sets.anc_branch(j).unwrap_or(0);
        }
    }
    let find = |a: usize, c: usize| &cemp[a].iter().find(|(j, _)| *j == c).expect("needed propagator computed").1;

    // (d) assembly
    let offsets = cons.row_offsets();
    let mut out = DMatrix::zeros(cons.m(), cons.m());
    for a in 0..me {
        let e = first_ee + a;
        log.assembly.push(e);
        place(&mut out, offsets[a], offsets[a], &omega0[e]);
        let mut cache: Vec<(usize, Cols)> = Vec::new();
        for b in a + 1..me {
            let c = sets.cca(e, first_ee + b);
            if c == 0 {
                continue;
            }
            log.assembly.push(c);
            let f = first_ee + b;
            let block = if sets.anc_branch(f) == Some(c) {
                block_tn(ar, find(a, c), y[f].as_ref().expect("computed in the forward sweep"))
            } else if sets.anc_branch(e) == Some(c) {
                block_tn(ar, find(b, c), y[e].as_ref().expect("computed in the forward sweep")).transpose()
            } else {
                let pos = match cache.iter().position(|(k, _)| *k == c) {
                    Some(p) => p,
                    None => {
                        cache.push((c, square_times_block(ar, &omega0[c], find(a, c))));
                        cache.len() - 1
                    }
                };
                block_tn(ar, find(b, c), &cache[pos].1).transpose()
            };
            place(&mut out, offsets[a], offsets[b], &block);
        }
    }
    Ok((DelassusMatrix::new(out), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::naive_delassus;
    use crate::model::generators::{self, Base};
    use crate::model::random::{random_configuration, random_model, random_tree, RandomModelSpec};
    use crate::model::{ConstraintKind, JointModel};
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Algo = fn(&Arith, &KinematicTree, &ConstraintSet, &IndexSets, &Configuration) -> Result<DelassusMatrix, DynamicsError>;
    const ALGOS: [(&str, Algo); 3] = [("pv_osim", pv_osim), ("efpa", efpa), ("pv_osimr", pv_osimr)];

    fn silent() -> Arith {
        Arith::silent()
    }

    #[test]
    fn floating_body_weld_is_inverse_inertia() {
        let t = generators::gen_chain(1, JointModel::revolute(Vector3::z()), Base::Floating).unwrap();
        let c = ConstraintSet::new(1).attach(1, ConstraintKind::Weld).unwrap();
        let sets = IndexSets::new(&t, &c);
        let q = t.neutral_configuration();
        let hinv = t.inertia_matrix(1).try_inverse().unwrap();
        let abi = abi_backward(&silent(), &t, &q).unwrap();
        assert!((abi.omega(1) - hinv).amax() < 1e-12 * hinv.amax());
        assert!((dense(&abi.u[1]) - DMatrix::from_column_slice(6, 6, t.inertia_matrix(1).as_slice())).amax() == 0.0);
        for (name, f) in ALGOS {
            let l = f(&silent(), &t, &c, &sets, &q).unwrap();
            let err = (l.matrix - DMatrix::from_column_slice(6, 6, hinv.as_slice())).amax() / hinv.amax();
            assert!(err < 1e-12, "{name}: {err}");
        }
    }

    #[test]
    fn leaf_abi_is_link_inertia_and_two_link_recursion() {
        let t = generators::gen_chain(2, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_configuration(&mut rng, &t);
        let abi = abi_backward(&silent(), &t, &q).unwrap();
        assert_eq!(abi.h_a[2], *t.inertia_matrix(2));
        let x = abi.x[2].to_motion_matrix();
        let expected = t.inertia_matrix(1) + x.transpose() * abi.projector(2) * abi.h_a[2] * x;
        assert!((abi.h_a[1] - expected).amax() < 1e-12 * expected.amax());
    }

    #[test]
    fn projector_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 10);
            let q = random_configuration(&mut rng, &t);
            let abi = abi_backward(&silent(), &t, &q).unwrap();
            for i in 1..=t.n_bodies() {
                let p = abi.projector(i);
                let scale = abi.h_a[i].amax().max(1.0);
                assert!((p * p - p).amax() < 1e-10 * scale);
                let s = dense(&abi.subspace[i].to_matrix());
                let sp = s.transpose() * DMatrix::from_column_slice(6, 6, p.as_slice());
                assert!(sp.amax() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn compose_identity_associativity_and_mismatch() {
        let t = generators::gen_chain(3, JointModel::revolute(Vector3::z()), Base::Fixed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let abi = abi_backward(&silent(), &t, &random_configuration(&mut rng, &t)).unwrap();
        let (p1, p2, p3) = (ExtendedPropagator::edge(&abi, 1), ExtendedPropagator::edge(&abi, 2), ExtendedPropagator::edge(&abi, 3));
        assert_eq!(efp_compose(&p3, &ExtendedPropagator::identity(3)).unwrap(), p3);
        let left = efp_compose(&efp_compose(&p1, &p2).unwrap(), &p3).unwrap();
        let right = efp_compose(&p1, &efp_compose(&p2, &p3).unwrap()).unwrap();
        assert!((left.matrix - right.matrix).amax() < 1e-12 * p1.matrix.amax());
        assert_eq!(left.target, 0);
        assert_eq!(left.source, 3);
        assert_eq!(
            efp_compose(&p1, &p3),
            Err(DynamicsError::ChainMismatch { left_source: 1, right_target: 2 })
        );
    }

    #[test]
    fn path_inverse_inertia_reduces_and_matches_operational_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let t = random_tree(&mut rng, 8);
            let q = random_configuration(&mut rng, &t);
            let abi = abi_backward(&silent(), &t, &q).unwrap();
            let i = t.n_bodies();
            let one = path_inverse_inertia(&abi, t.parent(i), i).unwrap();
            assert!((one - abi.omega(i)).amax() < 1e-14 * one.amax().max(1.0));
            // recursion ^jΩᵢ = Ωᵢ + Pᵢᵀ ^jΩ_π(i) Pᵢ
            let p = t.parent(i);
            if p != 0 {
                let full = path_inverse_inertia(&abi, 0, i).unwrap();
                let pm = abi.propagator(i);
                let rec = abi.omega(i) + pm.transpose() * path_inverse_inertia(&abi, 0, p).unwrap() * pm;
                assert!((full - rec).amax() < 1e-10 * full.amax());
            }
            let full = path_inverse_inertia(&abi, 0, i).unwrap();
            let eig = full.symmetric_eigenvalues();
            assert!(eig.min() > -1e-10 * full.amax());
            assert!((full - full.transpose()).amax() < 1e-10 * full.amax());
            let c = ConstraintSet::new(i).attach(i, ConstraintKind::Weld).unwrap();
            let lam = naive_delassus(&silent(), &t, &c, &q).unwrap();
            let err = (DMatrix::from_column_slice(6, 6, full.as_slice()) - &lam.matrix).amax() / lam.max_abs();
            assert!(err < 1e-8, "{err}");
            assert!(matches!(path_inverse_inertia(&abi, i, i), Err(DynamicsError::NotAncestor { .. })));
        }
    }

    #[test]
    fn fig1_agrees_with_oracle() {
        let (t, c) = generators::fig1();
        let sets = IndexSets::new(&t, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let q = random_configuration(&mut rng, &t);
            let oracle = naive_delassus(&silent(), &t, &c, &q).unwrap();
            for (name, f) in ALGOS {
                let err = f(&silent(), &t, &c, &sets, &q).unwrap().relative_error(&oracle);
                assert!(err < 1e-8, "{name}: {err}");
            }
        }
    }

    #[test]
    fn random_models_agree_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let (t, c) = random_model(&mut rng, &RandomModelSpec::default());
            let sets = IndexSets::new(&t, &c);
            let q = random_configuration(&mut rng, &t);
            let oracle = naive_delassus(&silent(), &t, &c, &q).unwrap();
            for (name, f) in ALGOS {
                let err = f(&silent(), &t, &c, &sets, &q).unwrap().relative_error(&oracle);
                assert!(err < 1e-8, "{name}: {err}");
            }
        }
    }

    #[test]
    fn disjoint_subtrees_couple_only_through_base() {
        // floating base with two constrained arms
        let mut links = generators::gen_chain(4, JointModel::revolute(Vector3::z()), Base::Floating).unwrap().links().to_vec();
        links[2].parent = 1;
        let t = KinematicTree::new(links);
        t.validate().unwrap();
        let c = ConstraintSet::new(4).attach(2, ConstraintKind::Weld).unwrap().attach(4, ConstraintKind::Weld).unwrap();
        let sets = IndexSets::new(&t, &c);
        let q = random_configuration(&mut ChaCha8Rng::seed_from_u64(1), &t);
        let oracle = naive_delassus(&silent(), &t, &c, &q).unwrap();
        let l = pv_osim(&silent(), &t, &c, &sets, &q).unwrap();
        assert!(l.relative_error(&oracle) < 1e-8);
        assert!(l.matrix.view((0, 6), (6, 6)).amax() > 1e-3);
    }

    #[test]
    fn chain_with_tip_weld_matches_pv_osim_bitwise() {
        let t = generators::gen_chain(6, JointModel::revolute(Vector3::z()), Base::Floating).unwrap();
        let c = ConstraintSet::new(6).attach(6, ConstraintKind::Weld).unwrap();
        let sets = IndexSets::new(&t, &c);
        let q = random_configuration(&mut ChaCha8Rng::seed_from_u64(9), &t);
        let a = pv_osim(&silent(), &t, &c, &sets, &q).unwrap();
        let b = pv_osimr(&silent(), &t, &c, &sets, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_step_matches_dense_step_with_fewer_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let t = random_tree(&mut rng, 6);
            let abi = abi_backward(&silent(), &t, &random_configuration(&mut rng, &t)).unwrap();
            for i in 1..=6 {
                let (fast, slow) = (Arith::counting(), Arith::counting());
                let mut id = Block::Identity;
                let mut full = Block::Dense(Cols::identity(6));
                let ks_id = joint_step(&fast, &abi, i, &mut id, None, true);
                let ks_full = joint_step(&slow, &abi, i, &mut full, None, true);
                assert!((&ks_id - &ks_full).amax() <= 1e-14 * ks_full.amax().max(1.0));
                let (a, b) = (id.to_dense(), full.to_dense());
                assert!((&a - &b).amax() <= 1e-12 * b.amax().max(1.0));
                assert!(fast.tally().total() < slow.tally().total());
            }
        }
    }

    #[test]
    fn efpa_diagonal_matches_pv_osim() {
        let (t, c) = generators::humanoid();
        let sets = IndexSets::new(&t, &c);
        let q = random_configuration(&mut ChaCha8Rng::seed_from_u64(6), &t);
        let a = pv_osim(&silent(), &t, &c, &sets, &q).unwrap();
        let b = efpa(&silent(), &t, &c, &sets, &q).unwrap();
        for (k, off) in c.row_offsets().into_iter().enumerate() {
            let n = c.ee(k).rows();
            let da = a.matrix.view((off, off), (n, n)).into_owned();
            let db = b.matrix.view((off, off), (n, n)).into_owned();
            assert!((&da - &db).amax() <= 1e-9 * da.amax());
        }
    }

    #[test]
    fn visit_log_skips_unconstrained_links() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let (t, c) = random_model(&mut rng, &RandomModelSpec::default());
            let sets = IndexSets::new(&t, &c);
            let q = random_configuration(&mut rng, &t);
            let (_, log) = pv_osimr_instrumented(&silent(), &t, &c, &sets, &q).unwrap();
            for &i in log.inverse_inertia_sweep.iter().chain(&log.propagator_sweep).chain(&log.assembly) {
                assert!(sets.is_branching(i), "link {i} visited outside branching set");
                assert!(!sets.es(i).is_empty());
            }
            for &i in &log.segment_sweep {
                assert!(!sets.es(i).is_empty());
            }
        }
    }
}
