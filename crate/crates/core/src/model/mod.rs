//! Kinematic-tree data model.
//!
//! Links are numbered `1..=n_b` with every parent preceding its children;
//! index `0` is the inertial world frame. End-effectors (fictitious links
//! carrying constraints) live in [`ConstraintSet`] and are numbered
//! `n_b + 1 ..= n_b + m_b` in attachment order.

mod constraints;
pub mod format;
pub mod generators;
mod index_sets;
pub mod random;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{DynamicsError, ModelError};
use crate::spatial::{self, Abi, Arith, MotionSubspace, PluckerTransform, SpatialInertia};

pub use constraints::{ConstraintKind, ConstraintSet, EndEffector};
pub use index_sets::IndexSets;

/// Joint connecting a link to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JointModel {
    Revolute { axis: Vector3<f64> },
    Prismatic { axis: Vector3<f64> },
    Spherical,
    FreeFlyer,
    Fixed,
}

impl JointModel {
    pub fn revolute(axis: Vector3<f64>) -> Self {
        JointModel::Revolute { axis }
    }

    pub fn prismatic(axis: Vector3<f64>) -> Self {
        JointModel::Prismatic { axis }
    }

    /// Velocity degrees of freedom.
    pub fn nv(&self) -> usize {
        self.subspace().dof()
    }

    /// Position coordinates (quaternions take four).
    pub fn nq(&self) -> usize {
        match self {
            JointModel::Revolute { .. } | JointModel::Prismatic { .. } => 1,
            JointModel::Spherical => 4,
            JointModel::FreeFlyer => 7,
            JointModel::Fixed => 0,
        }
    }

    pub fn subspace(&self) -> MotionSubspace {
        match *self {
            JointModel::Revolute { axis } => MotionSubspace::Revolute(axis),
            JointModel::Prismatic { axis } => MotionSubspace::Prismatic(axis),
            JointModel::Spherical => MotionSubspace::Spherical,
            JointModel::FreeFlyer => MotionSubspace::Free,
            JointModel::Fixed => MotionSubspace::Fixed,
        }
    }

    /// Neutral coordinates (zero angle, identity quaternion).
    pub fn neutral(&self) -> Vec<f64> {
        match self {
            JointModel::Revolute { .. } | JointModel::Prismatic { .. } => vec![0.0],
            JointModel::Spherical => vec![1.0, 0.0, 0.0, 0.0],
            JointModel::FreeFlyer => vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            JointModel::Fixed => vec![],
        }
    }

    /// Parent-to-child transform `X_J(q) ∘ placement`.
    ///
    /// Quaternions are `(w, x, y, z)`; a free-flyer stores the quaternion
    /// followed by the child origin in the joint frame.
    pub fn transform(&self, ar: &Arith, placement: &PluckerTransform, q: &[f64]) -> PluckerTransform {
        match self {
            JointModel::Revolute { axis } => {
                let r = spatial::axis_angle_rotation(ar, axis, q[0]);
                PluckerTransform::new(ar.mat3_mul(&r.transpose(), &placement.rotation), placement.translation)
            }
            JointModel::Prismatic { axis } => {
                let d = ar.scale3(q[0], axis);
                let t = ar.add3(&placement.translation, &ar.mat3t_vec(&placement.rotation, &d));
                PluckerTransform::new(placement.rotation, t)
            }
            JointModel::Spherical => {
                let r = spatial::quaternion_rotation(ar, &q[0..4]);
                PluckerTransform::new(ar.mat3_mul(&r.transpose(), &placement.rotation), placement.translation)
            }
            JointModel::FreeFlyer => {
                let r = spatial::quaternion_rotation(ar, &q[0..4]);
                let p = Vector3::new(q[4], q[5], q[6]);
                let t = ar.add3(&placement.translation, &ar.mat3t_vec(&placement.rotation, &p));
                PluckerTransform::new(ar.mat3_mul(&r.transpose(), &placement.rotation), t)
            }
            JointModel::Fixed => *placement,
        }
    }

    fn axis(&self) -> Option<&Vector3<f64>> {
        match self {
            JointModel::Revolute { axis } | JointModel::Prismatic { axis } => Some(axis),
            _ => None,
        }
    }
}

/// One physical link and the joint attaching it to its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    /// Parent link index, `0` for the world.
    pub parent: usize,
    pub joint: JointModel,
    /// Parent frame to joint frame (before joint motion).
    pub placement: PluckerTransform,
    pub inertia: SpatialInertia,
}

/// Immutable kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    links: Vec<Link>,
    children: Vec<Vec<usize>>,
    inertia_matrices: Vec<Abi>,
    v_offset: Vec<usize>,
    q_offset: Vec<usize>,
    depth: Vec<usize>,
    nv: usize,
    nq: usize,
}

impl KinematicTree {
    /// Builds the derived tables. Call [`KinematicTree::validate`] before use.
    pub fn new(links: Vec<Link>) -> Self {
        let nb = links.len();
        let mut children = vec![Vec::new(); nb + 1];
        let mut inertia_matrices = vec![Abi::zeros(); nb + 1];
        let mut v_offset = vec![0; nb + 1];
        let mut q_offset = vec![0; nb + 1];
        let mut depth = vec![0; nb + 1];
        let (mut nv, mut nq) = (0, 0);
        for (k, link) in links.iter().enumerate() {
            let i = k + 1;
            if link.parent <= nb {
                children[link.parent].push(i);
            }
            if link.parent < i {
                depth[i] = depth[link.parent] + 1;
            }
            inertia_matrices[i] = link.inertia.to_matrix();
            v_offset[i] = nv;
            q_offset[i] = nq;
            nv += link.joint.nv();
            nq += link.joint.nq();
        }
        Self { links, children, inertia_matrices, v_offset, q_offset, depth, nv, nq }
    }

    /// Checks ordering, masses, axes and joint placement rules.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.links.is_empty() {
            return Err(ModelError::EmptyTree);
        }
        for (k, link) in self.links.iter().enumerate() {
            let i = k + 1;
            if link.parent >= i {
                return Err(ModelError::NonTopologicalOrder { link: i, parent: link.parent });
            }
            if !link.inertia.is_physical() {
                return Err(ModelError::NonPositiveMass { link: i });
            }
            if let Some(axis) = link.joint.axis() {
                if (axis.norm() - 1.0).abs() > 1e-12 {
                    return Err(ModelError::BadAxis { link: i });
                }
            }
            match link.joint {
                JointModel::Fixed => return Err(ModelError::UnmergedFixedJoint { link: i }),
                JointModel::FreeFlyer if link.parent != 0 => {
                    return Err(ModelError::MisplacedFreeFlyer { link: i })
                }
                _ => {}
            }
            if link.placement.orthonormality_error() > 1e-9 {
                return Err(ModelError::InvalidGeometry(format!("placement of link {i} is not a rotation")));
            }
        }
        Ok(())
    }

    pub fn n_bodies(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i - 1]
    }

    pub fn parent(&self, i: usize) -> usize {
        self.links[i - 1].parent
    }

    /// Parent array `[π(1), …, π(n_b)]`.
    pub fn parents(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.parent).collect()
    }

    /// Children of link `i` (`i = 0` for the world).
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn joint(&self, i: usize) -> &JointModel {
        &self.links[i - 1].joint
    }

    /// Expanded 6x6 spatial inertia of link `i` in its own frame.
    pub fn inertia_matrix(&self, i: usize) -> &Abi {
        &self.inertia_matrices[i]
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn v_range(&self, i: usize) -> std::ops::Range<usize> {
        let o = self.v_offset[i];
        o..o + self.joint(i).nv()
    }

    pub fn q_range(&self, i: usize) -> std::ops::Range<usize> {
        let o = self.q_offset[i];
        o..o + self.joint(i).nq()
    }

    /// Number of joints between the world and link `i`.
    pub fn depth_of(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// Depth of the tree (longest root path).
    pub fn depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Proper ancestors of `i`, nearest first, ending with the world `0`.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = i;
        std::iter::from_fn(move || {
            if cur == 0 {
                return None;
            }
            cur = self.parent(cur);
            Some(cur)
        })
    }

    /// True when `a` is `i` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, a: usize, i: usize) -> bool {
        a == i || self.ancestors(i).any(|j| j == a)
    }

    pub fn has_floating_base(&self) -> bool {
        self.links.iter().any(|l| matches!(l.joint, JointModel::FreeFlyer))
    }

    /// Local parent-to-child transforms `X_i` for every link (index 0 unused).
    pub fn local_transforms(&self, ar: &Arith, q: &Configuration) -> Result<Vec<PluckerTransform>, DynamicsError> {
        self.check_configuration(q)?;
        let mut out = vec![PluckerTransform::identity(); self.n_bodies() + 1];
        for i in 1..=self.n_bodies() {
            let link = self.link(i);
            out[i] = link.joint.transform(ar, &link.placement, &q.values[self.q_range(i)]);
        }
        Ok(out)
    }

    pub fn check_configuration(&self, q: &Configuration) -> Result<(), DynamicsError> {
        if q.values.len() != self.nq {
            return Err(DynamicsError::DimensionMismatch { expected: self.nq, got: q.values.len() });
        }
        Ok(())
    }

    pub fn neutral_configuration(&self) -> Configuration {
        Configuration::new(self.links.iter().flat_map(|l| l.joint.neutral()).collect())
    }
}

/// Generalized positions for every joint, concatenated in link order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<f64>,
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Checks that every quaternion block is unit length within 1e-9.
    pub fn is_normalized(&self, tree: &KinematicTree) -> bool {
        (1..=tree.n_bodies()).all(|i| match tree.joint(i) {
            JointModel::Spherical | JointModel::FreeFlyer => {
                let r = tree.q_range(i);
                let q = &self.values[r.start..r.start + 4];
                (q.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9
            }
            _ => true,
        })
    }

    /// Moves along joint velocity `v` for time `dt` (exact for constant `v`
    /// on each joint's own coordinates).
    pub fn integrate(&self, tree: &KinematicTree, v: &[f64], dt: f64) -> Configuration {
        let mut out = self.values.clone();
        for i in 1..=tree.n_bodies() {
            let qr = tree.q_range(i);
            let vr = tree.v_range(i);
            let q = &mut out[qr];
            let v = &v[vr];
            match tree.joint(i) {
                JointModel::Revolute { .. } | JointModel::Prismatic { .. } => q[0] += v[0] * dt,
                JointModel::Spherical => {
                    let next = quat_integrate(&q[0..4], &Vector3::new(v[0], v[1], v[2]), dt);
                    q[0..4].copy_from_slice(&next);
                }
                JointModel::FreeFlyer => {
                    // constant body twist: integrate with small substeps
                    let steps = 64;
                    let h = dt / steps as f64;
                    let w = Vector3::new(v[0], v[1], v[2]);
                    let lin = Vector3::new(v[3], v[4], v[5]);
                    let mut quat = [q[0], q[1], q[2], q[3]];
                    let mut p = Vector3::new(q[4], q[5], q[6]);
                    for _ in 0..steps {
                        let mid = quat_integrate(&quat, &w, 0.5 * h);
                        let r = quat_matrix(&mid);
                        p += r * lin * h;
                        quat = quat_integrate(&quat, &w, h);
                    }
                    q[0..4].copy_from_slice(&quat);
                    q[4] = p.x;
                    q[5] = p.y;
                    q[6] = p.z;
                }
                JointModel::Fixed => {}
            }
        }
        Configuration::new(out)
    }
}

fn quat_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    spatial::quaternion_rotation(&Arith::silent(), q)
}

/// `q ⊗ exp(ω dt / 2)` with body-frame angular velocity `ω`.
fn quat_integrate(q: &[f64], w: &Vector3<f64>, dt: f64) -> [f64; 4] {
    let angle = w.norm() * dt;
    let (s, c) = (0.5 * angle).sin_cos();
    let axis = if w.norm() > 0.0 { w / w.norm() } else { Vector3::zeros() };
    let d = [c, axis.x * s, axis.y * s, axis.z * s];
    let (a0, a1, a2, a3) = (q[0], q[1], q[2], q[3]);
    let (b0, b1, b2, b3) = (d[0], d[1], d[2], d[3]);
    let out = [
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ];
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    [out[0] / n, out[1] / n, out[2] / n, out[3] / n]
}
