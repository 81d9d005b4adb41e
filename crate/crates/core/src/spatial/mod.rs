//! 6-D spatial algebra.
//!
//! Convention: every spatial vector is stored angular part first, linear part
//! second. Motion vectors are `[ω; v]`, force vectors are `[n; f]`.
//!
//! A [`PluckerTransform`] `X` from frame A to frame B stores the rotation `E`
//! taking A coordinates to B coordinates and the position `r` of B's origin
//! expressed in A. It acts on motion vectors as
//!
//! ```text
//! ω_B = E ω_A
//! v_B = E (v_A - r × ω_A)
//! ```
//!
//! and on force vectors as `n_B = E (n_A - r × f_A)`, `f_B = E f_A`. The
//! dense 6x6 form is only ever built by [`PluckerTransform::to_motion_matrix`]
//! for checking.

pub mod arith;

use nalgebra::{DMatrix, Matrix3, Matrix6, Matrix6xX, Vector3, Vector6};

pub use arith::{Arith, OpTally};

/// Articulated-body (or any symmetric 6x6) inertia matrix.
pub type Abi = Matrix6<f64>;

/// Spatial motion vector (velocity or acceleration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMotion {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

/// Spatial force vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialForce {
    pub moment: Vector3<f64>,
    pub force: Vector3<f64>,
}

impl SpatialMotion {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.angular, &self.linear)
    }

    pub fn add(&self, ar: &Arith, o: &SpatialMotion) -> SpatialMotion {
        SpatialMotion::new(ar.add3(&self.angular, &o.angular), ar.add3(&self.linear, &o.linear))
    }

    pub fn scale(&self, ar: &Arith, s: f64) -> SpatialMotion {
        SpatialMotion::new(ar.scale3(s, &self.angular), ar.scale3(s, &self.linear))
    }
}

impl SpatialForce {
    pub fn new(moment: Vector3<f64>, force: Vector3<f64>) -> Self {
        Self { moment, force }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.moment, &self.force)
    }

    pub fn add(&self, ar: &Arith, o: &SpatialForce) -> SpatialForce {
        SpatialForce::new(ar.add3(&self.moment, &o.moment), ar.add3(&self.force, &o.force))
    }

    /// Dual pairing `⟨f, v⟩ = nᵀω + fᵀv` (power).
    pub fn pair(&self, ar: &Arith, v: &SpatialMotion) -> f64 {
        ar.add(ar.dot3(&self.moment, &v.angular), ar.dot3(&self.force, &v.linear))
    }
}

pub(crate) fn stack(top: &Vector3<f64>, bottom: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

fn split(v: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
}

/// Skew-symmetric matrix with `skew(a) * b == a × b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Rotation matrix whose columns are the axes of a frame rotated by `angle`
/// about the unit vector `axis` (Rodrigues' formula).
pub fn axis_angle_rotation(ar: &Arith, axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let t = ar.sub(1.0, c);
    let ta = ar.scale3(t, axis);
    let sa = ar.scale3(s, axis);
    let mut m = Matrix3::zeros();
    for r in 0..3 {
        for k in 0..3 {
            m[(r, k)] = ar.mul(ta[r], axis[k]);
        }
        m[(r, r)] = ar.add(m[(r, r)], c);
    }
    m[(0, 1)] = ar.sub(m[(0, 1)], sa.z);
    m[(1, 0)] = ar.add(m[(1, 0)], sa.z);
    m[(0, 2)] = ar.add(m[(0, 2)], sa.y);
    m[(2, 0)] = ar.sub(m[(2, 0)], sa.y);
    m[(1, 2)] = ar.sub(m[(1, 2)], sa.x);
    m[(2, 1)] = ar.add(m[(2, 1)], sa.x);
    m
}

/// Rotation matrix of the unit quaternion `(w, x, y, z)`.
pub fn quaternion_rotation(ar: &Arith, q: &[f64]) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let (xx, yy, zz) = (ar.mul(x, x), ar.mul(y, y), ar.mul(z, z));
    let (xy, xz, yz) = (ar.mul(x, y), ar.mul(x, z), ar.mul(y, z));
    let (wx, wy, wz) = (ar.mul(w, x), ar.mul(w, y), ar.mul(w, z));
    let two = |v: f64| ar.mul(2.0, v);
    Matrix3::new(
        ar.sub(1.0, two(ar.add(yy, zz))),
        two(ar.sub(xy, wz)),
        two(ar.add(xz, wy)),
        two(ar.add(xy, wz)),
        ar.sub(1.0, two(ar.add(xx, zz))),
        two(ar.sub(yz, wx)),
        two(ar.sub(xz, wy)),
        two(ar.add(yz, wx)),
        ar.sub(1.0, two(ar.add(xx, yy))),
    )
}

/// Plücker coordinate transform in compact rotation + translation form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerTransform {
    /// `E`: maps source-frame coordinates to target-frame coordinates.
    pub rotation: Matrix3<f64>,
    /// `r`: target origin expressed in the source frame.
    pub translation: Vector3<f64>,
}

impl Default for PluckerTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl PluckerTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn translation(r: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), r)
    }

    /// Transform into a frame whose axes are `frame_axes` (columns, expressed
    /// in the source frame) and whose origin sits at `origin`.
    pub fn from_frame(frame_axes: Matrix3<f64>, origin: Vector3<f64>) -> Self {
        Self::new(frame_axes.transpose(), origin)
    }

    /// Deviation of the rotation from orthonormality, `‖EᵀE − I‖∞`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    pub fn motion(&self, ar: &Arith, v: &Vector6<f64>) -> Vector6<f64> {
        let (w, lin) = split(v);
        let rw = ar.cross3(&self.translation, &w);
        let ang = ar.mat3_vec(&self.rotation, &w);
        let lin = ar.mat3_vec(&self.rotation, &ar.sub3(&lin, &rw));
        stack(&ang, &lin)
    }

    pub fn motion_inv(&self, ar: &Arith, v: &Vector6<f64>) -> Vector6<f64> {
        let (w, lin) = split(v);
        let ang = ar.mat3t_vec(&self.rotation, &w);
        let lin = ar.add3(&ar.mat3t_vec(&self.rotation, &lin), &ar.cross3(&self.translation, &ang));
        stack(&ang, &lin)
    }

    pub fn force(&self, ar: &Arith, f: &Vector6<f64>) -> Vector6<f64> {
        let (n, lin) = split(f);
        let rf = ar.cross3(&self.translation, &lin);
        let mom = ar.mat3_vec(&self.rotation, &ar.sub3(&n, &rf));
        let lin = ar.mat3_vec(&self.rotation, &lin);
        stack(&mom, &lin)
    }

    /// `Xᵀ f`: a force expressed in the target frame, re-expressed in the source frame.
    pub fn force_inv(&self, ar: &Arith, f: &Vector6<f64>) -> Vector6<f64> {
        let (n, lin) = split(f);
        let lin = ar.mat3t_vec(&self.rotation, &lin);
        let mom = ar.add3(&ar.mat3t_vec(&self.rotation, &n), &ar.cross3(&self.translation, &lin));
        stack(&mom, &lin)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, ar: &Arith, first: &PluckerTransform) -> PluckerTransform {
        let rotation = ar.mat3_mul(&self.rotation, &first.rotation);
        let translation =
            ar.add3(&first.translation, &ar.mat3t_vec(&first.rotation, &self.translation));
        PluckerTransform::new(rotation, translation)
    }

    pub fn inverse(&self, ar: &Arith) -> PluckerTransform {
        let t = ar.mat3_vec(&self.rotation, &self.translation);
        PluckerTransform::new(self.rotation.transpose(), -t)
    }

    /// Applies `force_inv` to every column of a 6xw matrix in place.
    pub fn force_inv_columns(&self, ar: &Arith, m: &mut Matrix6xX<f64>) {
        for c in 0..m.ncols() {
            let col: Vector6<f64> = m.column(c).into_owned();
            m.set_column(c, &self.force_inv(ar, &col));
        }
    }

    /// Applies `motion` to every column of a 6xw matrix in place.
    pub fn motion_columns(&self, ar: &Arith, m: &mut Matrix6xX<f64>) {
        for c in 0..m.ncols() {
            let col: Vector6<f64> = m.column(c).into_owned();
            m.set_column(c, &self.motion(ar, &col));
        }
    }

    /// Congruence `X⁻ᵀ H X⁻¹`: a source-frame inertia re-expressed in the target frame.
    pub fn inertia(&self, ar: &Arith, h: &Abi) -> Abi {
        let shifted = translate_inertia(ar, h, &self.translation, -1.0);
        rotate_inertia(ar, &shifted, &self.rotation, false)
    }

    /// Congruence `Xᵀ H X`: a target-frame inertia re-expressed in the source frame.
    pub fn inertia_inv(&self, ar: &Arith, h: &Abi) -> Abi {
        let rotated = rotate_inertia(ar, h, &self.rotation, true);
        translate_inertia(ar, &rotated, &self.translation, 1.0)
    }

    /// Dense 6x6 motion transform, for checks only.
    pub fn to_motion_matrix(&self) -> Matrix6<f64> {
        let e = self.rotation;
        let mut x = Matrix6::zeros();
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-e * skew(&self.translation)));
        x
    }
}

/// `H' = xlt(r)^{-T} H xlt(r)^{-1}` for `sign = -1` and `xlt(r)ᵀ H xlt(r)` for `sign = +1`.
fn translate_inertia(ar: &Arith, h: &Abi, r: &Vector3<f64>, sign: f64) -> Abi {
    let a: Matrix3<f64> = h.fixed_view::<3, 3>(0, 0).into();
    let b: Matrix3<f64> = h.fixed_view::<3, 3>(0, 3).into();
    let c: Matrix3<f64> = h.fixed_view::<3, 3>(3, 3).into();
    let rc = ar.skew_mul(r, &c);
    let rbt = ar.skew_mul(r, &b.transpose());
    // (R C) R = -(R (R C)ᵀ)ᵀ
    let rcr_neg_t = ar.skew_mul(r, &rc.transpose());
    let (a_new, b_new) = if sign < 0.0 {
        // A - R Bᵀ + B R - R C R,  B - R C
        let t = ar.mat3_sub(&a, &rbt);
        let t = ar.mat3_sub(&t, &rbt.transpose());
        (ar.mat3_add(&t, &rcr_neg_t.transpose()), ar.mat3_sub(&b, &rc))
    } else {
        // A + R Bᵀ - B R - R C R,  B + R C
        let t = ar.mat3_add(&a, &rbt);
        let t = ar.mat3_add(&t, &rbt.transpose());
        (ar.mat3_add(&t, &rcr_neg_t.transpose()), ar.mat3_add(&b, &rc))
    };
    assemble_inertia(&a_new, &b_new, &c)
}

/// Block rotation `E H Eᵀ` per 3x3 block, or `Eᵀ H E` when `transpose` is set.
fn rotate_inertia(ar: &Arith, h: &Abi, e: &Matrix3<f64>, transpose: bool) -> Abi {
    let et = e.transpose();
    let apply = |m: &Matrix3<f64>| -> Matrix3<f64> {
        if transpose {
            // Eᵀ M E
            let t = ar.mat3_mul(&et, m);
            ar.mat3_mul(&t, e)
        } else {
            // E M Eᵀ
            let t = ar.mat3_mul(e, m);
            ar.mat3_mul_t(&t, e)
        }
    };
    let a = apply(&h.fixed_view::<3, 3>(0, 0).into());
    let b = apply(&h.fixed_view::<3, 3>(0, 3).into());
    let c = apply(&h.fixed_view::<3, 3>(3, 3).into());
    assemble_inertia(&a, &b, &c)
}

fn assemble_inertia(a: &Matrix3<f64>, b: &Matrix3<f64>, c: &Matrix3<f64>) -> Abi {
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&b.transpose());
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(c);
    out
}

pub fn transform_motion(ar: &Arith, x: &PluckerTransform, v: &SpatialMotion) -> SpatialMotion {
    SpatialMotion::from_vector(&x.motion(ar, &v.to_vector()))
}

pub fn transform_force(ar: &Arith, x: &PluckerTransform, f: &SpatialForce) -> SpatialForce {
    SpatialForce::from_vector(&x.force(ar, &f.to_vector()))
}

pub fn transform_inertia(ar: &Arith, x: &PluckerTransform, h: &Abi) -> Abi {
    x.inertia(ar, h)
}

/// Rigid-body inertia parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialInertia {
    pub mass: f64,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the centre of mass.
    pub rot_inertia: Matrix3<f64>,
}

impl SpatialInertia {
    pub fn new(mass: f64, com: Vector3<f64>, rot_inertia: Matrix3<f64>) -> Self {
        Self { mass, com, rot_inertia }
    }

    /// Massless, inertia-free body (used as the neutral element when merging).
    pub fn zero() -> Self {
        Self::new(0.0, Vector3::zeros(), Matrix3::zeros())
    }

    /// Uniform solid box with side lengths `dims`, centre of mass at `com`.
    pub fn solid_box(mass: f64, dims: Vector3<f64>, com: Vector3<f64>) -> Self {
        let (x2, y2, z2) = (dims.x * dims.x, dims.y * dims.y, dims.z * dims.z);
        let k = mass / 12.0;
        Self::new(mass, com, Matrix3::from_diagonal(&Vector3::new(k * (y2 + z2), k * (x2 + z2), k * (x2 + y2))))
    }

    /// Expanded 6x6 matrix `[I_c + m c× c×ᵀ, m c×; m c×ᵀ, m 1]`.
    pub fn to_matrix(&self) -> Abi {
        let cx = skew(&self.com);
        let m = self.mass;
        let a = self.rot_inertia + cx * cx.transpose() * m;
        let a = (a + a.transpose()) * 0.5;
        assemble_inertia(&a, &(cx * m), &(Matrix3::identity() * m))
    }

    /// Recovers the parameters of a rigid-body 6x6 inertia matrix.
    pub fn from_matrix(h: &Abi) -> Self {
        let m = h[(3, 3)];
        if m == 0.0 {
            return Self::zero();
        }
        let mcx: Matrix3<f64> = h.fixed_view::<3, 3>(0, 3).into();
        let com = Vector3::new(mcx[(2, 1)], mcx[(0, 2)], mcx[(1, 0)]) / m;
        let cx = skew(&com);
        let a: Matrix3<f64> = h.fixed_view::<3, 3>(0, 0).into();
        let rot = a - cx * cx.transpose() * m;
        Self::new(m, com, (rot + rot.transpose()) * 0.5)
    }

    /// This inertia, given in frame `A`, re-expressed in frame `B` where `x: A → B`.
    pub fn transformed(&self, x: &PluckerTransform) -> SpatialInertia {
        let ar = Arith::silent();
        Self::from_matrix(&x.inertia(&ar, &self.to_matrix()))
    }

    /// Checks `mass > 0` and a symmetric positive-definite rotational inertia.
    pub fn is_physical(&self) -> bool {
        if !(self.mass > 0.0) {
            return false;
        }
        let sym = (self.rot_inertia - self.rot_inertia.transpose()).amax()
            <= 1e-9 * self.rot_inertia.amax().max(1.0);
        sym && nalgebra::Cholesky::new(self.rot_inertia).is_some()
    }
}

/// Joint motion subspace `S` (6 x n_i), stored by structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionSubspace {
    /// `[a; 0]`
    Revolute(Vector3<f64>),
    /// `[0; a]`
    Prismatic(Vector3<f64>),
    /// `[1₃; 0]`
    Spherical,
    /// `1₆`
    Free,
    /// no motion
    Fixed,
}

impl MotionSubspace {
    pub fn dof(&self) -> usize {
        match self {
            MotionSubspace::Revolute(_) | MotionSubspace::Prismatic(_) => 1,
            MotionSubspace::Spherical => 3,
            MotionSubspace::Free => 6,
            MotionSubspace::Fixed => 0,
        }
    }

    /// Dense 6 x n_i matrix, for checks and dense baselines.
    pub fn to_matrix(&self) -> Matrix6xX<f64> {
        let mut s = Matrix6xX::zeros(self.dof());
        match self {
            MotionSubspace::Revolute(a) => s.fixed_view_mut::<3, 1>(0, 0).copy_from(a),
            MotionSubspace::Prismatic(a) => s.fixed_view_mut::<3, 1>(3, 0).copy_from(a),
            MotionSubspace::Spherical => {
                for k in 0..3 {
                    s[(k, k)] = 1.0;
                }
            }
            MotionSubspace::Free => {
                for k in 0..6 {
                    s[(k, k)] = 1.0;
                }
            }
            MotionSubspace::Fixed => {}
        }
        s
    }

    /// `Sᵀ f` for one force vector.
    pub fn project(&self, ar: &Arith, f: &Vector6<f64>) -> Vec<f64> {
        match self {
            MotionSubspace::Revolute(a) => {
                vec![ar.dot(a.iter().copied(), f.fixed_rows::<3>(0).iter().copied())]
            }
            MotionSubspace::Prismatic(a) => {
                vec![ar.dot(a.iter().copied(), f.fixed_rows::<3>(3).iter().copied())]
            }
            MotionSubspace::Spherical => f.fixed_rows::<3>(0).iter().copied().collect(),
            MotionSubspace::Free => f.iter().copied().collect(),
            MotionSubspace::Fixed => Vec::new(),
        }
    }

    /// `Sᵀ M` for a 6 x w matrix: n_i x w.
    pub fn project_columns(&self, ar: &Arith, m: &Matrix6xX<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dof(), m.ncols());
        for c in 0..m.ncols() {
            let col: Vector6<f64> = m.column(c).into_owned();
            for (r, v) in self.project(ar, &col).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// `S c` for joint-space coefficients `c` (length n_i).
    pub fn expand(&self, ar: &Arith, c: &[f64]) -> Vector6<f64> {
        match self {
            MotionSubspace::Revolute(a) => {
                let v = ar.scale3(c[0], a);
                stack(&v, &Vector3::zeros())
            }
            MotionSubspace::Prismatic(a) => {
                let v = ar.scale3(c[0], a);
                stack(&Vector3::zeros(), &v)
            }
            MotionSubspace::Spherical => Vector6::new(c[0], c[1], c[2], 0.0, 0.0, 0.0),
            MotionSubspace::Free => Vector6::from_column_slice(c),
            MotionSubspace::Fixed => Vector6::zeros(),
        }
    }

    /// `H S` (6 x n_i).
    pub fn inertia_times(&self, ar: &Arith, h: &Abi) -> Matrix6xX<f64> {
        let n = self.dof();
        let mut u = Matrix6xX::zeros(n);
        match self {
            MotionSubspace::Revolute(a) | MotionSubspace::Prismatic(a) => {
                let off = if matches!(self, MotionSubspace::Revolute(_)) { 0 } else { 3 };
                for r in 0..6 {
                    u[(r, 0)] = ar.dot((0..3).map(|k| h[(r, off + k)]), a.iter().copied());
                }
            }
            MotionSubspace::Spherical => u.copy_from(&h.fixed_columns::<3>(0)),
            MotionSubspace::Free => u.copy_from(h),
            MotionSubspace::Fixed => {}
        }
        u
    }

    /// `Sᵀ U` for a 6 x n_i matrix `U`, giving n_i x n_i.
    pub fn project_square(&self, ar: &Arith, u: &Matrix6xX<f64>) -> DMatrix<f64> {
        self.project_columns(ar, u)
    }

    /// Column indices where `Sᵀ` has structurally nonzero entries.
    pub fn support(&self) -> std::ops::Range<usize> {
        match self {
            MotionSubspace::Revolute(_) | MotionSubspace::Spherical => 0..3,
            MotionSubspace::Prismatic(_) => 3..6,
            MotionSubspace::Free => 0..6,
            MotionSubspace::Fixed => 0..0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rot_from(v: [f64; 3]) -> Matrix3<f64> {
        let axis = Vector3::new(v[0], v[1], v[2]);
        let angle = axis.norm();
        if angle < 1e-9 {
            return Matrix3::identity();
        }
        axis_angle_rotation(&Arith::silent(), &(axis / angle), angle)
    }

    fn arb_transform() -> impl Strategy<Value = PluckerTransform> {
        (prop::array::uniform3(-3.0..3.0f64), prop::array::uniform3(-2.0..2.0f64))
            .prop_map(|(w, t)| PluckerTransform::new(rot_from(w), Vector3::from(t)))
    }

    fn arb_vec6() -> impl Strategy<Value = Vector6<f64>> {
        prop::array::uniform6(-5.0..5.0f64).prop_map(|a| Vector6::from_column_slice(&a))
    }

    fn arb_inertia() -> impl Strategy<Value = SpatialInertia> {
        (0.1..5.0f64, prop::array::uniform3(-1.0..1.0f64), prop::array::uniform3(0.05..2.0f64), prop::array::uniform3(-3.0..3.0f64))
            .prop_map(|(m, c, d, w)| {
                let r = rot_from(w);
                let inertia = r * Matrix3::from_diagonal(&Vector3::from(d)) * r.transpose();
                SpatialInertia::new(m, Vector3::from(c), inertia)
            })
    }

    #[test]
    fn identity_leaves_vectors() {
        let ar = Arith::silent();
        let x = PluckerTransform::identity();
        let v = SpatialMotion::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0));
        assert_eq!(transform_motion(&ar, &x, &v), v);
        let f = SpatialForce::new(Vector3::new(-1.0, 0.5, 2.0), Vector3::new(0.0, 1.0, -1.0));
        assert_eq!(transform_force(&ar, &x, &f), f);
        let h = SpatialInertia::solid_box(2.0, Vector3::new(1.0, 0.2, 0.3), Vector3::new(0.5, 0.0, 0.0)).to_matrix();
        assert_relative_eq!(transform_inertia(&ar, &x, &h), h, epsilon = 1e-15);
    }

    #[test]
    fn pure_translation_couples_angular_into_linear() {
        // v = (ω, 0) seen from a frame at offset t: linear part becomes ω × t.
        let ar = Arith::silent();
        let t = Vector3::new(1.0, 0.0, 0.0);
        let w = Vector3::new(0.0, 0.0, 2.0);
        let out = transform_motion(&ar, &PluckerTransform::translation(t), &SpatialMotion::new(w, Vector3::zeros()));
        assert_eq!(out.angular, w);
        assert_relative_eq!(out.linear, w.cross(&t), epsilon = 1e-15);
    }

    #[test]
    fn motion_transform_cost() {
        let ar = Arith::counting();
        let x = PluckerTransform::new(rot_from([0.1, 0.2, 0.3]), Vector3::new(1.0, 2.0, 3.0));
        x.motion(&ar, &Vector6::repeat(1.0));
        assert_eq!(ar.tally(), OpTally { mul: 24, add_sub: 18, div: 0, sqrt: 0 });
    }

    #[test]
    fn inverse_composition_recovers_force() {
        let ar = Arith::silent();
        let x = PluckerTransform::new(rot_from([0.4, -1.0, 0.3]), Vector3::new(0.3, -2.0, 1.0));
        let f = Vector6::new(1.0, -2.0, 3.0, 0.5, 0.25, -1.0);
        let round = x.inverse(&ar).compose(&ar, &x);
        assert_relative_eq!(round.force(&ar, &f), f, epsilon = 1e-12);
    }

    #[test]
    fn inertia_round_trip() {
        let ar = Arith::silent();
        let x = PluckerTransform::new(rot_from([1.0, 0.3, -0.7]), Vector3::new(0.2, 1.5, -0.4));
        let h = SpatialInertia::solid_box(3.0, Vector3::new(0.4, 0.1, 0.7), Vector3::new(0.1, 0.2, 0.3)).to_matrix();
        let back = x.inverse(&ar).inertia(&ar, &x.inertia(&ar, &h));
        assert_relative_eq!(back, h, epsilon = 1e-10);
        assert_relative_eq!(x.inertia_inv(&ar, &x.inertia(&ar, &h)), h, epsilon = 1e-10);
    }

    #[test]
    fn subspace_matches_dense_form() {
        let ar = Arith::silent();
        let h = SpatialInertia::solid_box(1.0, Vector3::new(1.0, 0.1, 0.1), Vector3::new(0.5, 0.0, 0.0)).to_matrix();
        let a = Vector3::new(0.0, 0.6, 0.8);
        for s in [MotionSubspace::Revolute(a), MotionSubspace::Prismatic(a), MotionSubspace::Spherical, MotionSubspace::Free] {
            let dense = s.to_matrix();
            assert_relative_eq!(s.inertia_times(&ar, &h), h * &dense, epsilon = 1e-14);
            let f = Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
            let proj = s.project(&ar, &f);
            let expected = dense.transpose() * f;
            assert_eq!(proj.len(), s.dof());
            for (p, e) in proj.iter().zip(expected.iter()) {
                assert_relative_eq!(p, e, epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn motion_matches_dense_matrix(x in arb_transform(), v in arb_vec6()) {
            let ar = Arith::silent();
            let dense = x.to_motion_matrix() * v;
            let diff = (x.motion(&ar, &v) - dense).amax();
            prop_assert!(diff < 1e-12 * (1.0 + dense.amax()));
        }

        #[test]
        fn dual_pairing_preserved(x in arb_transform(), v in arb_vec6(), f in arb_vec6()) {
            let ar = Arith::silent();
            let before = f.dot(&v);
            let after = x.force(&ar, &f).dot(&x.motion(&ar, &v));
            prop_assert!((before - after).abs() < 1e-12 * (1.0 + f.norm() * v.norm()) * 10.0);
        }

        #[test]
        fn composition_is_sequential_application(a in arb_transform(), b in arb_transform(), v in arb_vec6()) {
            let ar = Arith::silent();
            let lhs = b.compose(&ar, &a).motion(&ar, &v);
            let rhs = b.motion(&ar, &a.motion(&ar, &v));
            prop_assert!((lhs - rhs).amax() < 1e-11 * (1.0 + rhs.amax()));
        }

        #[test]
        fn inertia_transform_preserves_energy(x in arb_transform(), i in arb_inertia(), v in arb_vec6()) {
            let ar = Arith::silent();
            let h = i.to_matrix();
            let h2 = x.inertia(&ar, &h);
            let v2 = x.motion(&ar, &v);
            let e1 = v.dot(&(h * v));
            let e2 = v2.dot(&(h2 * v2));
            prop_assert!((e1 - e2).abs() < 1e-10 * h.norm() * (1.0 + v.norm_squared()));
            prop_assert!((h2 - h2.transpose()).amax() < 1e-10 * h.norm());
        }

        #[test]
        fn expanded_inertia_is_symmetric_psd(i in arb_inertia()) {
            let h = i.to_matrix();
            prop_assert!((h - h.transpose()).amax() == 0.0);
            let eig = h.symmetric_eigenvalues();
            prop_assert!(eig.min() >= -1e-12 * h.norm());
            let back = SpatialInertia::from_matrix(&h);
            prop_assert!((back.com - i.com).amax() < 1e-10);
        }
    }
}
