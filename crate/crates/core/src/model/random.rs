//! Seeded random trees, models and configurations for testing.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::Rng;

use super::{Configuration, ConstraintKind, ConstraintSet, JointModel, KinematicTree, Link};
use crate::spatial::{PluckerTransform, SpatialInertia};

/// Shape parameters for [`random_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelSpec {
    pub min_links: usize,
    pub max_links: usize,
    pub min_constraints: usize,
    pub max_constraints: usize,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self { min_links: 3, max_links: 40, min_constraints: 1, max_constraints: 6 }
    }
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let axis = random_unit_vector(rng);
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    UnitQuaternion::from_scaled_axis(axis * angle).to_rotation_matrix().into_inner()
}

pub fn random_transform<R: Rng>(rng: &mut R) -> PluckerTransform {
    let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    PluckerTransform::new(random_rotation(rng), t)
}

pub fn random_inertia<R: Rng>(rng: &mut R) -> SpatialInertia {
    let mass = rng.random_range(0.5..2.0);
    let dims = Vector3::new(rng.random_range(0.1..1.0), rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let com = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let body = SpatialInertia::solid_box(mass, dims, Vector3::zeros());
    let r = random_rotation(rng);
    SpatialInertia::new(mass, com, r * body.rot_inertia * r.transpose())
}

fn random_joint<R: Rng>(rng: &mut R) -> JointModel {
    match rng.random_range(0..5) {
        0 | 1 => JointModel::revolute(random_unit_vector(rng)),
        2 => JointModel::prismatic(random_unit_vector(rng)),
        _ => JointModel::Spherical,
    }
}

/// Random tree with `n` links: a free-flyer or random joint at link 1, random
/// joints elsewhere, parents biased toward long paths.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> KinematicTree {
    let links = (1..=n)
        .map(|i| {
            let parent = if i == 1 {
                0
            } else if rng.random_bool(0.5) {
                i - 1
            } else {
                rng.random_range(1..i)
            };
            let joint = if i == 1 && rng.random_bool(0.5) { JointModel::FreeFlyer } else { random_joint(rng) };
            Link {
                name: format!("link{i}"),
                parent,
                joint,
                placement: random_transform(rng),
                inertia: random_inertia(rng),
            }
        })
        .collect();
    KinematicTree::new(links)
}

/// Random weld or connect constraint (connect at a random point).
pub fn random_constraint<R: Rng>(rng: &mut R) -> ConstraintKind {
    if rng.random_bool(0.5) {
        ConstraintKind::Weld
    } else {
        let p = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        ConstraintKind::Connect { point: p }
    }
}

pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomModelSpec) -> (KinematicTree, ConstraintSet) {
    let n = rng.random_range(spec.min_links..=spec.max_links);
    let tree = random_tree(rng, n);
    let mut cons = ConstraintSet::new(n);
    for _ in 0..rng.random_range(spec.min_constraints..=spec.max_constraints) {
        let kind = random_constraint(rng);
        cons.push(rng.random_range(1..=n), kind).expect("weld and connect have full rank");
    }
    (tree, cons)
}

pub fn random_configuration<R: Rng>(rng: &mut R, tree: &KinematicTree) -> Configuration {
    let mut q = Vec::with_capacity(tree.nq());
    for i in 1..=tree.n_bodies() {
        match tree.joint(i) {
            JointModel::Revolute { .. } => q.push(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
            JointModel::Prismatic { .. } => q.push(rng.random_range(-1.0..1.0)),
            JointModel::Spherical => q.extend(random_quaternion(rng)),
            JointModel::FreeFlyer => {
                q.extend(random_quaternion(rng));
                q.extend((0..3).map(|_| rng.random_range(-1.0..1.0)));
            }
            JointModel::Fixed => {}
        }
    }
    Configuration::new(q)
}

fn random_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    let q = UnitQuaternion::from_matrix(&random_rotation(rng));
    [q.w, q.i, q.j, q.k]
}

pub fn random_velocity<R: Rng>(rng: &mut R, tree: &KinematicTree) -> Vec<f64> {
    (0..tree.nv()).map(|_| rng.random_range(-1.0..1.0)).collect()
}
