//! Synthetic mechanisms for the benchmark families.
//!
//! Every generated link is a 1 kg, 1 x 0.1 x 0.1 m box whose center of mass
//! sits half a unit along the link's x axis. A child joint frame is placed
//! one unit along the parent's x axis and twisted 90° about it, so that two
//! consecutive revolute z axes are orthogonal.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::{ConstraintKind, ConstraintSet, JointModel, KinematicTree, Link};
use crate::error::ModelError;
use crate::spatial::{PluckerTransform, SpatialInertia};

/// Attachment of the first link of a generated mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    Fixed,
    Floating,
}

/// Length of each side branch in [`gen_stem_branches`].
pub const DEFAULT_BRANCH_LEN: usize = 7;

pub fn default_inertia() -> SpatialInertia {
    SpatialInertia::solid_box(1.0, Vector3::new(1.0, 0.1, 0.1), Vector3::new(0.5, 0.0, 0.0))
}

/// Parent-to-joint placement of the next link along a chain.
pub fn chain_placement() -> PluckerTransform {
    let twist: Matrix3<f64> = Rotation3::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2).into_inner();
    PluckerTransform::from_frame(twist, Vector3::new(1.0, 0.0, 0.0))
}

fn side_placement(left: bool) -> PluckerTransform {
    let angle = if left { FRAC_PI_2 } else { -FRAC_PI_2 };
    let turn: Matrix3<f64> = Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner();
    PluckerTransform::from_frame(turn, Vector3::new(0.5, 0.0, 0.0))
}

fn link(name: String, parent: usize, joint: JointModel, placement: PluckerTransform) -> Link {
    Link { name, parent, joint, placement, inertia: default_inertia() }
}

/// Serial chain of `n` links. With a floating base, link 1 is a free-flyer and
/// the remaining links use `joint`.
pub fn gen_chain(n: usize, joint: JointModel, base: Base) -> Result<KinematicTree, ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyTree);
    }
    let links = (1..=n)
        .map(|i| {
            let j = if i == 1 && base == Base::Floating { JointModel::FreeFlyer } else { joint };
            let placement = if i == 1 { PluckerTransform::identity() } else { chain_placement() };
            link(format!("link{i}"), i - 1, j, placement)
        })
        .collect();
    let tree = KinematicTree::new(links);
    tree.validate()?;
    Ok(tree)
}

/// Fixed-base revolute chain of `k²` links with welds on links `k, 2k, …, k²`.
pub fn gen_chain_md(k: usize) -> Result<(KinematicTree, ConstraintSet), ModelError> {
    let tree = gen_chain(k * k, JointModel::revolute(Vector3::z()), Base::Fixed)?;
    let mut cons = ConstraintSet::new(tree.n_bodies());
    for j in 1..=k {
        cons.push(j * k, ConstraintKind::Weld)?;
    }
    Ok((tree, cons))
}

/// Fixed-base revolute chain of `n` links with a weld on every link.
pub fn gen_chain_all_constrained(n: usize) -> Result<(KinematicTree, ConstraintSet), ModelError> {
    let tree = gen_chain(n, JointModel::revolute(Vector3::z()), Base::Fixed)?;
    let mut cons = ConstraintSet::new(n);
    for i in 1..=n {
        cons.push(i, ConstraintKind::Weld)?;
    }
    Ok((tree, cons))
}

/// Stem link (1-based) carrying side branch `j` of `count`.
///
/// Branches are spread evenly from the root to the stem tip, rounding toward
/// the root, and alternate between the left and right side.
pub fn branch_attachment(j: usize, count: usize, stem_len: usize) -> usize {
    if count <= 1 {
        return 1;
    }
    1 + j * (stem_len - 1) / (count - 1)
}

/// A floating stem of `stem_len` revolute links with `2 * branches_per_side`
/// side branches of `branch_len` links, each tip welded.
pub fn gen_stem_branches(
    stem_len: usize,
    branches_per_side: usize,
    branch_len: usize,
) -> Result<(KinematicTree, ConstraintSet), ModelError> {
    if branches_per_side == 0 || stem_len == 0 || branch_len == 0 {
        return Err(ModelError::InvalidGeometry("stem, branch count and branch length must be positive".into()));
    }
    if stem_len < branches_per_side {
        return Err(ModelError::InvalidGeometry(format!(
            "stem of {stem_len} links cannot hold {branches_per_side} branches per side"
        )));
    }
    let revolute = JointModel::revolute(Vector3::z());
    let mut links = Vec::new();
    for i in 1..=stem_len {
        let (joint, placement) =
            if i == 1 { (JointModel::FreeFlyer, PluckerTransform::identity()) } else { (revolute, chain_placement()) };
        links.push(link(format!("stem{i}"), i - 1, joint, placement));
    }
    let count = 2 * branches_per_side;
    let mut tips = Vec::with_capacity(count);
    for j in 0..count {
        let at = branch_attachment(j, count, stem_len);
        for s in 0..branch_len {
            let parent = if s == 0 { at } else { links.len() };
            let placement = if s == 0 { side_placement(j % 2 == 0) } else { chain_placement() };
            links.push(link(format!("branch{j}_{}", s + 1), parent, revolute, placement));
        }
        tips.push(links.len());
    }
    let tree = KinematicTree::new(links);
    tree.validate()?;
    let mut cons = ConstraintSet::new(tree.n_bodies());
    for tip in tips {
        cons.push(tip, ConstraintKind::Weld)?;
    }
    Ok((tree, cons))
}

/// The six-link example tree with three welded end-effectors:
/// parents `[0,1,2,3,4,2]`, end-effectors 7, 8, 9 on links 6, 3, 5.
/// Link 1 is a free-flyer and the others are spherical.
pub fn fig1() -> (KinematicTree, ConstraintSet) {
    let parents = [0, 1, 2, 3, 4, 2];
    let links = parents
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let i = k + 1;
            let (joint, placement) =
                if i == 1 { (JointModel::FreeFlyer, PluckerTransform::identity()) } else { (JointModel::Spherical, chain_placement()) };
            link(format!("link{i}"), p, joint, placement)
        })
        .collect();
    let tree = KinematicTree::new(links);
    let mut cons = ConstraintSet::new(6);
    for l in [6, 3, 5] {
        cons.push(l, ConstraintKind::Weld).expect("valid fixture");
    }
    (tree, cons)
}

/// Floating humanoid-like tree: pelvis, two 6-DoF legs, 3-link torso, two
/// 7-DoF arms and a 2-DoF head (37 DoF), with four point contacts per foot.
pub fn humanoid() -> (KinematicTree, ConstraintSet) {
    let mut links = vec![link("pelvis".into(), 0, JointModel::FreeFlyer, PluckerTransform::identity())];
    let axes = [Vector3::z(), Vector3::x(), Vector3::y()];
    let limb = |links: &mut Vec<Link>, name: &str, root: usize, dofs: usize, offset: Vector3<f64>| -> usize {
        let mut parent = root;
        for d in 0..dofs {
            let placement =
                if d == 0 { PluckerTransform::translation(offset) } else { PluckerTransform::translation(Vector3::new(0.3, 0.0, 0.0)) };
            links.push(link(format!("{name}{}", d + 1), parent, JointModel::revolute(axes[d % 3]), placement));
            parent = links.len();
        }
        parent
    };
    let left_foot = limb(&mut links, "left_leg", 1, 6, Vector3::new(0.0, 0.1, -0.1));
    let right_foot = limb(&mut links, "right_leg", 1, 6, Vector3::new(0.0, -0.1, -0.1));
    let chest = limb(&mut links, "torso", 1, 3, Vector3::new(0.0, 0.0, 0.2));
    limb(&mut links, "left_arm", chest, 7, Vector3::new(0.0, 0.2, 0.3));
    limb(&mut links, "right_arm", chest, 7, Vector3::new(0.0, -0.2, 0.3));
    limb(&mut links, "head", chest, 2, Vector3::new(0.0, 0.0, 0.4));
    let tree = KinematicTree::new(links);
    let mut cons = ConstraintSet::new(tree.n_bodies());
    for foot in [left_foot, right_foot] {
        for (x, y) in [(0.1, 0.05), (0.1, -0.05), (-0.1, 0.05), (-0.1, -0.05)] {
            cons.push(foot, ConstraintKind::Connect { point: Vector3::new(x, y, -0.05) }).expect("valid fixture");
        }
    }
    (tree, cons)
}
