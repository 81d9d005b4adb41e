//! JSON model files.
//!
//! ```json
//! {
//!   "links": [
//!     {
//!       "name": "upper_arm",
//!       "parent": 0,
//!       "joint": { "type": "revolute", "axis": [0, 0, 1] },
//!       "placement": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0, 0, 0] },
//!       "inertia": { "mass": 1.0, "com": [0.5, 0, 0], "rot_inertia": [[0.0017,0,0],[0,0.084,0],[0,0,0.084]] }
//!     }
//!   ],
//!   "constraints": [
//!     { "link": 1, "kind": "weld" },
//!     { "link": 1, "kind": "connect", "point": [1, 0, 0] },
//!     { "link": 1, "kind": "custom", "k": [[0,0,0,1,0,0]] }
//!   ]
//! }
//! ```
//!
//! Links are listed parent-first and numbered from 1 in file order; `parent`
//! 0 is the world. `joint.type` is one of `revolute`, `prismatic`,
//! `spherical`, `free_flyer`. `placement.rotation` is row-major and maps
//! parent-frame coordinates into the joint frame; `translation` is the joint
//! frame origin in the parent frame. `rot_inertia` is taken about the center
//! of mass, in link axes. `constraints` may be omitted.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{ConstraintKind, ConstraintSet, JointModel, KinematicTree, Link};
use crate::error::ModelError;
use crate::spatial::{PluckerTransform, SpatialInertia};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub links: Vec<LinkEntry>,
    #[serde(default)]
    pub constraints: Vec<ConstraintEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEntry {
    pub name: String,
    pub parent: usize,
    pub joint: JointModel,
    pub placement: PlacementEntry,
    pub inertia: InertiaEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertiaEntry {
    pub mass: f64,
    pub com: [f64; 3],
    pub rot_inertia: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintEntry {
    Weld { link: usize },
    Connect { link: usize, #[serde(default)] point: [f64; 3] },
    Custom { link: usize, k: Vec<Vec<f64>> },
}

fn mat_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

fn rows_mat(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

impl ModelFile {
    pub fn from_model(tree: &KinematicTree, cons: &ConstraintSet) -> Self {
        let links = tree
            .links()
            .iter()
            .map(|l| LinkEntry {
                name: l.name.clone(),
                parent: l.parent,
                joint: l.joint,
                placement: PlacementEntry {
                    rotation: mat_rows(&l.placement.rotation),
                    translation: l.placement.translation.into(),
                },
                inertia: InertiaEntry {
                    mass: l.inertia.mass,
                    com: l.inertia.com.into(),
                    rot_inertia: mat_rows(&l.inertia.rot_inertia),
                },
            })
            .collect();
        let constraints = cons
            .end_effectors()
            .iter()
            .map(|e| match &e.kind {
                ConstraintKind::Weld => ConstraintEntry::Weld { link: e.parent },
                ConstraintKind::Connect { point } => ConstraintEntry::Connect { link: e.parent, point: (*point).into() },
                ConstraintKind::Custom(k) => ConstraintEntry::Custom {
                    link: e.parent,
                    k: (0..k.nrows()).map(|r| k.row(r).iter().copied().collect()).collect(),
                },
            })
            .collect();
        Self { links, constraints }
    }

    /// Builds and validates the tree and its constraints.
    pub fn to_model(&self) -> Result<(KinematicTree, ConstraintSet), ModelError> {
        let links = self
            .links
            .iter()
            .map(|l| Link {
                name: l.name.clone(),
                parent: l.parent,
                joint: l.joint,
                placement: PluckerTransform::new(rows_mat(&l.placement.rotation), Vector3::from(l.placement.translation)),
                inertia: SpatialInertia::new(l.inertia.mass, Vector3::from(l.inertia.com), rows_mat(&l.inertia.rot_inertia)),
            })
            .collect();
        let tree = KinematicTree::new(links);
        tree.validate()?;
        let mut cons = ConstraintSet::new(tree.n_bodies());
        for c in &self.constraints {
            let (link, kind) = match c {
                ConstraintEntry::Weld { link } => (*link, ConstraintKind::Weld),
                ConstraintEntry::Connect { link, point } => (*link, ConstraintKind::Connect { point: Vector3::from(*point) }),
                ConstraintEntry::Custom { link, k } => {
                    let cols = k.first().map_or(0, Vec::len);
                    if k.iter().any(|r| r.len() != cols) {
                        return Err(ModelError::Format("custom constraint rows differ in length".into()));
                    }
                    let m = DMatrix::from_fn(k.len(), cols, |i, j| k[i][j]);
                    (*link, ConstraintKind::Custom(m))
                }
            };
            cons.push(link, kind)?;
        }
        Ok((tree, cons))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generators;

    #[test]
    fn round_trip() {
        let (tree, cons) = generators::humanoid();
        let file = ModelFile::from_model(&tree, &cons);
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let (t2, c2) = back.to_model().unwrap();
        assert_eq!(t2, tree);
        assert_eq!(c2, cons);
    }

    #[test]
    fn doc_example_parses() {
        let text = r#"{
          "links": [{ "name": "a", "parent": 0, "joint": { "type": "revolute", "axis": [0, 0, 1] },
            "placement": { "rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0] },
            "inertia": { "mass": 1.0, "com": [0.5,0,0], "rot_inertia": [[0.0017,0,0],[0,0.084,0],[0,0,0.084]] } }],
          "constraints": [{ "link": 1, "kind": "weld" }, { "link": 1, "kind": "connect", "point": [1,0,0] },
            { "link": 1, "kind": "custom", "k": [[0,0,0,1,0,0]] }]
        }"#;
        let (t, c) = ModelFile::from_json(text).unwrap().to_model().unwrap();
        assert_eq!(t.n_bodies(), 1);
        assert_eq!(c.m(), 10);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(ModelFile::from_json("{"), Err(ModelError::Format(_))));
    }
}
