//! Delassus-matrix computation on kinematic trees.

pub mod baseline;
pub mod bench;
pub mod delassus;
pub mod error;
pub mod metering;
pub mod model;
pub mod osim;
pub mod spatial;
pub mod urdf;

pub use delassus::DelassusMatrix;
pub use error::{BenchError, DynamicsError, Error, ModelError, UrdfError};
pub use model::{Configuration, ConstraintKind, ConstraintSet, IndexSets, JointModel, KinematicTree, Link};
pub use spatial::{Abi, Arith, MotionSubspace, OpTally, PluckerTransform, SpatialForce, SpatialInertia, SpatialMotion};
