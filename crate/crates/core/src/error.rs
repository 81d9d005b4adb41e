use thiserror::Error;

/// Problems with a kinematic tree or its constraint set.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("link {link} has parent {parent}; parents must precede their children")]
    NonTopologicalOrder { link: usize, parent: usize },
    #[error("link {link} has non-positive mass or a non-physical rotational inertia")]
    NonPositiveMass { link: usize },
    #[error("joint of link {link} has an axis that is not unit length")]
    BadAxis { link: usize },
    #[error("link {link} still has a fixed joint; fixed joints must be merged first")]
    UnmergedFixedJoint { link: usize },
    #[error("free-flyer joint on link {link} must connect directly to the world")]
    MisplacedFreeFlyer { link: usize },
    #[error("link index {link} is out of range 1..={n_bodies}")]
    BadLinkIndex { link: usize, n_bodies: usize },
    #[error("constraint matrix is rank deficient (rank {rank} for {rows} rows)")]
    RankDeficientK { rank: usize, rows: usize },
    #[error("constraint matrix must have 6 columns and 1..=6 rows, got {rows}x{cols}")]
    BadConstraintShape { rows: usize, cols: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("tree has no links")]
    EmptyTree,
    #[error("model file: {0}")]
    Format(String),
}

/// Failures while evaluating dynamics quantities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("configuration has {got} coordinates, the tree expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("joint-space inertia matrix is not positive definite")]
    SingularJsim,
    #[error("joint-space apparent inertia D of link {link} is not positive definite")]
    SingularD { link: usize },
    #[error("link {ancestor} is not an ancestor of link {link}")]
    NotAncestor { ancestor: usize, link: usize },
    #[error("propagators do not chain: {left_source} is not {right_target}")]
    ChainMismatch { left_source: usize, right_target: usize },
}

/// URDF ingestion failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum UrdfError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("robot has several root links: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("joint graph contains a cycle")]
    CyclicJointGraph,
    #[error("joint `{joint}` has unsupported type `{kind}`")]
    UnsupportedJointType { joint: String, kind: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("link `{0}` has non-positive mass after merging fixed joints")]
    NonPositiveMass(String),
}

/// Benchmark-suite and slope-fit failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("need at least two points for a slope fit, got {0}")]
    InsufficientPoints(usize),
    #[error("log-log fit needs positive values, got ({0}, {1})")]
    NonPositiveValue(f64, f64),
    #[error("no algorithms selected")]
    EmptyAlgorithms,
    #[error("parameter list must be non-empty and strictly increasing")]
    BadParameters,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("csv output: {0}")]
    Csv(String),
}

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Urdf(#[from] UrdfError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}
