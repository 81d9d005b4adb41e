use nalgebra::{DMatrix, Vector3};

use crate::error::ModelError;
use crate::spatial::skew;

/// Constraint type carried by one end-effector.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// Full 6D rigid attachment, `K = 1₆`.
    Weld,
    /// 3D coincidence of a point fixed in the link frame, `K = [-p× 1₃]`.
    Connect { point: Vector3<f64> },
    /// User-supplied `m_e x 6` matrix in the link frame.
    Custom(DMatrix<f64>),
}

impl ConstraintKind {
    pub fn connect_at_origin() -> Self {
        ConstraintKind::Connect { point: Vector3::zeros() }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConstraintKind::Weld => "weld",
            ConstraintKind::Connect { .. } => "connect",
            ConstraintKind::Custom(_) => "custom",
        }
    }

    /// Constraint matrix acting on spatial motion `[ω; v]` of the parent link.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            ConstraintKind::Weld => DMatrix::identity(6, 6),
            ConstraintKind::Connect { point } => {
                let mut k = DMatrix::zeros(3, 6);
                k.view_mut((0, 0), (3, 3)).copy_from(&(-skew(point)));
                k.view_mut((0, 3), (3, 3)).copy_from(&nalgebra::Matrix3::identity());
                k
            }
            ConstraintKind::Custom(k) => k.clone(),
        }
    }
}

/// One fictitious constrained link.
#[derive(Debug, Clone, PartialEq)]
pub struct EndEffector {
    /// Physical link the end-effector is welded to.
    pub parent: usize,
    pub kind: ConstraintKind,
    /// `K_e`, `m_e x 6`, in the parent link frame.
    pub k: DMatrix<f64>,
}

impl EndEffector {
    pub fn rows(&self) -> usize {
        self.k.nrows()
    }
}

/// Ordered list of end-effectors attached to a tree with `n_bodies` links.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n_bodies: usize,
    ees: Vec<EndEffector>,
}

impl ConstraintSet {
    pub fn new(n_bodies: usize) -> Self {
        Self { n_bodies, ees: Vec::new() }
    }

    /// Returns a copy with one more end-effector appended.
    pub fn attach(&self, link: usize, kind: ConstraintKind) -> Result<ConstraintSet, ModelError> {
        let mut out = self.clone();
        out.push(link, kind)?;
        Ok(out)
    }

    /// Appends an end-effector in place and returns its index `n_b + k`.
    pub fn push(&mut self, link: usize, kind: ConstraintKind) -> Result<usize, ModelError> {
        if link == 0 || link > self.n_bodies {
            return Err(ModelError::BadLinkIndex { link, n_bodies: self.n_bodies });
        }
        let k = kind.matrix();
        if k.ncols() != 6 || k.nrows() == 0 || k.nrows() > 6 {
            return Err(ModelError::BadConstraintShape { rows: k.nrows(), cols: k.ncols() });
        }
        let rank = numerical_rank(&k);
        if rank < k.nrows() {
            return Err(ModelError::RankDeficientK { rank, rows: k.nrows() });
        }
        self.ees.push(EndEffector { parent: link, kind, k });
        Ok(self.n_bodies + self.ees.len())
    }

    pub fn n_bodies(&self) -> usize {
        self.n_bodies
    }

    /// Number of end-effectors `m_b`.
    pub fn len(&self) -> usize {
        self.ees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ees.is_empty()
    }

    /// Total constraint dimension `m`.
    pub fn m(&self) -> usize {
        self.ees.iter().map(EndEffector::rows).sum()
    }

    pub fn end_effectors(&self) -> &[EndEffector] {
        &self.ees
    }

    /// End-effector by ordinal `0..m_b`.
    pub fn ee(&self, k: usize) -> &EndEffector {
        &self.ees[k]
    }

    /// Row offsets of every end-effector block in the Delassus matrix.
    pub fn row_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.ees.len());
        let mut acc = 0;
        for e in &self.ees {
            out.push(acc);
            acc += e.rows();
        }
        out
    }
}

fn numerical_rank(k: &DMatrix<f64>) -> usize {
    let sv = k.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}
