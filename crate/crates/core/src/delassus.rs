use nalgebra::DMatrix;

/// Constraint-space inverse inertia `Λ⁻¹ = J M⁻¹ Jᵀ`, `m x m`.
///
/// Rows and columns follow the end-effector order of the constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct DelassusMatrix {
    pub matrix: DMatrix<f64>,
}

impl DelassusMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(DMatrix::zeros(m, m))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max|self − reference| / max|reference|` (absolute when the reference is zero).
    pub fn relative_error(&self, reference: &DelassusMatrix) -> f64 {
        relative_error(&self.matrix, &reference.matrix)
    }

    /// `max|Λ − Λᵀ| / max|Λ|`.
    pub fn symmetry_error(&self) -> f64 {
        relative_error(&self.matrix, &self.matrix.transpose())
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.amax()
    }
}

pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "relative_error shape mismatch");
    let diff = (a - b).amax();
    let scale = b.amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
