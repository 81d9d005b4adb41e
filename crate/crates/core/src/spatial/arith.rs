//! Meterable scalar arithmetic.
//!
//! Every floating-point multiply, add/subtract, divide and square root that an
//! algorithm performs goes through an [`Arith`] context. A context created with
//! [`Arith::counting`] tallies the operations it executes; one created with
//! [`Arith::silent`] only computes. Contexts are confined to a single
//! invocation (`Arith` is `!Sync`), so concurrent runs never share a counter.
//!
//! Negation, copies, comparisons and index arithmetic are free.

use std::cell::Cell;

use nalgebra::{DMatrix, Matrix3, Vector3};

/// Operation totals accumulated by an [`Arith`] context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpTally {
    pub mul: u64,
    pub add_sub: u64,
    pub div: u64,
    pub sqrt: u64,
}

impl OpTally {
    pub fn total(&self) -> u64 {
        self.mul + self.add_sub + self.div + self.sqrt
    }
}

impl std::ops::Sub for OpTally {
    type Output = OpTally;

    fn sub(self, rhs: OpTally) -> OpTally {
        OpTally {
            mul: self.mul - rhs.mul,
            add_sub: self.add_sub - rhs.add_sub,
            div: self.div - rhs.div,
            sqrt: self.sqrt - rhs.sqrt,
        }
    }
}

/// Arithmetic context with an optional per-invocation operation counter.
#[derive(Debug, Default)]
pub struct Arith {
    counting: bool,
    mul: Cell<u64>,
    add_sub: Cell<u64>,
    div: Cell<u64>,
    sqrt: Cell<u64>,
}

impl Arith {
    /// A context that computes without counting.
    pub fn silent() -> Self {
        Self::default()
    }

    /// A context that counts every scalar operation.
    pub fn counting() -> Self {
        Self {
            counting: true,
            ..Self::default()
        }
    }

    pub fn is_counting(&self) -> bool {
        self.counting
    }

    pub fn tally(&self) -> OpTally {
        OpTally {
            mul: self.mul.get(),
            add_sub: self.add_sub.get(),
            div: self.div.get(),
            sqrt: self.sqrt.get(),
        }
    }

    #[inline]
    fn bump(cell: &Cell<u64>, on: bool, n: u64) {
        if on {
            cell.set(cell.get() + n);
        }
    }

    // ---- scalars ----------------------------------------------------------

    #[inline]
    pub fn mul(&self, a: f64, b: f64) -> f64 {
        Self::bump(&self.mul, self.counting, 1);
        a * b
    }

    #[inline]
    pub fn add(&self, a: f64, b: f64) -> f64 {
        Self::bump(&self.add_sub, self.counting, 1);
        a + b
    }

    #[inline]
    pub fn sub(&self, a: f64, b: f64) -> f64 {
        Self::bump(&self.add_sub, self.counting, 1);
        a - b
    }

    #[inline]
    pub fn div(&self, a: f64, b: f64) -> f64 {
        Self::bump(&self.div, self.counting, 1);
        a / b
    }

    #[inline]
    pub fn sqrt(&self, a: f64) -> f64 {
        Self::bump(&self.sqrt, self.counting, 1);
        a.sqrt()
    }

    /// `acc + a * b`
    #[inline]
    pub fn mul_add(&self, acc: f64, a: f64, b: f64) -> f64 {
        self.add(acc, self.mul(a, b))
    }

    /// `acc - a * b`
    #[inline]
    pub fn mul_sub(&self, acc: f64, a: f64, b: f64) -> f64 {
        self.sub(acc, self.mul(a, b))
    }

    /// Inner product of two equal-length sequences: `n` multiplies, `n - 1` adds.
    pub fn dot<I, J>(&self, a: I, b: J) -> f64
    where
        I: IntoIterator<Item = f64>,
        J: IntoIterator<Item = f64>,
    {
        let mut it = a.into_iter().zip(b);
        let Some((x0, y0)) = it.next() else {
            return 0.0;
        };
        let mut acc = self.mul(x0, y0);
        for (x, y) in it {
            acc = self.mul_add(acc, x, y);
        }
        acc
    }

    // ---- 3-vectors and 3x3 matrices ----------------------------------------

    pub fn dot3(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        self.dot(a.iter().copied(), b.iter().copied())
    }

    pub fn cross3(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.sub(self.mul(a.y, b.z), self.mul(a.z, b.y)),
            self.sub(self.mul(a.z, b.x), self.mul(a.x, b.z)),
            self.sub(self.mul(a.x, b.y), self.mul(a.y, b.x)),
        )
    }

    pub fn add3(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.add(a.x, b.x), self.add(a.y, b.y), self.add(a.z, b.z))
    }

    pub fn sub3(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.sub(a.x, b.x), self.sub(a.y, b.y), self.sub(a.z, b.z))
    }

    pub fn scale3(&self, s: f64, a: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.mul(s, a.x), self.mul(s, a.y), self.mul(s, a.z))
    }

    /// `m * v`
    pub fn mat3_vec(&self, m: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|r, _| self.dot(m.row(r).iter().copied(), v.iter().copied()))
    }

    /// `mᵀ * v`
    pub fn mat3t_vec(&self, m: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|r, _| self.dot(m.column(r).iter().copied(), v.iter().copied()))
    }

    /// `a * b`
    pub fn mat3_mul(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.dot(a.row(r).iter().copied(), b.column(c).iter().copied()))
    }

    /// `a * bᵀ`
    pub fn mat3_mul_t(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.dot(a.row(r).iter().copied(), b.row(c).iter().copied()))
    }

    pub fn mat3_add(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.add(a[(r, c)], b[(r, c)]))
    }

    pub fn mat3_sub(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.sub(a[(r, c)], b[(r, c)]))
    }

    /// `[r]× * m`, i.e. the cross product of `r` with every column of `m`.
    pub fn skew_mul(&self, r: &Vector3<f64>, m: &Matrix3<f64>) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for c in 0..3 {
            let col = self.cross3(r, &m.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    // ---- dense matrices ----------------------------------------------------

    /// `a * b`
    pub fn matmul(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
        DMatrix::from_fn(a.nrows(), b.ncols(), |r, c| {
            self.dot(a.row(r).iter().copied(), b.column(c).iter().copied())
        })
    }

    /// `aᵀ * b`
    pub fn matmul_tn(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(a.nrows(), b.nrows(), "matmul_tn shape mismatch");
        DMatrix::from_fn(a.ncols(), b.ncols(), |r, c| {
            self.dot(a.column(r).iter().copied(), b.column(c).iter().copied())
        })
    }

    /// `a += b`
    pub fn add_assign(&self, a: &mut DMatrix<f64>, b: &DMatrix<f64>) {
        assert_eq!(a.shape(), b.shape(), "add_assign shape mismatch");
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x = self.add(*x, *y);
        }
    }

    /// `a -= b`
    pub fn sub_assign(&self, a: &mut DMatrix<f64>, b: &DMatrix<f64>) {
        assert_eq!(a.shape(), b.shape(), "sub_assign shape mismatch");
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x = self.sub(*x, *y);
        }
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
    ///
    /// Returns `None` on a non-positive pivot. No pivoting.
    pub fn cholesky(&self, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = self.mul_sub(d, l[(j, k)], l[(j, k)]);
            }
            if !(d > 0.0) {
                return None;
            }
            let ljj = self.sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = self.mul_sub(s, l[(i, k)], l[(j, k)]);
                }
                l[(i, j)] = self.div(s, ljj);
            }
        }
        Some(l)
    }

    /// Solves `L x = b` for every column of `b` in place (`L` lower triangular).
    pub fn forward_substitute(&self, l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
        let n = l.nrows();
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = b[(i, c)];
                for k in 0..i {
                    s = self.mul_sub(s, l[(i, k)], b[(k, c)]);
                }
                b[(i, c)] = self.div(s, l[(i, i)]);
            }
        }
    }

    /// Inverse of a small symmetric positive-definite matrix.
    ///
    /// A 1x1 input costs a single reciprocal; larger inputs go through a
    /// Cholesky factorization. Returns `None` if `a` is not positive definite.
    pub fn spd_inverse(&self, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let n = a.nrows();
        if n == 1 {
            let d = a[(0, 0)];
            if !(d > 0.0) {
                return None;
            }
            return Some(DMatrix::from_element(1, 1, self.div(1.0, d)));
        }
        let l = self.cholesky(a)?;
        // L⁻¹ by forward substitution on the identity, then A⁻¹ = L⁻ᵀ L⁻¹.
        let mut linv = DMatrix::zeros(n, n);
        for c in 0..n {
            for i in c..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in c..i {
                    s = self.mul_sub(s, l[(i, k)], linv[(k, c)]);
                }
                linv[(i, c)] = self.div(s, l[(i, i)]);
            }
        }
        let mut inv = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                // Σ_{k ≥ max(r,c)} L⁻¹[k,r] L⁻¹[k,c]
                let v = self.dot(
                    (c..n).map(|k| linv[(k, r)]),
                    (c..n).map(|k| linv[(k, c)]),
                );
                inv[(r, c)] = v;
                inv[(c, r)] = v;
            }
        }
        Some(inv)
    }
}
