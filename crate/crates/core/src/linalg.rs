//! Dense symmetric eigen helpers shared by the evolution and reduction code.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_RTOL: f64 = 1e-10;
/// Negative eigenvalues down to this fraction of the norm are clipped to zero.
pub const PSD_RTOL: f64 = 1e-9;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) };
        }
        let se = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &se.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest absolute eigenvalue.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Clips tiny negative eigenvalues of a PSD matrix; fails on genuinely negative ones.
    pub fn clip_psd(mut self) -> Result<Self> {
        let floor = -PSD_RTOL * self.norm().max(f64::MIN_POSITIVE);
        for v in self.values.iter_mut() {
            if *v < floor {
                return Err(invalid(format!("matrix is not positive semidefinite (eigenvalue {v:e})")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(self)
    }

    /// Eigenvalues at or below the rank tolerance count as kernel.
    pub fn kernel_threshold(&self) -> f64 {
        RANK_RTOL * self.norm()
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.vectors[(i, j)] * f(self.values[j]));
        scaled * self.vectors.transpose()
    }
}

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    Ok(())
}

/// Operator 2-norm of a rectangular real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.transpose() * m };
    SymEigen::new(&gram).norm().max(0.0).sqrt()
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}
