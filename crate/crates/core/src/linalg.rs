//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::SymmetricEigen;

use crate::{CMatrix, C64};

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized first
/// so round-off asymmetry cannot leak into the result.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(a: &CMatrix) -> Self {
        let sym = hermitian_part(a);
        let eig = SymmetricEigen::new(sym);
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V diag(f(λ)) V^H b`.
    pub fn apply_spectral(&self, b: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut coeffs = self.vectors.ad_mul(b);
        for (i, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            coeffs.row_mut(i).scale_mut(s);
        }
        &self.vectors * coeffs
    }
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Frobenius inner product `tr(A^H B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    hermitian_part(a).cholesky().map(|c| c.solve(b))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
