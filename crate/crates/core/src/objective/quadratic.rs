use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{Noise, Objective};
use crate::error::{check_dim, invalid, Error, Result};

/// `f(x) = ½ xᵀA x + bᵀx` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(invalid("curvature matrix must be square and non-empty"));
        }
        check_dim(n, b.len())?;
        for i in 0..n {
            for j in 0..i {
                let (u, v) = (a[(i, j)], a[(j, i)]);
                if (u - v).abs() > 1e-12 * u.abs().max(v.abs()).max(1.0) {
                    return Err(invalid(alloc::format!("curvature matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("quadratic coefficients must be finite"));
        }
        Ok(Self { a, b: DVector::from_vec(b) })
    }

    /// `A = diag(eigenvalues)`, `b = 0`.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        let d = DVector::from_column_slice(eigenvalues);
        Self::new(DMatrix::from_diagonal(&d), alloc::vec![0.0; eigenvalues.len()])
    }

    /// `A = Q diag(eigenvalues) Qᵀ` for the orthogonal factor `Q` of a QR
    /// decomposition of `basis`.
    pub fn with_spectrum(eigenvalues: &[f64], basis: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if basis.nrows() != n || basis.ncols() != n {
            return Err(invalid("basis must be n×n"));
        }
        let q = basis.qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let mut a = &q * d * q.transpose();
        // exact symmetry
        let at = a.transpose();
        a = (a + at) * 0.5;
        Self::new(a, b)
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        self.b.as_slice()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let xv = DVector::from_column_slice(x);
        Ok(0.5 * xv.dot(&(&self.a * &xv)) + self.b.dot(&xv))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let xv = DVector::from_column_slice(x);
        Ok((&self.a * xv + &self.b).data.into())
    }

    /// Eigenvalues of `A`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.a.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// `x* = -A⁻¹ b`; requires `A` positive definite.
    pub fn minimizer(&self) -> Result<Vec<f64>> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("curvature is not positive definite".into()))?;
        Ok((-chol.solve(&self.b)).data.into())
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn batch_loss_grad(&self, x: &[f64], _batch: &[usize], _noise: Noise, grad: &mut [f64]) -> Result<f64> {
        check_dim(self.dim(), grad.len())?;
        let g = self.gradient(x)?;
        grad.copy_from_slice(&g);
        self.eval(x)
    }

    fn batch_loss(&self, x: &[f64], _batch: &[usize], _noise: Noise) -> Result<f64> {
        self.eval(x)
    }
}
