//! Covariance estimation, Hermitian eigendecomposition and model-order
//! selection.

use nalgebra::SymmetricEigen;

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, C64};

/// Hermitian positive semi-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(CMatrix);

impl CovarianceMatrix {
    /// Wraps `m` after checking it is square and Hermitian to `1e-10`
    /// relative tolerance.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_hermitian(&m)?;
        Ok(CovarianceMatrix(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(invalid("matrix must be square and non-empty"));
    }
    if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let asym = (m - m.adjoint()).norm();
    if asym > 1e-10 * m.norm().max(f64::MIN_POSITIVE) {
        return Err(invalid(format!("matrix is not Hermitian (asymmetry {asym:e})")));
    }
    Ok(())
}

/// Forces exact Hermitian symmetry by averaging with the adjoint.
pub(crate) fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// `scale · Y Y^H`.
pub fn sample_covariance(y: &CMatrix, scale: f64) -> Result<CovarianceMatrix> {
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(invalid("snapshot matrix is empty"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid("covariance scale must be positive"));
    }
    let mut r = y * y.adjoint() * C64::new(scale, 0.0);
    hermitize(&mut r);
    Ok(CovarianceMatrix(r))
}

/// Eigenvalues sorted descending with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// Eigenvectors of the `dim - signal_count` smallest eigenvalues.
    pub fn noise_subspace(&self, signal_count: usize) -> Result<CMatrix> {
        let m = self.values.len();
        if signal_count >= m {
            return Err(invalid(format!("signal count {signal_count} leaves no noise subspace")));
        }
        Ok(self.vectors.columns(signal_count, m - signal_count).into_owned())
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(r: &CovarianceMatrix) -> Result<Eigen> {
    check_hermitian(&r.0)?;
    let eig = SymmetricEigen::new(r.0.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(r.dim(), r.dim());
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(Eigen { values, vectors })
}

/// Number of signals from the largest ratio of consecutive eigenvalues.
///
/// Eigenvalues are expected in descending order. Denominators are floored at
/// `1e-12` times the largest eigenvalue; ties go to the smaller count.
pub fn estimate_source_count(values: &[f64]) -> Result<usize> {
    if values.len() < 2 {
        return Err(invalid("need at least two eigenvalues"));
    }
    let top = values[0];
    if !(top.is_finite() && top > 0.0) {
        return Err(Error::DegenerateCovariance("largest eigenvalue is not positive".into()));
    }
    let floor = 1e-12 * top;
    let mut best = (1usize, f64::NEG_INFINITY);
    for k in 1..values.len() {
        let ratio = values[k - 1].max(floor) / values[k].max(floor);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    Ok(best.0)
}
