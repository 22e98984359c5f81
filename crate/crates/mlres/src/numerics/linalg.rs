use nalgebra::{Cholesky, DVector, SymmetricEigen};

use crate::{CMat, Error, Result, C64};

/// Square complex matrix that is Hermitian by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Validates near-Hermitian input (relative tolerance 1e-12) and symmetrizes it.
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = max_abs(&m).max(f64::MIN_POSITIVE);
        let asym = max_abs(&(&m - m.adjoint()));
        if asym > 1e-12 * scale {
            return Err(Error::NotHermitian { asymmetry: asym / scale });
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without checking. Use for matrices Hermitian up to round-off.
    pub fn symmetrize(m: CMat) -> Self {
        let h = (&m + m.adjoint()).scale(0.5);
        Self(h)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues in ascending order with unit-norm eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigenSystem {
    pub fn reconstruct(&self) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is rotated so that its largest-magnitude entry (first one
/// on ties) is real and positive.
pub fn herm_eig(a: &HermitianMatrix) -> Result<EigenSystem> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenSystem { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let m = a.as_matrix().clone();
    let max_abs_entry = max_abs(&m);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 200 * n + 1000)
        .ok_or(Error::EigenNonConvergence { dim: n, max_abs: max_abs_entry })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let peak = col.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let pivot = col
            .iter()
            .find(|z| z.norm() >= peak * (1.0 - 1e-12))
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn herm_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Ok(vec![]);
    }
    let m = a.as_matrix().clone();
    let max_abs_entry = max_abs(&m);
    let vals = nalgebra::linalg::SymmetricEigen::try_new(m, f64::EPSILON, 200 * n + 1000)
        .ok_or(Error::EigenNonConvergence { dim: n, max_abs: max_abs_entry })?
        .eigenvalues;
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Log pseudo-determinant: sum of logs of eigenvalues above `rank_tol · λ_max`.
pub fn log_pseudo_det(a: &HermitianMatrix, rank_tol: f64) -> Result<f64> {
    let vals = herm_eigenvalues(a)?;
    let lmax = vals.last().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if let Some(&lmin) = vals.first() {
        if lmin < -1e-10 * scale {
            return Err(Error::NotPsd { min_eig: lmin, scale });
        }
    }
    if lmax <= 0.0 {
        return Err(Error::ZeroPseudoDet);
    }
    let thr = rank_tol * lmax;
    let kept: Vec<f64> = vals.into_iter().filter(|&v| v > thr).collect();
    if kept.is_empty() {
        return Err(Error::ZeroPseudoDet);
    }
    Ok(kept.iter().map(|v| v.ln()).sum())
}

/// Log-determinant of a Hermitian positive-definite matrix from its eigenvalues.
pub fn log_det_hpd(a: &HermitianMatrix) -> Result<f64> {
    let vals = herm_eigenvalues(a)?;
    let lmax = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    match vals.first() {
        None => Ok(0.0),
        Some(&lmin) if lmin <= 0.0 => {
            if lmin < -1e-12 * lmax {
                Err(Error::NotPsd { min_eig: lmin, scale: lmax })
            } else {
                Err(Error::Singular(format!(
                    "smallest eigenvalue {lmin:e} relative to largest {lmax:e}"
                )))
            }
        }
        Some(_) => Ok(vals.iter().map(|v| v.ln()).sum()),
    }
}

/// Cholesky log-determinant for small positive-definite matrices on hot paths.
pub fn log_det_chol(a: &CMat) -> Result<f64> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| {
        Error::Singular(format!("Cholesky failed for {}x{} matrix", a.nrows(), a.ncols()))
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

/// PSD square root `V diag(sqrt(max(λ,0))) Vᴴ`.
pub fn psd_sqrt(a: &HermitianMatrix) -> Result<CMat> {
    let es = herm_eig(a)?;
    let scale = es.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if let Some(&lmin) = es.values.first() {
        if lmin < -1e-10 * scale {
            return Err(Error::NotPsd { min_eig: lmin, scale });
        }
    }
    let mut scaled = es.vectors.clone();
    for (j, &l) in es.values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    let s = &scaled * es.vectors.adjoint();
    Ok(HermitianMatrix::symmetrize(s).into_matrix())
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

/// Real symmetric eigenvalues, ascending.
pub fn sym_eigenvalues(a: &crate::RMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return vec![];
    }
    let s = (a + a.transpose()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn real_diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}
