//! Asymptotic covariance of the cost vector over a family of points.
//!
//! With `𝒫_ℓ⊥ = R^{1/2} P⊥(θ_ℓ) R^{1/2}` and
//! `𝒬_ℓ = R^{1/2} A_ℓ [A_ℓᴴ(R − φ₀⁽ℓ⁾ I)A_ℓ]⁻¹ A_ℓᴴ R^{1/2}`:
//!
//! * `Γ_C[ℓ,m] = (1/N) tr[𝒫_ℓ⊥ 𝒫_m⊥]`
//! * `Γ_U[ℓ,m] = Γ_C[ℓ,m]/(σ_ℓ²σ_m²) + (1/N)tr[𝒫_m⊥𝒬_ℓ]/σ_m² + (1/N)tr[𝒫_ℓ⊥𝒬_m]/σ_ℓ² − log(1 − (1/N)tr[𝒬_ℓ𝒬_m])`
//!
//! Index 0 of a [`PointFamily`] is the true direction set.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{max_metric, steering_matrix, Manifold, Scenario, ThetaPoint};
use crate::det_equiv::{
    eta_bar_cml, eta_bar_uml, omega_contour, projected_spectrum, solve_phi0, Phi0, SpectrumWithMultiplicity,
};
use crate::ml_costs::{projectors, trace_perp, Method, Projectors};
use crate::numerics::linalg::sym_eigenvalues;
use crate::numerics::{herm_eig, psd_sqrt, trace_product_re, unwrapped_log, HermitianMatrix};
use crate::{CMat, Error, RMat, Result, C64};

/// Cached per-point quantities.
#[derive(Clone, Debug)]
pub struct FamilyPoint {
    pub theta: ThetaPoint,
    pub proj: Projectors,
    pub spectrum: SpectrumWithMultiplicity,
    pub phi0: Phi0,
    pub sigma2: f64,
    /// `𝒬_ℓ`.
    pub q: HermitianMatrix,
    /// `𝒫_ℓ⊥`.
    pub p_perp_w: HermitianMatrix,
}

#[derive(Clone, Debug)]
pub struct PointFamily {
    r: HermitianMatrix,
    r_sqrt: CMat,
    n: usize,
    points: Vec<FamilyPoint>,
}

fn build_point(
    man: &Manifold,
    r: &HermitianMatrix,
    r_sqrt: &CMat,
    n: usize,
    theta: &ThetaPoint,
) -> Result<FamilyPoint> {
    let a = steering_matrix(man, theta);
    let proj = projectors(&a)?;
    let spectrum = projected_spectrum(r, &proj)?;
    let phi0 = solve_phi0(&spectrum, n)?;
    let (m, k) = (proj.m(), proj.k());
    let kt = k.min(n);
    let sigma2 = trace_perp(&proj, r) / (m - kt) as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::Numerical(format!("non-positive residual power {sigma2:e}")));
    }
    let q = q_from_basis(r_sqrt, r, &proj.u_a, phi0.value)?;
    let p_perp_w = HermitianMatrix::symmetrize(r_sqrt * proj.p_perp.as_matrix() * r_sqrt);
    Ok(FamilyPoint { theta: theta.clone(), proj, spectrum, phi0, sigma2, q, p_perp_w })
}

impl PointFamily {
    /// Builds the family; `points[0]` plays the role of the true directions.
    pub fn new(man: &Manifold, r: &HermitianMatrix, n: usize, points: &[ThetaPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("a point family needs at least one point".into()));
        }
        if r.dim() != man.m() {
            return Err(Error::InvalidInput(format!("R is {0}x{0} but the array has {1} elements", r.dim(), man.m())));
        }
        for (i, p) in points.iter().enumerate() {
            for q in &points[..i] {
                if p.k() != q.k() {
                    return Err(Error::InvalidInput("points of a family must share the source count".into()));
                }
                if max_metric(p.angles(), q.angles()) <= 1e-12 {
                    return Err(Error::InvalidInput(format!("duplicate point {:?} in family", p.angles())));
                }
            }
        }
        let r_sqrt = psd_sqrt(r)?;
        let pts = points
            .par_iter()
            .map(|t| build_point(man, r, &r_sqrt, n, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { r: r.clone(), r_sqrt, n, points: pts })
    }

    /// Family `[θ̄, others...]` for a scenario.
    pub fn from_scenario(sc: &Scenario, others: &[ThetaPoint]) -> Result<Self> {
        let mut pts = vec![sc.true_theta.clone()];
        pts.extend_from_slice(others);
        Self::new(&sc.manifold, &sc.covariance(), sc.n(), &pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points besides index 0.
    pub fn l(&self) -> usize {
        self.points.len() - 1
    }

    pub fn point(&self, i: usize) -> &FamilyPoint {
        &self.points[i]
    }

    pub fn points(&self) -> &[FamilyPoint] {
        &self.points
    }

    pub fn r(&self) -> &HermitianMatrix {
        &self.r
    }

    pub fn r_sqrt(&self) -> &CMat {
        &self.r_sqrt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.r.dim()
    }

    /// Deterministic-equivalent cost at every point.
    pub fn eta_bar(&self, method: Method) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| match method {
                Method::Cml => Ok(eta_bar_cml(&self.r, &p.proj)),
                Method::Uml => eta_bar_uml(&self.r, &p.proj, self.n),
            })
            .collect()
    }

    /// `(1/N) tr[𝒬_ℓ 𝒬_m]`.
    pub fn wq_entry(&self, l: usize, m: usize) -> f64 {
        trace_product_re(self.points[l].q.as_matrix(), self.points[m].q.as_matrix()) / self.n as f64
    }

    /// `(1/N) tr[P⊥_ℓ P⊥_m]`.
    pub fn wp_entry(&self, l: usize, m: usize) -> f64 {
        let (a, b) = (&self.points[l].proj.p_perp, &self.points[m].proj.p_perp);
        trace_product_re(a.as_matrix(), b.as_matrix()) / self.n as f64
    }
}

fn q_from_basis(r_sqrt: &CMat, r: &HermitianMatrix, u: &CMat, phi0: f64) -> Result<HermitianMatrix> {
    let k = u.ncols();
    let mut g = u.adjoint() * r.as_matrix() * u;
    for i in 0..k {
        g[(i, i)] -= C64::new(phi0, 0.0);
    }
    let g = HermitianMatrix::symmetrize(g);
    let chol = nalgebra::Cholesky::new(g.into_matrix())
        .ok_or_else(|| Error::Singular("Aᴴ(R − φ₀I)A is not positive definite".into()))?;
    let b = r_sqrt * u;
    let x = chol.solve(&b.adjoint());
    Ok(HermitianMatrix::symmetrize(&b * x))
}

/// `𝒬 = R^{1/2} A [Aᴴ(R − φ₀ I)A]⁻¹ Aᴴ R^{1/2}`.
pub fn q_matrix(r: &HermitianMatrix, a: &CMat, phi0: f64) -> Result<HermitianMatrix> {
    let r_sqrt = psd_sqrt(r)?;
    let proj = projectors(a)?;
    q_from_basis(&r_sqrt, r, &proj.u_a, phi0)
}

fn symmetric_fill<F: Fn(usize, usize) -> Result<f64> + Sync>(n: usize, f: F) -> Result<RMat> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(i, j)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut out = RMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            out[(i, i + off)] = v;
            out[(i + off, i)] = v;
        }
    }
    Ok(out)
}

pub fn gamma_c(pf: &PointFamily) -> RMat {
    let n = pf.n as f64;
    symmetric_fill(pf.len(), |l, m| {
        Ok(trace_product_re(pf.points[l].p_perp_w.as_matrix(), pf.points[m].p_perp_w.as_matrix()) / n)
    })
    .expect("infallible fill")
}

/// `−log(1 − w)` for a `W_Q` entry, refusing arguments near zero.
fn log_term(w: f64) -> Result<f64> {
    let arg = 1.0 - w;
    if arg <= 1e-10 {
        return Err(Error::Degenerate(format!("As5/regime degeneracy: 1 − (1/N)tr[Q_l Q_m] = {arg:e}")));
    }
    Ok(-arg.ln())
}

/// The two parts `Γ_U⁽¹⁾` (a Gram matrix) and `Γ_U⁽²⁾ = −W_Q − log(1 − W_Q)`.
pub fn gamma_u_split(pf: &PointFamily) -> Result<(RMat, RMat)> {
    let n = pf.n as f64;
    let first = symmetric_fill(pf.len(), |l, m| {
        let (a, b) = (&pf.points[l], &pf.points[m]);
        let x = a.p_perp_w.as_matrix().scale(1.0 / a.sigma2) + a.q.as_matrix();
        let y = b.p_perp_w.as_matrix().scale(1.0 / b.sigma2) + b.q.as_matrix();
        Ok(trace_product_re(&x, &y) / n)
    })?;
    let second = symmetric_fill(pf.len(), |l, m| {
        let w = pf.wq_entry(l, m);
        Ok(log_term(w)? - w)
    })?;
    Ok((first, second))
}

/// Four-term `Γ_U`.
pub fn gamma_u(pf: &PointFamily) -> Result<RMat> {
    let n = pf.n as f64;
    symmetric_fill(pf.len(), |l, m| {
        let (a, b) = (&pf.points[l], &pf.points[m]);
        let pp = trace_product_re(a.p_perp_w.as_matrix(), b.p_perp_w.as_matrix()) / n;
        let pm_ql = trace_product_re(b.p_perp_w.as_matrix(), a.q.as_matrix()) / n;
        let pl_qm = trace_product_re(a.p_perp_w.as_matrix(), b.q.as_matrix()) / n;
        Ok(pp / (a.sigma2 * b.sigma2) + pm_ql / b.sigma2 + pl_qm / a.sigma2 + log_term(pf.wq_entry(l, m))?)
    })
}

/// `Γ₁ = (1/N) tr[R^{1/2} P_ℓ R^{1/2} 𝒬_m]`, with `ell = None` meaning `P = I`.
pub fn gamma1_closed(pf: &PointFamily, ell: Option<usize>, m: usize) -> Result<f64> {
    let qm = pf.points.get(m).ok_or_else(|| Error::InvalidInput(format!("no point {m}")))?;
    let left = match ell {
        None => pf.r.as_matrix().clone(),
        Some(l) => {
            let p = pf.points.get(l).ok_or_else(|| Error::InvalidInput(format!("no point {l}")))?;
            &pf.r_sqrt * p.proj.p_a.as_matrix() * &pf.r_sqrt
        }
    };
    Ok(trace_product_re(&left, qm.q.as_matrix()) / pf.n as f64)
}

/// `Γ₂ = −log(1 − (1/N) tr[𝒬_ℓ 𝒬_m])`.
pub fn gamma2_closed(pf: &PointFamily, ell: usize, m: usize) -> Result<f64> {
    if ell >= pf.len() || m >= pf.len() {
        return Err(Error::InvalidInput(format!("point index out of range ({ell}, {m})")));
    }
    log_term(pf.wq_entry(ell, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Log,
}

/// Operand `S = R^{1/2} X R^{1/2}` of the double-contour formula, kept as its
/// positive eigenpairs.
#[derive(Clone, Debug)]
pub struct OracleOperand {
    eigvals: Vec<f64>,
    eigvecs: CMat,
    spectrum: SpectrumWithMultiplicity,
}

impl OracleOperand {
    /// `x = None` selects `X = I`.
    pub fn new(r_sqrt: &CMat, x: Option<&HermitianMatrix>) -> Result<Self> {
        let s = match x {
            None => r_sqrt * r_sqrt,
            Some(p) => r_sqrt * p.as_matrix() * r_sqrt,
        };
        let es = herm_eig(&HermitianMatrix::symmetrize(s))?;
        let spectrum = SpectrumWithMultiplicity::from_eigenvalues(es.values.as_slice())?;
        let top = es.values.iter().fold(0.0f64, |a, v| a.max(*v));
        let keep: Vec<usize> = (0..es.values.len()).filter(|&i| es.values[i] > 1e-10 * top).collect();
        let eigvals = keep.iter().map(|&i| es.values[i]).collect();
        let eigvecs = es.vectors.select_columns(&keep);
        Ok(Self { eigvals, eigvecs, spectrum })
    }

    pub fn identity(pf: &PointFamily) -> Result<Self> {
        Self::new(&pf.r_sqrt, None)
    }

    pub fn signal(pf: &PointFamily, i: usize) -> Result<Self> {
        Self::new(&pf.r_sqrt, Some(&pf.points[i].proj.p_a))
    }

    pub fn noise(pf: &PointFamily, i: usize) -> Result<Self> {
        Self::new(&pf.r_sqrt, Some(&pf.points[i].proj.p_perp))
    }

    pub fn spectrum(&self) -> &SpectrumWithMultiplicity {
        &self.spectrum
    }
}

struct SampledOperand {
    weights: Vec<C64>,
    g: Vec<C64>,
    a: DMatrix<C64>,
    da: DMatrix<C64>,
}

/// Nodes on a circle in `u = log(ω − φ₀)` through the same real crossings as
/// the single-integral contour, traversed counterclockwise from the right.
fn log_circle_nodes(op: &OracleOperand, n: usize, nodes: usize) -> Result<(Vec<C64>, Vec<C64>)> {
    let c = omega_contour(&op.spectrum, n, 64)?;
    let phi0 = solve_phi0(&op.spectrum, n)?.value;
    let (x_left, x_right) = (c.center.re - c.semi_axes.0, c.center.re + c.semi_axes.0);
    let (ul, ur) = ((x_left - phi0).ln(), (x_right - phi0).ln());
    let (mid, rho) = (0.5 * (ul + ur), 0.5 * (ur - ul));
    let beta = rho.min(2.5);
    let h = 2.0 * PI / nodes as f64;
    let mut ws = Vec::with_capacity(nodes);
    let mut wts = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let (s, co) = (h * k as f64).sin_cos();
        let e = C64::new(mid + rho * co, beta * s).exp();
        ws.push(phi0 + e);
        wts.push(e * C64::new(-rho * s, beta * co) * h);
    }
    Ok((ws, wts))
}

fn sample_operand(op: &OracleOperand, n: usize, kernel: Kernel, nodes: usize) -> Result<SampledOperand> {
    let (ws, weights) = log_circle_nodes(op, n, nodes)?;
    let zs: Vec<C64> = ws.iter().map(|&w| w * (1.0 - op.spectrum.phi(n, w))).collect();
    let g = match kernel {
        Kernel::Linear => zs,
        Kernel::Log => unwrapped_log(&zs)?,
    };
    let p = op.eigvals.len();
    let a = DMatrix::from_fn(nodes, p, |i, j| op.eigvals[j] / (op.eigvals[j] - ws[i]));
    let da = DMatrix::from_fn(nodes, p, |i, j| {
        let d = op.eigvals[j] - ws[i];
        op.eigvals[j] / (d * d)
    });
    Ok(SampledOperand { weights, g, a, da })
}

fn double_quadrature(x: &SampledOperand, y: &SampledOperand, kappa: &DMatrix<C64>) -> Result<C64> {
    let ak = &x.a * kappa;
    let dak = &x.da * kappa;
    let (bt, dbt) = (y.a.transpose(), y.da.transpose());
    let psi = &ak * &bt;
    let psi1 = &dak * &bt;
    let psi2 = &ak * &dbt;
    let psi12 = &dak * &dbt;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..psi.ncols() {
        let mut col = C64::new(0.0, 0.0);
        for i in 0..psi.nrows() {
            let one_m = 1.0 - psi[(i, j)];
            if one_m.norm() < 1e-6 {
                return Err(Error::Contour(format!("|1 − Ψ| = {:e} on the node grid", one_m.norm())));
            }
            let phi = psi12[(i, j)] / one_m + psi1[(i, j)] * psi2[(i, j)] / (one_m * one_m);
            col += x.g[i] * x.weights[i] * phi;
        }
        acc += col * y.g[j] * y.weights[j];
    }
    Ok(acc)
}

const ORACLE_START: usize = 128;
const ORACLE_MAX: usize = 4096;

/// Numerical double contour integral
/// `(1/2πj)² ∮∮ g_a(ω₁) g_b(ω₂) Φ(ω₁, ω₂) dω₁ dω₂` with
/// `Φ = −∂² log(1 − Ψ)/∂ω₁∂ω₂` and `g = f(ω(1 − Φ_S(ω)))`.
pub fn gamma_numeric_oracle(a: &OracleOperand, b: &OracleOperand, fa: Kernel, fb: Kernel, n: usize) -> Result<f64> {
    let nf = n as f64;
    let overlap = a.eigvecs.adjoint() * &b.eigvecs;
    let kappa = overlap.map(|v| C64::new(v.norm_sqr() / nf, 0.0));
    let mut nodes = ORACLE_START;
    let mut prev: Option<C64> = None;
    loop {
        let x = sample_operand(a, n, fa, nodes)?;
        let y = sample_operand(b, n, fb, nodes)?;
        let cur = -double_quadrature(&x, &y, &kappa)? / (4.0 * PI * PI);
        if let Some(p) = prev {
            if (cur - p).norm() <= 1e-11 * (1.0 + cur.norm()) {
                if cur.im.abs() > 1e-8 * (1.0 + cur.re.abs()) {
                    return Err(Error::Numerical(format!("double integral has imaginary part {}", cur.im)));
                }
                return Ok(cur.re);
            }
        }
        if nodes >= ORACLE_MAX {
            return Err(Error::Numerical(format!("double contour did not converge with {nodes} nodes")));
        }
        prev = Some(cur);
        nodes *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct As5Diagnostics {
    pub min_eig_wp: f64,
    pub min_eig_wq: f64,
}

fn min_eig(m: &RMat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// `W_P` and `W_Q` over points `1..=L`.
pub fn as5_matrices(pf: &PointFamily) -> (RMat, RMat) {
    let l = pf.l();
    let wp = RMat::from_fn(l, l, |i, j| pf.wp_entry(i + 1, j + 1));
    let wq = RMat::from_fn(l, l, |i, j| pf.wq_entry(i + 1, j + 1));
    (wp, wq)
}

/// Minimum eigenvalues of `W_P` and `W_Q` (`+∞` for an empty family).
pub fn as5_diagnostics(pf: &PointFamily) -> As5Diagnostics {
    let (wp, wq) = as5_matrices(pf);
    As5Diagnostics { min_eig_wp: min_eig(&wp), min_eig_wq: min_eig(&wq) }
}

/// `W_P`, `W_Q` minimum eigenvalues for an arbitrary point list, duplicates allowed.
pub fn as5_diagnostics_for(man: &Manifold, r: &HermitianMatrix, n: usize, points: &[ThetaPoint]) -> Result<As5Diagnostics> {
    let r_sqrt = psd_sqrt(r)?;
    let pts = points.iter().map(|t| build_point(man, r, &r_sqrt, n, t)).collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let l = pts.len();
    let wp = RMat::from_fn(l, l, |i, j| {
        trace_product_re(pts[i].proj.p_perp.as_matrix(), pts[j].proj.p_perp.as_matrix()) / nf
    });
    let wq = RMat::from_fn(l, l, |i, j| trace_product_re(pts[i].q.as_matrix(), pts[j].q.as_matrix()) / nf);
    Ok(As5Diagnostics { min_eig_wp: min_eig(&wp), min_eig_wq: min_eig(&wq) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaDiagnostics {
    pub as5: As5Diagnostics,
    pub min_eig_gamma_c: f64,
    pub min_eig_gamma_u: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct GammaMatrices {
    pub gamma_c: RMat,
    pub gamma_u: RMat,
    pub diagnostics: GammaDiagnostics,
}

impl GammaMatrices {
    pub fn for_method(&self, method: Method) -> &RMat {
        match method {
            Method::Cml => &self.gamma_c,
            Method::Uml => &self.gamma_u,
        }
    }
}

/// Symmetrizes and clamps eigenvalues in `[−1e-8·tr, 0)` to zero.
fn clamp_psd(m: RMat) -> Result<(RMat, f64, bool)> {
    let s = (&m + m.transpose()).scale(0.5);
    let tr = s.trace().abs();
    let eig = nalgebra::SymmetricEigen::new(s.clone());
    let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if lmin >= 0.0 {
        return Ok((s, lmin, false));
    }
    if lmin < -1e-8 * tr {
        return Err(Error::NotPsd { min_eig: lmin, scale: tr });
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let out = &eig.eigenvectors * RMat::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(((&out + out.transpose()).scale(0.5), lmin, true))
}

/// Both covariance matrices with conditioning diagnostics.
pub fn gamma_matrices(pf: &PointFamily) -> Result<GammaMatrices> {
    let (gc, lc, c1) = clamp_psd(gamma_c(pf))?;
    let (gu, lu, c2) = clamp_psd(gamma_u(pf)?)?;
    Ok(GammaMatrices {
        gamma_c: gc,
        gamma_u: gu,
        diagnostics: GammaDiagnostics {
            as5: as5_diagnostics(pf),
            min_eig_gamma_c: lc,
            min_eig_gamma_u: lu,
            clamped: c1 || c2,
        },
    })
}
