//! Deterministic equivalents of the CML/UML costs and the Stieltjes-transform
//! machinery behind them.
//!
//! Spectra are described by distinct eigenvalues with multiplicities. For a
//! spectrum with positive eigenvalues `γ_m` of multiplicity `K_m` and `N`
//! snapshots we use
//!
//! * `Φ(ω) = (1/N) Σ K_m γ_m / (γ_m − ω)`
//! * `S(ω) = (1/N) Σ K_m γ_m² / (γ_m − ω)²`, so that `d/dω [ω(1 − Φ(ω))] = 1 − S(ω)`.

use std::f64::consts::PI;

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use crate::array_model::Regime;
use crate::ml_costs::{trace_perp, Projectors};
use crate::numerics::{
    contour_integral_batch, find_root_bracketed, herm_eigenvalues, poly_roots, unwrapped_log, Contour,
    HermitianMatrix, Orientation,
};
use crate::numerics::roots::{poly_add, poly_from_factors, poly_mul};
use crate::{CMat, Error, Result, C64};

const CLUSTER_TOL: f64 = 1e-8;
const ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWithMultiplicity {
    values: Vec<f64>,
    mults: Vec<usize>,
}

impl SpectrumWithMultiplicity {
    pub fn new(values: Vec<f64>, mults: Vec<usize>) -> Result<Self> {
        if values.len() != mults.len() || values.is_empty() {
            return Err(Error::InvalidInput("spectrum needs matching nonempty values and multiplicities".into()));
        }
        if mults.contains(&0) || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid spectrum {values:?} x {mults:?}")));
        }
        let top = values.iter().fold(0.0f64, |a, v| a.max(*v));
        if values.windows(2).any(|w| w[1] - w[0] <= 1e-9 * top) {
            return Err(Error::InvalidInput(format!("spectrum values must be strictly ascending: {values:?}")));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput("spectrum has no positive eigenvalue".into()));
        }
        Ok(Self { values, mults })
    }

    /// Clusters raw eigenvalues (relative tolerance 1e-8); values below 1e-10 of
    /// the largest become exact zeros.
    pub fn from_eigenvalues(eigs: &[f64]) -> Result<Self> {
        let top = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if top == 0.0 {
            return Err(Error::InvalidInput("spectrum has no positive eigenvalue".into()));
        }
        let mut v: Vec<f64> = eigs.to_vec();
        v.sort_by(f64::total_cmp);
        if v[0] < -ZERO_TOL * top {
            return Err(Error::NotPsd { min_eig: v[0], scale: top });
        }
        let mut values: Vec<f64> = Vec::new();
        let mut mults: Vec<usize> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        for x in v {
            let x = if x <= ZERO_TOL * top { 0.0 } else { x };
            match values.last() {
                Some(&start) if x - start <= CLUSTER_TOL * top && (start == 0.0) == (x == 0.0) => {
                    *mults.last_mut().unwrap() += 1;
                    *sums.last_mut().unwrap() += x;
                }
                _ => {
                    values.push(x);
                    mults.push(1);
                    sums.push(x);
                }
            }
        }
        let values = sums.iter().zip(&mults).map(|(s, &k)| s / k as f64).collect();
        Ok(Self { values, mults })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mults
    }

    /// Total dimension `M`.
    pub fn dim(&self) -> usize {
        self.mults.iter().sum()
    }

    /// Sum of positive-eigenvalue multiplicities (`K` for projected spectra).
    pub fn signal_rank(&self) -> usize {
        self.positive().map(|(_, k)| k).sum()
    }

    pub fn positive(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.values.iter().zip(&self.mults).filter(|(v, _)| **v > 0.0).map(|(v, k)| (*v, *k))
    }

    pub fn gamma_min(&self) -> f64 {
        self.positive().map(|(g, _)| g).fold(f64::INFINITY, f64::min)
    }

    pub fn gamma_max(&self) -> f64 {
        self.positive().map(|(g, _)| g).fold(0.0, f64::max)
    }

    pub fn phi(&self, n: usize, w: C64) -> C64 {
        self.positive().map(|(g, k)| k as f64 * g / (g - w)).sum::<C64>() / n as f64
    }

    pub fn phi_real(&self, n: usize, x: f64) -> f64 {
        self.positive().map(|(g, k)| k as f64 * g / (g - x)).sum::<f64>() / n as f64
    }

    pub fn s_fn(&self, n: usize, w: C64) -> C64 {
        self.positive().map(|(g, k)| k as f64 * g * g / ((g - w) * (g - w))).sum::<C64>() / n as f64
    }

    pub fn s_real(&self, n: usize, x: f64) -> f64 {
        self.positive().map(|(g, k)| k as f64 * g * g / ((g - x) * (g - x))).sum::<f64>() / n as f64
    }
}

/// Spectrum of `P R P` from the compressed matrix `Uᴴ R U`; the zero
/// eigenvalue carries multiplicity `M − K`.
pub fn projected_spectrum(r: &HermitianMatrix, p: &Projectors) -> Result<SpectrumWithMultiplicity> {
    let (m, k) = (p.m(), p.k());
    let eig = herm_eigenvalues(&p.compress(r.as_matrix()))?;
    spectrum_from_signal_eigenvalues(&eig, m, r.trace())
        .map_err(|e| match e {
            Error::InvalidInput(_) => Error::Numerical(format!("As4 violated numerically: fewer than {k} positive eigenvalues")),
            other => other,
        })
}

fn spectrum_from_signal_eigenvalues(eig: &[f64], m: usize, scale: f64) -> Result<SpectrumWithMultiplicity> {
    let k = eig.len();
    if eig.iter().any(|&v| v <= ZERO_TOL * scale) {
        return Err(Error::InvalidInput("non-positive signal eigenvalue".into()));
    }
    let sig = SpectrumWithMultiplicity::from_eigenvalues(eig)?;
    let (mut values, mut mults) = (Vec::with_capacity(sig.values.len() + 1), Vec::new());
    if m > k {
        values.push(0.0);
        mults.push(m - k);
    }
    values.extend_from_slice(&sig.values);
    mults.extend_from_slice(&sig.mults);
    Ok(SpectrumWithMultiplicity { values, mults })
}

/// Spectrum of `R` itself (the unprojected index-0 convention).
pub fn full_spectrum(r: &HermitianMatrix) -> Result<SpectrumWithMultiplicity> {
    SpectrumWithMultiplicity::from_eigenvalues(&herm_eigenvalues(r)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi0 {
    pub value: f64,
    pub regime: Regime,
    pub residual: f64,
}

/// `((1/N) Σ K_m/γ_m)^{-1} |K/N − 1|`.
pub fn phi0_lower_bound(spec: &SpectrumWithMultiplicity, n: usize) -> f64 {
    let k = spec.signal_rank() as f64;
    let inv: f64 = spec.positive().map(|(g, km)| km as f64 / g).sum::<f64>() / n as f64;
    (k / n as f64 - 1.0).abs() / inv
}

/// Non-positive root of `Φ(φ) = 1`: zero when `K < N`, strictly negative when `K > N`.
pub fn solve_phi0(spec: &SpectrumWithMultiplicity, n: usize) -> Result<Phi0> {
    let k = spec.signal_rank();
    let regime = Regime::of(k, n)?;
    if regime == Regime::Oversampled {
        return Ok(Phi0 { value: 0.0, regime, residual: 0.0 });
    }
    let lb = phi0_lower_bound(spec, n);
    let ub = spec.gamma_max() * (k as f64 / n as f64 - 1.0);
    let f = |x: f64| spec.phi_real(n, x) - 1.0;
    let lo = -ub * (1.0 + 1e-9) - f64::MIN_POSITIVE;
    let hi = -lb * (1.0 - 1e-9);
    let mut x = find_root_bracketed(f, lo, hi, 1e-15)?;
    for _ in 0..3 {
        let d: f64 = spec.positive().map(|(g, km)| km as f64 * g / ((g - x) * (g - x))).sum::<f64>() / n as f64;
        let step = f(x) / d;
        let cand = x - step;
        if cand < 0.0 && f(cand).abs() < f(x).abs() {
            x = cand;
        } else {
            break;
        }
    }
    Ok(Phi0 { value: x, regime, residual: f(x).abs() })
}

/// Real roots of `φ(1 − Φ(φ)) = 0`, ascending, from a companion-matrix solve of
/// the cleared polynomial followed by Newton polishing.
pub fn phi_roots(spec: &SpectrumWithMultiplicity, n: usize) -> Result<Vec<f64>> {
    let pos: Vec<(f64, usize)> = spec.positive().collect();
    let gammas: Vec<f64> = pos.iter().map(|p| p.0).collect();
    let mut num = poly_from_factors(&gammas);
    for (i, &(g, km)) in pos.iter().enumerate() {
        let others: Vec<f64> = gammas.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).collect();
        let term: Vec<f64> = poly_from_factors(&others).iter().map(|c| -c * km as f64 * g / n as f64).collect();
        num = poly_add(&num, &term);
    }
    let full = poly_mul(&num, &[0.0, 1.0]);
    let gmax = spec.gamma_max();
    let mut roots = Vec::new();
    for z in poly_roots(&full)? {
        if z.im.abs() > 1e-8 * gmax {
            return Err(Error::Numerical(format!("non-real root {z} of the phi polynomial")));
        }
        roots.push(z.re);
    }
    for x in roots.iter_mut() {
        if x.abs() <= 1e-12 * gmax {
            *x = 0.0;
            continue;
        }
        for _ in 0..4 {
            let h = 1.0 - spec.phi_real(n, *x);
            let dh: f64 = -pos.iter().map(|&(g, km)| km as f64 * g / ((g - *x) * (g - *x))).sum::<f64>() / n as f64;
            let cand = *x - h / dh;
            if (1.0 - spec.phi_real(n, cand)).abs() < h.abs() {
                *x = cand;
            } else {
                break;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// `(1/M) tr(P⊥ R)`.
pub fn eta_bar_cml(r: &HermitianMatrix, p: &Projectors) -> f64 {
    trace_perp(p, r) / p.m() as f64
}

/// Deterministic equivalent of the UML cost, oversampled or undersampled.
pub fn eta_bar_uml(r: &HermitianMatrix, p: &Projectors, n: usize) -> Result<f64> {
    let g = p.compress(r.as_matrix());
    eta_bar_uml_compressed(&g, r.trace(), p.m(), n)
}

/// `η̄_U` from `G = Uᴴ R U` and `tr R` alone.
pub fn eta_bar_uml_compressed(g: &HermitianMatrix, trace_r: f64, m: usize, n: usize) -> Result<f64> {
    let eig = herm_eigenvalues(g)?;
    let tr_perp = trace_r - eig.iter().sum::<f64>();
    eta_bar_uml_from_parts(&eig, tr_perp, m, n)
}

/// `η̄_U` from the signal eigenvalues of `P R P` and `tr(P⊥ R)`.
pub fn eta_bar_uml_from_parts(eig: &[f64], tr_perp: f64, m: usize, n: usize) -> Result<f64> {
    let k = eig.len();
    let (mf, nf, kf) = (m as f64, n as f64, k as f64);
    if eig.iter().any(|&v| !(v > 0.0)) || !(tr_perp > 0.0) {
        return Err(Error::Numerical(format!("degenerate projected spectrum {eig:?}, tr(P⊥R) = {tr_perp:e}")));
    }
    match Regime::of(k, n)? {
        Regime::Oversampled => {
            let s2 = tr_perp / (mf - kf);
            let ld: f64 = eig.iter().map(|v| v.ln()).sum();
            Ok(((mf - kf) * s2.ln() + ld) / mf + (nf - kf) / mf * (nf / (nf - kf)).ln() - kf / mf)
        }
        Regime::Undersampled => {
            let spec = SpectrumWithMultiplicity::from_eigenvalues(eig)?;
            let phi0 = solve_phi0(&spec, n)?.value.abs();
            let s2 = tr_perp / (mf - nf);
            let ld = (mf - kf) * phi0.ln() + eig.iter().map(|v| (v + phi0).ln()).sum::<f64>();
            Ok(ld / mf + (mf - nf) / mf * s2.ln() - (mf - nf) / mf * phi0.ln() - nf / mf)
        }
    }
}

/// `(1/M) tr[(R̂_A − zI)^{-1}]` from the eigenvalues.
pub fn empirical_stieltjes(r_a_hat: &HermitianMatrix, z: C64) -> Result<C64> {
    let eig = herm_eigenvalues(r_a_hat)?;
    let m = eig.len() as f64;
    let mut acc = C64::new(0.0, 0.0);
    for &l in &eig {
        let d = C64::new(l, 0.0) - z;
        if d.norm() <= 1e-12 {
            return Err(Error::InvalidInput(format!("z = {z} lies on the spectrum")));
        }
        acc += 1.0 / d;
    }
    Ok(acc / m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaSolution {
    pub omega: C64,
    /// `dω/dz = 1/(1 − S(ω))`.
    pub derivative: C64,
    pub residual: f64,
}

fn omega_residual(spec: &SpectrumWithMultiplicity, n: usize, z: C64, w: C64) -> C64 {
    w * (1.0 - spec.phi(n, w)) - z
}

fn newton_omega(spec: &SpectrumWithMultiplicity, n: usize, z: C64, start: C64, upper: bool) -> Option<C64> {
    let mut w = start;
    let scale = 1.0 + z.norm();
    for _ in 0..200 {
        let f = omega_residual(spec, n, z, w);
        if f.norm() <= 1e-14 * scale {
            return Some(w);
        }
        let d = 1.0 - spec.s_fn(n, w);
        let mut step = f / d;
        let mut next = w - step;
        let mut tries = 0;
        while omega_residual(spec, n, z, next).norm() > f.norm() && tries < 30 {
            step *= 0.5;
            next = w - step;
            tries += 1;
        }
        if upper && next.im < 0.0 {
            next = next.conj();
        }
        if !next.re.is_finite() || !next.im.is_finite() {
            return None;
        }
        w = next;
    }
    let f = omega_residual(spec, n, z, w);
    (f.norm() <= 1e-10 * scale).then_some(w)
}

/// Companion-matrix solve of the cleared equation; returns the root in the
/// closed upper half plane with the largest imaginary part.
fn omega_by_polynomial(spec: &SpectrumWithMultiplicity, n: usize, z: C64) -> Result<C64> {
    let pos: Vec<(f64, usize)> = spec.positive().collect();
    let gammas: Vec<f64> = pos.iter().map(|p| p.0).collect();
    let mut num = poly_from_factors(&gammas);
    for (i, &(g, km)) in pos.iter().enumerate() {
        let others: Vec<f64> = gammas.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).collect();
        let term: Vec<f64> = poly_from_factors(&others).iter().map(|c| -c * km as f64 * g / n as f64).collect();
        num = poly_add(&num, &term);
    }
    // ω·num(ω) − z·Π(γ − ω) = 0
    let lhs: Vec<C64> = poly_mul(&num, &[0.0, 1.0]).iter().map(|&c| C64::new(c, 0.0)).collect();
    let den = poly_from_factors(&gammas);
    let coeffs: Vec<C64> = (0..lhs.len()).map(|i| lhs[i] - z * den.get(i).copied().unwrap_or(0.0)).collect();
    let deg = coeffs.len() - 1;
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / coeffs[deg];
    }
    let eig = Schur::new(comp)
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("companion Schur decomposition failed".into()))?;
    eig.iter()
        .copied()
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .ok_or_else(|| Error::Numerical("empty companion spectrum".into()))
}

/// Solves `z = ω(1 − Φ(ω))` on the branch with `Im ω ≥ 0` for `Im z > 0`; real
/// `z` outside the support is reached as the limit from the upper half plane.
pub fn solve_omega(spec: &SpectrumWithMultiplicity, n: usize, z: C64) -> Result<OmegaSolution> {
    if z.im < 0.0 {
        return solve_omega(spec, n, z.conj()).map(|s| OmegaSolution {
            omega: s.omega.conj(),
            derivative: s.derivative.conj(),
            residual: s.residual,
        });
    }
    let finish = |w: C64| {
        let residual = omega_residual(spec, n, z, w).norm();
        OmegaSolution { omega: w, derivative: 1.0 / (1.0 - spec.s_fn(n, w)), residual }
    };
    if z.im > 0.0 {
        if let Some(w) = newton_omega(spec, n, z, z, true) {
            if w.im > 0.0 {
                return Ok(finish(w));
            }
        }
        let w0 = omega_by_polynomial(spec, n, z)?;
        let w = newton_omega(spec, n, z, w0, true)
            .ok_or_else(|| Error::Numerical(format!("omega iteration failed at z = {z}")))?;
        return Ok(finish(w));
    }
    // real axis: continue from z + iδ
    let delta = 1e-9 * (1.0 + z.norm());
    let above = solve_omega(spec, n, C64::new(z.re, delta))?.omega;
    let scale = spec.gamma_max().max(z.norm());
    let x0 = above.re;
    let f = |x: f64| x * (1.0 - spec.phi_real(n, x)) - z.re;
    let mut x = x0;
    for _ in 0..100 {
        let d = 1.0 - spec.s_real(n, x);
        let step = f(x) / d;
        x -= step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    if above.im > 1e-6 * scale || (x - x0).abs() > 1e-6 * scale || 1.0 - spec.s_real(n, x) <= 0.0 {
        return Err(Error::Numerical(format!("real z = {} lies inside the asymptotic support", z.re)));
    }
    Ok(finish(C64::new(x, 0.0)))
}

/// Deterministic equivalent of the Stieltjes transform,
/// `m̄(z) = (ω/z)(1/M) Σ_{m≥0} K_m/(γ_m − ω)`.
pub fn stieltjes_det_equiv(spec: &SpectrumWithMultiplicity, n: usize, z: C64) -> Result<C64> {
    let w = solve_omega(spec, n, z)?.omega;
    let m = spec.dim() as f64;
    let s: C64 = spec.values.iter().zip(&spec.mults).map(|(&g, &k)| k as f64 / (g - w)).sum();
    Ok(w / z * s / m)
}

/// Closed form of the log-integral over the projected spectrum.
pub fn integral_i_closed(spec: &SpectrumWithMultiplicity, n: usize) -> Result<f64> {
    let (m, k) = (spec.dim() as f64, spec.signal_rank());
    let (kf, nf) = (k as f64, n as f64);
    let phi0 = solve_phi0(spec, n)?;
    let logsum: f64 = spec.positive().map(|(g, km)| km as f64 * (g - phi0.value).ln()).sum();
    Ok(match phi0.regime {
        Regime::Oversampled => logsum / m + (nf - kf) / m * (nf / (nf - kf)).ln() - kf / m,
        Regime::Undersampled => logsum / m + (nf - kf) / m * phi0.value.abs().ln() - nf / m,
    })
}

/// Clockwise ω-plane circle enclosing the positive eigenvalues and the roots
/// `φ_k, k ≥ 1`, excluding `φ₀`, with `S(ω) < 1` on the whole contour.
pub fn omega_contour(spec: &SpectrumWithMultiplicity, n: usize, nodes: usize) -> Result<Contour> {
    let phi0 = solve_phi0(spec, n)?.value;
    let g1 = spec.gamma_min();
    let gmax = spec.gamma_max();
    let s = |x: f64| spec.s_real(n, x) - 1.0;
    let mut hi = g1 - 0.5 * (g1 - phi0);
    let mut guard = 0;
    while s(hi) <= 0.0 {
        hi = g1 - 0.5 * (g1 - hi);
        guard += 1;
        if guard > 200 {
            return Err(Error::Contour("cannot bracket the left S = 1 crossing".into()));
        }
    }
    let x_minus = find_root_bracketed(s, phi0, hi, 1e-14)?;
    let x_left = 0.5 * (phi0 + x_minus);
    let target = 0.5 * (1.0 - spec.s_real(n, x_left));
    let k = spec.signal_rank() as f64;
    let ub = gmax + gmax * (k / (n as f64 * target)).sqrt() * 1.01 + f64::MIN_POSITIVE;
    let mut lo = gmax + 0.5 * (ub - gmax);
    guard = 0;
    while spec.s_real(n, lo) <= target {
        lo = gmax + 0.5 * (lo - gmax);
        guard += 1;
        if guard > 200 {
            return Err(Error::Contour("cannot bracket the right crossing".into()));
        }
    }
    let x_right = find_root_bracketed(|x| spec.s_real(n, x) - target, lo, ub, 1e-14)?;
    let center = C64::new(0.5 * (x_left + x_right), 0.0);
    let radius = 0.5 * (x_right - x_left);
    let roots = phi_roots(spec, n)?;
    let mut inside: Vec<C64> = spec.positive().map(|(g, _)| C64::new(g, 0.0)).collect();
    inside.extend(roots.iter().skip(1).map(|&x| C64::new(x, 0.0)));
    Contour::circle(center, radius, nodes, Orientation::Clockwise)?
        .must_enclose(&inside)?
        .must_exclude(&[C64::new(phi0, 0.0)])
}

const ORACLE_REL_TOL: f64 = 1e-13;
const ORACLE_START_NODES: usize = 256;

fn two_pi_j() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

/// Numerical ω-plane evaluation of the log-integral; must agree with
/// [`integral_i_closed`].
pub fn integral_i_numeric(spec: &SpectrumWithMultiplicity, n: usize) -> Result<f64> {
    let c = omega_contour(spec, n, ORACLE_START_NODES)?;
    let m = spec.dim() as f64;
    let val = contour_integral_batch(&c, ORACLE_REL_TOL, 1 << 20, |ws| {
        let zs: Vec<C64> = ws.iter().map(|&w| w * (1.0 - spec.phi(n, w))).collect();
        let logs = unwrapped_log(&zs)?;
        Ok(ws
            .iter()
            .zip(&logs)
            .map(|(&w, &l)| {
                let h: C64 = spec.positive().map(|(g, k)| k as f64 / (g - w)).sum::<C64>() / m;
                l * h / (1.0 - spec.phi(n, w)) * (1.0 - spec.s_fn(n, w))
            })
            .collect())
    })? / two_pi_j();
    if val.im.abs() > 1e-8 * (1.0 + val.re.abs()) {
        return Err(Error::Numerical(format!("log-integral has imaginary part {}", val.im)));
    }
    Ok(val.re)
}

/// `(1/2πj) ∮ z m̄(z) dz` over a clockwise contour, computed in the ω-plane.
pub fn trace_integral_numeric(spec: &SpectrumWithMultiplicity, n: usize) -> Result<f64> {
    let c = omega_contour(spec, n, ORACLE_START_NODES)?;
    let m = spec.dim() as f64;
    let val = contour_integral_batch(&c, ORACLE_REL_TOL, 1 << 20, |ws| {
        Ok(ws
            .iter()
            .map(|&w| {
                let h: C64 = spec.positive().map(|(g, k)| k as f64 / (g - w)).sum::<C64>() / m;
                w * h * (1.0 - spec.s_fn(n, w))
            })
            .collect())
    })? / two_pi_j();
    Ok(val.re)
}

/// Contour-integral evaluation of `η̄_C`.
pub fn eta_bar_cml_contour(r: &HermitianMatrix, p: &Projectors, n: usize) -> Result<f64> {
    let full = trace_integral_numeric(&full_spectrum(r)?, n)?;
    let proj = trace_integral_numeric(&projected_spectrum(r, p)?, n)?;
    Ok(full - proj)
}

/// Contour-integral evaluation of `η̄_U`.
pub fn eta_bar_uml_contour(r: &HermitianMatrix, p: &Projectors, n: usize) -> Result<f64> {
    let (m, k) = (p.m(), p.k());
    let kt = k.min(n) as f64;
    let mf = m as f64;
    let eta_c = eta_bar_cml_contour(r, p, n)?;
    let i = integral_i_numeric(&projected_spectrum(r, p)?, n)?;
    Ok((mf - kt) / mf * (mf / (mf - kt) * eta_c).ln() + i)
}
