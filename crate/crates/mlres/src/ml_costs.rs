//! CML and UML cost functions and the exact UML profile solution.

use serde::{Deserialize, Serialize};

use crate::array_model::{Regime, SampleCovariance};
use crate::numerics::{herm_eig, herm_eigenvalues, log_det_hpd, log_pseudo_det, trace_product_re, HermitianMatrix};
use crate::{CMat, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CML")]
    Cml,
    #[serde(rename = "UML")]
    Uml,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cml => "CML",
            Method::Uml => "UML",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CML" => Ok(Method::Cml),
            "UML" => Ok(Method::Uml),
            other => Err(Error::InvalidInput(format!("unknown method '{other}' (expected CML or UML)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Orthogonal projectors onto the column space of `A` and its complement.
///
/// `u_a` is an orthonormal basis from a QR factorization, `A = U_A T`.
#[derive(Clone, Debug)]
pub struct Projectors {
    pub p_a: HermitianMatrix,
    pub p_perp: HermitianMatrix,
    pub u_a: CMat,
    pub t: CMat,
}

impl Projectors {
    pub fn m(&self) -> usize {
        self.u_a.nrows()
    }

    pub fn k(&self) -> usize {
        self.u_a.ncols()
    }

    /// `Uᴴ X U`.
    pub fn compress(&self, x: &CMat) -> HermitianMatrix {
        HermitianMatrix::symmetrize(self.u_a.adjoint() * x * &self.u_a)
    }
}

/// Orthonormal basis of `range(a)` with the full-rank check used everywhere.
pub fn orthonormal_basis(a: &CMat) -> Result<(CMat, CMat)> {
    let k = a.ncols();
    let gram = HermitianMatrix::symmetrize(a.adjoint() * a);
    let ev = herm_eigenvalues(&gram)?;
    let tr: f64 = ev.iter().sum();
    if k == 0 || ev[0] <= 1e-10 * tr / k as f64 {
        let theta = (0..k).map(|j| a[(1.min(a.nrows() - 1), j)].arg()).collect();
        return Err(Error::ManifoldDegenerate { theta, min_eig: ev.first().copied().unwrap_or(0.0) });
    }
    let qr = a.clone().qr();
    Ok((qr.q(), qr.r()))
}

pub fn projectors(a: &CMat) -> Result<Projectors> {
    let (u, t) = orthonormal_basis(a)?;
    let p = HermitianMatrix::symmetrize(&u * u.adjoint());
    let m = a.nrows();
    let perp = HermitianMatrix::symmetrize(CMat::identity(m, m) - p.as_matrix());
    Ok(Projectors { p_a: p, p_perp: perp, u_a: u, t })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEvaluation {
    pub method: Method,
    pub regime: Regime,
    pub value: f64,
}

/// `tr(P⊥ X)`.
pub fn trace_perp(p: &Projectors, x: &HermitianMatrix) -> f64 {
    trace_product_re(p.p_perp.as_matrix(), x.as_matrix())
}

/// `(1/M) tr(P⊥ R̂)`.
pub fn cml_cost(p: &Projectors, rhat: &SampleCovariance) -> f64 {
    trace_perp(p, &rhat.matrix) / p.m() as f64
}

/// `tr(P⊥ R̂)/(M − K̃)`.
pub fn sigma2_tilde(p: &Projectors, rhat: &SampleCovariance, k_tilde: usize) -> Result<f64> {
    let m = p.m();
    if k_tilde >= m {
        return Err(Error::InvalidInput(format!("need K~ < M, got K~={k_tilde}, M={m}")));
    }
    Ok(trace_perp(p, &rhat.matrix) / (m - k_tilde) as f64)
}

/// UML cost. Oversampled: `(1/M) logdet[σ̂² P⊥ + P R̂ P]`. Undersampled:
/// `((M−N)/M) log σ̂²_N + (1/M) logdet(Yᴴ P Y / N)`, which needs the snapshots.
pub fn uml_cost(p: &Projectors, rhat: &SampleCovariance, y: Option<&CMat>) -> Result<CostEvaluation> {
    let (m, k, n) = (p.m(), p.k(), rhat.snapshots);
    let regime = Regime::of(k, n)?;
    let mf = m as f64;
    let value = match regime {
        Regime::Oversampled => {
            let s2 = sigma2_tilde(p, rhat, k)?;
            let pr = p.p_a.as_matrix() * rhat.matrix.as_matrix() * p.p_a.as_matrix();
            let arg = HermitianMatrix::symmetrize(p.p_perp.as_matrix().scale(s2) + pr);
            log_det_hpd(&arg)? / mf
        }
        Regime::Undersampled => {
            let y = y.ok_or_else(|| {
                Error::InvalidInput("undersampled UML cost requires the snapshot matrix".into())
            })?;
            let s2 = sigma2_tilde(p, rhat, n)?;
            let uy = p.u_a.adjoint() * y;
            let g = HermitianMatrix::symmetrize(uy.adjoint() * uy).into_matrix().unscale(n as f64);
            let ld = log_det_hpd(&HermitianMatrix::symmetrize(g)).map_err(|e| {
                Error::Singular(format!("Y^H P Y / N is singular ({e})"))
            })?;
            (mf - n as f64) / mf * s2.ln() + ld / mf
        }
    };
    Ok(CostEvaluation { method: Method::Uml, regime, value })
}

/// `((M−K)/M) log σ̂²_K + (1/M) logdet(U_Aᴴ R̂ U_A)` (oversampled only).
pub fn uml_cost_eigen_form(p: &Projectors, rhat: &SampleCovariance) -> Result<f64> {
    let (m, k) = (p.m(), p.k());
    if Regime::of(k, rhat.snapshots)? != Regime::Oversampled {
        return Err(Error::InvalidInput("eigen form needs N > K".into()));
    }
    let s2 = sigma2_tilde(p, rhat, k)?;
    let ld = log_det_hpd(&p.compress(rhat.matrix.as_matrix()))?;
    Ok(((m - k) as f64 * s2.ln() + ld) / m as f64)
}

/// `((M−K̃)/M) log σ̂²_K̃ + (1/M) log pdet(P R̂ P)`, valid in both regimes and
/// needing only `R̂`.
pub fn uml_cost_pdet(p: &Projectors, rhat: &SampleCovariance, rank_tol: f64) -> Result<f64> {
    let (m, k, n) = (p.m(), p.k(), rhat.snapshots);
    Regime::of(k, n)?;
    let kt = k.min(n);
    let s2 = sigma2_tilde(p, rhat, kt)?;
    let pr = HermitianMatrix::symmetrize(p.p_a.as_matrix() * rhat.matrix.as_matrix() * p.p_a.as_matrix());
    let lpd = log_pseudo_det(&pr, rank_tol)?;
    Ok(((m - kt) as f64 * s2.ln() + lpd) / m as f64)
}

/// Whether the undersampled assumption `α̂_{K−N+1} > σ̂²_N` holds.
pub fn undersampled_assumption_holds(p: &Projectors, rhat: &SampleCovariance) -> Result<bool> {
    let (k, n) = (p.k(), rhat.snapshots);
    if n >= k {
        return Ok(true);
    }
    let s2 = sigma2_tilde(p, rhat, n)?;
    let alpha = herm_eigenvalues(&p.compress(rhat.matrix.as_matrix()))?;
    Ok(alpha[k - n] > s2)
}

#[derive(Clone, Debug)]
pub struct UmlProfile {
    pub m_star: usize,
    pub sigma2_hat: f64,
    pub p_s_hat: HermitianMatrix,
    pub neg_loglik: f64,
}

/// Candidate profile with `m` retained signal eigenvalues (no admissibility check).
pub fn uml_profile_at(p: &Projectors, rhat: &SampleCovariance, m_keep: usize) -> Result<UmlProfile> {
    let (m, k) = (p.m(), p.k());
    if m_keep > k {
        return Err(Error::InvalidInput(format!("cannot keep {m_keep} > K = {k} eigenvalues")));
    }
    let es = herm_eig(&p.compress(rhat.matrix.as_matrix()))?;
    let tr = rhat.matrix.trace();
    let top: Vec<usize> = (k - m_keep..k).rev().collect();
    let kept_sum: f64 = top.iter().map(|&i| es.values[i]).sum();
    let s2 = (tr - kept_sum) / (m - m_keep) as f64;
    let logdet_l: f64 = top.iter().map(|&i| es.values[i].ln()).sum();
    let neg_loglik = (m - m_keep) as f64 * s2.ln() + logdet_l + m as f64;

    // P̂_s = T^{-1} Q (Λ − σ²) Qᴴ T^{-H}
    let mut core = CMat::zeros(k, k);
    for &i in &top {
        let q = es.vectors.column(i);
        core += (&q * q.adjoint()).scale(es.values[i] - s2);
    }
    let tinv = p
        .t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("triangular factor of A is singular".into()))?;
    let ps = &tinv * core * tinv.adjoint();
    Ok(UmlProfile { m_star: m_keep, sigma2_hat: s2, p_s_hat: HermitianMatrix::symmetrize(ps), neg_loglik })
}

const ADMISSIBLE_REL_TOL: f64 = 1e-12;

/// Signal-eigenvalue count `m` is admissible when the `m` largest eigenvalues
/// of `U_Aᴴ R̂ U_A` all exceed `σ̂²_m`.
pub fn admissible_orders(p: &Projectors, rhat: &SampleCovariance) -> Result<Vec<bool>> {
    let (m, k) = (p.m(), p.k());
    let alpha = herm_eigenvalues(&p.compress(rhat.matrix.as_matrix()))?;
    let tr = rhat.matrix.trace();
    let mut ok = vec![true; k + 1];
    let mut kept = 0.0;
    for j in 1..=k {
        kept += alpha[k - j];
        let s2 = (tr - kept) / (m - j) as f64;
        ok[j] = alpha[k - j] > s2 * (1.0 + ADMISSIBLE_REL_TOL);
    }
    Ok(ok)
}

/// Exact UML profile: the largest admissible `m`, then `σ̂²_m`, `P̂_s` and the
/// minimized negative log-likelihood.
pub fn uml_exact_profile(p: &Projectors, rhat: &SampleCovariance) -> Result<UmlProfile> {
    let ok = admissible_orders(p, rhat)?;
    let m_star = (0..ok.len()).rev().find(|&j| ok[j]).unwrap_or(0);
    uml_profile_at(p, rhat, m_star)
}

/// `log det R(P_s, σ²) + tr(R^{-1} R̂)` with `R = A P_s Aᴴ + σ² I`.
pub fn uml_neg_loglik(a: &CMat, p_s: &HermitianMatrix, sigma2: f64, rhat: &SampleCovariance) -> Result<f64> {
    let m = a.nrows();
    let r = a * p_s.as_matrix() * a.adjoint() + CMat::identity(m, m).scale(sigma2);
    let rh = HermitianMatrix::symmetrize(r);
    let ld = log_det_hpd(&rh)?;
    let rinv = rh
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("model covariance not invertible".into()))?;
    Ok(ld + trace_product_re(&rinv, rhat.matrix.as_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use crate::array_model::{complex_gaussian, sample_covariance, Manifold};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complex_identity(m: usize) -> CMat {
        CMat::from_diagonal_element(m, m, C64::new(1.0, 0.0))
    }

    fn rhat_identity(m: usize, n: usize) -> SampleCovariance {
        SampleCovariance { matrix: HermitianMatrix::identity(m), snapshots: n }
    }

    fn random_a(m: usize, k: usize, rng: &mut ChaCha8Rng) -> CMat {
        let man = Manifold::ula(m, 0.25).unwrap();
        let mut th: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        th.sort_by(f64::total_cmp);
        for i in 1..k {
            if th[i] < th[i - 1] + 0.1 {
                th[i] = th[i - 1] + 0.1;
            }
        }
        man.steering_columns(&th)
    }

    #[test]
    fn projector_examples() {
        let mut a = CMat::zeros(5, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(1.0, 0.0);
        let p = projectors(&a).unwrap();
        let expect = crate::numerics::linalg::real_diag(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((p.p_a.as_matrix() - expect).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_a(8, 3, &mut rng);
        let t = complex_gaussian(3, 3, &mut rng);
        let p1 = projectors(&a).unwrap();
        let p2 = projectors(&(&a * t)).unwrap();
        assert!((p1.p_a.as_matrix() - p2.p_a.as_matrix()).norm() < 1e-10);
        assert!((p1.p_a.trace() - 3.0).abs() < 1e-10 && (p1.p_perp.trace() - 5.0).abs() < 1e-10);
        let pa = (p1.p_a.as_matrix() * &a - &a).norm();
        assert!(pa < 1e-10);
        let uu = p1.u_a.adjoint() * &p1.u_a - CMat::identity(3, 3);
        assert!(uu.norm() < 1e-10);
        // U T reproduces A
        assert!((&p1.u_a * &p1.t - &a).norm() < 1e-10);
    }

    #[test]
    fn degenerate_manifold_rejected() {
        let man = Manifold::ula(6, 0.25).unwrap();
        let a = man.steering_columns(&[0.3, 0.3]);
        assert!(matches!(projectors(&a), Err(Error::ManifoldDegenerate { .. })));
    }

    #[test]
    fn cml_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_a(7, 2, &mut rng);
        let p = projectors(&a).unwrap();
        assert!((cml_cost(&p, &rhat_identity(7, 10)) - 5.0 / 7.0).abs() < 1e-12);
        let noiseless = SampleCovariance { matrix: HermitianMatrix::symmetrize(&a * a.adjoint()), snapshots: 10 };
        assert!(cml_cost(&p, &noiseless).abs() < 1e-10);
        let s = SampleCovariance { matrix: HermitianMatrix::identity(7), snapshots: 10 };
        assert!((sigma2_tilde(&p, &s, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma2_undersampled_divisor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_a(10, 4, &mut rng);
        let p = projectors(&a).unwrap();
        let y = complex_gaussian(10, 3, &mut rng);
        let rhat = sample_covariance(&y);
        let s = sigma2_tilde(&p, &rhat, 3).unwrap();
        assert!((s * 7.0 - cml_cost(&p, &rhat) * 10.0).abs() < 1e-12);
        assert!(sigma2_tilde(&p, &rhat, 10).is_err());
    }

    #[test]
    fn uml_identity_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = projectors(&random_a(6, 2, &mut rng)).unwrap();
        let c = uml_cost(&p, &rhat_identity(6, 10), None).unwrap();
        assert!(c.value.abs() < 1e-12);
        assert_eq!(c.regime, Regime::Oversampled);
        assert!(matches!(uml_cost(&p, &rhat_identity(6, 2), None), Err(Error::BoundaryRegime(2))));
        assert!(uml_cost(&p, &rhat_identity(6, 1), None).is_err());
    }

    #[test]
    fn uml_dual_forms_and_pseudo_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = projectors(&random_a(9, 3, &mut rng)).unwrap();
            let y = complex_gaussian(9, 12, &mut rng);
            let rhat = sample_covariance(&y);
            let a = uml_cost(&p, &rhat, Some(&y)).unwrap().value;
            let b = uml_cost_eigen_form(&p, &rhat).unwrap();
            let c = uml_cost_pdet(&p, &rhat, 1e-10).unwrap();
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10);
        }
        for _ in 0..50 {
            let p = projectors(&random_a(9, 4, &mut rng)).unwrap();
            let y = complex_gaussian(9, 2, &mut rng);
            let rhat = sample_covariance(&y);
            let c = uml_cost(&p, &rhat, Some(&y)).unwrap();
            assert_eq!(c.regime, Regime::Undersampled);
            let d = uml_cost_pdet(&p, &rhat, 1e-10).unwrap();
            assert!((c.value - d).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_noise_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = projectors(&random_a(6, 2, &mut rng)).unwrap();
        let s = SampleCovariance { matrix: HermitianMatrix::symmetrize(CMat::identity(6, 6).scale(2.5)), snapshots: 20 };
        let prof = uml_exact_profile(&p, &s).unwrap();
        assert_eq!(prof.m_star, 0);
        assert!((prof.sigma2_hat - 2.5).abs() < 1e-12);
        assert!(prof.p_s_hat.as_matrix().norm() < 1e-12);
    }

    #[test]
    fn profile_recovers_strong_source() {
        let man = Manifold::ula(8, 0.25).unwrap();
        let a = man.steering_columns(&[0.7]);
        let p = projectors(&a).unwrap();
        let mut prev = f64::INFINITY;
        for snr in [1.0, 10.0, 100.0, 1000.0] {
            let r = &a * a.adjoint().scale(snr) + CMat::identity(8, 8);
            let s = SampleCovariance { matrix: HermitianMatrix::symmetrize(r), snapshots: 50 };
            let prof = uml_exact_profile(&p, &s).unwrap();
            assert_eq!(prof.m_star, 1);
            let rel = (prof.p_s_hat.as_matrix()[(0, 0)].re - snr).abs() / snr;
            assert!(rel <= prev + 1e-12);
            prev = rel;
            assert!((prof.sigma2_hat - 1.0).abs() < 1e-10);
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn profile_is_optimal_over_admissible_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=4 {
            for _ in 0..25 {
                let a = random_a(8, k, &mut rng);
                let p = projectors(&a).unwrap();
                let src = complex_gaussian(8, 20, &mut rng);
                let ps = &a * complex_gaussian(k, 20, &mut rng).scale(rng.random_range(0.1..3.0));
                let y = ps + src;
                let rhat = sample_covariance(&y);
                let best = uml_exact_profile(&p, &rhat).unwrap();
                let ok = admissible_orders(&p, &rhat).unwrap();
                for j in 0..=k {
                    if ok[j] {
                        let alt = uml_profile_at(&p, &rhat, j).unwrap();
                        assert!(best.neg_loglik <= alt.neg_loglik + 1e-10);
                    }
                }
                // the closed form equals the likelihood evaluated at the profile
                let direct = uml_neg_loglik(&a, &best.p_s_hat, best.sigma2_hat, &rhat).unwrap();
                assert!((direct - best.neg_loglik).abs() < 1e-8 * direct.abs().max(1.0));
                let ev = herm_eigenvalues(&best.p_s_hat).unwrap();
                assert!(ev[0] > -1e-9 * ev[k - 1].abs().max(1.0));
            }
        }
    }

    #[test]
    fn admissibility_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = rng.random_range(1..=4);
            let a = random_a(9, k, &mut rng);
            let p = projectors(&a).unwrap();
            let y = &a * complex_gaussian(k, 15, &mut rng).scale(rng.random_range(0.0..2.0))
                + complex_gaussian(9, 15, &mut rng);
            let ok = admissible_orders(&p, &sample_covariance(&y)).unwrap();
            for j in 1..=k {
                if ok[j] {
                    assert!(ok[..j].iter().all(|&b| b));
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn parameterization_invariance(seed in 0u64..10_000, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_a(8, k, &mut rng);
            let t = complex_gaussian(k, k, &mut rng) + complex_identity(k);
            let y = complex_gaussian(8, 12, &mut rng);
            let rhat = sample_covariance(&y);
            let (p1, p2) = (projectors(&a).unwrap(), projectors(&(&a * t)).unwrap());
            prop_assert!((cml_cost(&p1, &rhat) - cml_cost(&p2, &rhat)).abs() < 1e-10);
            let u1 = uml_cost(&p1, &rhat, Some(&y)).unwrap().value;
            let u2 = uml_cost(&p2, &rhat, Some(&y)).unwrap().value;
            prop_assert!((u1 - u2).abs() < 1e-10);
            let f1 = uml_exact_profile(&p1, &rhat).unwrap();
            let f2 = uml_exact_profile(&p2, &rhat).unwrap();
            prop_assert!((f1.neg_loglik - f2.neg_loglik).abs() < 1e-10);
        }

        #[test]
        fn cml_nonnegative(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_a(7, 2, &mut rng);
            let p = projectors(&a).unwrap();
            let y = complex_gaussian(7, 5, &mut rng);
            prop_assert!(cml_cost(&p, &sample_covariance(&y)) >= 0.0);
            let inrange = &a * complex_gaussian(2, 5, &mut rng);
            prop_assert!(cml_cost(&p, &sample_covariance(&inrange)).abs() < 1e-12);
        }
    }
}
