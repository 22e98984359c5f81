//! Uniform linear array manifolds, scenarios and Gaussian snapshot generation.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::{herm_eigenvalues, psd_sqrt, HermitianMatrix};
use crate::{CMat, Error, Result, C64};

/// Minimum angular separation used for the feasibility set, in electrical radians.
pub const DEFAULT_EPS: f64 = 0.0262;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    UniformLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    pub kind: ArrayKind,
    pub elements: usize,
    pub spacing_wavelengths: f64,
}

impl Manifold {
    pub fn ula(elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if elements < 2 {
            return Err(Error::InvalidInput(format!("array needs at least 2 elements, got {elements}")));
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid element spacing {spacing_wavelengths}")));
        }
        Ok(Self { kind: ArrayKind::UniformLinear, elements, spacing_wavelengths })
    }

    pub fn m(&self) -> usize {
        self.elements
    }

    /// Steering vector with entries `exp(j·2d·m·θ)`, element 0 as phase reference.
    pub fn steering_vector(&self, theta: f64) -> DVector<C64> {
        let ph = 2.0 * self.spacing_wavelengths * theta;
        DVector::from_fn(self.elements, |m, _| C64::from_polar(1.0, ph * m as f64))
    }

    /// Steering matrix for arbitrary angles (no feasibility check).
    pub fn steering_columns(&self, angles: &[f64]) -> CMat {
        let mut a = CMat::zeros(self.elements, angles.len());
        for (k, &t) in angles.iter().enumerate() {
            let ph = 2.0 * self.spacing_wavelengths * t;
            for m in 0..self.elements {
                a[(m, k)] = C64::from_polar(1.0, ph * m as f64);
            }
        }
        a
    }
}

pub fn steering_matrix(man: &Manifold, theta: &ThetaPoint) -> CMat {
    man.steering_columns(theta.angles())
}

/// Electrical angle `π sin β` from a physical angle in degrees.
pub fn electrical_from_degrees(deg: f64) -> f64 {
    PI * deg.to_radians().sin()
}

pub fn degrees_from_electrical(theta: f64) -> f64 {
    (theta / PI).asin().to_degrees()
}

/// Ordered K-vector of electrical angles inside the feasibility set
/// `θ₁ ≥ −π+ε, θ_k ≥ θ_{k−1}+ε, θ_K ≤ π−ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    angles: Vec<f64>,
    eps: f64,
}

const FEAS_SLACK: f64 = 1e-12;

impl ThetaPoint {
    pub fn new(angles: Vec<f64>, eps: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidInput("theta point needs at least one angle".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("spacing eps must be positive, got {eps}")));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("non-finite angle".into()));
        }
        let k = angles.len();
        if angles[0] < -PI + eps - FEAS_SLACK || angles[k - 1] > PI - eps + FEAS_SLACK {
            return Err(Error::Infeasible(format!("angles {angles:?} leave [-pi+eps, pi-eps]")));
        }
        if angles.windows(2).any(|w| w[1] < w[0] + eps - FEAS_SLACK) {
            return Err(Error::Infeasible(format!("angles {angles:?} violate the minimum spacing {eps}")));
        }
        Ok(Self { angles, eps })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn k(&self) -> usize {
        self.angles.len()
    }

    /// Chebyshev (per-coordinate max) distance.
    pub fn max_distance(&self, other: &ThetaPoint) -> f64 {
        max_metric(&self.angles, &other.angles)
    }
}

pub fn max_metric(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Oversampled,
    Undersampled,
}

impl Regime {
    /// Oversampled iff N > K; N = K is rejected.
    pub fn of(k: usize, n: usize) -> Result<Self> {
        match n.cmp(&k) {
            std::cmp::Ordering::Greater => Ok(Regime::Oversampled),
            std::cmp::Ordering::Less => Ok(Regime::Undersampled),
            std::cmp::Ordering::Equal => Err(Error::BoundaryRegime(k)),
        }
    }
}

/// Source covariance from powers and pairwise correlation coefficients
/// `(i, j, ρ)`, giving `P_ij = ρ·sqrt(p_i p_j)`.
pub fn source_covariance(powers: &[f64], correlations: &[(usize, usize, f64)]) -> Result<HermitianMatrix> {
    let k = powers.len();
    if powers.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput(format!("source powers must be nonnegative, got {powers:?}")));
    }
    let mut p = CMat::zeros(k, k);
    for i in 0..k {
        p[(i, i)] = C64::new(powers[i], 0.0);
    }
    for &(i, j, rho) in correlations {
        if i >= k || j >= k || i == j || rho.abs() > 1.0 {
            return Err(Error::InvalidInput(format!("invalid correlation ({i}, {j}, {rho})")));
        }
        let v = rho * (powers[i] * powers[j]).sqrt();
        p[(i, j)] = C64::new(v, 0.0);
        p[(j, i)] = C64::new(v, 0.0);
    }
    let h = HermitianMatrix::new(p)?;
    check_psd(&h)?;
    Ok(h)
}

fn check_psd(h: &HermitianMatrix) -> Result<()> {
    let vals = herm_eigenvalues(h)?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lmin) = vals.first() {
        if lmin < -1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd { min_eig: lmin, scale });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub manifold: Manifold,
    pub true_theta: ThetaPoint,
    pub source_cov: HermitianMatrix,
    pub noise_power: f64,
    pub snapshots: usize,
}

impl Scenario {
    pub fn new(
        manifold: Manifold,
        true_theta: ThetaPoint,
        source_cov: HermitianMatrix,
        noise_power: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let k = true_theta.k();
        if source_cov.dim() != k {
            return Err(Error::InvalidInput(format!(
                "source covariance is {0}x{0} but there are {k} sources",
                source_cov.dim()
            )));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {noise_power}")));
        }
        if snapshots == 0 {
            return Err(Error::InvalidInput("snapshot count must be positive".into()));
        }
        if k >= manifold.m() {
            return Err(Error::InvalidInput(format!("need K < M, got K={k}, M={}", manifold.m())));
        }
        check_psd(&source_cov)?;
        let a = steering_matrix(&manifold, &true_theta);
        let gram = HermitianMatrix::symmetrize(a.adjoint() * &a);
        let min_eig = herm_eigenvalues(&gram)?[0];
        if min_eig <= 1e-8 * manifold.m() as f64 {
            return Err(Error::ManifoldDegenerate { theta: true_theta.angles().to_vec(), min_eig });
        }
        Ok(Self { manifold, true_theta, source_cov, noise_power, snapshots })
    }

    pub fn m(&self) -> usize {
        self.manifold.m()
    }

    pub fn k(&self) -> usize {
        self.true_theta.k()
    }

    pub fn n(&self) -> usize {
        self.snapshots
    }

    pub fn regime(&self) -> Result<Regime> {
        Regime::of(self.k(), self.n())
    }

    pub fn covariance(&self) -> HermitianMatrix {
        let a = steering_matrix(&self.manifold, &self.true_theta);
        let mut r = &a * self.source_cov.as_matrix() * a.adjoint();
        for i in 0..self.m() {
            r[(i, i)] += self.noise_power;
        }
        HermitianMatrix::symmetrize(r)
    }

    pub fn with_snapshots(&self, n: usize) -> Result<Self> {
        Self::new(self.manifold.clone(), self.true_theta.clone(), self.source_cov.clone(), self.noise_power, n)
    }
}

/// `R = A P_s Aᴴ + σ² I`, validated positive definite.
pub fn build_covariance(sc: &Scenario) -> Result<HermitianMatrix> {
    check_psd(&sc.source_cov)?;
    let r = sc.covariance();
    let lmin = herm_eigenvalues(&r)?[0];
    if lmin < sc.noise_power * (1.0 - 1e-10) {
        return Err(Error::Numerical(format!("covariance eigenvalue {lmin:e} below noise floor")));
    }
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct SampleCovariance {
    pub matrix: HermitianMatrix,
    pub snapshots: usize,
}

pub fn sample_covariance(y: &CMat) -> SampleCovariance {
    let n = y.ncols();
    let g = y * y.adjoint();
    let matrix = HermitianMatrix::symmetrize(g.unscale(n.max(1) as f64));
    SampleCovariance { matrix, snapshots: n }
}

/// I.i.d. unit-variance circular complex Gaussian matrix.
pub fn complex_gaussian<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Draws snapshots `Y = R^{1/2} X` for a precomputed square root.
#[derive(Clone, Debug)]
pub struct SnapshotSampler {
    r_sqrt: CMat,
    snapshots: usize,
}

impl SnapshotSampler {
    pub fn new(r: &HermitianMatrix, snapshots: usize) -> Result<Self> {
        Ok(Self { r_sqrt: psd_sqrt(r)?, snapshots })
    }

    pub fn draw<R: rand::Rng>(&self, rng: &mut R) -> CMat {
        let x = complex_gaussian(self.r_sqrt.nrows(), self.snapshots, rng);
        &self.r_sqrt * x
    }
}

pub fn generate_snapshots(sc: &Scenario, seed: u64) -> Result<CMat> {
    let sampler = SnapshotSampler::new(&sc.covariance(), sc.snapshots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.draw(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::herm_eig;
    use proptest::prelude::*;

    fn four_source_scenario(n: usize) -> Scenario {
        let angles: Vec<f64> = [-50.0, 16.0, 18.0, 60.0].iter().map(|&d| electrical_from_degrees(d)).collect();
        Scenario::new(
            Manifold::ula(10, 0.25).unwrap(),
            ThetaPoint::new(angles, DEFAULT_EPS).unwrap(),
            HermitianMatrix::identity(4),
            1.0,
            n,
        )
        .unwrap()
    }

    #[test]
    fn steering_examples() {
        let man = Manifold::ula(4, 0.25).unwrap();
        let v = man.steering_vector(0.0);
        assert!(v.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let man2 = Manifold::ula(2, 0.25).unwrap();
        let v = man2.steering_vector(PI);
        assert!((v[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
        let sc = four_source_scenario(10);
        let a = steering_matrix(&sc.manifold, &sc.true_theta);
        let gram = HermitianMatrix::symmetrize(a.adjoint() * &a);
        assert!(herm_eigenvalues(&gram).unwrap()[0] > 0.0);
        assert!(a.row(0).iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn covariance_examples() {
        let man = Manifold::ula(6, 0.25).unwrap();
        let th = ThetaPoint::new(vec![0.4], DEFAULT_EPS).unwrap();
        let sc = Scenario::new(man.clone(), th.clone(), HermitianMatrix::zeros(1), 2.0, 10).unwrap();
        let r = build_covariance(&sc).unwrap();
        assert!((r.as_matrix() - CMat::identity(6, 6).scale(2.0)).norm() < 1e-14);
        let sc = Scenario::new(man, th, HermitianMatrix::identity(1), 1.0, 10).unwrap();
        let ev = herm_eigenvalues(&build_covariance(&sc).unwrap()).unwrap();
        assert!((ev[5] - 7.0).abs() < 1e-12);
        assert!(ev[..5].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn correlated_pair() {
        let ps = source_covariance(&[2.0, 2.0, 2.0, 2.0], &[(0, 1, 0.95)]).unwrap();
        assert!((ps.as_matrix()[(0, 1)].re - 1.9).abs() < 1e-14);
        let mut sc = four_source_scenario(100);
        sc.source_cov = ps;
        let ev = herm_eigenvalues(&build_covariance(&sc).unwrap()).unwrap();
        assert!(ev[0] > 0.0);
        assert!(source_covariance(&[1.0, 1.0], &[(0, 1, 1.5)]).is_err());
    }

    #[test]
    fn feasibility_and_regime() {
        assert!(ThetaPoint::new(vec![0.0, 0.01], 0.0262).is_err());
        assert!(ThetaPoint::new(vec![-PI + 0.01], 0.0262).is_err());
        assert!(ThetaPoint::new(vec![-1.0, 1.0], 0.0262).is_ok());
        assert_eq!(Regime::of(4, 10).unwrap(), Regime::Oversampled);
        assert_eq!(Regime::of(4, 3).unwrap(), Regime::Undersampled);
        assert!(Regime::of(4, 4).is_err());
    }

    #[test]
    fn white_noise_law_of_large_numbers() {
        let man = Manifold::ula(4, 0.25).unwrap();
        let th = ThetaPoint::new(vec![0.2], DEFAULT_EPS).unwrap();
        let sc = Scenario::new(man, th, HermitianMatrix::zeros(1), 1.0, 100_000).unwrap();
        let y = generate_snapshots(&sc, 17).unwrap();
        let rhat = sample_covariance(&y);
        assert!((rhat.matrix.as_matrix() - CMat::identity(4, 4)).norm() <= 0.05);
        assert_eq!(y, generate_snapshots(&sc, 17).unwrap());
    }

    #[test]
    fn sample_covariance_is_unbiased() {
        let sc = four_source_scenario(20);
        let r = sc.covariance();
        let sampler = SnapshotSampler::new(&r, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<CMat> =
            (0..200).map(|_| sample_covariance(&sampler.draw(&mut rng)).matrix.into_matrix()).collect();
        let m = r.dim();
        for i in 0..m {
            for j in 0..m {
                for part in 0..2 {
                    let get = |z: C64| if part == 0 { z.re } else { z.im };
                    let xs: Vec<f64> = draws.iter().map(|d| get(d[(i, j)])).collect();
                    let mean = xs.iter().sum::<f64>() / 200.0;
                    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
                    let target = get(r.as_matrix()[(i, j)]);
                    assert!((mean - target).abs() <= 3.5 * sd / 200f64.sqrt() + 1e-12, "({i},{j}) part {part}");
                }
            }
        }
    }

    #[test]
    fn sample_covariance_identities() {
        let y = CMat::zeros(3, 5);
        assert_eq!(sample_covariance(&y).matrix.as_matrix(), &CMat::zeros(3, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = complex_gaussian(5, 1, &mut rng);
        let rhat = sample_covariance(&y);
        let ev = herm_eigenvalues(&rhat.matrix).unwrap();
        assert!(ev[..4].iter().all(|v| v.abs() < 1e-12));
        let y = complex_gaussian(6, 9, &mut rng);
        let fro2: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        assert!((sample_covariance(&y).matrix.trace() - fro2 / 9.0).abs() < 1e-12 * fro2);
    }

    #[test]
    fn sampled_covariance_rank() {
        let sc = four_source_scenario(6);
        let sampler = SnapshotSampler::new(&sc.covariance(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let es = herm_eig(&sample_covariance(&sampler.draw(&mut rng)).matrix).unwrap();
            let max = es.values[9];
            assert!(es.values[4] > 1e-10 * max);
            assert!(es.values[3].abs() < 1e-10 * max);
        }
    }

    proptest! {
        #[test]
        fn steering_columns_unit_modulus(theta in -3.0f64..3.0, m in 2usize..40) {
            let man = Manifold::ula(m, 0.25).unwrap();
            let v = man.steering_vector(theta);
            prop_assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
            let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((n2 - m as f64).abs() < 1e-12);
        }

        #[test]
        fn angle_round_trip(beta in -89.9f64..89.9) {
            let t = electrical_from_degrees(beta);
            prop_assert!((degrees_from_electrical(t) - beta).abs() < 1e-10);
            prop_assert!((PI * degrees_from_electrical(t).to_radians().sin() - t).abs() < 1e-12);
        }
    }
}
