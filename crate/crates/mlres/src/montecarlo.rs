//! Simulation harness: empirical resolution probability, empirical MSE and
//! CLT moments of the cost vector.
//!
//! Trial `t` draws from a ChaCha8 stream keyed by `(seed, t)`, so results do
//! not depend on the number of worker threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{sample_covariance, Scenario, SnapshotSampler, ThetaPoint};
use crate::asy_cov::PointFamily;
use crate::ml_costs::Method;
use crate::resolution::{descend, start_points, CostSurface, SampleSurface, SearchConfig};
use crate::{Error, RMat, Result};

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug)]
pub struct TrialBatch {
    pub n_trials: usize,
    pub seed: u64,
    pub scenario: Scenario,
    /// Candidate points, index 0 being the true directions.
    pub points: Vec<ThetaPoint>,
}

impl TrialBatch {
    pub fn new(scenario: Scenario, points: Vec<ThetaPoint>, n_trials: usize, seed: u64) -> Result<Self> {
        if n_trials == 0 {
            return Err(Error::InvalidInput("at least one trial is required".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidInput("candidate set is empty".into()));
        }
        Ok(Self { n_trials, seed, scenario, points })
    }

    pub fn from_family(scenario: Scenario, family: &PointFamily, n_trials: usize, seed: u64) -> Result<Self> {
        let points = family.points().iter().map(|p| p.theta.clone()).collect();
        Self::new(scenario, points, n_trials, seed)
    }

    fn surface(&self, sampler: &SnapshotSampler, trial: usize, method: Method) -> SampleSurface {
        let mut rng = trial_rng(self.seed, trial as u64);
        let y = sampler.draw(&mut rng);
        SampleSurface::new(self.scenario.manifold.clone(), sample_covariance(&y), self.scenario.k(), method)
    }

    /// `η̂` at every candidate point, one row per trial.
    pub fn cost_vectors(&self, method: Method) -> Result<Vec<Vec<f64>>> {
        let sampler = SnapshotSampler::new(&self.scenario.covariance(), self.scenario.n())?;
        (0..self.n_trials)
            .into_par_iter()
            .map(|t| {
                let s = self.surface(&sampler, t, method);
                self.points.iter().map(|p| s.eval(p.angles())).collect()
            })
            .collect()
    }
}

/// Wilson score interval at the given normal quantile.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalResolution {
    pub p_hat: f64,
    pub ci: (f64, f64),
    pub successes: usize,
    pub trials: usize,
}

/// Fraction of trials with `η̂(θ_ℓ) > η̂(θ₀)` for every `ℓ ≥ 1` (strict).
pub fn empirical_resolution(batch: &TrialBatch, method: Method) -> Result<EmpiricalResolution> {
    let rows = batch.cost_vectors(method)?;
    let successes = rows.iter().filter(|r| r[1..].iter().all(|&v| v > r[0])).count();
    let n = rows.len();
    Ok(EmpiricalResolution {
        p_hat: successes as f64 / n as f64,
        ci: wilson_interval(successes, n, Z95),
        successes,
        trials: n,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MseSearch {
    pub search: SearchConfig,
    /// Low-discrepancy starts added to the candidate points.
    pub extra_starts: usize,
    pub max_iter: usize,
}

impl Default for MseSearch {
    fn default() -> Self {
        Self { search: SearchConfig::default(), extra_starts: 8, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMse {
    pub mse: f64,
    pub trials_used: usize,
    pub failed: usize,
}

impl EmpiricalMse {
    pub fn fail_fraction(&self) -> f64 {
        self.failed as f64 / (self.failed + self.trials_used).max(1) as f64
    }
}

/// Mean total squared error `‖θ̂ − θ̄‖²` of the sampled-cost minimizer. Each
/// trial descends from the candidate points plus a few lattice starts and keeps
/// the lowest end point; failed trials are excluded and counted.
pub fn empirical_mse(batch: &TrialBatch, method: Method, cfg: &MseSearch) -> Result<EmpiricalMse> {
    let sampler = SnapshotSampler::new(&batch.scenario.covariance(), batch.scenario.n())?;
    let k = batch.scenario.k();
    let truth = batch.scenario.true_theta.angles();
    let mut starts = batch.points.clone();
    if cfg.extra_starts > 0 {
        starts.extend(start_points(k, cfg.search.eps, cfg.extra_starts, batch.seed)?);
    }
    let errs: Vec<Option<f64>> = (0..batch.n_trials)
        .into_par_iter()
        .map(|t| {
            let s = batch.surface(&sampler, t, method);
            let best = starts
                .iter()
                .filter_map(|st| descend(&s, st, &cfg.search, cfg.max_iter).ok())
                .min_by(|a, b| a.cost.total_cmp(&b.cost))?;
            Some(best.theta.angles().iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum())
        })
        .collect();
    let used: Vec<f64> = errs.iter().flatten().copied().collect();
    let failed = errs.len() - used.len();
    if used.is_empty() {
        return Err(Error::NoConvergedStarts);
    }
    Ok(EmpiricalMse { mse: used.iter().sum::<f64>() / used.len() as f64, trials_used: used.len(), failed })
}

#[derive(Clone, Debug)]
pub struct CltStats {
    pub sample_mean: DVector<f64>,
    pub sample_cov: RMat,
    pub skewness: DVector<f64>,
    /// Bootstrap standard errors of the covariance entries.
    pub cov_se: RMat,
    pub n_trials: usize,
}

impl CltStats {
    /// Standard error of each mean coordinate.
    pub fn mean_se(&self) -> DVector<f64> {
        DVector::from_fn(self.sample_mean.len(), |i, _| (self.sample_cov[(i, i)] / self.n_trials as f64).sqrt())
    }
}

fn moments(rows: &[Vec<f64>], idx: &[usize]) -> (DVector<f64>, RMat) {
    let d = rows[0].len();
    let n = idx.len() as f64;
    let mean = DVector::from_fn(d, |j, _| idx.iter().map(|&i| rows[i][j]).sum::<f64>() / n);
    let cov = RMat::from_fn(d, d, |a, b| {
        idx.iter().map(|&i| (rows[i][a] - mean[a]) * (rows[i][b] - mean[b])).sum::<f64>() / (n - 1.0)
    });
    (mean, cov)
}

const BOOTSTRAP: usize = 200;

/// Moments of `M (η̂(θ_ℓ) − η̄(θ_ℓ))` over the trials.
pub fn clt_stats(batch: &TrialBatch, method: Method, eta_bar: &[f64]) -> Result<CltStats> {
    if eta_bar.len() != batch.points.len() {
        return Err(Error::InvalidInput("one deterministic value per candidate point is required".into()));
    }
    if batch.n_trials < 2 {
        return Err(Error::InvalidInput("moments need at least two trials".into()));
    }
    let m = batch.scenario.m() as f64;
    let rows: Vec<Vec<f64>> = batch
        .cost_vectors(method)?
        .into_iter()
        .map(|r| r.iter().zip(eta_bar).map(|(a, b)| m * (a - b)).collect())
        .collect();
    let n = rows.len();
    let all: Vec<usize> = (0..n).collect();
    let (mean, cov) = moments(&rows, &all);
    let d = mean.len();
    let skewness = DVector::from_fn(d, |j, _| {
        let m3 = rows.iter().map(|r| (r[j] - mean[j]).powi(3)).sum::<f64>() / n as f64;
        let m2 = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
        m3 / m2.powf(1.5)
    });
    let mut rng = trial_rng(batch.seed ^ 0x9e37_79b9_7f4a_7c15, u64::MAX);
    let mut acc = RMat::zeros(d, d);
    let mut acc2 = RMat::zeros(d, d);
    for _ in 0..BOOTSTRAP {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let (_, c) = moments(&rows, &idx);
        acc += &c;
        acc2 += c.component_mul(&c);
    }
    let b = BOOTSTRAP as f64;
    let cov_se = RMat::from_fn(d, d, |i, j| {
        let mu = acc[(i, j)] / b;
        ((acc2[(i, j)] / b - mu * mu).max(0.0) * b / (b - 1.0)).sqrt()
    });
    Ok(CltStats { sample_mean: mean, sample_cov: cov, skewness, cov_se, n_trials: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{source_covariance, Manifold};

    fn scenario(noise: f64, n: usize) -> Scenario {
        Scenario::new(
            Manifold::ula(8, 0.25).unwrap(),
            ThetaPoint::new(vec![-0.6, 0.9], 0.0262).unwrap(),
            source_covariance(&[1.0, 1.0], &[]).unwrap(),
            noise,
            n,
        )
        .unwrap()
    }

    #[test]
    fn wilson_examples_and_coverage() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 10, Z95).0, 0.0);
        let p = 0.3;
        let mut covered = 0;
        for rep in 0..1000u64 {
            let mut rng = trial_rng(77, rep);
            let s = (0..200).filter(|_| rng.random::<f64>() < p).count();
            let (lo, hi) = wilson_interval(s, 200, Z95);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 930, "{covered}");
    }

    #[test]
    fn high_snr_always_resolves() {
        let sc = scenario(1e-6, 20);
        let pts = vec![sc.true_theta.clone(), ThetaPoint::new(vec![0.2, 1.8], 0.0262).unwrap()];
        let b = TrialBatch::new(sc, pts, 100, 3).unwrap();
        for m in [Method::Cml, Method::Uml] {
            let r = empirical_resolution(&b, m).unwrap();
            assert_eq!(r.p_hat, 1.0);
            assert!(r.ci.0 <= r.p_hat && r.p_hat <= r.ci.1);
        }
    }

    #[test]
    fn duplicate_candidate_never_resolves() {
        let sc = scenario(1.0, 20);
        let pts = vec![sc.true_theta.clone(), sc.true_theta.clone()];
        let b = TrialBatch::new(sc, pts, 50, 3).unwrap();
        assert_eq!(empirical_resolution(&b, Method::Cml).unwrap().successes, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let sc = scenario(1.0, 10);
        let pts = vec![sc.true_theta.clone(), ThetaPoint::new(vec![-0.3, 1.2], 0.0262).unwrap()];
        let b = TrialBatch::new(sc, pts, 40, 9).unwrap();
        assert_eq!(b.cost_vectors(Method::Uml).unwrap(), b.cost_vectors(Method::Uml).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| b.cost_vectors(Method::Uml).unwrap());
        assert_eq!(serial, b.cost_vectors(Method::Uml).unwrap());
    }

    #[test]
    fn noiseless_mse_is_tiny() {
        let sc = Scenario::new(
            Manifold::ula(8, 0.25).unwrap(),
            ThetaPoint::new(vec![0.4], 0.0262).unwrap(),
            source_covariance(&[1.0], &[]).unwrap(),
            1e-9,
            20,
        )
        .unwrap();
        let pts = vec![sc.true_theta.clone()];
        let b = TrialBatch::new(sc, pts, 10, 1).unwrap();
        let r = empirical_mse(&b, Method::Cml, &MseSearch::default()).unwrap();
        assert!(r.mse < 1e-6, "{}", r.mse);
        assert_eq!(r.failed, 0);
    }
}
