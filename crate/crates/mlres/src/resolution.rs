//! Local-minima search on cost surfaces, predicted resolution probability and
//! the two-regime MSE prediction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{max_metric, Manifold, SampleCovariance, Scenario, ThetaPoint};
use crate::asy_cov::{gamma_matrices, GammaMatrices, PointFamily};
use crate::det_equiv::eta_bar_uml_compressed;
use crate::ml_costs::{orthonormal_basis, Method};
use crate::numerics::{herm_eigenvalues, mvn_orthant, GaussianSpec, HermitianMatrix};
use crate::{CMat, Error, RMat, Result, C64};

/// Euclidean projection onto the feasibility set.
///
/// With `u_k = θ_k − kε` the set becomes `{u nondecreasing, −π ≤ u ≤ π − (K+1)ε}`;
/// isotonic regression followed by clipping is the projection onto it.
pub fn project_feasible(raw: &[f64], eps: f64) -> Result<ThetaPoint> {
    let k = raw.len();
    if k == 0 || raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("cannot project {raw:?}")));
    }
    let (lo, hi) = (-PI, PI - (k as f64 + 1.0) * eps);
    if !(eps > 0.0) || lo > hi {
        return Err(Error::Infeasible(format!("no feasible point for K={k}, eps={eps}")));
    }
    let u: Vec<f64> = raw.iter().enumerate().map(|(i, v)| v - (i as f64 + 1.0) * eps).collect();
    let iso = isotonic(&u);
    let angles = iso.iter().enumerate().map(|(i, v)| v.clamp(lo, hi) + (i as f64 + 1.0) * eps).collect();
    ThetaPoint::new(angles, eps)
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

/// A scalar cost over ordered K-vectors of electrical angles.
pub trait CostSurface: Sync {
    fn k(&self) -> usize;
    fn eval(&self, theta: &[f64]) -> Result<f64>;
}

/// `Uᴴ X U` and `tr(P⊥ X)` at `theta`.
fn compressed(man: &Manifold, x: &HermitianMatrix, trace_x: f64, theta: &[f64]) -> Result<(HermitianMatrix, f64)> {
    let a = man.steering_columns(theta);
    let (u, _) = orthonormal_basis(&a)?;
    let g = HermitianMatrix::symmetrize(u.adjoint() * x.as_matrix() * &u);
    let tp = trace_x - g.trace();
    Ok((g, tp))
}

/// Deterministic-equivalent surface `η̄(θ)`.
#[derive(Clone, Debug)]
pub struct DeterministicSurface {
    pub manifold: Manifold,
    pub r: HermitianMatrix,
    pub n: usize,
    pub k: usize,
    pub method: Method,
    trace_r: f64,
}

impl DeterministicSurface {
    pub fn new(manifold: Manifold, r: HermitianMatrix, n: usize, k: usize, method: Method) -> Self {
        let trace_r = r.trace();
        Self { manifold, r, n, k, method, trace_r }
    }

    pub fn from_scenario(sc: &Scenario, method: Method) -> Self {
        Self::new(sc.manifold.clone(), sc.covariance(), sc.n(), sc.k(), method)
    }
}

impl CostSurface for DeterministicSurface {
    fn k(&self) -> usize {
        self.k
    }

    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let (g, tp) = compressed(&self.manifold, &self.r, self.trace_r, theta)?;
        let m = self.manifold.m();
        match self.method {
            Method::Cml => Ok(tp / m as f64),
            Method::Uml => eta_bar_uml_compressed(&g, self.trace_r, m, self.n),
        }
    }
}

/// Sampled cost `η̂(θ)` from a sample covariance.
#[derive(Clone, Debug)]
pub struct SampleSurface {
    pub manifold: Manifold,
    pub rhat: SampleCovariance,
    pub k: usize,
    pub method: Method,
    trace_r: f64,
}

impl SampleSurface {
    pub fn new(manifold: Manifold, rhat: SampleCovariance, k: usize, method: Method) -> Self {
        let trace_r = rhat.matrix.trace();
        Self { manifold, rhat, k, method, trace_r }
    }
}

/// UML cost from the compressed sample covariance, in the pseudo-determinant form
/// that covers both regimes.
pub fn uml_cost_compressed(g: &HermitianMatrix, tr_perp: f64, m: usize, n: usize) -> Result<f64> {
    let k = g.dim();
    let kt = k.min(n);
    if kt >= m || !(tr_perp > 0.0) {
        return Err(Error::Numerical(format!("degenerate residual power {tr_perp:e}")));
    }
    let eig = herm_eigenvalues(g)?;
    let top = &eig[k - kt..];
    if top[0] <= 0.0 {
        return Err(Error::Singular("compressed sample covariance lost rank".into()));
    }
    let s2 = tr_perp / (m - kt) as f64;
    Ok(((m - kt) as f64 * s2.ln() + top.iter().map(|v| v.ln()).sum::<f64>()) / m as f64)
}

impl CostSurface for SampleSurface {
    fn k(&self) -> usize {
        self.k
    }

    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let (g, tp) = compressed(&self.manifold, &self.rhat.matrix, self.trace_r, theta)?;
        let m = self.manifold.m();
        match self.method {
            Method::Cml => Ok(tp / m as f64),
            Method::Uml => uml_cost_compressed(&g, tp, m, self.rhat.snapshots),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    /// `None` selects the default count for the source number.
    pub n_starts: Option<usize>,
    pub eps: f64,
    pub cluster_threshold: f64,
    pub fd_step: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub initial_step: f64,
    pub polish_steps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_starts: None,
            eps: crate::array_model::DEFAULT_EPS,
            cluster_threshold: 0.6,
            fd_step: 1e-5,
            max_iter: 500,
            tol: 1e-7,
            initial_step: 0.1,
            polish_steps: 50,
        }
    }
}

/// 331 starts for four sources, `⌈331^{K/4}⌉` otherwise.
pub fn default_starts(k: usize) -> usize {
    if k == 4 { 331 } else { 331f64.powf(k as f64 / 4.0).ceil() as usize }
}

const LATTICE_PRIMES: [f64; 12] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0];

/// Low-discrepancy starts spread over the feasible set: a randomly shifted
/// Kronecker sequence mapped to sorted angles and projected.
pub fn start_points(k: usize, eps: f64, count: usize, seed: u64) -> Result<Vec<ThetaPoint>> {
    if k > LATTICE_PRIMES.len() {
        return Err(Error::InvalidInput(format!("at most {} sources supported by the start lattice", LATTICE_PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    (1..=count)
        .map(|i| {
            let mut v: Vec<f64> = (0..k)
                .map(|d| -PI + 2.0 * PI * (i as f64 * LATTICE_PRIMES[d].sqrt().fract() + shift[d]).fract())
                .collect();
            v.sort_by(f64::total_cmp);
            project_feasible(&v, eps)
        })
        .collect()
}

fn gradient<S: CostSurface + ?Sized>(cost: &S, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = cost.eval(&p)?;
        p[i] = x[i] - h;
        let fm = cost.eval(&p)?;
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub theta: ThetaPoint,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Accelerated projected gradient descent with backtracking and restart on
/// objective increase.
pub fn descend<S: CostSurface + ?Sized>(
    cost: &S,
    start: &ThetaPoint,
    cfg: &SearchConfig,
    max_iter: usize,
) -> Result<DescentResult> {
    let eps = cfg.eps;
    let mut x = start.clone();
    let mut fx = cost.eval(x.angles())?;
    let mut y = x.angles().to_vec();
    let mut t = 1.0f64;
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let fy = cost.eval(&y)?;
        let g = gradient(cost, &y, cfg.fd_step)?;
        let (z, fz, diff) = loop {
            let cand: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let z = project_feasible(&cand, eps)?;
            let d: Vec<f64> = z.angles().iter().zip(&y).map(|(a, b)| a - b).collect();
            let fz = cost.eval(z.angles())?;
            let lin: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let sq: f64 = d.iter().map(|v| v * v).sum();
            if fz <= fy + lin + sq / (2.0 * step) + 1e-15 * fy.abs() || step < 1e-14 {
                break (z, fz, sq.sqrt());
            }
            step *= 0.5;
        };
        if diff / step <= cfg.tol {
            if fz <= fx {
                x = z;
                fx = fz;
            }
            converged = true;
            break;
        }
        if fz > fx {
            // momentum restart from the last accepted iterate
            t = 1.0;
            y = x.angles().to_vec();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z.angles().iter().zip(x.angles()).map(|(a, b)| a + beta * (a - b)).collect();
        y = project_feasible(&y, eps)?.angles().to_vec();
        x = z;
        fx = fz;
        t = t_next;
        step = (step * 1.5).min(10.0 * cfg.initial_step);
    }
    Ok(DescentResult { theta: x, cost: fx, iterations: it, converged })
}

/// Single-linkage clusters (max-metric) cut at `threshold`, as member index lists.
pub fn cluster_indices(points: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if max_metric(&points[i], &points[j]) < threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_to_group[r] == usize::MAX {
            root_to_group[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_to_group[r]].push(i);
    }
    groups
}

/// Cluster centroids.
pub fn cluster_minima(points: &[Vec<f64>], threshold: f64) -> Vec<Vec<f64>> {
    cluster_indices(points, threshold)
        .into_iter()
        .map(|g| {
            let k = points[g[0]].len();
            (0..k).map(|d| g.iter().map(|&i| points[i][d]).sum::<f64>() / g.len() as f64).collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchMetadata {
    pub starts: usize,
    pub converged_starts: usize,
    pub failed_starts: usize,
    pub clusters: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalMinimaSet {
    pub minima: Vec<(ThetaPoint, f64)>,
    pub method: Option<Method>,
    pub global_index: usize,
    pub metadata: SearchMetadata,
}

impl LocalMinimaSet {
    pub fn global(&self) -> &(ThetaPoint, f64) {
        &self.minima[self.global_index]
    }
}

/// Descends from each start, clusters the end points, polishes centroids and
/// merges again.
pub fn find_local_minima_from<S: CostSurface + ?Sized>(
    cost: &S,
    starts: &[ThetaPoint],
    cfg: &SearchConfig,
) -> Result<LocalMinimaSet> {
    let runs: Vec<Result<DescentResult>> = starts.par_iter().map(|s| descend(cost, s, cfg, cfg.max_iter)).collect();
    let ok: Vec<DescentResult> = runs.into_iter().filter_map(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::NoConvergedStarts);
    }
    let converged_starts = ok.iter().filter(|r| r.converged).count();
    let ends: Vec<Vec<f64>> = ok.iter().map(|r| r.theta.angles().to_vec()).collect();
    let centroids = cluster_minima(&ends, cfg.cluster_threshold);
    let clusters = centroids.len();
    let polished: Vec<DescentResult> = centroids
        .par_iter()
        .map(|c| descend(cost, &project_feasible(c, cfg.eps)?, cfg, cfg.polish_steps))
        .collect::<Result<_>>()?;
    let pts: Vec<Vec<f64>> = polished.iter().map(|r| r.theta.angles().to_vec()).collect();
    let mut minima: Vec<(ThetaPoint, f64)> = cluster_indices(&pts, cfg.cluster_threshold)
        .into_iter()
        .map(|g| {
            let best = g.into_iter().min_by(|&a, &b| polished[a].cost.total_cmp(&polished[b].cost)).unwrap();
            (polished[best].theta.clone(), polished[best].cost)
        })
        .collect();
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(LocalMinimaSet {
        minima,
        method: None,
        global_index: 0,
        metadata: SearchMetadata { starts: starts.len(), converged_starts, failed_starts: starts.len() - ok.len(), clusters },
    })
}

pub fn find_local_minima<S: CostSurface + ?Sized>(cost: &S, cfg: &SearchConfig, seed: u64) -> Result<LocalMinimaSet> {
    let k = cost.k();
    let count = cfg.n_starts.unwrap_or_else(|| default_starts(k));
    let starts = start_points(k, cfg.eps, count, seed)?;
    find_local_minima_from(cost, &starts, cfg)
}

/// Minima other than the one representing `truth` (the nearest within the
/// cluster threshold).
pub fn competing_minima(set: &LocalMinimaSet, truth: &ThetaPoint, threshold: f64) -> Vec<ThetaPoint> {
    let near = set
        .minima
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (i, truth.max_distance(t)))
        .filter(|(_, d)| *d < threshold)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    set.minima
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != near)
        .map(|(_, (t, _))| t.clone())
        .collect()
}

/// `P[η̂(θ_ℓ) > η̂(θ₀) ∀ℓ ≥ 1]` under `η̂ ~ N(η̄, Γ/M²)`; `(1, 0)` without competitors.
pub fn predict_resolution(eta_bar: &[f64], gamma: &RMat, m: usize, qmc_budget: usize, seed: u64) -> Result<(f64, f64)> {
    let n = eta_bar.len();
    if gamma.nrows() != n || gamma.ncols() != n || n == 0 {
        return Err(Error::InvalidInput(format!("gamma is {}x{} for {n} cost values", gamma.nrows(), gamma.ncols())));
    }
    let l = n - 1;
    if l == 0 {
        return Ok((1.0, 0.0));
    }
    let d = DMatrix::from_fn(l, n, |i, j| {
        if j == 0 {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mean = DVector::from_fn(l, |i, _| eta_bar[i + 1] - eta_bar[0]);
    let cov = (&d * gamma * d.transpose()).scale(1.0 / (m * m) as f64);
    let cov = (&cov + cov.transpose()).scale(0.5);
    mvn_orthant(&GaussianSpec::new(mean, cov)?, qmc_budget, seed)
}

/// `(2π)²[K/(6(K+1)) + Σ_m (m/(K+1) − (π+θ̄_m)/(2π))²]`: expected total squared
/// error of a uniformly drawn ordered point.
pub fn mse_large(truth: &ThetaPoint) -> f64 {
    let k = truth.k() as f64;
    let s: f64 = truth
        .angles()
        .iter()
        .enumerate()
        .map(|(i, t)| ((i as f64 + 1.0) / (k + 1.0) - (PI + t) / (2.0 * PI)).powi(2))
        .sum();
    4.0 * PI * PI * (k / (6.0 * (k + 1.0)) + s)
}

pub fn predict_mse(p_res: f64, mse_small: f64, mse_lg: f64) -> f64 {
    p_res * mse_small + (1.0 - p_res) * mse_lg
}

/// Stochastic Cramér-Rao bound on the electrical angles,
/// `(σ²/2N) {Re[(Dᴴ P⊥ D) ⊙ (P_s Aᴴ R⁻¹ A P_s)ᵀ]}⁻¹`.
pub fn stochastic_crb(sc: &Scenario) -> Result<RMat> {
    let man = &sc.manifold;
    let theta = sc.true_theta.angles();
    let a = man.steering_columns(theta);
    let (m, k) = (man.m(), theta.len());
    let scale = 2.0 * man.spacing_wavelengths;
    let d = CMat::from_fn(m, k, |i, j| a[(i, j)] * C64::new(0.0, scale * i as f64));
    let r = sc.covariance();
    let rinv = r
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("R is not positive definite".into()))?
        .inverse();
    let (u, _) = orthonormal_basis(&a)?;
    let perp = CMat::identity(m, m) - &u * u.adjoint();
    let h = d.adjoint() * perp * &d;
    let ps = sc.source_cov.as_matrix();
    let s = ps * a.adjoint() * rinv * &a * ps;
    let f = RMat::from_fn(k, k, |i, j| (h[(i, j)] * s[(j, i)]).re);
    let f = (&f + f.transpose()).scale(0.5);
    let inv = f.try_inverse().ok_or_else(|| Error::Singular("CRB information matrix is singular".into()))?;
    Ok(inv.scale(sc.noise_power / (2.0 * sc.n() as f64)))
}

/// Trace of the stochastic CRB, the default small-error MSE.
pub fn crb_total(sc: &Scenario) -> Result<f64> {
    Ok(stochastic_crb(sc)?.trace())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub method: Method,
    pub p_res_predicted: f64,
    pub qmc_error: f64,
    pub l_minima: usize,
    pub p_res_empirical: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub mse_predicted: Option<f64>,
    pub mse_empirical: Option<f64>,
}

/// Everything a prediction needs for one scenario and method.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub method: Method,
    pub minima: LocalMinimaSet,
    pub family: PointFamily,
    pub eta_bar: Vec<f64>,
    pub gamma: GammaMatrices,
    pub p_res: f64,
    pub qmc_error: f64,
}

/// Minima search on `η̄`, family assembly with `θ̄` first, `Γ` and the
/// orthant probability.
pub fn predict_scenario(
    sc: &Scenario,
    method: Method,
    cfg: &SearchConfig,
    qmc_budget: usize,
    seed: u64,
) -> Result<Prediction> {
    let surface = DeterministicSurface::from_scenario(sc, method);
    let mut minima = find_local_minima(&surface, cfg, seed)?;
    minima.method = Some(method);
    let others = competing_minima(&minima, &sc.true_theta, cfg.cluster_threshold);
    let family = PointFamily::from_scenario(sc, &others)?;
    let eta_bar = family.eta_bar(method)?;
    let gamma = gamma_matrices(&family)?;
    let (p_res, qmc_error) = predict_resolution(&eta_bar, gamma.for_method(method), sc.m(), qmc_budget, seed)?;
    Ok(Prediction { method, minima, family, eta_bar, gamma, p_res, qmc_error })
}
