use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::{Error, Result};

const SHIFTS: usize = 8;
const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_ppf(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gaussian law with mean vector and PSD covariance.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let l = mean.len();
        if covariance.nrows() != l || covariance.ncols() != l {
            return Err(Error::InvalidInput(format!(
                "covariance is {}x{} but mean has length {l}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite Gaussian parameters".into()));
        }
        let scale = covariance.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!("covariance asymmetric by {asym:e}")));
        }
        let sym = (&covariance + covariance.transpose()).scale(0.5);
        let trace = sym.trace();
        let eigs = super::linalg::sym_eigenvalues(&sym);
        if eigs.first().is_some_and(|&e| e < -1e-10 * trace.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::NotPsd { min_eig: eigs[0], scale: trace });
        }
        Ok(Self { mean, covariance: sym })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Variable-reordered Cholesky factor for the Genz transform.
struct GenzFactor {
    upper: Vec<f64>,
    chol: DMatrix<f64>,
    rank: usize,
}

fn genz_factor(b: &DVector<f64>, sigma: &DMatrix<f64>) -> GenzFactor {
    let l = b.len();
    let mut cov = sigma.clone();
    let mut upper: Vec<f64> = b.iter().copied().collect();
    let mut chol = DMatrix::<f64>::zeros(l, l);
    let mut ybar = vec![0.0; l];
    let tol = 1e-12 * cov.trace().abs().max(f64::MIN_POSITIVE);
    let mut rank = l;
    for i in 0..l {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in i..l {
            let s2 = cov[(j, j)] - (0..i).map(|k| chol[(j, k)].powi(2)).sum::<f64>();
            if s2 <= tol {
                continue;
            }
            let s = s2.sqrt();
            let t = (upper[j] - (0..i).map(|k| chol[(j, k)] * ybar[k]).sum::<f64>()) / s;
            let p = norm_cdf(t);
            if best.is_none_or(|(_, bp, _)| p < bp) {
                best = Some((j, p, s));
            }
        }
        let Some((j, _, s)) = best else {
            rank = i;
            break;
        };
        if j != i {
            upper.swap(i, j);
            cov.swap_rows(i, j);
            cov.swap_columns(i, j);
            chol.swap_rows(i, j);
        }
        chol[(i, i)] = s;
        for r in i + 1..l {
            let v = cov[(r, i)] - (0..i).map(|k| chol[(r, k)] * chol[(i, k)]).sum::<f64>();
            chol[(r, i)] = v / s;
        }
        let t = (upper[i] - (0..i).map(|k| chol[(i, k)] * ybar[k]).sum::<f64>()) / s;
        let pt = norm_cdf(t);
        ybar[i] = if pt > 1e-300 { -norm_pdf(t) / pt } else { t };
    }
    GenzFactor { upper, chol, rank }
}

impl GenzFactor {
    fn sample_dims(&self) -> usize {
        let l = self.upper.len();
        if self.rank < l { self.rank } else { self.rank.saturating_sub(1) }
    }

    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let l = self.upper.len();
        let mut f = 1.0;
        for i in 0..self.rank {
            let shift: f64 = (0..i).map(|k| self.chol[(i, k)] * y[k]).sum();
            let e = norm_cdf((self.upper[i] - shift) / self.chol[(i, i)]);
            f *= e;
            if f == 0.0 {
                return 0.0;
            }
            if i < w.len() {
                let u = (w[i] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                y[i] = norm_ppf(u);
            }
        }
        for r in self.rank..l {
            let v: f64 = (0..self.rank).map(|k| self.chol[(r, k)] * y[k]).sum();
            if v > self.upper[r] {
                return 0.0;
            }
        }
        f
    }
}

/// Orthant probability `P[X > 0]` for `X ~ N(mean, cov)`.
///
/// Genz sequential conditioning over a randomly shifted Kronecker lattice
/// (√prime generators, baker's transform). The error estimate is the standard
/// error across the 8 independent shifts.
pub fn mvn_orthant(spec: &GaussianSpec, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let l = spec.dim();
    if l == 0 {
        return Ok((1.0, 0.0));
    }
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!("n_samples must be >= 1000, got {n_samples}")));
    }
    // P[X > 0] = P[Z <= mean] with Z = mean − X ~ N(0, cov)
    let fac = genz_factor(&spec.mean, &spec.covariance);
    let dims = fac.sample_dims();
    if dims == 0 {
        let mut y = vec![0.0; l];
        return Ok((fac.integrand(&[], &mut y), 0.0));
    }
    if dims > PRIMES.len() {
        return Err(Error::InvalidInput(format!("dimension {l} exceeds supported lattice dimension")));
    }
    let alpha: Vec<f64> = PRIMES[..dims].iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let per_shift = n_samples.div_ceil(SHIFTS);
    let mut means = [0.0; SHIFTS];
    let mut w = vec![0.0; dims];
    let mut y = vec![0.0; l];
    for (s, mean) in means.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64 + 1);
        let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for k in 1..=per_shift {
            for d in 0..dims {
                let x = (k as f64 * alpha[d] + shift[d]).fract();
                w[d] = 1.0 - (2.0 * x - 1.0).abs();
            }
            acc += fac.integrand(&w, &mut y);
        }
        *mean = acc / per_shift as f64;
    }
    let p = means.iter().sum::<f64>() / SHIFTS as f64;
    let var = means.iter().map(|m| (m - p).powi(2)).sum::<f64>() / (SHIFTS - 1) as f64;
    Ok((p.clamp(0.0, 1.0), (var / SHIFTS as f64).sqrt()))
}
