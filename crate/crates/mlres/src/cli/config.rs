//! JSON run configuration and scenario construction.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_model::{electrical_from_degrees, source_covariance, Manifold, Regime, Scenario, ThetaPoint, DEFAULT_EPS};
use crate::ml_costs::Method;
use crate::montecarlo::MseSearch;
use crate::resolution::SearchConfig;

use super::CliError;

pub const DEFAULT_QMC_BUDGET: usize = 40_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnits {
    Degrees,
    Radians,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub elements: usize,
    pub spacing_wavelengths: f64,
}

/// Directions of arrival. `radians` means electrical angles `π sin β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaConfig {
    pub units: AngleUnits,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    pub starts: Option<usize>,
    pub eps: f64,
    pub cluster_threshold: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { starts: None, eps: DEFAULT_EPS, cluster_threshold: 0.6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MseParams {
    pub extra_starts: usize,
    pub max_iter: usize,
}

impl Default for MseParams {
    fn default() -> Self {
        let d = MseSearch::default();
        Self { extra_starts: d.extra_starts, max_iter: d.max_iter }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateParams {
    /// Multiplies every check tolerance.
    pub tolerance_scale: f64,
    pub clt_trials: usize,
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self { tolerance_scale: 1.0, clt_trials: 1000 }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Cml, Method::Uml]
}

fn default_qmc() -> usize {
    DEFAULT_QMC_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub array: ArrayConfig,
    pub doas: DoaConfig,
    /// Relative source powers, scaled by the SNR; all ones when omitted.
    #[serde(default)]
    pub powers: Option<Vec<f64>>,
    /// `(i, j, ρ)` with indices into `doas.values` as written.
    #[serde(default)]
    pub correlations: Vec<(usize, usize, f64)>,
    pub snapshots: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_qmc")]
    pub qmc_budget: usize,
    #[serde(default)]
    pub search: SearchParams,
    /// Overrides the CRB used as the small-error MSE.
    #[serde(default)]
    pub mse_small: Option<f64>,
    #[serde(default)]
    pub mse: MseParams,
    #[serde(default)]
    pub validate: ValidateParams,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn k(&self) -> usize {
        self.doas.values.len()
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        let k = self.k();
        if k == 0 {
            return bad("doas.values", "at least one direction is required".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db", "grid must be nonempty".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) || self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snr_db", format!("grid must be finite and strictly ascending, got {:?}", self.snr_db));
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        if let Some(p) = &self.powers {
            if p.len() != k {
                return bad("powers", format!("{} entries for {k} sources", p.len()));
            }
        }
        if self.snapshots == 0 {
            return bad("snapshots", "must be positive".into());
        }
        if let Err(e) = Regime::of(k, self.snapshots) {
            return bad("snapshots", format!("{e}; the K = N regime is not supported"));
        }
        if self.qmc_budget == 0 {
            return bad("qmc_budget", "must be positive".into());
        }
        if self.search.starts == Some(0) {
            return bad("search.starts", "must be positive".into());
        }
        if !(self.search.cluster_threshold > 0.0) {
            return bad("search.cluster_threshold", "must be positive".into());
        }
        if !(self.validate.tolerance_scale >= 0.0) {
            return bad("validate.tolerance_scale", "must be nonnegative".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be positive".into());
        }
        // builds every scenario once so that bad geometry surfaces as a config error
        for &s in &self.snr_db {
            self.scenario(s)?;
        }
        Ok(())
    }

    /// Electrical angles in ascending order with the permutation that sorts them.
    fn sorted_doas(&self) -> (Vec<f64>, Vec<usize>) {
        let el: Vec<f64> = match self.doas.units {
            AngleUnits::Degrees => self.doas.values.iter().map(|&d| electrical_from_degrees(d)).collect(),
            AngleUnits::Radians => self.doas.values.clone(),
        };
        let mut order: Vec<usize> = (0..el.len()).collect();
        order.sort_by(|&a, &b| el[a].total_cmp(&el[b]));
        (order.iter().map(|&i| el[i]).collect(), order)
    }

    /// Unit noise power and source powers `p_k · 10^{snr/10}`.
    pub fn scenario(&self, snr_db: f64) -> Result<Scenario, CliError> {
        let cfg_err = |e: crate::Error| CliError::Config(e.to_string());
        let (angles, order) = self.sorted_doas();
        let mut rank = vec![0; order.len()];
        for (pos, &orig) in order.iter().enumerate() {
            rank[orig] = pos;
        }
        let base = self.powers.clone().unwrap_or_else(|| vec![1.0; self.k()]);
        let scale = 10f64.powf(snr_db / 10.0);
        let powers: Vec<f64> = order.iter().map(|&i| base[i] * scale).collect();
        let mut corr = Vec::with_capacity(self.correlations.len());
        for &(i, j, rho) in &self.correlations {
            if i >= self.k() || j >= self.k() {
                return Err(CliError::Config(format!("field `correlations`: index out of range in ({i}, {j}, {rho})")));
            }
            corr.push((rank[i], rank[j], rho));
        }
        let manifold = Manifold::ula(self.array.elements, self.array.spacing_wavelengths).map_err(cfg_err)?;
        let theta = ThetaPoint::new(angles, self.search.eps).map_err(cfg_err)?;
        let ps = source_covariance(&powers, &corr).map_err(cfg_err)?;
        Scenario::new(manifold, theta, ps, 1.0, self.snapshots).map_err(cfg_err)
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            n_starts: self.search.starts,
            eps: self.search.eps,
            cluster_threshold: self.search.cluster_threshold,
            ..SearchConfig::default()
        }
    }

    pub fn mse_search(&self) -> MseSearch {
        MseSearch { search: self.search_config(), extra_starts: self.mse.extra_starts, max_iter: self.mse.max_iter }
    }
}
