use std::time::Instant;

use crate::array_model::Scenario;
use crate::ml_costs::Method;
use crate::montecarlo::{empirical_mse, empirical_resolution, TrialBatch};
use crate::resolution::{crb_total, find_local_minima, mse_large, predict_mse, predict_scenario, DeterministicSurface};

use super::config::RunConfig;
use super::output::{MinimaRow, ResultRow, RowTiming};
use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plan {
    pub empirical_p: bool,
    pub empirical_mse: bool,
}

impl Plan {
    pub const PREDICT: Plan = Plan { empirical_p: false, empirical_mse: false };
    pub const SIMULATE: Plan = Plan { empirical_p: true, empirical_mse: false };
    pub const MSE: Plan = Plan { empirical_p: false, empirical_mse: true };
    pub const FULL: Plan = Plan { empirical_p: true, empirical_mse: true };

    fn needs_trials(self) -> bool {
        self.empirical_p || self.empirical_mse
    }
}

/// Trial seed shared by both methods at one SNR so that they see the same data.
pub fn trial_seed(seed: u64, snr_index: usize) -> u64 {
    seed ^ (snr_index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn result_row(
    cfg: &RunConfig,
    sc: &Scenario,
    method: Method,
    snr_db: f64,
    snr_index: usize,
    seed: u64,
    plan: Plan,
) -> Result<ResultRow, CliError> {
    let pred = predict_scenario(sc, method, &cfg.search_config(), cfg.qmc_budget, seed)?;
    let mse_small = match cfg.mse_small {
        Some(v) => v,
        None => crb_total(sc)?,
    };
    let mut row = ResultRow {
        p_res_pred: Some(pred.p_res),
        p_res_err: Some(pred.qmc_error),
        mse_pred: Some(predict_mse(pred.p_res, mse_small, mse_large(&sc.true_theta))),
        l_minima: Some(pred.family.l()),
        ..ResultRow::empty(method, snr_db)
    };
    if plan.needs_trials() {
        let batch = TrialBatch::from_family(sc.clone(), &pred.family, cfg.trials, trial_seed(seed, snr_index))?;
        if plan.empirical_p {
            let e = empirical_resolution(&batch, method)?;
            row.p_res_emp = Some(e.p_hat);
            row.ci_lo = Some(e.ci.0);
            row.ci_hi = Some(e.ci.1);
        }
        if plan.empirical_mse {
            row.mse_emp = Some(empirical_mse(&batch, method, &cfg.mse_search())?.mse);
        }
    }
    Ok(row)
}

/// Rows ordered by method, then SNR.
pub fn run_table(cfg: &RunConfig, seed: u64, plan: Plan) -> Result<(Vec<ResultRow>, Vec<RowTiming>), CliError> {
    if plan.needs_trials() && cfg.trials == 0 {
        return Err(CliError::Config("field `trials`: this command needs at least one trial".into()));
    }
    let scenarios = cfg.snr_db.iter().map(|&s| cfg.scenario(s)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &method in &cfg.methods {
        for (i, (sc, &snr)) in scenarios.iter().zip(&cfg.snr_db).enumerate() {
            let t = Instant::now();
            let row = result_row(cfg, sc, method, snr, i, seed, plan)?;
            let label = format!("{method} {snr} dB");
            eprintln!("{label}: p_pred={:?} p_emp={:?} L={:?}", row.p_res_pred, row.p_res_emp, row.l_minima);
            timings.push(RowTiming { label, seconds: t.elapsed().as_secs_f64() });
            rows.push(row);
        }
    }
    Ok((rows, timings))
}

/// Minima of the deterministic cost surface; the minimum closest to the true
/// directions (within the clustering threshold) is flagged.
pub fn run_minima(cfg: &RunConfig, seed: u64) -> Result<(Vec<MinimaRow>, Vec<RowTiming>), CliError> {
    let search = cfg.search_config();
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &method in &cfg.methods {
        for &snr in &cfg.snr_db {
            let t = Instant::now();
            let sc = cfg.scenario(snr)?;
            let set = find_local_minima(&DeterministicSurface::from_scenario(&sc, method), &search, seed)?;
            let truth = set
                .minima
                .iter()
                .enumerate()
                .map(|(i, (p, _))| (i, p.max_distance(&sc.true_theta)))
                .filter(|&(_, d)| d <= search.cluster_threshold)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i);
            for (rank, (p, cost)) in set.minima.iter().enumerate() {
                rows.push(MinimaRow {
                    method,
                    snr_db: snr,
                    rank,
                    cost: *cost,
                    is_truth: truth == Some(rank),
                    theta: p.angles().to_vec(),
                });
            }
            timings.push(RowTiming { label: format!("{method} {snr} dB"), seconds: t.elapsed().as_secs_f64() });
        }
    }
    Ok((rows, timings))
}
