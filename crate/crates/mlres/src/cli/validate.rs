//! Oracle self-checks on the configured scenario.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::array_model::{steering_matrix, Regime, Scenario, ThetaPoint};
use crate::asy_cov::{gamma1_closed, gamma2_closed, gamma_c, gamma_matrices, gamma_numeric_oracle, Kernel, OracleOperand, PointFamily};
use crate::det_equiv::{
    eta_bar_cml, eta_bar_cml_contour, eta_bar_uml, eta_bar_uml_contour, integral_i_closed, integral_i_numeric,
    phi0_lower_bound, projected_spectrum, solve_phi0,
};
use crate::ml_costs::{projectors, Method};
use crate::montecarlo::{clt_stats, TrialBatch};
use crate::resolution::project_feasible;

use super::config::RunConfig;
use super::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

type Measure = crate::Result<(f64, String)>;

fn run_check(name: &str, tolerance: f64, f: impl FnOnce() -> Measure) -> CheckResult {
    let t = Instant::now();
    let (measured, detail) = match f() {
        Ok(v) => v,
        Err(e) => (f64::NAN, e.to_string()),
    };
    CheckResult {
        check: name.to_string(),
        passed: measured.is_finite() && measured < tolerance,
        measured,
        tolerance,
        seconds: t.elapsed().as_secs_f64(),
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// The configured snapshot count plus one from the other regime.
fn snapshot_counts(sc: &Scenario) -> Vec<usize> {
    let (k, n) = (sc.k(), sc.n());
    match Regime::of(k, n) {
        Ok(Regime::Oversampled) if k >= 2 => vec![n, k - 1],
        Ok(Regime::Oversampled) => vec![n],
        _ => vec![2 * k, n],
    }
}

/// A feasible point away from the true directions.
fn offset_point(theta: &ThetaPoint) -> crate::Result<ThetaPoint> {
    let shifted: Vec<f64> =
        theta.angles().iter().enumerate().map(|(i, &a)| a + if i % 2 == 0 { 0.4 } else { -0.4 }).collect();
    project_feasible(&shifted, theta.eps())
}

fn log_integral(sc: &Scenario, pts: &[ThetaPoint]) -> Measure {
    let r = sc.covariance();
    let mut worst = 0.0f64;
    for p in pts {
        let spec = projected_spectrum(&r, &projectors(&steering_matrix(&sc.manifold, p))?)?;
        for n in snapshot_counts(sc) {
            worst = worst.max(rel(integral_i_numeric(&spec, n)?, integral_i_closed(&spec, n)?));
        }
    }
    Ok((worst, "max relative error".into()))
}

fn phi0_checks(sc: &Scenario, pts: &[ThetaPoint]) -> Measure {
    let r = sc.covariance();
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in pts {
        let spec = projected_spectrum(&r, &projectors(&steering_matrix(&sc.manifold, p))?)?;
        for n in snapshot_counts(sc) {
            let phi0 = solve_phi0(&spec, n)?;
            if phi0.regime == Regime::Undersampled {
                count += 1;
                if phi0.value.abs() < phi0_lower_bound(&spec, n) * (1.0 - 1e-12) {
                    return Ok((f64::INFINITY, format!("lower bound violated at N = {n}")));
                }
            }
            worst = worst.max(phi0.residual);
        }
    }
    Ok((worst, format!("max residual, {count} undersampled instances")))
}

fn eta_bar_contour(sc: &Scenario, pts: &[ThetaPoint]) -> Measure {
    let r = sc.covariance();
    let mut worst = 0.0f64;
    for p in pts {
        let proj = projectors(&steering_matrix(&sc.manifold, p))?;
        for n in snapshot_counts(sc) {
            worst = worst.max(rel(eta_bar_cml_contour(&r, &proj, n)?, eta_bar_cml(&r, &proj)));
            worst = worst.max(rel(eta_bar_uml_contour(&r, &proj, n)?, eta_bar_uml(&r, &proj, n)?));
        }
    }
    Ok((worst, "max relative error over CML and UML".into()))
}

fn gamma_oracle(sc: &Scenario, pts: &[ThetaPoint]) -> Measure {
    let r = sc.covariance();
    let mut worst = 0.0f64;
    for n in snapshot_counts(sc) {
        let pf = PointFamily::new(&sc.manifold, &r, n, pts)?;
        let (s0, s1) = (OracleOperand::signal(&pf, 0)?, OracleOperand::signal(&pf, 1)?);
        let (w0, w1) = (OracleOperand::noise(&pf, 0)?, OracleOperand::noise(&pf, 1)?);
        worst = worst.max(rel(gamma_numeric_oracle(&w0, &w1, Kernel::Linear, Kernel::Linear, n)?, gamma_c(&pf)[(0, 1)]));
        worst = worst.max(rel(
            gamma_numeric_oracle(&s0, &s1, Kernel::Linear, Kernel::Log, n)?,
            gamma1_closed(&pf, Some(0), 1)?,
        ));
        worst = worst.max(rel(gamma_numeric_oracle(&s0, &s1, Kernel::Log, Kernel::Log, n)?, gamma2_closed(&pf, 0, 1)?));
    }
    Ok((worst, "max relative error over Gamma_C, Gamma_1, Gamma_2".into()))
}

/// Largest mean deviation in standard errors and largest covariance deviation
/// relative to `max(10%, 4 bootstrap SE)`.
fn clt(sc: &Scenario, pts: &[ThetaPoint], method: Method, trials: usize, seed: u64) -> crate::Result<(f64, f64)> {
    let pf = PointFamily::new(&sc.manifold, &sc.covariance(), sc.n(), pts)?;
    let g = gamma_matrices(&pf)?;
    let eta = pf.eta_bar(method)?;
    let batch = TrialBatch::new(sc.clone(), pts.to_vec(), trials, seed)?;
    let st = clt_stats(&batch, method, &eta)?;
    let se = st.mean_se();
    let mean_dev = st.sample_mean.iter().zip(se.iter()).map(|(m, s)| m.abs() / s).fold(0.0, f64::max);
    let gamma = g.for_method(method);
    let mut cov_dev = 0.0f64;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let allowed = (0.1 * gamma[(i, j)].abs()).max(4.0 * st.cov_se[(i, j)]);
            cov_dev = cov_dev.max((st.sample_cov[(i, j)] - gamma[(i, j)]).abs() / allowed);
        }
    }
    Ok((mean_dev, cov_dev))
}

pub fn run_validate(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckResult>, CliError> {
    let sc = cfg.scenario(cfg.snr_db[0])?;
    let pts = vec![sc.true_theta.clone(), offset_point(&sc.true_theta)?];
    let s = cfg.validate.tolerance_scale;
    let mut out = vec![
        run_check("log_integral", 1e-8 * s, || log_integral(&sc, &pts)),
        run_check("phi0", 1e-10 * s, || phi0_checks(&sc, &pts)),
        run_check("eta_bar_contour", 1e-8 * s, || eta_bar_contour(&sc, &pts)),
        run_check("gamma_oracle", 1e-6 * s, || gamma_oracle(&sc, &pts)),
    ];
    for &method in &cfg.methods {
        let mut cov = None;
        out.push(run_check(&format!("clt_mean_{method}"), 4.0 * s, || {
            let (m, c) = clt(&sc, &pts, method, cfg.validate.clt_trials, seed)?;
            cov = Some(c);
            Ok((m, "max |mean| in standard errors".into()))
        }));
        out.push(run_check(&format!("clt_cov_{method}"), 1.0 * s, || match cov {
            Some(c) => Ok((c, "max covariance deviation over allowance".into())),
            None => Err(crate::Error::Numerical("moments unavailable".into())),
        }));
    }
    Ok(out)
}

pub fn write_report(path: &std::path::Path, checks: &[CheckResult]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for c in checks {
        w.serialize(c).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
