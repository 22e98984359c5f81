//! Python bindings. Scenario-level functions take the same JSON
//! configuration as the command-line tool.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mlres::array_model::{electrical_from_degrees, ThetaPoint};
use mlres::cli::config::RunConfig;
use mlres::cli::CliError;
use mlres::det_equiv::{integral_i_closed, integral_i_numeric, SpectrumWithMultiplicity};
use mlres::ml_costs::Method;
use mlres::montecarlo::{empirical_resolution, TrialBatch};
use mlres::numerics::GaussianSpec;
use mlres::resolution::{crb_total, mse_large as mse_large_rs, predict_mse, predict_scenario};

fn num_err(e: mlres::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_method(method: &str) -> PyResult<Method> {
    method.parse().map_err(|e: mlres::Error| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn electrical_angle(degrees: f64) -> f64 {
    electrical_from_degrees(degrees)
}

/// Large-error MSE for true electrical angles `angles` (ascending).
#[pyfunction]
fn mse_large(angles: Vec<f64>) -> PyResult<f64> {
    let tp = ThetaPoint::new(angles, mlres::array_model::DEFAULT_EPS).map_err(num_err)?;
    Ok(mse_large_rs(&tp))
}

/// Closed and contour-integral values of the log-integral for a spectrum.
#[pyfunction]
fn log_integral(values: Vec<f64>, multiplicities: Vec<usize>, snapshots: usize) -> PyResult<(f64, f64)> {
    let spec = SpectrumWithMultiplicity::new(values, multiplicities).map_err(num_err)?;
    let closed = integral_i_closed(&spec, snapshots).map_err(num_err)?;
    let numeric = integral_i_numeric(&spec, snapshots).map_err(num_err)?;
    Ok((closed, numeric))
}

/// `P[X > 0]` for `X ~ N(mean, cov)` and its QMC standard error.
#[pyfunction]
#[pyo3(signature = (mean, cov, n_samples = 40_000, seed = 0))]
fn mvn_orthant(py: Python<'_>, mean: Vec<f64>, cov: Vec<Vec<f64>>, n_samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let d = mean.len();
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("covariance must be {d}x{d}")));
    }
    let flat: Vec<f64> = cov.into_iter().flatten().collect();
    let spec = GaussianSpec::new(
        DVector::from_vec(mean),
        DMatrix::from_row_slice(d, d, &flat),
    )
    .map_err(num_err)?;
    py.detach(|| mlres::numerics::mvn_orthant(&spec, n_samples, seed)).map_err(num_err)
}

/// Predicted resolution probability at one SNR, with optional Monte Carlo
/// comparison when `trials > 0`.
#[pyfunction]
#[pyo3(signature = (config_json, method, snr_db, trials = 0, seed = None))]
fn predict<'py>(
    py: Python<'py>,
    config_json: &str,
    method: &str,
    snr_db: f64,
    trials: usize,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::from_json(config_json).map_err(cli_err)?;
    let method = parse_method(method)?;
    let seed = seed.unwrap_or(cfg.seed);
    let sc = cfg.scenario(snr_db).map_err(cli_err)?;
    let (pred, mse_pred, emp) = py
        .detach(|| -> mlres::Result<_> {
            let pred = predict_scenario(&sc, method, &cfg.search_config(), cfg.qmc_budget, seed)?;
            let small = match cfg.mse_small {
                Some(v) => v,
                None => crb_total(&sc)?,
            };
            let mse_pred = predict_mse(pred.p_res, small, mse_large_rs(&sc.true_theta));
            let emp = if trials > 0 {
                let batch = TrialBatch::from_family(sc.clone(), &pred.family, trials, seed)?;
                Some(empirical_resolution(&batch, method)?)
            } else {
                None
            };
            Ok((pred, mse_pred, emp))
        })
        .map_err(num_err)?;
    let out = PyDict::new(py);
    out.set_item("method", method.name())?;
    out.set_item("snr_db", snr_db)?;
    out.set_item("p_res", pred.p_res)?;
    out.set_item("qmc_error", pred.qmc_error)?;
    out.set_item("l_minima", pred.family.l())?;
    out.set_item("eta_bar", pred.eta_bar.clone())?;
    out.set_item("mse_pred", mse_pred)?;
    let minima: Vec<Vec<f64>> = pred.family.points().iter().map(|p| p.theta.angles().to_vec()).collect();
    out.set_item("family", minima)?;
    if let Some(e) = emp {
        out.set_item("p_res_emp", e.p_hat)?;
        out.set_item("ci", e.ci)?;
    }
    Ok(out)
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("mlres".to_string()).chain(args).collect();
    py.detach(|| mlres::cli::run(argv))
}

#[pymodule]
pub fn mlres_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(electrical_angle, m)?)?;
    m.add_function(wrap_pyfunction!(mse_large, m)?)?;
    m.add_function(wrap_pyfunction!(log_integral, m)?)?;
    m.add_function(wrap_pyfunction!(mvn_orthant, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
