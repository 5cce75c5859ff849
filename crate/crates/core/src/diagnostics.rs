//! Verification harnesses over trajectories: dissipation identity,
//! conservation drift, spatial order studies and the Lojasiewicz slope probe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{run_flow, FlowConfig, Terminal, Trajectory};
use crate::grid::Grid;
use crate::model::AngleDensityState;
use crate::scenario::Scenario;

/// Tail points with `E - E_inf` below this are treated as roundoff.
pub const ENERGY_NOISE_FLOOR: f64 = 1e-13;
/// Minimum number of usable tail points for the Lojasiewicz fit.
pub const MIN_TAIL_POINTS: usize = 20;
/// Order-study errors below this are indistinguishable from roundoff.
pub const ORDER_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationAudit {
    /// `|(E^{n+1} - E^n) / dt_n + D^n|` per accepted step.
    pub residuals: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// Residual averaged with the step sizes as weights.
    pub time_average: f64,
}

/// Discrete check of `dE/dt = -int (d_t theta)^2 - int (d_t rho)^2` along a trajectory.
pub fn dissipation_audit(traj: &Trajectory) -> DissipationAudit {
    let rows = &traj.diagnostics;
    let residuals: Vec<f64> = rows
        .windows(2)
        .map(|w| ((w[1].energy - w[0].energy) / w[1].dt + w[0].dissipation).abs())
        .collect();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let mean = if residuals.is_empty() { 0.0 } else { residuals.iter().sum::<f64>() / residuals.len() as f64 };
    let span: f64 = rows.iter().skip(1).map(|d| d.dt).sum();
    let weighted: f64 = rows.iter().skip(1).zip(&residuals).map(|(d, r)| d.dt * r).sum();
    let time_average = if span > 0.0 { weighted / span } else { 0.0 };
    DissipationAudit { residuals, max, mean, time_average }
}

/// Max absolute drift of each monitored quantity from its initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationAudit {
    pub gcos: f64,
    pub gsin: f64,
    pub gmass: f64,
    pub mean_theta: f64,
    pub winding: i64,
    /// Largest `|int cos theta|` or `|int sin theta|` seen (not relative to the start).
    pub max_closure_defect: f64,
}

pub fn conservation_audit(traj: &Trajectory) -> ConservationAudit {
    let first = traj.diagnostics[0];
    let mut audit = ConservationAudit {
        gcos: 0.0,
        gsin: 0.0,
        gmass: 0.0,
        mean_theta: 0.0,
        winding: 0,
        max_closure_defect: 0.0,
    };
    for d in &traj.diagnostics {
        audit.gcos = audit.gcos.max((d.gcos - first.gcos).abs());
        audit.gsin = audit.gsin.max((d.gsin - first.gsin).abs());
        audit.gmass = audit.gmass.max((d.gmass - first.gmass).abs());
        audit.mean_theta = audit.mean_theta.max((d.mean_theta - first.mean_theta).abs());
        audit.winding = audit.winding.max((d.winding - first.winding).abs());
        audit.max_closure_defect = audit.max_closure_defect.max(d.gcos.abs()).max(d.gsin.abs());
    }
    audit
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudyReport {
    /// Grid sizes whose error was measured.
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`; `None` below the noise floor.
    pub observed_order: Option<f64>,
    pub below_noise_floor: bool,
}

/// Final time and step count of an order study. The step count scales with
/// `(n / n_coarsest)^2`, so `dt` is exactly proportional to `h^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStudySettings {
    pub t_final: f64,
    pub steps_coarsest: usize,
}

impl Default for OrderStudySettings {
    fn default() -> Self {
        Self { t_final: 0.1, steps_coarsest: 16 }
    }
}

fn check_resolutions(resolutions: &[usize]) -> Result<()> {
    if resolutions.len() < 3 {
        return Err(Error::Validation(format!(
            "an order study needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    for w in resolutions.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(Error::Validation(format!(
                "resolutions must increase and each divide the next ({} -> {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Runs the scenario with fixed steps to `t_final` on grid `n`.
fn run_to(scenario: &Scenario, n: usize, n0: usize, settings: &OrderStudySettings) -> Result<AngleDensityState> {
    let sc = scenario.with_n(n);
    let (state, params) = sc.initial_state()?;
    let ratio = n / n0;
    let steps = settings.steps_coarsest * ratio * ratio;
    let dt = settings.t_final / steps as f64;
    let config = FlowConfig {
        grad_tol: 0.0,
        ..FlowConfig { snapshot_every: 0, ..scenario.flow.clone() }
    };
    let config = FlowConfig { dt_init: dt, dt_min: dt, dt_max: dt, t_end: settings.t_final, ..config };
    let traj = run_flow(&state, &params, &config);
    if traj.terminal != Terminal::ReachedTEnd {
        return Err(Error::Precondition(format!(
            "order study run at n = {n} ended with {}: {}",
            traj.terminal.as_str(),
            traj.failure.unwrap_or_default()
        )));
    }
    Ok(traj.final_state)
}

fn state_error(coarse: &AngleDensityState, fine: &AngleDensityState) -> Result<f64> {
    let grid = *coarse.grid();
    let theta = fine.theta.subsample(grid)?;
    let rho = fine.rho.subsample(grid)?;
    let et = coarse.theta.zip_map(&theta, |a, b| a - b).max_abs();
    let er = coarse.rho.zip_map(&rho, |a, b| a - b).max_abs();
    Ok(et.max(er))
}

fn fit_order(grids: &[Grid], errors: &[f64]) -> (Option<f64>, bool) {
    let below = errors.iter().any(|&e| !(e >= ORDER_NOISE_FLOOR));
    if below {
        return (None, true);
    }
    let xs: Vec<f64> = grids.iter().map(|g| g.h().ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    (Some(least_squares(&xs, &ys).0), false)
}

/// Spatial convergence study with `dt ~ h^2`.
///
/// The error of grid `n_k` is measured against the next finer grid
/// `n_{k+1}` after restricting the latter by index subsampling, so the
/// report holds one entry fewer than `resolutions`.
pub fn spatial_order_study(
    scenario: &Scenario,
    resolutions: &[usize],
    settings: &OrderStudySettings,
) -> Result<OrderStudyReport> {
    check_resolutions(resolutions)?;
    let n0 = resolutions[0];
    let states = resolutions
        .iter()
        .map(|&n| run_to(scenario, n, n0, settings))
        .collect::<Result<Vec<_>>>()?;
    let mut errors = Vec::with_capacity(states.len() - 1);
    for w in states.windows(2) {
        errors.push(state_error(&w[0], &w[1])?);
    }
    let grids: Vec<Grid> = states[..states.len() - 1].iter().map(|s| *s.grid()).collect();
    let (observed_order, below_noise_floor) = fit_order(&grids, &errors);
    Ok(OrderStudyReport {
        resolutions: resolutions[..resolutions.len() - 1].to_vec(),
        errors,
        observed_order,
        below_noise_floor,
    })
}

/// Spatial convergence study against a known solution `exact(grid, t)`.
pub fn spatial_order_study_exact(
    scenario: &Scenario,
    resolutions: &[usize],
    settings: &OrderStudySettings,
    exact: impl Fn(Grid, f64) -> AngleDensityState,
) -> Result<OrderStudyReport> {
    check_resolutions(resolutions)?;
    let n0 = resolutions[0];
    let mut errors = Vec::with_capacity(resolutions.len());
    let mut grids = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let state = run_to(scenario, n, n0, settings)?;
        let reference = exact(*state.grid(), settings.t_final);
        errors.push(state_error(&state, &reference)?);
        grids.push(*state.grid());
    }
    let (observed_order, below_noise_floor) = fit_order(&grids, &errors);
    Ok(OrderStudyReport { resolutions: resolutions.to_vec(), errors, observed_order, below_noise_floor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LojasiewiczFit {
    /// Slope of `log(E - E_inf)` against `log(grad_norm)`.
    pub slope: f64,
    /// `1 - 1/slope` when `slope > 1`.
    pub theta_hat: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
}

/// Empirical Lojasiewicz exponent from the tail of a converged trajectory.
///
/// Near a critical point `|E - E_inf|^(1 - theta) <= C |grad|`; if the decay
/// saturates the inequality then `E - E_inf ~ |grad|^slope` with
/// `theta = 1 - 1/slope`. `E_inf` is taken as the final energy.
pub fn lojasiewicz_probe(traj: &Trajectory, tail_fraction: f64) -> Result<LojasiewiczFit> {
    if traj.terminal != Terminal::Stationary {
        return Err(Error::Precondition(format!(
            "probe needs a trajectory that reached stationarity, got {}",
            traj.terminal.as_str()
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::Validation(format!("tail_fraction must lie in (0, 1), got {tail_fraction}")));
    }
    let rows = &traj.diagnostics;
    let e_inf = traj.last().energy;
    let start = rows.len() - ((tail_fraction * rows.len() as f64).ceil() as usize).min(rows.len());
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows[start..]
        .iter()
        .filter(|d| d.energy - e_inf > ENERGY_NOISE_FLOOR && d.grad_norm > 0.0)
        .map(|d| (d.grad_norm.ln(), (d.energy - e_inf).ln()))
        .unzip();
    if xs.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail { points: xs.len(), needed: MIN_TAIL_POINTS });
    }
    let (slope, r_squared) = least_squares(&xs, &ys);
    let theta_hat = (slope > 1.0).then(|| 1.0 - 1.0 / slope);
    Ok(LojasiewiczFit { slope, theta_hat, r_squared, points: xs.len() })
}

/// Slope and coefficient of determination of the least-squares line through `(xs, ys)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}
