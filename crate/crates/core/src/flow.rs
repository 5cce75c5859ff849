//! Time integration of the constrained flow.
//!
//! The default integrator is linearly implicit: stiffness and multipliers are
//! frozen at the old time level, the principal parts
//! `d_s(beta(rho) d_s theta)` and `mu d_s^2 rho` are treated implicitly, and
//! each step costs one cyclic tridiagonal solve per unknown. A classical RK4
//! integrator on the same right-hand side serves as a reference.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{solve_cyclic_tridiag, Field, Grid};
use crate::model::{
    self, constraint_values, mean_theta, pi_matrix, project_closure, recompute_winding,
    AngleDensityState, FlowRhs, Local, ModelParams, Multipliers, DEFAULT_CLOSURE_MAX_ITER,
};

/// Accepted steps may raise the energy by at most this much (roundoff allowance).
pub const ENERGY_SLACK: f64 = 1e-12;
/// A step grows `dt` when the relative dissipation-identity residual is below this.
pub const GROWTH_RESIDUAL: f64 = 0.01;
pub const GROWTH_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SemiImplicit,
    ExplicitRk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Stop once the quadrature L2 norm of the velocity drops below this.
    pub grad_tol: f64,
    /// Project onto the closure constraints every this many accepted steps; 0 disables.
    pub project_every: usize,
    pub scheme: Scheme,
    /// Keep a state snapshot every this many accepted steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
    /// With `false` the multipliers are switched off and the flow is the plain
    /// gradient flow of the energy (used for the linear heat sub-problem).
    pub constrained: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-8,
            dt_max: 0.05,
            t_end: 50.0,
            grad_tol: 1e-8,
            project_every: 1,
            scheme: Scheme::SemiImplicit,
            snapshot_every: 0,
            constrained: true,
        }
    }
}

impl FlowConfig {
    /// Constant step `dt` until `t_end`.
    pub fn fixed_step(dt: f64, t_end: f64) -> Self {
        Self { dt_init: dt, dt_min: dt, dt_max: dt, t_end, grad_tol: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.dt_min) && pos(self.dt_init) && pos(self.dt_max)) {
            return Err(Error::Validation("time steps must be positive".into()));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Validation(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !pos(self.t_end) {
            return Err(Error::Validation(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 0.0) {
            return Err(Error::Validation(format!("grad_tol must be nonnegative, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

/// Per-state record written after every accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub time: f64,
    /// Step that produced this state (0 for the initial row).
    pub dt: f64,
    pub energy: f64,
    /// `int (d_t theta)^2 + (d_t rho)^2` at this state.
    pub dissipation: f64,
    pub mult: Multipliers,
    pub gcos: f64,
    pub gsin: f64,
    pub gmass: f64,
    pub mean_theta: f64,
    /// Quadrature L2 norm of the velocity.
    pub grad_norm: f64,
    pub det_pi: f64,
    /// Rotation index recomputed from the samples.
    pub winding: i64,
}

/// Energy, velocity and constraint diagnostics of `state`.
pub fn diagnose(
    state: &AngleDensityState,
    params: &ModelParams,
    dt: f64,
    constrained: bool,
) -> Result<(StepDiagnostics, FlowRhs)> {
    let (energy, rhs) = model::evaluate(state, params, constrained)?;
    let g = constraint_values(state, params);
    let dissipation = rhs.dissipation();
    let diag = StepDiagnostics {
        time: state.time,
        dt,
        energy,
        dissipation,
        mult: rhs.mult,
        gcos: g.gcos,
        gsin: g.gsin,
        gmass: g.gmass,
        mean_theta: mean_theta(state),
        grad_norm: dissipation.sqrt(),
        det_pi: pi_matrix(state).det,
        winding: recompute_winding(state),
    };
    if !diag.energy.is_finite() || !diag.dissipation.is_finite() {
        return Err(Error::NonFinite(format!("diagnostics at t = {}", state.time)));
    }
    Ok((diag, rhs))
}

/// One linearly implicit step, without diagnostics.
pub fn advance_semi_implicit(
    state: &AngleDensityState,
    params: &ModelParams,
    dt: f64,
    constrained: bool,
) -> Result<AngleDensityState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Validation(format!("dt must be positive, got {dt}")));
    }
    let grid = *state.grid();
    let n = grid.n();
    let h = grid.h();
    let local = Local::new(state, params);
    let mult = if constrained { model::multipliers(state, params)? } else { Multipliers::default() };

    // theta: (I - dt d_s(bbar d_s .)) theta^{n+1} = theta^n + dt (explicit terms)
    let r = dt / (h * h);
    let jump = 2.0 * PI * state.omega as f64;
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let th = state.theta.values();
    for i in 0..n {
        let left = local.beta_mid[(i + n - 1) % n];
        let right = local.beta_mid[i];
        sub[i] = -r * left;
        sup[i] = -r * right;
        diag[i] = 1.0 + r * (left + right);
        let (s, c) = th[i].sin_cos();
        let explicit = -params.c0 * (right - left) / h + mult.lam_theta1 * s - mult.lam_theta2 * c;
        rhs[i] = th[i] + dt * explicit;
    }
    let seam = r * local.beta_mid[n - 1] * jump;
    rhs[0] -= seam;
    rhs[n - 1] += seam;
    let theta = solve_cyclic_tridiag(&sub, &diag, &sup, &Field::from_vec_unchecked(grid, rhs))?;

    // rho: (I - dt mu d_s^2) rho^{n+1} = rho^n + dt (-beta'/2 (kappa - c0)^2 - lam_rho)
    let rm = r * params.mu;
    sub.fill(-rm);
    sup.fill(-rm);
    diag.fill(1.0 + 2.0 * rm);
    let rho_rhs: Vec<f64> = (0..n)
        .map(|i| state.rho[i] + dt * (-0.5 * local.dbeta[i] * local.bend_sq[i] - mult.lam_rho))
        .collect();
    let rho = solve_cyclic_tridiag(&sub, &diag, &sup, &Field::from_vec_unchecked(grid, rho_rhs))?;

    Ok(AngleDensityState { theta, rho, omega: state.omega, time: state.time + dt })
}

/// One semi-implicit step of the constrained flow; diagnostics describe the new state.
pub fn step_semi_implicit(
    state: &AngleDensityState,
    params: &ModelParams,
    dt: f64,
) -> Result<(AngleDensityState, StepDiagnostics)> {
    let next = advance_semi_implicit(state, params, dt, true)?;
    let (diag, _) = diagnose(&next, params, dt, true)?;
    Ok((next, diag))
}

/// Documented explicit stability limit `h^2 / (2 max beta + 2 mu)`.
pub fn rk4_stability_bound(state: &AngleDensityState, params: &ModelParams) -> f64 {
    let h = state.grid().h();
    let beta_max = state.rho.values().iter().map(|&r| params.beta.eval(r).beta).fold(0.0, f64::max);
    h * h / (2.0 * beta_max + 2.0 * params.mu)
}

fn rhs_of(state: &AngleDensityState, params: &ModelParams, constrained: bool) -> Result<FlowRhs> {
    if constrained {
        model::flow_rhs(state, params)
    } else {
        Ok(model::flow_rhs_unconstrained(state, params))
    }
}

fn shifted(state: &AngleDensityState, k: &FlowRhs, scale: f64) -> AngleDensityState {
    AngleDensityState {
        theta: state.theta.zip_map(&k.dtheta, |a, b| a + scale * b),
        rho: state.rho.zip_map(&k.drho, |a, b| a + scale * b),
        omega: state.omega,
        time: state.time + scale,
    }
}

/// One classical RK4 step, without diagnostics. Multipliers are recomputed at every stage.
pub fn advance_explicit_rk4(
    state: &AngleDensityState,
    params: &ModelParams,
    dt: f64,
    constrained: bool,
) -> Result<AngleDensityState> {
    let bound = rk4_stability_bound(state, params);
    if !(dt > 0.0 && dt <= bound) {
        return Err(Error::StabilityViolation { dt, bound });
    }
    let k1 = rhs_of(state, params, constrained)?;
    let k2 = rhs_of(&shifted(state, &k1, 0.5 * dt), params, constrained)?;
    let k3 = rhs_of(&shifted(state, &k2, 0.5 * dt), params, constrained)?;
    let k4 = rhs_of(&shifted(state, &k3, dt), params, constrained)?;
    let combine = |y: &Field, a: &Field, b: &Field, c: &Field, d: &Field| {
        let v = (0..y.len())
            .map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect();
        Field::from_vec_unchecked(*y.grid(), v)
    };
    Ok(AngleDensityState {
        theta: combine(&state.theta, &k1.dtheta, &k2.dtheta, &k3.dtheta, &k4.dtheta),
        rho: combine(&state.rho, &k1.drho, &k2.drho, &k3.drho, &k4.drho),
        omega: state.omega,
        time: state.time + dt,
    })
}

pub fn step_explicit_rk4(
    state: &AngleDensityState,
    params: &ModelParams,
    dt: f64,
) -> Result<(AngleDensityState, StepDiagnostics)> {
    let next = advance_explicit_rk4(state, params, dt, true)?;
    let (diag, _) = diagnose(&next, params, dt, true)?;
    Ok((next, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    ReachedTEnd,
    Stationary,
    StepFailure,
}

impl Terminal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Terminal::ReachedTEnd => "reached_t_end",
            Terminal::Stationary => "stationary",
            Terminal::StepFailure => "step_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One row per accepted state, starting with the initial state.
    pub diagnostics: Vec<StepDiagnostics>,
    pub snapshots: Vec<AngleDensityState>,
    pub terminal: Terminal,
    /// Why the run stopped early, for `StepFailure`.
    pub failure: Option<String>,
    /// Number of rejected step attempts.
    pub rejected: usize,
    pub final_state: AngleDensityState,
}

impl Trajectory {
    pub fn accepted_steps(&self) -> usize {
        self.diagnostics.len().saturating_sub(1)
    }

    pub fn last(&self) -> &StepDiagnostics {
        self.diagnostics.last().expect("trajectory has an initial row")
    }
}

/// Closure tolerance used inside the flow. It sits well below
/// [`DEFAULT_CLOSURE_TOL`](crate::model::DEFAULT_CLOSURE_TOL) so projected runs keep a margin, but above the
/// rounding error of the quadrature sums.
fn flow_closure_tol(grid: &Grid) -> f64 {
    let l = grid.length();
    let rounding = 4.0 * f64::EPSILON * l * (grid.n() as f64).sqrt();
    (1e-14 * (1.0 + l)).max(rounding)
}

fn try_step(
    state: &AngleDensityState,
    params: &ModelParams,
    config: &FlowConfig,
    dt: f64,
    step_index: usize,
) -> Result<(AngleDensityState, StepDiagnostics)> {
    let mut next = match config.scheme {
        Scheme::SemiImplicit => advance_semi_implicit(state, params, dt, config.constrained)?,
        Scheme::ExplicitRk4 => advance_explicit_rk4(state, params, dt, config.constrained)?,
    };
    if config.project_every > 0 && step_index % config.project_every == 0 {
        let tol = flow_closure_tol(next.grid());
        next = project_closure(&next, params, tol, DEFAULT_CLOSURE_MAX_ITER)?.state;
    }
    let (diag, _) = diagnose(&next, params, dt, config.constrained)?;
    Ok((next, diag))
}

/// Runs the flow from `state0` with adaptive steps until `t_end`, stationarity, or failure.
///
/// A step is rejected (and `dt` halved, not below `dt_min`) when it fails or
/// raises the energy by more than [`ENERGY_SLACK`]. After an accepted step
/// `dt` grows by [`GROWTH_FACTOR`] (up to `dt_max`) when the relative
/// dissipation-identity residual is below [`GROWTH_RESIDUAL`].
pub fn run_flow(state0: &AngleDensityState, params: &ModelParams, config: &FlowConfig) -> Trajectory {
    let mut traj = Trajectory {
        diagnostics: Vec::new(),
        snapshots: vec![state0.clone()],
        terminal: Terminal::StepFailure,
        failure: None,
        rejected: 0,
        final_state: state0.clone(),
    };
    let fail = |mut traj: Trajectory, state: AngleDensityState, msg: String| {
        traj.failure = Some(msg);
        traj.terminal = Terminal::StepFailure;
        if traj.snapshots.last().map(|s| s.time) != Some(state.time) {
            traj.snapshots.push(state.clone());
        }
        traj.final_state = state;
        traj
    };
    if let Err(e) = config.validate() {
        return fail(traj, state0.clone(), e.to_string());
    }
    let mut current = match diagnose(state0, params, 0.0, config.constrained) {
        Ok((d, _)) => d,
        Err(e) => return fail(traj, state0.clone(), e.to_string()),
    };
    traj.diagnostics.push(current);
    let mut state = state0.clone();
    if current.grad_norm < config.grad_tol {
        traj.terminal = Terminal::Stationary;
        return traj;
    }

    let t_end = config.t_end;
    let mut dt = config.dt_init;
    let mut accepted = 0usize;
    let terminal = loop {
        if state.time >= t_end * (1.0 - 1e-12) {
            break Terminal::ReachedTEnd;
        }
        let step = dt.min(t_end - state.time);
        let outcome = try_step(&state, params, config, step, accepted + 1);
        let rejection = match outcome {
            Ok((next, diag)) if diag.energy <= current.energy + ENERGY_SLACK => {
                let residual = ((diag.energy - current.energy) / step + current.dissipation).abs()
                    / (1.0 + current.dissipation);
                accepted += 1;
                traj.diagnostics.push(diag);
                current = diag;
                state = next;
                if config.snapshot_every > 0 && accepted % config.snapshot_every == 0 {
                    traj.snapshots.push(state.clone());
                }
                if residual < GROWTH_RESIDUAL {
                    dt = (dt * GROWTH_FACTOR).min(config.dt_max);
                }
                if diag.grad_norm < config.grad_tol {
                    break Terminal::Stationary;
                }
                None
            }
            Ok((_, diag)) => Some(format!(
                "energy increase {:e} at t = {} with dt = {step:e}",
                diag.energy - current.energy,
                state.time
            )),
            Err(e) => Some(format!("t = {} with dt = {step:e}: {e}", state.time)),
        };
        if let Some(reason) = rejection {
            traj.rejected += 1;
            if dt <= config.dt_min {
                return fail(traj, state, format!("step rejected at the dt floor: {reason}"));
            }
            dt = (0.5 * dt).max(config.dt_min);
        }
    };
    traj.terminal = terminal;
    if traj.snapshots.last().map(|s| s.time) != Some(state.time) {
        traj.snapshots.push(state.clone());
    }
    traj.final_state = state;
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Grid};
    use crate::model::{energy, StiffnessProfile};

    fn params(beta: StiffnessProfile, c0: f64, mu: f64) -> ModelParams {
        ModelParams { length: 2.0 * PI, mu, c0, omega: 1, beta, mass: 0.0 }
    }

    #[test]
    fn circle_is_a_fixed_point() {
        let g = Grid::new(2.0 * PI, 128).unwrap();
        let s = AngleDensityState::circle(g, 1, 0.25);
        for beta in [
            StiffnessProfile::Constant { a: 1.0 },
            StiffnessProfile::Exponential { a: 1.0, b: 0.8 },
        ] {
            let mut p = params(beta, 0.5, 0.7);
            p.mass = 0.25 * 2.0 * PI;
            let (next, diag) = step_semi_implicit(&s, &p, 0.05).unwrap();
            assert!(next.distance(&s) <= 1e-11, "{}", next.distance(&s));
            assert!((next.time - 0.05).abs() < 1e-15);
            assert!(diag.grad_norm < 1e-11);
            let dt = 0.9 * rk4_stability_bound(&s, &p);
            let (next, _) = step_explicit_rk4(&s, &p, dt).unwrap();
            assert!(next.distance(&s) <= 1e-12);
        }
    }

    #[test]
    fn heat_step_amplification() {
        // beta = 1, c0 = 0, no multipliers: theta - s obeys the implicit heat
        // stencil, so the first Fourier mode contracts by 1 / (1 + dt * 4 sin^2(h/2) / h^2).
        let g = Grid::new(2.0 * PI, 256).unwrap();
        let mut s = AngleDensityState::circle(g, 1, 0.0);
        s.theta = g.sample(|x| x + 0.1 * x.sin());
        let p = params(StiffnessProfile::Constant { a: 1.0 }, 0.0, 1.0);
        let dt = 0.01;
        let next = advance_semi_implicit(&s, &p, dt, false).unwrap();
        let h = g.h();
        let factor = 1.0 / (1.0 + dt * 4.0 * (h / 2.0).sin().powi(2) / (h * h));
        for i in 0..g.n() {
            let x = g.node(i);
            assert!((next.theta[i] - x - 0.1 * factor * x.sin()).abs() < 1e-13);
        }
        assert!((factor - 1.0 / (1.0 + dt)).abs() < 1e-5);
    }

    #[test]
    fn mass_is_conserved_by_the_step() {
        let g = Grid::new(2.0 * PI, 128).unwrap();
        let mut s = AngleDensityState::circle(g, 1, 0.0);
        s.theta = g.sample(|x| x + 0.2 * (2.0 * x).sin());
        s.rho = g.sample(|x| 0.3 * x.cos() + 0.5);
        let p = params(StiffnessProfile::GaussianBump { a: 1.0, b: 0.5, c: 2.0, x0: 0.3 }, 1.0, 0.5);
        let m0 = integrate(&s.rho);
        let mut cur = s;
        for _ in 0..50 {
            cur = advance_semi_implicit(&cur, &p, 1e-2, true).unwrap();
        }
        assert!((integrate(&cur.rho) - m0).abs() < 1e-13);
    }

    #[test]
    fn rk4_guard() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let s = AngleDensityState::circle(g, 1, 0.0);
        let p = params(StiffnessProfile::Constant { a: 1.0 }, 0.0, 1.0);
        let bound = rk4_stability_bound(&s, &p);
        assert!(matches!(
            step_explicit_rk4(&s, &p, 2.0 * bound),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn schemes_agree_at_tiny_dt() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let s = AngleDensityState::new(
            g.sample(|x| x + 0.15 * (2.0 * x).sin()),
            g.sample(|x| 0.2 * x.cos()),
            1,
            0.0,
        )
        .unwrap();
        let p = params(StiffnessProfile::Exponential { a: 1.0, b: 0.5 }, 0.5, 1.0);
        let (a, _) = step_semi_implicit(&s, &p, 1e-7).unwrap();
        let (b, _) = step_explicit_rk4(&s, &p, 1e-7).unwrap();
        assert!(a.distance(&b) <= 1e-9, "{}", a.distance(&b));
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let s = AngleDensityState::circle(g, 1, 0.0);
        let p = params(StiffnessProfile::Constant { a: 1.0 }, 0.0, 1.0);
        let cfg = FlowConfig { grad_tol: 1e-10, ..FlowConfig::default() };
        let traj = run_flow(&s, &p, &cfg);
        assert_eq!(traj.terminal, Terminal::Stationary);
        assert_eq!(traj.diagnostics.len(), 1);
    }

    #[test]
    fn short_run_decreases_energy() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let mut s = AngleDensityState::circle(g, 1, 0.0);
        s.theta = g.sample(|x| x + 0.2 * (2.0 * x).sin());
        let p = params(StiffnessProfile::Constant { a: 1.0 }, 0.0, 1.0);
        let s = project_closure(&s, &p, 1e-12, 8).unwrap().state;
        let cfg = FlowConfig { t_end: 0.5, ..FlowConfig::default() };
        let traj = run_flow(&s, &p, &cfg);
        assert_eq!(traj.terminal, Terminal::ReachedTEnd);
        assert!(traj.diagnostics.windows(2).all(|w| w[1].energy <= w[0].energy + ENERGY_SLACK));
        assert!(traj.diagnostics.windows(2).all(|w| w[1].time > w[0].time));
        assert!((traj.final_state.time - 0.5).abs() < 1e-12);
        assert!(energy(&traj.final_state, &p) < energy(&s, &p));
    }

    #[test]
    fn dt_floor_failure() {
        let g = Grid::new(2.0 * PI, 256).unwrap();
        let mut s = AngleDensityState::circle(g, 1, 0.0);
        s.theta = g.sample(|x| x + 0.2 * (2.0 * x).sin());
        let p = params(StiffnessProfile::Constant { a: 1.0 }, 0.0, 1.0);
        // dt far beyond the dominance limit of the implicit operator
        let cfg = FlowConfig::fixed_step(10.0, 100.0);
        let traj = run_flow(&s, &p, &cfg);
        assert_eq!(traj.terminal, Terminal::StepFailure);
        assert!(traj.failure.is_some());
        assert_eq!(traj.diagnostics.len(), 1);
    }
}
