//! Discrete energy, constraints and constrained gradient of a closed elastic
//! wire described by its inclination angle and a density.
//!
//! The discretisation is staggered: curvature and the Dirichlet quotient of
//! the density live at the midpoints `s_{i+1/2}`, the stiffness is averaged
//! onto the midpoints from the nodes. The energy is
//!
//! ```text
//! E = h/2 * sum_i [ bbar_{i+1/2} (kappa_{i+1/2} - c0)^2 + mu ((rho_{i+1} - rho_i)/h)^2 ]
//! bbar_{i+1/2} = (beta(rho_i) + beta(rho_{i+1})) / 2
//! ```
//!
//! and [`gradient`] is its exact discrete L2 gradient (partial derivatives
//! divided by `h`). The multipliers use the integrated-by-parts form of the
//! closure multipliers, realised through discrete summation by parts, so the
//! semi-discrete flow conserves the discrete constraints exactly.

mod closure;
mod stiffness;

pub use closure::{
    constraint_values, mean_theta, project_closure, recompute_winding, reconstruct_curve, verify_winding,
    winding,
    ClosureProjection, Constraints, Curve, DEFAULT_CLOSURE_MAX_ITER, DEFAULT_CLOSURE_TOL,
};
pub use stiffness::{beta_eval, StiffnessProfile, StiffnessValue, BETA_FLOOR};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{diff_forward_winding, inner, Field, Grid};

/// Fixed model data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Curve length `L`.
    pub length: f64,
    /// Density diffusivity.
    pub mu: f64,
    /// Spontaneous curvature.
    pub c0: f64,
    /// Rotation index.
    pub omega: i64,
    pub beta: StiffnessProfile,
    /// Total mass `m = int rho`, fixed at initialisation.
    pub mass: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Model(format!("L must be positive, got {}", self.length)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Model(format!("mu must be positive, got {}", self.mu)));
        }
        if !self.c0.is_finite() {
            return Err(Error::Model(format!("c0 must be finite, got {}", self.c0)));
        }
        if !self.mass.is_finite() {
            return Err(Error::Model(format!("mass must be finite, got {}", self.mass)));
        }
        self.beta.validate()
    }

    /// Degeneracy floor for `det Pi`.
    pub fn det_min(&self) -> f64 {
        1e-12 * self.length * self.length
    }
}

/// Sampled angle and density; the evolving unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleDensityState {
    /// Inclination angle on one period; jumps by `2 pi omega` across the seam.
    pub theta: Field,
    pub rho: Field,
    pub omega: i64,
    pub time: f64,
}

impl AngleDensityState {
    pub fn new(theta: Field, rho: Field, omega: i64, time: f64) -> Result<Self> {
        if theta.grid() != rho.grid() {
            return Err(Error::Grid("theta and rho live on different grids".into()));
        }
        if !theta.is_finite() || !rho.is_finite() {
            return Err(Error::NonFinite("state values".into()));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::Model(format!("time must be nonnegative, got {time}")));
        }
        Ok(Self { theta, rho, omega, time })
    }

    /// Round circle `theta = 2 pi omega s / L` with uniform density.
    pub fn circle(grid: Grid, omega: i64, rho: f64) -> Self {
        let k = 2.0 * PI * omega as f64 / grid.length();
        Self {
            theta: grid.sample(|s| k * s),
            rho: grid.constant(rho),
            omega,
            time: 0.0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.max_abs().max(self.rho.max_abs())
    }

    /// Max-norm distance to another state on the same grid.
    pub fn distance(&self, other: &Self) -> f64 {
        let dt = self.theta.zip_map(&other.theta, |a, b| a - b).max_abs();
        let dr = self.rho.zip_map(&other.rho, |a, b| a - b).max_abs();
        dt.max(dr)
    }
}

/// Lagrange multipliers: closure pair and mass multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Multipliers {
    pub lam_theta1: f64,
    pub lam_theta2: f64,
    pub lam_rho: f64,
}

/// The symmetric 2x2 matrix of sin/cos moments and its determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiMatrix {
    pub entries: [[f64; 2]; 2],
    pub det: f64,
}

impl PiMatrix {
    /// Solves `Pi x = rhs`; callers check `det` first.
    pub fn solve(&self, rhs: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.entries;
        [(d * rhs[0] - b * rhs[1]) / self.det, (a * rhs[1] - c * rhs[0]) / self.det]
    }
}

/// Unconstrained L2 gradient of the energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta: Field,
    pub rho: Field,
}

/// Right-hand side of the constrained flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRhs {
    pub dtheta: Field,
    pub drho: Field,
    pub mult: Multipliers,
}

impl FlowRhs {
    /// Quadrature of `(d_t theta)^2 + (d_t rho)^2`.
    pub fn dissipation(&self) -> f64 {
        inner(&self.dtheta, &self.dtheta) + inner(&self.drho, &self.drho)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dissipation().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.dtheta.max_abs().max(self.drho.max_abs())
    }
}

/// Midpoint and nodal quantities shared by the energy, its gradient and the multipliers.
pub(crate) struct Local {
    /// Curvature at midpoints.
    pub kappa: Vec<f64>,
    /// Stiffness derivative at nodes.
    pub dbeta: Vec<f64>,
    /// Averaged stiffness at midpoints.
    pub beta_mid: Vec<f64>,
    /// Bending flux `bbar (kappa - c0)` at midpoints.
    pub flux: Vec<f64>,
    /// Nodal average of the two adjacent `(kappa - c0)^2`.
    pub bend_sq: Vec<f64>,
    /// `(rho_{i+1} - rho_i) / h` at midpoints.
    pub drho_mid: Vec<f64>,
}

impl Local {
    pub fn new(state: &AngleDensityState, params: &ModelParams) -> Self {
        let n = state.theta.len();
        let kappa = diff_forward_winding(&state.theta, state.omega);
        let drho_mid = diff_forward_winding(&state.rho, 0);
        let mut beta = Vec::with_capacity(n);
        let mut dbeta = Vec::with_capacity(n);
        for &r in state.rho.values() {
            let v = params.beta.eval(r);
            beta.push(v.beta);
            dbeta.push(v.dbeta);
        }
        let beta_mid: Vec<f64> = (0..n).map(|i| 0.5 * (beta[i] + beta[(i + 1) % n])).collect();
        let flux: Vec<f64> = (0..n).map(|i| beta_mid[i] * (kappa[i] - params.c0)).collect();
        let bend_sq = (0..n)
            .map(|i| {
                let right = kappa[i] - params.c0;
                let left = kappa[(i + n - 1) % n] - params.c0;
                0.5 * (right * right + left * left)
            })
            .collect();
        Self { kappa, dbeta, beta_mid, flux, bend_sq, drho_mid }
    }

    /// `(flux_{i+1/2} - flux_{i-1/2}) / h`: the discrete `d_s[beta (kappa - c0)]`.
    pub fn flux_divergence(&self, h: f64) -> Vec<f64> {
        let n = self.flux.len();
        (0..n).map(|i| (self.flux[i] - self.flux[(i + n - 1) % n]) / h).collect()
    }
}

/// Stiffness and derivatives at `x`.
pub fn stiffness(params: &ModelParams, x: f64) -> Result<StiffnessValue> {
    params.beta.eval_checked(x)
}

pub fn energy(state: &AngleDensityState, params: &ModelParams) -> f64 {
    let local = Local::new(state, params);
    energy_from(&local, state, params)
}

fn energy_from(local: &Local, state: &AngleDensityState, params: &ModelParams) -> f64 {
    let h = state.grid().h();
    let sum: f64 = (0..local.flux.len())
        .map(|i| {
            let bend = local.kappa[i] - params.c0;
            local.beta_mid[i] * bend * bend + params.mu * local.drho_mid[i] * local.drho_mid[i]
        })
        .sum();
    0.5 * h * sum
}

pub fn pi_matrix(state: &AngleDensityState) -> PiMatrix {
    let h = state.grid().h();
    let (mut ss, mut sc, mut cc) = (0.0, 0.0, 0.0);
    for &t in state.theta.values() {
        let (s, c) = t.sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
    }
    let (ss, sc, cc) = (h * ss, h * sc, h * cc);
    PiMatrix { entries: [[ss, -sc], [-sc, cc]], det: ss * cc - sc * sc }
}

fn checked_pi(state: &AngleDensityState, params: &ModelParams) -> Result<PiMatrix> {
    let pi = pi_matrix(state);
    let min = params.det_min();
    if !(pi.det >= min) {
        return Err(Error::DegeneratePi { det: pi.det, min });
    }
    Ok(pi)
}

/// Closure multipliers from `Pi lambda = J`, with
/// `J = sum_i flux_{i+1/2} (sin theta_{i+1} - sin theta_i, cos theta_i - cos theta_{i+1})`,
/// and the mass multiplier `-(1/2L) int beta'(rho) (kappa - c0)^2`.
pub fn multipliers(state: &AngleDensityState, params: &ModelParams) -> Result<Multipliers> {
    let local = Local::new(state, params);
    multipliers_from(&local, state, params)
}

fn multipliers_from(local: &Local, state: &AngleDensityState, params: &ModelParams) -> Result<Multipliers> {
    let pi = checked_pi(state, params)?;
    let [j1, j2] = closure_moments(local, state);
    let [lam_theta1, lam_theta2] = pi.solve([j1, j2]);
    Ok(Multipliers { lam_theta1, lam_theta2, lam_rho: mass_multiplier(local, state) })
}

/// Right-hand side `J` of the closure multiplier system.
pub(crate) fn closure_moments(local: &Local, state: &AngleDensityState) -> [f64; 2] {
    let th = state.theta.values();
    let n = th.len();
    let (mut j1, mut j2) = (0.0, 0.0);
    for i in 0..n {
        let (s0, c0) = th[i].sin_cos();
        let (s1, c1) = th[(i + 1) % n].sin_cos();
        j1 += local.flux[i] * (s1 - s0);
        j2 += local.flux[i] * (c0 - c1);
    }
    [j1, j2]
}

fn mass_multiplier(local: &Local, state: &AngleDensityState) -> f64 {
    let h = state.grid().h();
    let sum: f64 = local.dbeta.iter().zip(&local.bend_sq).map(|(b, q)| b * q).sum();
    -h * sum / (2.0 * state.grid().length())
}

pub fn gradient(state: &AngleDensityState, params: &ModelParams) -> Gradient {
    let local = Local::new(state, params);
    gradient_from(&local, state, params)
}

fn gradient_from(local: &Local, state: &AngleDensityState, params: &ModelParams) -> Gradient {
    let grid = *state.grid();
    let h = grid.h();
    let n = grid.n();
    let div = local.flux_divergence(h);
    let theta = div.iter().map(|d| -d).collect();
    let rho = (0..n)
        .map(|i| {
            let lap = (local.drho_mid[i] - local.drho_mid[(i + n - 1) % n]) / h;
            -params.mu * lap + 0.5 * local.dbeta[i] * local.bend_sq[i]
        })
        .collect();
    Gradient {
        theta: Field::from_vec_unchecked(grid, theta),
        rho: Field::from_vec_unchecked(grid, rho),
    }
}

/// Constrained flow velocity `-grad E - lambda . grad G`.
pub fn flow_rhs(state: &AngleDensityState, params: &ModelParams) -> Result<FlowRhs> {
    let local = Local::new(state, params);
    let mult = multipliers_from(&local, state, params)?;
    let grad = gradient_from(&local, state, params);
    Ok(assemble_rhs(state, grad, mult))
}

/// Velocity for given multipliers: `-grad E - sum_k lambda_k grad G^k`.
pub fn assemble_rhs(state: &AngleDensityState, grad: Gradient, mult: Multipliers) -> FlowRhs {
    let dtheta = state.theta.zip_map(&grad.theta, |t, g| {
        let (s, c) = t.sin_cos();
        -g + mult.lam_theta1 * s - mult.lam_theta2 * c
    });
    let drho = grad.rho.map(|g| -g - mult.lam_rho);
    FlowRhs { dtheta, drho, mult }
}

/// Plain `-grad E`, without the constraint terms.
pub fn flow_rhs_unconstrained(state: &AngleDensityState, params: &ModelParams) -> FlowRhs {
    let grad = gradient(state, params);
    assemble_rhs(state, grad, Multipliers::default())
}

/// Energy, multipliers and velocity from one shared evaluation.
pub(crate) fn evaluate(
    state: &AngleDensityState,
    params: &ModelParams,
    constrained: bool,
) -> Result<(f64, FlowRhs)> {
    let local = Local::new(state, params);
    let e = energy_from(&local, state, params);
    let mult = if constrained {
        multipliers_from(&local, state, params)?
    } else {
        Multipliers::default()
    };
    let grad = gradient_from(&local, state, params);
    Ok((e, assemble_rhs(state, grad, mult)))
}

/// L2 gradients of the three constraint functionals at `state`.
pub fn constraint_gradients(state: &AngleDensityState) -> [Gradient; 3] {
    let grid = *state.grid();
    let zero = grid.constant(0.0);
    [
        Gradient { theta: state.theta.map(|t| -t.sin()), rho: zero.clone() },
        Gradient { theta: state.theta.map(f64::cos), rho: zero.clone() },
        Gradient { theta: zero, rho: grid.constant(1.0) },
    ]
}
