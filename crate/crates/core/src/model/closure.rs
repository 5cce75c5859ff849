use std::f64::consts::PI;

use super::{checked_pi, AngleDensityState, ModelParams};
use crate::error::{Error, Result};
use crate::grid::integrate;

pub const DEFAULT_CLOSURE_TOL: f64 = 1e-12;
pub const DEFAULT_CLOSURE_MAX_ITER: usize = 8;

/// Values of the constraint functional `(int cos theta, int sin theta, int rho - m)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constraints {
    pub gcos: f64,
    pub gsin: f64,
    pub gmass: f64,
}

impl Constraints {
    pub fn closure_defect(&self) -> f64 {
        self.gcos.abs().max(self.gsin.abs())
    }
}

pub fn constraint_values(state: &AngleDensityState, params: &ModelParams) -> Constraints {
    let h = state.grid().h();
    let (mut c, mut s) = (0.0, 0.0);
    for &t in state.theta.values() {
        let (st, ct) = t.sin_cos();
        s += st;
        c += ct;
    }
    Constraints { gcos: h * c, gsin: h * s, gmass: integrate(&state.rho) - params.mass }
}

/// `int theta`, conserved along the flow.
pub fn mean_theta(state: &AngleDensityState) -> f64 {
    integrate(&state.theta)
}

/// Stored rotation index.
pub fn winding(state: &AngleDensityState) -> i64 {
    state.omega
}

/// Recomputes the rotation index from the samples (linear extrapolation of
/// `theta` to `s = L`) and checks it against the stored one.
pub fn verify_winding(state: &AngleDensityState) -> Result<i64> {
    let recomputed = recompute_winding(state);
    if recomputed != state.omega {
        return Err(Error::WindingMismatch { stored: state.omega, recomputed });
    }
    Ok(state.omega)
}

/// `round((theta(L) - theta(0)) / 2 pi)` with `theta(L)` extrapolated from the last two samples.
pub fn recompute_winding(state: &AngleDensityState) -> i64 {
    let th = state.theta.values();
    let n = th.len();
    let end = 2.0 * th[n - 1] - th[n - 2];
    ((end - th[0]) / (2.0 * PI)).round() as i64
}

#[derive(Debug, Clone)]
pub struct ClosureProjection {
    pub state: AngleDensityState,
    pub iterations: usize,
    /// Max-norm change of theta.
    pub theta_correction: f64,
    /// Constant added to rho.
    pub rho_shift: f64,
}

/// Newton projection onto the discrete closure constraints.
///
/// Corrections move along the constraint gradients, `theta += a sin theta - b cos theta`,
/// whose Jacobian with respect to `(a, b)` is `-Pi`. Afterwards rho is
/// shifted by a constant so that `int rho = m`.
pub fn project_closure(
    state: &AngleDensityState,
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<ClosureProjection> {
    let l = state.grid().length();
    let g0 = constraint_values(state, params);
    if g0.gcos.hypot(g0.gsin) > 0.1 * l {
        return Err(Error::Precondition(format!(
            "closure defect {:e} is too large to project (limit {:e})",
            g0.gcos.hypot(g0.gsin),
            0.1 * l
        )));
    }

    let mut out = state.clone();
    let mut iterations = 0;
    loop {
        let g = constraint_values(&out, params);
        if g.closure_defect() <= tol {
            break;
        }
        if iterations == max_iter {
            return Err(Error::NoConvergence {
                what: "closure projection",
                iterations,
                residual: g.closure_defect(),
            });
        }
        let pi = checked_pi(&out, params)?;
        let [a, b] = pi.solve([g.gcos, g.gsin]);
        for t in out.theta.values_mut() {
            let (s, c) = t.sin_cos();
            *t += a * s - b * c;
        }
        iterations += 1;
    }

    let rho_shift = (params.mass - integrate(&out.rho)) / l;
    if rho_shift != 0.0 {
        for r in out.rho.values_mut() {
            *r += rho_shift;
        }
    }
    let theta_correction = out.theta.zip_map(&state.theta, |a, b| a - b).max_abs();
    Ok(ClosureProjection { state: out, iterations, theta_correction, rho_shift })
}

/// Planar polyline traced by the tangent `(cos theta, sin theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// `n + 1` points; the last one should return to the first for closed states.
    pub points: Vec<[f64; 2]>,
    /// `|gamma_n - gamma_0|`.
    pub closure_gap: f64,
}

impl Curve {
    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Turning number of the closed polygon: summed exterior angles over `2 pi`.
    pub fn turning_number(&self) -> f64 {
        let n = self.points.len() - 1;
        let dir = |i: usize| {
            let a = self.points[i];
            let b = self.points[i + 1];
            (b[1] - a[1]).atan2(b[0] - a[0])
        };
        let mut total = 0.0;
        for i in 0..n {
            let mut d = dir((i + 1) % n) - dir(i);
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            total += d;
        }
        total / (2.0 * PI)
    }
}

/// Integrates the tangent with midpoint angles `(theta_i + theta_{i+1}) / 2`.
pub fn reconstruct_curve(state: &AngleDensityState, base_point: [f64; 2]) -> Curve {
    let th = state.theta.values();
    let n = th.len();
    let h = state.grid().h();
    let jump = 2.0 * PI * state.omega as f64;
    let mut points = Vec::with_capacity(n + 1);
    let mut p = base_point;
    points.push(p);
    for i in 0..n {
        let next = if i + 1 == n { th[0] + jump } else { th[i + 1] };
        let (s, c) = (0.5 * (th[i] + next)).sin_cos();
        p = [p[0] + h * c, p[1] + h * s];
        points.push(p);
    }
    let closure_gap = (p[0] - base_point[0]).hypot(p[1] - base_point[1]);
    Curve { points, closure_gap }
}
