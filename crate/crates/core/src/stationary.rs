//! Stationarity residuals and Newton refinement of flow limits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate, Field};
use crate::model::{
    self, assemble_rhs, constraint_values, energy, gradient, mean_theta, AngleDensityState, ModelParams,
    Multipliers,
};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryReport {
    /// Max norm of the angle equation residual.
    pub residual_theta: f64,
    /// Max norm of the density equation residual.
    pub residual_rho: f64,
    /// Quadrature L2 norm of both residuals together.
    pub residual_l2: f64,
    pub lam_theta1: f64,
    pub lam_theta2: f64,
    pub lam_rho: f64,
    pub energy: f64,
}

impl StationaryReport {
    pub fn mult(&self) -> Multipliers {
        Multipliers { lam_theta1: self.lam_theta1, lam_theta2: self.lam_theta2, lam_rho: self.lam_rho }
    }
}

/// Residual of the stationary equations with the multipliers given by their
/// explicit formulas; identical to the flow velocity.
pub fn stationary_residual(state: &AngleDensityState, params: &ModelParams) -> Result<StationaryReport> {
    let rhs = model::flow_rhs(state, params)?;
    Ok(StationaryReport {
        residual_theta: rhs.dtheta.max_abs(),
        residual_rho: rhs.drho.max_abs(),
        residual_l2: rhs.l2_norm(),
        lam_theta1: rhs.mult.lam_theta1,
        lam_theta2: rhs.mult.lam_theta2,
        lam_rho: rhs.mult.lam_rho,
        energy: energy(state, params),
    })
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: AngleDensityState,
    pub report: StationaryReport,
    /// Multipliers carried as Newton unknowns.
    pub kkt: Multipliers,
    /// Multiplier of the rotation gauge `int theta = const`; vanishes at a root.
    pub gauge: f64,
    pub iterations: usize,
    /// Max norm of the extended residual at exit.
    pub residual: f64,
}

/// Unknowns `(theta, rho, lam_theta1, lam_theta2, lam_rho, nu)`.
struct Kkt<'a> {
    params: &'a ModelParams,
    template: &'a AngleDensityState,
    mean0: f64,
}

impl Kkt<'_> {
    fn n(&self) -> usize {
        self.template.grid().n()
    }

    fn state(&self, x: &DVector<f64>) -> AngleDensityState {
        let n = self.n();
        let grid = *self.template.grid();
        AngleDensityState {
            theta: Field::from_vec_unchecked(grid, x.rows(0, n).iter().copied().collect()),
            rho: Field::from_vec_unchecked(grid, x.rows(n, n).iter().copied().collect()),
            omega: self.template.omega,
            time: self.template.time,
        }
    }

    fn mult(x: &DVector<f64>, n: usize) -> Multipliers {
        Multipliers { lam_theta1: x[2 * n], lam_theta2: x[2 * n + 1], lam_rho: x[2 * n + 2] }
    }

    /// The `2n` stationary equations for given multipliers.
    fn equations(&self, state: &AngleDensityState, mult: Multipliers, nu: f64, out: &mut [f64]) {
        let n = self.n();
        let rhs = assemble_rhs(state, gradient(state, self.params), mult);
        for i in 0..n {
            out[i] = rhs.dtheta[i] + nu;
            out[n + i] = rhs.drho[i];
        }
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let state = self.state(x);
        let mut f = DVector::zeros(2 * n + 4);
        self.equations(&state, Self::mult(x, n), x[2 * n + 3], f.as_mut_slice());
        let g = constraint_values(&state, self.params);
        f[2 * n] = g.gcos;
        f[2 * n + 1] = g.gsin;
        f[2 * n + 2] = g.gmass;
        f[2 * n + 3] = integrate(&state.theta) - self.mean0;
        f
    }

    /// Forward differences on the `2n x 2n` block, analytic borders.
    fn jacobian(&self, x: &DVector<f64>, f: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let m = 2 * n + 4;
        let h = self.template.grid().h();
        let mut jac = DMatrix::zeros(m, m);
        let state = self.state(x);
        let step = 1e-7 * (1.0 + state.max_abs());
        let mult = Self::mult(x, n);
        let nu = x[2 * n + 3];
        let mut col = vec![0.0; 2 * n];
        for j in 0..2 * n {
            let mut pert = state.clone();
            if j < n {
                pert.theta.values_mut()[j] += step;
            } else {
                pert.rho.values_mut()[j - n] += step;
            }
            self.equations(&pert, mult, nu, &mut col);
            for i in 0..2 * n {
                jac[(i, j)] = (col[i] - f[i]) / step;
            }
        }
        for i in 0..n {
            let (s, c) = state.theta[i].sin_cos();
            jac[(i, 2 * n)] = s;
            jac[(i, 2 * n + 1)] = -c;
            jac[(i, 2 * n + 3)] = 1.0;
            jac[(n + i, 2 * n + 2)] = -1.0;
            jac[(2 * n, i)] = -h * s;
            jac[(2 * n + 1, i)] = h * c;
            jac[(2 * n + 2, n + i)] = h;
            jac[(2 * n + 3, i)] = h;
        }
        jac
    }
}

/// A Newton step that does not shrink the residual below this fraction of
/// its previous value counts as stagnation.
pub const STAGNATION_RATIO: f64 = 0.9;

/// Damped Newton on the stationary equations in KKT form.
///
/// The multipliers become unknowns next to the `2n` nodal equations, closed
/// by the three constraints. Rotations `theta -> theta + const` leave both
/// energy and constraints invariant, so the system also fixes `int theta` at
/// its input value through an extra gauge multiplier, which is zero at any
/// root. Iterates until the max-norm residual is at most `tol`; fails with
/// [`Error::NoConvergence`] after `max_iter` iterations or once the residual
/// stagnates (see [`newton_iterate`] to keep the best iterate instead).
pub fn newton_refine(
    state: &AngleDensityState,
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let out = newton_iterate(state, params, tol, max_iter)?;
    if out.residual > tol {
        return Err(Error::NoConvergence {
            what: "newton refinement",
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    Ok(out)
}

/// Same iteration as [`newton_refine`] but returns the best iterate even
/// when `tol` is not reached. Stops at `tol`, after `max_iter` iterations,
/// or when a full iteration gains less than [`STAGNATION_RATIO`], which in
/// practice means the [`roundoff_floor`] has been hit.
pub fn newton_iterate(
    state: &AngleDensityState,
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let start = stationary_residual(state, params)?;
    let limit = 1e-3 * (1.0 + state.max_abs());
    if start.residual_l2 > limit {
        return Err(Error::Precondition(format!(
            "stationary residual {:e} exceeds {limit:e}; run the flow closer to a critical point first",
            start.residual_l2
        )));
    }

    let n = state.grid().n();
    let kkt = Kkt { params, template: state, mean0: mean_theta(state) };
    let mut x = DVector::zeros(2 * n + 4);
    x.rows_mut(0, n).copy_from_slice(state.theta.values());
    x.rows_mut(n, n).copy_from_slice(state.rho.values());
    let m = start.mult();
    x[2 * n] = m.lam_theta1;
    x[2 * n + 1] = m.lam_theta2;
    x[2 * n + 2] = m.lam_rho;

    let mut f = kkt.residual(&x);
    let mut norm = f.amax();
    let mut iterations = 0;
    while norm > tol && iterations < max_iter {
        let jac = kkt.jacobian(&x, &f);
        let delta = jac.lu().solve(&(-&f)).ok_or(Error::SingularJacobian("newton refinement"))?;
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularJacobian("newton refinement"));
        }
        iterations += 1;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1.0 / 64.0 {
            let x_new = &x + alpha * &delta;
            let f_new = kkt.residual(&x_new);
            if f_new.amax() < norm {
                accepted = Some((x_new, f_new));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };
        let previous = norm;
        x = x_new;
        f = f_new;
        norm = f.amax();
        if norm > STAGNATION_RATIO * previous {
            break;
        }
    }

    let refined = kkt.state(&x);
    let report = stationary_residual(&refined, params)?;
    Ok(NewtonOutcome {
        state: refined,
        report,
        kkt: Kkt::mult(&x, n),
        gauge: x[2 * n + 3],
        iterations,
        residual: norm,
    })
}

/// Size of the angle-equation residual caused by storing `theta` in double
/// precision alone: rounding each node by half an ulp of `max |theta|`
/// perturbs the flux difference by up to `2 ulp * max beta / h^2`.
pub fn roundoff_floor(state: &AngleDensityState, params: &ModelParams) -> f64 {
    let top = state.theta.max_abs().max(f64::MIN_POSITIVE);
    let ulp = f64::EPSILON * 2f64.powi(top.log2().floor() as i32);
    let beta = state.rho.values().iter().map(|&r| params.beta.eval(r).beta).fold(0.0, f64::max);
    let h = state.grid().h();
    2.0 * ulp * beta / (h * h)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::Grid;
    use crate::model::StiffnessProfile;

    #[test]
    fn circle_residuals() {
        let g = Grid::new(2.0 * PI, 256).unwrap();
        let s = AngleDensityState::circle(g, 1, 0.0);
        let p = ModelParams {
            length: 2.0 * PI,
            mu: 1.0,
            c0: 0.0,
            omega: 1,
            beta: StiffnessProfile::Exponential { a: 1.0, b: 1.0 },
            mass: 0.0,
        };
        let r = stationary_residual(&s, &p).unwrap();
        assert!(r.residual_theta <= 1e-11 && r.residual_rho <= 1e-11);
        assert!((r.lam_rho + 0.5).abs() < 1e-12);
    }

    #[test]
    fn circle_is_already_a_root() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let s = AngleDensityState::circle(g, 1, 0.2);
        let p = ModelParams {
            length: 2.0 * PI,
            mu: 1.0,
            c0: 0.3,
            omega: 1,
            beta: StiffnessProfile::GaussianBump { a: 1.0, b: 0.5, c: 1.0, x0: 0.0 },
            mass: 0.2 * 2.0 * PI,
        };
        let out = newton_refine(&s, &p, DEFAULT_NEWTON_TOL, DEFAULT_NEWTON_MAX_ITER).unwrap();
        assert!(out.iterations <= 1);
        assert!(out.state.distance(&s) <= 1e-13);
    }

    #[test]
    fn far_from_critical_is_rejected() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let mut s = AngleDensityState::circle(g, 1, 0.0);
        s.theta = g.sample(|x| x + 0.2 * (2.0 * x).sin());
        let p = ModelParams {
            length: 2.0 * PI,
            mu: 1.0,
            c0: 0.0,
            omega: 1,
            beta: StiffnessProfile::Constant { a: 1.0 },
            mass: 0.0,
        };
        assert!(matches!(newton_refine(&s, &p, 1e-12, 20), Err(Error::Precondition(_))));
    }
}
