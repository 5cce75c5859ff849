//! Initial data families and preset scenarios.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cli::read_snapshot;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::grid::{integrate, Grid};
use crate::model::{
    project_closure, AngleDensityState, ModelParams, StiffnessProfile, DEFAULT_CLOSURE_MAX_ITER,
    DEFAULT_CLOSURE_TOL,
};

/// First positive zero of the Bessel function `J_0`. The angle
/// `j01 sin(2 pi s / L)` traces a closed figure eight with rotation index 0.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialFamily {
    /// `theta = 2 pi omega s / L`, uniform density.
    Circle {
        #[serde(default)]
        rho_mean: f64,
    },
    /// `theta = 2 pi omega s / L + sum a_k sin(2 pi m_k s / L)`,
    /// `rho = rho_mean + sum b_k cos(2 pi r_k s / L)`.
    PerturbedCircle {
        amplitudes: Vec<f64>,
        modes: Vec<u32>,
        #[serde(default)]
        rho_amplitudes: Vec<f64>,
        #[serde(default)]
        rho_modes: Vec<u32>,
        #[serde(default)]
        rho_mean: f64,
    },
    /// `theta = j01 sin(2 pi s / L) + amplitude sin(4 pi s / L)` with `omega = 0`.
    WindingZeroSeed {
        amplitude: f64,
        #[serde(default)]
        rho_mean: f64,
    },
    /// A state written by `run`.
    FromSnapshot { path: PathBuf },
}

impl InitialFamily {
    pub fn validate(&self, omega: i64) -> Result<()> {
        match self {
            InitialFamily::Circle { rho_mean } => finite("rho_mean", *rho_mean),
            InitialFamily::PerturbedCircle { amplitudes, modes, rho_amplitudes, rho_modes, rho_mean } => {
                if amplitudes.len() != modes.len() {
                    return Err(Error::Validation("amplitudes and modes must have equal length".into()));
                }
                if rho_amplitudes.len() != rho_modes.len() {
                    return Err(Error::Validation(
                        "rho_amplitudes and rho_modes must have equal length".into(),
                    ));
                }
                for a in amplitudes.iter().chain(rho_amplitudes) {
                    finite("amplitude", *a)?;
                }
                finite("rho_mean", *rho_mean)
            }
            InitialFamily::WindingZeroSeed { amplitude, rho_mean } => {
                if omega != 0 {
                    return Err(Error::Validation(format!(
                        "winding_zero_seed needs omega = 0, got {omega}"
                    )));
                }
                finite("amplitude", *amplitude)?;
                finite("rho_mean", *rho_mean)
            }
            InitialFamily::FromSnapshot { .. } => Ok(()),
        }
    }

    /// Unprojected samples of the family.
    pub fn sample(&self, grid: Grid, omega: i64) -> Result<AngleDensityState> {
        let l = grid.length();
        let k = 2.0 * PI / l;
        let state = match self {
            InitialFamily::Circle { rho_mean } => AngleDensityState::circle(grid, omega, *rho_mean),
            InitialFamily::PerturbedCircle { amplitudes, modes, rho_amplitudes, rho_modes, rho_mean } => {
                let w = omega as f64;
                let theta = grid.sample(|s| {
                    w * k * s
                        + amplitudes
                            .iter()
                            .zip(modes)
                            .map(|(a, &m)| a * (m as f64 * k * s).sin())
                            .sum::<f64>()
                });
                let rho = grid.sample(|s| {
                    rho_mean
                        + rho_amplitudes
                            .iter()
                            .zip(rho_modes)
                            .map(|(b, &r)| b * (r as f64 * k * s).cos())
                            .sum::<f64>()
                });
                AngleDensityState::new(theta, rho, omega, 0.0)?
            }
            InitialFamily::WindingZeroSeed { amplitude, rho_mean } => {
                let theta = grid.sample(|s| {
                    BESSEL_J0_FIRST_ZERO * (k * s).sin() + amplitude * (2.0 * k * s).sin()
                });
                AngleDensityState::new(theta, grid.constant(*rho_mean), 0, 0.0)?
            }
            InitialFamily::FromSnapshot { path } => {
                let state = read_snapshot(path)?;
                if state.grid() != &grid || state.omega != omega {
                    return Err(Error::Validation(format!(
                        "snapshot {} has n = {}, L = {}, omega = {}; config expects n = {}, L = {}, omega = {omega}",
                        path.display(),
                        state.grid().n(),
                        state.grid().length(),
                        state.omega,
                        grid.n(),
                        grid.length()
                    )));
                }
                state
            }
        };
        Ok(state)
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must be finite, got {v}")))
    }
}

/// Model, resolution, initial data and run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// `mass` is ignored and recomputed from the initial density.
    pub params: ModelParams,
    pub n: usize,
    pub initial: InitialFamily,
    pub flow: FlowConfig,
}

impl Scenario {
    /// Perturbed circle with a gaussian-bump stiffness:
    /// `theta = s + 0.2 sin 2s`, `rho = 0.3 cos s`, `c0 = 1`, `mu = 0.5`, `L = 2 pi`, `n = 256`.
    pub fn standard() -> Self {
        Self {
            params: ModelParams {
                length: 2.0 * PI,
                mu: 0.5,
                c0: 1.0,
                omega: 1,
                beta: StiffnessProfile::GaussianBump { a: 1.0, b: 0.5, c: 2.0, x0: 0.3 },
                mass: 0.0,
            },
            n: 256,
            initial: InitialFamily::PerturbedCircle {
                amplitudes: vec![0.2],
                modes: vec![2],
                rho_amplitudes: vec![0.3],
                rho_modes: vec![1],
                rho_mean: 0.0,
            },
            flow: FlowConfig::default(),
        }
    }

    /// Small perturbation of the circle under constant stiffness, where the
    /// flow is governed by its linearisation.
    pub fn linear_basin() -> Self {
        Self {
            params: ModelParams {
                length: 2.0 * PI,
                mu: 1.0,
                c0: 0.0,
                omega: 1,
                beta: StiffnessProfile::Constant { a: 1.0 },
                mass: 0.0,
            },
            n: 128,
            initial: InitialFamily::PerturbedCircle {
                amplitudes: vec![0.01],
                modes: vec![2],
                rho_amplitudes: vec![0.01],
                rho_modes: vec![1],
                rho_mean: 0.0,
            },
            flow: FlowConfig { grad_tol: 1e-10, dt_max: 0.05, ..FlowConfig::default() },
        }
    }

    /// Round circle with uniform density.
    pub fn circle(beta: StiffnessProfile, c0: f64) -> Self {
        Self {
            params: ModelParams { length: 2.0 * PI, mu: 1.0, c0, omega: 1, beta, mass: 0.0 },
            n: 256,
            initial: InitialFamily::Circle { rho_mean: 0.0 },
            flow: FlowConfig { grad_tol: 1e-10, ..FlowConfig::default() },
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.params.length, self.n)
    }

    /// Initial state and the model with its mass fixed by the initial
    /// density. Constrained runs start from the projection of the sampled
    /// data onto the closure constraints.
    pub fn initial_state(&self) -> Result<(AngleDensityState, ModelParams)> {
        self.initial.validate(self.params.omega)?;
        self.flow.validate()?;
        let grid = self.grid()?;
        let raw = self.initial.sample(grid, self.params.omega)?;
        let params = ModelParams { mass: integrate(&raw.rho), ..self.params.clone() };
        params.validate()?;
        if !self.flow.constrained {
            return Ok((raw, params));
        }
        let state = project_closure(&raw, &params, DEFAULT_CLOSURE_TOL, DEFAULT_CLOSURE_MAX_ITER)?.state;
        Ok((state, params))
    }
}
