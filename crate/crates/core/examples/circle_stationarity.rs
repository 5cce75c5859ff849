//! The round circle with uniform density is a critical point for every
//! stiffness family and spontaneous curvature. Prints the velocity size and
//! the multipliers that balance it.

use std::f64::consts::PI;

use wireflow::grid::Grid;
use wireflow::model::{energy, flow_rhs};
use wireflow::{AngleDensityState, ModelParams, StiffnessProfile};

fn main() -> wireflow::Result<()> {
    let grid = Grid::new(2.0 * PI, 256)?;
    let families = [
        StiffnessProfile::Constant { a: 1.0 },
        StiffnessProfile::Exponential { a: 1.0, b: 1.0 },
        StiffnessProfile::GaussianBump { a: 1.0, b: 0.5, c: 2.0, x0: 0.3 },
        StiffnessProfile::PolynomialPositive { coeffs: vec![1.0, 0.5, 0.25] },
    ];
    println!("{:<22} {:>5} {:>12} {:>14} {:>12}", "stiffness", "c0", "|rhs|_inf", "lam_rho", "energy");
    for beta in families {
        for c0 in [0.0, 0.5, 1.0] {
            let state = AngleDensityState::circle(grid, 1, 0.0);
            let params = ModelParams { length: 2.0 * PI, mu: 1.0, c0, omega: 1, beta: beta.clone(), mass: 0.0 };
            let rhs = flow_rhs(&state, &params)?;
            let name = format!("{beta:?}");
            let name = name.split_whitespace().next().unwrap_or_default();
            println!(
                "{name:<22} {c0:>5.2} {:>12.2e} {:>14.6e} {:>12.6}",
                rhs.max_abs(),
                rhs.mult.lam_rho,
                energy(&state, &params)
            );
        }
    }
    Ok(())
}
