//! Writes SVG drawings of the initial and final standard state, a figure
//! eight with rotation index 0, and a doubly wound circle.
//!
//! Usage: `cargo run --example render_svg [OUT_DIR]` (default `render_out`).

use std::f64::consts::PI;
use std::path::PathBuf;

use wireflow::cli::render_svg;
use wireflow::cli::write_atomic;
use wireflow::flow::run_flow;
use wireflow::grid::Grid;
use wireflow::model::reconstruct_curve;
use wireflow::scenario::{InitialFamily, Scenario};
use wireflow::{AngleDensityState, ModelParams};

fn main() -> wireflow::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| wireflow::Error::Validation(format!("{}: {e}", out.display())))?;

    let standard = Scenario::standard();
    let (start, params) = standard.initial_state()?;
    let traj = run_flow(&start, &params, &standard.flow);
    write_atomic(&out.join("standard_start.svg"), render_svg(&start, &params).as_bytes())?;
    write_atomic(&out.join("standard_end.svg"), render_svg(&traj.final_state, &params).as_bytes())?;

    let seed = Scenario {
        params: ModelParams { omega: 0, ..standard.params.clone() },
        initial: InitialFamily::WindingZeroSeed { amplitude: 0.0, rho_mean: 0.0 },
        ..standard.clone()
    };
    let (eight, eight_params) = seed.initial_state()?;
    write_atomic(&out.join("figure_eight.svg"), render_svg(&eight, &eight_params).as_bytes())?;

    let double = AngleDensityState::circle(Grid::new(4.0 * PI, 256)?, 2, 0.0);
    let double_params = ModelParams { length: 4.0 * PI, omega: 2, ..standard.params };
    write_atomic(&out.join("double_circle.svg"), render_svg(&double, &double_params).as_bytes())?;

    for (name, state) in [("figure eight", &eight), ("double circle", &double)] {
        let curve = reconstruct_curve(state, [0.0, 0.0]);
        println!("{name}: turning number {:.6}, closure gap {:.2e}", curve.turning_number(), curve.closure_gap);
    }
    println!("wrote 4 SVG files to {}", out.display());
    Ok(())
}
