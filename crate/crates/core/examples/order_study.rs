//! Spatial convergence with `dt ~ h^2` on the standard scenario, and the
//! same study on the heat sub-problem against its exact solution.

use std::f64::consts::PI;

use wireflow::diagnostics::{spatial_order_study, spatial_order_study_exact, OrderStudySettings};
use wireflow::flow::FlowConfig;
use wireflow::grid::Grid;
use wireflow::scenario::{InitialFamily, Scenario};
use wireflow::{AngleDensityState, ModelParams, StiffnessProfile};

fn main() -> wireflow::Result<()> {
    let settings = OrderStudySettings::default();
    let report = spatial_order_study(&Scenario::standard(), &[64, 128, 256, 512], &settings)?;
    println!("standard scenario (successive differences)");
    for (n, e) in report.resolutions.iter().zip(&report.errors) {
        println!("  n = {n:>4}: {e:.4e}");
    }
    println!("  observed order {:.4}", report.observed_order.unwrap_or(f64::NAN));

    let (a, mu) = (0.1, 0.5);
    let heat = Scenario {
        params: ModelParams {
            length: 2.0 * PI,
            mu,
            c0: 0.0,
            omega: 1,
            beta: StiffnessProfile::Constant { a: 1.0 },
            mass: 0.0,
        },
        n: 64,
        initial: InitialFamily::PerturbedCircle {
            amplitudes: vec![a],
            modes: vec![1],
            rho_amplitudes: vec![a],
            rho_modes: vec![1],
            rho_mean: 0.0,
        },
        flow: FlowConfig { constrained: false, project_every: 0, ..FlowConfig::default() },
    };
    let exact = |g: Grid, t: f64| {
        let theta = g.sample(|s| s + a * (-t).exp() * s.sin());
        let rho = g.sample(|s| a * (-mu * t).exp() * s.cos());
        AngleDensityState::new(theta, rho, 1, t).expect("finite exact solution")
    };
    let report = spatial_order_study_exact(&heat, &[32, 64, 128, 256], &settings, exact)?;
    println!("heat sub-problem (exact reference)");
    for (n, e) in report.resolutions.iter().zip(&report.errors) {
        println!("  n = {n:>4}: {e:.4e}");
    }
    println!("  observed order {:.4}", report.observed_order.unwrap_or(f64::NAN));
    Ok(())
}
