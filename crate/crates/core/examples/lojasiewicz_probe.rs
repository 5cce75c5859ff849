//! Fits the decay of `E - E_inf` against the velocity norm near the limit.
//! Near a nondegenerate minimum both decay like the slowest linear mode, so
//! the slope is about 2 and the implied exponent about 1/2.

use wireflow::diagnostics::lojasiewicz_probe;
use wireflow::flow::run_flow;
use wireflow::scenario::Scenario;

fn main() -> wireflow::Result<()> {
    for (label, scenario) in [("linear basin", Scenario::linear_basin()), ("standard", Scenario::standard())] {
        let (state, params) = scenario.initial_state()?;
        let traj = run_flow(&state, &params, &scenario.flow);
        let fit = lojasiewicz_probe(&traj, 0.5)?;
        println!(
            "{label:<13} slope {:.4}, theta_hat {:.4}, R^2 {:.6}, {} points",
            fit.slope,
            fit.theta_hat.unwrap_or(f64::NAN),
            fit.r_squared,
            fit.points
        );
    }
    Ok(())
}
