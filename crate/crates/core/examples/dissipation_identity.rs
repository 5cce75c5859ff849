//! Checks `dE/dt = -|d_t theta|^2 - |d_t rho|^2` along fixed-step runs.
//! The residual of the one-sided difference quotient is first order in dt.

use wireflow::diagnostics::dissipation_audit;
use wireflow::flow::{run_flow, FlowConfig};
use wireflow::scenario::Scenario;

fn main() -> wireflow::Result<()> {
    let (state, params) = Scenario::standard().initial_state()?;
    let mut previous: Option<f64> = None;
    for dt in [2e-3, 1e-3, 5e-4, 2.5e-4] {
        let traj = run_flow(&state, &params, &FlowConfig::fixed_step(dt, 1.0));
        let audit = dissipation_audit(&traj);
        let ratio = previous.map(|p| format!("{:.3}", p / audit.time_average)).unwrap_or_default();
        println!(
            "dt = {dt:.1e}: mean residual {:.4e}, max {:.4e}, ratio {ratio}",
            audit.time_average, audit.max
        );
        previous = Some(audit.time_average);
    }
    Ok(())
}
