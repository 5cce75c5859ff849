//! Drives the standard perturbed circle to a stationary state and polishes
//! the limit with Newton's method.

use std::time::Instant;

use wireflow::flow::run_flow;
use wireflow::scenario::Scenario;
use wireflow::stationary::{newton_iterate, roundoff_floor, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL};

fn main() -> wireflow::Result<()> {
    let scenario = Scenario::standard();
    let (state, params) = scenario.initial_state()?;
    let clock = Instant::now();
    let traj = run_flow(&state, &params, &scenario.flow);
    let last = traj.last();
    println!(
        "flow: {} after {} accepted / {} rejected steps, t = {:.3}, wall {:.2?}",
        traj.terminal.as_str(),
        traj.accepted_steps(),
        traj.rejected,
        last.time,
        clock.elapsed()
    );
    println!("E = {:.15e}, |velocity| = {:.3e}, det Pi = {:.4e}", last.energy, last.grad_norm, last.det_pi);

    let out = newton_iterate(&traj.final_state, &params, DEFAULT_NEWTON_TOL, DEFAULT_NEWTON_MAX_ITER)?;
    println!(
        "newton: {} iterations, residual {:.3e} (tolerance {:.0e}, double precision floor about {:.1e})",
        out.iterations,
        out.residual,
        DEFAULT_NEWTON_TOL,
        roundoff_floor(&out.state, &params)
    );
    println!(
        "residual max norms: theta {:.3e}, rho {:.3e}",
        out.report.residual_theta, out.report.residual_rho
    );
    let (k, f) = (out.kkt, out.report.mult());
    println!(
        "multipliers (KKT vs formula): {:+.12e} {:+.12e} | {:+.12e} {:+.12e} | {:+.12e} {:+.12e}",
        k.lam_theta1, f.lam_theta1, k.lam_theta2, f.lam_theta2, k.lam_rho, f.lam_rho
    );
    println!("gauge multiplier {:.3e}, state moved by {:.3e}", out.gauge, out.state.distance(&traj.final_state));
    Ok(())
}
