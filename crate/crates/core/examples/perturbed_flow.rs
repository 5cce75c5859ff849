//! Runs the standard perturbed circle with the adaptive semi-implicit scheme
//! and audits the conserved quantities along the way.

use wireflow::diagnostics::conservation_audit;
use wireflow::flow::run_flow;
use wireflow::scenario::Scenario;

fn main() -> wireflow::Result<()> {
    let scenario = Scenario::standard();
    let (state, params) = scenario.initial_state()?;
    let traj = run_flow(&state, &params, &scenario.flow);

    println!("{:>10} {:>10} {:>22} {:>12}", "t", "dt", "energy", "|velocity|");
    let rows = &traj.diagnostics;
    let stride = (rows.len() / 15).max(1);
    for d in rows.iter().step_by(stride).chain(std::iter::once(traj.last())) {
        println!("{:>10.4} {:>10.2e} {:>22.15e} {:>12.3e}", d.time, d.dt, d.energy, d.grad_norm);
    }

    let audit = conservation_audit(&traj);
    println!(
        "\n{} after {} steps ({} rejected)",
        traj.terminal.as_str(),
        traj.accepted_steps(),
        traj.rejected
    );
    println!("drift: mass {:.2e}, mean angle {:.2e}, winding {}", audit.gmass, audit.mean_theta, audit.winding);
    println!("largest closure defect {:.2e}", audit.max_closure_defect);
    Ok(())
}
