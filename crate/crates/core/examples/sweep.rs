//! Sweeps the spontaneous curvature on the round circle. With constant
//! stiffness the energy of the circle is `L (2 pi / L - c0)^2 / 2`, smallest
//! when `c0` matches the circle's curvature.
//!
//! Concurrency follows `WIREFLOW_THREADS` (all cores when unset).

use std::path::Path;

use wireflow::cli::{cmd_sweep, parse_config, sweep_csv, sweep_threads, SweepAxis};

fn main() -> wireflow::Result<()> {
    let config = parse_config(r#"{"n": 128, "initial": {"family": "circle"}}"#, Path::new("inline"))?;
    let out = tempfile::tempdir().map_err(|e| wireflow::Error::Validation(e.to_string()))?;
    let values = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25];
    let rows = cmd_sweep(&config, SweepAxis::C0, &values, Some(out.path()), sweep_threads())?;
    print!("{}", sweep_csv(&rows));
    for r in &rows {
        let expected = std::f64::consts::PI * (1.0 - r.value).powi(2);
        assert!((r.final_energy - expected).abs() < 1e-12);
    }
    Ok(())
}
