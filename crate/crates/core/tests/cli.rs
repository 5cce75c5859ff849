use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use wireflow::cli::{self, ScenarioConfig, SweepAxis, CSV_HEADER};
use wireflow::diagnostics::OrderStudySettings;
use wireflow::flow::{FlowConfig, Scheme};
use wireflow::grid::Grid;
use wireflow::model::{reconstruct_curve, StiffnessProfile};
use wireflow::scenario::{InitialFamily, Scenario};
use wireflow::{AngleDensityState, Error};

fn circle_config() -> ScenarioConfig {
    cli::parse_config(r#"{"initial": {"family": "circle"}}"#, Path::new("circle.json")).unwrap()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn circle_run_is_a_single_stationary_row() {
    let dir = tempfile::tempdir().unwrap();
    let run = cli::cmd_run(&circle_config(), Some(dir.path())).unwrap();
    assert_eq!(run.exit_code(), 0);
    assert_eq!(run.trajectory.terminal.as_str(), "stationary");
    let csv = std::fs::read_to_string(dir.path().join(cli::DIAGNOSTICS_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(!csv.contains('\r'));
    let first = lines[1].split(',').next().unwrap();
    assert_eq!(first, "0.0000000000000000e0");
    assert!(dir.path().join(cli::STATIONARY_FILE).exists());
}

#[test]
fn standard_run_has_monotone_energy() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig::from_scenario(&Scenario::standard(), dir.path());
    let run = cli::cmd_run(&config, None).unwrap();
    assert_eq!(run.exit_code(), 0);
    let csv = std::fs::read_to_string(dir.path().join(cli::DIAGNOSTICS_FILE)).unwrap();
    let energy = csv_column(&csv, "energy");
    assert!(energy.windows(2).all(|w| w[1] <= w[0]));
    assert!(*csv_column(&csv, "grad_norm").last().unwrap() < config.grad_tol);
    let snap = cli::read_snapshot(&dir.path().join(cli::snapshot_file_name(1))).unwrap();
    assert_eq!(snap, run.trajectory.final_state);
}

#[test]
fn unwritable_output_leaves_no_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("run");
    assert!(matches!(cli::cmd_run(&circle_config(), Some(&out)), Err(Error::Io { .. })));
    assert!(!out.join(cli::DIAGNOSTICS_FILE).exists());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn write_atomic_fails_cleanly_in_a_missing_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("x.csv");
    assert!(cli::write_atomic(&target, b"a,b\n").is_err());
    assert!(!target.exists());
}

#[test]
fn load_config_reports_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"mu\": 1,\n  \"gamma\": 2\n}\n").unwrap();
    match cli::load_config(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, r#"{"mu": -1}"#).unwrap();
    assert!(matches!(cli::load_config(&path), Err(Error::Validation(m)) if m.contains("mu must be positive")));
    assert!(matches!(cli::load_config(&dir.path().join("none.json")), Err(Error::Io { .. })));
}

#[test]
fn config_round_trips_through_json() {
    let config = ScenarioConfig::from_scenario(&Scenario::standard(), "out/std");
    let back = cli::parse_config(&config.to_json(), Path::new("x")).unwrap();
    assert_eq!(back, config);
}

#[test]
fn from_snapshot_resumes_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = Scenario::standard().with_n(64).initial_state().unwrap();
    cli::write_snapshot(&dir.path().join("start.json"), &state).unwrap();
    let mut config = ScenarioConfig::from_scenario(&Scenario::standard().with_n(64), "out");
    config.initial = InitialFamily::FromSnapshot { path: "start.json".into() };
    let path = dir.path().join("resume.json");
    std::fs::write(&path, config.to_json()).unwrap();
    let loaded = cli::load_config(&path).unwrap();
    let (resumed, _) = loaded.scenario().initial_state().unwrap();
    assert!(resumed.distance(&state) <= 1e-15);

    config.n = 128;
    std::fs::write(&path, config.to_json()).unwrap();
    let loaded = cli::load_config(&path).unwrap();
    assert!(matches!(loaded.scenario().initial_state(), Err(Error::Validation(_))));
}

fn render_state(state: &AngleDensityState) -> String {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("s.json");
    let svg = dir.path().join("s.svg");
    cli::write_snapshot(&snap, state).unwrap();
    cli::cmd_render(&snap, &svg, None).unwrap();
    std::fs::read_to_string(svg).unwrap()
}

fn stroke_colors(svg: &str) -> std::collections::BTreeSet<String> {
    svg.lines()
        .filter(|l| l.starts_with("<line") && l.contains("stroke=\"#") && !l.contains("stroke-width"))
        .map(|l| l.split("stroke=\"").nth(1).unwrap()[..7].to_string())
        .collect()
}

#[test]
fn circle_renders_as_a_round_closed_polyline() {
    let g = Grid::new(2.0 * PI, 256).unwrap();
    let mut state = AngleDensityState::circle(g, 1, 0.0);
    state.rho = g.sample(|s| 0.1 * s.cos());
    let curve = reconstruct_curve(&state, [0.0, 0.0]);
    let (lo, hi) = curve.bounds();
    for k in 0..2 {
        assert!(((hi[k] - lo[k]) - 2.0).abs() <= 0.02);
    }
    assert!(curve.closure_gap <= g.h() * g.h());
    let svg = render_state(&state);
    assert_eq!(svg.matches("<line").count(), 256 + 1);
    assert!(stroke_colors(&svg).len() > 10);
    assert!(svg.contains("omega = 1"));
    assert!(svg.contains("L/10 = 0.628319"));
    assert_eq!(render_state(&state), svg);
}

#[test]
fn constant_density_renders_in_one_color() {
    let g = Grid::new(2.0 * PI, 64).unwrap();
    let svg = render_state(&AngleDensityState::circle(g, 1, 0.3));
    assert_eq!(stroke_colors(&svg).into_iter().collect::<Vec<_>>(), vec!["#2166ac".to_string()]);
}

#[test]
fn doubly_wound_snapshot_has_turning_number_two() {
    let g = Grid::new(4.0 * PI, 256).unwrap();
    let state = AngleDensityState::circle(g, 2, 0.0);
    let svg = render_state(&state);
    assert!(svg.contains("omega = 2"));
    let turning = reconstruct_curve(&state, [0.0, 0.0]).turning_number();
    assert!((turning - 2.0).abs() < 1e-9);
}

#[test]
fn render_rejects_malformed_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("s.json");
    std::fs::write(&snap, "{\"t\": 0, \"L\": 6.28").unwrap();
    assert!(matches!(cli::cmd_render(&snap, &dir.path().join("o.svg"), None), Err(Error::Parse { .. })));
    assert!(!dir.path().join("o.svg").exists());
}

#[test]
fn c0_sweep_prefers_matching_spontaneous_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = circle_config();
    config.n = 64;
    let rows = cli::cmd_sweep(&config, SweepAxis::C0, &[0.0, 0.5, 1.0], Some(dir.path()), 2).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let expected = 0.5 * 2.0 * PI * (1.0 - r.value).powi(2);
        assert!((r.final_energy - expected).abs() < 1e-12);
    }
    let best = rows.iter().min_by(|a, b| a.final_energy.total_cmp(&b.final_energy)).unwrap();
    assert_eq!(best.value, 1.0);
    let summary = std::fs::read_to_string(dir.path().join(cli::SWEEP_SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("value,final_energy,steps,terminal,final_grad_norm\n"));
    for k in 0..3 {
        assert!(cli::sweep_run_dir(dir.path(), SweepAxis::C0, k).join(cli::DIAGNOSTICS_FILE).exists());
    }
}

#[test]
fn sweep_guards_and_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let config = circle_config();
    assert!(matches!(cli::cmd_sweep(&config, SweepAxis::Mu, &[], Some(dir.path()), 1), Err(Error::Validation(_))));

    let mut sc = Scenario::standard().with_n(64);
    sc.params.beta = StiffnessProfile::Constant { a: 1.0 };
    sc.flow = FlowConfig { scheme: Scheme::ExplicitRk4, t_end: 0.05, ..FlowConfig::fixed_step(1e-3, 0.05) };
    let config = ScenarioConfig::from_scenario(&sc, dir.path());
    let rows = cli::cmd_sweep(&config, SweepAxis::Mu, &[1.0, 10.0], None, 2).unwrap();
    assert_eq!(rows[0].terminal, "reached_t_end");
    assert_eq!(rows[1].terminal, "step_failure");
    assert!(rows[1].error.is_some());
    let summary = std::fs::read_to_string(dir.path().join(cli::SWEEP_SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn amplitude_axis_needs_a_perturbation() {
    assert!(SweepAxis::Amplitude.apply(&circle_config(), 0.1).is_err());
    let config = ScenarioConfig::from_scenario(&Scenario::standard(), "out");
    let swept = SweepAxis::Amplitude.apply(&config, 0.05).unwrap();
    assert!(matches!(swept.initial, InitialFamily::PerturbedCircle { ref amplitudes, .. } if amplitudes == &vec![0.05]));
}

#[test]
fn order_study_guards() {
    let dir = tempfile::tempdir().unwrap();
    let config = ScenarioConfig::from_scenario(&Scenario::standard(), dir.path());
    let st = OrderStudySettings::default();
    assert!(matches!(cli::cmd_order_study(&config, &[64, 128], None, &st), Err(Error::Validation(_))));
    let circle = ScenarioConfig { output_dir: dir.path().into(), ..circle_config() };
    let quick = OrderStudySettings { t_final: 0.01, steps_coarsest: 2 };
    let report = cli::cmd_order_study(&circle, &[16, 32, 64], None, &quick).unwrap();
    assert!(report.below_noise_floor && report.observed_order.is_none());
    let json = std::fs::read_to_string(dir.path().join(cli::ORDER_STUDY_FILE)).unwrap();
    assert!(json.contains("\"observed_order\": null"));
}

fn wireflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wireflow"))
}

#[test]
fn binary_verbs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("circle.json");
    std::fs::write(&cfg, r#"{"n": 64, "initial": {"family": "circle"}}"#).unwrap();
    let out = dir.path().join("run");
    let status = wireflow().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let svg = dir.path().join("c.svg");
    let status = wireflow()
        .args(["render", "--snapshot"])
        .arg(out.join(cli::snapshot_file_name(0)))
        .arg("-o")
        .arg(&svg)
        .status()
        .unwrap();
    assert!(status.success() && svg.exists());

    let sweep = dir.path().join("sweep");
    let status = wireflow()
        .env(cli::THREADS_ENV, "1")
        .args(["sweep", "--axis", "c0", "--values", "0,1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&sweep)
        .status()
        .unwrap();
    assert!(status.success() && sweep.join(cli::SWEEP_SUMMARY_FILE).exists());

    let bad = wireflow()
        .args(["order-study", "--resolutions", "64,128", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("at least 3 resolutions"));

    let fail_cfg = dir.path().join("fail.json");
    std::fs::write(
        &fail_cfg,
        r#"{"n": 64, "mu": 10, "scheme": "explicit_rk4", "dt_init": 0.001, "dt_min": 0.001, "dt_max": 0.001, "t_end": 0.01,
            "initial": {"family": "perturbed_circle", "amplitudes": [0.1], "modes": [2]}}"#,
    )
    .unwrap();
    let status = wireflow().args(["run", "--config"]).arg(&fail_cfg).arg("--out").arg(dir.path().join("f")).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
