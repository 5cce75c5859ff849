//! Configuration files, batch commands and their on-disk formats.
//!
//! All outputs are written to a temporary file in the target directory and
//! renamed into place, so a failed command never leaves a partial file.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{spatial_order_study, OrderStudyReport, OrderStudySettings};
use crate::error::{Error, Result};
use crate::flow::{run_flow, FlowConfig, Scheme, Terminal, Trajectory};
use crate::grid::{Field, Grid};
use crate::model::{energy, reconstruct_curve, AngleDensityState, ModelParams, StiffnessProfile};
use crate::scenario::{InitialFamily, Scenario};
use crate::stationary::stationary_residual;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const STATIONARY_FILE: &str = "stationary.json";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const ORDER_STUDY_FILE: &str = "order_study.json";
pub const THREADS_ENV: &str = "WIREFLOW_THREADS";

pub const CSV_HEADER: &str =
    "t,dt,energy,dissipation,lam_theta1,lam_theta2,lam_rho,gcos,gsin,gmass,mean_theta,grad_norm,det_pi";

fn default_length() -> f64 {
    2.0 * PI
}
fn default_mu() -> f64 {
    1.0
}
fn default_omega() -> i64 {
    1
}
fn default_n() -> usize {
    256
}
fn default_initial() -> InitialFamily {
    InitialFamily::Circle { rho_mean: 0.0 }
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn flow_default<T>(f: impl FnOnce(FlowConfig) -> T) -> T {
    f(FlowConfig::default())
}
fn default_dt_init() -> f64 {
    flow_default(|c| c.dt_init)
}
fn default_dt_min() -> f64 {
    flow_default(|c| c.dt_min)
}
fn default_dt_max() -> f64 {
    flow_default(|c| c.dt_max)
}
fn default_t_end() -> f64 {
    flow_default(|c| c.t_end)
}
fn default_grad_tol() -> f64 {
    flow_default(|c| c.grad_tol)
}
fn default_project_every() -> usize {
    flow_default(|c| c.project_every)
}
fn default_true() -> bool {
    true
}

/// Scenario file contents. Every field has a default:
/// `L = 2 pi`, `mu = 1`, `c0 = 0`, `omega = 1`, constant unit stiffness,
/// `n = 256`, the [`FlowConfig`] defaults, a round circle and `output_dir = "out"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "default_omega")]
    pub omega: i64,
    #[serde(default)]
    pub beta: StiffnessProfile,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_project_every")]
    pub project_every: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_true")]
    pub constrained: bool,
    #[serde(default = "default_initial")]
    pub initial: InitialFamily,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_scenario(scenario: &Scenario, output_dir: impl Into<PathBuf>) -> Self {
        let p = &scenario.params;
        let f = &scenario.flow;
        Self {
            length: p.length,
            mu: p.mu,
            c0: p.c0,
            omega: p.omega,
            beta: p.beta.clone(),
            n: scenario.n,
            dt_init: f.dt_init,
            dt_min: f.dt_min,
            dt_max: f.dt_max,
            t_end: f.t_end,
            grad_tol: f.grad_tol,
            project_every: f.project_every,
            scheme: f.scheme,
            snapshot_every: f.snapshot_every,
            constrained: f.constrained,
            initial: scenario.initial.clone(),
            output_dir: output_dir.into(),
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            params: ModelParams {
                length: self.length,
                mu: self.mu,
                c0: self.c0,
                omega: self.omega,
                beta: self.beta.clone(),
                mass: 0.0,
            },
            n: self.n,
            initial: self.initial.clone(),
            flow: FlowConfig {
                dt_init: self.dt_init,
                dt_min: self.dt_min,
                dt_max: self.dt_max,
                t_end: self.t_end,
                grad_tol: self.grad_tol,
                project_every: self.project_every,
                scheme: self.scheme,
                snapshot_every: self.snapshot_every,
                constrained: self.constrained,
            },
        }
    }

    /// Checks every embedded invariant without sampling the initial data.
    pub fn validate(&self) -> Result<()> {
        let sc = self.scenario();
        sc.params.validate().map_err(to_validation)?;
        sc.flow.validate()?;
        sc.grid().map_err(to_validation)?;
        sc.initial.validate(self.omega)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }
}

fn to_validation(e: Error) -> Error {
    match e {
        Error::Model(m) | Error::Grid(m) => Error::Validation(m),
        other => other,
    }
}

/// Reads and validates a JSON scenario file. Unknown keys are rejected.
/// A relative `from_snapshot` path is resolved against the config's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text, path)?;
    if let InitialFamily::FromSnapshot { path: snap } = &mut config.initial {
        if snap.is_relative() {
            if let Some(dir) = path.parent() {
                *snap = dir.join(&*snap);
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Parses config text; `origin` only labels errors.
pub fn parse_config(text: &str, origin: &Path) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotFile {
    t: f64,
    #[serde(rename = "L")]
    length: f64,
    omega: i64,
    n: usize,
    theta: Vec<f64>,
    rho: Vec<f64>,
}

/// Snapshot JSON with keys `t, L, omega, n, theta, rho`. Numbers use the
/// shortest representation that round-trips exactly.
pub fn snapshot_json(state: &AngleDensityState) -> String {
    let file = SnapshotFile {
        t: state.time,
        length: state.grid().length(),
        omega: state.omega,
        n: state.grid().n(),
        theta: state.theta.values().to_vec(),
        rho: state.rho.values().to_vec(),
    };
    serde_json::to_string(&file).expect("snapshot serialises") + "\n"
}

pub fn parse_snapshot(text: &str, origin: &Path) -> Result<AngleDensityState> {
    let file: SnapshotFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let malformed = |message: String| Error::Parse { path: origin.to_path_buf(), line: 0, column: 0, message };
    if file.theta.len() != file.n || file.rho.len() != file.n {
        return Err(malformed(format!(
            "n = {} but theta has {} and rho has {} entries",
            file.n,
            file.theta.len(),
            file.rho.len()
        )));
    }
    if !(file.t.is_finite() && file.t >= 0.0) {
        return Err(malformed(format!("t must be finite and nonnegative, got {}", file.t)));
    }
    let grid = Grid::new(file.length, file.n).map_err(|e| malformed(e.to_string()))?;
    let theta = Field::new(grid, file.theta).map_err(|e| malformed(e.to_string()))?;
    let rho = Field::new(grid, file.rho).map_err(|e| malformed(e.to_string()))?;
    AngleDensityState::new(theta, rho, file.omega, file.t).map_err(|e| malformed(e.to_string()))
}

pub fn read_snapshot(path: &Path) -> Result<AngleDensityState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, path)
}

pub fn write_snapshot(path: &Path, state: &AngleDensityState) -> Result<()> {
    write_atomic(path, snapshot_json(state).as_bytes())
}

/// Writes through a temporary file in the same directory and renames it
/// into place. The directory must already exist.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Diagnostics table, one row per accepted state, 17 significant digits.
pub fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(256 * (traj.diagnostics.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for d in &traj.diagnostics {
        let row = [
            d.time,
            d.dt,
            d.energy,
            d.dissipation,
            d.mult.lam_theta1,
            d.mult.lam_theta2,
            d.mult.lam_rho,
            d.gcos,
            d.gsin,
            d.gmass,
            d.mean_theta,
            d.grad_norm,
            d.det_pi,
        ];
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("snapshot_{index:06}.json")
}

/// Summary of one `run`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub params: ModelParams,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    /// 0 when the run reached `t_end` or stationarity, 1 on step failure.
    pub fn exit_code(&self) -> i32 {
        match self.trajectory.terminal {
            Terminal::StepFailure => 1,
            _ => 0,
        }
    }
}

/// Runs the scenario and writes `diagnostics.csv`, one `snapshot_NNNNNN.json`
/// per kept snapshot and `stationary.json` for the final state into `out`
/// (default: the config's `output_dir`). The directory is created if missing.
pub fn cmd_run(config: &ScenarioConfig, out: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    let (state, params) = config.scenario().initial_state()?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let scenario = config.scenario();
    let trajectory = run_flow(&state, &params, &scenario.flow);
    write_atomic(&out.join(DIAGNOSTICS_FILE), diagnostics_csv(&trajectory).as_bytes())?;
    for (k, snap) in trajectory.snapshots.iter().enumerate() {
        write_snapshot(&out.join(snapshot_file_name(k)), snap)?;
    }
    let report = stationary_residual(&trajectory.final_state, &params)?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    write_atomic(&out.join(STATIONARY_FILE), json.as_bytes())?;
    Ok(RunOutcome { trajectory, params, output_dir: out })
}

/// Low end of the density color ramp.
pub const RAMP_LOW: [u8; 3] = [0x21, 0x66, 0xac];
/// High end of the density color ramp.
pub const RAMP_HIGH: [u8; 3] = [0xb2, 0x18, 0x2b];

/// Linear sRGB interpolation between [`RAMP_LOW`] (at `min`) and [`RAMP_HIGH`]
/// (at `max`). A degenerate range maps everything to the low color.
pub fn ramp_color(value: f64, min: f64, max: f64) -> String {
    let t = if max > min { ((value - min) / (max - min)).clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = RAMP_LOW
        .iter()
        .zip(RAMP_HIGH)
        .map(|(&a, b)| (a as f64 + t * (b as f64 - a as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 50.0;

/// SVG drawing of the curve with each segment colored by its mean density,
/// a scale bar of length `L/10` and a caption with `t`, `E` and `omega`.
pub fn render_svg(state: &AngleDensityState, params: &ModelParams) -> String {
    let curve = reconstruct_curve(state, [0.0, 0.0]);
    let (lo, hi) = curve.bounds();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    let map = |p: [f64; 2]| (0.5 * CANVAS + scale * (p[0] - cx), 0.5 * CANVAS - scale * (p[1] - cy));

    let rho = state.rho.values();
    let n = rho.len();
    let (rmin, rmax) = rho.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{h}" viewBox="0 0 {c} {h}">"#,
        c = CANVAS,
        h = CANVAS + 40.0
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g stroke-width="2" stroke-linecap="round">"#);
    for i in 0..n {
        let (x1, y1) = map(curve.points[i]);
        let (x2, y2) = map(curve.points[i + 1]);
        let color = ramp_color(0.5 * (rho[i] + rho[(i + 1) % n]), rmin, rmax);
        let _ = writeln!(svg, r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{color}"/>"#);
    }
    let _ = writeln!(svg, "</g>");

    let bar = scale * state.grid().length() / 10.0;
    let y = CANVAS - 0.5 * MARGIN;
    let _ = writeln!(
        svg,
        r#"<line x1="{x1:.3}" y1="{y:.3}" x2="{x2:.3}" y2="{y:.3}" stroke="black" stroke-width="3"/>"#,
        x1 = MARGIN,
        x2 = MARGIN + bar
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x:.3}" y="{ty:.3}" font-family="sans-serif" font-size="12">L/10 = {len:.6}</text>"#,
        x = MARGIN,
        ty = y - 6.0,
        len = state.grid().length() / 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x:.3}" y="{ty:.3}" font-family="sans-serif" font-size="14">t = {t:.6e}, E = {e:.12e}, omega = {w}</text>"#,
        x = MARGIN,
        ty = CANVAS + 25.0,
        t = state.time,
        e = energy(state, params),
        w = state.omega
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x:.3}" y="{ty:.3}" font-family="sans-serif" font-size="12">rho in [{rmin:.6e}, {rmax:.6e}]</text>"#,
        x = CANVAS - 260.0,
        ty = y - 6.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Model used for the caption energy: the config's when given, otherwise
/// unit stiffness, `mu = 1`, `c0 = 0` on the snapshot's length and winding.
pub fn render_params(state: &AngleDensityState, config: Option<&ScenarioConfig>) -> ModelParams {
    match config {
        Some(c) => c.scenario().params,
        None => ModelParams {
            length: state.grid().length(),
            mu: 1.0,
            c0: 0.0,
            omega: state.omega,
            beta: StiffnessProfile::Constant { a: 1.0 },
            mass: 0.0,
        },
    }
}

pub fn cmd_render(snapshot: &Path, out_svg: &Path, config: Option<&ScenarioConfig>) -> Result<()> {
    let state = read_snapshot(snapshot)?;
    let params = render_params(&state, config);
    write_atomic(out_svg, render_svg(&state, &params).as_bytes())
}

/// Scalar a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Mu,
    C0,
    /// Every angle amplitude of a perturbed circle, or the seed amplitude.
    Amplitude,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepAxis::Mu),
            "c0" => Ok(SweepAxis::C0),
            "amplitude" => Ok(SweepAxis::Amplitude),
            other => Err(Error::Validation(format!("unknown sweep axis {other:?}; expected mu, c0 or amplitude"))),
        }
    }
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::C0 => "c0",
            SweepAxis::Amplitude => "amplitude",
        }
    }

    pub fn apply(&self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = config.clone();
        match self {
            SweepAxis::Mu => c.mu = value,
            SweepAxis::C0 => c.c0 = value,
            SweepAxis::Amplitude => match &mut c.initial {
                InitialFamily::PerturbedCircle { amplitudes, .. } if !amplitudes.is_empty() => {
                    amplitudes.iter_mut().for_each(|a| *a = value)
                }
                InitialFamily::WindingZeroSeed { amplitude, .. } => *amplitude = value,
                _ => {
                    return Err(Error::Validation(
                        "the amplitude axis needs a perturbed_circle with modes or a winding_zero_seed".into(),
                    ))
                }
            },
        }
        Ok(c)
    }
}

/// One line of the sweep summary. Runs that could not start have terminal
/// `error` and NaN numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub final_energy: f64,
    pub steps: usize,
    pub terminal: String,
    pub final_grad_norm: f64,
    pub error: Option<String>,
}

/// Sweep concurrency from `WIREFLOW_THREADS`; unset or invalid means all
/// logical processors.
pub fn sweep_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sweep_run_dir(out: &Path, axis: SweepAxis, index: usize) -> PathBuf {
    out.join(format!("{}_{index:03}", axis.as_str()))
}

/// Runs one scenario per value, at most `threads` at a time, each into its
/// own subdirectory of `out`, then writes `sweep_summary.csv` in value order.
/// A failing run is recorded in its row and does not affect the others.
pub fn cmd_sweep(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    out: Option<&Path>,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Validation("sweep needs at least one value".into()));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot build sweep thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &value)| {
                let result = axis
                    .apply(config, value)
                    .and_then(|c| cmd_run(&c, Some(&sweep_run_dir(&out, axis, k))));
                match result {
                    Ok(run) => {
                        let last = run.trajectory.last();
                        SweepRow {
                            value,
                            final_energy: last.energy,
                            steps: run.trajectory.accepted_steps(),
                            terminal: run.trajectory.terminal.as_str().to_string(),
                            final_grad_norm: last.grad_norm,
                            error: run.trajectory.failure.clone(),
                        }
                    }
                    Err(e) => SweepRow {
                        value,
                        final_energy: f64::NAN,
                        steps: 0,
                        terminal: "error".into(),
                        final_grad_norm: f64::NAN,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    write_atomic(&out.join(SWEEP_SUMMARY_FILE), sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,final_energy,steps,terminal,final_grad_norm\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{},{},{:.16e}",
            r.value, r.final_energy, r.steps, r.terminal, r.final_grad_norm
        );
    }
    out
}

/// Spatial order study over `resolutions`, written to `order_study.json`.
pub fn cmd_order_study(
    config: &ScenarioConfig,
    resolutions: &[usize],
    out: Option<&Path>,
    settings: &OrderStudySettings,
) -> Result<OrderStudyReport> {
    config.validate()?;
    let report = spatial_order_study(&config.scenario(), resolutions, settings)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    write_atomic(&out.join(ORDER_STUDY_FILE), json.as_bytes())?;
    Ok(report)
}

/// Parses a comma-separated list such as `0,0.5,1`.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Validation(format!("bad list entry {s:?}: {e}"))))
        .collect()
}
