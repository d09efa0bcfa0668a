//! Command-line front end: configuration loading, command dispatch and file
//! emission.
//!
//! A run is configured by an optional JSON file (`--config`) with flags
//! layered on top. Everything is resolved and validated before the first
//! file is written; each output goes through a temporary file and an atomic
//! rename.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, Matrix3, RowVector3};
use serde::{Deserialize, Serialize};

use crate::actuators::{GyroState, ServoState};
use crate::care::{care_residual, gamma_search, GammaSearch, HinfSolution, StateSpace};
use crate::controller::reference::{calibrated_weighting, DesignCase};
use crate::controller::{gain_from_solution, synthesize, DesignPoint, Synthesis};
use crate::error::Error;
use crate::norm::hinf_norm;
use crate::simulator::{
    run_scenario, ActuatorMode, DisturbanceSpec, FeedbackSource, Metrics, PlantMode, Scenario,
};
use crate::vehicle::{CoefficientSchedule, CommandProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "hinf-autopilot", version, about = "H-infinity pitch autopilot synthesis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati equation at the design point and write the gain.
    Synthesize,
    /// Run a closed-loop scenario and write its trace and metrics.
    Simulate,
    /// Print the H-infinity norm of a built-in model or a JSON state-space file.
    Norm {
        /// `gyro`, `servo`, `closed-loop`, or a path to {"a","b","c","d"} JSON.
        target: String,
    },
    /// Bisect for the smallest feasible gamma at the design point.
    GammaSearch {
        #[arg(long, default_value_t = 1e-2)]
        lower: f64,
        #[arg(long, default_value_t = 1e3)]
        upper: f64,
        /// Relative tolerance on gamma.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Compare both published design points with the printed matrices.
    ReproducePaper,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "HINF_AUTOPILOT_OUT")]
    pub out: Option<PathBuf>,
    /// Built-in scenario: paper-ltv, paper-lti or zero.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Attenuation level for synthesis.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Design time along the coefficient schedule, s.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub design_time: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub plant_mode: Option<PlantModeArg>,
    /// Rate source for the controller's error channel.
    #[arg(long, global = true, value_enum)]
    pub feedback: Option<FeedbackArg>,
    /// Integration step, s (at most 1e-3).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Seed for noise disturbances.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Coefficient schedule CSV (t,Zv,Zq,Ztheta,Zdelta,Mv,Mq,Mdelta).
    #[arg(long, global = true)]
    pub schedule: Option<PathBuf>,
    /// Command profile CSV (t,qc_deg_per_s).
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum PlantModeArg {
    #[serde(rename = "ltv")]
    Ltv,
    #[serde(rename = "lti")]
    Lti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum FeedbackArg {
    #[serde(rename = "true")]
    True,
    #[serde(rename = "gyro")]
    Gyro,
}

/// Named performance weightings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Fitted diagonal weighting of the nearest published design point.
    #[default]
    PaperCalibrated,
    Identity,
    /// `C = [0 1 0]`
    RateError,
}

/// Contents of a `--config` file. Angles are in degrees, other quantities
/// in SI units; relative paths are taken from the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub design_time: Option<f64>,
    pub plant_mode: Option<PlantModeArg>,
    pub feedback: Option<FeedbackArg>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub schedule: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub t_span: Option<(f64, f64)>,
    pub disturbances: Option<DisturbanceSpec>,
    pub weighting: Option<Weighting>,
    /// Explicit performance weighting, rows of length 3; wins over `weighting`.
    pub c_perf: Option<Vec<Vec<f64>>>,
    pub actuator: Option<ActuatorMode>,
    /// `[∫e deg, e deg/s, v_z m/s]`
    pub initial_state: Option<[f64; 3]>,
    pub record_every: Option<usize>,
}

/// A failure mapped to an exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config_error",
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "io_error",
            message: format!("{}: {err}", path.display()),
        }
    }

    /// `error=<kind> exit=<code> message=<text>` on one line.
    pub fn line(&self) -> String {
        let msg = self.message.replace(['\n', '\r'], " ");
        format!("error={} exit={} message={msg}", self.kind, self.code)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let (code, kind) = match &err {
            Error::NoStabilizingSolution(_)
            | Error::IndefiniteSolution { .. }
            | Error::ClosedLoopUnstable { .. }
            | Error::BracketInvalid { .. }
            | Error::SynthesisFailed(_) => (EXIT_INFEASIBLE, "synthesis_infeasible"),
            Error::NonFiniteState { .. } | Error::NonFiniteDerivative { .. } => {
                (EXIT_DIVERGED, "simulation_diverged")
            }
            Error::NoConvergence | Error::UnstableSystem { .. } => (EXIT_CONFIG, "numerical_error"),
            _ => (EXIT_CONFIG, "config_error"),
        };
        Self {
            code,
            kind,
            message: err.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(opts: &Options) -> CliResult<Self> {
        let (file, base) = match &opts.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let cfg: FileConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                (cfg, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rebase = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let name = opts.scenario.clone().or(file.scenario).unwrap_or_else(|| "paper-lti".into());
        let mut s = Scenario::builtin(&name).ok_or_else(|| {
            CliError::config(format!(
                "unknown scenario {name:?} (expected one of {})",
                Scenario::BUILTIN_NAMES.join(", ")
            ))
        })?;

        if let Some(path) = opts.schedule.clone().or(file.schedule.map(&rebase)) {
            let f = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
            s.schedule = CoefficientSchedule::read_csv(f).map_err(CliError::from)?;
        }
        if let Some(path) = opts.profile.clone().or(file.profile.map(&rebase)) {
            let f = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
            s.profile = CommandProfile::read_csv(f).map_err(CliError::from)?;
        }
        if let Some(span) = file.t_span {
            s.t_span = span;
        }
        if let Some(d) = file.disturbances {
            s.disturbances = d;
        }
        if let Some(seed) = opts.seed.or(file.seed) {
            s.disturbances.seed = seed;
        }
        if let Some(dt) = opts.dt.or(file.dt) {
            s.dt = dt;
        }
        if let Some(mode) = opts.plant_mode.or(file.plant_mode) {
            s.plant_mode = match mode {
                PlantModeArg::Ltv => PlantMode::Ltv,
                PlantModeArg::Lti => PlantMode::LtiFrozen,
            };
        }
        if let Some(fb) = opts.feedback.or(file.feedback) {
            s.feedback_source = match fb {
                FeedbackArg::True => FeedbackSource::TrueState,
                FeedbackArg::Gyro => FeedbackSource::GyroRate,
            };
        }
        if let Some(a) = file.actuator {
            s.actuator = a;
        }
        if let Some(x) = file.initial_state {
            let d = std::f64::consts::PI / 180.0;
            s.initial_state = nalgebra::Vector3::new(x[0] * d, x[1] * d, x[2]);
        }
        if let Some(n) = file.record_every {
            s.record_every = n;
        }

        let t_design = opts.design_time.or(file.design_time).unwrap_or(s.design.t_design);
        let gamma = opts.gamma.or(file.gamma).unwrap_or(s.design.gamma);
        let c_perf = match (file.c_perf, file.weighting) {
            (Some(rows), _) => matrix_from_rows(&rows, 3).map_err(CliError::config)?,
            (None, Some(w)) => weighting_matrix(w, t_design),
            (None, None) if t_design == s.design.t_design => s.design.c_perf.clone(),
            (None, None) => weighting_matrix(Weighting::PaperCalibrated, t_design),
        };
        s.design = DesignPoint::from_schedule(&s.schedule, t_design, gamma, c_perf).map_err(CliError::from)?;
        s.validate().map_err(CliError::from)?;

        let out = opts.out.clone().or(file.out.map(&rebase)).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self { scenario: s, out })
    }
}

pub fn weighting_matrix(w: Weighting, t_design: f64) -> DMatrix<f64> {
    match w {
        Weighting::PaperCalibrated => {
            let case = DesignCase::ALL
                .into_iter()
                .min_by(|a, b| (a.t_design() - t_design).abs().total_cmp(&(b.t_design() - t_design).abs()))
                .expect("two cases");
            calibrated_weighting(case)
        }
        Weighting::Identity => DMatrix::identity(3, 3),
        Weighting::RateError => DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> std::result::Result<DMatrix<f64>, String> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(format!("matrix rows must all have {cols} entries"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpaceFile {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    #[serde(default)]
    d: Option<Vec<Vec<f64>>>,
}

fn read_state_space(path: &Path) -> CliResult<StateSpace> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f: StateSpaceFile = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let n = f.a.len();
    let a = matrix_from_rows(&f.a, n).map_err(CliError::config)?;
    let m = f.b.first().map_or(0, Vec::len);
    let b = matrix_from_rows(&f.b, m).map_err(CliError::config)?;
    let c = matrix_from_rows(&f.c, n).map_err(CliError::config)?;
    let d = match f.d {
        Some(rows) => matrix_from_rows(&rows, m).map_err(CliError::config)?,
        None => DMatrix::zeros(c.nrows(), m),
    };
    Ok(StateSpace::new(a, b, c, d)?)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and an atomic rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("plain data serializes");
    v.push(b'\n');
    v
}

#[derive(Serialize)]
struct SynthesisReport<'a> {
    design: &'a DesignPoint,
    #[serde(serialize_with = "crate::care::ser_matrix")]
    k: DMatrix<f64>,
    #[serde(flatten)]
    solution: &'a HinfSolution,
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    let cells: Vec<String> = values.into_iter().map(|v| format!("{v:>10.4}")).collect();
    format!("[{}]", cells.join(", "))
}

fn fmt_matrix(m: &DMatrix<f64>, indent: &str) -> String {
    m.row_iter()
        .map(|r| format!("{indent}{}\n", fmt_row(r.iter().copied())))
        .collect()
}

fn synthesis_table(s: &Synthesis) -> String {
    let mut t = String::new();
    let d = s.gain.origin.as_ref().expect("synthesized gains carry their design point");
    let _ = writeln!(t, "design time {} s, gamma {}", d.t_design, s.solution.gamma);
    let _ = writeln!(t, "X:");
    t.push_str(&fmt_matrix(&s.solution.x, "  "));
    let _ = writeln!(t, "K: {}", fmt_row(s.gain.k.iter().copied()));
    let eigs: Vec<String> = s
        .solution
        .nominal_closed_loop_eigs
        .iter()
        .map(|l| format!("{:.4}{:+.4}i", l.re, l.im))
        .collect();
    let _ = writeln!(t, "eig(A - BK): {}", eigs.join(", "));
    let _ = writeln!(t, "Riccati residual: {:.3e}", s.solution.residual);
    for w in &s.solution.warnings {
        let _ = writeln!(t, "warning: {w}");
    }
    t
}

fn cmd_synthesize(cfg: &RunConfig) -> CliResult<String> {
    let s = synthesize(&cfg.scenario.design)?;
    let report = SynthesisReport {
        design: &cfg.scenario.design,
        k: s.gain.as_matrix(),
        solution: &s.solution,
    };
    let path = cfg.out.join("synthesis.json");
    write_atomic(&path, &to_json(&report))?;
    Ok(format!("{}wrote {}\n", synthesis_table(&s), path.display()))
}

fn cmd_simulate(cfg: &RunConfig) -> CliResult<String> {
    let run = run_scenario(&cfg.scenario)?;
    let mut csv = Vec::new();
    run.trace.write_csv(&mut csv)?;
    let trace_path = cfg.out.join("trace.csv");
    let metrics = match run.outcome {
        Ok(m) => m,
        Err(e) => {
            write_atomic(&trace_path, &csv)?;
            return Err(e.into());
        }
    };
    let metrics_path = cfg.out.join("metrics.json");
    write_atomic(&trace_path, &csv)?;
    write_atomic(&metrics_path, &to_json(&metrics))?;
    Ok(format!(
        "{}\nwrote {} ({} samples) and {}\n",
        metrics_table(&cfg.scenario.name, &metrics),
        trace_path.display(),
        run.trace.len(),
        metrics_path.display()
    ))
}

fn metrics_table(label: &str, m: &Metrics) -> String {
    format!(
        "{label}: rms_e {:.4e} rad/s, max|e| {:.4e} rad/s, rms theta_err {:.4e} rad, max|delta| {:.4} rad, \
         rate-limited {:.4}, energy ratio {:.4e}",
        m.rms_e, m.max_abs_e, m.rms_theta_err, m.max_abs_delta, m.servo_saturation_fraction, m.energy_ratio
    )
}

fn cmd_norm(cfg: &RunConfig, target: &str) -> CliResult<String> {
    let sys = match target {
        "gyro" => GyroState::new(0.0).linear_model(),
        "servo" => ServoState::new(0.0).linear_model(),
        "closed-loop" => {
            let s = synthesize(&cfg.scenario.design)?;
            StateSpace::closed_loop(
                &s.plant.a_dyn(),
                &s.plant.b_dyn(),
                &s.plant.bw_dyn(),
                &cfg.scenario.design.c_perf,
                &s.gain.as_matrix(),
            )?
        }
        path => read_state_space(Path::new(path))?,
    };
    Ok(format!("{}\n", hinf_norm(&sys, NORM_TOL)?))
}

fn cmd_gamma_search(cfg: &RunConfig, lower: f64, upper: f64, tol: f64) -> CliResult<String> {
    let p = cfg.scenario.design.care_problem()?;
    let GammaSearch { gamma_min, history } = gamma_search(&p.a, &p.b, &p.bw, &p.c, (lower, upper), tol)?;
    let mut t = format!("gamma_min {gamma_min}\n");
    for (i, probe) in history.iter().enumerate() {
        let verdict = match (&probe.reason, probe.feasible) {
            (_, true) => "feasible".to_string(),
            (Some(r), false) => format!("infeasible: {r}"),
            (None, false) => "infeasible".to_string(),
        };
        let _ = writeln!(t, "{i:>3}  gamma {:<22} {verdict}", probe.gamma);
    }
    Ok(t)
}

fn deviation_block(label: &str, computed: &DMatrix<f64>, printed: &DMatrix<f64>) -> String {
    let mut t = format!("  {label}\n");
    for i in 0..computed.nrows() {
        let c = computed.row(i);
        let p = printed.row(i);
        let d = c - p;
        let _ = writeln!(
            t,
            "    {}  {}  {}",
            fmt_row(c.iter().copied()),
            fmt_row(p.iter().copied()),
            fmt_row(d.iter().copied())
        );
    }
    t
}

fn m3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

fn r3(r: &RowVector3<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 3, r.as_slice())
}

pub fn reproduce_report() -> CliResult<String> {
    let mut t = String::new();
    for case in [DesignCase::T60, DesignCase::T100] {
        let design = match case {
            DesignCase::T60 => DesignPoint::paper_lti(),
            DesignCase::T100 => DesignPoint::paper_ltv(),
        };
        let s = synthesize(&design)?;
        let printed_x = m3(&case.printed_x());
        let _ = writeln!(t, "== {} ==", case.label());
        let q: Vec<String> = (design.c_perf.transpose() * &design.c_perf)
            .diagonal()
            .iter()
            .map(|v| format!("{v:.5e}"))
            .collect();
        let _ = writeln!(t, "  weighting diag(C'C) = [{}]", q.join(", "));
        let _ = writeln!(t, "  columns: computed | published | deviation");
        t.push_str(&deviation_block("X", &s.solution.x, &printed_x));
        let (published_k, k_label) = match case.printed_gain() {
            Some(k) => (r3(&k), "K (published: printed gain)"),
            None => {
                let k = gain_from_solution(&s.plant.b_dyn(), &printed_x)?;
                (k.as_matrix(), "K (published: B' times printed X)")
            }
        };
        t.push_str(&deviation_block(k_label, &s.gain.as_matrix(), &published_k));
        let max_dev = (&s.solution.x - &printed_x).abs().max();
        let _ = writeln!(t, "  max |X - X_published| = {max_dev:.4e}");
        let _ = writeln!(t, "  Riccati residual of computed X = {:.3e}", s.solution.residual);
        let printed_res = care_residual(&design.care_problem()?, &printed_x)?;
        let _ = writeln!(t, "  Riccati residual of printed X  = {printed_res:.4e}");
        t.push('\n');
    }

    let _ = writeln!(t, "== closed-loop runs (qualitative comparison) ==");
    for scenario in [Scenario::paper_ltv(), Scenario::paper_lti()] {
        let run = run_scenario(&scenario)?;
        match run.outcome {
            Ok(m) => {
                let _ = writeln!(t, "  {}", metrics_table(&scenario.name, &m));
            }
            Err(e) => {
                let _ = writeln!(t, "  {}: {e}", scenario.name);
            }
        }
    }
    Ok(t)
}

fn cmd_reproduce(cfg: &RunConfig, write: bool) -> CliResult<String> {
    let report = reproduce_report()?;
    if write {
        write_atomic(&cfg.out.join("reproduce-paper.txt"), report.as_bytes())?;
    }
    Ok(report)
}

/// Runs one parsed invocation and returns its standard output.
pub fn run(cli: &Cli) -> CliResult<String> {
    let cfg = RunConfig::resolve(&cli.opts)?;
    match &cli.command {
        Command::Synthesize => cmd_synthesize(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Norm { target } => cmd_norm(&cfg, target),
        Command::GammaSearch { lower, upper, tol } => cmd_gamma_search(&cfg, *lower, *upper, *tol),
        Command::ReproducePaper => cmd_reproduce(&cfg, cli.opts.out.is_some()),
    }
}

/// Parses arguments, runs, prints, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}
