//! Command-line front end: `design`, `calibrate`, `oc`, `compare`,
//! `diagnose`, `conduct` and `serve`.
//!
//! Results go to stdout (or `--out`); errors are reported on stderr as a
//! JSON document `{code, message, field?}` with exit status 1 for invalid
//! input, 2 for infeasible designs and 3 for numerical failures.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use glr_adapt_core::calibration::{calibrate as calibrate_design, CalibrationReport};
use glr_adapt_core::design::Calibration;
use glr_adapt_core::evaluation::diagnostics::{efficiency_diagnostic, DiagnosticPlan, EfficiencyDiagnostic};
use glr_adapt_core::{schema, Design, Error, ExponentialFamily, Model, SufficientStat};
use glr_adapt_service::session::{preview, TrialSession};

pub mod compare;
pub mod conduct;
pub mod input;

use input::{build_grid, ThresholdInput};

pub const DEFAULT_REPS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const THREADS_ENV: &str = "GLR_ADAPT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Args(String),
}

impl CliError {
    fn stdout(source: std::io::Error) -> Self {
        CliError::Io {
            path: "<stdout>".into(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "io",
            CliError::Args(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Infeasible(_)) => 2,
            CliError::Core(Error::Numeric(_) | Error::Precision(_)) => 3,
            _ => 1,
        }
    }
}

pub fn error_json(e: &CliError) -> String {
    let mut v = json!({ "code": e.code(), "message": e.to_string() });
    if let CliError::Core(inner) = e {
        if let Some(f) = inner.field() {
            v["field"] = Value::String(f.to_string());
        }
    }
    v.to_string()
}

#[derive(Parser, Debug)]
#[command(name = "glr-adapt", version, about = "Adaptive GLR sequential trial designs")]
struct Cli {
    /// Progress and timing on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Io {
    /// Design, wrapper `{spec, thresholds}` or comparator document.
    #[arg(long)]
    spec: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct Sim {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Implied alternatives, stage sizes and (with thresholds) the
    /// decision table.
    Design {
        #[command(flatten)]
        io: Io,
        /// Fixed thresholds `b,b_tilde,c`.
        #[arg(long)]
        thresholds: Option<String>,
    },
    /// Calibrate (b, b̃, c) and print the report.
    Calibrate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: Sim,
        /// Exact enumeration (binomial designs).
        #[arg(long)]
        exact: bool,
    },
    /// Operating characteristics over a grid.
    Oc {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        exact: bool,
        /// `name=start:stop[:step]` or `name=v1,v2,…`; repeat for a product
        /// grid.
        #[arg(long)]
        grid: Vec<String>,
        #[arg(long)]
        thresholds: Option<String>,
        /// Null and alternative points for AvSS, `null;alt` with
        /// comma-separated coordinates.
        #[arg(long)]
        avss: Option<String>,
    },
    /// Several procedures over a shared grid.
    Compare {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        grid: Vec<String>,
    },
    /// Expected sample size against its asymptotic lower bound along a
    /// decreasing α sequence.
    Diagnose {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        sim: Sim,
        /// Comma-separated, decreasing.
        #[arg(long, default_value = "0.05,0.01,0.001")]
        alphas: String,
        #[arg(long)]
        grid: Vec<String>,
        /// Include the three-stage conditional-power test.
        #[arg(long)]
        cond_power3: bool,
    },
    /// Run a trial stage by stage from stdin.
    Conduct {
        /// Design document; optional when resuming a session file.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Session file, created if absent and updated after every stage.
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<String>,
    },
    /// Start the conductor service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = glr_adapt_service::DATA_DIR_ENV, default_value = "glr-adapt-sessions")]
        data_dir: PathBuf,
    },
}

/// Runs the command line with the process's standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdin = std::io::stdin();
    let mut lock = stdin.lock();
    run_with(argv, &mut lock, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the command line on the given streams and returns the exit status.
pub fn run_with<I, S>(argv: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Args(e.to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", error_json(&err));
            return err.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "{}", error_json(&e));
        return e.exit_code();
    }
    let started = Instant::now();
    let verbose = cli.verbose;
    let result = dispatch(cli, stdin, stdout, stderr);
    if verbose > 0 {
        let _ = writeln!(stderr, "elapsed {:.3} s", started.elapsed().as_secs_f64());
    }
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Args(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn thresholds_flag(s: &Option<String>) -> Result<Option<ThresholdInput>, CliError> {
    Ok(s.as_deref().map(ThresholdInput::parse).transpose()?)
}

/// Writes `text` to `--out` (atomically) or stdout.
fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => glr_adapt_service::store::write_atomic(path, text.as_bytes()).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => stdout.write_all(text.as_bytes()).map_err(CliError::stdout),
    }
}

fn json_text<T: Serialize>(doc: &T) -> String {
    schema::to_string_pretty(doc)
}

fn csv_unsupported(cmd: &str) -> CliError {
    CliError::Args(format!("`{cmd}` has no CSV output"))
}

fn dispatch(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Design { io, thresholds } => {
            if io.format == Some(Format::Csv) {
                return Err(csv_unsupported("design"));
            }
            let doc = input::load_design(&io.spec)?;
            let design = Design::new(doc.spec)?;
            let th = thresholds_flag(&thresholds)?.or(doc.thresholds);
            emit(&io.out, &json_text(&design_summary(&design, th)?), stdout)?;
        }
        Command::Calibrate { io, sim, exact } => {
            if io.format == Some(Format::Csv) {
                return Err(csv_unsupported("calibrate"));
            }
            let mut spec = input::load_design(&io.spec)?.spec;
            if exact {
                spec.calibration = Calibration::Exact;
            } else if sim.reps.is_some() || sim.seed.is_some() {
                let (r0, s0) = match spec.calibration {
                    Calibration::MonteCarlo { reps, seed } => (reps, seed),
                    _ => (1_000_000, 0),
                };
                spec.calibration = Calibration::MonteCarlo {
                    reps: sim.reps.unwrap_or(r0),
                    seed: sim.seed.unwrap_or(s0),
                };
            }
            let report: CalibrationReport = calibrate_design(&Design::new(spec)?)?;
            emit(&io.out, &json_text(&report), stdout)?;
        }
        Command::Oc {
            io,
            sim,
            exact,
            grid,
            thresholds,
            avss,
        } => {
            let proc = input::resolve(input::load(&io.spec)?, thresholds_flag(&thresholds)?)?;
            let points = if grid.is_empty() {
                proc.planning_points()?
            } else {
                build_grid(proc.model(), proc.reference_u(), &grid)?
            };
            let mut oc = compare::evaluate(
                &proc,
                &points,
                exact,
                sim.reps.unwrap_or(DEFAULT_REPS),
                sim.seed.unwrap_or(DEFAULT_SEED),
            )?;
            if let Some(a) = avss {
                let (null, alt) = parse_avss(&a)?;
                oc.set_avss(&null, &alt)?;
            }
            let text = match io.format.unwrap_or(Format::Csv) {
                Format::Csv => oc.to_csv(),
                Format::Json => json_text(&oc),
            };
            emit(&io.out, &text, stdout)?;
        }
        Command::Compare { io, sim, exact, grid } => {
            let cmp = compare::run(
                &io.spec,
                compare::Overrides {
                    grid,
                    exact,
                    reps: sim.reps,
                    seed: sim.seed,
                },
            )?;
            let text = match io.format.unwrap_or(Format::Csv) {
                Format::Csv => cmp.to_csv(),
                Format::Json => json_text(&cmp),
            };
            emit(&io.out, &text, stdout)?;
        }
        Command::Diagnose {
            io,
            sim,
            alphas,
            grid,
            cond_power3,
        } => {
            let spec = input::load_design(&io.spec)?.spec;
            let alphas: Vec<f64> = alphas
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::spec("alphas", format!("{alphas:?} is not a list of numbers")))?;
            let design = Design::new(spec.clone())?;
            let thetas = if grid.is_empty() {
                vec![design.model().hypothesis_point(design.u2().unwrap_or(design.u1()))?]
            } else {
                build_grid(design.model(), design.u0(), &grid)?
            };
            let plan = DiagnosticPlan {
                alphas,
                thetas,
                reps: sim.reps.unwrap_or(20_000),
                seed: sim.seed.unwrap_or(DEFAULT_SEED),
                cond_power3,
            };
            let rows = efficiency_diagnostic(&spec, &plan)?;
            let text = match io.format.unwrap_or(Format::Json) {
                Format::Json => json_text(&json!({ "rows": rows })),
                Format::Csv => diagnostics_csv(design.model(), &rows),
            };
            emit(&io.out, &text, stdout)?;
        }
        Command::Conduct {
            spec,
            session,
            thresholds,
        } => return conduct(spec, session, thresholds, stdin, stdout, stderr),
        Command::Serve { listen, data_dir } => {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|source| CliError::Io { path: "<runtime>".into(), source })?;
            rt.block_on(glr_adapt_service::serve(listen, data_dir.clone()))
                .map_err(|source| CliError::Io { path: data_dir, source })?;
        }
    }
    Ok(0)
}

fn parse_avss(s: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = || CliError::Core(Error::spec("avss", format!("{s:?}: expected `null;alt`, e.g. `0.5,0.5;0.7,0.5`")));
    let (a, b) = s.split_once(';').ok_or_else(bad)?;
    let nums = |t: &str| t.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>();
    Ok((nums(a).map_err(|_| bad())?, nums(b).map_err(|_| bad())?))
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn conduct(
    spec: Option<PathBuf>,
    session_path: Option<PathBuf>,
    thresholds: Option<String>,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let resume = session_path.as_deref().filter(|p| p.exists());
    let session = match (resume, spec) {
        (Some(p), _) => schema::from_str::<TrialSession>(&input::read_text(p)?)?,
        (None, Some(spec_path)) => new_session(&spec_path, thresholds_flag(&thresholds)?)?,
        (None, None) => return Err(CliError::Args("`conduct` needs --spec or an existing --session file".into())),
    };
    let mut conductor = conduct::Conductor::new(session)?;
    if let Some(p) = &session_path {
        conduct::save(p, &conductor.session)?;
    }
    let th = conductor.session.thresholds;
    let _ = writeln!(
        stderr,
        "thresholds b = {:.4}, b~ = {:.4}, c = {:.4}; pending: {} observations per arm",
        th.b,
        th.b_tilde,
        th.c,
        conductor.session.state.pending_increment().unwrap_or(0)
    );
    let failures = conduct::drive(&mut conductor, session_path.as_deref(), stdin, stdout, stderr, &now_ms)?;
    Ok(if failures > 0 { 1 } else { 0 })
}

fn new_session(spec_path: &Path, flag: Option<ThresholdInput>) -> Result<TrialSession, CliError> {
    let doc = input::load_design(spec_path)?;
    let design = Design::new(doc.spec.clone())?;
    let (thresholds, calibration) = input::resolve_thresholds(&design, doc.thresholds, flag)?;
    let created = now_ms();
    Ok(TrialSession {
        id: format!("local-{created}"),
        created_at_ms: created,
        spec: doc.spec,
        thresholds,
        calibration,
        state: design.initial_state(),
        audit_log: Vec::new(),
    })
}

#[derive(Serialize)]
struct PreviewRow {
    /// First-stage statistic (S_m, or the treatment-arm sum).
    s_m: f64,
    u_hat: f64,
    n2: u64,
}

/// `design` output: the design summary, the second-stage size as a
/// function of the first-stage data and, when thresholds are known, the
/// decision table (single-arm binomial).
fn design_summary(design: &Design, th: Option<ThresholdInput>) -> Result<Value, CliError> {
    let spec = design.spec();
    let thresholds = th.map(|t| design.thresholds(t.b, t.b_tilde, t.c));
    let mut doc = match &thresholds {
        Some(t) => serde_json::to_value(preview(design, t)).expect("serializable"),
        None => {
            let t = design.thresholds(0.0, 0.0, 0.0);
            let mut v = serde_json::to_value(preview(design, &t)).expect("serializable");
            v.as_object_mut().unwrap().remove("decision_table");
            v
        }
    };
    let obj = doc.as_object_mut().unwrap();
    obj.insert("rho_m".into(), json!(spec.rho_m));
    obj.insert(
        "sample_size_rule".into(),
        serde_json::to_value(spec.sample_size_rule).expect("serializable"),
    );
    if let Some(t) = thresholds {
        obj.insert("thresholds".into(), serde_json::to_value(t).expect("serializable"));
    }
    obj.insert("n2_preview".into(), serde_json::to_value(stage_two_preview(design)?).expect("serializable"));
    Ok(doc)
}

fn stage_two_preview(design: &Design) -> Result<Vec<PreviewRow>, Error> {
    let m = design.m();
    let model = design.model();
    let stats: Vec<(f64, SufficientStat)> = match model {
        Model::Bernoulli(_) => (0..=m).map(|s| (s as f64, SufficientStat::one_arm(m, s as f64))).collect(),
        Model::TwoArmBernoulli(t) => {
            let sy = (m as f64 * t.control_rate).round();
            (0..=m)
                .map(|s| (s as f64, SufficientStat::two_arm(m, s as f64, m, sy)))
                .collect()
        }
        Model::NormalKnownVar(_) => {
            let (u0, u1) = (design.u0(), design.u1());
            let d = u1 - u0;
            (0..=12)
                .map(|i| {
                    let mean = u0 - 0.5 * d + i as f64 * d / 6.0;
                    (mean * m as f64, SufficientStat::one_arm(m, mean * m as f64))
                })
                .collect()
        }
        // The stage size depends on the variance estimate as well.
        Model::TwoSampleNormalUnknownVar(_) => return Ok(Vec::new()),
    };
    let mut rows = Vec::new();
    for (s_m, stat) in stats {
        let u_hat = model.u(&model.mle(&stat)?.param);
        let n2 = design.second_stage_size(&stat)?;
        rows.push(PreviewRow { s_m, u_hat, n2 });
    }
    Ok(rows)
}

fn diagnostics_csv(model: &Model, rows: &[EfficiencyDiagnostic]) -> String {
    let mut out = String::from("procedure,alpha,alpha_tilde,m,M,");
    for c in model.coordinate_names() {
        out.push_str(c);
        out.push(',');
    }
    out.push_str("ess,ess_se,hoeffding_bound,ratio,ratio_se,asymptotic,eta_theta\n");
    for r in rows {
        let proc = serde_json::to_value(r.procedure).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        out.push_str(&format!("{proc},{},{},{},{},", r.alpha, r.alpha_tilde, r.m, r.max_n));
        for v in r.theta.iter() {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!(
            "{:.4},{:.4},{:.4},{:.6},{:.6},{:.4},{}\n",
            r.ess,
            r.ess_se,
            r.hoeffding_bound,
            r.ratio,
            r.ratio_se,
            r.asymptotic,
            r.eta_theta.map(|e| format!("{e:.6}")).unwrap_or_default()
        ));
    }
    out
}
