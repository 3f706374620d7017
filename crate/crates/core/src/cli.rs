//! Command-line front end: `solve`, `sweep`, `verify`, `classify` and
//! `config`.
//!
//! Exit codes:
//! * 0: success (for `solve` and `sweep`, converged and certified; for
//!   `verify`, every diagnostic passed)
//! * 1: error (invalid configuration, I/O, solver failure)
//! * 2: completed but not certified, or a diagnostic failed
//! * 64: command-line usage error

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_boundedness, check_decay, check_geometry, check_profile_consistency,
    check_ps_diagnostics, compare_j_h, DiagnosticReport, Profile, Sample, SweepProfile,
    SweepTrends, Tolerances, TrendPoint,
};
use crate::config::RunConfig;
use crate::discretize::{profile_rows, read_profile_csv, write_profile_csv, EnergyModel};
use crate::error::{Error, Result};
use crate::mpsolver::{epsilon_sweep, solve, RunReport, Solution};
use crate::problem::{classify_growth, doubled_critical_exponent};
use crate::transform::TransformCalculus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "mpsoliton",
    version,
    about = "Mountain-pass solver for concentrating quasilinear standing waves"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a single eps and write its profile and report.
    Solve(SolveArgs),
    /// Solve for every eps in the config and write a sweep summary.
    Sweep(SweepArgs),
    /// Run every diagnostic on a stored profile.
    Verify(VerifyArgs),
    /// Print the growth class of the configured nonlinearity.
    Classify(CommonArgs),
    /// Print the canonical configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; the canonical instance when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Defaults to the last (smallest) configured eps.
    #[arg(long, value_name = "X")]
    pub epsilon: Option<f64>,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Solve every eps concurrently; disables warm starts.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A `profile_eps<X>.csv` file.
    pub profile: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Taken from the file name when omitted.
    #[arg(long, value_name = "X")]
    pub epsilon: Option<f64>,
    /// Where `diagnostics.json` goes; defaults to the profile's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Certified,
    Uncertified,
    Failed,
}

impl Status {
    pub fn of(report: &RunReport) -> Self {
        if report.converged && report.certified {
            Status::Certified
        } else {
            Status::Uncertified
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified => EXIT_OK,
            Status::Uncertified => EXIT_UNCERTIFIED,
            Status::Failed => EXIT_ERROR,
        }
    }
}

/// Contents of `report_eps<X>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub status: Status,
    pub report: RunReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryEntry {
    pub epsilon: f64,
    pub status: Status,
    pub error: Option<String>,
    pub report: Option<RunReport>,
}

/// Contents of `sweep_summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub parallel: bool,
    pub entries: Vec<SweepSummaryEntry>,
    pub trends: SweepTrends,
    pub ps_diagnostics: DiagnosticReport,
}

/// `{eps}` as it appears in artifact names, e.g. `0.1`.
pub fn eps_tag(eps: f64) -> String {
    format!("{eps}")
}

pub fn profile_path(dir: &Path, eps: f64) -> PathBuf {
    dir.join(format!("profile_eps{}.csv", eps_tag(eps)))
}

pub fn report_path(dir: &Path, eps: f64) -> PathBuf {
    dir.join(format!("report_eps{}.json", eps_tag(eps)))
}

/// Reads `eps` back out of a `profile_eps<X>.csv` name.
pub fn eps_from_profile_name(path: &Path) -> Option<f64> {
    path.file_name()?
        .to_str()?
        .strip_prefix("profile_eps")?
        .strip_suffix(".csv")?
        .parse()
        .ok()
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::canonical(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_solution(dir: &Path, solution: &Solution, config: &RunConfig) -> Result<Status> {
    let spec = config.build_spec()?;
    let eps = solution.report.epsilon;
    let rows = profile_rows(
        &solution.field,
        spec.potential(),
        &TransformCalculus::default(),
    )?;
    write_profile_csv(&profile_path(dir, eps), &rows)?;
    let status = Status::of(&solution.report);
    write_json(
        &report_path(dir, eps),
        &ReportDocument {
            status,
            report: solution.report.clone(),
        },
    )?;
    Ok(status)
}

fn summary_line(report: &RunReport, status: Status) -> String {
    format!(
        "eps={} status={} c0={:.9e} residual={:.3e} coincide={} h1={:.6e} sup_lambda={:.6e}",
        report.epsilon,
        serde_json::to_value(status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        report.c0_estimate,
        report.residual_norm,
        report.coincide,
        report.h1_norm_u,
        report.sup_u_lambda,
    )
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let mut config = load_config(&args.common)?;
    if let Some(dir) = &args.out {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    let eps = match args.epsilon {
        Some(e) => e,
        None => *config.epsilons.last().expect("validated non-empty"),
    };
    let spec = config.build_spec()?;
    let grid = config.build_grid()?;
    let solution = solve(&spec, &grid, eps, &config.solver_config(), None)?;
    create_dir(&config.output_dir)?;
    let status = write_solution(&config.output_dir, &solution, &config)?;
    writeln!(out, "{}", summary_line(&solution.report, status))
        .map_err(|e| Error::io("<stdout>", e))?;
    for w in &solution.report.warnings {
        writeln!(out, "warning: {w}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(status.exit_code())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let mut config = load_config(&args.common)?;
    if let Some(dir) = &args.out {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    let spec = config.build_spec()?;
    let grid = config.build_grid()?;
    let entries = epsilon_sweep(
        &config.epsilons,
        &spec,
        &grid,
        &config.solver_config(),
        args.parallel,
    )?;
    create_dir(&config.output_dir)?;

    let mut summary_entries = Vec::with_capacity(entries.len());
    let mut profiles = Vec::new();
    for entry in &entries {
        match &entry.outcome {
            Ok(solution) => {
                let status = write_solution(&config.output_dir, solution, &config)?;
                writeln!(out, "{}", summary_line(&solution.report, status))
                    .map_err(|e| Error::io("<stdout>", e))?;
                profiles.push(SweepProfile {
                    epsilon: entry.epsilon,
                    profile: Profile::from_field(&solution.field, &spec)?,
                });
                summary_entries.push(SweepSummaryEntry {
                    epsilon: entry.epsilon,
                    status,
                    error: None,
                    report: Some(solution.report.clone()),
                });
            }
            Err(message) => {
                writeln!(out, "eps={} status=failed error={message}", entry.epsilon)
                    .map_err(|e| Error::io("<stdout>", e))?;
                summary_entries.push(SweepSummaryEntry {
                    epsilon: entry.epsilon,
                    status: Status::Failed,
                    error: Some(message.clone()),
                    report: None,
                });
            }
        }
    }
    let trends = SweepTrends::from_entries(
        &entries
            .iter()
            .map(|e| e.report().map(TrendPoint::from))
            .collect::<Vec<_>>(),
    );
    let summary = SweepSummary {
        parallel: args.parallel,
        entries: summary_entries,
        trends,
        ps_diagnostics: check_ps_diagnostics(&profiles, &spec, &Tolerances::default()),
    };
    write_json(&config.output_dir.join("sweep_summary.json"), &summary)?;

    let code = if summary.entries.iter().any(|e| e.status == Status::Failed) {
        EXIT_ERROR
    } else {
        summary
            .entries
            .last()
            .map_or(EXIT_ERROR, |e| e.status.exit_code())
    };
    Ok(code)
}

/// The stored residual must be reproducible from the stored profile.
fn check_reported_residual(
    profile: &Profile,
    report: &ReportDocument,
    config: &RunConfig,
    eps: f64,
) -> DiagnosticReport {
    let tolerance = 1e-12;
    let recomputed = config.build_spec().and_then(|spec| {
        let v = profile.v_field()?;
        let model = EnergyModel::truncated(&spec, v.grid(), eps);
        Ok(model.residual_norm(&model.gradient(v.values())?))
    });
    let reported = report.report.residual_norm;
    let mut notes = Vec::new();
    if report.report.epsilon != eps {
        notes.push(format!(
            "report is for eps {}, profile for eps {eps}",
            report.report.epsilon
        ));
    }
    let (passed, recomputed) = match recomputed {
        Ok(r) => (
            (r - reported).abs() <= tolerance * (1.0 + reported.abs()) && notes.is_empty(),
            r,
        ),
        Err(e) => {
            notes.push(e.to_string());
            (false, f64::NAN)
        }
    };
    DiagnosticReport {
        check: "reported_residual".into(),
        passed,
        tolerance,
        worst: Some(Sample {
            location: Some(eps),
            values: [
                ("recomputed".to_string(), recomputed),
                ("reported".to_string(), reported),
            ]
            .into_iter()
            .collect(),
        }),
        notes,
    }
}

/// All diagnostics for one stored profile, in a fixed order.
pub fn verify_profile(path: &Path, config: &RunConfig, eps: f64) -> Result<Vec<DiagnosticReport>> {
    let spec = config.build_spec()?;
    let tol = Tolerances::default();
    let rows = read_profile_csv(path)?;
    let profile = Profile::from_rows(spec.dimension(), &rows)?;
    let solver = config.solver_config();
    let mut reports = vec![
        check_profile_consistency(&profile, &spec, &tol),
        check_decay(&profile, &spec),
        check_boundedness(
            &SweepProfile {
                epsilon: eps,
                profile: profile.clone(),
            },
            &spec,
            &tol,
        ),
        compare_j_h(&profile, &spec, eps, &tol),
        check_geometry(
            &spec,
            eps,
            &profile.grid,
            solver.sphere_radius,
            solver.geometry_probes,
            config.seed,
            &tol,
        ),
    ];
    let report_file = path.with_file_name(format!("report_eps{}.json", eps_tag(eps)));
    if report_file.exists() {
        let text = std::fs::read_to_string(&report_file).map_err(|e| Error::io(&report_file, e))?;
        let doc: ReportDocument =
            serde_json::from_str(&text).map_err(|e| Error::format(&report_file, e))?;
        reports.push(check_reported_residual(&profile, &doc, config, eps));
    }
    Ok(reports)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let config = load_config(&args.common)?;
    config.build_spec()?;
    let eps = match args
        .epsilon
        .or_else(|| eps_from_profile_name(&args.profile))
    {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::Validation(format!("eps must be positive, got {e}"))),
        None => {
            return Err(Error::Validation(format!(
                "cannot infer eps from {}; pass --epsilon",
                args.profile.display()
            )))
        }
    };
    if !args.profile.exists() {
        return Err(Error::io(
            &args.profile,
            std::io::Error::new(std::io::ErrorKind::NotFound, "profile not found"),
        ));
    }
    let reports = verify_profile(&args.profile, &config, eps)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .profile
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_json(&dir.join("diagnostics.json"), &reports)?;
    for r in &reports {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        let notes = if r.notes.is_empty() {
            String::new()
        } else {
            format!(" ({})", r.notes.join("; "))
        };
        writeln!(out, "{verdict} {}{notes}", r.check).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(if reports.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    })
}

/// `"supercritical, 22*=12"`; the exponent is `inf` for N <= 2.
pub fn classify_line(config: &RunConfig) -> Result<String> {
    let g = config.problem.nonlinearity.build()?;
    let report = classify_growth(&g, config.problem.dimension)?;
    let exponent = match doubled_critical_exponent(config.problem.dimension) {
        Some(q) => format!("{q}"),
        None => "inf".into(),
    };
    Ok(format!("{}, 22*={exponent}", report.class))
}

pub fn cmd_classify(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    let config = load_config(args)?;
    writeln!(out, "{}", classify_line(&config)?).map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Config => {
            let text = RunConfig::canonical().to_toml_string()?;
            write!(out, "{text}").map_err(|e| Error::io("<stdout>", e))?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
