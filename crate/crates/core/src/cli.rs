//! The `obfusim` command line.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adsim::{run_simulation, SimScenario};
use crate::catalog::Cosine;
use crate::control::write_decision_log;
use crate::error::{Error, Result};
use crate::metrics::{group_by_scenario, tradeoff_curve, write_tradeoff_csv, RunReport, TradeoffRow};
use crate::obfuscation::{candidate_apps, plan_weightage, DisruptionLevel, ObfuscationPlan};
use crate::profiler::assign_weightages;
use crate::usage::UsageTrace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "obfusim", version, about = "Profile obfuscation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and write reports, per-slot CSVs and a trade-off CSV.
    Simulate {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Seed; defaults to `sim.seed` in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma list of disruption levels (low, medium, high) or further
        /// scenario files. Defaults to the scenario's own level.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Format of the summary printed to stdout.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Rank obfuscation apps for the scenario's user and write the plan.
    Recommend {
        #[arg(long)]
        config: PathBuf,
        /// Number of apps; defaults to `privacy.candidates`.
        #[arg(long)]
        top: Option<usize>,
        /// Output directory for `plan.json`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Check a scenario and list every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

fn config_err(error: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error,
    }
}

fn runtime_err(error: Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        error,
    }
}

/// Parses `args` and runs the command, writing normal output to `stdout`.
/// Returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            scenarios,
            format,
        } => cmd_simulate(config, *seed, out, scenarios, *format, cli.verbose, stdout),
        Command::Recommend {
            config,
            top,
            out,
            format,
        } => cmd_recommend(config, *top, out, *format, stdout),
        Command::Validate { config } => cmd_validate(config, stdout),
    }
}

fn load(config: &Path) -> std::result::Result<SimScenario, Failure> {
    SimScenario::from_path(config).map_err(config_err)
}

fn load_valid(config: &Path) -> std::result::Result<SimScenario, Failure> {
    let s = load(config)?;
    s.validate()
        .map_err(|e| config_err(Error::parse(config.display().to_string(), e)))?;
    Ok(s)
}

/// Expands `--scenarios` into concrete scenario variants.
fn expand(config: &Path, scenarios: &[String]) -> std::result::Result<Vec<SimScenario>, Failure> {
    let base = load_valid(config)?;
    if scenarios.is_empty() {
        return Ok(vec![base]);
    }
    let mut out = Vec::new();
    for item in scenarios {
        let item = item.trim();
        match item.parse::<DisruptionLevel>() {
            Ok(level) => out.push(base.with_level(level)),
            Err(_) => {
                let path = match config.parent() {
                    Some(dir) if Path::new(item).is_relative() && !Path::new(item).exists() => dir.join(item),
                    _ => PathBuf::from(item),
                };
                out.push(load_valid(&path)?);
            }
        }
    }
    Ok(out)
}

fn cmd_simulate(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    scenarios: &[String],
    format: Format,
    verbose: u8,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let runs = expand(config, scenarios)?;
    let results: Vec<Result<RunReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|s| scope.spawn(move || run_simulation(s, seed.unwrap_or(s.sim.seed))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let reports = results
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(runtime_err)?;

    std::fs::create_dir_all(out).map_err(|e| runtime_err(Error::io(out, e)))?;
    for r in &reports {
        let stem = format!("{}_{}", r.scenario, r.level);
        write_atomic(&out.join(format!("{stem}.json")), r.to_json().as_bytes())?;
        let mut buf = Vec::new();
        write_decision_log(&r.control, &mut buf).map_err(runtime_err)?;
        write_atomic(&out.join(format!("{stem}_decisions.csv")), &buf)?;
        let mut buf = Vec::new();
        let mut trace = UsageTrace::new(r.slot_s, r.organic_requests.clone());
        for (slot, n) in r.obfuscation_requests.iter().enumerate() {
            trace.bins[slot] += n;
        }
        trace.write_csv(&mut buf).map_err(runtime_err)?;
        write_atomic(&out.join(format!("{stem}_usage.csv")), &buf)?;
        if verbose > 0 {
            eprintln!("wrote {}", out.join(format!("{stem}.json")).display());
        }
    }
    let groups = group_by_scenario(reports.clone());
    if groups.len() > 1 {
        let rows = tradeoff_curve(&groups).map_err(runtime_err)?;
        let mut buf = Vec::new();
        write_tradeoff_csv(&rows, &mut buf).map_err(runtime_err)?;
        write_atomic(&out.join("tradeoff.csv"), &buf)?;
    }

    let rows: Vec<TradeoffRow> = reports.iter().map(TradeoffRow::of).collect();
    match format {
        Format::Csv => write_tradeoff_csv(&rows, &mut *stdout).map_err(runtime_err)?,
        Format::Json => {
            let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
            writeln!(stdout, "{text}").map_err(|e| runtime_err(Error::io("<stdout>", e)))?;
        }
    }
    Ok(())
}

fn cmd_recommend(
    config: &Path,
    top: Option<usize>,
    out: &Path,
    format: Format,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let s = load_valid(config)?;
    let prepared = s.prepare().map_err(config_err)?;
    let k = top.unwrap_or(s.privacy.candidates);
    if k == 0 {
        return Err(config_err(Error::invalid("--top", "must be >= 1")));
    }
    let spec = s.privacy.spec();
    let interests = prepared.interests();
    let ranked = candidate_apps(
        &prepared.context,
        &spec,
        &prepared.catalog,
        &interests,
        &Cosine,
        k,
    )
    .map_err(runtime_err)?;
    let profile = assign_weightages(&prepared.context).map_err(runtime_err)?;
    let eta = plan_weightage(
        s.privacy.scenario,
        profile.profile_thresholds(),
        &s.privacy.policy,
    )
    .map_err(runtime_err)?;
    let plan = ObfuscationPlan::new(
        s.privacy.scenario,
        &ranked,
        eta,
        &spec,
        &prepared.catalog,
        &interests,
    )
    .map_err(runtime_err)?;

    std::fs::create_dir_all(out).map_err(|e| runtime_err(Error::io(out, e)))?;
    write_atomic(&out.join("plan.json"), plan.to_json().as_bytes())?;

    let io = |e| runtime_err(Error::io("<stdout>", e));
    match format {
        Format::Csv => {
            for (i, c) in ranked.iter().enumerate() {
                let category = &prepared.catalog.app(&c.app).map_err(runtime_err)?.category;
                writeln!(stdout, "{},{},{},{:.6}", i + 1, c.app, category, c.score).map_err(io)?;
            }
        }
        Format::Json => {
            let text = serde_json::to_string_pretty(&ranked).expect("candidates serialize");
            writeln!(stdout, "{text}").map_err(io)?;
        }
    }
    Ok(())
}

fn cmd_validate(config: &Path, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let s = load(config)?;
    let problems = s.diagnostics();
    let io = |e| runtime_err(Error::io("<stdout>", e));
    if problems.is_empty() {
        writeln!(stdout, "{}: ok", config.display()).map_err(io)?;
        return Ok(());
    }
    for p in &problems {
        writeln!(stdout, "{}: {p}", config.display()).map_err(io)?;
    }
    Err(config_err(Error::invalid(
        config.display().to_string(),
        format!("{} problem(s)", problems.len()),
    )))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::result::Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| runtime_err(Error::io(dir, e)))?;
    tmp.write_all(bytes)
        .map_err(|e| runtime_err(Error::io(path, e)))?;
    tmp.persist(path)
        .map_err(|e| runtime_err(Error::io(path, e.error)))?;
    Ok(())
}
