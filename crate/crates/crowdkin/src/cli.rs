//! Command-line driver.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdkin_core::diagnostics::Diagnostics;
use crowdkin_core::scenario::{case_study_1, case_study_2, Scenario};
use crowdkin_core::solver::{convergence_study, run_with, Limiter};

use crate::config::{self, ConfigError};
use crate::io::{write_frame, FrameOptions, DIAGNOSTICS_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "crowdkin",
    version,
    about = "Kinetic simulation of two interacting crowds"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Args)]
struct Options {
    /// Scenario file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "KC_OUT",
        value_name = "DIR",
        default_value = "out"
    )]
    out: PathBuf,
    /// Scenario override `key=value`, e.g. `groups[0].alpha=0.1`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads: a positive count or `auto`.
    #[arg(long, global = true, value_parser = parse_threads, value_name = "N|auto")]
    threads: Option<Threads>,
    #[arg(long, global = true, value_enum)]
    limiter: Option<LimiterArg>,
    #[arg(long, global = true, value_enum)]
    splitting: Option<SplittingArg>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Run the scenario given by --scenario.
    Run,
    /// Check a scenario and print its normalized form.
    Validate {
        /// Built-in scenario to check instead of --scenario.
        builtin: Option<Builtin>,
    },
    /// Run case study 1 (five streams leaving a corner).
    Case1,
    /// Run case study 2 (two counter-moving crowds).
    Case2,
    /// Measure the order of accuracy of the advection scheme.
    Convergence,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    Case1,
    Case2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LimiterArg {
    None,
    Minmod,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplittingArg {
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Threads {
    Auto,
    Count(usize),
}

fn parse_threads(s: &str) -> Result<Threads, String> {
    if s == "auto" {
        return Ok(Threads::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Threads::Count(n)),
        _ => Err(format!("expected a positive integer or `auto`, got {s:?}")),
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Invalid { .. } => EXIT_VALIDATION,
            ConfigError::Read { .. } => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] crowdkin_core::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match &e {
            RunError::Model(m) if m.is_validation() => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.opts.threads.unwrap_or(Threads::Auto);
    let pool = match threads {
        Threads::Auto => rayon::ThreadPoolBuilder::new(),
        Threads::Count(n) => rayon::ThreadPoolBuilder::new().num_threads(n),
    }
    .build();
    let result = match pool {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("cannot start worker pool: {e}"),
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn usage(message: &str) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let opts = &cli.opts;
    match &cli.verb {
        Verb::Run => {
            let path = opts
                .scenario
                .as_deref()
                .ok_or_else(|| usage("`run` requires --scenario <path>"))?;
            let scenario = prepare(config::load(path)?, opts)?;
            execute(&scenario, &opts.out)
        }
        Verb::Validate { builtin } => {
            let base = match (builtin, &opts.scenario) {
                (Some(_), Some(_)) => {
                    return Err(usage("give either a built-in name or --scenario, not both"))
                }
                (Some(Builtin::Case1), None) => case_study_1(),
                (Some(Builtin::Case2), None) => case_study_2(),
                (None, Some(path)) => config::load(path)?,
                (None, None) => {
                    return Err(usage(
                        "`validate` requires --scenario <path> or a built-in name",
                    ))
                }
            };
            let scenario = prepare(base, opts)?;
            println!("{}", config::render(&scenario));
            Ok(())
        }
        Verb::Case1 => execute(
            &prepare(builtin_or_file(case_study_1(), opts)?, opts)?,
            &opts.out,
        ),
        Verb::Case2 => execute(
            &prepare(builtin_or_file(case_study_2(), opts)?, opts)?,
            &opts.out,
        ),
        Verb::Convergence => convergence(opts),
    }
}

fn builtin_or_file(builtin: Scenario, opts: &Options) -> Result<Scenario, Failure> {
    match &opts.scenario {
        Some(_) => Err(usage(
            "built-in case studies do not take --scenario; use `run`",
        )),
        None => Ok(builtin),
    }
}

/// Applies overrides and flag settings, then validates.
fn prepare(base: Scenario, opts: &Options) -> Result<Scenario, Failure> {
    let mut overrides = opts.overrides.clone();
    if let Some(l) = opts.limiter {
        let name = match l {
            LimiterArg::None => "none",
            LimiterArg::Minmod => "minmod",
        };
        overrides.push(format!("stepping.limiter=\"{name}\""));
    }
    if let Some(s) = opts.splitting {
        let name = match s {
            SplittingArg::Lie => "lie",
            SplittingArg::Strang => "strang",
        };
        overrides.push(format!("stepping.splitting=\"{name}\""));
    }
    let scenario = config::apply_overrides(&base, &overrides)?;
    config::validate(&scenario)?;
    Ok(scenario)
}

/// Runs `scenario`, writing frames into `out`. Any previous
/// `diagnostics.jsonl` in `out` is replaced.
pub fn run_to_dir(scenario: &Scenario, out: &Path) -> Result<Vec<Diagnostics>, RunError> {
    std::fs::create_dir_all(out)?;
    let log = out.join(DIAGNOSTICS_FILE);
    if log.exists() {
        std::fs::remove_file(&log)?;
    }
    let opts = FrameOptions {
        rho_display_max: scenario.output.rho_display_max,
        full_state: scenario.output.full_state,
    };
    let mut frame = 0;
    run_with(scenario, |sim, diag| {
        write_frame(sim.state(), diag, out, frame, &opts)?;
        frame += 1;
        Ok::<(), RunError>(())
    })
}

fn execute(scenario: &Scenario, out: &Path) -> Result<(), Failure> {
    let start = Instant::now();
    let frames = run_to_dir(scenario, out)?;
    let last = frames.last().expect("at least one frame");
    let mut stdout = io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{}: {} frames, {} steps, t = {}, max rho = {:.6}, min f = {:e} ({:.2?}) -> {}",
        if scenario.name.is_empty() {
            "scenario"
        } else {
            &scenario.name
        },
        frames.len(),
        last.step,
        last.time,
        frames.iter().map(|d| d.rho_max).fold(0.0, f64::max),
        frames.iter().map(|d| d.min_f).fold(f64::INFINITY, f64::min),
        start.elapsed(),
        out.display(),
    );
    Ok(())
}

fn convergence(opts: &Options) -> Result<(), Failure> {
    let limiters: &[Limiter] = match opts.limiter {
        Some(LimiterArg::None) => &[Limiter::None],
        Some(LimiterArg::Minmod) => &[Limiter::Minmod],
        None => &[Limiter::None, Limiter::Minmod],
    };
    let cells = [100, 200, 400];
    for &limiter in limiters {
        let study = convergence_study(limiter, &cells, 0.5).map_err(RunError::from)?;
        let label = match limiter {
            Limiter::None => "upwind",
            Limiter::Minmod => "minmod",
        };
        println!("{label}:");
        for (k, (n, e)) in study.cells.iter().zip(&study.errors).enumerate() {
            if k == 0 {
                println!("  N = {n:4}  L1 error = {e:.6e}");
            } else {
                println!(
                    "  N = {n:4}  L1 error = {e:.6e}  rate = {:.3}",
                    study.rates[k - 1]
                );
            }
        }
    }
    Ok(())
}
