//! Command-line harness: `arcm run | compare | validate | gen-data`.
//!
//! Exit codes: 0 success, 1 validation battery failure, 2 configuration
//! error, 3 runtime error. `ARCM_THREADS` caps the worker pool of `compare`.

pub mod config;
pub mod report;
pub mod validate;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::data::{gen_synthetic, write_both, SyntheticSpec, Task};
use crate::error::Error;
use crate::optimizers::{run, RunOptions, Trace};

pub use config::{Experiment, RunConfig};
pub use report::{read_trace_csv, write_trace_csv, RunSummary, TRACE_HEADER};
pub use validate::{Battery, BatteryReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_BATTERY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "arcm", version, about = "Adaptive cubic regularization with momentum: benchmark harness")]
pub struct Cli {
    /// Print nothing but errors.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long, value_name = "PATH")]
    pub outdir: Option<PathBuf>,
    /// Runs this single seed instead of the configured ones.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Classification,
    Regression,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "classification")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 0.0)]
    pub label_noise: f64,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH", default_value = ".")]
    pub outdir: PathBuf,
    /// File stem; defaults to `synthetic-<task>-n<n>-d<d>-s<seed>`.
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured optimizer once (first seed) and write traces.
    Run(RunArgs),
    /// Run every optimizer on every seed and tabulate.
    Compare(RunArgs),
    /// Run the built-in verification battery.
    Validate,
    /// Write a synthetic dataset as LIBSVM and CSV.
    GenData(GenDataArgs),
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse { .. } | Error::Precondition(_) | Error::InsufficientData(_) => {
                EXIT_CONFIG
            }
            Error::Numeric(_) | Error::SolverFailure { .. } | Error::CertificateInvalid(_) | Error::Io(_) => {
                EXIT_RUNTIME
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Entry point of the `arcm` binary.
pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}

pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("arcm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Runs a parsed command; `Ok` carries a non-error exit code.
pub fn execute(cli: &Cli) -> Result<u8, Failure> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Run(a) => cmd_run(&load(a)?, quiet),
        Command::Compare(a) => cmd_compare(&load(a)?, quiet),
        Command::Validate => Ok(cmd_validate(&Battery::standard(), quiet)),
        Command::GenData(a) => cmd_gen_data(a, quiet).map(|_| EXIT_OK),
    }
}

fn load(a: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(dir) = &a.outdir {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ARCM_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure {
            code: EXIT_CONFIG,
            message: format!("ARCM_THREADS must be a positive integer, got `{v}`"),
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: format!("cannot start worker pool: {e}"),
    })
}

/// One optimizer on one seed. The trace is written even when the run ended
/// in a numeric error.
fn run_one(exp: &Experiment, idx: usize, seed: u64, trace_path: &Path) -> Result<(RunSummary, Trace), Error> {
    let o = &exp.config.optimizers[idx];
    let inst = exp.instance(seed)?;
    let opts = RunOptions {
        stop: exp.config.stop,
        solver: exp.solver_for(o),
        track_curvature: false,
    };
    let trace = run(o.kind, inst.objective.as_ref(), &inst.x0, &o.params, &opts)?;
    write_trace_csv(&trace, trace_path)?;
    Ok((RunSummary::new(&o.name(), seed, &trace), trace))
}

pub fn cmd_run(cfg: &RunConfig, quiet: bool) -> Result<u8, Failure> {
    let exp = cfg.prepare()?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(Error::from)?;
    let seed = cfg.seeds[0];
    let mut code = EXIT_OK;
    for (idx, o) in cfg.optimizers.iter().enumerate() {
        let name = o.name();
        let (summary, _) = run_one(&exp, idx, seed, &dir.join(format!("{name}.trace.csv")))?;
        fs::write(dir.join(format!("{name}.summary.txt")), summary.to_text()).map_err(Error::from)?;
        if summary.error.is_some() {
            code = EXIT_RUNTIME;
            eprintln!("arcm: {name}: {}", summary.error.as_deref().unwrap_or_default());
        }
        if !quiet {
            println!(
                "{name}: {} after {} iterations ({} successful), f = {:.6e}, |g| = {:.3e}, audit {}",
                summary.stop_reason,
                summary.iterations,
                summary.successful_iterations,
                summary.final_f,
                summary.final_grad_norm,
                if summary.audit_passed() { "pass" } else { "fail" }
            );
        }
    }
    Ok(code)
}

pub fn cmd_compare(cfg: &RunConfig, quiet: bool) -> Result<u8, Failure> {
    if cfg.optimizers.len() < 2 {
        return Err(Error::Config("compare needs at least two [[optimizer]] entries".into()).into());
    }
    let exp = cfg.prepare()?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(Error::from)?;
    let jobs: Vec<(usize, u64)> = (0..cfg.optimizers.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = thread_pool()?;
    let results: Vec<Result<(RunSummary, Trace), Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let name = cfg.optimizers[i].name();
                run_one(&exp, i, seed, &dir.join(format!("{name}.seed{seed}.trace.csv")))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?.0);
    }
    let labels: Vec<String> = cfg.optimizers.iter().map(|o| o.name()).collect();
    let table = report::comparison_table(&labels, &rows);
    let write = |name: &str, text: String| fs::write(dir.join(name), text).map_err(Error::from);
    write("results.csv", report::results_csv(&rows))?;
    write("comparison.csv", report::table_csv(&table))?;
    write("comparison.txt", report::table_text(&table))?;
    if !quiet {
        print!("{}", report::table_text(&table));
    }
    let errors: Vec<&RunSummary> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &errors {
        eprintln!("arcm: {} seed {}: {}", r.label, r.seed, r.error.as_deref().unwrap_or_default());
    }
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_RUNTIME })
}

pub fn cmd_validate(battery: &Battery, quiet: bool) -> u8 {
    let report = battery.run();
    if !quiet {
        print!("{}", report.to_text());
    }
    if report.passed() {
        EXIT_OK
    } else {
        if quiet {
            for i in report.items.iter().filter(|i| !i.passed) {
                eprintln!("FAIL {}: {}", i.name, i.detail);
            }
        }
        EXIT_BATTERY
    }
}

pub fn cmd_gen_data(a: &GenDataArgs, quiet: bool) -> Result<(PathBuf, PathBuf), Failure> {
    let spec = SyntheticSpec {
        n: a.n,
        d: a.d,
        label_noise: a.label_noise,
        task: match a.task {
            TaskArg::Classification => Task::Classification,
            TaskArg::Regression => Task::Regression,
        },
        seed: a.seed,
    };
    let ds = gen_synthetic(&spec)?;
    let stem = a.stem.clone().unwrap_or_else(|| ds.name.clone());
    let paths = write_both(&ds, &a.outdir, &stem)?;
    if !quiet {
        println!("{}\n{}", paths.0.display(), paths.1.display());
    }
    Ok(paths)
}
