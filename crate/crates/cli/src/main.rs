use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use auglab::continuum::{constants, continuum_spectrum, grid_reference_spectrum, write_spectrum_csv};
use auglab::manifold::Density;
use auglab_cli::config::{self, ConfigError, ManifoldSection};
use auglab_cli::experiment::{self, RunError};
use auglab_cli::output::{self, ErrorRecord, ReplayOutcome, EXIT_CONFIG, EXIT_MISMATCH, EXIT_NUMERICAL};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "auglab", version, about = "Augmentation-graph Laplacian experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Re-run a finished experiment and byte-compare its report.
    Replay { dir: PathBuf },
    /// Print α, β and αβ for intrinsic dimension m.
    Constants {
        #[arg(long)]
        m: usize,
    },
    /// Print the low spectrum of the limit operator as CSV.
    Spectrum {
        #[arg(long)]
        manifold: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// `uniform`, or `cos:<amp>` on the circle.
        #[arg(long, default_value = "uniform")]
        density: String,
        /// Grid scale of the reference solver for non-uniform densities.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = auglab_cli::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let code = match cli.cmd {
        Cmd::Run { config } => run(&config),
        Cmd::Replay { dir } => replay(&dir),
        Cmd::Constants { m } => match constants(m) {
            Ok(c) => {
                println!("m = {m}");
                println!("alpha = {:.17}", c.alpha);
                println!("beta = {:.17}", c.beta);
                println!("alpha_beta = {:.17}", c.alpha_beta());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Cmd::Spectrum { manifold, k, radius, density, eps } => match spectrum(manifold, k, radius, density, eps) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code as u8)
}

fn fail(dir: Option<PathBuf>, kind: &'static str, exit_code: i32, message: String) -> i32 {
    eprintln!("{kind} error: {message}");
    if let Some(d) = dir {
        let rec = ErrorRecord { kind, exit_code, message };
        match output::write_error(&d, &rec) {
            Ok(()) => eprintln!("error record: {}", d.join("error.json").display()),
            Err(e) => eprintln!("could not write error record in {}: {e}", d.display()),
        }
    }
    exit_code
}

fn run_error(dir: Option<PathBuf>, e: RunError) -> i32 {
    match e {
        RunError::Config(c) => fail(dir, "config", EXIT_CONFIG, c.0),
        RunError::Numerical(n) => fail(dir, "numerical", EXIT_NUMERICAL, n.to_string()),
    }
}

fn run(path: &Path) -> i32 {
    let raw = match std::fs::read_to_string(path) {
        Ok(r) => r,
        Err(e) => return fail(None, "config", EXIT_CONFIG, format!("cannot read {}: {e}", path.display())),
    };
    let cfg = match config::parse(&raw) {
        Ok(c) => c,
        Err(ConfigError(msg)) => return fail(output::error_dir(None, &raw), "config", EXIT_CONFIG, msg),
    };
    let report = match experiment::run(&cfg) {
        Ok(r) => r,
        Err(e) => return run_error(Some(cfg.run_dir()), e),
    };
    match output::write_run(&cfg, &report) {
        Ok(dir) => {
            print!("{}", experiment::summary(&report));
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("io error: cannot write results: {e}");
            1
        }
    }
}

fn replay(dir: &Path) -> i32 {
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()));
    let (raw, stored) = match (read("config.json"), read("report.json")) {
        (Ok(c), Ok(r)) => (c, r),
        (Err(e), _) | (_, Err(e)) => return fail(None, "config", EXIT_CONFIG, format!("{e:#}")),
    };
    let cfg = match config::parse(&raw) {
        Ok(c) => c,
        Err(ConfigError(msg)) => return fail(None, "config", EXIT_CONFIG, msg),
    };
    let report = match experiment::run(&cfg) {
        Ok(r) => r,
        Err(e) => return run_error(None, e),
    };
    match output::compare_reports(&stored, &report.to_json()) {
        ReplayOutcome::Match => {
            println!("match: {}", dir.join("report.json").display());
            0
        }
        ReplayOutcome::Mismatch { path, stored, rerun } => {
            println!("mismatch at {path}: stored {stored}, rerun {rerun}");
            EXIT_MISMATCH
        }
    }
}

fn spectrum(manifold: String, k: usize, radius: f64, density: String, eps: f64) -> anyhow::Result<()> {
    let section = ManifoldSection { kind: manifold, params: vec![radius], ambient_dim: None, density };
    let spec = config::manifold_spec(&section)?;
    let s = match spec.density() {
        Density::Uniform => continuum_spectrum(&spec, k)?,
        Density::Custom(_) => grid_reference_spectrum(&spec, k, eps)?,
    };
    let consts = constants(spec.intrinsic_dim())?;
    let mut out = std::io::stdout().lock();
    write_spectrum_csv(&s, &consts, &mut out)?;
    Ok(())
}
