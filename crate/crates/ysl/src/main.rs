use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ysl::config::{self, ChannelSpec, CheckPlugConfig, EvalConfig, GalerkinSpec, SweepSpec};
use ysl::error::{Error, Result};
use ysl::output::write_atomic;
use ysl::runs;
use ysl::verify::{self, Budget, Suite};

#[derive(Parser)]
#[command(name = "ysl", version, about = "Viscoplastic stress laws: evaluation, solvers and property suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Coercivity,
    Subgradient,
    Monotonicity,
    Korn,
    Regularization,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate exact and regularized stresses for the matrices in a CSV file.
    EvalStress {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subdifferential membership and violation witnesses at a plug point.
    CheckPlug {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plane channel flow to steady state.
    RunChannel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Periodic spectral run with energy and bound monitors.
    RunGalerkin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded property suites; exits with 1 when any check fails.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random matrices per parameter point; other counts scale with it.
        #[arg(long)]
        samples: Option<u64>,
        /// Directory for one `<suite>.json` report per suite; reports go to
        /// standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid in parallel.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::EvalStress { config, input, out } => {
            let cfg: EvalConfig = config::load(&config)?;
            let mut buf = Vec::new();
            runs::eval_stress(&cfg, &input, &mut buf)?;
            write_output(out.as_deref(), &buf)?;
        }
        Command::CheckPlug { config, out } => {
            let cfg: CheckPlugConfig = config::load(&config)?;
            let report = runs::check_plug(&cfg)?;
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            write_output(out.as_deref(), &bytes)?;
        }
        Command::RunChannel { config, out } => {
            let spec: ChannelSpec = config::load(&config)?;
            let m = runs::run_channel(&spec, &base_dir(&config), &out)?;
            println!("{} {}", out.display(), m.content_hash);
        }
        Command::RunGalerkin { config, out } => {
            let spec: GalerkinSpec = config::load(&config)?;
            let m = runs::run_galerkin(&spec, &base_dir(&config), &out)?;
            println!("{} {}", out.display(), m.content_hash);
        }
        Command::Verify {
            suite,
            seed,
            samples,
            out,
        } => {
            let suites: Vec<Suite> = match suite {
                SuiteArg::All => Suite::ALL.to_vec(),
                SuiteArg::Coercivity => vec![Suite::Coercivity],
                SuiteArg::Subgradient => vec![Suite::Subgradient],
                SuiteArg::Monotonicity => vec![Suite::Monotonicity],
                SuiteArg::Korn => vec![Suite::Korn],
                SuiteArg::Regularization => vec![Suite::Regularization],
            };
            let budget = samples.map_or_else(Budget::default, Budget::scaled);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(runs::worker_threads(None))
                .build()
                .map_err(|e| Error::Invalid(e.to_string()))?;
            let reports = pool.install(|| {
                suites
                    .iter()
                    .map(|&s| verify::run_suite(s, seed, &budget))
                    .collect::<Result<Vec<_>>>()
            })?;
            let all_passed = reports.iter().all(|r| r.passed);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    for r in &reports {
                        let mut bytes = serde_json::to_vec_pretty(r)?;
                        bytes.push(b'\n');
                        write_atomic(&dir.join(format!("{}.json", r.suite.name())), &bytes)?;
                        println!("{}: {}", r.suite.name(), if r.passed { "pass" } else { "FAIL" });
                        for c in &r.checks {
                            println!(
                                "  {:<24} {:<4} samples {:>9}  failures {}",
                                c.name,
                                if c.passed { "ok" } else { "FAIL" },
                                c.samples,
                                c.failure_count
                            );
                        }
                    }
                }
                None => {
                    let mut bytes = serde_json::to_vec_pretty(&reports)?;
                    bytes.push(b'\n');
                    write_output(None, &bytes)?;
                }
            }
            if !all_passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { grid, jobs } => {
            let spec: SweepSpec = config::load(&grid)?;
            let outcome = runs::run_sweep(&spec, &base_dir(&grid), jobs)?;
            for e in &outcome.entries {
                println!("{} {}", e.dir.display(), e.status);
            }
            if let Some(err) = outcome.first_error {
                eprintln!("error: {err}");
                return Ok(ExitCode::from(err.exit_code() as u8));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
