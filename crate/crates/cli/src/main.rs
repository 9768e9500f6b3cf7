use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snskit::optimizer::{optimize, scan, OptimizationProblem};
use snskit::{evaluate, Method, ZigzagMode};
use snskit_cli::config::{self, parse_distances, RunConfig};
use snskit_cli::{exit, output, tables, CliError};

#[derive(Parser)]
#[command(
    name = "snskit",
    version,
    about = "Finite-key rates for SNS twin-field QKD with odd-parity pairing"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration, `key = value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Phase-error estimator, A or B.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Tail bound of the pairing chain, approx or exact.
    #[arg(long, global = true)]
    mode: Option<ZigzagMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Configuration override `key=value`, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured source at the configured distance.
    Rate {
        /// Also print a CSV row.
        #[arg(long)]
        csv: bool,
    },
    /// Optimize the source at the configured distance.
    Optimize,
    /// Optimize both methods over `opt.distances` and write CSV.
    Scan,
    /// Reproduce the built-in benchmarks.
    Tables,
    /// Repeaterless bounds at the given distances, or `opt.distances`.
    Plob {
        /// Distances in km, as a comma list or `start:stop:step`.
        distances: Option<String>,
    },
}

fn load(g: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = config::load(g.config.as_deref(), &g.set)?;
    if let Some(m) = g.method {
        cfg.method = m;
    }
    if let Some(m) = g.mode {
        cfg.mode = m;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Rate { csv } => {
            let cfg = load(g)?;
            let r = evaluate(&cfg.exp, &cfg.src, &cfg.budget, cfg.method, cfg.mode)?;
            let mut text = output::report(&cfg.exp, cfg.method, cfg.mode, &r);
            if csv {
                text.push_str(&output::rate_csv(&cfg.exp, cfg.method, &r));
            }
            print!("{text}");
            Ok(if r.secure() {
                exit::OK
            } else {
                exit::ZERO_RATE
            })
        }
        Command::Optimize => {
            let cfg = load(g)?;
            let result = optimize(&cfg.problem())?;
            let params = output::source_config(&result.source);
            match &result.report {
                Some(r) => print!("{}", output::report(&cfg.exp, cfg.method, cfg.mode, r)),
                None => println!(
                    "rate  {}\nflags  {}",
                    output::sci(result.rate),
                    result.flags
                ),
            }
            println!("evaluations  {}", result.evaluations);
            match &cfg.out {
                Some(path) => emit(Some(path), &params)?,
                None => print!("{params}"),
            }
            Ok(if result.rate > 0.0 {
                exit::OK
            } else {
                exit::ZERO_RATE
            })
        }
        Command::Scan => {
            let cfg = load(g)?;
            let distances = cfg.distances.clone().unwrap_or_default();
            let template = cfg.problem();
            let (a, b) = rayon::join(
                || {
                    scan(
                        &OptimizationProblem {
                            method: Method::A,
                            ..template.clone()
                        },
                        &distances,
                    )
                },
                || {
                    scan(
                        &OptimizationProblem {
                            method: Method::B,
                            ..template.clone()
                        },
                        &distances,
                    )
                },
            );
            emit(cfg.out.as_deref(), &output::scan_csv(&a?, &b?))?;
            Ok(exit::OK)
        }
        Command::Tables => {
            let text = format!(
                "{}\n{}",
                tables::render(
                    "symmetric baseline link, N = 1e12",
                    &tables::symmetric_benchmark()?
                ),
                tables::render("field device sets, N = 2e13", &tables::field_benchmark()?)
            );
            emit(g.out.as_deref(), &text)?;
            Ok(exit::OK)
        }
        Command::Plob { distances } => {
            let cfg = load(g)?;
            let distances = match distances {
                Some(text) => parse_distances(&text).map_err(|message| config::ConfigError {
                    origin: None,
                    key: Some("distances".into()),
                    message,
                })?,
                None => cfg
                    .distances
                    .clone()
                    .unwrap_or_else(|| tables::SYMMETRIC_DISTANCES.to_vec()),
            };
            let rows = tables::plob_rows(&distances, &cfg.exp)?;
            emit(cfg.out.as_deref(), &output::plob_csv(&rows))?;
            Ok(exit::OK)
        }
    }
}

/// Caps the global thread pool from `SNSKIT_THREADS`.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SNSKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SNSKIT_THREADS: `{v}` is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit::CONFIG as u8);
    }
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
