use clap::{Args, Parser, Subcommand};
use factorable_cli::config::{load_config, ExperimentConfig};
use factorable_cli::report::{Status, write_json};
use factorable_cli::{pipelines, suite};
use std::path::PathBuf;
use std::process::ExitCode;

/// Random-field simulation and factorable-continuity experiment runner.
#[derive(Parser)]
#[command(name = "factorable", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON experiment configuration (defaults to the built-in Wiener run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (also via FACTORABLE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipelines and write report + artifacts.
    Run(CommonArgs),
    /// Run a named verification suite against the configuration.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Suite name (see `verify --suite list`).
        #[arg(long)]
        suite: String,
    },
    /// Generate and persist the configured ensemble.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write a CSV copy.
        #[arg(long)]
        csv: bool,
    },
    /// Convert a persisted ensemble to CSV.
    Export {
        /// Binary matrix payload.
        #[arg(long)]
        bin: PathBuf,
        /// JSON sidecar.
        #[arg(long)]
        meta: PathBuf,
        /// Destination CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_config(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    // precedence: flags > file > defaults
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(threads) = common.threads {
        cfg.threads = Some(threads);
    }
    Ok(cfg)
}

fn setup_threads(cfg: &ExperimentConfig) {
    let from_env = std::env::var("FACTORABLE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    // env var overrides the config field
    if let Some(n) = from_env.or(cfg.threads) {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // configuration and usage problems exit with 2
            let msg = format!("{e:#}");
            if msg.contains("config") || msg.contains("suite") {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(common) => {
            let cfg = resolve_config(&common)?;
            setup_threads(&cfg);
            let out = pipelines::run(&cfg)?;
            for a in &out.report.assertions {
                println!("{} {}: {}", a.status, a.name, a.reason);
            }
            println!("report: {}", out.files.last().unwrap().display());
            Ok(ExitCode::from(pipelines::exit_code(&out.report) as u8))
        }
        Command::Verify { common, suite: suite_name } => {
            let cfg = resolve_config(&common)?;
            setup_threads(&cfg);
            if suite_name.trim().is_empty() {
                anyhow::bail!("suite name must not be empty (usage: --suite acceptance)");
            }
            if suite_name == "list" {
                for (name, checks) in suite::suites() {
                    println!("{name}: {}", checks.join(", "));
                }
                return Ok(ExitCode::SUCCESS);
            }
            let Some(checks) = suite::checks_for_suite(&suite_name) else {
                anyhow::bail!("unknown suite `{suite_name}` (try --suite list)");
            };
            let family = cfg.generator.family_name();
            let mut outcomes = Vec::new();
            let mut all_green = true;
            for id in checks {
                let outcome = if suite::compatible(id, family) {
                    suite::run_check(id, cfg.seed)
                } else {
                    suite::CheckOutcome {
                        id: suite::check_ids().into_iter().find(|&c| c == id).unwrap(),
                        status: Status::Skipped,
                        detail: format!("check attests {id} for other generator families, config has `{family}`"),
                    }
                };
                println!("{} {}: {}", outcome.status, outcome.id, outcome.detail);
                all_green &= outcome.status != Status::Fail;
                outcomes.push(serde_json::json!({
                    "id": outcome.id,
                    "status": outcome.status,
                    "detail": outcome.detail,
                }));
            }
            let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let summary = serde_json::json!({
                "suite": suite_name,
                "seed": cfg.seed,
                "generator_family": family,
                "checks": outcomes,
            });
            write_json(&out_dir.join("verify_report.json"), &summary)?;
            Ok(if all_green { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Simulate { common, csv } => {
            let cfg = resolve_config(&common)?;
            setup_threads(&cfg);
            let files = pipelines::simulate(&cfg, csv)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { bin, meta, out } => {
            pipelines::export(&bin, &meta, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
