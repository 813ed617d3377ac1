//! Command-line runner for the crossbar LSTM experiments.
//!
//! ```text
//! rram-lstm run --config exp.conf --variant crossbar_noisy --replicas 5 --out out/noisy
//! rram-lstm compare --inputs out/ideal/report.json out/noisy/report.json --out out/cmp
//! ```
//!
//! Failures print a single JSON object on stderr and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rram_lstm::config::{ExperimentConfig, Variant};
use rram_lstm::experiment::{self, ReferenceConstants, RunReport};
use rram_lstm::Exec;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "rram-lstm", version, about = "Passive RRAM crossbar LSTM training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one variant and write its report artifacts.
    Run {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// digital | crossbar_ideal | crossbar_noisy
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of seeds, run as seed, seed+1, ...
        #[arg(long)]
        replicas: Option<usize>,
        /// Run replicas one after another instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Build the energy/area comparison table from finished runs.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    details: Vec<String>,
    code: u8,
}

impl From<rram_lstm::Error> for Failure {
    fn from(e: rram_lstm::Error) -> Self {
        let details = match &e {
            rram_lstm::Error::Config(v) => v.clone(),
            _ => Vec::new(),
        };
        let code = if e.kind() == "config" { 2 } else { 1 };
        Failure {
            kind: e.kind(),
            message: e.to_string(),
            details,
            code,
        }
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::Run {
            config,
            variant,
            seed,
            epochs,
            out,
            replicas,
            sequential,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(r) = replicas {
                cfg.replicas = r;
            }
            let exec = if sequential { Exec::Sequential } else { Exec::default() };
            let report = experiment::run_experiment_with(&cfg, exec)?;
            let runs: Vec<_> = report
                .runs
                .iter()
                .map(|r| {
                    json!({
                        "seed": r.seed,
                        "test_rmse": r.test_rmse.normalized,
                        "test_rmse_passengers": r.test_rmse.passengers,
                        "energy_J": r.energy.as_ref().map(|e| e.total_j),
                    })
                })
                .collect();
            Ok(json!({
                "variant": report.variant.as_str(),
                "report": cfg.output_dir.join("report.json"),
                "median_test_rmse": report.median_test_rmse(),
                "runs": runs,
            }))
        }
        Command::Compare { inputs, out } => {
            let reports = inputs
                .iter()
                .map(|p| RunReport::read(p))
                .collect::<rram_lstm::Result<Vec<_>>>()?;
            let table = experiment::comparison_report(&reports, &ReferenceConstants::default())?;
            let files = table.write(&out)?;
            Ok(json!({ "rows": table.rows.len(), "files": files }))
        }
    }
}

fn fail(f: &Failure) -> ExitCode {
    let body = json!({
        "error": {
            "kind": f.kind,
            "message": f.message,
            "details": f.details,
        }
    });
    eprintln!("{body}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            return fail(&Failure {
                kind: "usage",
                message: e.to_string().trim_end().to_string(),
                details: Vec::new(),
                code: 2,
            })
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(&f),
    }
}
