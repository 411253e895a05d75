use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moduli::checkpoint::MANIFEST_FILE;
use moduli::experiment::{
    evaluate_run, export_heatmap, run_lottery, run_sweep, run_training, ExperimentConfig, CHECKPOINT_DIR,
};
use moduli::Error;
use serde_json::json;

/// Relative `output_dir` values in configs are resolved against this
/// directory when it is set.
const OUTPUT_ROOT_VAR: &str = "MODULI_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "moduli", version, about = "Moduli-regularized sparse RNN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model as described by a config file.
    Train { config: PathBuf },
    /// Retrain on the masks of a finished run with fresh weights.
    Lottery {
        config: PathBuf,
        /// Run directory or checkpoint directory holding the masks.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory; defaults to `<output_dir>/lottery_seed<N>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per (lambda, trial) and summarize.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        trials: usize,
    },
    /// Export |W_hh| of one layer as CSV.
    Heatmap {
        /// Run directory or checkpoint directory.
        dir: PathBuf,
        #[arg(long)]
        layer: usize,
        /// Order neurons by their embedding coordinates.
        #[arg(long)]
        ordered: bool,
        /// Defaults to `<dir>/heatmap_layer<k>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the final checkpoint of a run directory.
    Eval { dir: PathBuf },
}

fn output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from)
}

fn load_config(path: &Path) -> moduli::Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?.with_output_root(output_root().as_deref()))
}

fn checkpoint_dir(dir: &Path) -> PathBuf {
    if dir.join(MANIFEST_FILE).exists() {
        dir.to_path_buf()
    } else {
        dir.join(CHECKPOINT_DIR)
    }
}

fn run(cmd: Command) -> moduli::Result<serde_json::Value> {
    match cmd {
        Command::Train { config } => {
            let cfg = load_config(&config)?;
            let outcome = run_training(&cfg)?;
            Ok(json!({
                "output_dir": outcome.output_dir,
                "summary": outcome.summary,
            }))
        }
        Command::Lottery {
            config,
            from,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.run.output_dir = match out {
                Some(o) => o,
                None => cfg.run.output_dir.join(format!("lottery_seed{seed}")),
            };
            let outcome = run_lottery(&cfg, &checkpoint_dir(&from), seed)?;
            Ok(json!({
                "output_dir": outcome.output_dir,
                "summary": outcome.summary,
            }))
        }
        Command::Sweep {
            config,
            lambdas,
            trials,
        } => {
            let cfg = load_config(&config)?;
            let summary = run_sweep(&cfg, &lambdas, trials)?;
            Ok(json!({
                "output_dir": cfg.run.output_dir,
                "summary": summary,
            }))
        }
        Command::Heatmap {
            dir,
            layer,
            ordered,
            out,
        } => {
            let out = out.unwrap_or_else(|| dir.join(format!("heatmap_layer{layer}.csv")));
            export_heatmap(&checkpoint_dir(&dir), layer, ordered, &out)?;
            Ok(json!({ "heatmap": out }))
        }
        Command::Eval { dir } => Ok(serde_json::to_value(evaluate_run(&dir)?)?),
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string(), 2),
    };
    match run(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), error_message(&e), 1),
    }
}

fn error_message(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    msg
}
