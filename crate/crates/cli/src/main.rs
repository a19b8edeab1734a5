mod commands;
mod config;
mod init_state;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "codefusion", version, about = "Fused code/memory graphs and the models trained on them")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// binary, scalar or categorical. Overrides the `encoding` key.
    #[arg(long, global = true)]
    encoding: Option<String>,
    /// Width of binary encodings. Overrides the `bits` key.
    #[arg(long, global = true)]
    bits: Option<u32>,
    /// Extra `KEY=VALUE` config entries; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Programs and matching initial-state files. Without `--program` the
/// `workload` config key picks a bundled workload.
#[derive(Args, Debug, Clone, Default)]
pub struct Inputs {
    #[arg(long)]
    program: Vec<PathBuf>,
    /// One per `--program`, in the same order.
    #[arg(long)]
    init: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a program and write its listing and control-flow graph.
    Parse {
        #[arg(long)]
        program: PathBuf,
    },
    /// Execute a program and write its snapshot trace.
    Trace {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Write the fused graph of a program.
    Graph {
        #[arg(long)]
        program: PathBuf,
    },
    /// Train a GGNN and write its checkpoint and loss log.
    Train {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Score predictors on the held-out part of each trace.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        /// Use this GGNN instead of training one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run one of the bundled experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Experiment {
    /// Loop-bound generalization of an MLP per numeric encoding.
    Generalization,
    /// Full versus source/target-only graphs on the pointer-chase suite.
    Ablation,
    /// GGNN accuracy per propagation step count.
    PropSweep,
    /// Program classification from GGNN embeddings.
    Classify,
    /// Loop-exit prediction on held-out bounds.
    LoopExit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
