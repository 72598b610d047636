//! gridshed: frequency-security workbench CLI.

mod commands;
mod config;
mod pipeline;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "gridshed", version, about = "Grid frequency security and load-shedding workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample operating points and label them by time-domain simulation.
    GenData(commands::GenDataArgs),
    /// Train one FSA surrogate classifier on a generated dataset.
    TrainFsa(commands::TrainFsaArgs),
    /// Train a SAC load-shedding agent against an FSA backend.
    TrainAgent(commands::TrainAgentArgs),
    /// Evaluate a trained agent on the unsafe evaluation set.
    Evaluate(commands::EvaluateArgs),
    /// Table-III style backend comparison using existing models.
    CompareBackends {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full experiment pipeline from a config file.
    RunPipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export a post-contingency frequency trajectory as CSV.
    ReplayTrajectory(commands::ReplayArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result): (&str, anyhow::Result<()>) = match &cli.cmd {
        Cmd::GenData(args) => ("gen-data", commands::gen_data(args)),
        Cmd::TrainFsa(args) => ("train-fsa", commands::train_fsa(args).map(|_| ())),
        Cmd::TrainAgent(args) => (
            "train-agent",
            commands::train_agent_run(args, &config::SacOverrides::default()).map(|_| ()),
        ),
        Cmd::Evaluate(args) => ("evaluate", commands::evaluate_agent(args).map(|_| ())),
        Cmd::CompareBackends { config } => ("compare-backends", pipeline::compare_backends(config)),
        Cmd::RunPipeline { config } => ("run-pipeline", pipeline::run_pipeline(config)),
        Cmd::ReplayTrajectory(args) => ("replay-trajectory", commands::replay_trajectory(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error in stage {stage}: {err:#}");
            ExitCode::from(stage_code(stage))
        }
    }
}

fn stage_code(stage: &str) -> u8 {
    match stage {
        "gen-data" => 10,
        "train-fsa" => 11,
        "train-agent" => 12,
        "evaluate" => 13,
        "compare-backends" => 14,
        "run-pipeline" => 15,
        "replay-trajectory" => 16,
        _ => 1,
    }
}
