use clap::{Parser, Subcommand};

use elr_gnn_cli::commands::{
    run_attack, run_eval, run_gen_sbm, run_import, run_sweep, run_train, AttackArgs, EvalArgs,
    GenSbmArgs, ImportArgs, SweepArgs, TrainArgs,
};

/// Experiment driver: attack graphs, train defenses, evaluate, sweep.
///
/// Machine-readable JSON goes to stdout, logs to stderr. Exit code 0 means
/// all requested work completed.
#[derive(Parser, Debug)]
#[command(name = "elr-gnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Perturb a graph's structure and write the attacked edge list.
    Attack(AttackArgs),
    /// Train a model on a dataset and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split part.
    Eval(EvalArgs),
    /// Run a (method x rate x seed) grid and emit a CSV summary.
    Sweep(SweepArgs),
    /// Generate a stochastic block model dataset.
    GenSbm(GenSbmArgs),
    /// Convert a classic citation dataset (content/cites files).
    Import(ImportArgs),
}

fn emit<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("outputs serialize")
    );
}

fn main() {
    let cli = Cli::parse();
    let outcome: anyhow::Result<bool> = match &cli.command {
        Command::Attack(args) => run_attack(args).map(|out| {
            emit(&out);
            true
        }),
        Command::Train(args) => run_train(args).map(|out| {
            emit(&out);
            true
        }),
        Command::Eval(args) => run_eval(args).map(|out| {
            emit(&out);
            true
        }),
        Command::Sweep(args) => run_sweep(args).map(|out| {
            let ok = out.failures.is_empty();
            emit(&out);
            ok
        }),
        Command::GenSbm(args) => run_gen_sbm(args).map(|out| {
            emit(&out);
            true
        }),
        Command::Import(args) => run_import(args).map(|out| {
            emit(&out);
            true
        }),
    };
    match outcome {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("error: some sweep cells failed; see the failures list");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
