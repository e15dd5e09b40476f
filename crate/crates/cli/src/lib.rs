//! Library surface of the experiment driver, so the commands are callable
//! from integration tests as well as from the binary.

pub mod commands;

pub use commands::{
    run_attack, run_eval, run_gen_sbm, run_import, run_sweep, run_train, AttackArgs, EvalArgs,
    GenSbmArgs, ImportArgs, RunRecord, SweepArgs, SweepOutput, SweepRow, TrainArgs,
};
