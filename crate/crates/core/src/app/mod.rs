//! Configuration and the command implementations behind the `terrec` binary.

mod commands;
mod config;

pub use commands::{
    ablate, bench, dataset_grid, evaluate, gen_data, infer, load_dataset, load_model, train,
    BenchRow, EvalReport, EvalSource, GenSummary, TrainSummary, CHECKPOINT_EXT, DATASET_EXT,
    ESTIMATES_EXT, LOSS_CSV_HEADER,
};
pub use config::{keys_help, parse_pairs, ModelChoice, RunConfig, KEYS};
