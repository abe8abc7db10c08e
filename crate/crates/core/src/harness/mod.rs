//! Library side of the command-line tool: run configuration, the six
//! commands and their output tables.

pub mod bench;
pub mod commands;
pub mod config;
pub mod eval;
pub mod tables;

pub use bench::{bench, fit_line, grid_for, BenchReport, BenchRow, LineFit};
pub use commands::{
    export_embeddings, generate, infer, load_dataset_spec, load_labelings, node_embeddings, parse_dataset_spec, train,
    GenerateSummary, InferOutput, InferRow, LabelingRecord, TraceRow, TrainSummary, LABELINGS_FILE, PARAMS_FILE,
};
pub use config::{BenchConfig, Engine, EvalConfig, RunConfig, Solver, Split, Trainer};
pub use eval::{eval, EvalReport, EvalRow, HistogramRow, POTENTIAL_COLUMNS};
pub use tables::{TimingRecord, TIMING_FILE};
