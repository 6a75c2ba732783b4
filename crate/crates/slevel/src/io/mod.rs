//! Data and configuration interchange: LIBSVM datasets, per-run metrics
//! tables, and the TOML run-file schema with solver dispatch.

pub mod config;
pub mod libsvm;
pub mod metrics_csv;

pub use config::{
    apply_override, load_run_config, np_spec_from_dataset, parse_run_config, solve_configured,
    AlpParams, FairnessParams, LevelStart, NpParams, OracleKind, ProblemConfig, ReferenceConfig,
    RunConfig, SolverConfig, SolverKind, ToyParams,
};
pub use libsvm::{parse_libsvm, read_libsvm, DatasetMatrix};
pub use metrics_csv::{write_metrics_csv, write_metrics_csv_file, METRICS_HEADER};
