//! Experiment orchestration: feature cache preparation, training,
//! evaluation, parameter sweeps and feature statistics.

mod cache;
mod config;
mod run;
pub mod synth;
mod xor;

pub use cache::{
    bool_path, cmd_prepare, content_hash, load_encoder, raw_path, read_bool, read_raw, write_bool, write_raw,
    BoolFeatures, CacheMeta, PrepareSummary, RawFeatures, SplitCounts,
};
pub use config::{resolve_keywords, ExperimentConfig, SweepParam, SweepSpec, PRESETS};
pub use run::{
    cmd_eval, cmd_feature_stats, cmd_sweep, cmd_train, column_stats, model_path, sweep_point_config, ClassReport,
    EvalReport, FeatureStat, MetricsRecord, SweepRow,
};
pub use xor::{xor_dataset, xor_hyperparams, xor_selftest, XorReport};
