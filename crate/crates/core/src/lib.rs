//! Evaluation engine for lifelong-learning experiment logs.
//!
//! The crate covers the full path from raw JSONL logs to verdicts:
//!
//! - [`ingest`]: parse, validate, and assemble logs into lifetimes, the
//!   alternating sequences of learning and evaluation blocks.
//! - [`preprocess`]: range-shift and smooth performance series, reduce
//!   evaluation blocks to per-task scalars.
//! - [`metrics`]: the lifelong-learning metrics (performance maintenance,
//!   forward/backward transfer, relative performance, sample efficiency,
//!   performance recovery) and their demonstrates-LL thresholds.
//! - [`stats`]: sample-size planning, threshold significance tests,
//!   cross-run aggregation, rank correlation, cost overhead.
//! - [`scenario`]: deterministic condensed/dispersed/custom curriculum
//!   generation with provenance.
//! - [`simulate`]: synthetic agents with closed-form dynamics, used as
//!   ground-truth oracles for the metric engine.
//! - [`rng`]: the fixed, reproducible PRNG everything above draws from.

pub mod ingest;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod scenario;
pub mod simulate;
pub mod stats;

pub use ingest::{
    assemble_lifetime, parse_csv_log, parse_log, serialize_records, validate_run, Finding,
    IngestError, ValidationReport,
};
pub use metrics::{
    backward_transfer, backward_transfer_scoped, contrast, evaluate_thresholds, forward_transfer,
    forward_transfer_scoped, performance_maintenance, performance_recovery, ratio,
    relative_performance, sample_efficiency, threshold_spec, Direction, MetricName, MetricResult,
    MetricsError, SkippedUnit, ThresholdVerdict, TransferMode, UnitValue,
};
pub use model::{
    Block, BlockType, ExperienceRecord, LearningBlockRef, Lifetime, STECurve, TaskId, TaskSeries,
};
pub use preprocess::{
    preprocess, smooth_series, ste_source, BlockSummaries, EvalSummarizer, LearnBlock,
    PreprocessConfig, PreprocessError, Preprocessed, PreprocessManifest, SteSource,
};
pub use scenario::{
    build_protocol, generate, generate_condensed, generate_custom, generate_dispersed,
    BlockSchedule, EvaluationProtocol, PlannedBlock, Provenance, ScenarioError, ScenarioSpec,
    ScenarioType, TaskVariants,
};
pub use simulate::{
    simulate_lifetime, simulate_ste, simulate_ste_records, SimulateError, SyntheticAgentParams,
    TaskDynamics, TransferEntry,
};
pub use stats::{
    aggregate_runs, binarized_threshold_test, cost_overhead, one_tailed_t_test,
    required_sample_size, spearman_correlation, AggregateRow, AggregateTable, BinarizedTest,
    Spearman, StatsError, TTest,
};
