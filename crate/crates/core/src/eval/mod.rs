//! Event-based scoring and threshold tuning.

pub mod events;
pub mod metrics;
pub mod tune;

pub use events::{
    format_detections, read_annotations, read_detections, write_annotations, write_detections,
    DetectionRecord, Event,
};
pub use metrics::{match_events, micro_f1, Collars, Counts, MetricsReport};
pub use tune::{threshold_grid, tune_thresholds, ThresholdMode, TuneResult};
