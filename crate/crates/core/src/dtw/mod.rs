//! Template matching with sub-sequence DTW.

pub mod cost;
pub mod detect;
pub mod subseq;
pub mod template;
pub mod template_io;

pub use cost::cost_matrix;
pub use detect::{
    detect, detect_from_tracks, match_template, DetectConfig, Detection, Thresholds, TemplateTrack,
};
pub use subseq::{fixed_endpoint_dtw, subsequence_dtw, subsequence_dtw_rows, PathResult, Step};
pub use template::{assemble_template, Template, TemplateAccumulator};
