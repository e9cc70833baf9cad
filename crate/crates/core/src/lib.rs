//! Box math for grid-based single-stage detectors, anchor clustering, and
//! detection evaluation metrics.

pub mod anchors;
pub mod cli;
pub mod fixtures;
pub mod geometry;
pub mod head;
pub mod io;
pub mod metrics;

pub use geometry::{iou, nms, BBox, ClassId, ScoredBox};
