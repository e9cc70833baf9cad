//! Two detectors that per-class mAP rates identically.
//!
//! Detector A finds every object with high, well-ordered scores. Detector B
//! finds the same objects but ranks its correct boxes below a pile of
//! spurious and misclassified ones from other classes and images. Each
//! class's own ranking still puts every true positive first, so per-class
//! AP (and mAP) is 1.0 for both; the class-pooled and per-image metrics tell
//! them apart.

use crate::fixtures::{PATHOLOGY_DETS_A_JSON, PATHOLOGY_DETS_B_JSON, PATHOLOGY_GT_JSON};
use crate::io::{parse_dataset, parse_results};

use super::{evaluate, DetectionResultSet, EvalConfig, GroundTruthSet, MetricReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PathologyDemo {
    pub detector_a: MetricReport,
    pub detector_b: MetricReport,
}

pub fn pathology_fixture() -> (GroundTruthSet, DetectionResultSet, DetectionResultSet) {
    let gts = parse_dataset(PATHOLOGY_GT_JSON).expect("shipped fixture parses");
    let a = parse_results(PATHOLOGY_DETS_A_JSON).expect("shipped fixture parses");
    let b = parse_results(PATHOLOGY_DETS_B_JSON).expect("shipped fixture parses");
    (gts, a, b)
}

pub fn demo_map_pathology() -> PathologyDemo {
    let (gts, a, b) = pathology_fixture();
    let config = EvalConfig::default();
    PathologyDemo {
        detector_a: evaluate(&a, &gts, &config).expect("fixture references resolve"),
        detector_b: evaluate(&b, &gts, &config).expect("fixture references resolve"),
    }
}
