//! Reference data compiled into the crate.

pub const COCO_ANCHORS_TXT: &str = include_str!("../fixtures/coco_anchors.txt");
pub const SPEED_ACCURACY_COCO_AP_TSV: &str = include_str!("../fixtures/speed_accuracy_coco_ap.tsv");
pub const SPEED_ACCURACY_AP50_TSV: &str = include_str!("../fixtures/speed_accuracy_ap50.tsv");
pub const COCO_TEST_RESULTS_TSV: &str = include_str!("../fixtures/coco_test_results.tsv");

pub const PATHOLOGY_GT_JSON: &str = include_str!("../fixtures/pathology/gt.json");
pub const PATHOLOGY_DETS_A_JSON: &str = include_str!("../fixtures/pathology/dets_a.json");
pub const PATHOLOGY_DETS_B_JSON: &str = include_str!("../fixtures/pathology/dets_b.json");
