//! Golden-file cases for the `detkit` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(rel: &str) -> String {
    crate_dir().join("fixtures").join(rel).display().to_string()
}

pub fn data(rel: &str) -> String {
    crate_dir().join("tests/data").join(rel).display().to_string()
}

pub struct Output {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub fn detkit<S: AsRef<str>>(args: &[S]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_detkit"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("detkit binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// `(golden file name, arguments)` for every command.
pub fn cases() -> Vec<(&'static str, Vec<String>)> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let gt = fixture("pathology/gt.json");
    let a = fixture("pathology/dets_a.json");
    let b = fixture("pathology/dets_b.json");
    vec![
        ("eval_single_voc50.tsv", s(&["eval", "--gt", &data("single_gt.json"), "--dets", &data("single_dets.json"), "--metric", "voc50"])),
        ("eval_pathology_a_all.tsv", s(&["eval", "--gt", &gt, "--dets", &a, "--metric", "all"])),
        ("eval_pathology_b_all.tsv", s(&["eval", "--gt", &gt, "--dets", &b, "--metric", "all"])),
        ("eval_pathology_b_all.json", s(&["eval", "--gt", &gt, "--dets", &b, "--metric", "all", "--format", "json"])),
        ("eval_pathology_b_coco.tsv", s(&["eval", "--gt", &gt, "--dets", &b, "--metric", "coco"])),
        ("eval_pathology_b_global.json", s(&["eval", "--gt", &gt, "--dets", &b, "--metric", "global", "--format", "json"])),
        ("eval_pathology_b_per_image.tsv", s(&["eval", "--gt", &gt, "--dets", &b, "--metric", "per-image"])),
        ("anchors_coco.txt", s(&["anchors", "--boxes", &fixture("coco_anchors.txt"), "--k", "9", "--scales", "3"])),
        ("anchors_k1.txt", s(&["anchors", "--boxes", &data("two_clusters.txt"), "--k", "1", "--scales", "1"])),
        ("anchors_two_clusters.txt", s(&["anchors", "--boxes", &data("two_clusters.txt"), "--k", "2", "--scales", "1", "--seed", "0"])),
        ("anchors_two_clusters_euclidean.txt", s(&["anchors", "--boxes", &data("two_clusters.txt"), "--k", "2", "--scales", "2", "--distance", "euclidean"])),
        ("layout_13_3_80.txt", s(&["layout", "--grid", "13", "--anchors", "3", "--classes", "80"])),
        ("layout_1_1_1.txt", s(&["layout", "--grid", "1", "--anchors", "1", "--classes", "1"])),
        ("layout_at.txt", s(&["layout", "--grid", "13", "--anchors", "3", "--classes", "80", "--at", "1,2,1,7"])),
        ("nms_single.json", s(&["nms", "--dets", &data("single_dets.json"), "--gt", &data("single_gt.json"), "--iou", "0.45", "--format", "json"])),
        ("nms_duplicates.json", s(&["nms", "--dets", &data("nms_duplicates.json"), "--gt", &data("single_gt.json"), "--iou", "0.45", "--format", "json"])),
        ("nms_chain.json", s(&["nms", "--dets", &data("nms_chain.json"), "--gt", &data("single_gt.json"), "--iou", "0.5", "--format", "json"])),
        ("plotdata_ap50.tsv", s(&["plotdata", "--table", &fixture("speed_accuracy_ap50.tsv")])),
        ("plotdata_coco_ap.tsv", s(&["plotdata", "--table", &fixture("speed_accuracy_coco_ap.tsv"), "--x", "time_ms", "--y", "metric"])),
        ("plotdata_empty.tsv", s(&["plotdata", "--table", &data("empty_table.tsv")])),
        ("demo_map_pathology.tsv", s(&["demo", "map-pathology"])),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    crate_dir().join("tests/golden").join(name)
}

/// Runs one case twice and compares both runs with the golden file.
/// Set `DETKIT_BLESS=1` to (re)write the golden instead.
pub fn check_case(name: &str, args: &[String]) -> Result<(), String> {
    let first = detkit(args);
    if first.code != 0 {
        return Err(format!("{name}: exit {} ({})", first.code, first.stderr.trim()));
    }
    let second = detkit(args);
    if first.stdout != second.stdout {
        return Err(format!("{name}: output differs between runs"));
    }
    let path = golden_path(name);
    if std::env::var_os("DETKIT_BLESS").is_some() {
        std::fs::write(&path, &first.stdout).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read(&path).map_err(|e| format!("{name}: {e}"))?;
    if want != first.stdout {
        return Err(format!(
            "{name}: output differs from golden\n--- golden\n{}\n--- got\n{}",
            String::from_utf8_lossy(&want),
            String::from_utf8_lossy(&first.stdout)
        ));
    }
    Ok(())
}

pub fn read_text(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}
