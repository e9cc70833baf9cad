//! Interchange formats: COCO-style dataset and results documents, anchor
//! sample lists, and speed/accuracy tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::DimensionSample;
use crate::geometry::{BBox, ClassId, ScoredBox};
use crate::metrics::{Category, Detection, DetectionResultSet, GroundTruth, GroundTruthSet, ImageId, ImageInfo};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid {record}: {message}")]
    Validation { record: String, message: String },
}

impl IoError {
    fn parse_json(e: serde_json::Error) -> Self {
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    fn invalid(record: impl Into<String>, message: impl ToString) -> Self {
        IoError::Validation {
            record: record.into(),
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: ImageId,
    pub category_id: ClassId,
    pub bbox: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iscrowd: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: ClassId,
    pub name: String,
}

/// Ground-truth document: `images`, `annotations`, `categories`.
/// Unrecognized keys are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub categories: Vec<CategoryRecord>,
}

/// One entry of a results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub image_id: ImageId,
    pub category_id: ClassId,
    pub bbox: Vec<f64>,
    pub score: f64,
}

fn ltwh_box(bbox: &[f64], record: impl Fn() -> String) -> Result<BBox, IoError> {
    let [l, t, w, h] = bbox else {
        return Err(IoError::invalid(record(), format!("bbox needs 4 numbers, got {}", bbox.len())));
    };
    BBox::from_ltwh(*l, *t, *w, *h).map_err(|e| IoError::invalid(record(), e))
}

fn is_crowd(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Bool(b) => *b,
        serde_json::Value::Number(n) => n.as_f64() != Some(0.0),
        serde_json::Value::Null => false,
        _ => true,
    }
}

impl DatasetFile {
    pub fn into_ground_truth(self) -> Result<GroundTruthSet, IoError> {
        let images = self
            .images
            .into_iter()
            .map(|r| ImageInfo {
                id: r.id,
                width: r.width,
                height: r.height,
            })
            .collect();
        let categories = self
            .categories
            .into_iter()
            .map(|c| Category { id: c.id, name: c.name })
            .collect();
        let mut gts = GroundTruthSet::new(images, categories).map_err(|e| IoError::invalid("registry", e))?;
        for ann in self.annotations {
            let record = || format!("annotation {}", ann.id);
            if ann.iscrowd.as_ref().is_some_and(is_crowd) {
                return Err(IoError::invalid(record(), "crowd regions unsupported"));
            }
            let bbox = ltwh_box(&ann.bbox, record)?;
            gts.add(
                ann.image_id,
                GroundTruth {
                    id: ann.id,
                    class_id: ann.category_id,
                    bbox,
                },
            )
            .map_err(|e| IoError::invalid(record(), e))?;
        }
        Ok(gts)
    }
}

pub fn parse_dataset(text: &str) -> Result<GroundTruthSet, IoError> {
    serde_json::from_str::<DatasetFile>(text)
        .map_err(IoError::parse_json)?
        .into_ground_truth()
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<GroundTruthSet, IoError> {
    parse_dataset(&read(path.as_ref())?)
}

/// Parses a results document. Box and score validity are checked here;
/// references are checked by [`validate_results`].
pub fn parse_results(text: &str) -> Result<DetectionResultSet, IoError> {
    let records: Vec<ResultRecord> = serde_json::from_str(text).map_err(IoError::parse_json)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let record = || format!("result {i} (image {})", r.image_id);
            let bbox = ltwh_box(&r.bbox, record)?;
            let det = ScoredBox::new(bbox, r.score, r.category_id).map_err(|e| IoError::invalid(record(), e))?;
            Ok(Detection {
                image_id: r.image_id,
                det,
            })
        })
        .collect()
}

pub fn load_results(path: impl AsRef<Path>) -> Result<DetectionResultSet, IoError> {
    parse_results(&read(path.as_ref())?)
}

/// Checks that every result names a registered image and category.
pub fn validate_results(dets: &DetectionResultSet, gts: &GroundTruthSet) -> Result<(), IoError> {
    for (i, d) in dets.detections().iter().enumerate() {
        let record = || format!("result {i} (image {})", d.image_id);
        gts.image_position(d.image_id).map_err(|e| IoError::invalid(record(), e))?;
        if !gts.has_category(d.det.class_id) {
            return Err(IoError::invalid(record(), format!("unknown category id {}", d.det.class_id)));
        }
    }
    Ok(())
}

pub fn result_records(dets: &DetectionResultSet) -> Vec<ResultRecord> {
    dets.detections()
        .iter()
        .map(|d| ResultRecord {
            image_id: d.image_id,
            category_id: d.det.class_id,
            bbox: d.det.bbox.to_ltwh().to_vec(),
            score: d.det.score(),
        })
        .collect()
}

/// Serializes detections as a results document (shortest round-trip floats).
pub fn emit_results(dets: &DetectionResultSet) -> String {
    let mut out = serde_json::to_string_pretty(&result_records(dets)).expect("records serialize");
    out.push('\n');
    out
}

/// Parses `width height` lines; blank lines and `#` comments are skipped.
pub fn parse_dimension_samples(text: &str) -> Result<Vec<DimensionSample>, IoError> {
    let mut samples = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| IoError::Parse {
            line: n + 1,
            column: 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [w, h] = fields.as_slice() else {
            return Err(bad(format!("expected `width height`, got {line:?}")));
        };
        let w: f64 = w.parse().map_err(|_| bad(format!("bad width {w:?}")))?;
        let h: f64 = h.parse().map_err(|_| bad(format!("bad height {h:?}")))?;
        samples.push(DimensionSample::new(w, h).map_err(|e| bad(e.to_string()))?);
    }
    Ok(samples)
}

pub fn load_dimension_samples(path: impl AsRef<Path>) -> Result<Vec<DimensionSample>, IoError> {
    parse_dimension_samples(&read(path.as_ref())?)
}

pub const SPEED_TABLE_HEADER: &str = "method\ttime_ms\tmetric";

/// One benchmark row. The raw text of each numeric field is kept so tables
/// can be re-emitted byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedAccuracyRow {
    pub method: String,
    pub time_ms: f64,
    pub metric: f64,
    time_text: String,
    metric_text: String,
}

impl SpeedAccuracyRow {
    pub fn time_text(&self) -> &str {
        &self.time_text
    }

    pub fn metric_text(&self) -> &str {
        &self.metric_text
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeedAccuracyTable {
    pub rows: Vec<SpeedAccuracyRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableColumn {
    TimeMs,
    Metric,
}

impl TableColumn {
    pub fn name(self) -> &'static str {
        match self {
            TableColumn::TimeMs => "time_ms",
            TableColumn::Metric => "metric",
        }
    }

    fn text(self, row: &SpeedAccuracyRow) -> &str {
        match self {
            TableColumn::TimeMs => &row.time_text,
            TableColumn::Metric => &row.metric_text,
        }
    }
}

/// Parses a `method<TAB>time_ms<TAB>metric` table. Times must be positive and
/// metrics lie in `[0, 100]`.
pub fn parse_speed_table(text: &str) -> Result<SpeedAccuracyTable, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SPEED_TABLE_HEADER => {}
        Some((_, header)) => {
            return Err(IoError::Parse {
                line: 1,
                column: 1,
                message: format!("expected header {SPEED_TABLE_HEADER:?}, got {header:?}"),
            })
        }
        None => return Ok(SpeedAccuracyTable::default()),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| IoError::Parse {
            line: n + 1,
            column: 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [method, time, metric] = fields.as_slice() else {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let time_ms: f64 = time.parse().map_err(|_| bad(format!("bad time {time:?}")))?;
        let value: f64 = metric.parse().map_err(|_| bad(format!("bad metric {metric:?}")))?;
        if !(time_ms > 0.0 && time_ms.is_finite()) {
            return Err(bad(format!("time {time} must be positive")));
        }
        if !(0.0..=100.0).contains(&value) {
            return Err(bad(format!("metric {metric} outside [0, 100]")));
        }
        rows.push(SpeedAccuracyRow {
            method: method.to_string(),
            time_ms,
            metric: value,
            time_text: time.to_string(),
            metric_text: metric.to_string(),
        });
    }
    Ok(SpeedAccuracyTable { rows })
}

/// Plot-ready TSV: `method`, then the chosen x and y columns, rows ordered by
/// ascending time. Empty tables produce no output.
pub fn emit_plot_data(table: &SpeedAccuracyTable, x: TableColumn, y: TableColumn) -> String {
    let mut rows: Vec<&SpeedAccuracyRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms));
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let _ = writeln!(out, "method\t{}\t{}", x.name(), y.name());
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}", r.method, x.text(r), y.text(r));
    }
    out
}
