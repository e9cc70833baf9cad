//! Axis-aligned boxes, overlap, and greedy non-maximum suppression.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ClassId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate box: width {width} and height {height} must both be positive")]
    Degenerate { width: f64, height: f64 },
    #[error("box has a non-finite coordinate")]
    NonFinite,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
}

/// Axis-aligned rectangle stored in center + size form, in image pixels.
///
/// Construction rejects zero, negative, and non-finite sizes, so every `BBox`
/// in circulation has a strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    center_x: f64,
    center_y: f64,
    width: f64,
    height: f64,
}

impl BBox {
    pub fn new(center_x: f64, center_y: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        if ![center_x, center_y, width, height].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(GeometryError::Degenerate { width, height });
        }
        Ok(Self {
            center_x,
            center_y,
            width,
            height,
        })
    }

    /// Builds a box from `left, top, right, bottom` corners.
    pub fn from_corners(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self, GeometryError> {
        Self::new(
            (left + right) / 2.0,
            (top + bottom) / 2.0,
            right - left,
            bottom - top,
        )
    }

    /// Builds a box from the `[left, top, width, height]` interchange layout.
    pub fn from_ltwh(left: f64, top: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(left + width / 2.0, top + height / 2.0, width, height)
    }

    pub fn center_x(&self) -> f64 {
        self.center_x
    }

    pub fn center_y(&self) -> f64 {
        self.center_y
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn left(&self) -> f64 {
        self.center_x - self.width / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center_y - self.height / 2.0
    }

    pub fn right(&self) -> f64 {
        self.center_x + self.width / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.center_y + self.height / 2.0
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn to_ltwh(&self) -> [f64; 4] {
        [self.left(), self.top(), self.width, self.height]
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.right().min(other.right()) - self.left().max(other.left());
        let h = self.bottom().min(other.bottom()) - self.top().max(other.top());
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Always in `[0, 1]`; `0` for disjoint boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// A detection: a box with a confidence and a class label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    score: f64,
    pub class_id: ClassId,
}

impl ScoredBox {
    pub fn new(bbox: BBox, score: f64, class_id: ClassId) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(GeometryError::ScoreOutOfRange(score));
        }
        Ok(Self {
            bbox,
            score,
            class_id,
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

/// Indices of `scores` ordered by descending score, ties by ascending index.
pub(crate) fn rank_by_score<I>(scores: I) -> Vec<usize>
where
    I: IntoIterator<Item = f64>,
{
    let scores: Vec<f64> = scores.into_iter().collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| descending_score(scores[a], scores[b]).then(a.cmp(&b)));
    order
}

pub(crate) fn descending_score(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Indices (into `dets`) of the boxes that survive greedy per-class NMS, in
/// descending-score order.
pub fn nms_indices(dets: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for idx in rank_by_score(dets.iter().map(|d| d.score)) {
        let cand = &dets[idx];
        let suppressed = kept.iter().any(|&k| {
            dets[k].class_id == cand.class_id && dets[k].bbox.iou(&cand.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(idx);
        }
    }
    kept
}

/// Greedy per-class non-maximum suppression.
///
/// Boxes are visited by descending score (ties in input order). A box is kept
/// when its IOU with every already-kept box of the same class is at most
/// `iou_threshold`. Boxes of different classes never suppress each other.
pub fn nms(dets: &[ScoredBox], iou_threshold: f64) -> Vec<ScoredBox> {
    nms_indices(dets, iou_threshold)
        .into_iter()
        .map(|i| dets[i])
        .collect()
}
