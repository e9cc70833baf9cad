//! Detection-head math: box decoding and its inverse, training-signal
//! gradients, truth assignment, and the flat prediction-tensor layout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, ClassId, GeometryError};

/// Clamp applied to fractional cell offsets before taking the logit.
pub const OFFSET_EPS: f64 = 1e-7;

/// Probability clamp applied before the logs in [`bce_loss`].
pub const PROB_EPS: f64 = 1e-12;

/// Overlap above which a non-best prior is ignored by [`assign_yolo`].
pub const DEFAULT_IGNORE_THRESHOLD: f64 = 0.5;

pub const DEFAULT_POS_THRESHOLD: f64 = 0.7;
pub const DEFAULT_NEG_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadError {
    #[error("box center falls in cell ({actual_col}, {actual_row}), not the given cell ({col}, {row})")]
    CellMismatch {
        col: u32,
        row: u32,
        actual_col: i64,
        actual_row: i64,
    },
    #[error("tensor coordinate out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid anchor prior {width}x{height}")]
    InvalidPrior { width: f64, height: f64 },
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("invalid thresholds: negative {neg} must not exceed positive {pos}")]
    InvalidThresholds { neg: f64, pos: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`] on `(0, 1)`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The four box coordinates in network space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxOffsets {
    pub t_x: f64,
    pub t_y: f64,
    pub t_w: f64,
    pub t_h: f64,
}

impl BoxOffsets {
    pub fn new(t_x: f64, t_y: f64, t_w: f64, t_h: f64) -> Self {
        Self { t_x, t_y, t_w, t_h }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.t_x, self.t_y, self.t_w, self.t_h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// One prior's worth of raw head output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub offsets: BoxOffsets,
    pub objectness_logit: f64,
    pub class_logits: Vec<f64>,
}

/// A grid position. `stride` converts grid units to image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub col: u32,
    pub row: u32,
    pub stride: f64,
}

impl GridCell {
    pub fn new(col: u32, row: u32, stride: f64) -> Self {
        Self { col, row, stride }
    }

    /// Pixel-space center of the cell.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.col as f64 + 0.5) * self.stride,
            (self.row as f64 + 0.5) * self.stride,
        )
    }
}

/// Dimension prior (anchor box size) in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPrior {
    pub width: f64,
    pub height: f64,
}

impl AnchorPrior {
    pub fn new(width: f64, height: f64) -> Result<Self, HeadError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(HeadError::InvalidPrior { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Maps raw coordinates to an image-space box:
/// center = (sigmoid(t) + cell) * stride, size = prior * exp(t).
pub fn decode(t: &BoxOffsets, cell: &GridCell, prior: &AnchorPrior) -> Result<BBox, HeadError> {
    let cx = (sigmoid(t.t_x) + cell.col as f64) * cell.stride;
    let cy = (sigmoid(t.t_y) + cell.row as f64) * cell.stride;
    let w = prior.width * t.t_w.exp();
    let h = prior.height * t.t_h.exp();
    Ok(BBox::new(cx, cy, w, h)?)
}

fn cell_offset(center: f64, stride: f64, index: u32) -> Option<f64> {
    let off = center / stride - index as f64;
    (0.0..=1.0).contains(&off).then(|| off.clamp(OFFSET_EPS, 1.0 - OFFSET_EPS))
}

/// Inverse of [`decode`]: the raw coordinates that reproduce `b` from `cell`
/// and `prior`. Offsets landing exactly on a cell edge are clamped by
/// [`OFFSET_EPS`] before the logit.
pub fn encode(b: &BBox, cell: &GridCell, prior: &AnchorPrior) -> Result<BoxOffsets, HeadError> {
    let fx = cell_offset(b.center_x(), cell.stride, cell.col);
    let fy = cell_offset(b.center_y(), cell.stride, cell.row);
    let (Some(fx), Some(fy)) = (fx, fy) else {
        return Err(HeadError::CellMismatch {
            col: cell.col,
            row: cell.row,
            actual_col: (b.center_x() / cell.stride).floor() as i64,
            actual_row: (b.center_y() / cell.stride).floor() as i64,
        });
    };
    Ok(BoxOffsets {
        t_x: logit(fx),
        t_y: logit(fy),
        t_w: (b.width() / prior.width).ln(),
        t_h: (b.height() / prior.height).ln(),
    })
}

/// Negative gradient of the half sum-of-squares coordinate loss: `target - predicted`.
pub fn coord_gradient(target: &BoxOffsets, predicted: &BoxOffsets) -> BoxOffsets {
    BoxOffsets {
        t_x: target.t_x - predicted.t_x,
        t_y: target.t_y - predicted.t_y,
        t_w: target.t_w - predicted.t_w,
        t_h: target.t_h - predicted.t_h,
    }
}

/// Half sum-of-squares between two coordinate vectors.
pub fn coord_loss(target: &BoxOffsets, predicted: &BoxOffsets) -> f64 {
    coord_gradient(target, predicted)
        .to_array()
        .iter()
        .map(|d| 0.5 * d * d)
        .sum()
}

/// Binary cross-entropy of probability `p` against target `y`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// d/dz of `bce_loss(sigmoid(z), y)`.
pub fn bce_gradient_wrt_logit(logit: f64, y: f64) -> f64 {
    sigmoid(logit) - y
}

/// A prior instantiated at a grid position. Its box is centered on the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedPrior {
    pub cell: GridCell,
    pub prior: AnchorPrior,
}

impl PlacedPrior {
    pub fn new(cell: GridCell, prior: AnchorPrior) -> Self {
        Self { cell, prior }
    }

    pub fn to_box(&self) -> BBox {
        let (cx, cy) = self.cell.center();
        BBox::new(cx, cy, self.prior.width, self.prior.height)
            .expect("anchor priors have positive size")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentLabel {
    Positive(usize),
    Ignored,
    Negative,
}

/// IOU of every prior (rows) against every ground truth (columns).
pub fn overlap_matrix(priors: &[PlacedPrior], ground_truths: &[BBox]) -> Vec<Vec<f64>> {
    priors
        .iter()
        .map(|p| {
            let pb = p.to_box();
            ground_truths.iter().map(|g| pb.iou(g)).collect()
        })
        .collect()
}

fn argmax_first<I: IntoIterator<Item = (usize, f64)>>(it: I) -> Option<(usize, f64)> {
    it.into_iter().fold(None, |best, (i, v)| match best {
        Some((_, bv)) if bv >= v => best,
        _ => Some((i, v)),
    })
}

/// Best-prior assignment with an ignore band.
///
/// Ground truths are visited in index order; each claims its highest-overlap
/// prior that no earlier ground truth has claimed (ties to the lowest prior
/// index). A claimed prior is `Positive` no matter what else it overlaps.
/// Any other prior whose overlap with some ground truth exceeds
/// `ignore_threshold` is `Ignored`; the rest are `Negative`. Ground truths
/// left over once every prior is claimed stay unassigned.
///
/// `overlaps[p][g]` is the IOU of prior `p` with ground truth `g`.
pub fn assign_yolo_from_overlaps(overlaps: &[Vec<f64>], num_gts: usize, ignore_threshold: f64) -> Vec<AssignmentLabel> {
    let mut labels = vec![AssignmentLabel::Negative; overlaps.len()];
    for g in 0..num_gts {
        let best = argmax_first(
            overlaps
                .iter()
                .enumerate()
                .filter(|(p, _)| !matches!(labels[*p], AssignmentLabel::Positive(_)))
                .map(|(p, row)| (p, row[g])),
        );
        if let Some((p, _)) = best {
            labels[p] = AssignmentLabel::Positive(g);
        }
    }
    for (label, row) in labels.iter_mut().zip(overlaps) {
        if *label == AssignmentLabel::Negative && row.iter().any(|&o| o > ignore_threshold) {
            *label = AssignmentLabel::Ignored;
        }
    }
    labels
}

pub fn assign_yolo(priors: &[PlacedPrior], ground_truths: &[BBox], ignore_threshold: f64) -> Vec<AssignmentLabel> {
    assign_yolo_from_overlaps(
        &overlap_matrix(priors, ground_truths),
        ground_truths.len(),
        ignore_threshold,
    )
}

/// Two-threshold assignment: per prior, the best overlap `m` over all ground
/// truths decides `Positive` (m >= pos), `Ignored` (neg <= m < pos), or
/// `Negative` (m < neg).
pub fn assign_dual_threshold_from_overlaps(
    overlaps: &[Vec<f64>],
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<Vec<AssignmentLabel>, HeadError> {
    if !(0.0..=1.0).contains(&neg_threshold) || !(0.0..=1.0).contains(&pos_threshold) || neg_threshold > pos_threshold {
        return Err(HeadError::InvalidThresholds {
            neg: neg_threshold,
            pos: pos_threshold,
        });
    }
    Ok(overlaps
        .iter()
        .map(|row| match argmax_first(row.iter().copied().enumerate()) {
            Some((g, m)) if m >= pos_threshold => AssignmentLabel::Positive(g),
            Some((_, m)) if m >= neg_threshold => AssignmentLabel::Ignored,
            _ => AssignmentLabel::Negative,
        })
        .collect())
}

pub fn assign_dual_threshold(
    priors: &[PlacedPrior],
    ground_truths: &[BBox],
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<Vec<AssignmentLabel>, HeadError> {
    assign_dual_threshold_from_overlaps(&overlap_matrix(priors, ground_truths), pos_threshold, neg_threshold)
}

/// Channels within one prior's slot, in layout order. Class channels follow
/// [`Channel::Objectness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    X = 0,
    Y = 1,
    W = 2,
    H = 3,
    Objectness = 4,
}

pub const CLASS_CHANNEL_OFFSET: usize = 5;

/// Shape of one scale's prediction tensor: `N x N x [A * (4 + 1 + C)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub grid_size: usize,
    pub anchors_per_cell: usize,
    pub num_classes: usize,
}

/// `(row, col, anchor, channel)` position inside a [`GridSpec`] tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorCoord {
    pub row: usize,
    pub col: usize,
    pub anchor: usize,
    pub channel: usize,
}

impl GridSpec {
    pub fn new(grid_size: usize, anchors_per_cell: usize, num_classes: usize) -> Result<Self, HeadError> {
        if grid_size == 0 || anchors_per_cell == 0 || num_classes == 0 {
            return Err(HeadError::InvalidGrid(format!(
                "grid {grid_size}, anchors {anchors_per_cell}, classes {num_classes} must all be positive"
            )));
        }
        Ok(Self {
            grid_size,
            anchors_per_cell,
            num_classes,
        })
    }

    /// Channels per prior: 4 box coordinates, objectness, then classes.
    pub fn channels_per_anchor(&self) -> usize {
        CLASS_CHANNEL_OFFSET + self.num_classes
    }

    /// Channels per grid cell.
    pub fn depth(&self) -> usize {
        self.anchors_per_cell * self.channels_per_anchor()
    }

    pub fn len(&self) -> usize {
        self.grid_size * self.grid_size * self.depth()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, at: TensorCoord) -> Result<usize, HeadError> {
        let n = self.grid_size;
        let depth = self.channels_per_anchor();
        if at.row >= n || at.col >= n || at.anchor >= self.anchors_per_cell || at.channel >= depth {
            return Err(HeadError::OutOfBounds(format!(
                "({}, {}, {}, {}) in {}x{}x{}x{}",
                at.row, at.col, at.anchor, at.channel, n, n, self.anchors_per_cell, depth
            )));
        }
        Ok(((at.row * n + at.col) * self.anchors_per_cell + at.anchor) * depth + at.channel)
    }

    pub fn unindex(&self, offset: usize) -> Result<TensorCoord, HeadError> {
        if offset >= self.len() {
            return Err(HeadError::OutOfBounds(format!(
                "offset {offset} >= {}",
                self.len()
            )));
        }
        let depth = self.channels_per_anchor();
        let channel = offset % depth;
        let rest = offset / depth;
        let anchor = rest % self.anchors_per_cell;
        let rest = rest / self.anchors_per_cell;
        Ok(TensorCoord {
            row: rest / self.grid_size,
            col: rest % self.grid_size,
            anchor,
            channel,
        })
    }

    /// Reads one prior's slot out of a flat tensor.
    pub fn prediction_at(&self, tensor: &[f64], row: usize, col: usize, anchor: usize) -> Result<RawPrediction, HeadError> {
        if tensor.len() != self.len() {
            return Err(HeadError::OutOfBounds(format!(
                "tensor has {} elements, layout needs {}",
                tensor.len(),
                self.len()
            )));
        }
        let base = self.index(TensorCoord {
            row,
            col,
            anchor,
            channel: 0,
        })?;
        let slot = &tensor[base..base + self.channels_per_anchor()];
        Ok(RawPrediction {
            offsets: BoxOffsets::new(slot[0], slot[1], slot[2], slot[3]),
            objectness_logit: slot[Channel::Objectness as usize],
            class_logits: slot[CLASS_CHANNEL_OFFSET..].to_vec(),
        })
    }
}

/// A labelled training target: box plus the set of classes it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthBox {
    pub bbox: BBox,
    pub classes: Vec<ClassId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub coord: f64,
    pub objectness: f64,
    pub class: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.coord + self.objectness + self.class
    }
}

/// Training loss over a set of priors given their assignment labels.
///
/// Positive priors pay coordinate SSE against the encoded ground truth,
/// objectness BCE toward 1, and per-class BCE toward the multilabel target.
/// Negative priors pay objectness BCE toward 0 only. Ignored priors pay
/// nothing.
pub fn head_loss(
    priors: &[PlacedPrior],
    predictions: &[RawPrediction],
    labels: &[AssignmentLabel],
    truths: &[TruthBox],
) -> Result<LossTerms, HeadError> {
    let mut terms = LossTerms::default();
    for ((placed, pred), label) in priors.iter().zip(predictions).zip(labels) {
        match *label {
            AssignmentLabel::Positive(g) => {
                let truth = &truths[g];
                let target = encode(&truth.bbox, &placed.cell, &placed.prior)?;
                terms.coord += coord_loss(&target, &pred.offsets);
                terms.objectness += bce_loss(sigmoid(pred.objectness_logit), 1.0);
                for (c, &z) in pred.class_logits.iter().enumerate() {
                    let y = if truth.classes.contains(&(c as ClassId)) { 1.0 } else { 0.0 };
                    terms.class += bce_loss(sigmoid(z), y);
                }
            }
            AssignmentLabel::Negative => {
                terms.objectness += bce_loss(sigmoid(pred.objectness_logit), 0.0);
            }
            AssignmentLabel::Ignored => {}
        }
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use AssignmentLabel::*;

    fn prior(w: f64, h: f64) -> AnchorPrior {
        AnchorPrior::new(w, h).unwrap()
    }

    #[test]
    fn decode_zero_offsets() {
        let b = decode(&BoxOffsets::default(), &GridCell::new(0, 0, 1.0), &prior(10.0, 13.0)).unwrap();
        assert_eq!((b.center_x(), b.center_y(), b.width(), b.height()), (0.5, 0.5, 10.0, 13.0));

        let b = decode(&BoxOffsets::default(), &GridCell::new(5, 7, 1.0), &prior(116.0, 90.0)).unwrap();
        assert_eq!((b.center_x(), b.center_y(), b.width(), b.height()), (5.5, 7.5, 116.0, 90.0));
    }

    #[test]
    fn decode_scales_by_stride_and_exp() {
        let t = BoxOffsets::new(0.0, 0.0, std::f64::consts::LN_2, 0.0);
        let b = decode(&t, &GridCell::new(2, 1, 32.0), &prior(16.0, 16.0)).unwrap();
        assert!((b.width() - 32.0).abs() < 1e-12);
        assert_eq!((b.center_x(), b.center_y()), (80.0, 48.0));
    }

    #[test]
    fn encode_inverts_simple_cases() {
        let p = prior(20.0, 30.0);
        let b = BBox::new(3.5, 3.5, 20.0, 30.0).unwrap();
        let t = encode(&b, &GridCell::new(3, 3, 1.0), &p).unwrap();
        assert_eq!(t, BoxOffsets::default());

        let b = BBox::new(3.5, 3.5, 40.0, 30.0).unwrap();
        let t = encode(&b, &GridCell::new(3, 3, 1.0), &p).unwrap();
        assert!((t.t_w - std::f64::consts::LN_2).abs() < 1e-6);
    }

    #[test]
    fn encode_clamps_cell_edges() {
        let p = prior(5.0, 5.0);
        let b = BBox::new(3.0, 4.0, 5.0, 5.0).unwrap();
        let t = encode(&b, &GridCell::new(3, 3, 1.0), &p).unwrap();
        assert!((t.t_x - logit(OFFSET_EPS)).abs() < 1e-9);
        assert!((t.t_y - logit(1.0 - OFFSET_EPS)).abs() < 1e-6);
        assert!(t.t_x.is_finite() && t.t_y.is_finite());
    }

    #[test]
    fn encode_rejects_wrong_cell() {
        let b = BBox::new(40.0, 10.0, 5.0, 5.0).unwrap();
        let err = encode(&b, &GridCell::new(0, 0, 16.0), &prior(5.0, 5.0)).unwrap_err();
        assert_eq!(
            err,
            HeadError::CellMismatch {
                col: 0,
                row: 0,
                actual_col: 2,
                actual_row: 0
            }
        );
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(1.0, 1.0) <= 1e-11);
        assert!(bce_loss(0.0, 0.0) <= 1e-11);
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-6);
        assert!((bce_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert_eq!(bce_gradient_wrt_logit(0.0, 1.0), -0.5);
    }

    #[test]
    fn coord_gradient_is_residual() {
        let t = BoxOffsets::new(0.3, -1.0, 2.0, 0.5);
        assert_eq!(coord_gradient(&t, &t), BoxOffsets::default());
        let g = coord_gradient(&BoxOffsets::new(1.0, 1.0, 1.0, 1.0), &BoxOffsets::default());
        assert_eq!(g.to_array(), [1.0; 4]);
    }

    #[test]
    fn yolo_assignment_examples() {
        assert_eq!(assign_yolo_from_overlaps(&[vec![0.9]], 1, 0.5), vec![Positive(0)]);
        assert_eq!(
            assign_yolo_from_overlaps(&[vec![0.9], vec![0.6]], 1, 0.5),
            vec![Positive(0), Ignored]
        );
        assert_eq!(
            assign_yolo_from_overlaps(&[vec![0.9], vec![0.3]], 1, 0.5),
            vec![Positive(0), Negative]
        );
        // threshold is strict
        assert_eq!(
            assign_yolo_from_overlaps(&[vec![0.9], vec![0.5]], 1, 0.5),
            vec![Positive(0), Negative]
        );
        assert_eq!(assign_yolo_from_overlaps(&[vec![], vec![]], 0, 0.5), vec![Negative, Negative]);
    }

    #[test]
    fn positive_outranks_ignored() {
        // prior 0 is best for gt 0 and overlaps gt 1 above threshold
        let overlaps = vec![vec![0.9, 0.8], vec![0.1, 0.85]];
        assert_eq!(assign_yolo_from_overlaps(&overlaps, 2, 0.5), vec![Positive(0), Positive(1)]);
    }

    #[test]
    fn contested_prior_goes_to_earlier_truth() {
        let overlaps = vec![vec![0.9, 0.9], vec![0.2, 0.4]];
        assert_eq!(assign_yolo_from_overlaps(&overlaps, 2, 0.5), vec![Positive(0), Positive(1)]);
    }

    #[test]
    fn ties_pick_lowest_prior() {
        let overlaps = vec![vec![0.7], vec![0.7]];
        assert_eq!(assign_yolo_from_overlaps(&overlaps, 1, 0.5), vec![Positive(0), Ignored]);
    }

    #[test]
    fn dual_threshold_examples() {
        let labels = assign_dual_threshold_from_overlaps(&[vec![0.8], vec![0.5], vec![0.2]], 0.7, 0.3).unwrap();
        assert_eq!(labels, vec![Positive(0), Ignored, Negative]);
        let labels = assign_dual_threshold_from_overlaps(&[vec![0.7, 0.7], vec![0.3, 0.1]], 0.7, 0.3).unwrap();
        assert_eq!(labels, vec![Positive(0), Ignored]);
        assert!(assign_dual_threshold_from_overlaps(&[], 0.3, 0.7).is_err());
    }

    #[test]
    fn placed_prior_assignment() {
        let cell = GridCell::new(1, 1, 10.0);
        let priors = [PlacedPrior::new(cell, prior(10.0, 10.0)), PlacedPrior::new(cell, prior(30.0, 30.0))];
        let gt = BBox::new(15.0, 15.0, 10.0, 10.0).unwrap();
        assert_eq!(assign_yolo(&priors, &[gt], 0.5), vec![Positive(0), Negative]);
        assert_eq!(
            assign_dual_threshold(&priors, &[gt], 0.7, 0.3).unwrap(),
            vec![Positive(0), Negative]
        );
    }

    #[test]
    fn layout_examples() {
        let spec = GridSpec::new(13, 3, 80).unwrap();
        assert_eq!(spec.depth(), 255);
        assert_eq!(spec.len(), 43095);
        let at = TensorCoord { row: 1, col: 2, anchor: 1, channel: 7 };
        assert_eq!(spec.index(at).unwrap(), 3917);
        assert_eq!(spec.unindex(3917).unwrap(), at);

        let tiny = GridSpec::new(1, 1, 1).unwrap();
        assert_eq!(tiny.len(), 6);
        assert_eq!(tiny.index(TensorCoord { row: 0, col: 0, anchor: 0, channel: 0 }).unwrap(), 0);
    }

    #[test]
    fn layout_bounds() {
        let spec = GridSpec::new(2, 1, 1).unwrap();
        assert!(spec.index(TensorCoord { row: 2, col: 0, anchor: 0, channel: 0 }).is_err());
        assert!(spec.index(TensorCoord { row: 0, col: 0, anchor: 1, channel: 0 }).is_err());
        assert!(spec.index(TensorCoord { row: 0, col: 0, anchor: 0, channel: 6 }).is_err());
        assert!(spec.unindex(spec.len()).is_err());
        assert!(GridSpec::new(0, 3, 80).is_err());
    }

    #[test]
    fn prediction_slot_channel_order() {
        let spec = GridSpec::new(2, 2, 2).unwrap();
        let tensor: Vec<f64> = (0..spec.len()).map(|i| i as f64).collect();
        let p = spec.prediction_at(&tensor, 1, 0, 1).unwrap();
        let base = spec.index(TensorCoord { row: 1, col: 0, anchor: 1, channel: 0 }).unwrap() as f64;
        assert_eq!(p.offsets.to_array(), [base, base + 1.0, base + 2.0, base + 3.0]);
        assert_eq!(p.objectness_logit, base + 4.0);
        assert_eq!(p.class_logits, vec![base + 5.0, base + 6.0]);
    }

    #[test]
    fn loss_masks_non_positive_priors() {
        let cell = GridCell::new(0, 0, 10.0);
        let priors = [
            PlacedPrior::new(cell, prior(10.0, 10.0)),
            PlacedPrior::new(cell, prior(12.0, 12.0)),
            PlacedPrior::new(cell, prior(50.0, 50.0)),
        ];
        let truths = [TruthBox {
            bbox: BBox::new(5.0, 5.0, 10.0, 10.0).unwrap(),
            classes: vec![1],
        }];
        let pred = RawPrediction {
            offsets: BoxOffsets::new(0.5, 0.5, 0.5, 0.5),
            objectness_logit: 0.0,
            class_logits: vec![0.0, 0.0],
        };
        let preds = vec![pred.clone(), pred.clone(), pred];
        let labels = [Positive(0), Ignored, Negative];
        let terms = head_loss(&priors, &preds, &labels, &truths).unwrap();
        assert!((terms.coord - 0.5).abs() < 1e-12);
        assert!((terms.objectness - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((terms.class - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((terms.total() - (0.5 + 4.0 * std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
