use crate::geometry::{rank_by_score, BBox, ClassId};

use super::{DetectionResultSet, GroundTruthSet, ImageId, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive(usize),
    FalsePositive,
    /// Matched a ground truth that is excluded from the current evaluation
    /// (outside the area band); dropped from the sweep.
    Ignored(usize),
}

/// Result of greedy matching on one (image, class) slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchTable {
    /// Detection indices in evaluation order (descending score, ties by input order).
    pub order: Vec<usize>,
    /// Outcome of each entry of `order`.
    pub outcomes: Vec<MatchOutcome>,
    /// For each ground truth, the detection index that claimed it.
    pub gt_matches: Vec<Option<usize>>,
}

impl MatchTable {
    /// Matched ground truth of each detection, aligned with `order`.
    pub fn det_matches(&self) -> Vec<Option<usize>> {
        self.outcomes
            .iter()
            .map(|o| match o {
                MatchOutcome::TruePositive(g) => Some(*g),
                _ => None,
            })
            .collect()
    }

    pub fn true_positives(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, MatchOutcome::TruePositive(_)))
            .count()
    }
}

fn best_unmatched(det: &BBox, gts: &[BBox], claimed: &[Option<usize>], eligible: impl Fn(usize) -> bool, threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (g, gt) in gts.iter().enumerate() {
        if claimed[g].is_some() || !eligible(g) {
            continue;
        }
        let iou = det.iou(gt);
        if iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
            best = Some((g, iou));
        }
    }
    best.map(|(g, _)| g)
}

/// Greedy matching of scored boxes against ground truths.
///
/// Detections are visited by descending score (ties in input order). Each
/// claims the highest-IOU unclaimed ground truth with IOU >= `threshold`
/// (ties to the lowest index). When `in_band` is given, ground truths marked
/// `false` are only tried after no in-band candidate qualifies, and a
/// detection that lands on one is reported as [`MatchOutcome::Ignored`].
pub fn match_boxes(
    det_boxes: &[BBox],
    det_scores: &[f64],
    gts: &[BBox],
    in_band: Option<&[bool]>,
    threshold: f64,
) -> MatchTable {
    debug_assert_eq!(det_boxes.len(), det_scores.len());
    let order = rank_by_score(det_scores.iter().copied());
    let mut gt_matches = vec![None; gts.len()];
    let mut outcomes = Vec::with_capacity(order.len());
    let band = |g: usize| in_band.is_none_or(|b| b[g]);
    for &d in &order {
        let det = &det_boxes[d];
        let outcome = if let Some(g) = best_unmatched(det, gts, &gt_matches, band, threshold) {
            gt_matches[g] = Some(d);
            MatchOutcome::TruePositive(g)
        } else if let Some(g) = in_band.and_then(|_| best_unmatched(det, gts, &gt_matches, |g| !band(g), threshold)) {
            gt_matches[g] = Some(d);
            MatchOutcome::Ignored(g)
        } else {
            MatchOutcome::FalsePositive
        };
        outcomes.push(outcome);
    }
    MatchTable {
        order,
        outcomes,
        gt_matches,
    }
}

/// Matches the detections of `class_id` on `image_id` against that image's
/// ground truths of the same class.
///
/// Detection indices in the table refer to positions in `dets`; ground-truth
/// indices refer to positions in `gts.objects(image_id)`. Ground truths of
/// other classes are never claimed.
pub fn match_detections(
    dets: &DetectionResultSet,
    gts: &GroundTruthSet,
    iou_threshold: f64,
    class_id: ClassId,
    image_id: ImageId,
) -> Result<MatchTable, MetricsError> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(MetricsError::InvalidThreshold(iou_threshold));
    }
    let objects = gts.objects(image_id)?;
    let det_idx: Vec<usize> = dets
        .detections()
        .iter()
        .enumerate()
        .filter(|(_, d)| d.image_id == image_id && d.det.class_id == class_id)
        .map(|(i, _)| i)
        .collect();
    let boxes: Vec<BBox> = det_idx.iter().map(|&i| dets.detections()[i].det.bbox).collect();
    let scores: Vec<f64> = det_idx.iter().map(|&i| dets.detections()[i].det.score()).collect();
    let (gt_pos, gt_boxes): (Vec<usize>, Vec<BBox>) = objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.class_id == class_id)
        .map(|(g, o)| (g, o.bbox))
        .unzip();

    let local = match_boxes(&boxes, &scores, &gt_boxes, None, iou_threshold);
    let mut gt_matches = vec![None; objects.len()];
    for (k, m) in local.gt_matches.iter().enumerate() {
        gt_matches[gt_pos[k]] = m.map(|i| det_idx[i]);
    }
    Ok(MatchTable {
        order: local.order.iter().map(|&i| det_idx[i]).collect(),
        outcomes: local
            .outcomes
            .into_iter()
            .map(|o| match o {
                MatchOutcome::TruePositive(k) => MatchOutcome::TruePositive(gt_pos[k]),
                other => other,
            })
            .collect(),
        gt_matches,
    })
}
