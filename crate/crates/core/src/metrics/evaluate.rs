use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{descending_score, BBox, ClassId};

use super::curve::{Interpolation, PrCurve};
use super::matching::{match_boxes, MatchOutcome};
use super::{DetectionResultSet, GroundTruthSet, MetricsError};

pub const VOC_IOU_THRESHOLD: f64 = 0.5;

pub const COCO_IOU_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

const AP50_SLOT: usize = 0;
const AP75_SLOT: usize = 5;

/// Ground-truth size bands in pixels²: small < 32², medium < 96², large above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AreaBand {
    Small,
    Medium,
    Large,
}

impl AreaBand {
    pub const ALL: [AreaBand; 3] = [AreaBand::Small, AreaBand::Medium, AreaBand::Large];

    pub fn contains(self, area: f64) -> bool {
        const SMALL_MAX: f64 = 32.0 * 32.0;
        const MEDIUM_MAX: f64 = 96.0 * 96.0;
        match self {
            AreaBand::Small => area < SMALL_MAX,
            AreaBand::Medium => (SMALL_MAX..MEDIUM_MAX).contains(&area),
            AreaBand::Large => area >= MEDIUM_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: ClassId,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoSummary {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    /// mAP at each of [`COCO_IOU_THRESHOLDS`], 101-point interpolation.
    pub per_threshold: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Threshold used for `voc50`, `per_class`, `global`, and `per_image`.
    pub iou_threshold: f64,
    pub voc50: Option<f64>,
    #[serde(rename = "AP")]
    pub ap: Option<f64>,
    #[serde(rename = "AP50")]
    pub ap50: Option<f64>,
    #[serde(rename = "AP75")]
    pub ap75: Option<f64>,
    #[serde(rename = "AP_S")]
    pub ap_small: Option<f64>,
    #[serde(rename = "AP_M")]
    pub ap_medium: Option<f64>,
    #[serde(rename = "AP_L")]
    pub ap_large: Option<f64>,
    #[serde(rename = "global")]
    pub global_ap: Option<f64>,
    #[serde(rename = "per_image")]
    pub per_image_ap: Option<f64>,
    pub per_class: Vec<ClassAp>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Worker threads for sharded evaluation; the report does not depend on it.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: VOC_IOU_THRESHOLD,
            jobs: 1,
        }
    }
}

fn check_threshold(t: f64) -> Result<(), MetricsError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(MetricsError::InvalidThreshold(t))
    }
}

fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Detection and ground-truth lookups keyed by (image position, class).
struct Prepared<'a> {
    dets: &'a DetectionResultSet,
    det_groups: BTreeMap<(usize, ClassId), Vec<usize>>,
    gt_groups: BTreeMap<(usize, ClassId), Vec<BBox>>,
    classes: Vec<ClassId>,
    num_images: usize,
}

struct SweepEntry {
    det: usize,
    score: f64,
    is_tp: bool,
}

impl<'a> Prepared<'a> {
    fn new(dets: &'a DetectionResultSet, gts: &'a GroundTruthSet) -> Result<Self, MetricsError> {
        dets.validate(gts)?;
        let mut det_groups: BTreeMap<(usize, ClassId), Vec<usize>> = BTreeMap::new();
        for (i, d) in dets.detections().iter().enumerate() {
            let pos = gts.image_position(d.image_id)?;
            det_groups.entry((pos, d.det.class_id)).or_default().push(i);
        }
        let mut gt_groups: BTreeMap<(usize, ClassId), Vec<BBox>> = BTreeMap::new();
        for pos in 0..gts.images().len() {
            for o in gts.objects_at(pos) {
                gt_groups.entry((pos, o.class_id)).or_default().push(o.bbox);
            }
        }
        Ok(Self {
            dets,
            det_groups,
            gt_groups,
            classes: gts.class_ids(),
            num_images: gts.images().len(),
        })
    }

    fn slice_keys(&self, image: Option<usize>, class: Option<ClassId>) -> BTreeSet<(usize, ClassId)> {
        let keep = |&&(p, c): &&(usize, ClassId)| image.is_none_or(|i| i == p) && class.is_none_or(|k| k == c);
        self.det_groups
            .keys()
            .filter(keep)
            .chain(self.gt_groups.keys().filter(keep))
            .copied()
            .collect()
    }

    /// Greedy-matches every (image, class) slice selected by the filters and
    /// returns the ranked sweep plus the number of in-band truths.
    fn sweep(&self, image: Option<usize>, class: Option<ClassId>, threshold: f64, band: Option<AreaBand>) -> (Vec<SweepEntry>, usize) {
        let mut entries = Vec::new();
        let mut positives = 0;
        let no_gts = Vec::new();
        let no_dets = Vec::new();
        for key in self.slice_keys(image, class) {
            let gts = self.gt_groups.get(&key).unwrap_or(&no_gts);
            let det_idx = self.det_groups.get(&key).unwrap_or(&no_dets);
            let in_band: Option<Vec<bool>> = band.map(|b| gts.iter().map(|g| b.contains(g.area())).collect());
            positives += in_band
                .as_ref()
                .map_or(gts.len(), |flags| flags.iter().filter(|&&f| f).count());

            let boxes: Vec<BBox> = det_idx.iter().map(|&i| self.dets.detections()[i].det.bbox).collect();
            let scores: Vec<f64> = det_idx.iter().map(|&i| self.dets.detections()[i].det.score()).collect();
            let table = match_boxes(&boxes, &scores, gts, in_band.as_deref(), threshold);
            for (&local, outcome) in table.order.iter().zip(&table.outcomes) {
                let is_tp = match outcome {
                    MatchOutcome::TruePositive(_) => true,
                    MatchOutcome::FalsePositive => false,
                    MatchOutcome::Ignored(_) => continue,
                };
                entries.push(SweepEntry {
                    det: det_idx[local],
                    score: scores[local],
                    is_tp,
                });
            }
        }
        entries.sort_by(|a, b| descending_score(a.score, b.score).then(a.det.cmp(&b.det)));
        (entries, positives)
    }

    fn curve(&self, image: Option<usize>, class: Option<ClassId>, threshold: f64, band: Option<AreaBand>) -> Option<PrCurve> {
        let (entries, positives) = self.sweep(image, class, threshold, band);
        (positives > 0).then(|| PrCurve::from_flags(entries.iter().map(|e| e.is_tp), positives))
    }

    fn class_ap(&self, class: ClassId, threshold: f64, band: Option<AreaBand>, interp: Interpolation) -> Option<f64> {
        self.curve(None, Some(class), threshold, band)
            .map(|c| c.average_precision(interp))
    }

    fn pooled_ap(&self, image: Option<usize>, threshold: f64) -> Option<f64> {
        self.curve(image, None, threshold, None)
            .map(|c| c.average_precision(Interpolation::Continuous))
    }

    fn images_with_truth(&self) -> Vec<usize> {
        (0..self.num_images)
            .filter(|&p| self.gt_groups.range((p, 0)..=(p, ClassId::MAX)).next().is_some())
            .collect()
    }
}

/// Precision/recall sweep for one class across all images. `None` when the
/// class has no ground truth.
pub fn pr_curve(
    dets: &DetectionResultSet,
    gts: &GroundTruthSet,
    iou_threshold: f64,
    class_id: ClassId,
) -> Result<Option<PrCurve>, MetricsError> {
    check_threshold(iou_threshold)?;
    Ok(Prepared::new(dets, gts)?.curve(None, Some(class_id), iou_threshold, None))
}

pub fn per_class_ap(
    dets: &DetectionResultSet,
    gts: &GroundTruthSet,
    iou_threshold: f64,
    interpolation: Interpolation,
) -> Result<Vec<ClassAp>, MetricsError> {
    check_threshold(iou_threshold)?;
    let prep = Prepared::new(dets, gts)?;
    Ok(prep
        .classes
        .iter()
        .map(|&class_id| ClassAp {
            class_id,
            ap: prep.class_ap(class_id, iou_threshold, None, interpolation),
        })
        .collect())
}

/// Mean over classes with ground truth of continuous-interpolation AP.
pub fn map_voc(dets: &DetectionResultSet, gts: &GroundTruthSet, iou_threshold: f64) -> Result<Option<f64>, MetricsError> {
    Ok(mean(
        per_class_ap(dets, gts, iou_threshold, Interpolation::Continuous)?
            .into_iter()
            .filter_map(|c| c.ap),
    ))
}

fn summarize_thresholds(per_threshold: Vec<Option<f64>>) -> CocoSummary {
    let ap = if per_threshold.iter().all(Option::is_some) {
        mean(per_threshold.iter().flatten().copied())
    } else {
        None
    };
    CocoSummary {
        ap,
        ap50: per_threshold[AP50_SLOT],
        ap75: per_threshold[AP75_SLOT],
        per_threshold,
    }
}

fn coco_thresholds(prep: &Prepared<'_>, band: Option<AreaBand>) -> Vec<Option<f64>> {
    COCO_IOU_THRESHOLDS
        .iter()
        .map(|&t| {
            mean(
                prep.classes
                    .iter()
                    .filter_map(|&c| prep.class_ap(c, t, band, Interpolation::Point101)),
            )
        })
        .collect()
}

/// COCO-style AP over IOU 0.50:0.05:0.95 with 101-point interpolation.
pub fn coco_ap(dets: &DetectionResultSet, gts: &GroundTruthSet) -> Result<CocoSummary, MetricsError> {
    let prep = Prepared::new(dets, gts)?;
    Ok(summarize_thresholds(coco_thresholds(&prep, None)))
}

/// COCO-style AP restricted to ground truths in one area band. Detections
/// that land on out-of-band truths are dropped from the sweep rather than
/// counted as false positives. `None` when the band holds no ground truth.
pub fn ap_by_area(dets: &DetectionResultSet, gts: &GroundTruthSet, band: AreaBand) -> Result<Option<f64>, MetricsError> {
    let prep = Prepared::new(dets, gts)?;
    Ok(summarize_thresholds(coco_thresholds(&prep, Some(band))).ap)
}

/// AP of one ranking that pools every class. A detection can only match a
/// truth of its own class; recall is over all truths.
pub fn global_ap(dets: &DetectionResultSet, gts: &GroundTruthSet, iou_threshold: f64) -> Result<Option<f64>, MetricsError> {
    check_threshold(iou_threshold)?;
    Ok(Prepared::new(dets, gts)?.pooled_ap(None, iou_threshold))
}

/// Unweighted mean over images with ground truth of the class-pooled AP
/// computed within each image.
pub fn per_image_ap(dets: &DetectionResultSet, gts: &GroundTruthSet, iou_threshold: f64) -> Result<Option<f64>, MetricsError> {
    check_threshold(iou_threshold)?;
    let prep = Prepared::new(dets, gts)?;
    Ok(mean(
        prep.images_with_truth()
            .into_iter()
            .filter_map(|p| prep.pooled_ap(Some(p), iou_threshold)),
    ))
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Voc(ClassId),
    Coco {
        band: Option<AreaBand>,
        threshold: usize,
        class: ClassId,
    },
    Global,
    Image(usize),
}

fn run_task(prep: &Prepared<'_>, task: Task, iou: f64) -> Option<f64> {
    match task {
        Task::Voc(c) => prep.class_ap(c, iou, None, Interpolation::Continuous),
        Task::Coco { band, threshold, class } => {
            prep.class_ap(class, COCO_IOU_THRESHOLDS[threshold], band, Interpolation::Point101)
        }
        Task::Global => prep.pooled_ap(None, iou),
        Task::Image(p) => prep.pooled_ap(Some(p), iou),
    }
}

/// Full metric report. Work is sharded by (class, threshold, band) and by
/// image across `config.jobs` threads; shards are reduced in a fixed order,
/// so the report is identical for any thread count.
pub fn evaluate(dets: &DetectionResultSet, gts: &GroundTruthSet, config: &EvalConfig) -> Result<MetricReport, MetricsError> {
    check_threshold(config.iou_threshold)?;
    let prep = Prepared::new(dets, gts)?;
    let bands = [None, Some(AreaBand::Small), Some(AreaBand::Medium), Some(AreaBand::Large)];

    let mut tasks: Vec<Task> = prep.classes.iter().map(|&c| Task::Voc(c)).collect();
    for band in bands {
        for threshold in 0..COCO_IOU_THRESHOLDS.len() {
            tasks.extend(prep.classes.iter().map(|&class| Task::Coco { band, threshold, class }));
        }
    }
    tasks.push(Task::Global);
    let images = prep.images_with_truth();
    tasks.extend(images.iter().map(|&p| Task::Image(p)));

    let iou = config.iou_threshold;
    let results: Vec<Option<f64>> = if config.jobs <= 1 {
        tasks.iter().map(|&t| run_task(&prep, t, iou)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| MetricsError::Workers(e.to_string()))?;
        pool.install(|| tasks.par_iter().map(|&t| run_task(&prep, t, iou)).collect())
    };

    let k = prep.classes.len();
    let mut rest = results.as_slice();
    let mut take = |n: usize| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head
    };

    let per_class: Vec<ClassAp> = prep
        .classes
        .iter()
        .zip(take(k))
        .map(|(&class_id, &ap)| ClassAp { class_id, ap })
        .collect();
    let voc50 = mean(per_class.iter().filter_map(|c| c.ap));

    let mut summaries = Vec::with_capacity(bands.len());
    for _ in bands {
        let per_threshold = (0..COCO_IOU_THRESHOLDS.len())
            .map(|_| mean(take(k).iter().flatten().copied()))
            .collect();
        summaries.push(summarize_thresholds(per_threshold));
    }
    let global = take(1)[0];
    let per_image = mean(take(images.len()).iter().flatten().copied());

    Ok(MetricReport {
        iou_threshold: iou,
        voc50,
        ap: summaries[0].ap,
        ap50: summaries[0].ap50,
        ap75: summaries[0].ap75,
        ap_small: summaries[1].ap,
        ap_medium: summaries[2].ap,
        ap_large: summaries[3].ap,
        global_ap: global,
        per_image_ap: per_image,
        per_class,
    })
}
