//! Test-only oracles and random case generators.
//!
//! The oracle works on integer-lattice boxes with exact rational arithmetic
//! and shares no code with the library's matching or AP routines.

#![allow(dead_code)]

pub mod golden;

use detkit::geometry::{BBox, ClassId, ScoredBox};
use detkit::metrics::{Category, Detection, DetectionResultSet, GroundTruth, GroundTruthSet, ImageInfo};
use num_rational::Ratio;
use rand::Rng;

pub type Q = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntBox {
    pub left: i64,
    pub top: i64,
    pub width: i64,
    pub height: i64,
}

impl IntBox {
    pub fn to_bbox(self) -> BBox {
        BBox::from_ltwh(self.left as f64, self.top as f64, self.width as f64, self.height as f64).unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct CaseGt {
    pub image: u64,
    pub class: ClassId,
    pub bbox: IntBox,
}

#[derive(Debug, Clone)]
pub struct CaseDet {
    pub image: u64,
    pub class: ClassId,
    pub bbox: IntBox,
    /// Score in tenths; ties are frequent on purpose.
    pub score_tenths: i64,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub num_images: u64,
    pub num_classes: ClassId,
    pub gts: Vec<CaseGt>,
    pub dets: Vec<CaseDet>,
}

impl Case {
    pub fn ground_truth(&self) -> GroundTruthSet {
        let mut set = GroundTruthSet::new(
            (1..=self.num_images)
                .map(|id| ImageInfo { id, width: 64, height: 64 })
                .collect(),
            (0..self.num_classes)
                .map(|id| Category { id, name: format!("class{id}") })
                .collect(),
        )
        .unwrap();
        for (i, g) in self.gts.iter().enumerate() {
            set.add(
                g.image,
                GroundTruth {
                    id: i as u64 + 1,
                    class_id: g.class,
                    bbox: g.bbox.to_bbox(),
                },
            )
            .unwrap();
        }
        set
    }

    pub fn detections(&self) -> DetectionResultSet {
        self.dets
            .iter()
            .map(|d| Detection {
                image_id: d.image,
                det: ScoredBox::new(d.bbox.to_bbox(), d.score_tenths as f64 / 10.0, d.class).unwrap(),
            })
            .collect()
    }
}

fn random_box<R: Rng>(rng: &mut R) -> IntBox {
    IntBox {
        left: rng.gen_range(0..16),
        top: rng.gen_range(0..16),
        width: rng.gen_range(1..10),
        height: rng.gen_range(1..10),
    }
}

fn jitter<R: Rng>(rng: &mut R, b: IntBox) -> IntBox {
    IntBox {
        left: b.left + rng.gen_range(-2..=2),
        top: b.top + rng.gen_range(-2..=2),
        width: (b.width + rng.gen_range(-2..=2)).max(1),
        height: (b.height + rng.gen_range(-2..=2)).max(1),
    }
}

/// Up to `max_dets` detections and `max_gts` truths over up to 3 images and
/// 3 classes. Most detections are perturbed copies of a truth box.
pub fn random_case<R: Rng>(rng: &mut R, max_dets: usize, max_gts: usize) -> Case {
    let num_images = rng.gen_range(1..=3u64);
    let num_classes = rng.gen_range(1..=3u32);
    let gts: Vec<CaseGt> = (0..rng.gen_range(0..=max_gts))
        .map(|_| CaseGt {
            image: rng.gen_range(1..=num_images),
            class: rng.gen_range(0..num_classes),
            bbox: random_box(rng),
        })
        .collect();
    let dets = (0..rng.gen_range(0..=max_dets))
        .map(|_| {
            let score_tenths = rng.gen_range(1..=10);
            if !gts.is_empty() && rng.gen_bool(0.7) {
                let g = &gts[rng.gen_range(0..gts.len())];
                let class = if rng.gen_bool(0.85) { g.class } else { rng.gen_range(0..num_classes) };
                CaseDet {
                    image: g.image,
                    class,
                    bbox: jitter(rng, g.bbox),
                    score_tenths,
                }
            } else {
                CaseDet {
                    image: rng.gen_range(1..=num_images),
                    class: rng.gen_range(0..num_classes),
                    bbox: random_box(rng),
                    score_tenths,
                }
            }
        })
        .collect();
    Case {
        num_images,
        num_classes,
        gts,
        dets,
    }
}

pub fn exact_iou(a: IntBox, b: IntBox) -> Q {
    let w = (a.left + a.width).min(b.left + b.width) - a.left.max(b.left);
    let h = (a.top + a.height).min(b.top + b.height) - a.top.max(b.top);
    if w <= 0 || h <= 0 {
        return Q::from_integer(0);
    }
    let inter = w * h;
    Q::new(inter, a.width * a.height + b.width * b.height - inter)
}

/// True/false-positive flag per detection index, from greedy matching within
/// each (image, class): best score first, input order on ties, highest exact
/// IOU at or above the threshold, lowest truth index on IOU ties.
pub fn oracle_flags(case: &Case, threshold: Q) -> Vec<bool> {
    let mut flags = vec![false; case.dets.len()];
    for image in 1..=case.num_images {
        for class in 0..case.num_classes {
            let mut det_ids: Vec<usize> = (0..case.dets.len())
                .filter(|&i| case.dets[i].image == image && case.dets[i].class == class)
                .collect();
            det_ids.sort_by_key(|&i| (-case.dets[i].score_tenths, i));
            let gt_ids: Vec<usize> = (0..case.gts.len())
                .filter(|&g| case.gts[g].image == image && case.gts[g].class == class)
                .collect();
            let mut taken = vec![false; gt_ids.len()];
            for d in det_ids {
                let mut best: Option<(usize, Q)> = None;
                for (k, &g) in gt_ids.iter().enumerate() {
                    if taken[k] {
                        continue;
                    }
                    let iou = exact_iou(case.dets[d].bbox, case.gts[g].bbox);
                    if iou < threshold {
                        continue;
                    }
                    match &best {
                        Some((_, b)) if *b >= iou => {}
                        _ => best = Some((k, iou)),
                    }
                }
                if let Some((k, _)) = best {
                    taken[k] = true;
                    flags[d] = true;
                }
            }
        }
    }
    flags
}

/// Exact area under the precision envelope for the detections in `selected`
/// swept by descending score (input order on ties).
pub fn oracle_ap(case: &Case, flags: &[bool], selected: &[usize], positives: usize) -> Option<Q> {
    if positives == 0 {
        return None;
    }
    let mut order = selected.to_vec();
    order.sort_by_key(|&i| (-case.dets[i].score_tenths, i));
    let npos = positives as i64;
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let mut tp = 0i64;
    for (rank, &d) in order.iter().enumerate() {
        if flags[d] {
            tp += 1;
        }
        recall.push(Q::new(tp, npos));
        precision.push(Q::new(tp, rank as i64 + 1));
    }
    let mut area = Q::from_integer(0);
    let mut prev = Q::from_integer(0);
    for i in 0..order.len() {
        // envelope by brute force: best precision at this rank or later
        let env = precision[i..].iter().copied().max().unwrap();
        area += (recall[i] - prev) * env;
        prev = recall[i];
    }
    Some(area)
}

pub fn oracle_class_ap(case: &Case, class: ClassId, threshold: Q) -> Option<Q> {
    let flags = oracle_flags(case, threshold);
    let selected: Vec<usize> = (0..case.dets.len()).filter(|&i| case.dets[i].class == class).collect();
    let positives = case.gts.iter().filter(|g| g.class == class).count();
    oracle_ap(case, &flags, &selected, positives)
}

pub fn oracle_map(case: &Case, threshold: Q) -> Option<Q> {
    let aps: Vec<Q> = (0..case.num_classes)
        .filter_map(|c| oracle_class_ap(case, c, threshold))
        .collect();
    if aps.is_empty() {
        return None;
    }
    let n = aps.len() as i64;
    Some(aps.into_iter().sum::<Q>() / n)
}

pub fn oracle_global_ap(case: &Case, threshold: Q) -> Option<Q> {
    let flags = oracle_flags(case, threshold);
    let selected: Vec<usize> = (0..case.dets.len()).collect();
    oracle_ap(case, &flags, &selected, case.gts.len())
}

pub fn oracle_per_image_ap(case: &Case, threshold: Q) -> Option<Q> {
    let flags = oracle_flags(case, threshold);
    let aps: Vec<Q> = (1..=case.num_images)
        .filter_map(|img| {
            let selected: Vec<usize> = (0..case.dets.len()).filter(|&i| case.dets[i].image == img).collect();
            let positives = case.gts.iter().filter(|g| g.image == img).count();
            oracle_ap(case, &flags, &selected, positives)
        })
        .collect();
    if aps.is_empty() {
        return None;
    }
    let n = aps.len() as i64;
    Some(aps.into_iter().sum::<Q>() / n)
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
