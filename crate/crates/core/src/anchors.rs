//! Dimension clustering for anchor priors and the split of priors across
//! detection scales.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::head::AnchorPrior;

/// The nine COCO priors, in 416-input pixels, ascending by area.
pub const COCO_ANCHORS: [(f64, f64); 9] = [
    (10.0, 13.0),
    (16.0, 30.0),
    (33.0, 23.0),
    (30.0, 61.0),
    (62.0, 45.0),
    (59.0, 119.0),
    (116.0, 90.0),
    (156.0, 198.0),
    (373.0, 326.0),
];

pub fn coco_anchors() -> Vec<AnchorPrior> {
    COCO_ANCHORS
        .iter()
        .map(|&(w, h)| AnchorPrior { width: w, height: h })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("k = {k} exceeds the {distinct} distinct samples")]
    InsufficientSamples { k: usize, distinct: usize },
    #[error("no samples to cluster")]
    Empty,
    #[error("k and max_iters must be positive")]
    ZeroParameter,
    #[error("invalid sample {width}x{height}: sizes must be positive")]
    InvalidSample { width: f64, height: f64 },
    #[error("{count} priors cannot be split evenly across {scales} scales")]
    NotDivisible { count: usize, scales: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionSample {
    pub width: f64,
    pub height: f64,
}

impl DimensionSample {
    pub fn new(width: f64, height: f64) -> Result<Self, AnchorError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(AnchorError::InvalidSample { width, height });
        }
        Ok(Self { width, height })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Distance {
    /// `1 - IOU` of two boxes sharing a center.
    #[default]
    Iou,
    Euclidean,
}

impl Distance {
    pub fn between(self, w1: f64, h1: f64, w2: f64, h2: f64) -> f64 {
        match self {
            Distance::Iou => {
                let inter = w1.min(w2) * h1.min(h2);
                1.0 - inter / (w1 * h1 + w2 * h2 - inter)
            }
            Distance::Euclidean => (w1 - w2).hypot(h1 - h2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub centroids: Vec<AnchorPrior>,
    /// Centroid index of each sample, in input order.
    pub assignments: Vec<usize>,
    /// Mean sample-to-centroid distance at the final assignment.
    pub objective: f64,
    /// Objective after each assignment step; the first entry is the
    /// k-means++ initialization.
    pub history: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub distance: Distance,
}

impl KMeansConfig {
    pub fn new(k: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters,
            seed,
            distance: Distance::Iou,
        }
    }
}

struct Assignment {
    labels: Vec<usize>,
    dists: Vec<f64>,
    objective: f64,
}

fn assign(samples: &[DimensionSample], centroids: &[AnchorPrior], distance: Distance) -> Assignment {
    let mut labels = Vec::with_capacity(samples.len());
    let mut dists = Vec::with_capacity(samples.len());
    for s in samples {
        let (best, d) = centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (i, distance.between(s.width, s.height, c.width, c.height)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        labels.push(best);
        dists.push(d);
    }
    let objective = dists.iter().sum::<f64>() / samples.len() as f64;
    Assignment {
        labels,
        dists,
        objective,
    }
}

fn distinct_count(samples: &[DimensionSample]) -> usize {
    let mut dims: Vec<(u64, u64)> = samples
        .iter()
        .map(|s| (s.width.to_bits(), s.height.to_bits()))
        .collect();
    dims.sort_unstable();
    dims.dedup();
    dims.len()
}

fn kmeans_plus_plus(samples: &[DimensionSample], k: usize, distance: Distance, rng: &mut ChaCha8Rng) -> Vec<AnchorPrior> {
    let as_prior = |s: &DimensionSample| AnchorPrior {
        width: s.width,
        height: s.height,
    };
    let mut centroids = vec![as_prior(&samples[rng.gen_range(0..samples.len())])];
    let mut nearest: Vec<f64> = samples
        .iter()
        .map(|s| distance.between(s.width, s.height, centroids[0].width, centroids[0].height))
        .collect();
    while centroids.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    chosen = Some(i);
                    if r < *w {
                        break;
                    }
                    r -= w;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            // every sample coincides with a centroid; fall back to the first
            // sample that is not already one
            samples
                .iter()
                .position(|s| !centroids.iter().any(|c| c.width == s.width && c.height == s.height))
                .expect("k <= distinct samples")
        };
        let c = as_prior(&samples[pick]);
        for (n, s) in nearest.iter_mut().zip(samples) {
            *n = n.min(distance.between(s.width, s.height, c.width, c.height));
        }
        centroids.push(c);
    }
    centroids
}

/// Mean of each cluster's members. Empty clusters are re-seeded from the
/// samples farthest from their current centroid, one distinct sample each.
fn update_centroids(samples: &[DimensionSample], current: &Assignment, k: usize) -> Vec<Option<AnchorPrior>> {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
    for (s, &l) in samples.iter().zip(&current.labels) {
        sums[l].0 += s.width;
        sums[l].1 += s.height;
        sums[l].2 += 1;
    }
    sums.iter()
        .map(|&(w, h, n)| {
            (n > 0).then(|| AnchorPrior {
                width: w / n as f64,
                height: h / n as f64,
            })
        })
        .collect()
}

fn repair_empty(samples: &[DimensionSample], current: &Assignment, centroids: Vec<Option<AnchorPrior>>) -> Vec<AnchorPrior> {
    let mut by_distance: Vec<usize> = (0..samples.len()).collect();
    by_distance.sort_by(|&a, &b| {
        current.dists[b]
            .partial_cmp(&current.dists[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut donors = by_distance.into_iter();
    centroids
        .into_iter()
        .map(|c| {
            c.unwrap_or_else(|| {
                let s = &samples[donors.next().expect("more samples than clusters")];
                AnchorPrior {
                    width: s.width,
                    height: s.height,
                }
            })
        })
        .collect()
}

/// Lloyd's k-means over box dimensions with k-means++ seeding.
///
/// Stops when assignments stop changing or after `max_iters` update steps.
/// With IOU distance the mean update is not guaranteed to lower the
/// objective; an update that would raise it is discarded and iteration
/// ends there, so `history` is always non-increasing.
pub fn kmeans_anchors(samples: &[DimensionSample], config: &KMeansConfig) -> Result<ClusteringResult, AnchorError> {
    if samples.is_empty() {
        return Err(AnchorError::Empty);
    }
    if config.k == 0 || config.max_iters == 0 {
        return Err(AnchorError::ZeroParameter);
    }
    let distinct = distinct_count(samples);
    if config.k > distinct {
        return Err(AnchorError::InsufficientSamples {
            k: config.k,
            distinct,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_plus_plus(samples, config.k, config.distance, &mut rng);
    let mut current = assign(samples, &centroids, config.distance);
    let mut history = vec![current.objective];
    let mut iterations = 0;

    while iterations < config.max_iters {
        let means = update_centroids(samples, &current, config.k);
        let candidate = repair_empty(samples, &current, means);
        let next = assign(samples, &candidate, config.distance);
        if next.objective > current.objective {
            break;
        }
        iterations += 1;
        let changed = next.labels != current.labels || candidate != centroids;
        centroids = candidate;
        current = next;
        history.push(current.objective);
        if !changed {
            break;
        }
    }

    Ok(ClusteringResult {
        centroids,
        assignments: current.labels,
        objective: current.objective,
        history,
        iterations,
    })
}

/// Sorts priors by area (ties by width) and cuts them into `num_scales`
/// equal groups. Group 0 holds the smallest priors and belongs to the finest
/// grid.
pub fn split_scales(priors: &[AnchorPrior], num_scales: usize) -> Result<Vec<Vec<AnchorPrior>>, AnchorError> {
    if num_scales == 0 || !priors.len().is_multiple_of(num_scales) {
        return Err(AnchorError::NotDivisible {
            count: priors.len(),
            scales: num_scales,
        });
    }
    let mut sorted = priors.to_vec();
    sorted.sort_by(|a, b| {
        a.area()
            .partial_cmp(&b.area())
            .unwrap_or(Ordering::Equal)
            .then(a.width.partial_cmp(&b.width).unwrap_or(Ordering::Equal))
    });
    let per = priors.len() / num_scales;
    Ok(sorted.chunks(per.max(1)).map(<[AnchorPrior]>::to_vec).collect())
}
