//! Detection evaluation: greedy matching, precision/recall curves, and the
//! AP family (per-class VOC mAP, COCO AP over IOU thresholds and area bands,
//! class-pooled global AP, and per-image AP).

mod curve;
mod evaluate;
mod matching;
pub mod pathology;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, ClassId, ScoredBox};

pub use curve::{average_precision, Interpolation, PrCurve};
pub use evaluate::{
    ap_by_area, coco_ap, evaluate, global_ap, map_voc, per_class_ap, per_image_ap, pr_curve, AreaBand, ClassAp,
    CocoSummary, EvalConfig, MetricReport, COCO_IOU_THRESHOLDS, VOC_IOU_THRESHOLD,
};
pub use matching::{match_boxes, match_detections, MatchOutcome, MatchTable};
pub use pathology::{demo_map_pathology, pathology_fixture, PathologyDemo};

pub type ImageId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("unknown image id {0}")]
    UnknownImage(ImageId),
    #[error("unknown category id {0}")]
    UnknownCategory(ClassId),
    #[error("duplicate image id {0}")]
    DuplicateImage(ImageId),
    #[error("duplicate category id {0}")]
    DuplicateCategory(ClassId),
    #[error("IOU threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("failed to start evaluation workers: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: ClassId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub id: u64,
    pub class_id: ClassId,
    pub bbox: BBox,
}

/// Ground-truth boxes grouped by image, plus the image and category
/// registries. Images keep registration order; objects keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSet {
    images: Vec<ImageInfo>,
    image_index: HashMap<ImageId, usize>,
    objects: Vec<Vec<GroundTruth>>,
    categories: Vec<Category>,
}

impl GroundTruthSet {
    pub fn new(images: Vec<ImageInfo>, categories: Vec<Category>) -> Result<Self, MetricsError> {
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if image_index.insert(img.id, i).is_some() {
                return Err(MetricsError::DuplicateImage(img.id));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &categories {
            if !seen.insert(c.id) {
                return Err(MetricsError::DuplicateCategory(c.id));
            }
        }
        Ok(Self {
            objects: vec![Vec::new(); images.len()],
            images,
            image_index,
            categories,
        })
    }

    pub fn add(&mut self, image_id: ImageId, gt: GroundTruth) -> Result<(), MetricsError> {
        let idx = self.image_position(image_id)?;
        if !self.has_category(gt.class_id) {
            return Err(MetricsError::UnknownCategory(gt.class_id));
        }
        self.objects[idx].push(gt);
        Ok(())
    }

    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn has_category(&self, class_id: ClassId) -> bool {
        self.categories.iter().any(|c| c.id == class_id)
    }

    /// Category ids in ascending order.
    pub fn class_ids(&self) -> Vec<ClassId> {
        let mut ids: Vec<ClassId> = self.categories.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn image_position(&self, image_id: ImageId) -> Result<usize, MetricsError> {
        self.image_index
            .get(&image_id)
            .copied()
            .ok_or(MetricsError::UnknownImage(image_id))
    }

    pub fn objects(&self, image_id: ImageId) -> Result<&[GroundTruth], MetricsError> {
        Ok(&self.objects[self.image_position(image_id)?])
    }

    pub(crate) fn objects_at(&self, position: usize) -> &[GroundTruth] {
        &self.objects[position]
    }

    pub fn len(&self) -> usize {
        self.objects.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All objects paired with their image id, in image then insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (ImageId, &GroundTruth)> {
        self.images
            .iter()
            .zip(&self.objects)
            .flat_map(|(img, objs)| objs.iter().map(move |o| (img.id, o)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: ImageId,
    pub det: ScoredBox,
}

/// Detector output. The position of each detection in the set is its input
/// order, which breaks score ties everywhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionResultSet {
    detections: Vec<Detection>,
}

impl DetectionResultSet {
    pub fn new(detections: Vec<Detection>) -> Self {
        Self { detections }
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn push(&mut self, d: Detection) {
        self.detections.push(d);
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Checks that every detection refers to a registered image and category.
    pub fn validate(&self, gts: &GroundTruthSet) -> Result<(), MetricsError> {
        for d in &self.detections {
            gts.image_position(d.image_id)?;
            if !gts.has_category(d.det.class_id) {
                return Err(MetricsError::UnknownCategory(d.det.class_id));
            }
        }
        Ok(())
    }

    /// Returns a copy with every score of `class_id` mapped through `f`.
    pub fn map_class_scores<F>(&self, class_id: ClassId, f: F) -> Result<Self, crate::geometry::GeometryError>
    where
        F: Fn(f64) -> f64,
    {
        let detections = self
            .detections
            .iter()
            .map(|d| {
                if d.det.class_id != class_id {
                    return Ok(*d);
                }
                Ok(Detection {
                    image_id: d.image_id,
                    det: ScoredBox::new(d.det.bbox, f(d.det.score()), d.det.class_id)?,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { detections })
    }
}

impl FromIterator<Detection> for DetectionResultSet {
    fn from_iter<T: IntoIterator<Item = Detection>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}
