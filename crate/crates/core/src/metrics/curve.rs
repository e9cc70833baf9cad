use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    /// Exact area under the precision envelope (all-point).
    #[default]
    Continuous,
    /// Mean envelope precision at recall 0.00, 0.01, ..., 1.00.
    Point101,
}

/// Precision/recall points in sweep order; one point per ranked detection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` pairs, recall non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub num_positives: usize,
}

impl PrCurve {
    /// Builds the curve from true/false-positive flags already in ranked order.
    pub fn from_flags<I>(flags: I, num_positives: usize) -> Self
    where
        I: IntoIterator<Item = bool>,
    {
        let mut tp = 0usize;
        let mut seen = 0usize;
        let points = flags
            .into_iter()
            .map(|is_tp| {
                seen += 1;
                tp += usize::from(is_tp);
                (tp as f64 / num_positives as f64, tp as f64 / seen as f64)
            })
            .collect();
        Self {
            points,
            num_positives,
        }
    }

    /// Precision replaced by the maximum precision at any equal-or-higher
    /// recall. Non-increasing along the sweep.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }

    pub fn average_precision(&self, interpolation: Interpolation) -> f64 {
        average_precision(self, interpolation)
    }
}

pub fn average_precision(curve: &PrCurve, interpolation: Interpolation) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    let env = curve.envelope();
    let ap = match interpolation {
        Interpolation::Continuous => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (&(recall, _), p) in curve.points.iter().zip(&env) {
                if recall > prev {
                    area += (recall - prev) * p;
                    prev = recall;
                }
            }
            area
        }
        Interpolation::Point101 => {
            let mut i = 0;
            let mut sum = 0.0;
            for k in 0..=100u32 {
                let r = f64::from(k) / 100.0;
                while i < curve.points.len() && curve.points[i].0 < r {
                    i += 1;
                }
                if i < curve.points.len() {
                    sum += env[i];
                }
            }
            sum / 101.0
        }
    };
    ap.clamp(0.0, 1.0)
}
