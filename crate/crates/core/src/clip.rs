//! Clip-level query aggregation, mask synthesis and confidence filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskVolume;

/// Weight sums within this distance of 1 are renormalized; anything further
/// off is rejected.
pub const WEIGHT_TOLERANCE: f64 = 1e-3;

/// Frame-level queries `[T][N][d]` and their time weights `[T][N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipQuerySet {
    pub frames: usize,
    pub queries: usize,
    pub dim: usize,
    pub per_frame: Vec<f64>,
    pub time_weights: Vec<f64>,
}

impl ClipQuerySet {
    pub fn new(frames: usize, queries: usize, dim: usize, per_frame: Vec<f64>, time_weights: Vec<f64>) -> Result<Self> {
        if per_frame.len() != frames * queries * dim {
            return Err(Error::dim(format!(
                "per-frame queries need {} values, got {}",
                frames * queries * dim,
                per_frame.len()
            )));
        }
        if time_weights.len() != frames * queries {
            return Err(Error::dim(format!(
                "time weights need {} values, got {}",
                frames * queries,
                time_weights.len()
            )));
        }
        Ok(Self { frames, queries, dim, per_frame, time_weights })
    }

    /// Clip-level queries `q[n] = Σ_t w_t[n] · q_t[n]`, shape `[N][d]`.
    pub fn aggregate(&self) -> Result<Vec<f64>> {
        let (t, n, d) = (self.frames, self.queries, self.dim);
        let mut out = vec![0.0; n * d];
        for qi in 0..n {
            let weights: Vec<f64> = (0..t).map(|ti| self.time_weights[ti * n + qi]).collect();
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidValue(format!(
                    "time weights of query {qi} must be finite and non-negative"
                )));
            }
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::Weights { query: qi, sum });
            }
            let row = &mut out[qi * d..(qi + 1) * d];
            for (ti, w) in weights.iter().enumerate() {
                let w = w / sum;
                let src = &self.per_frame[(ti * n + qi) * d..(ti * n + qi + 1) * d];
                for (o, v) in row.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}

pub fn aggregate_queries(set: &ClipQuerySet) -> Result<Vec<f64>> {
    set.aggregate()
}

/// Mask features `[d][T][H][W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskFeatures {
    pub dim: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl MaskFeatures {
    pub fn new(dim: usize, frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || frames == 0 || height == 0 || width == 0 {
            return Err(Error::dim("mask features need positive extents"));
        }
        if data.len() != dim * frames * height * width {
            return Err(Error::dim(format!(
                "mask features need {} values, got {}",
                dim * frames * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("mask features contain non-finite values".into()));
        }
        Ok(Self { dim, frames, height, width, data })
    }

    fn plane(&self) -> usize {
        self.frames * self.height * self.width
    }
}

/// Linear combination `Σ_k q[n,k] · D[k,t,y,x]` for each query, shape
/// `[N][T·H·W]`.
pub fn mask_logits(queries: &[f64], dim: usize, features: &MaskFeatures) -> Result<Vec<Vec<f64>>> {
    if dim != features.dim || dim == 0 || !queries.len().is_multiple_of(dim) {
        return Err(Error::dim(format!(
            "queries of dimension {dim} ({} values) against mask features of dimension {}",
            queries.len(),
            features.dim
        )));
    }
    let plane = features.plane();
    let combine = |q: &[f64]| {
        let mut out = vec![0.0; plane];
        for (k, &w) in q.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(&features.data[k * plane..(k + 1) * plane]) {
                *o += w * v;
            }
        }
        out
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(queries.par_chunks(dim).map(combine).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(queries.chunks(dim).map(combine).collect())
    }
}

/// Logistic function kept strictly inside `(0, 1)`.
pub fn logistic(x: f64) -> f64 {
    let s = if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { x.exp() / (1.0 + x.exp()) };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Per-query mask probabilities from clip-level queries and mask features.
pub fn synthesize_masks(queries: &[f64], dim: usize, features: &MaskFeatures) -> Result<Vec<MaskVolume>> {
    mask_logits(queries, dim, features)?
        .into_iter()
        .map(|l| {
            MaskVolume::new(
                features.frames,
                features.height,
                features.width,
                l.into_iter().map(logistic).collect(),
            )
        })
        .collect()
}

/// One clip-level instance prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub class_id: u32,
    pub confidence: f64,
    pub embedding: Vec<f64>,
    pub mask: MaskVolume,
}

/// First frame and length of a clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub len: usize,
}

impl FrameSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.end()
    }

    /// Shared frames, `None` when the spans are disjoint.
    pub fn intersect(&self, other: &FrameSpan) -> Option<FrameSpan> {
        let start = self.start.max(other.start);
        let end = self.end().min(other.end());
        (end > start).then_some(FrameSpan { start, len: end - start })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipDetections {
    pub span: FrameSpan,
    pub detections: Vec<Detection>,
}

impl ClipDetections {
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.detections.iter().enumerate() {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::InvalidValue(format!("detection {i} confidence {} outside [0, 1]", d.confidence)));
            }
            if d.mask.frames() != self.span.len {
                return Err(Error::dim(format!(
                    "detection {i} mask has {} frames, clip has {}",
                    d.mask.frames(),
                    self.span.len
                )));
            }
        }
        Ok(())
    }
}

/// Keeps detections with confidence at or above `tau_conf`, in order.
pub fn filter_detections(dets: &ClipDetections, tau_conf: f64) -> ClipDetections {
    ClipDetections {
        span: dets.span,
        detections: dets.detections.iter().filter(|d| d.confidence >= tau_conf).cloned().collect(),
    }
}
