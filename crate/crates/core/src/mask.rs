//! Masks, boxes, run-length coding and the overlap measures built on them.
//!
//! A [`MaskVolume`] is a `T×H×W` block of values in `[0, 1]`, stored
//! frame-major then row-major. Ground-truth masks are binary; predictions
//! are probabilities and get binarized (strictly above 0.5) wherever a
//! discrete count is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictions strictly above this value count as foreground.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskVolume {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    binary: bool,
}

impl MaskVolume {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::dim(format!(
                "mask volume needs positive extents, got {frames}x{height}x{width}"
            )));
        }
        if data.len() != frames * height * width {
            return Err(Error::dim(format!(
                "mask volume {frames}x{height}x{width} expects {} values, got {}",
                frames * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("mask value {v} outside [0, 1]")));
        }
        let binary = data.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(Self { frames, height, width, data, binary })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Self {
        assert!(frames > 0 && height > 0 && width > 0, "empty mask volume");
        Self { frames, height, width, data: vec![0.0; frames * height * width], binary: true }
    }

    pub fn from_fn(
        frames: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(frames * height * width);
        for t in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(t, y, x));
                }
            }
        }
        Self::new(frames, height, width, data)
    }

    /// Stacks per-frame bitmaps into a binary volume.
    pub fn from_bitmaps(frames: &[Bitmap]) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::dim("no frames"))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(frames.len() * h * w);
        for f in frames {
            if f.height != h || f.width != w {
                return Err(Error::dim(format!(
                    "frame is {}x{}, expected {h}x{w}",
                    f.height, f.width
                )));
            }
            data.extend(f.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        Self::new(frames.len(), h, w, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn get(&self, t: usize, y: usize, x: usize) -> f64 {
        self.data[(t * self.height + y) * self.width + x]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_bitmap(&self, t: usize) -> Bitmap {
        Bitmap {
            height: self.height,
            width: self.width,
            bits: self.frame(t).iter().map(|&v| v > BINARIZE_THRESHOLD).collect(),
        }
    }

    pub fn bitmaps(&self) -> Vec<Bitmap> {
        (0..self.frames).map(|t| self.frame_bitmap(t)).collect()
    }

    /// Sum of all values (`|M|` in the Dice formulas).
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Count of voxels above the binarization threshold.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v > BINARIZE_THRESHOLD).count()
    }

    pub fn check_same_shape(&self, other: &MaskVolume) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "mask shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Copy of frames `start..start + len`.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<MaskVolume> {
        if len == 0 || start + len > self.frames {
            return Err(Error::dim(format!(
                "frame slice {start}..{} outside 0..{}",
                start + len,
                self.frames
            )));
        }
        let n = self.height * self.width;
        let data = self.data[start * n..(start + len) * n].to_vec();
        Ok(MaskVolume { frames: len, height: self.height, width: self.width, binary: self.binary, data })
    }
}

/// A binary 2-D array in row-major order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitmap {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::dim(format!(
                "bitmap {height}x{width} expects {} bits, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-center centroid `(y, x)`, `None` for an empty bitmap.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sy, mut sx, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(y, x) {
                    sy += y as f64 + 0.5;
                    sx += x as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sy / n as f64, sx / n as f64))
    }

    /// Tight half-open bounding box of the set pixels.
    pub fn bbox(&self) -> Option<BBox> {
        let mut ext: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(y, x) {
                    ext = Some(match ext {
                        None => (x, y, x, y),
                        Some((x1, y1, x2, y2)) => (x1.min(x), y1.min(y), x2.max(x), y2.max(y)),
                    });
                }
            }
        }
        ext.map(|(x1, y1, x2, y2)| BBox {
            x1: x1 as f64,
            y1: y1 as f64,
            x2: (x2 + 1) as f64,
            y2: (y2 + 1) as f64,
        })
    }
}

/// Axis-aligned box with half-open pixel extents `[x1, x2) × [y1, y2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = BBox { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let c = [self.x1, self.y1, self.x2, self.y2];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite box {c:?}")));
        }
        if self.x1 > self.x2 || self.y1 > self.y2 {
            return Err(Error::InvalidValue(format!("inverted box {c:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Smallest box containing both.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = String;

    fn try_from(c: [f64; 4]) -> std::result::Result<Self, String> {
        BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())
    }
}

/// Run-length coded binary mask: alternating 0-runs and 1-runs in row-major
/// scan order, always starting with a (possibly empty) 0-run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub size: [usize; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn height(&self) -> usize {
        self.size[0]
    }

    pub fn width(&self) -> usize {
        self.size[1]
    }

    /// Foreground pixel count (sum of the odd runs).
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.counts.iter().sum();
        let expected = (self.size[0] * self.size[1]) as u64;
        if total != expected {
            return Err(Error::MalformedRle(format!(
                "counts sum to {total}, size {}x{} needs {expected}",
                self.size[0], self.size[1]
            )));
        }
        if let Some(pos) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(Error::MalformedRle(format!("zero-length run at position {}", pos + 1)));
        }
        Ok(())
    }
}

pub fn rle_encode(mask: &Bitmap) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &b in &mask.bits {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    counts.push(run);
    RleMask { size: [mask.height, mask.width], counts }
}

pub fn rle_decode(rle: &RleMask) -> Result<Bitmap> {
    rle.validate()?;
    let mut bits = Vec::with_capacity(rle.size[0] * rle.size[1]);
    let mut value = false;
    for &c in &rle.counts {
        bits.extend(std::iter::repeat_n(value, c as usize));
        value = !value;
    }
    Bitmap::new(rle.size[0], rle.size[1], bits)
}

/// IoU over all voxels of two volumes after binarization. Two empty masks
/// score 0 so that vanished instances never look like a perfect match.
pub fn mask_iou(a: &MaskVolume, b: &MaskVolume) -> Result<f64> {
    a.check_same_shape(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.data.iter().zip(&b.data) {
        let (p, q) = (p > BINARIZE_THRESHOLD, q > BINARIZE_THRESHOLD);
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Per-frame tight boxes of the foreground, `None` for empty frames.
pub fn mask_to_boxes(mask: &MaskVolume) -> Vec<Option<BBox>> {
    (0..mask.frames()).map(|t| mask.frame_bitmap(t).bbox()).collect()
}

/// Instances whose boxes overlap a target instance in at least one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSet {
    pub target: usize,
    /// Sorted ascending, never contains `target`.
    pub neighbors: Vec<usize>,
}

impl NeighborSet {
    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.neighbors.binary_search(&j).is_ok()
    }
}

/// `j` is a neighbor of `i` iff `max_t IoU(B_ti, B_tj) > epsilon`. A frame
/// where either box is missing contributes IoU 0.
pub fn neighbor_set(boxes: &[Vec<Option<BBox>>], i: usize, epsilon: f64) -> Result<NeighborSet> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidValue(format!("epsilon {epsilon} outside [0, 1)")));
    }
    let target = boxes.get(i).ok_or(Error::Index { index: i, len: boxes.len() })?;
    let mut neighbors = Vec::new();
    for (j, other) in boxes.iter().enumerate() {
        if j == i {
            continue;
        }
        if other.len() != target.len() {
            return Err(Error::dim(format!(
                "instance {j} has {} frames of boxes, instance {i} has {}",
                other.len(),
                target.len()
            )));
        }
        let best = target
            .iter()
            .zip(other)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => box_iou(a, b),
                _ => 0.0,
            })
            .fold(0.0, f64::max);
        if best > epsilon {
            neighbors.push(j);
        }
    }
    Ok(NeighborSet { target: i, neighbors })
}

/// Union of the neighbors' ground-truth masks with the target's own pixels
/// removed.
pub fn inter_instance_mask(gts: &[MaskVolume], set: &NeighborSet) -> Result<MaskVolume> {
    let target = gts.get(set.target).ok_or(Error::Index { index: set.target, len: gts.len() })?;
    let (t, h, w) = target.shape();
    let mut out = vec![0.0; target.len()];
    for &j in &set.neighbors {
        let m = gts.get(j).ok_or(Error::Index { index: j, len: gts.len() })?;
        target.check_same_shape(m)?;
        for (o, &v) in out.iter_mut().zip(m.data()) {
            if v > BINARIZE_THRESHOLD {
                *o = 1.0;
            }
        }
    }
    for (o, &v) in out.iter_mut().zip(target.data()) {
        if v > BINARIZE_THRESHOLD {
            *o = 0.0;
        }
    }
    MaskVolume::new(t, h, w, out)
}
