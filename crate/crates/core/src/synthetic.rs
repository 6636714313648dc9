//! Seeded moving-shape scenarios with ground truth.
//!
//! Objects are rectangles or ellipses moving at constant velocity over a
//! black canvas. Contested pixels go to the object with the lowest depth.
//! All randomness comes from [`CounterRng`] streams keyed by purpose, clip and
//! object, so any clip can be regenerated on its own.

use std::fmt;
use std::str::FromStr;

use crate::clip::{Detection, FrameSpan};
use crate::error::{Error, Result};
use crate::io::{ClipGroundTruth, ClipRecord, Metrics, Trajectory};
use crate::mask::{mask_to_boxes, Bitmap, MaskVolume};
use crate::query::{cosine, ChannelMap};
use crate::rng::CounterRng;
use crate::tracker::{run_near_online, TrackerConfig, VideoTracks};

const STREAM_LAYOUT: u64 = 1;
const STREAM_FLIP: u64 = 2;
const STREAM_EMBED: u64 = 3;
const STREAM_CONF: u64 = 4;
const STREAM_ORDER: u64 = 5;

fn stream(kind: u64, clip: usize, object: usize) -> u64 {
    (kind << 56) | ((clip as u64) << 24) | object as u64
}

/// Embedding dimension used by the built-in scenarios.
pub const EMBED_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Half extents `(dy, dx)` in pixels.
    pub half_size: (f64, f64),
    /// Center `(y, x)` at frame 0.
    pub start: (f64, f64),
    /// Center displacement per frame.
    pub velocity: (f64, f64),
    /// Lower is nearer the camera.
    pub depth: u32,
    pub embedding: Vec<f64>,
    pub class_id: u32,
    /// Frames `[a, b)` in which the object is not in the scene.
    pub absent: Option<(usize, usize)>,
}

impl ObjectSpec {
    pub fn center(&self, frame: usize) -> (f64, f64) {
        let f = frame as f64;
        (self.start.0 + f * self.velocity.0, self.start.1 + f * self.velocity.1)
    }

    pub fn present(&self, frame: usize) -> bool {
        self.absent.is_none_or(|(a, b)| frame < a || frame >= b)
    }

    /// Whether the pixel center `(y + 0.5, x + 0.5)` lies inside the shape.
    pub fn covers(&self, frame: usize, y: usize, x: usize) -> bool {
        let (cy, cx) = self.center(frame);
        let dy = (y as f64 + 0.5 - cy) / self.half_size.0;
        let dx = (x as f64 + 0.5 - cx) / self.half_size.1;
        match self.shape {
            Shape::Rect => dy.abs() < 1.0 && dx.abs() < 1.0,
            Shape::Ellipse => dy * dy + dx * dx < 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Probability of flipping each mask boundary pixel.
    pub flip_rate: f64,
    /// Norm scale of the isotropic embedding jitter.
    pub embedding_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { flip_rate: 0.02, embedding_sigma: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub objects: Vec<ObjectSpec>,
    pub noise: NoiseConfig,
    /// Downsampling factor of the activation, feature and embedding maps.
    pub map_stride: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return bad("canvas and frame count must be positive".into());
        }
        if self.map_stride == 0 || !self.height.is_multiple_of(self.map_stride) || !self.width.is_multiple_of(self.map_stride) {
            return bad(format!("map stride {} must divide {}x{}", self.map_stride, self.height, self.width));
        }
        if !(0.0..=1.0).contains(&self.noise.flip_rate) || !(self.noise.embedding_sigma >= 0.0) {
            return bad(format!("invalid noise {:?}", self.noise));
        }
        let dim = self.objects.first().map_or(0, |o| o.embedding.len());
        for (i, o) in self.objects.iter().enumerate() {
            if o.embedding.len() != dim {
                return bad(format!("object {i} embedding has dimension {}, expected {dim}", o.embedding.len()));
            }
            if !(o.half_size.0 > 0.0 && o.half_size.1 > 0.0) {
                return bad(format!("object {i} has non-positive size"));
            }
            if self.objects[..i].iter().any(|p| p.depth == o.depth) {
                return bad(format!("object {i} shares depth {} with another object", o.depth));
            }
            for f in 0..self.frames {
                let (cy, cx) = o.center(f);
                if !(0.0..self.height as f64).contains(&cy) || !(0.0..self.width as f64).contains(&cx) {
                    return bad(format!("object {i} center ({cy}, {cx}) leaves the canvas at frame {f}"));
                }
            }
        }
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        self.objects.first().map_or(0, |o| o.embedding.len())
    }

    pub fn num_classes(&self) -> usize {
        self.objects.iter().map(|o| o.class_id as usize + 1).max().unwrap_or(0)
    }

    /// Object index visible at each pixel of `frame`, row-major.
    pub fn owners(&self, frame: usize) -> Vec<Option<usize>> {
        let mut order: Vec<usize> = (0..self.objects.len()).filter(|&i| self.objects[i].present(frame)).collect();
        order.sort_by_key(|&i| self.objects[i].depth);
        let mut out = Vec::with_capacity(self.height * self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(order.iter().copied().find(|&i| self.objects[i].covers(frame, y, x)));
            }
        }
        out
    }

    /// Unoccluded shape of object `i` in `frame` (empty while absent).
    pub fn full_shape(&self, i: usize, frame: usize) -> Bitmap {
        let o = &self.objects[i];
        let mut b = Bitmap::empty(self.height, self.width);
        if o.present(frame) {
            for y in 0..self.height {
                for x in 0..self.width {
                    if o.covers(frame, y, x) {
                        b.set(y, x, true);
                    }
                }
            }
        }
        b
    }
}

/// Fraction of object `i`'s on-canvas shape hidden by nearer objects.
pub fn occlusion_fraction(s: &Scenario, i: usize, frame: usize) -> f64 {
    let full = s.full_shape(i, frame).count();
    if full == 0 {
        return 0.0;
    }
    let visible = s.owners(frame).iter().filter(|o| **o == Some(i)).count();
    (full - visible) as f64 / full as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Crossing,
    Parade,
    Static,
    Disappear,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::Crossing, ScenarioKind::Parade, ScenarioKind::Static, ScenarioKind::Disappear];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Crossing => "crossing",
            ScenarioKind::Parade => "parade",
            ScenarioKind::Static => "static",
            ScenarioKind::Disappear => "disappear",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown scenario {s:?}; expected crossing, parade, static or disappear")))
    }
}

/// Clip length and overlap used to cut a video into clips.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipLayout {
    pub clip_len: usize,
    pub overlap: usize,
}

impl Default for ClipLayout {
    fn default() -> Self {
        Self { clip_len: 4, overlap: 3 }
    }
}

impl ClipLayout {
    pub fn stride(&self) -> usize {
        self.clip_len - self.overlap
    }

    /// Clip `k` starts at `k * stride`; the last clip is cut at the video end.
    pub fn spans(&self, frames: usize) -> Result<Vec<FrameSpan>> {
        if self.clip_len == 0 || self.overlap >= self.clip_len {
            return Err(Error::Config(format!("clip length {} with overlap {}", self.clip_len, self.overlap)));
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start < frames {
            out.push(FrameSpan { start, len: self.clip_len.min(frames - start) });
            if start + self.clip_len >= frames {
                break;
            }
            start += self.stride();
        }
        Ok(out)
    }
}

/// Unit vectors whose pairwise cosine is at most `max_cos`.
fn separated_embeddings(rng: &mut CounterRng, n: usize, dim: usize, max_cos: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        if out.iter().all(|u| cosine(u, &v) <= max_cos) {
            out.push(v);
        }
    }
    out
}

fn jitter(rng: &mut CounterRng, amplitude: usize) -> f64 {
    rng.below(2 * amplitude + 1) as f64 - amplitude as f64
}

fn object(shape: Shape, half: (f64, f64), start: (f64, f64), velocity: (f64, f64), depth: u32, class_id: u32) -> ObjectSpec {
    ObjectSpec { shape, half_size: half, start, velocity, depth, embedding: Vec::new(), class_id, absent: None }
}

fn finish(name: &str, seed: u64, height: usize, width: usize, frames: usize, mut objects: Vec<ObjectSpec>, rng: &mut CounterRng) -> Scenario {
    let embeddings = separated_embeddings(rng, objects.len(), EMBED_DIM, 0.5);
    for (o, e) in objects.iter_mut().zip(embeddings) {
        o.embedding = e;
    }
    Scenario { name: name.into(), seed, height, width, frames, objects, noise: NoiseConfig::default(), map_stride: 4 }
}

/// A large front square and a small back square approach each other on the
/// same row. The back square is fully hidden for six frames, long enough
/// that its last and first visible clips share no frames.
pub fn crossing_scenario(seed: u64) -> Scenario {
    let mut rng = CounterRng::new(seed, stream(STREAM_LAYOUT, 0, 0));
    let (ja, jb) = (jitter(&mut rng, 2), jitter(&mut rng, 2));
    let objects = vec![
        object(Shape::Rect, (10.0, 10.0), (24.0 + ja, 10.0), (0.0, 1.0), 0, 0),
        object(Shape::Rect, (4.0, 4.0), (24.0 + jb, 53.0), (0.0, -1.0), 1, 0),
    ];
    finish("crossing", seed, 48, 64, 44, objects, &mut rng)
}

/// Four shapes at different speeds and depths with partial occlusions.
pub fn parade_scenario(seed: u64) -> Scenario {
    let mut rng = CounterRng::new(seed, stream(STREAM_LAYOUT, 0, 0));
    let mut j = || (jitter(&mut rng, 2), jitter(&mut rng, 2));
    let (j0, j1, j2, j3) = (j(), j(), j(), j());
    let objects = vec![
        object(Shape::Rect, (8.0, 6.0), (16.0 + j0.0, 8.0 + j0.1), (0.0, 1.2), 2, 0),
        object(Shape::Ellipse, (9.0, 9.0), (24.0 + j1.0, 56.0 + j1.1), (0.0, -1.0), 0, 1),
        object(Shape::Rect, (6.0, 10.0), (32.0 + j2.0, 30.0 + j2.1), (0.0, 0.4), 1, 0),
        object(Shape::Ellipse, (5.0, 5.0), (12.0 + j3.0, 50.0 + j3.1), (0.2, -0.8), 3, 1),
    ];
    finish("parade", seed, 48, 64, 32, objects, &mut rng)
}

/// Three motionless, non-touching shapes.
pub fn static_scenario(seed: u64) -> Scenario {
    let mut rng = CounterRng::new(seed, stream(STREAM_LAYOUT, 0, 0));
    let mut j = || (jitter(&mut rng, 2), jitter(&mut rng, 2));
    let (j0, j1, j2) = (j(), j(), j());
    let objects = vec![
        object(Shape::Rect, (6.0, 8.0), (12.0 + j0.0, 14.0 + j0.1), (0.0, 0.0), 0, 0),
        object(Shape::Ellipse, (8.0, 10.0), (30.0 + j1.0, 44.0 + j1.1), (0.0, 0.0), 1, 1),
        object(Shape::Rect, (5.0, 5.0), (38.0 + j2.0, 12.0 + j2.1), (0.0, 0.0), 2, 2),
    ];
    finish("static", seed, 48, 64, 12, objects, &mut rng)
}

/// Two static shapes; the second leaves the scene at frame 6 and returns so
/// that `gap_clips` clips separate its last sighting from its return.
pub fn disappear_scenario(seed: u64, gap_clips: usize, layout: ClipLayout) -> Result<Scenario> {
    const LEAVE: usize = 6;
    const TAIL: usize = 8;
    let mut back = None;
    for b in LEAVE + 1..LEAVE + 1 + (gap_clips + 2) * layout.clip_len.max(1) * layout.stride().max(1) + layout.clip_len {
        if clip_gap(layout, LEAVE, b, b + TAIL)? == gap_clips as isize {
            back = Some(b);
            break;
        }
    }
    let back = back.ok_or_else(|| Error::Scenario(format!("no absence interval gives a gap of {gap_clips} clips")))?;
    let mut rng = CounterRng::new(seed, stream(STREAM_LAYOUT, 0, 0));
    let mut j = || (jitter(&mut rng, 2), jitter(&mut rng, 2));
    let (j0, j1) = (j(), j());
    let mut returning = object(Shape::Ellipse, (7.0, 7.0), (32.0 + j1.0, 44.0 + j1.1), (0.0, 0.0), 1, 1);
    returning.absent = Some((LEAVE, back));
    let objects = vec![object(Shape::Rect, (6.0, 6.0), (16.0 + j0.0, 16.0 + j0.1), (0.0, 0.0), 0, 0), returning];
    Ok(finish("disappear", seed, 48, 64, back + TAIL, objects, &mut rng))
}

/// Clips between the last clip holding frame `leave - 1` and the first
/// holding frame `back`.
pub fn clip_gap(layout: ClipLayout, leave: usize, back: usize, frames: usize) -> Result<isize> {
    let spans = layout.spans(frames)?;
    let last = spans.iter().rposition(|s| s.contains(leave - 1));
    let first = spans.iter().position(|s| s.contains(back));
    match (last, first) {
        (Some(l), Some(f)) => Ok(f as isize - l as isize),
        _ => Err(Error::Scenario("absence interval outside the video".into())),
    }
}

/// Default gap of the disappearance scenario: two clips past the default
/// memory horizon of ten clips.
pub const DEFAULT_DISAPPEAR_GAP: usize = 12;

pub fn build_scenario(kind: ScenarioKind, seed: u64) -> Scenario {
    match kind {
        ScenarioKind::Crossing => crossing_scenario(seed),
        ScenarioKind::Parade => parade_scenario(seed),
        ScenarioKind::Static => static_scenario(seed),
        ScenarioKind::Disappear => disappear_scenario(seed, DEFAULT_DISAPPEAR_GAP, ClipLayout::default())
            .expect("default disappearance layout is attainable"),
    }
}

/// Whole-video ground truth of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct GtTrack {
    pub identity: u64,
    pub class_id: u32,
    /// Visible mask of every frame.
    pub masks: Vec<Bitmap>,
}

pub fn ground_truth(s: &Scenario) -> Result<Vec<GtTrack>> {
    s.validate()?;
    let owners: Vec<_> = (0..s.frames).map(|f| s.owners(f)).collect();
    Ok(visible_tracks(s, &owners))
}

fn visible_tracks(s: &Scenario, owners: &[Vec<Option<usize>>]) -> Vec<GtTrack> {
    (0..s.objects.len())
        .map(|i| GtTrack {
            identity: i as u64,
            class_id: s.objects[i].class_id,
            masks: owners
                .iter()
                .map(|o| Bitmap { height: s.height, width: s.width, bits: o.iter().map(|p| *p == Some(i)).collect() })
                .collect(),
        })
        .collect()
}

/// Ground truth reassembled from clip records; later clips win.
pub fn ground_truth_from_clips(clips: &[ClipRecord]) -> Result<Vec<GtTrack>> {
    let frames = clips.iter().map(|c| c.span.end()).max().unwrap_or(0);
    let mut tracks: std::collections::BTreeMap<u64, GtTrack> = std::collections::BTreeMap::new();
    for c in clips {
        let g = c
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::ClipSequence(format!("clip {} has no ground truth", c.clip_index)))?;
        let (h, w) = c.canvas;
        for ((&id, &class_id), m) in g.identities.iter().zip(&g.class_ids).zip(&g.masks) {
            let t = tracks
                .entry(id)
                .or_insert_with(|| GtTrack { identity: id, class_id, masks: vec![Bitmap::empty(h, w); frames] });
            for (i, f) in (c.span.start..c.span.end()).enumerate() {
                t.masks[f] = m.frame_bitmap(i);
            }
        }
    }
    Ok(tracks.into_values().collect())
}

/// Object centers of every frame, `(x, y)`.
pub fn scenario_trajectories(s: &Scenario) -> Vec<Trajectory> {
    s.objects
        .iter()
        .enumerate()
        .map(|(i, o)| Trajectory {
            id: i as u64,
            points: (0..s.frames).map(|f| o.center(f)).map(|(y, x)| (x, y)).collect(),
        })
        .collect()
}

fn flip_boundary(b: &Bitmap, rate: f64, rng: &mut CounterRng) -> Bitmap {
    if rate == 0.0 {
        return b.clone();
    }
    let (h, w) = (b.height, b.width);
    let mut out = b.clone();
    for y in 0..h {
        for x in 0..w {
            let v = b.get(y, x);
            let boundary = (y > 0 && b.get(y - 1, x) != v)
                || (y + 1 < h && b.get(y + 1, x) != v)
                || (x > 0 && b.get(y, x - 1) != v)
                || (x + 1 < w && b.get(y, x + 1) != v);
            if boundary && rng.bernoulli(rate) {
                out.set(y, x, !v);
            }
        }
    }
    out
}

/// Clip records with detections, maps and ground truth for every clip of
/// `layout`.
pub fn render_scenario(s: &Scenario, layout: ClipLayout) -> Result<Vec<ClipRecord>> {
    s.validate()?;
    let spans = layout.spans(s.frames)?;
    for (i, _) in s.objects.iter().enumerate() {
        if let Some(f) = (0..s.frames).find(|&f| s.objects[i].present(f) && s.full_shape(i, f).is_clear()) {
            return Err(Error::Scenario(format!("object {i} is entirely off the canvas at frame {f}")));
        }
    }
    let owners: Vec<_> = (0..s.frames).map(|f| s.owners(f)).collect();
    let gt = visible_tracks(s, &owners);
    spans.iter().enumerate().map(|(k, &span)| render_clip(s, k, span, &owners, &gt)).collect()
}

fn render_clip(s: &Scenario, k: usize, span: FrameSpan, owners: &[Vec<Option<usize>>], gt: &[GtTrack]) -> Result<ClipRecord> {
    let frames = span.start..span.end();
    let visible: Vec<usize> =
        (0..s.objects.len()).filter(|&i| frames.clone().any(|f| !gt[i].masks[f].is_clear())).collect();
    let dim = s.embed_dim();

    let embeddings: Vec<Vec<f64>> = (0..s.objects.len())
        .map(|i| {
            let mut rng = CounterRng::new(s.seed, stream(STREAM_EMBED, k, i));
            let scale = s.noise.embedding_sigma / (dim.max(1) as f64).sqrt();
            s.objects[i].embedding.iter().map(|v| v + scale * rng.normal()).collect()
        })
        .collect();

    let mut detections = Vec::with_capacity(visible.len());
    for &i in &visible {
        let mut flips = CounterRng::new(s.seed, stream(STREAM_FLIP, k, i));
        let bitmaps: Vec<Bitmap> =
            frames.clone().map(|f| flip_boundary(&gt[i].masks[f], s.noise.flip_rate, &mut flips)).collect();
        if bitmaps.iter().all(Bitmap::is_clear) {
            continue;
        }
        let confidence = CounterRng::new(s.seed, stream(STREAM_CONF, k, i)).uniform(0.6, 1.0);
        detections.push(Detection {
            class_id: s.objects[i].class_id,
            confidence,
            embedding: embeddings[i].clone(),
            mask: MaskVolume::from_bitmaps(&bitmaps)?,
        });
    }
    CounterRng::new(s.seed, stream(STREAM_ORDER, k, 0)).shuffle(&mut detections);

    let ms = s.map_stride;
    let (h0, w0) = (s.height / ms, s.width / ms);
    let cell_owner = |t: usize, my: usize, mx: usize| owners[span.start + t][(my * ms + ms / 2) * s.width + mx * ms + ms / 2];
    let peaks: Vec<Vec<(u32, (f64, f64), f64)>> = frames
        .clone()
        .map(|f| {
            (0..s.objects.len())
                .filter_map(|i| {
                    let m = &gt[i].masks[f];
                    m.centroid().map(|c| (s.objects[i].class_id, c, (0.5 * (m.count() as f64).sqrt()).max(ms as f64)))
                })
                .collect()
        })
        .collect();
    // Gaussian bump in map cells, peaking at 1 on the cell holding the centroid.
    let activation = ChannelMap::from_fn([s.num_classes(), span.len, h0, w0], |c, t, my, mx| {
        peaks[t]
            .iter()
            .filter(|p| p.0 as usize == c)
            .map(|&(_, (cy, cx), sigma)| {
                let dy = my as f64 - (cy / ms as f64).floor();
                let dx = mx as f64 - (cx / ms as f64).floor();
                let sigma = sigma / ms as f64;
                (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp()
            })
            .fold(0.0, f64::max)
    })?;
    let embedding_map = ChannelMap::from_fn([dim, span.len, h0, w0], |c, t, my, mx| {
        cell_owner(t, my, mx).map_or(0.0, |i| embeddings[i][c])
    })?;
    let features = ChannelMap::from_fn([dim + 1, span.len, h0, w0], |c, t, my, mx| match cell_owner(t, my, mx) {
        Some(i) if c < dim => embeddings[i][c],
        Some(_) => 1.0,
        None => 0.0,
    })?;

    let masks: Vec<MaskVolume> = visible
        .iter()
        .map(|&i| MaskVolume::from_bitmaps(&gt[i].masks[span.start..span.end()]))
        .collect::<Result<_>>()?;
    let ground_truth = ClipGroundTruth {
        identities: visible.iter().map(|&i| i as u64).collect(),
        class_ids: visible.iter().map(|&i| s.objects[i].class_id).collect(),
        boxes: masks.iter().map(mask_to_boxes).collect(),
        masks,
    };

    Ok(ClipRecord {
        clip_index: k,
        span,
        canvas: (s.height, s.width),
        activation: Some(activation),
        features: Some(features),
        embeddings: Some(embedding_map),
        detections,
        ground_truth: Some(ground_truth),
    })
}

fn bitmap_iou(a: &Bitmap, b: &Bitmap) -> f64 {
    if a.bits.len() != b.bits.len() {
        return 0.0;
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU above which a predicted mask counts as matching a ground-truth object.
pub const MATCH_IOU: f64 = 0.5;

/// Identity switches, association accuracy and mean IoU of `pred` against
/// `gt`.
///
/// In each frame every visible ground-truth object takes the predicted id
/// of highest IoU (lowest id on ties), counted as matched above
/// [`MATCH_IOU`]. A switch is a change of matched id between successive
/// matched frames of one object. Association accuracy is the share of
/// consecutive visible frame pairs matched to the same id in both frames.
pub fn scenario_metrics(gt: &[GtTrack], pred: &VideoTracks) -> Metrics {
    let mut switches = 0;
    let (mut links, mut kept) = (0usize, 0usize);
    let (mut iou_sum, mut iou_count) = (0.0, 0usize);
    for g in gt {
        let mut matched: Vec<Option<u64>> = Vec::with_capacity(g.masks.len());
        for (f, m) in g.masks.iter().enumerate() {
            if m.is_clear() {
                matched.push(None);
                continue;
            }
            let mut best: Option<(f64, u64)> = None;
            for (id, p) in pred.frame(f) {
                let iou = bitmap_iou(m, p);
                if best.is_none_or(|(b, _)| iou > b) {
                    best = Some((iou, id));
                }
            }
            let best_iou = best.map_or(0.0, |b| b.0);
            iou_sum += best_iou;
            iou_count += 1;
            matched.push(best.filter(|b| b.0 > MATCH_IOU).map(|b| b.1));
        }
        let mut last = None;
        for id in matched.iter().flatten() {
            if last.is_some_and(|l| l != *id) {
                switches += 1;
            }
            last = Some(*id);
        }
        for f in 1..g.masks.len() {
            if g.masks[f - 1].is_clear() || g.masks[f].is_clear() {
                continue;
            }
            links += 1;
            if matched[f - 1].is_some() && matched[f - 1] == matched[f] {
                kept += 1;
            }
        }
    }
    let assoc_acc = if pred.tracks.is_empty() {
        0.0
    } else if links == 0 {
        1.0
    } else {
        kept as f64 / links as f64
    };
    let mean_iou = if iou_count == 0 { 0.0 } else { iou_sum / iou_count as f64 };
    Metrics { id_switches: switches, assoc_acc, mean_iou }
}

/// Renders `s` with the clip layout of `config`, tracks it and scores the
/// result against the scenario's ground truth.
pub fn track_scenario(s: &Scenario, config: &TrackerConfig) -> Result<(VideoTracks, Metrics)> {
    let layout = ClipLayout { clip_len: config.clip_len, overlap: config.overlap };
    let clips = render_scenario(s, layout)?;
    track_clips(&clips, &ground_truth(s)?, config)
}

/// Tracks already rendered clips and scores them against `gt`.
pub fn track_clips(clips: &[ClipRecord], gt: &[GtTrack], config: &TrackerConfig) -> Result<(VideoTracks, Metrics)> {
    let dets: Vec<_> = clips.iter().map(ClipRecord::clip_detections).collect();
    let mut tracks = run_near_online(&dets, config)?;
    if let Some(c) = clips.first() {
        (tracks.height, tracks.width) = c.canvas;
    }
    let metrics = scenario_metrics(gt, &tracks);
    Ok((tracks, metrics))
}
