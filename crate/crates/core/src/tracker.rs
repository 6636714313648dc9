//! Near-online clip-by-clip tracker.
//!
//! Each clip's detections are scored against a memory pool of recent tracks
//! with `S = β1 · mIoU + β2 · cos`, assigned with the Hungarian algorithm,
//! and written back into the pool. Tracks not seen for more than `T_mem`
//! clips are evicted.

use std::collections::BTreeMap;

use crate::clip::{filter_detections, ClipDetections, Detection, FrameSpan};
use crate::error::{Error, Result};
use crate::hungarian::hungarian_max;
use crate::mask::{Bitmap, BINARIZE_THRESHOLD};
use crate::query::cosine;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackEntry {
    pub clip: usize,
    pub span: FrameSpan,
    pub mask: crate::mask::MaskVolume,
    pub embedding: Vec<f64>,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: u64,
    pub class_id: u32,
    /// Ordered by clip index.
    pub entries: Vec<TrackEntry>,
}

impl Track {
    pub fn last_clip(&self) -> Option<usize> {
        self.entries.last().map(|e| e.clip)
    }

    /// Embedding of the most recent entry.
    pub fn reference_embedding(&self) -> &[f64] {
        self.entries.last().map_or(&[], |e| e.embedding.as_slice())
    }

    /// Mask of `frame` from the most recent entry covering it.
    pub fn frame_mask(&self, frame: usize) -> Option<&[f64]> {
        self.entries.iter().rev().find(|e| e.span.contains(frame)).map(|e| e.mask.frame(frame - e.span.start))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryPool {
    pub tracks: Vec<Track>,
    /// `T_mem`: entries older than this many clips are dropped.
    pub horizon: usize,
    pub next_id: u64,
    last_clip: Option<usize>,
}

impl MemoryPool {
    pub fn new(horizon: usize) -> Self {
        Self { tracks: Vec::new(), horizon, next_id: 0, last_clip: None }
    }

    /// Drops entries more than `horizon` clips before `clip`, then drops
    /// tracks left without entries.
    pub fn evict(&mut self, clip: usize) {
        let horizon = self.horizon;
        for t in &mut self.tracks {
            t.entries.retain(|e| clip.saturating_sub(e.clip) <= horizon);
        }
        self.tracks.retain(|t| !t.entries.is_empty());
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociationParams {
    pub beta1: f64,
    pub beta2: f64,
    /// Matched pairs scoring below this start a new track instead.
    pub tau_new: f64,
    /// Only match detections to tracks of the same class.
    pub match_class: bool,
}

impl Default for AssociationParams {
    fn default() -> Self {
        Self { beta1: 1.0, beta2: 1.0, tau_new: 0.2, match_class: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    /// `[n_tracks][n_detections]`
    pub values: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
}

/// IoU between a track and a detection over the frames both cover. Zero
/// when no frame is shared or both are empty there.
pub fn track_miou(track: &Track, det: &Detection, span: FrameSpan) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for f in span.start..span.end() {
        let Some(mem) = track.frame_mask(f) else { continue };
        for (&p, &q) in mem.iter().zip(det.mask.frame(f - span.start)) {
            let (p, q) = (p > BINARIZE_THRESHOLD, q > BINARIZE_THRESHOLD);
            inter += (p && q) as usize;
            union += (p || q) as usize;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn score_matrix(pool: &MemoryPool, dets: &ClipDetections, beta1: f64, beta2: f64) -> ScoreMatrix {
    let row = |track: &Track| -> Vec<f64> {
        dets.detections
            .iter()
            .map(|d| {
                let miou = if beta1 != 0.0 { track_miou(track, d, dets.span) } else { 0.0 };
                beta1 * miou + beta2 * cosine(track.reference_embedding(), &d.embedding)
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let values = {
        use rayon::prelude::*;
        pool.tracks.par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values = pool.tracks.iter().map(row).collect();
    ScoreMatrix { values, beta1, beta2 }
}

/// Associates one clip's (already confidence-filtered) detections with the
/// pool and returns the id given to each detection, in detection order.
pub fn associate_clip(
    pool: &mut MemoryPool,
    dets: &ClipDetections,
    clip_index: usize,
    params: &AssociationParams,
) -> Result<Vec<u64>> {
    if let Some(last) = pool.last_clip {
        if clip_index <= last {
            return Err(Error::ClipSequence(format!("clip {clip_index} after clip {last}")));
        }
    }
    dets.validate()?;
    pool.evict(clip_index);
    pool.last_clip = Some(clip_index);

    let scores = score_matrix(pool, dets, params.beta1, params.beta2);
    let mut assigned: Vec<Option<usize>> = vec![None; dets.detections.len()];
    if !pool.tracks.is_empty() && !dets.detections.is_empty() {
        for (m, c) in hungarian_max(&scores.values) {
            let class_ok = !params.match_class || pool.tracks[m].class_id == dets.detections[c].class_id;
            if scores.values[m][c] >= params.tau_new && class_ok {
                assigned[c] = Some(m);
            }
        }
    }

    let mut ids = Vec::with_capacity(dets.detections.len());
    for (det, slot) in dets.detections.iter().zip(&assigned) {
        let entry = TrackEntry {
            clip: clip_index,
            span: dets.span,
            mask: det.mask.clone(),
            embedding: det.embedding.clone(),
            confidence: det.confidence,
        };
        let id = match slot {
            Some(m) => {
                let track = &mut pool.tracks[*m];
                track.entries.push(entry);
                track.id
            }
            None => {
                let id = pool.next_id;
                pool.next_id += 1;
                pool.tracks.push(Track { id, class_id: det.class_id, entries: vec![entry] });
                id
            }
        };
        ids.push(id);
    }
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub clip_len: usize,
    pub overlap: usize,
    pub t_mem: usize,
    pub tau_conf: f64,
    pub association: AssociationParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { clip_len: 4, overlap: 3, t_mem: 10, tau_conf: 0.3, association: AssociationParams::default() }
    }
}

impl TrackerConfig {
    pub fn stride(&self) -> usize {
        self.clip_len - self.overlap
    }
}

/// One track's final per-frame masks.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTrack {
    pub id: u64,
    pub class_id: u32,
    pub masks: BTreeMap<usize, Bitmap>,
}

/// Whole-video result of near-online tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTracks {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Sorted by id.
    pub tracks: Vec<VideoTrack>,
}

impl VideoTracks {
    /// `(id, mask)` pairs present in `frame`, ascending by id.
    pub fn frame(&self, frame: usize) -> Vec<(u64, &Bitmap)> {
        self.tracks.iter().filter_map(|t| t.masks.get(&frame).map(|m| (t.id, m))).collect()
    }
}

/// Runs the tracker over consecutive clips. Clip `k` must start `k` strides
/// after the first clip; frames covered by several clips keep the masks of
/// the latest one.
pub fn run_near_online(clips: &[ClipDetections], config: &TrackerConfig) -> Result<VideoTracks> {
    if config.clip_len == 0 || config.overlap >= config.clip_len {
        return Err(Error::Config(format!(
            "clip length {} with overlap {} leaves no stride",
            config.clip_len, config.overlap
        )));
    }
    let first = clips.first().ok_or_else(|| Error::ClipSequence("no clips".into()))?;
    let (height, width) = clips
        .iter()
        .flat_map(|c| &c.detections)
        .map(|d| (d.mask.height(), d.mask.width()))
        .next()
        .unwrap_or((0, 0));
    let stride = config.stride();
    for (k, c) in clips.iter().enumerate() {
        if c.span.start != first.span.start + k * stride {
            return Err(Error::ClipSequence(format!(
                "clip {k} starts at frame {}, expected {}",
                c.span.start,
                first.span.start + k * stride
            )));
        }
        if c.span.len == 0 || c.span.len > config.clip_len {
            return Err(Error::ClipSequence(format!("clip {k} has {} frames", c.span.len)));
        }
        if let Some(d) = c.detections.iter().find(|d| (d.mask.height(), d.mask.width()) != (height, width)) {
            return Err(Error::ClipSequence(format!(
                "clip {k} has a {}x{} mask, expected {height}x{width}",
                d.mask.height(),
                d.mask.width()
            )));
        }
    }

    let frames = clips.iter().map(|c| c.span.end()).max().unwrap_or(0);
    let mut per_frame: Vec<BTreeMap<u64, Bitmap>> = vec![BTreeMap::new(); frames];
    let mut classes: BTreeMap<u64, u32> = BTreeMap::new();
    let mut pool = MemoryPool::new(config.t_mem);

    for (k, clip) in clips.iter().enumerate() {
        let kept = filter_detections(clip, config.tau_conf);
        let ids = associate_clip(&mut pool, &kept, k, &config.association)?;
        for f in clip.span.start..clip.span.end() {
            per_frame[f].clear();
        }
        for (det, id) in kept.detections.iter().zip(ids) {
            classes.entry(id).or_insert(det.class_id);
            for (i, f) in (clip.span.start..clip.span.end()).enumerate() {
                let bm = det.mask.frame_bitmap(i);
                if !bm.is_clear() {
                    per_frame[f].insert(id, bm);
                }
            }
        }
    }

    let mut tracks: BTreeMap<u64, VideoTrack> = BTreeMap::new();
    for (f, masks) in per_frame.into_iter().enumerate() {
        for (id, m) in masks {
            tracks
                .entry(id)
                .or_insert_with(|| VideoTrack { id, class_id: classes[&id], masks: BTreeMap::new() })
                .masks
                .insert(f, m);
        }
    }
    Ok(VideoTracks { frames, height, width, tracks: tracks.into_values().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::MaskVolume;

    fn block(frames: usize, x0: usize, x1: usize) -> MaskVolume {
        MaskVolume::from_fn(frames, 4, 8, |_, _, x| if (x0..x1).contains(&x) { 1.0 } else { 0.0 }).unwrap()
    }

    fn det(mask: MaskVolume, emb: Vec<f64>) -> Detection {
        Detection { class_id: 0, confidence: 0.9, embedding: emb, mask }
    }

    fn clip(start: usize, dets: Vec<Detection>) -> ClipDetections {
        let len = dets.first().map_or(2, |d| d.mask.frames());
        ClipDetections { span: FrameSpan { start, len }, detections: dets }
    }

    #[test]
    fn empty_pool_spawns_consecutive_ids() {
        let mut pool = MemoryPool::new(10);
        let c = clip(0, vec![det(block(2, 0, 2), vec![1.0, 0.0]), det(block(2, 4, 6), vec![0.0, 1.0])]);
        assert_eq!(associate_clip(&mut pool, &c, 0, &AssociationParams::default()).unwrap(), vec![0, 1]);
        assert_eq!(pool.next_id, 2);
    }

    #[test]
    fn identical_detection_keeps_id() {
        let mut pool = MemoryPool::new(10);
        let params = AssociationParams::default();
        let c0 = clip(0, vec![det(block(2, 0, 2), vec![1.0, 0.0])]);
        associate_clip(&mut pool, &c0, 0, &params).unwrap();
        let c1 = clip(0, vec![det(block(2, 0, 2), vec![1.0, 0.0])]);
        let s = score_matrix(&pool, &c1, 1.0, 1.0);
        assert_eq!(s.values, vec![vec![2.0]]);
        assert_eq!(associate_clip(&mut pool, &c1, 1, &params).unwrap(), vec![0]);
        assert_eq!(pool.tracks[0].entries.len(), 2);
    }

    #[test]
    fn score_matrix_terms() {
        let mut pool = MemoryPool::new(10);
        let params = AssociationParams::default();
        let a = block(1, 0, 3);
        let b = block(1, 4, 7);
        associate_clip(&mut pool, &clip(0, vec![det(a.clone(), vec![1.0, 0.0]), det(b.clone(), vec![0.0, 1.0])]), 0, &params)
            .unwrap();
        // Detection 0 equals track 0; detection 1 overlaps track 0 on 1 of 3 columns.
        let d1 = block(1, 1, 3);
        let cur = clip(0, vec![det(a, vec![1.0, 0.0]), det(d1, vec![1.0, 0.0])]);
        let s = score_matrix(&pool, &cur, 1.0, 1.0);
        assert_eq!(s.values[0], vec![2.0, 2.0 / 3.0 + 1.0]);
        assert_eq!(s.values[1], vec![0.0, 0.0]);
        let iou_only = score_matrix(&pool, &cur, 1.0, 0.0);
        assert_eq!(iou_only.values[0], vec![1.0, 2.0 / 3.0]);
        let sim_only = score_matrix(&pool, &cur, 0.0, 1.0);
        assert_eq!(sim_only.values[0], vec![1.0, 1.0]);
    }

    #[test]
    fn disjoint_frames_have_zero_miou() {
        let mut pool = MemoryPool::new(10);
        associate_clip(&mut pool, &clip(0, vec![det(block(2, 0, 2), vec![1.0])]), 0, &AssociationParams::default()).unwrap();
        let later = clip(5, vec![det(block(2, 0, 2), vec![1.0])]);
        assert_eq!(track_miou(&pool.tracks[0], &later.detections[0], later.span), 0.0);
    }

    #[test]
    fn eviction_after_horizon() {
        let params = AssociationParams::default();
        for (gap, keeps) in [(3usize, true), (4, false)] {
            let mut pool = MemoryPool::new(3);
            associate_clip(&mut pool, &clip(0, vec![det(block(1, 0, 2), vec![1.0, 0.0])]), 0, &params).unwrap();
            let ids = associate_clip(&mut pool, &clip(gap, vec![det(block(1, 0, 2), vec![1.0, 0.0])]), gap, &params).unwrap();
            assert_eq!(ids[0] == 0, keeps, "gap {gap}");
            assert!(pool.tracks.iter().flat_map(|t| &t.entries).all(|e| gap - e.clip <= 3));
        }
    }

    #[test]
    fn low_scores_spawn_new_tracks() {
        let params = AssociationParams { beta2: 0.0, ..Default::default() };
        let mut pool = MemoryPool::new(10);
        associate_clip(&mut pool, &clip(0, vec![det(block(1, 0, 2), vec![1.0])]), 0, &params).unwrap();
        let ids = associate_clip(&mut pool, &clip(0, vec![det(block(1, 5, 8), vec![1.0])]), 1, &params).unwrap();
        assert_eq!(ids, vec![1]);
    }

    #[test]
    fn class_gate() {
        let params = AssociationParams { match_class: true, ..Default::default() };
        let mut pool = MemoryPool::new(10);
        associate_clip(&mut pool, &clip(0, vec![det(block(1, 0, 2), vec![1.0])]), 0, &params).unwrap();
        let mut other = det(block(1, 0, 2), vec![1.0]);
        other.class_id = 3;
        assert_eq!(associate_clip(&mut pool, &clip(0, vec![other]), 1, &params).unwrap(), vec![1]);
    }

    #[test]
    fn clip_indices_must_increase() {
        let mut pool = MemoryPool::new(10);
        let p = AssociationParams::default();
        associate_clip(&mut pool, &clip(0, vec![]), 2, &p).unwrap();
        assert!(matches!(associate_clip(&mut pool, &clip(0, vec![]), 2, &p), Err(Error::ClipSequence(_))));
    }

    #[test]
    fn single_clip_run() {
        let c = clip(0, vec![det(block(2, 0, 2), vec![1.0, 0.0]), det(block(2, 4, 6), vec![0.0, 1.0])]);
        let cfg = TrackerConfig { clip_len: 2, overlap: 1, ..Default::default() };
        let out = run_near_online(&[c], &cfg).unwrap();
        assert_eq!(out.frames, 2);
        assert_eq!(out.tracks.len(), 2);
        assert_eq!(out.tracks[0].masks[&1], block(2, 0, 2).frame_bitmap(1));
    }

    #[test]
    fn static_objects_span_clips() {
        let mk = |s| clip(s, vec![det(block(2, 0, 2), vec![1.0, 0.0]), det(block(2, 4, 6), vec![0.0, 1.0])]);
        let cfg = TrackerConfig { clip_len: 2, overlap: 1, ..Default::default() };
        let out = run_near_online(&[mk(0), mk(1), mk(2)], &cfg).unwrap();
        assert_eq!(out.frames, 4);
        assert_eq!(out.tracks.len(), 2);
        assert!(out.tracks.iter().all(|t| t.masks.len() == 4));
    }

    #[test]
    fn malformed_sequences() {
        let mk = |s| clip(s, vec![det(block(2, 0, 2), vec![1.0])]);
        let cfg = TrackerConfig { clip_len: 2, overlap: 1, ..Default::default() };
        assert!(matches!(run_near_online(&[mk(0), mk(2)], &cfg), Err(Error::ClipSequence(_))));
        assert!(run_near_online(&[], &cfg).is_err());
    }
}
