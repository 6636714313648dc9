//! JSON clip records and track dumps.
//!
//! Clip record layout (UTF-8, one JSON object per file):
//!
//! ```text
//! {
//!   "clip_index": 3,
//!   "frames": [3, 4, 5, 6],            // contiguous, ascending
//!   "canvas": [H, W],
//!   "activation": {"shape": [c, T, H0, W0], "data": [...]},   // optional
//!   "features":   {"shape": [d, T, H0, W0], "data": [...]},   // optional
//!   "embeddings": {"shape": [de, T, H0, W0], "data": [...]},  // optional
//!   "detections": [
//!     {"class_id": 0, "confidence": 0.9, "embedding": [...],
//!      "masks": [RLE, ...]}            // one RLE per frame
//!   ],
//!   "ground_truth": {                  // optional
//!     "identities": [...], "class_ids": [...],
//!     "masks": [[RLE, ...], ...],      // per object, per frame
//!     "boxes": [[[x1, y1, x2, y2] | null, ...], ...]
//!   }
//! }
//! ```
//!
//! Every RLE is `{"size": [H, W], "counts": [...]}`. Detection masks are
//! stored binarized, so probabilities do not survive a round trip.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clip::{ClipDetections, Detection, FrameSpan};
use crate::error::{Error, Result};
use crate::mask::{rle_decode, rle_encode, BBox, Bitmap, MaskVolume, RleMask};
use crate::query::ChannelMap;
use crate::tracker::{VideoTrack, VideoTracks};

#[derive(Clone, Debug, PartialEq)]
pub struct ClipGroundTruth {
    pub identities: Vec<u64>,
    pub class_ids: Vec<u32>,
    pub masks: Vec<MaskVolume>,
    pub boxes: Vec<Vec<Option<BBox>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    pub clip_index: usize,
    pub span: FrameSpan,
    /// `(height, width)` of every mask in the record.
    pub canvas: (usize, usize),
    pub activation: Option<ChannelMap>,
    pub features: Option<ChannelMap>,
    pub embeddings: Option<ChannelMap>,
    pub detections: Vec<Detection>,
    pub ground_truth: Option<ClipGroundTruth>,
}

impl ClipRecord {
    pub fn clip_detections(&self) -> ClipDetections {
        ClipDetections { span: self.span, detections: self.detections.clone() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayJson {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionJson {
    class_id: u32,
    confidence: f64,
    embedding: Vec<f64>,
    masks: Vec<RleMask>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthJson {
    identities: Vec<u64>,
    class_ids: Vec<u32>,
    masks: Vec<Vec<RleMask>>,
    boxes: Vec<Vec<Option<BBox>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipRecordJson {
    clip_index: usize,
    frames: Vec<usize>,
    canvas: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<ArrayJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<ArrayJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embeddings: Option<ArrayJson>,
    detections: Vec<DetectionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruthJson>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

fn map_to_json(m: &ChannelMap) -> ArrayJson {
    ArrayJson { shape: m.shape().to_vec(), data: m.data().to_vec() }
}

fn map_from_json(a: ArrayJson, path: &str, frames: usize) -> Result<ChannelMap> {
    let [c, t, h, w]: [usize; 4] =
        a.shape.as_slice().try_into().map_err(|_| schema(format!("{path}.shape"), "expected 4 extents"))?;
    if t != frames {
        return Err(schema(format!("{path}.shape"), format!("{t} frames, clip has {frames}")));
    }
    ChannelMap::new(c, t, h, w, a.data).map_err(|e| schema(path, e.to_string()))
}

fn volume_from_rles(rles: &[RleMask], canvas: (usize, usize), frames: usize, path: &str) -> Result<MaskVolume> {
    if rles.len() != frames {
        return Err(schema(path, format!("{} masks for {frames} frames", rles.len())));
    }
    let mut bitmaps = Vec::with_capacity(frames);
    for (i, r) in rles.iter().enumerate() {
        if (r.height(), r.width()) != canvas {
            return Err(schema(
                format!("{path}[{i}].size"),
                format!("{:?} does not match canvas {canvas:?}", r.size),
            ));
        }
        bitmaps.push(rle_decode(r).map_err(|e| schema(format!("{path}[{i}]"), e.to_string()))?);
    }
    MaskVolume::from_bitmaps(&bitmaps).map_err(|e| schema(path, e.to_string()))
}

fn volume_to_rles(m: &MaskVolume) -> Vec<RleMask> {
    m.bitmaps().iter().map(rle_encode).collect()
}

impl ClipRecord {
    fn to_json(&self) -> ClipRecordJson {
        ClipRecordJson {
            clip_index: self.clip_index,
            frames: (self.span.start..self.span.end()).collect(),
            canvas: [self.canvas.0, self.canvas.1],
            activation: self.activation.as_ref().map(map_to_json),
            features: self.features.as_ref().map(map_to_json),
            embeddings: self.embeddings.as_ref().map(map_to_json),
            detections: self
                .detections
                .iter()
                .map(|d| DetectionJson {
                    class_id: d.class_id,
                    confidence: d.confidence,
                    embedding: d.embedding.clone(),
                    masks: volume_to_rles(&d.mask),
                })
                .collect(),
            ground_truth: self.ground_truth.as_ref().map(|g| GroundTruthJson {
                identities: g.identities.clone(),
                class_ids: g.class_ids.clone(),
                masks: g.masks.iter().map(volume_to_rles).collect(),
                boxes: g.boxes.clone(),
            }),
        }
    }

    fn from_json(j: ClipRecordJson) -> Result<Self> {
        let start = *j.frames.first().ok_or_else(|| schema("frames", "no frames"))?;
        if j.frames.iter().enumerate().any(|(i, &f)| f != start + i) {
            return Err(schema("frames", "frame indices must be contiguous and ascending"));
        }
        let span = FrameSpan { start, len: j.frames.len() };
        let canvas = (j.canvas[0], j.canvas[1]);
        if canvas.0 == 0 || canvas.1 == 0 {
            return Err(schema("canvas", "extents must be positive"));
        }
        let t = span.len;
        let activation = j.activation.map(|a| map_from_json(a, "activation", t)).transpose()?;
        let features = j.features.map(|a| map_from_json(a, "features", t)).transpose()?;
        let embeddings = j.embeddings.map(|a| map_from_json(a, "embeddings", t)).transpose()?;
        if let (Some(f), Some(e)) = (&features, &embeddings) {
            if f.shape()[1..] != e.shape()[1..] {
                return Err(schema("embeddings.shape", "spatial extents differ from features"));
            }
        }

        let mut detections = Vec::with_capacity(j.detections.len());
        for (i, d) in j.detections.into_iter().enumerate() {
            let path = format!("detections[{i}]");
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(schema(format!("{path}.confidence"), format!("{} outside [0, 1]", d.confidence)));
            }
            if let Some(e) = &embeddings {
                if d.embedding.len() != e.channels() {
                    return Err(schema(
                        format!("{path}.embedding"),
                        format!("dimension {} but embedding map has {}", d.embedding.len(), e.channels()),
                    ));
                }
            }
            let mask = volume_from_rles(&d.masks, canvas, t, &format!("{path}.masks"))?;
            detections.push(Detection { class_id: d.class_id, confidence: d.confidence, embedding: d.embedding, mask });
        }

        let ground_truth = match j.ground_truth {
            None => None,
            Some(g) => {
                let n = g.identities.len();
                if g.class_ids.len() != n || g.masks.len() != n || g.boxes.len() != n {
                    return Err(schema("ground_truth", "identities, class_ids, masks and boxes differ in length"));
                }
                let masks = g
                    .masks
                    .iter()
                    .enumerate()
                    .map(|(i, m)| volume_from_rles(m, canvas, t, &format!("ground_truth.masks[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(i) = g.boxes.iter().position(|b| b.len() != t) {
                    return Err(schema(format!("ground_truth.boxes[{i}]"), format!("expected {t} entries")));
                }
                Some(ClipGroundTruth { identities: g.identities, class_ids: g.class_ids, masks, boxes: g.boxes })
            }
        };

        Ok(ClipRecord { clip_index: j.clip_index, span, canvas, activation, features, embeddings, detections, ground_truth })
    }
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.classify() == serde_json::error::Category::Eof {
            Error::Io(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, format!("truncated JSON: {inner}")))
        } else {
            schema(path, inner.to_string())
        }
    })
}

pub fn clip_record_to_string(rec: &ClipRecord) -> String {
    let mut s = serde_json::to_string(&rec.to_json()).expect("clip record serializes");
    s.push('\n');
    s
}

pub fn clip_record_from_str(text: &str) -> Result<ClipRecord> {
    ClipRecord::from_json(parse_json(text)?)
}

pub fn write_clip_record(rec: &ClipRecord, path: &Path) -> Result<()> {
    fs::write(path, clip_record_to_string(rec))?;
    Ok(())
}

pub fn read_clip_record(path: &Path) -> Result<ClipRecord> {
    clip_record_from_str(&fs::read_to_string(path)?)
}

/// File name of clip `k` inside a record directory.
pub fn clip_file_name(k: usize) -> String {
    format!("clip_{k:04}.json")
}

/// Reads every `clip_*.json` in `dir`, ordered by clip index.
pub fn read_clip_dir(dir: &Path) -> Result<Vec<ClipRecord>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("clip_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut recs = paths
        .iter()
        .map(|p| {
            read_clip_record(p).map_err(|e| match e {
                Error::Parse { path, message } => {
                    Error::Parse { path: format!("{}: {path}", p.display()), message }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    recs.sort_by_key(|r| r.clip_index);
    Ok(recs)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameMaskJson {
    frame: usize,
    rle: RleMask,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackJson {
    id: u64,
    class_id: u32,
    masks: Vec<FrameMaskJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackDumpJson {
    frames: usize,
    canvas: [usize; 2],
    tracks: Vec<TrackJson>,
}

/// Track dump: `{"frames": N, "canvas": [H, W], "tracks": [{"id", "class_id",
/// "masks": [{"frame", "rle"}]}]}`, tracks ascending by id, masks by frame.
pub fn track_dump_to_string(v: &VideoTracks) -> String {
    let j = TrackDumpJson {
        frames: v.frames,
        canvas: [v.height, v.width],
        tracks: v
            .tracks
            .iter()
            .map(|t| TrackJson {
                id: t.id,
                class_id: t.class_id,
                masks: t.masks.iter().map(|(&frame, m)| FrameMaskJson { frame, rle: rle_encode(m) }).collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&j).expect("track dump serializes");
    s.push('\n');
    s
}

pub fn track_dump_from_str(text: &str) -> Result<VideoTracks> {
    let j: TrackDumpJson = parse_json(text)?;
    let canvas = (j.canvas[0], j.canvas[1]);
    let mut tracks = Vec::with_capacity(j.tracks.len());
    for (i, t) in j.tracks.into_iter().enumerate() {
        let mut masks = std::collections::BTreeMap::new();
        for (k, m) in t.masks.into_iter().enumerate() {
            let path = format!("tracks[{i}].masks[{k}]");
            if m.frame >= j.frames {
                return Err(schema(format!("{path}.frame"), format!("frame {} of {}", m.frame, j.frames)));
            }
            if (m.rle.height(), m.rle.width()) != canvas {
                return Err(schema(format!("{path}.rle.size"), "does not match canvas"));
            }
            let bm: Bitmap = rle_decode(&m.rle).map_err(|e| schema(format!("{path}.rle"), e.to_string()))?;
            masks.insert(m.frame, bm);
        }
        tracks.push(VideoTrack { id: t.id, class_id: t.class_id, masks });
    }
    tracks.sort_by_key(|t| t.id);
    Ok(VideoTracks { frames: j.frames, height: canvas.0, width: canvas.1, tracks })
}

pub fn write_track_dump(v: &VideoTracks, path: &Path) -> Result<()> {
    fs::write(path, track_dump_to_string(v))?;
    Ok(())
}

pub fn read_track_dump(path: &Path) -> Result<VideoTracks> {
    track_dump_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ClipRecord {
        let mask = MaskVolume::from_fn(2, 3, 4, |t, y, x| ((t + y + x) % 3 == 0) as u8 as f64).unwrap();
        let boxes = crate::mask::mask_to_boxes(&mask);
        ClipRecord {
            clip_index: 1,
            span: FrameSpan { start: 1, len: 2 },
            canvas: (3, 4),
            activation: Some(ChannelMap::from_fn([1, 2, 1, 2], |_, t, _, x| 0.25 * (t + x) as f64).unwrap()),
            features: None,
            embeddings: Some(ChannelMap::from_fn([2, 2, 1, 2], |c, _, _, x| (c * x) as f64 / 3.0).unwrap()),
            detections: vec![Detection { class_id: 2, confidence: 0.75, embedding: vec![0.1, 1.0 / 3.0], mask: mask.clone() }],
            ground_truth: Some(ClipGroundTruth { identities: vec![7], class_ids: vec![2], masks: vec![mask], boxes: vec![boxes] }),
        }
    }

    #[test]
    fn round_trip() {
        let rec = sample();
        let text = clip_record_to_string(&rec);
        assert_eq!(clip_record_from_str(&text).unwrap(), rec);
    }

    #[test]
    fn missing_size_names_path() {
        let text = clip_record_to_string(&sample()).replacen(r#""size":[3,4],"#, "", 1);
        match clip_record_from_str(&text) {
            Err(Error::Parse { path, message }) => {
                assert_eq!(path, "detections[0].masks[0]");
                assert!(message.contains("size"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_is_io_error() {
        let text = clip_record_to_string(&sample());
        let cut = &text[..text.len() / 2];
        assert!(matches!(clip_record_from_str(cut), Err(Error::Io(_))));
    }

    #[test]
    fn schema_violations() {
        let text = clip_record_to_string(&sample());
        let bad_frames = text.replace(r#""frames":[1,2]"#, r#""frames":[1,3]"#);
        assert!(matches!(clip_record_from_str(&bad_frames), Err(Error::Parse { path, .. }) if path == "frames"));
        let bad_conf = text.replace(r#""confidence":0.75"#, r#""confidence":1.5"#);
        assert!(matches!(clip_record_from_str(&bad_conf), Err(Error::Parse { path, .. }) if path == "detections[0].confidence"));
        let unknown = text.replacen('{', r#"{"bogus":1,"#, 1);
        assert!(matches!(clip_record_from_str(&unknown), Err(Error::Parse { .. })));
    }

    #[test]
    fn track_dump_round_trip() {
        let mut masks = std::collections::BTreeMap::new();
        masks.insert(0, Bitmap::new(1, 3, vec![true, false, true]).unwrap());
        masks.insert(2, Bitmap::new(1, 3, vec![false, true, false]).unwrap());
        let v = VideoTracks { frames: 3, height: 1, width: 3, tracks: vec![VideoTrack { id: 4, class_id: 1, masks }] };
        let s = track_dump_to_string(&v);
        assert!(s.starts_with(r#"{"frames":3,"canvas":[1,3],"tracks":[{"id":4,"class_id":1,"masks":[{"frame":0,"rle":{"size":[1,3],"counts":[0,1,1,1]}}"#));
        assert_eq!(track_dump_from_str(&s).unwrap(), v);
    }
}
