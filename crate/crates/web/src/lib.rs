//! Browser bindings for the demo page in `www/`.
//!
//! Three views: tracking a synthetic scenario, the repulsion loss on a pair of
//! overlapping objects, and grid query selection with frame association.
//! Each is a plain Rust function wrapped by a thin `#[wasm_bindgen]` export.

use wasm_bindgen::prelude::*;

use ovc_core::io::{palette_color, render_rgb};
use ovc_core::losses::{bce_inter_loss, bce_loss, dice_inter_loss, dice_loss};
use ovc_core::mask::{inter_instance_mask, mask_to_boxes, neighbor_set, MaskVolume};
use ovc_core::query::{associate_frames, class_agnostic_response, grid_select, GridSpec};
use ovc_core::synthetic::{
    build_scenario, ground_truth, render_scenario, track_scenario, ClipLayout, GtTrack, ScenarioKind,
};
use ovc_core::tracker::{AssociationParams, TrackerConfig, VideoTracks};

fn js_err(e: ovc_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rgb_to_rgba(rgb: &[u8]) -> Vec<u8> {
    rgb.chunks(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

// ---- tracking ------------------------------------------------------------

#[wasm_bindgen]
pub struct TrackingView {
    tracks: VideoTracks,
    truth: Vec<GtTrack>,
    id_switches: usize,
    assoc_acc: f64,
    mean_iou: f64,
}

pub fn run_tracking(
    scenario: &str,
    seed: u64,
    beta1: f64,
    beta2: f64,
    t_mem: usize,
) -> ovc_core::Result<TrackingView> {
    let kind: ScenarioKind = scenario.parse()?;
    let s = build_scenario(kind, seed);
    let config = TrackerConfig {
        t_mem,
        association: AssociationParams { beta1, beta2, ..AssociationParams::default() },
        ..TrackerConfig::default()
    };
    let (tracks, metrics) = track_scenario(&s, &config)?;
    Ok(TrackingView {
        tracks,
        truth: ground_truth(&s)?,
        id_switches: metrics.id_switches,
        assoc_acc: metrics.assoc_acc,
        mean_iou: metrics.mean_iou,
    })
}

/// Tracks a synthetic scenario ("crossing", "parade", "static", "disappear").
#[wasm_bindgen]
pub fn track_demo(scenario: &str, seed: u64, beta1: f64, beta2: f64, t_mem: usize) -> Result<TrackingView, JsError> {
    run_tracking(scenario, seed, beta1, beta2, t_mem).map_err(js_err)
}

#[wasm_bindgen]
impl TrackingView {
    pub fn frames(&self) -> usize {
        self.tracks.frames
    }

    pub fn height(&self) -> usize {
        self.tracks.height
    }

    pub fn width(&self) -> usize {
        self.tracks.width
    }

    pub fn track_count(&self) -> usize {
        self.tracks.tracks.len()
    }

    pub fn id_switches(&self) -> usize {
        self.id_switches
    }

    pub fn assoc_acc(&self) -> f64 {
        self.assoc_acc
    }

    pub fn mean_iou(&self) -> f64 {
        self.mean_iou
    }

    /// RGBA pixels of frame `f`, colored by track id.
    pub fn frame_rgba(&self, f: usize) -> Vec<u8> {
        rgb_to_rgba(&render_rgb(self.tracks.height, self.tracks.width, &self.tracks.frame(f)))
    }

    /// RGBA pixels of the ground truth of frame `f`, colored by identity.
    pub fn truth_rgba(&self, f: usize) -> Vec<u8> {
        let masks: Vec<_> = self.truth.iter().map(|g| (g.identity, &g.masks[f])).collect();
        rgb_to_rgba(&render_rgb(self.tracks.height, self.tracks.width, &masks))
    }

    /// Track ids present in frame `f`, as `[id, r, g, b]` quadruples.
    pub fn frame_ids(&self, f: usize) -> Vec<u32> {
        self.tracks
            .frame(f)
            .iter()
            .flat_map(|(id, _)| {
                let [r, g, b] = palette_color(*id);
                [*id as u32, r as u32, g as u32, b as u32]
            })
            .collect()
    }
}

// ---- repulsion -----------------------------------------------------------

pub const REPULSION_SIZE: usize = 32;

/// Target box rows/cols and neighbor box rows/cols on the demo canvas.
const TARGET: ((usize, usize), (usize, usize)) = ((6, 22), (4, 18));
const NEIGHBOR: ((usize, usize), (usize, usize)) = ((10, 26), (14, 28));

fn rect(((y0, y1), (x0, x1)): ((usize, usize), (usize, usize))) -> MaskVolume {
    let n = REPULSION_SIZE;
    MaskVolume::from_fn(1, n, n, |_, y, x| ((y0..y1).contains(&y) && (x0..x1).contains(&x)) as u8 as f64)
        .expect("binary mask")
}

#[wasm_bindgen]
pub struct RepulsionView {
    box_iou: f64,
    neighbors: usize,
    bce: f64,
    dice: f64,
    bce_inter: f64,
    dice_inter: f64,
    gradient: Vec<f64>,
    inter: Vec<f64>,
}

/// Scores a prediction of the target object that leaks `leak` (0..1) of its
/// probability onto the neighboring object.
pub fn run_repulsion(epsilon: f64, alpha: f64, leak: f64) -> ovc_core::Result<RepulsionView> {
    let gts = [rect(TARGET), rect(NEIGHBOR)];
    let leak = leak.clamp(0.0, 0.95);
    let pred = MaskVolume::new(
        1,
        REPULSION_SIZE,
        REPULSION_SIZE,
        gts[0]
            .data()
            .iter()
            .zip(gts[1].data())
            .map(|(&g, &o)| if g > 0.5 { 0.9 } else if o > 0.5 { 0.02 + leak } else { 0.02 })
            .collect(),
    )?;
    let boxes: Vec<_> = gts.iter().map(mask_to_boxes).collect();
    let set = neighbor_set(&boxes, 0, epsilon)?;
    let inter = inter_instance_mask(&gts, &set)?;
    let bi = bce_inter_loss(&pred, &gts[0], &inter, alpha)?;
    let di = dice_inter_loss(&pred, &gts[0], &inter)?;
    let gradient = bi.pred_grad().iter().zip(di.pred_grad()).map(|(a, b)| a + b).collect();
    Ok(RepulsionView {
        box_iou: ovc_core::mask::box_iou(
            boxes[0][0].as_ref().expect("target box"),
            boxes[1][0].as_ref().expect("neighbor box"),
        ),
        neighbors: set.neighbors.len(),
        bce: bce_loss(&pred, &gts[0])?.value,
        dice: dice_loss(&pred, &gts[0])?.value,
        bce_inter: bi.value,
        dice_inter: di.value,
        gradient,
        inter: inter.data().to_vec(),
    })
}

#[wasm_bindgen]
pub fn repulsion_demo(epsilon: f64, alpha: f64, leak: f64) -> Result<RepulsionView, JsError> {
    run_repulsion(epsilon, alpha, leak).map_err(js_err)
}

#[wasm_bindgen]
impl RepulsionView {
    pub fn size(&self) -> usize {
        REPULSION_SIZE
    }

    pub fn box_iou(&self) -> f64 {
        self.box_iou
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn bce(&self) -> f64 {
        self.bce
    }

    pub fn dice(&self) -> f64 {
        self.dice
    }

    pub fn bce_inter(&self) -> f64 {
        self.bce_inter
    }

    pub fn dice_inter(&self) -> f64 {
        self.dice_inter
    }

    /// Gradient of the combined repulsion loss as RGBA: red pushes the
    /// prediction down, blue pushes it up. Pixels of the neighbor mask get a
    /// green tint.
    pub fn gradient_rgba(&self) -> Vec<u8> {
        let scale = self.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
        self.gradient
            .iter()
            .zip(&self.inter)
            .flat_map(|(g, o)| {
                let v = (g / scale).clamp(-1.0, 1.0);
                let r = if v > 0.0 { (v.sqrt() * 255.0) as u8 } else { 0 };
                let b = if v < 0.0 { ((-v).sqrt() * 255.0) as u8 } else { 0 };
                [r, if *o > 0.5 { 70 } else { 0 }, b, 255]
            })
            .collect()
    }
}

// ---- query selection -----------------------------------------------------

#[wasm_bindgen]
pub struct QueryView {
    frames: usize,
    height: usize,
    width: usize,
    central: usize,
    response: Vec<f64>,
    peaks: Vec<Vec<u32>>,
    aligned: Vec<Vec<u32>>,
}

/// Selects grid queries on the first clip of the parade scenario and aligns
/// every frame to the central one.
pub fn run_queries(seed: u64, rows: usize, cols: usize, window: usize) -> ovc_core::Result<QueryView> {
    let clips = render_scenario(&build_scenario(ScenarioKind::Parade, seed), ClipLayout::default())?;
    let clip = &clips[0];
    let missing = || ovc_core::Error::InvalidValue("clip has no maps".into());
    let response = class_agnostic_response(clip.activation.as_ref().ok_or_else(missing)?);
    let queries = grid_select(
        &response,
        GridSpec::new(rows, cols),
        clip.features.as_ref().ok_or_else(missing)?,
        clip.embeddings.as_ref().ok_or_else(missing)?,
    )?;
    let central = queries.len() / 2;
    let aligned = associate_frames(&queries, central, window)?;
    let flat = |qs: &[ovc_core::query::FrameQuery]| {
        qs.iter().flat_map(|q| [q.position.0 as u32, q.position.1 as u32]).collect::<Vec<u32>>()
    };
    Ok(QueryView {
        frames: response.frames,
        height: response.height,
        width: response.width,
        central,
        peaks: queries.iter().map(|f| flat(f)).collect(),
        aligned: aligned.queries.iter().map(|f| flat(f)).collect(),
        response: response.data,
    })
}

#[wasm_bindgen]
pub fn query_demo(seed: u64, rows: usize, cols: usize, window: usize) -> Result<QueryView, JsError> {
    run_queries(seed, rows, cols, window).map_err(js_err)
}

#[wasm_bindgen]
impl QueryView {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn central(&self) -> usize {
        self.central
    }

    /// Response of frame `t`, row-major.
    pub fn response(&self, t: usize) -> Vec<f64> {
        let plane = self.height * self.width;
        self.response[t * plane..(t + 1) * plane].to_vec()
    }

    /// Selected peaks of frame `t` as `[y, x, y, x, ...]`, one pair per cell.
    pub fn peaks(&self, t: usize) -> Vec<u32> {
        self.peaks[t].clone()
    }

    /// Query of frame `t` aligned to each central query, same layout.
    pub fn aligned(&self, t: usize) -> Vec<u32> {
        self.aligned[t].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracking_view_renders_frames() {
        let v = run_tracking("static", 3, 1.0, 1.0, 10).unwrap();
        assert_eq!(v.id_switches(), 0);
        assert_eq!(v.frame_rgba(0).len(), v.height() * v.width() * 4);
        assert_eq!(v.truth_rgba(0).len(), v.frame_rgba(0).len());
        assert_eq!(v.frame_ids(0).len(), 4 * v.track_count());
        assert!(run_tracking("nope", 0, 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn repulsion_follows_neighbor_set() {
        let near = run_repulsion(0.05, 2.0, 0.5).unwrap();
        assert_eq!(near.neighbors(), 1);
        assert!(near.box_iou() > 0.05);
        // Leaking onto the neighbor costs more under the repulsion loss.
        let clean = run_repulsion(0.05, 2.0, 0.0).unwrap();
        assert!(near.bce_inter() > clean.bce_inter());
        let far = run_repulsion(0.9, 2.0, 0.5).unwrap();
        assert_eq!(far.neighbors(), 0);
        assert_eq!(far.dice_inter(), far.dice());
        assert_eq!(near.gradient_rgba().len(), REPULSION_SIZE * REPULSION_SIZE * 4);
    }

    #[test]
    fn query_view_has_one_peak_per_cell() {
        let v = run_queries(1, 3, 4, 1).unwrap();
        for t in 0..v.frames() {
            assert_eq!(v.peaks(t).len(), 2 * 12);
            assert_eq!(v.aligned(t).len(), 2 * 12);
            assert_eq!(v.response(t).len(), v.height() * v.width());
        }
        assert_eq!(v.aligned(v.central()), v.peaks(v.central()));
        assert!(run_queries(1, 100, 1, 1).is_err());
    }
}
