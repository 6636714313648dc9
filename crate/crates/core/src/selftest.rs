//! Oracle and invariant suites behind the `selftest` command.
//!
//! Every suite is deterministic: inputs come from fixed [`CounterRng`] seeds.

use std::time::{Duration, Instant};

use crate::hungarian::{assignment_score, hungarian_max};
use crate::io::{clip_record_to_string, metrics_csv, render_frame, track_dump_to_string, MetricsRow};
use crate::losses::{
    bce_inter_loss, bce_loss, dice_inter_loss, dice_loss, finite_diff_gradient, focal_loss, giou_loss,
    init_reid_loss, relative_error, smooth_l1_loss, LossResult,
};
use crate::mask::{mask_iou, rle_decode, rle_encode, BBox, Bitmap, MaskVolume};
use crate::oracles::{best_assignment_total, block_argmax, pixel_count_iou};
use crate::query::{associate_frames, class_agnostic_response, grid_select, ChannelMap, GridSpec};
use crate::rng::CounterRng;
use crate::synthetic::{
    build_scenario, crossing_scenario, disappear_scenario, ground_truth, render_scenario, track_clips, track_scenario,
    ClipLayout, ScenarioKind,
};
use crate::tracker::{run_near_online, AssociationParams, TrackerConfig, VideoTracks};

/// Gradient checks pass below this relative error.
pub const GRAD_TOLERANCE: f64 = 1e-5;
/// GIoU has more cancellation in its gradient and gets a looser bound.
pub const GIOU_GRAD_TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Random points per loss in the gradient suite.
pub const GRAD_POINTS: usize = 20;
/// Seeds of the crossing benchmark.
pub const CROSSING_SEEDS: u64 = 100;
/// Minimum number of crossing seeds the combined tracker must keep clean.
pub const CROSSING_REQUIRED: usize = 95;

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type SuiteFn = fn() -> Result<String, String>;

pub const SUITES: [(usize, &str, SuiteFn); 10] = [
    (1, "gradients", suite_gradients),
    (2, "loss reductions", suite_reductions),
    (3, "perfect predictions", suite_perfect),
    (4, "hungarian oracle", suite_hungarian),
    (5, "mask and rle oracle", suite_masks),
    (6, "peak selection oracle", suite_peaks),
    (7, "frame association", suite_association),
    (8, "crossing tracking", suite_crossing),
    (9, "memory eviction", suite_eviction),
    (10, "determinism", suite_determinism),
];

pub fn run_suite(id: usize) -> Option<SuiteReport> {
    let &(id, name, f) = SUITES.iter().find(|s| s.0 == id)?;
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Some(SuiteReport { id, name, passed, detail, elapsed: start.elapsed() })
}

pub fn run_all() -> Vec<SuiteReport> {
    SUITES.iter().filter_map(|s| run_suite(s.0)).collect()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- 1: gradients -------------------------------------------------------

/// Largest relative error of one loss over the random points.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub loss: &'static str,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

const MASK_SHAPE: (usize, usize, usize) = (2, 3, 4);

fn random_probs(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(0.05, 0.95)).collect()
}

fn random_bits(rng: &mut CounterRng, n: usize, p: f64) -> Vec<f64> {
    (0..n).map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect()
}

fn volume(data: &[f64]) -> MaskVolume {
    let (t, h, w) = MASK_SHAPE;
    MaskVolume::new(t, h, w, data.to_vec()).expect("interior probabilities")
}

/// Ground truth and a disjoint inter-instance mask, both nonempty.
fn gt_and_inter(rng: &mut CounterRng, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let gt = random_bits(rng, n, 0.4);
        let inter: Vec<f64> = gt.iter().map(|&g| if g == 0.0 && rng.bernoulli(0.4) { 1.0 } else { 0.0 }).collect();
        if gt.contains(&1.0) && inter.contains(&1.0) {
            return (gt, inter);
        }
    }
}

fn mask_check(loss: &'static str, seed: u64, f: impl Fn(&MaskVolume, &MaskVolume, &MaskVolume) -> LossResult) -> GradCheck {
    let mut rng = CounterRng::new(seed, 1);
    let n = MASK_SHAPE.0 * MASK_SHAPE.1 * MASK_SHAPE.2;
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_POINTS {
        let x = random_probs(&mut rng, n);
        let (gt, inter) = gt_and_inter(&mut rng, n);
        let (gt, inter) = (volume(&gt), volume(&inter));
        let analytic = f(&volume(&x), &gt, &inter).pred_grad().to_vec();
        let numeric = finite_diff_gradient(|p| f(&volume(p), &gt, &inter).value, &x, FD_STEP);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradCheck { loss, max_rel_error: worst, tolerance: GRAD_TOLERANCE }
}

fn vector_check(loss: &'static str, tolerance: f64, mut point: impl FnMut() -> Vec<f64>, f: impl Fn(&[f64]) -> (f64, Vec<f64>)) -> GradCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_POINTS {
        let x = point();
        let analytic = f(&x).1;
        let numeric = finite_diff_gradient(|p| f(p).0, &x, FD_STEP);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradCheck { loss, max_rel_error: worst, tolerance }
}

fn bbox(v: &[f64]) -> BBox {
    BBox::new(v[0], v[1], v[2], v[3]).expect("ordered box")
}

fn random_box(rng: &mut CounterRng) -> Vec<f64> {
    let (x, y) = (rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0));
    vec![x, y, x + rng.uniform(1.0, 6.0), y + rng.uniform(1.0, 6.0)]
}

/// Analytic against central-difference gradients for every loss.
pub fn gradient_checks(seed: u64) -> Vec<GradCheck> {
    let mut out = vec![
        mask_check("bce", seed, |p, g, _| bce_loss(p, g).unwrap()),
        mask_check("dice", seed, |p, g, _| dice_loss(p, g).unwrap()),
        mask_check("bce_inter", seed, |p, g, o| bce_inter_loss(p, g, o, 2.0).unwrap()),
        mask_check("dice_inter", seed, |p, g, o| dice_inter_loss(p, g, o).unwrap()),
    ];

    let (dim, negs) = (5, 3);
    let mut rng = CounterRng::new(seed, 2);
    out.push(vector_check(
        "init_reid",
        GRAD_TOLERANCE,
        || (0..dim * (2 + negs)).map(|_| 0.5 * rng.normal()).collect(),
        |x| {
            let negatives: Vec<Vec<f64>> = x[2 * dim..].chunks(dim).map(<[f64]>::to_vec).collect();
            let r = init_reid_loss(&x[..dim], &x[dim..2 * dim], &negatives).unwrap();
            let grad = [r.grad("anchor").unwrap(), r.grad("positive").unwrap(), r.grad("negatives").unwrap()].concat();
            (r.value, grad)
        },
    ));

    let mut rng = CounterRng::new(seed, 3);
    let labels = random_bits(&mut CounterRng::new(seed, 4), 16, 0.3);
    out.push(vector_check(
        "focal",
        GRAD_TOLERANCE,
        || random_probs(&mut rng, 16),
        |x| {
            let r = focal_loss(x, &labels, 2.0, 0.25).unwrap();
            (r.value, r.pred_grad().to_vec())
        },
    ));

    out.push(smooth_l1_check(seed));

    let mut rng = CounterRng::new(seed, 6);
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_POINTS {
        let (p, g) = (random_box(&mut rng), bbox(&random_box(&mut rng)));
        let analytic = giou_loss(&bbox(&p), &g).pred_grad().to_vec();
        let numeric = finite_diff_gradient(|x| giou_loss(&bbox(x), &g).value, &p, FD_STEP);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    out.push(GradCheck { loss: "giou", max_rel_error: worst, tolerance: GIOU_GRAD_TOLERANCE });
    out
}

fn smooth_l1_check(seed: u64) -> GradCheck {
    let mut rng = CounterRng::new(seed, 5);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < GRAD_POINTS {
        let (p, g) = (random_box(&mut rng), random_box(&mut rng));
        if p.iter().zip(&g).any(|(a, b)| ((a - b).abs() - 1.0).abs() <= 1e-3) {
            continue;
        }
        let g = bbox(&g);
        let analytic = smooth_l1_loss(&bbox(&p), &g, 1.0).unwrap().pred_grad().to_vec();
        let numeric = finite_diff_gradient(|x| smooth_l1_loss(&bbox(x), &g, 1.0).unwrap().value, &p, FD_STEP);
        worst = worst.max(relative_error(&analytic, &numeric));
        done += 1;
    }
    GradCheck { loss: "smooth_l1", max_rel_error: worst, tolerance: GRAD_TOLERANCE }
}

fn suite_gradients() -> Result<String, String> {
    let checks = gradient_checks(11);
    let detail = checks
        .iter()
        .map(|c| format!("{} {:.2e}", c.loss, c.max_rel_error))
        .collect::<Vec<_>>()
        .join(", ");
    check(checks.iter().all(GradCheck::passed), || format!("tolerance exceeded: {detail}"))?;
    Ok(detail)
}

// ---- 2, 3: loss identities ---------------------------------------------

fn same_bits(a: &LossResult, b: &LossResult) -> bool {
    a.value.to_bits() == b.value.to_bits()
        && a.pred_grad().len() == b.pred_grad().len()
        && a.pred_grad().iter().zip(b.pred_grad()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn suite_reductions() -> Result<String, String> {
    let mut rng = CounterRng::new(21, 0);
    let n = MASK_SHAPE.0 * MASK_SHAPE.1 * MASK_SHAPE.2;
    let empty = volume(&vec![0.0; n]);
    for case in 0..10 {
        let pred = volume(&random_probs(&mut rng, n));
        let (gt, inter) = gt_and_inter(&mut rng, n);
        let (gt, inter) = (volume(&gt), volume(&inter));

        let dice = dice_loss(&pred, &gt).map_err(|e| e.to_string())?;
        let dice_inter = dice_inter_loss(&pred, &gt, &empty).map_err(|e| e.to_string())?;
        check(same_bits(&dice, &dice_inter), || format!("case {case}: dice_inter with empty neighbors differs from dice"))?;

        let bce = bce_loss(&pred, &gt).map_err(|e| e.to_string())?;
        let bce_inter = bce_inter_loss(&pred, &gt, &inter, 1.0).map_err(|e| e.to_string())?;
        check(same_bits(&bce, &bce_inter), || format!("case {case}: bce_inter at alpha 1 differs from bce"))?;

        let focal = focal_loss(pred.data(), gt.data(), 0.0, 0.5).map_err(|e| e.to_string())?;
        let half = LossResult::single(0.5 * bce.value, "pred", bce.pred_grad().iter().map(|g| 0.5 * g).collect());
        check(same_bits(&focal, &half), || format!("case {case}: focal(0, 0.5) differs from bce / 2"))?;
    }
    Ok("30 cases bitwise equal".into())
}

fn suite_perfect() -> Result<String, String> {
    let mut rng = CounterRng::new(31, 0);
    let n = MASK_SHAPE.0 * MASK_SHAPE.1 * MASK_SHAPE.2;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (gt, inter) = gt_and_inter(&mut rng, n);
        let (gt, inter) = (volume(&gt), volume(&inter));
        let di = dice_inter_loss(&gt, &gt, &inter).map_err(|e| e.to_string())?.value;
        let d = dice_loss(&gt, &gt).map_err(|e| e.to_string())?.value;
        worst = worst.max(di.abs()).max(d.abs());
    }
    check(worst < 1e-5, || format!("perfect-prediction Dice loss {worst:e}"))?;
    for d in [1, 4, 16] {
        let a: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let r = init_reid_loss(&a, &p, &[]).map_err(|e| e.to_string())?;
        check(r.value == 0.0, || format!("init_reid without negatives is {:e}", r.value))?;
    }
    Ok(format!("max dice loss {worst:.1e}, reid without negatives 0"))
}

// ---- 4, 5, 6: oracles ----------------------------------------------------

fn suite_hungarian() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = CounterRng::new(41, 0);
    for trial in 0..100 {
        let (n, m) = (1 + rng.below(6), 1 + rng.below(6));
        let s: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| if trial % 2 == 0 { rng.below(5) as f64 } else { rng.uniform(-1.0, 1.0) }).collect())
            .collect();
        let got = assignment_score(&s, &hungarian_max(&s));
        let best = best_assignment_total(&s);
        check(got == best, || format!("trial {trial} ({n}x{m}): {got} vs optimum {best}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 matrices optimal in {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn random_bitmap(rng: &mut CounterRng, h: usize, w: usize) -> Bitmap {
    let p = rng.next_f64();
    Bitmap::new(h, w, (0..h * w).map(|_| rng.bernoulli(p)).collect()).expect("sized")
}

fn suite_masks() -> Result<String, String> {
    let mut rng = CounterRng::new(51, 0);
    for i in 0..1000 {
        let (h, w) = (1 + rng.below(16), 1 + rng.below(16));
        let m = random_bitmap(&mut rng, h, w);
        let back = rle_decode(&rle_encode(&m)).map_err(|e| e.to_string())?;
        check(back == m, || format!("mask {i} ({h}x{w}) changed in the RLE round trip"))?;
    }
    for i in 0..100 {
        let (t, h, w) = (1 + rng.below(3), 1 + rng.below(10), 1 + rng.below(10));
        let a = MaskVolume::from_fn(t, h, w, |_, _, _| rng.next_f64()).map_err(|e| e.to_string())?;
        let b = MaskVolume::from_fn(t, h, w, |_, _, _| rng.next_f64()).map_err(|e| e.to_string())?;
        let got = mask_iou(&a, &b).map_err(|e| e.to_string())?;
        let want = pixel_count_iou(&a, &b);
        check(got == want, || format!("pair {i}: mask_iou {got} vs pixel count {want}"))?;
    }
    Ok("1000 round trips, 100 IoU pairs exact".into())
}

fn suite_peaks() -> Result<String, String> {
    let mut rng = CounterRng::new(61, 0);
    for trial in 0..100 {
        let (c, t, h, w) = (1 + rng.below(3), 1 + rng.below(3), 4 + rng.below(9), 4 + rng.below(9));
        let grid = GridSpec::new(1 + rng.below(4), 1 + rng.below(4));
        // Every other map is quantized to four levels so ties are common.
        let coarse = trial % 2 == 0;
        let act = ChannelMap::from_fn([c, t, h, w], |_, _, _, _| {
            if coarse {
                rng.below(4) as f64 / 4.0
            } else {
                rng.next_f64()
            }
        })
        .map_err(|e| e.to_string())?;
        let feats = ChannelMap::from_fn([2, t, h, w], |k, _, y, x| (k * 1000 + y * w + x) as f64).map_err(|e| e.to_string())?;
        let embs = ChannelMap::from_fn([1, t, h, w], |_, ti, y, x| (ti * h * w + y * w + x) as f64).map_err(|e| e.to_string())?;
        let response = class_agnostic_response(&act);
        let queries = grid_select(&response, grid, &feats, &embs).map_err(|e| e.to_string())?;
        for (ti, frame) in queries.iter().enumerate() {
            check(frame.len() == grid.cells(), || format!("trial {trial}: {} queries", frame.len()))?;
            for q in frame {
                let (gy, gx) = q.grid_cell;
                let (y0, y1) = grid.row_span(gy, h);
                let (x0, x1) = grid.col_span(gx, w);
                let want = block_argmax(&response, ti, y0, y1, x0, x1);
                check(q.position == want, || format!("trial {trial} frame {ti} cell {:?}: {:?} vs {want:?}", q.grid_cell, q.position))?;
                check(q.embedding == embs.column(ti, want.0, want.1), || format!("trial {trial}: embedding not read at the peak"))?;
            }
        }
    }
    Ok("100 maps, every query is its cell's first maximum".into())
}

// ---- 7: association --------------------------------------------------------

fn unit_vectors(rng: &mut CounterRng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Frames of a 4x4 grid of 2x2-pixel cells whose contents move `shift` cells
/// right per frame. Cells with nothing moved into them get fresh vectors.
fn shifted_queries(rng: &mut CounterRng, frames: usize, central: usize, shift: isize) -> Result<Vec<Vec<crate::query::FrameQuery>>, String> {
    let (rows, cols, cell, dim) = (4usize, 4usize, 2usize, 16usize);
    let objects = unit_vectors(rng, rows * cols, dim);
    let filler = unit_vectors(rng, frames * rows * cols, dim);
    let content = |t: usize, gy: usize, gx: usize| -> &[f64] {
        let src = gx as isize - shift * (t as isize - central as isize);
        if (0..cols as isize).contains(&src) {
            &objects[gy * cols + src as usize]
        } else {
            &filler[(t * rows + gy) * cols + gx]
        }
    };
    let (h, w) = (rows * cell, cols * cell);
    let response = ChannelMap::from_fn([1, frames, h, w], |_, _, y, x| if y % cell == 1 && x % cell == 0 { 1.0 } else { 0.0 })
        .map_err(|e| e.to_string())?;
    let embs = ChannelMap::from_fn([dim, frames, h, w], |k, t, y, x| content(t, y / cell, x / cell)[k]).map_err(|e| e.to_string())?;
    grid_select(&class_agnostic_response(&response), GridSpec::new(rows, cols), &embs, &embs).map_err(|e| e.to_string())
}

fn suite_association() -> Result<String, String> {
    let mut rng = CounterRng::new(71, 0);
    let (frames, central) = (5, 2);
    let still = shifted_queries(&mut rng, frames, central, 0)?;
    for w in [0, 1, 5] {
        let aligned = associate_frames(&still, central, w).map_err(|e| e.to_string())?;
        for t in 0..frames {
            for (n, q) in aligned.queries[t].iter().enumerate() {
                check(q.grid_cell == still[central][n].grid_cell, || format!("w={w}: frame {t} query {n} moved to {:?}", q.grid_cell))?;
            }
        }
    }
    let moving = shifted_queries(&mut rng, frames, central, 1)?;
    for w in [1, 2, 5] {
        let aligned = associate_frames(&moving, central, w).map_err(|e| e.to_string())?;
        let mut checked = 0;
        for t in 0..frames {
            let s = t as isize - central as isize;
            for (n, anchor) in moving[central].iter().enumerate() {
                let (gy, gx) = anchor.grid_cell;
                let target = gx as isize + s;
                if !(0..4).contains(&target) {
                    continue;
                }
                let got = aligned.queries[t][n].grid_cell;
                check(got == (gy, target as usize), || format!("w={w}: frame {t} query {n} matched {got:?}, expected ({gy}, {target})"))?;
                checked += 1;
            }
        }
        check(checked > 0, || "no shifted pairs were checked".into())?;
    }
    Ok("identity alignment for w in {0,1,5}; one-cell shift recovered for w in {1,2,5}".into())
}

// ---- 8, 9: tracking --------------------------------------------------------

fn tracker(beta1: f64, beta2: f64, t_mem: usize) -> TrackerConfig {
    TrackerConfig {
        t_mem,
        association: AssociationParams { beta1, beta2, ..AssociationParams::default() },
        ..TrackerConfig::default()
    }
}

/// Id switches of the combined and the mask-overlap-only tracker on one
/// crossing seed.
pub fn crossing_switches(seed: u64) -> Result<(usize, usize), String> {
    let s = crossing_scenario(seed);
    let clips = render_scenario(&s, ClipLayout::default()).map_err(|e| e.to_string())?;
    let gt = ground_truth(&s).map_err(|e| e.to_string())?;
    let combined = track_clips(&clips, &gt, &tracker(1.0, 1.0, 10)).map_err(|e| e.to_string())?.1;
    let overlap_only = track_clips(&clips, &gt, &tracker(1.0, 0.0, 10)).map_err(|e| e.to_string())?.1;
    Ok((combined.id_switches, overlap_only.id_switches))
}

fn suite_crossing() -> Result<String, String> {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..CROSSING_SEEDS).collect();
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| crossing_switches(s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = seeds.iter().map(|&s| crossing_switches(s)).collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let clean = results.iter().filter(|r| r.0 == 0).count();
    let forced = results.iter().filter(|r| r.1 >= 1).count();
    let elapsed = start.elapsed();
    let detail = format!(
        "combined clean on {clean}/{CROSSING_SEEDS} seeds, overlap-only switched on {forced}/{CROSSING_SEEDS}, {:.1} s",
        elapsed.as_secs_f64()
    );
    check(clean >= CROSSING_REQUIRED && forced == CROSSING_SEEDS as usize && elapsed < Duration::from_secs(60), || detail.clone())?;
    Ok(detail)
}

/// Ids matched to the returning object just before it leaves and just after
/// it comes back.
pub fn disappearance_ids(seed: u64, gap_clips: usize, t_mem: usize) -> Result<(u64, u64), String> {
    let s = disappear_scenario(seed, gap_clips, ClipLayout::default()).map_err(|e| e.to_string())?;
    let (tracks, _) = track_scenario(&s, &tracker(1.0, 1.0, t_mem)).map_err(|e| e.to_string())?;
    let gt = ground_truth(&s).map_err(|e| e.to_string())?;
    let (leave, back) = s.objects[1].absent.expect("returning object");
    let id_at = |f: usize| -> Result<u64, String> {
        tracks
            .frame(f)
            .into_iter()
            .max_by(|a, b| overlap(&gt[1].masks[f], a.1).cmp(&overlap(&gt[1].masks[f], b.1)).then(b.0.cmp(&a.0)))
            .map(|(id, _)| id)
            .ok_or_else(|| format!("no track in frame {f}"))
    };
    Ok((id_at(leave - 1)?, id_at(back)?))
}

fn overlap(a: &Bitmap, b: &Bitmap) -> usize {
    a.bits.iter().zip(&b.bits).filter(|(x, y)| **x && **y).count()
}

fn suite_eviction() -> Result<String, String> {
    let t_mem = 10;
    for seed in 0..5 {
        for gap in [3, t_mem] {
            let (before, after) = disappearance_ids(seed, gap, t_mem)?;
            check(before == after, || format!("seed {seed}: gap {gap} <= {t_mem} changed id {before} -> {after}"))?;
        }
        for gap in [t_mem + 1, t_mem + 4] {
            let (before, after) = disappearance_ids(seed, gap, t_mem)?;
            check(before != after, || format!("seed {seed}: gap {gap} > {t_mem} kept id {before}"))?;
        }
        check(disappearance_ids(seed, t_mem + 1, t_mem)? == disappearance_ids(seed, t_mem + 1, t_mem)?, || {
            format!("seed {seed}: reruns differ")
        })?;
    }
    Ok(format!("gaps <= {t_mem} keep the id, longer gaps get a new one (5 seeds)"))
}

// ---- 10: determinism ---------------------------------------------------

/// Every byte a generate, track and render pass would write, concatenated.
pub fn pipeline_bytes(kind: ScenarioKind, seed: u64) -> Result<Vec<u8>, String> {
    let s = build_scenario(kind, seed);
    let config = TrackerConfig::default();
    let clips = render_scenario(&s, ClipLayout::default()).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for c in &clips {
        out.extend(clip_record_to_string(c).into_bytes());
    }
    let dets: Vec<_> = clips.iter().map(|c| c.clip_detections()).collect();
    let mut tracks: VideoTracks = run_near_online(&dets, &config).map_err(|e| e.to_string())?;
    tracks.height = s.height;
    tracks.width = s.width;
    out.extend(track_dump_to_string(&tracks).into_bytes());
    let metrics = crate::synthetic::scenario_metrics(&ground_truth(&s).map_err(|e| e.to_string())?, &tracks);
    out.extend(metrics_csv(&[MetricsRow { scenario: kind.name().into(), seed, metrics }]).into_bytes());
    for f in 0..tracks.frames {
        out.extend(render_frame(s.height, s.width, &tracks.frame(f)));
    }
    Ok(out)
}

fn suite_determinism() -> Result<String, String> {
    let mut total = 0;
    for kind in ScenarioKind::ALL {
        let a = pipeline_bytes(kind, 7)?;
        let b = pipeline_bytes(kind, 7)?;
        check(a == b, || format!("{kind}: outputs differ between runs"))?;
        total += a.len();
    }
    Ok(format!("{total} bytes identical across two runs"))
}
