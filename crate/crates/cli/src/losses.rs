//! `ovc losses`: training losses of stored detections against ground truth.
//!
//! Binary detection masks are softened to probabilities `0.05 / 0.95` so the
//! cross-entropy terms stay finite. Detections are paired with ground-truth
//! objects by maximum mask IoU; a ground-truth object without a detection is
//! scored against an all-background prediction.

use std::path::Path;

use ovc_core::hungarian::hungarian_max;
use ovc_core::io::{read_clip_dir, ClipRecord, RunConfig};
use ovc_core::losses::{
    focal_loss, giou_loss, init_reid_loss, inter_mask_loss, smooth_l1_loss, total_loss, typical_mask_loss, LossTerms,
};
use ovc_core::mask::{mask_iou, BBox, MaskVolume};
use ovc_core::selftest::gradient_checks;

use crate::{CliError, CliResult};

const SOFT_LOW: f64 = 0.05;
const SOFT_HIGH: f64 = 0.95;
/// Transition point of the smooth-L1 box loss, on canvas-normalized boxes.
const BOX_BETA: f64 = 0.1;

fn soften(m: &MaskVolume) -> MaskVolume {
    let data = m.data().iter().map(|&v| if v > 0.5 { SOFT_HIGH } else { SOFT_LOW }).collect();
    MaskVolume::new(m.frames(), m.height(), m.width(), data).expect("soft mask in range")
}

/// Ground-truth index to detection index.
fn pair_detections(clip: &ClipRecord) -> ovc_core::Result<Vec<Option<usize>>> {
    let gt = clip.ground_truth.as_ref().expect("checked by caller");
    let mut scores = Vec::with_capacity(gt.masks.len());
    for g in &gt.masks {
        scores.push(clip.detections.iter().map(|d| mask_iou(g, &d.mask)).collect::<ovc_core::Result<Vec<_>>>()?);
    }
    let mut pairs = vec![None; gt.masks.len()];
    if !clip.detections.is_empty() {
        for (g, d) in hungarian_max(&scores) {
            if scores[g][d] > 0.0 {
                pairs[g] = Some(d);
            }
        }
    }
    Ok(pairs)
}

fn normalized(b: &BBox, h: usize, w: usize) -> BBox {
    let (h, w) = (h as f64, w as f64);
    BBox { x1: b.x1 / w, y1: b.y1 / h, x2: b.x2 / w, y2: b.y2 / h }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

fn evaluate(cfg: &RunConfig, clips: &[ClipRecord]) -> CliResult<Vec<(&'static str, f64)>> {
    let (mut typical, mut inter, mut cls, mut sem) = (Mean::default(), Mean::default(), Mean::default(), Mean::default());
    let (mut l1, mut giou, mut reid) = (Mean::default(), Mean::default(), Mean::default());
    let mut previous: Option<Vec<(u64, Vec<f64>)>> = None;

    for clip in clips {
        let gt = clip
            .ground_truth
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("clip {} has no ground truth", clip.clip_index)))?;
        let (h, w) = clip.canvas;
        let pairs = pair_detections(clip)?;

        if !gt.masks.is_empty() {
            let preds: Vec<MaskVolume> = pairs
                .iter()
                .zip(&gt.masks)
                .map(|(p, g)| match p {
                    Some(d) => soften(&clip.detections[*d].mask),
                    None => soften(&MaskVolume::zeros(g.frames(), h, w)),
                })
                .collect();
            typical.add(typical_mask_loss(&preds, &gt.masks)?.value);
            inter.add(inter_mask_loss(&preds, &gt.masks, &gt.boxes, cfg.epsilon, cfg.alpha)?.value);
        }

        if !clip.detections.is_empty() {
            let conf: Vec<f64> = clip.detections.iter().map(|d| d.confidence).collect();
            let labels: Vec<f64> =
                (0..conf.len()).map(|d| if pairs.contains(&Some(d)) { 1.0 } else { 0.0 }).collect();
            cls.add(focal_loss(&conf, &labels, cfg.focal_gamma, cfg.focal_alpha)?.value);
        }

        if let Some(act) = &clip.activation {
            // Cell target: the class of the object visible at the cell center.
            let [c, t, h0, w0] = act.shape();
            let stride = h / h0;
            let mut target = vec![0.0; c * t * h0 * w0];
            for (class, m) in gt.class_ids.iter().zip(&gt.masks) {
                for ti in 0..t {
                    for y in 0..h0 {
                        for x in 0..w0 {
                            if (*class as usize) < c && m.get(ti, y * stride + stride / 2, x * stride + stride / 2) > 0.5 {
                                target[((*class as usize * t + ti) * h0 + y) * w0 + x] = 1.0;
                            }
                        }
                    }
                }
            }
            let probs: Vec<f64> = act.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
            sem.add(focal_loss(&probs, &target, cfg.focal_gamma, cfg.focal_alpha)?.value);
        }

        for (g, p) in pairs.iter().enumerate() {
            let Some(d) = p else { continue };
            let det_boxes = ovc_core::mask::mask_to_boxes(&clip.detections[*d].mask);
            for (gb, db) in gt.boxes[g].iter().zip(&det_boxes) {
                if let (Some(gb), Some(db)) = (gb, db) {
                    let (gb, db) = (normalized(gb, h, w), normalized(db, h, w));
                    l1.add(smooth_l1_loss(&db, &gb, BOX_BETA)?.value);
                    giou.add(giou_loss(&db, &gb).value);
                }
            }
        }

        let current: Vec<(u64, Vec<f64>)> = pairs
            .iter()
            .enumerate()
            .filter_map(|(g, p)| p.map(|d| (gt.identities[g], clip.detections[d].embedding.clone())))
            .collect();
        if let Some(prev) = &previous {
            for (id, anchor) in prev {
                let Some((_, positive)) = current.iter().find(|(i, _)| i == id) else { continue };
                let negatives: Vec<Vec<f64>> =
                    current.iter().filter(|(i, _)| i != id).map(|(_, e)| e.clone()).collect();
                reid.add(init_reid_loss(anchor, positive, &negatives)?.value);
            }
        }
        previous = Some(current);
    }

    let terms = LossTerms {
        cls: cls.get(),
        box_l1: l1.get(),
        box_giou: giou.get(),
        inter_mask: inter.get(),
        init_sem: sem.get(),
        init_reid: reid.get(),
    };
    Ok(vec![
        ("typical_mask", typical.get()),
        ("inter_mask", terms.inter_mask),
        ("cls_focal", terms.cls),
        ("box_smooth_l1", terms.box_l1),
        ("box_giou", terms.box_giou),
        ("init_sem", terms.init_sem),
        ("init_reid", terms.init_reid),
        ("total", total_loss(&terms, &cfg.loss_weights)),
    ])
}

pub fn run(cfg: &RunConfig, input: &Path, check_grads: bool) -> CliResult<()> {
    let clips = read_clip_dir(input)?;
    if clips.is_empty() {
        return Err(CliError::Usage(format!("no clip records in {}", input.display())));
    }
    for (name, value) in evaluate(cfg, &clips)? {
        println!("{name:<14} {value:.6}");
    }
    if check_grads {
        let checks = gradient_checks(cfg.seed);
        for c in &checks {
            println!(
                "grad {:<10} max_rel_err {:.3e}  tol {:.0e}  {}",
                c.loss,
                c.max_rel_error,
                c.tolerance,
                if c.passed() { "ok" } else { "FAIL" }
            );
        }
        if let Some(bad) = checks.iter().find(|c| !c.passed()) {
            return Err(CliError::Invariant(format!("{} gradient error {:.3e}", bad.loss, bad.max_rel_error)));
        }
    }
    Ok(())
}
