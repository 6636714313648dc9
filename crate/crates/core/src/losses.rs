//! Training losses with closed-form gradients.
//!
//! Every loss returns a [`LossResult`] holding the scalar value and the
//! gradient with respect to each differentiable input, keyed by input name.
//! [`finite_diff_gradient`] is the central-difference oracle the gradients
//! are checked against.
//!
//! Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
//! logarithm; the clamp has zero derivative outside that range. Dice ratios
//! add [`DICE_SMOOTH`] to numerator and denominator so empty masks stay
//! finite.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mask::{inter_instance_mask, neighbor_set, BBox, MaskVolume, BINARIZE_THRESHOLD};

pub const PROB_CLAMP: f64 = 1e-7;
pub const DICE_SMOOTH: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grads: BTreeMap<String, Vec<f64>>,
}

    /// Result with a single named gradient.
impl LossResult {
    pub fn single(value: f64, name: &str, grad: Vec<f64>) -> Self {
        let mut grads = BTreeMap::new();
        grads.insert(name.to_string(), grad);
        Self { value, grads }
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.grads.get(name).map(Vec::as_slice)
    }

    /// Gradient with respect to the prediction (`"pred"`).
    pub fn pred_grad(&self) -> &[f64] {
        self.grad("pred").expect("loss has no `pred` gradient")
    }
}

/// Key of the gradient for instance `i` in multi-instance losses.
pub fn instance_key(i: usize) -> String {
    format!("pred[{i}]")
}

/// Weights of the five training-loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub cls: f64,
    pub boxes: f64,
    pub inter_mask: f64,
    pub init_sem: f64,
    pub init_reid: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { cls: 2.0, boxes: 2.0, inter_mask: 4.0, init_sem: 2.0, init_reid: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cls, self.boxes, self.inter_mask, self.init_sem, self.init_reid];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidValue(format!("loss weights must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }
}

/// Scalar loss terms combined by [`total_loss`]. The box loss is the plain
/// sum of its smooth-L1 and GIoU parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub cls: f64,
    pub box_l1: f64,
    pub box_giou: f64,
    pub inter_mask: f64,
    pub init_sem: f64,
    pub init_reid: f64,
}

pub fn total_loss(terms: &LossTerms, w: &LossWeights) -> f64 {
    w.cls * terms.cls
        + w.boxes * (terms.box_l1 + terms.box_giou)
        + w.inter_mask * terms.inter_mask
        + w.init_sem * terms.init_sem
        + w.init_reid * terms.init_reid
}

fn clamp_prob(p: f64) -> (f64, bool) {
    if p < PROB_CLAMP {
        (PROB_CLAMP, true)
    } else if p > 1.0 - PROB_CLAMP {
        (1.0 - PROB_CLAMP, true)
    } else {
        (p, false)
    }
}

fn is_fg(v: f64) -> bool {
    v > BINARIZE_THRESHOLD
}

/// `Σ w·BCE / Σ w`, shared by the plain and the inter-instance BCE so that
/// uniform weights reproduce the plain mean bit for bit.
fn weighted_bce(pred: &[f64], gt: &[f64], weight: impl Fn(usize) -> f64) -> (f64, Vec<f64>) {
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (k, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        let w = weight(k);
        let (p, clamped) = clamp_prob(p);
        let l = -(g * p.ln() + (1.0 - g) * (1.0 - p).ln());
        acc += w * l;
        wsum += w;
        grad.push(if clamped { 0.0 } else { w * (-g / p + (1.0 - g) / (1.0 - p)) });
    }
    for d in &mut grad {
        *d /= wsum;
    }
    (acc / wsum, grad)
}

/// Soft Dice with the optional repulsion term:
/// `1 - (2|P⊙G| + |(1-P)⊙O| + δ) / (|P| + |G| + |O| + δ)`.
fn dice_core(pred: &[f64], gt: &[f64], inter: &[f64]) -> (f64, Vec<f64>) {
    let (mut overlap, mut repel, mut sum_p, mut sum_g, mut sum_o) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&p, &g), &o) in pred.iter().zip(gt).zip(inter) {
        overlap += p * g;
        repel += (1.0 - p) * o;
        sum_p += p;
        sum_g += g;
        sum_o += o;
    }
    let num = 2.0 * overlap + repel + DICE_SMOOTH;
    let den = sum_p + sum_g + sum_o + DICE_SMOOTH;
    let grad = gt
        .iter()
        .zip(inter)
        .map(|(&g, &o)| -((2.0 * g - o) * den - num) / (den * den))
        .collect();
    (1.0 - num / den, grad)
}

/// Mean binary cross-entropy over all voxels.
pub fn bce_loss(pred: &MaskVolume, gt: &MaskVolume) -> Result<LossResult> {
    pred.check_same_shape(gt)?;
    let (value, grad) = weighted_bce(pred.data(), gt.data(), |_| 1.0);
    Ok(LossResult::single(value, "pred", grad))
}

/// Soft Dice loss of one instance.
pub fn dice_loss(pred: &MaskVolume, gt: &MaskVolume) -> Result<LossResult> {
    pred.check_same_shape(gt)?;
    let none = vec![0.0; pred.len()];
    let (value, grad) = dice_core(pred.data(), gt.data(), &none);
    Ok(LossResult::single(value, "pred", grad))
}

fn check_inter_inputs(pred: &MaskVolume, gt: &MaskVolume, inter: &MaskVolume) -> Result<()> {
    pred.check_same_shape(gt)?;
    pred.check_same_shape(inter)?;
    if !gt.is_binary() || !inter.is_binary() {
        return Err(Error::InvalidValue("ground-truth and inter-instance masks must be binary".into()));
    }
    Ok(())
}

/// BCE where voxels of the target or of its neighbors weigh `alpha` and all
/// others weigh 1, normalized by the total weight.
pub fn bce_inter_loss(pred: &MaskVolume, gt: &MaskVolume, inter: &MaskVolume, alpha: f64) -> Result<LossResult> {
    check_inter_inputs(pred, gt, inter)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidValue(format!("alpha must be positive, got {alpha}")));
    }
    let (g, o) = (gt.data(), inter.data());
    let (value, grad) =
        weighted_bce(pred.data(), g, |k| if is_fg(g[k]) || is_fg(o[k]) { alpha } else { 1.0 });
    Ok(LossResult::single(value, "pred", grad))
}

/// Dice loss that also rewards low predictions on the neighbors' pixels.
/// `gt` and `inter` must not share a pixel.
pub fn dice_inter_loss(pred: &MaskVolume, gt: &MaskVolume, inter: &MaskVolume) -> Result<LossResult> {
    check_inter_inputs(pred, gt, inter)?;
    if let Some(k) = gt.data().iter().zip(inter.data()).position(|(&g, &o)| g * o != 0.0) {
        return Err(Error::Contract(format!(
            "ground-truth and inter-instance masks overlap at voxel {k}"
        )));
    }
    let (value, grad) = dice_core(pred.data(), gt.data(), inter.data());
    Ok(LossResult::single(value, "pred", grad))
}

fn check_instances(preds: &[MaskVolume], gts: &[MaskVolume]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::InvalidValue("need at least one instance".into()));
    }
    if preds.len() != gts.len() {
        return Err(Error::dim(format!("{} predictions for {} ground truths", preds.len(), gts.len())));
    }
    Ok(())
}

/// Plain mask loss: per-instance BCE plus Dice, averaged over instances.
pub fn typical_mask_loss(preds: &[MaskVolume], gts: &[MaskVolume]) -> Result<LossResult> {
    check_instances(preds, gts)?;
    let k = preds.len() as f64;
    let mut value = 0.0;
    let mut grads = BTreeMap::new();
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        let b = bce_loss(p, g)?;
        let d = dice_loss(p, g)?;
        value += b.value + d.value;
        let grad = b.pred_grad().iter().zip(d.pred_grad()).map(|(x, y)| (x + y) / k).collect();
        grads.insert(instance_key(i), grad);
    }
    Ok(LossResult { value: value / k, grads })
}

/// Inter-instance repulsion loss over all `K` instances. Neighbors come from
/// box overlap above `epsilon` in any frame; `boxes[i][t]` is instance `i`'s
/// box in frame `t`.
pub fn inter_mask_loss(
    preds: &[MaskVolume],
    gts: &[MaskVolume],
    boxes: &[Vec<Option<BBox>>],
    epsilon: f64,
    alpha: f64,
) -> Result<LossResult> {
    check_instances(preds, gts)?;
    if boxes.len() != gts.len() {
        return Err(Error::dim(format!("{} box tracks for {} instances", boxes.len(), gts.len())));
    }
    let k = preds.len() as f64;
    let mut value = 0.0;
    let mut grads = BTreeMap::new();
    for (i, pred) in preds.iter().enumerate() {
        let set = neighbor_set(boxes, i, epsilon)?;
        let inter = inter_instance_mask(gts, &set)?;
        let b = bce_inter_loss(pred, &gts[i], &inter, alpha)?;
        let d = dice_inter_loss(pred, &gts[i], &inter)?;
        value += b.value + d.value;
        let grad = b.pred_grad().iter().zip(d.pred_grad()).map(|(x, y)| (x + y) / k).collect();
        grads.insert(instance_key(i), grad);
    }
    Ok(LossResult { value: value / k, grads })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Contrastive re-identification loss with one positive and any number of
/// negatives: `-log(exp(a·p) / (exp(a·p) + Σ exp(a·n)))`.
///
/// Gradients are keyed `"anchor"`, `"positive"` and `"negatives"` (the
/// latter flattened row by row).
pub fn init_reid_loss(anchor: &[f64], positive: &[f64], negatives: &[Vec<f64>]) -> Result<LossResult> {
    let d = anchor.len();
    if positive.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(Error::dim(format!("embedding dimensions differ from anchor dimension {d}")));
    }
    let pos_logit = dot(anchor, positive);
    let logits: Vec<f64> = negatives.iter().map(|n| dot(anchor, n)).collect();
    let max = logits.iter().copied().fold(pos_logit, f64::max);
    let pos_exp = (pos_logit - max).exp();
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let denom = pos_exp + exps.iter().sum::<f64>();
    // (max - pos) >= 0 and ln(denom) >= 0, so the value never dips below 0.
    let value = (max - pos_logit) + denom.ln();

    let pos_coef = pos_exp / denom - 1.0;
    let neg_coef: Vec<f64> = exps.iter().map(|e| e / denom).collect();

    let mut g_anchor: Vec<f64> = positive.iter().map(|p| pos_coef * p).collect();
    for (n, c) in negatives.iter().zip(&neg_coef) {
        for (ga, v) in g_anchor.iter_mut().zip(n) {
            *ga += c * v;
        }
    }
    let g_pos = anchor.iter().map(|a| pos_coef * a).collect();
    let g_neg = neg_coef.iter().flat_map(|c| anchor.iter().map(move |a| c * a)).collect();

    let mut grads = BTreeMap::new();
    grads.insert("anchor".to_string(), g_anchor);
    grads.insert("positive".to_string(), g_pos);
    grads.insert("negatives".to_string(), g_neg);
    Ok(LossResult { value, grads })
}

/// Mean sigmoid focal loss over `pred` probabilities against binary labels.
pub fn focal_loss(pred: &[f64], gt: &[f64], gamma: f64, alpha: f64) -> Result<LossResult> {
    if pred.len() != gt.len() {
        return Err(Error::dim(format!("{} predictions for {} labels", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidValue("focal loss of an empty array".into()));
    }
    let mut acc = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &g) in pred.iter().zip(gt) {
        let (p, clamped) = clamp_prob(p);
        let positive = is_fg(g);
        let (pt, at, sign) = if positive { (p, alpha, 1.0) } else { (1.0 - p, 1.0 - alpha, -1.0) };
        let modulator = (1.0 - pt).powf(gamma);
        let log_pt = pt.ln();
        acc += -at * modulator * log_pt;
        if clamped {
            grad.push(0.0);
            continue;
        }
        let damp = if gamma == 0.0 { 0.0 } else { gamma * (1.0 - pt).powf(gamma - 1.0) * log_pt };
        grad.push(sign * at * (damp - modulator / pt));
    }
    let n = pred.len() as f64;
    for v in &mut grad {
        *v /= n;
    }
    Ok(LossResult::single(acc / n, "pred", grad))
}

/// Smooth-L1 (Huber-style) loss averaged over the four box coordinates.
pub fn smooth_l1_loss(pred: &BBox, gt: &BBox, beta: f64) -> Result<LossResult> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidValue(format!("beta must be positive, got {beta}")));
    }
    let (p, g) = (pred.to_array(), gt.to_array());
    let mut value = 0.0;
    let mut grad = vec![0.0; 4];
    for k in 0..4 {
        let d = p[k] - g[k];
        if d.abs() < beta {
            value += 0.5 * d * d / beta;
            grad[k] = d / beta / 4.0;
        } else {
            value += d.abs() - 0.5 * beta;
            grad[k] = d.signum() / 4.0;
        }
    }
    Ok(LossResult::single(value / 4.0, "pred", grad))
}

/// `1 - GIoU` with the gradient taken with respect to the predicted box.
/// At coordinate ties the one-sided derivative that treats the predicted
/// edge as active is used.
pub fn giou_loss(pred: &BBox, gt: &BBox) -> LossResult {
    let (a, b) = (pred, gt);
    let (aw, ah) = (a.width(), a.height());
    let area_a = aw * ah;
    let d_area = [-ah, -aw, ah, aw];

    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    let (inter, d_inter) = if iw > 0.0 && ih > 0.0 {
        let d = [
            if a.x1 >= b.x1 { -ih } else { 0.0 },
            if a.y1 >= b.y1 { -iw } else { 0.0 },
            if a.x2 <= b.x2 { ih } else { 0.0 },
            if a.y2 <= b.y2 { iw } else { 0.0 },
        ];
        (iw * ih, d)
    } else {
        (0.0, [0.0; 4])
    };
    let union = area_a + b.area() - inter;

    let c = a.enclosing(b);
    let (cw, ch) = (c.width(), c.height());
    let enclose = cw * ch;
    let d_enclose = [
        if a.x1 <= b.x1 { -ch } else { 0.0 },
        if a.y1 <= b.y1 { -cw } else { 0.0 },
        if a.x2 >= b.x2 { ch } else { 0.0 },
        if a.y2 >= b.y2 { cw } else { 0.0 },
    ];

    let iou = if union > 0.0 { inter / union } else { 0.0 };
    let giou = if enclose > 0.0 { iou - (enclose - union) / enclose } else { iou };

    let mut grad = vec![0.0; 4];
    for k in 0..4 {
        let d_union = d_area[k] - d_inter[k];
        let mut g = 0.0;
        if union > 0.0 {
            g -= (d_inter[k] * union - inter * d_union) / (union * union);
        }
        if enclose > 0.0 {
            g -= (d_union * enclose - union * d_enclose[k]) / (enclose * enclose);
        }
        grad[k] = g;
    }
    LossResult::single(1.0 - giou, "pred", grad)
}

/// Central differences `(f(x + h·e_i) - f(x - h·e_i)) / 2h` per coordinate.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max|a - b| / max(max|a|, max|b|)`, the error measure used for gradient
/// checks. Two all-zero vectors compare as 0.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn vol(t: usize, h: usize, w: usize, data: Vec<f64>) -> MaskVolume {
        MaskVolume::new(t, h, w, data).unwrap()
    }

    fn random_pred(rng: &mut CounterRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(0.05, 0.95)).collect()
    }

    fn random_bits(rng: &mut CounterRng, n: usize, p: f64) -> Vec<f64> {
        (0..n).map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn bce_values() {
        let ones = vol(1, 2, 2, vec![1.0; 4]);
        assert!(bce_loss(&ones, &ones).unwrap().value < 1e-6);
        let half = vol(1, 2, 2, vec![0.5; 4]);
        let gt = vol(1, 2, 2, vec![1.0, 0.0, 1.0, 0.0]);
        assert!((bce_loss(&half, &gt).unwrap().value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(&half, &vol(1, 1, 4, vec![0.0; 4])).is_err());
    }

    #[test]
    fn dice_values() {
        let gt = vol(1, 2, 3, vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(dice_loss(&gt, &gt).unwrap().value.abs() < 1e-5);
        let half = vol(1, 2, 2, vec![0.5; 4]);
        let ones = vol(1, 2, 2, vec![1.0; 4]);
        assert!((dice_loss(&half, &ones).unwrap().value - 1.0 / 3.0).abs() < 1e-5);
        let disjoint = vol(1, 2, 3, vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        assert!((dice_loss(&disjoint, &gt).unwrap().value - 1.0).abs() < 1e-5);
        let empty = MaskVolume::zeros(1, 2, 3);
        assert!(dice_loss(&empty, &empty).unwrap().value.is_finite());
    }

    #[test]
    fn bce_inter_values() {
        let pred = vol(1, 1, 2, vec![0.8, 0.4]);
        let gt = vol(1, 1, 2, vec![1.0, 0.0]);
        let inter = vol(1, 1, 2, vec![0.0, 1.0]);
        let expected = (2.0 * -(0.8f64.ln()) + 2.0 * -(0.6f64.ln())) / 4.0;
        let got = bce_inter_loss(&pred, &gt, &inter, 2.0).unwrap().value;
        assert!((got - expected).abs() < 1e-12);
        // Closed form is 0.366985 to six places.
        assert!((got - 0.366_985).abs() < 1e-6);

        let plain = bce_loss(&pred, &gt).unwrap();
        let uniform = bce_inter_loss(&pred, &gt, &inter, 1.0).unwrap();
        assert_eq!(plain, uniform);
    }

    #[test]
    fn dice_inter_values() {
        let gt = vol(1, 2, 3, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let inter = vol(1, 2, 3, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let empty = MaskVolume::zeros(1, 2, 3);
        let pred = vol(1, 2, 3, vec![0.7, 0.2, 0.9, 0.1, 0.3, 0.5]);
        assert_eq!(dice_inter_loss(&pred, &gt, &empty).unwrap(), dice_loss(&pred, &gt).unwrap());
        assert!(dice_inter_loss(&gt, &gt, &inter).unwrap().value.abs() < 1e-5);
        assert!((dice_inter_loss(&inter, &gt, &inter).unwrap().value - 1.0).abs() < 1e-5);

        let clash = vol(1, 2, 3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(dice_inter_loss(&pred, &gt, &clash), Err(Error::Contract(_))));
    }

    #[test]
    fn reid_values() {
        let a = [0.3, -0.2, 0.5];
        let p = [0.1, 0.4, -0.3];
        assert_eq!(init_reid_loss(&a, &p, &[]).unwrap().value, 0.0);
        // A negative with the same logit as the positive.
        let r = init_reid_loss(&a, &p, &[p.to_vec()]).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(init_reid_loss(&a, &p[..2], &[]).is_err());
    }

    #[test]
    fn focal_values() {
        let r = focal_loss(&[0.5], &[1.0], 2.0, 0.25).unwrap();
        assert!((r.value - 0.25 * 0.25 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((r.value - 0.04332).abs() < 1e-5);
    }

    #[test]
    fn smooth_l1_values() {
        let g = BBox::new(0.0, 0.0, 4.0, 4.0).unwrap();
        assert_eq!(smooth_l1_loss(&g, &g, 1.0).unwrap().value, 0.0);
        let half = BBox::new(0.5, 0.0, 4.0, 4.0).unwrap();
        assert!((smooth_l1_loss(&half, &g, 1.0).unwrap().value - 0.125 / 4.0).abs() < 1e-15);
        let two = BBox::new(0.0, 0.0, 6.0, 4.0).unwrap();
        assert!((smooth_l1_loss(&two, &g, 1.0).unwrap().value - 1.5 / 4.0).abs() < 1e-15);
        assert!(smooth_l1_loss(&two, &g, 0.0).is_err());
    }

    #[test]
    fn giou_values() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(giou_loss(&a, &a).value.abs() < 1e-15);
        let b = BBox::new(2.0, 2.0, 3.0, 3.0).unwrap();
        assert!((giou_loss(&a, &b).value - 16.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn total_loss_values() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossTerms::default(), &w), 0.0);
        let unit = LossTerms { cls: 1.0, box_l1: 0.5, box_giou: 0.5, inter_mask: 1.0, init_sem: 1.0, init_reid: 1.0 };
        assert_eq!(total_loss(&unit, &w), 10.5);
        let mut doubled = unit;
        doubled.inter_mask = 2.0;
        assert_eq!(total_loss(&doubled, &w) - total_loss(&unit, &w), w.inter_mask);
    }

    #[test]
    fn finite_difference_oracle() {
        let g = finite_diff_gradient(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        assert_eq!(finite_diff_gradient(|_| 3.0, &[1.0, 2.0, 3.0], 1e-5), vec![0.0; 3]);
    }

    #[test]
    fn dice_gradient_matches_finite_differences() {
        let mut rng = CounterRng::new(11, 0);
        for _ in 0..5 {
            let x = random_pred(&mut rng, 16);
            let gt = vol(1, 4, 4, random_bits(&mut rng, 16, 0.4));
            let f = |x: &[f64]| dice_loss(&vol(1, 4, 4, x.to_vec()), &gt).unwrap().value;
            let fd = finite_diff_gradient(f, &x, 1e-5);
            let an = dice_loss(&vol(1, 4, 4, x.clone()), &gt).unwrap();
            assert!(relative_error(an.pred_grad(), &fd) < 1e-5);
        }
    }

    #[test]
    fn inter_mask_loss_without_neighbors() {
        let mut rng = CounterRng::new(5, 0);
        let gt = vol(2, 3, 3, random_bits(&mut rng, 18, 0.5));
        let pred = vol(2, 3, 3, random_pred(&mut rng, 18));
        let boxes = vec![crate::mask::mask_to_boxes(&gt)];
        let r = inter_mask_loss(std::slice::from_ref(&pred), std::slice::from_ref(&gt), &boxes, 0.1, 2.0).unwrap();
        let empty = MaskVolume::zeros(2, 3, 3);
        let expected = bce_inter_loss(&pred, &gt, &empty, 2.0).unwrap().value + dice_loss(&pred, &gt).unwrap().value;
        assert_eq!(r.value, expected);
    }

    #[test]
    fn relative_error_scale() {
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
        assert!((relative_error(&[1.0, 2.0], &[1.0, 2.2]) - 0.2 / 2.2).abs() < 1e-15);
    }
}
