use proptest::prelude::*;

use ovc_core::clip::{mask_logits, ClipDetections, ClipQuerySet, Detection, FrameSpan, MaskFeatures};
use ovc_core::hungarian::{assignment_score, hungarian_max};
use ovc_core::io::{clip_record_from_str, clip_record_to_string};
use ovc_core::losses::{bce_inter_loss, bce_loss, dice_inter_loss, dice_loss};
use ovc_core::mask::{
    box_iou, inter_instance_mask, mask_iou, neighbor_set, rle_decode, rle_encode, BBox, Bitmap, MaskVolume,
};
use ovc_core::oracles::{best_assignment_total, naive_contraction};
use ovc_core::synthetic::{build_scenario, ground_truth, render_scenario, ClipLayout, NoiseConfig, ScenarioKind};
use ovc_core::tracker::{associate_clip, run_near_online, score_matrix, AssociationParams, MemoryPool, TrackerConfig};

fn bitmap() -> impl Strategy<Value = Bitmap> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(any::<bool>(), h * w).prop_map(move |bits| Bitmap::new(h, w, bits).unwrap())
    })
}

fn volume_pair() -> impl Strategy<Value = (MaskVolume, MaskVolume)> {
    (1usize..3, 1usize..6, 1usize..6).prop_flat_map(|(t, h, w)| {
        let n = t * h * w;
        (prop::collection::vec(0.0f64..=1.0, n), prop::collection::vec(0.0f64..=1.0, n)).prop_map(move |(a, b)| {
            (MaskVolume::new(t, h, w, a).unwrap(), MaskVolume::new(t, h, w, b).unwrap())
        })
    })
}

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0f64..20.0, 0.0f64..20.0, 0.0f64..8.0, 0.0f64..8.0)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..6)
        .prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, m), n))
}

/// Binary ground truths of `k` instances on a shared canvas, with per-frame boxes.
fn instances() -> impl Strategy<Value = Vec<MaskVolume>> {
    (1usize..5, 1usize..3, 2usize..6, 2usize..6).prop_flat_map(|(k, t, h, w)| {
        prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.3), t * h * w), k).prop_map(move |all| {
            all.into_iter()
                .map(|bits| MaskVolume::new(t, h, w, bits.into_iter().map(|b| b as u8 as f64).collect()).unwrap())
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rle_round_trip(m in bitmap()) {
        let rle = rle_encode(&m);
        prop_assert_eq!(rle.counts.iter().sum::<u64>(), (m.height * m.width) as u64);
        prop_assert!(rle.counts.iter().skip(1).all(|&c| c > 0));
        prop_assert_eq!(rle_decode(&rle).unwrap(), m);
    }

    #[test]
    fn mask_iou_bounded_and_symmetric((a, b) in volume_pair()) {
        let ab = mask_iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
    }

    #[test]
    fn box_iou_bounded_and_symmetric(a in bbox(), b in bbox()) {
        let ab = box_iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, box_iou(&b, &a));
    }

    #[test]
    fn neighbor_sets_and_inter_masks(gts in instances(), eps in 0.0f64..0.9) {
        let boxes: Vec<_> = gts.iter().map(ovc_core::mask::mask_to_boxes).collect();
        for i in 0..gts.len() {
            let set = neighbor_set(&boxes, i, eps).unwrap();
            prop_assert!(!set.contains(i));
            prop_assert!(set.neighbors.iter().all(|&j| j < gts.len()));
            let inter = inter_instance_mask(&gts, &set).unwrap();
            for (v, (o, g)) in inter.data().iter().zip(gts[i].data()).enumerate() {
                // Never on the target, and only where some neighbor is.
                prop_assert!(!(*o > 0.5 && *g > 0.5));
                let covered = set.neighbors.iter().any(|&j| gts[j].data()[v] > 0.5);
                prop_assert_eq!(*o > 0.5, covered && *g <= 0.5);
            }
        }
    }

    #[test]
    fn loss_ranges((pred, g) in volume_pair()) {
        let gt = MaskVolume::from_bitmaps(&g.bitmaps()).unwrap();
        let bce = bce_loss(&pred, &gt).unwrap().value;
        prop_assert!(bce >= 0.0 && bce.is_finite());
        let dice = dice_loss(&pred, &gt).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&dice));
        let empty = MaskVolume::zeros(gt.frames(), gt.height(), gt.width());
        prop_assert_eq!(dice_inter_loss(&pred, &gt, &empty).unwrap().value, dice);
        prop_assert_eq!(bce_inter_loss(&pred, &gt, &empty, 1.0).unwrap().value, bce);
    }

    #[test]
    fn hungarian_is_optimal(s in matrix()) {
        let pairs = hungarian_max(&s);
        prop_assert_eq!(pairs.len(), s.len().min(s[0].len()));
        prop_assert_eq!(assignment_score(&s, &pairs), best_assignment_total(&s));
    }

    #[test]
    fn hungarian_scale_invariance(s in matrix(), c in 0.01f64..100.0, k in -4i32..5) {
        let pairs = hungarian_max(&s);
        // Powers of two scale exactly, so the solver takes identical steps.
        let exact = 2f64.powi(k);
        let scaled: Vec<Vec<f64>> = s.iter().map(|r| r.iter().map(|v| v * exact).collect()).collect();
        prop_assert_eq!(hungarian_max(&scaled), pairs);
        // Other constants may break ties differently but stay optimal.
        let scaled: Vec<Vec<f64>> = s.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let other = hungarian_max(&scaled);
        prop_assert!((assignment_score(&s, &other) - best_assignment_total(&s)).abs() < 1e-9);
    }

    #[test]
    fn one_hot_weights_select_a_frame(t in 1usize..5, n in 1usize..4, d in 1usize..5, pick in 0usize..5, seed in any::<u64>()) {
        let pick = pick % t;
        let mut rng = ovc_core::rng::CounterRng::new(seed, 0);
        let per_frame: Vec<f64> = (0..t * n * d).map(|_| rng.normal()).collect();
        let weights: Vec<f64> = (0..t * n).map(|i| if i / n == pick { 1.0 } else { 0.0 }).collect();
        let q = ClipQuerySet::new(t, n, d, per_frame.clone(), weights).unwrap().aggregate().unwrap();
        prop_assert_eq!(&q[..], &per_frame[pick * n * d..(pick + 1) * n * d]);
    }

    #[test]
    fn mask_logits_match_naive_loops(n in 1usize..4, d in 1usize..5, plane in 1usize..20, seed in any::<u64>()) {
        let mut rng = ovc_core::rng::CounterRng::new(seed, 0);
        let q: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
        let data: Vec<f64> = (0..d * plane).map(|_| rng.normal()).collect();
        let feats = MaskFeatures::new(d, 1, 1, plane, data.clone()).unwrap();
        prop_assert_eq!(mask_logits(&q, d, &feats).unwrap(), naive_contraction(&q, d, &data, plane));
    }
}

fn det(mask: MaskVolume, embedding: Vec<f64>) -> Detection {
    Detection { class_id: 0, confidence: 0.9, embedding, mask }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn association_is_one_to_one_and_evicts(seed in any::<u64>(), clips in 2usize..14, horizon in 0usize..5) {
        let mut rng = ovc_core::rng::CounterRng::new(seed, 0);
        let mut pool = MemoryPool::new(horizon);
        let params = AssociationParams { tau_new: -10.0, ..AssociationParams::default() };
        for k in 0..clips {
            let n = rng.below(4);
            let dets: Vec<Detection> = (0..n)
                .map(|_| {
                    let mask = MaskVolume::from_fn(2, 3, 3, |_, _, _| rng.bernoulli(0.4) as u8 as f64).unwrap();
                    det(mask, (0..3).map(|_| rng.normal()).collect())
                })
                .collect();
            let clip = ClipDetections { span: FrameSpan { start: k, len: 2 }, detections: dets };
            let scores = score_matrix(&pool, &clip, 1.0, 1.0);
            for row in &scores.values {
                prop_assert!(row.iter().all(|v| (-1.0 - 1e-12..=2.0 + 1e-12).contains(v)));
            }
            let ids = associate_clip(&mut pool, &clip, k, &params).unwrap();
            let mut unique = ids.clone();
            unique.sort_unstable();
            unique.dedup();
            prop_assert_eq!(unique.len(), ids.len());
            for t in &pool.tracks {
                prop_assert!(t.entries.iter().filter(|e| e.clip == k).count() <= 1);
            }
            for t in &pool.tracks {
                for e in &t.entries {
                    prop_assert!(k - e.clip <= horizon);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_scenarios(seed in 0u64..1000, kind in 0usize..4) {
        let kind = ScenarioKind::ALL[kind];
        let s = build_scenario(kind, seed);
        let gt = ground_truth(&s).unwrap();
        for f in 0..s.frames {
            let owners = s.owners(f);
            let shapes: Vec<Bitmap> = (0..s.objects.len()).map(|i| s.full_shape(i, f)).collect();
            for p in 0..s.height * s.width {
                let claimed = gt.iter().filter(|g| g.masks[f].bits[p]).count();
                prop_assert!(claimed <= 1);
                let under_any = shapes.iter().any(|b| b.bits[p]);
                prop_assert_eq!(claimed == 1, under_any);
                prop_assert_eq!(owners[p].is_some(), under_any);
            }
        }

        let clips = render_scenario(&s, ClipLayout::default()).unwrap();
        for c in &clips {
            prop_assert_eq!(&clip_record_from_str(&clip_record_to_string(c)).unwrap(), c);
        }

        let mut clean = s.clone();
        clean.noise = NoiseConfig { flip_rate: 0.0, embedding_sigma: 0.05 };
        for c in render_scenario(&clean, ClipLayout::default()).unwrap() {
            let g = c.ground_truth.as_ref().unwrap();
            for d in &c.detections {
                prop_assert!(g.masks.contains(&d.mask));
            }
            prop_assert_eq!(c.detections.len(), g.masks.len());
        }

        let dets: Vec<_> = clips.iter().map(|c| c.clip_detections()).collect();
        let a = run_near_online(&dets, &TrackerConfig::default()).unwrap();
        let b = run_near_online(&dets, &TrackerConfig::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}
