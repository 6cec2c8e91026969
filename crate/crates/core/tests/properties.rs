use proptest::prelude::*;

use neurometry_core::accuracy::pair_accuracy;
use neurometry_core::annotations::{
    decode_rle, encode_rle, parse_annotations, rasterize, serialize_annotations, AnnotationSet,
    PolygonInstance,
};
use neurometry_core::image_io::{normalize_to_u8, resize, GrayImage, RawImage, ResizeMode};
use neurometry_core::masks::{connected_components, BinaryMask, Connectivity, Instance};
use neurometry_core::matching::match_instances;
use neurometry_core::metrics::segmentation_metrics;
use neurometry_core::morphometry::measure_instance;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h)
            .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
    })
}

fn raw_strategy() -> impl Strategy<Value = RawImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(0u16..=65535, w * h).prop_map(move |samples| RawImage {
            width: w,
            height: h,
            bit_depth: 16,
            samples,
        })
    })
}

fn gray_strategy() -> impl Strategy<Value = GrayImage> {
    (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h)
            .prop_map(move |p| GrayImage::new(w, h, p).unwrap())
    })
}

/// Disjoint single-row strip instances on a 64-pixel row.
fn strips_strategy() -> impl Strategy<Value = Vec<Instance>> {
    prop::collection::vec((0usize..64, 1usize..12), 0..6).prop_map(|spans| {
        let mut taken = [false; 64];
        let mut out = Vec::new();
        for (start, len) in spans {
            let end = (start + len).min(64);
            if taken[start..end].iter().any(|&t| t) {
                continue;
            }
            taken[start..end].iter_mut().for_each(|t| *t = true);
            let mask = BinaryMask::from_fn(64, 1, |_, c| (start..end).contains(&c));
            out.push(Instance::new(out.len() as u32 + 1, mask).unwrap());
        }
        out
    })
}

proptest! {
    #[test]
    fn normalize_is_monotone(img in raw_strategy()) {
        let out = normalize_to_u8(&img).unwrap();
        for i in 0..img.samples.len() {
            for j in 0..img.samples.len() {
                if img.samples[i] <= img.samples[j] {
                    prop_assert!(out.pixels()[i] <= out.pixels()[j]);
                }
            }
        }
    }

    #[test]
    fn normalize_is_idempotent_on_full_range(mut px in prop::collection::vec(any::<u8>(), 2..64)) {
        px[0] = 0;
        px[1] = 255;
        let raw = RawImage { width: px.len(), height: 1, bit_depth: 8, samples: px.iter().map(|&p| p as u16).collect() };
        let out = normalize_to_u8(&raw).unwrap();
        prop_assert_eq!(out.pixels(), &px[..]);
    }

    #[test]
    fn resize_to_own_size_is_identity(img in gray_strategy()) {
        let (w, h) = img.dims();
        prop_assert_eq!(&resize(&img, w, h, ResizeMode::Bilinear).unwrap(), &img);
        prop_assert_eq!(&resize(&img, w, h, ResizeMode::Nearest).unwrap(), &img);
    }

    #[test]
    fn nearest_resize_keeps_value_set(img in gray_strategy(), w in 1usize..20, h in 1usize..20) {
        let out = resize(&img, w, h, ResizeMode::Nearest).unwrap();
        prop_assert!(out.pixels().iter().all(|p| img.pixels().contains(p)));
    }

    #[test]
    fn rle_round_trips(m in mask_strategy(16)) {
        let runs = encode_rle(&m);
        prop_assert_eq!(decode_rle(&runs, m.width(), m.height()).unwrap(), m);
    }

    #[test]
    fn annotations_round_trip(
        w in 1usize..500, h in 1usize..500,
        rings in prop::collection::vec(prop::collection::vec((-1.0f64..600.0, -1.0f64..600.0), 3..8), 1..4),
        n in 0u32..4,
    ) {
        let instances = (0..n).map(|i| PolygonInstance {
            id: i * 3 + 1,
            class_name: "neuron".into(),
            rings: rings.clone(),
        }).collect();
        let set = AnnotationSet { image_width: w, image_height: h, instances };
        prop_assert_eq!(parse_annotations(&serialize_annotations(&set)).unwrap(), set);
    }

    #[test]
    fn rectangle_area_law(x0 in 0i32..20, y0 in 0i32..20, w in 1i32..12, h in 1i32..12) {
        let (x1, y1) = (x0 + w, y0 + h);
        let ring = vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            .into_iter().map(|(x, y)| (x as f64, y as f64)).collect();
        let poly = PolygonInstance { id: 1, class_name: "neuron".into(), rings: vec![ring] };
        prop_assert_eq!(rasterize(&poly, 32, 32).unwrap().area(), (w * h) as u64);
    }

    #[test]
    fn components_partition_the_mask(m in mask_strategy(16)) {
        let four = connected_components(&m, Connectivity::Four);
        let eight = connected_components(&m, Connectivity::Eight);
        prop_assert!(eight.len() <= four.len());
        for comps in [&four, &eight] {
            prop_assert_eq!(comps.iter().map(Instance::area).sum::<u64>(), m.area());
            let mut union = BinaryMask::new(m.width(), m.height());
            for c in comps.iter() {
                prop_assert_eq!(union.intersection_count(c.mask()).unwrap(), 0);
                union.union_with(c.mask()).unwrap();
                prop_assert!(c.bbox().w * c.bbox().h >= c.area() as usize);
            }
            prop_assert_eq!(&union, &m);
        }
    }

    #[test]
    fn iou_is_symmetric(a in mask_strategy(8), seed in any::<u64>()) {
        let mut s = seed;
        let b = BinaryMask::from_fn(a.width(), a.height(), |_, _| { s = s.rotate_left(7) ^ 0x9e37; s & 1 == 1 });
        prop_assert_eq!(a.iou(&b).unwrap(), b.iou(&a).unwrap());
        if !a.is_empty() {
            prop_assert_eq!(a.iou(&a).unwrap(), 1.0);
        }
        prop_assert_eq!(a.iou(&BinaryMask::new(a.width(), a.height())).unwrap(), 0.0);
    }

    #[test]
    fn measurement_invariants(img in gray_strategy(), seed in any::<u64>(), dx in 0usize..4, dy in 0usize..4) {
        let (w, h) = img.dims();
        let mut s = seed | 1;
        let mask = BinaryMask::from_fn(w, h, |_, _| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s & 3 != 0 });
        let Ok(inst) = Instance::new(1, mask) else { return Ok(()); };
        let m = measure_instance(&inst, &img).unwrap();
        prop_assert!(m.min_intensity as f64 <= m.mean_intensity && m.mean_intensity <= m.max_intensity as f64);
        prop_assert!(m.area <= m.length as u64 * m.width as u64);

        // Translate mask and image together onto a larger canvas.
        let (bw, bh) = (w + dx, h + dy);
        let big_mask = BinaryMask::from_fn(bw, bh, |r, c| r >= dy && c >= dx && inst.mask().get(r - dy, c - dx));
        let mut big_img = GrayImage::filled(bw, bh, 0);
        for r in 0..h { for c in 0..w { big_img.set(r + dy, c + dx, img.get(r, c)); } }
        let moved = measure_instance(&Instance::new(1, big_mask).unwrap(), &big_img).unwrap();
        prop_assert_eq!(moved, m);

        // A monotone intensity map keeps geometry.
        let dark = GrayImage::new(w, h, img.pixels().iter().map(|&p| p / 2).collect()).unwrap();
        let d = measure_instance(&inst, &dark).unwrap();
        prop_assert_eq!((d.length, d.width, d.area), (m.length, m.width, m.area));
    }

    #[test]
    fn pair_accuracy_laws(a in 0.0f64..1e6, b in 0.0f64..1e6, c in 0.001f64..1000.0) {
        let ab = pair_accuracy(a, b).unwrap();
        prop_assert_eq!(ab, pair_accuracy(b, a).unwrap());
        prop_assert!((0.0..=100.0).contains(&ab));
        prop_assert_eq!(ab == 100.0, a == b);
        let scaled = pair_accuracy(c * a, c * b).unwrap();
        prop_assert!((scaled - ab).abs() <= 1e-9 * 100.0);
    }

    #[test]
    fn matching_invariants(gt in strips_strategy(), pred in strips_strategy(), t in 0.0f64..0.99) {
        let m = match_instances(&gt, &pred, t).unwrap();
        prop_assert_eq!(m.pairs.len() + m.unmatched_gt.len(), gt.len());
        prop_assert_eq!(m.pairs.len() + m.unmatched_pred.len(), pred.len());
        let mut gt_ids: Vec<u32> = m.pairs.iter().map(|p| p.gt_id).chain(m.unmatched_gt.iter().copied()).collect();
        gt_ids.sort_unstable();
        gt_ids.dedup();
        prop_assert_eq!(gt_ids.len(), gt.len());
        prop_assert!(m.pairs.iter().all(|p| p.iou > t));

        let higher = match_instances(&gt, &pred, (t + 0.2).min(0.99)).unwrap();
        prop_assert!(higher.pairs.len() <= m.pairs.len());

        if t >= 0.5 {
            let mut rev_gt = gt.clone();
            rev_gt.reverse();
            let mut rev_pred = pred.clone();
            rev_pred.reverse();
            prop_assert_eq!(match_instances(&rev_gt, &rev_pred, t).unwrap(), m.clone());
        }

        let s = segmentation_metrics(&m);
        prop_assert_eq!(s.pq, s.sq * s.rq);
        prop_assert!(s.rq <= 1.0);
        prop_assert!(s.precision.min(s.recall) <= s.f1 + 1e-15 && s.f1 <= s.precision.max(s.recall) + 1e-15);
    }
}
