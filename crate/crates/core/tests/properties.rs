use std::collections::BTreeSet;

use bioparse::geometry::shape_metrics;
use bioparse::grid::{BinaryMask, ProbabilityMap, RealGrid};
use bioparse::io::manifest::{parse_manifest, render_manifest, ManifestEntry};
use bioparse::io::pmap;
use bioparse::metrics::{dice, silhouette, weighted_dice};
use bioparse::ontology::{normalize, Ontology};
use bioparse::recognition::{box_iou, nms, recognize, ScoredBox, TargetMaps};
use bioparse::shapemap::{ensemble_shapes, shift_map, Shift};
use bioparse::split::split_groups;
use bioparse::BoundingBox;
use proptest::prelude::*;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        proptest::collection::vec(any::<bool>(), h * w).prop_map(move |bits| BinaryMask::new(h, w, bits).unwrap())
    })
}

fn mask_pair(max: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        let bits = || proptest::collection::vec(any::<bool>(), h * w);
        (bits(), bits()).prop_map(move |(a, b)| (BinaryMask::new(h, w, a).unwrap(), BinaryMask::new(h, w, b).unwrap()))
    })
}

fn grid_strategy(max: usize) -> impl Strategy<Value = RealGrid> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0.0..=1.0f64, h * w).prop_map(move |v| RealGrid::new(h, w, v).unwrap())
    })
}

fn coarse_prob() -> impl Strategy<Value = f32> {
    prop_oneof![(0..=4u8).prop_map(|k| f32::from(k) / 4.0), 0.0..=1.0f32]
}

fn target_maps() -> impl Strategy<Value = (usize, usize, Vec<Vec<f32>>)> {
    (1..=8usize, 1..=8usize, 1..=4usize).prop_flat_map(|(h, w, m)| {
        proptest::collection::vec(proptest::collection::vec(coarse_prob(), h * w), m).prop_map(move |v| (h, w, v))
    })
}

fn build_targets(h: usize, w: usize, raw: &[Vec<f32>]) -> TargetMaps {
    let maps = raw
        .iter()
        .map(|v| ProbabilityMap::new(h, w, v.clone()).unwrap())
        .collect();
    TargetMaps::new((0..raw.len()).map(|i| format!("t{i}")).collect(), maps).unwrap()
}

proptest! {
    #[test]
    fn normalize_is_idempotent(text in "\\PC{0,40}") {
        let once = normalize(&text);
        prop_assert_eq!(normalize(&once), once.clone());
    }

    #[test]
    fn shape_metrics_in_unit_interval(mask in mask_strategy(24)) {
        prop_assume!(!mask.is_empty());
        let m = shape_metrics(&mask).unwrap();
        for v in [m.box_ratio, m.convex_ratio, m.iri] {
            prop_assert!(v > 0.0 && v <= 1.0);
        }
        prop_assert!(m.convex_ratio >= m.box_ratio);
    }

    #[test]
    fn dice_is_symmetric_and_bounded((a, b) in mask_pair(16)) {
        let ab = dice(&a, &b).unwrap();
        prop_assert_eq!(ab, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn weighted_dice_lies_between_extremes(pairs in proptest::collection::vec(mask_pair(6), 1..6)) {
        let same_dims: Vec<_> = pairs.iter().filter(|(p, _)| p.dims() == pairs[0].0.dims()).collect();
        let weighted = weighted_dice(same_dims.iter().map(|(p, g)| (p, g)));
        let scored: Vec<f64> = same_dims.iter().filter(|(_, g)| !g.is_empty()).map(|(p, g)| dice(p, g).unwrap()).collect();
        match weighted {
            Ok(v) => {
                let lo = scored.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
            Err(_) => prop_assert!(scored.is_empty()),
        }
    }

    #[test]
    fn silhouette_bounded_and_label_invariant(
        points in proptest::collection::vec((0..3usize, -5.0..5.0f64, -5.0..5.0f64), 3..20)
    ) {
        let labels: Vec<usize> = points.iter().map(|p| p.0).collect();
        let distinct: BTreeSet<_> = labels.iter().collect();
        prop_assume!(distinct.len() >= 2 && distinct.len() < labels.len());
        let coords: Vec<Vec<f64>> = points.iter().map(|p| vec![p.1 + p.0 as f64 * 3.0, p.2]).collect();
        let score = silhouette(&coords, &labels).unwrap();
        prop_assert!((-1.0..=1.0).contains(&score));
        let renamed: Vec<String> = labels.iter().map(|l| format!("c{}", 2 - l)).collect();
        prop_assert!((silhouette(&coords, &renamed).unwrap() - score).abs() < 1e-12);
    }

    #[test]
    fn shift_then_inverse_restores_interior(grid in grid_strategy(10), dr in -3i64..=3, dc in -3i64..=3) {
        let (h, w) = grid.dims();
        prop_assume!(dr.unsigned_abs() < h as u64 && dc.unsigned_abs() < w as u64);
        let s = Shift::new(dr, dc);
        let back = shift_map(&shift_map(&grid, s).unwrap(), s.inverse()).unwrap();
        for r in 0..h {
            for c in 0..w {
                let (sr, sc) = (r as i64 + dr, c as i64 + dc);
                let kept = (0..h as i64).contains(&sr) && (0..w as i64).contains(&sc);
                let want = if kept { grid.get(r, c) } else { 0.0 };
                prop_assert_eq!(back.get(r, c), want);
            }
        }
    }

    #[test]
    fn single_map_ensemble_is_identity(grid in grid_strategy(12)) {
        prop_assert_eq!(ensemble_shapes(std::slice::from_ref(&grid)).unwrap(), grid);
    }

    #[test]
    fn ensemble_stays_in_unit_interval(grids in (1..=8usize, 1..=8usize, 1..=4usize).prop_flat_map(|(h, w, k)| {
        proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, h * w), k)
            .prop_map(move |vs| vs.into_iter().map(|v| RealGrid::new(h, w, v).unwrap()).collect::<Vec<_>>())
    })) {
        let shape = ensemble_shapes(&grids).unwrap();
        prop_assert!(shape.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn recognition_invariants((h, w, raw) in target_maps(), lambda in 0.0..1.0f64) {
        let inputs = build_targets(h, w, &raw);
        let result = recognize(&inputs, lambda).unwrap();
        let sel = &result.selection;
        for t in 0..raw.len() {
            prop_assert!(sel.final_areas[t] <= sel.original_areas[t]);
            let labelled = result.labels.labels().iter().filter(|l| **l == Some(t as u16)).count();
            if sel.selected.contains(&t) {
                prop_assert!(labelled >= sel.final_areas[t]);
                prop_assert!(labelled <= sel.original_areas[t]);
            } else {
                prop_assert_eq!(labelled, 0);
            }
        }
        for (pixel, label) in result.labels.labels().iter().enumerate() {
            let any_above = raw.iter().any(|m| f64::from(m[pixel]) > 0.5);
            prop_assert!(label.is_none() || any_above);
        }
        let looser = recognize(&inputs, lambda / 2.0).unwrap();
        prop_assert!(sel.selected.iter().all(|t| looser.selection.selected.contains(t)));
    }

    #[test]
    fn nms_keeps_a_non_overlapping_subset(
        raw in proptest::collection::vec((0..12usize, 0..12usize, 0..5usize, 0..5usize, 0..4u8), 0..15),
        threshold in 0.0..1.0f64
    ) {
        let boxes: Vec<ScoredBox> = raw.iter().enumerate().map(|(i, &(r, c, dh, dw, s))| ScoredBox {
            bbox: BoundingBox::new(r, c, r + dh, c + dw).unwrap(),
            score: f64::from(s),
            target: format!("b{i}"),
        }).collect();
        let kept = nms(&boxes, threshold).unwrap();
        prop_assert!(kept.iter().all(|k| boxes.contains(k)));
        prop_assert!(kept.len() <= boxes.len());
        prop_assert_eq!(kept.is_empty(), boxes.is_empty());
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(box_iou(&a.bbox, &b.bbox) <= threshold);
            }
        }
    }

    #[test]
    fn split_partitions_groups(groups in proptest::collection::btree_set("[a-z]{1,4}", 1..40), seed in any::<u64>(), ratio in 0.05..0.95f64) {
        let a = split_groups(groups.iter().map(String::as_str), ratio, seed).unwrap();
        prop_assert_eq!(a.groups.keys().cloned().collect::<BTreeSet<_>>(), groups.clone());
        let train = a.train_groups();
        prop_assert!(train >= 1 && train <= groups.len());
        prop_assert_eq!(split_groups(groups.iter().map(String::as_str), ratio, seed).unwrap(), a);
    }

    #[test]
    fn pmap_round_trip(h in 1..20usize, w in 1..20usize, seed in any::<u64>()) {
        let mut state = seed;
        let values: Vec<f32> = (0..h * w).map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 40) as f32 / (1u64 << 24) as f32
        }).collect();
        let map = ProbabilityMap::new(h, w, values).unwrap();
        let bytes = pmap::encode(&map).unwrap();
        prop_assert_eq!(bytes.len(), 13 + 4 * h * w);
        prop_assert_eq!(pmap::decode(&bytes, "p").unwrap(), map);
    }

    #[test]
    fn manifest_round_trip(rows in proptest::collection::vec(("\\PC{0,12}", "\\PC{0,12}", "[a-z ]{1,10}", "[a-z0-9]{1,6}", any::<Option<i32>>()), 0..10)) {
        let entries: Vec<ManifestEntry> = rows.into_iter().map(|(img, mask, ty, group, extra)| {
            let mut e = ManifestEntry::new(format!("i{img}"), format!("m{mask}"), ty, group);
            if let Some(x) = extra {
                e.extra.insert("slice".into(), serde_json::Value::from(x));
            }
            e
        }).collect();
        let text = render_manifest(&entries).unwrap();
        prop_assert_eq!(parse_manifest(&text, "m").unwrap(), entries);
    }

    #[test]
    fn candidates_are_valid_object_types(pick in 0..1000usize) {
        let ont = Ontology::shipped();
        let modalities: Vec<&str> = ont.modalities().collect();
        let sites: Vec<&str> = ont.sites().collect();
        let modality = modalities[pick % modalities.len()];
        let site = sites[pick % sites.len()];
        let all = ont.candidates_for(modality, None).unwrap();
        let at_site = ont.candidates_for(modality, Some(site)).unwrap();
        prop_assert!(at_site.iter().all(|c| all.contains(c)));
        for name in &all {
            let ty = ont.object_type(name).unwrap();
            prop_assert!(ty.modalities.iter().any(|m| normalize(m) == normalize(modality)));
        }
        for name in &at_site {
            prop_assert!(ont.object_type(name).unwrap().sites.iter().any(|s| s == site));
        }
    }
}

#[test]
fn candidates_without_site_are_the_union_over_sites() {
    let ont = Ontology::shipped();
    for modality in ont.modalities() {
        let mut union = BTreeSet::new();
        for site in ont.sites() {
            union.extend(ont.candidates_for(modality, Some(site)).unwrap());
        }
        let all: BTreeSet<&str> = ont.candidates_for(modality, None).unwrap().into_iter().collect();
        assert_eq!(all, union, "{modality}");
    }
}

#[test]
fn ontology_round_trips_through_canonical_json() {
    let ont = Ontology::shipped();
    let text = ont.to_json().unwrap();
    let back = Ontology::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    assert_eq!(back.object_types().len(), ont.object_types().len());
}
