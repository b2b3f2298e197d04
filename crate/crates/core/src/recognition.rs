//! Multi-target object recognition from per-target probability maps.
//!
//! Stage one assigns every pixel to its most probable target among those
//! above 0.5 and keeps targets that retain more than `lambda` of their
//! original area. Stage two drops the rejected targets and reassigns pixels
//! among the survivors. Ties go to the lowest target index.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::grid::{LabelMap, ProbabilityMap, TargetIndex};

/// Pixel probability a target must exceed to claim a pixel.
pub const PIXEL_THRESHOLD: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Ordered targets and their probability maps.
#[derive(Debug, Clone)]
pub struct TargetMaps {
    targets: Vec<String>,
    maps: Vec<ProbabilityMap>,
}

impl TargetMaps {
    pub fn new(targets: Vec<String>, maps: Vec<ProbabilityMap>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::domain("recognition needs at least one target"));
        }
        if targets.len() != maps.len() {
            return Err(Error::domain(format!(
                "{} target names for {} maps",
                targets.len(),
                maps.len()
            )));
        }
        if targets.len() > usize::from(TargetIndex::MAX) {
            return Err(Error::domain(format!("too many targets: {}", targets.len())));
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(Error::domain(format!("duplicate target {t:?}")));
            }
        }
        let dims = maps[0].dims();
        if let Some(m) = maps.iter().find(|m| m.dims() != dims) {
            return Err(Error::domain(format!(
                "target maps differ in size: {}x{} vs {}x{}",
                dims.0,
                dims.1,
                m.height(),
                m.width()
            )));
        }
        Ok(Self { targets, maps })
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn maps(&self) -> &[ProbabilityMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps[0].dims()
    }

    /// Among `candidates`, the target with the highest probability above the
    /// pixel threshold at flat index `i`; earlier candidates win ties.
    fn argmax_at(&self, i: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
        let mut best: Option<(usize, f32)> = None;
        for t in candidates {
            let v = self.maps[t].values()[i];
            if f64::from(v) > PIXEL_THRESHOLD && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((t, v));
            }
        }
        best.map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selection {
    /// Indices into the target list, ascending.
    pub selected: Vec<usize>,
    /// Pixels above threshold per target.
    pub original_areas: Vec<usize>,
    /// Pixels won in the provisional assignment per target.
    pub final_areas: Vec<usize>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

pub fn select_targets(inputs: &TargetMaps, lambda: f64) -> Result<Selection> {
    check_lambda(lambda)?;
    let m = inputs.len();
    let (h, w) = inputs.dims();
    let original_areas: Vec<usize> = inputs
        .maps
        .iter()
        .map(|map| map.values().iter().filter(|&&v| f64::from(v) > PIXEL_THRESHOLD).count())
        .collect();
    let mut final_areas = vec![0usize; m];
    for i in 0..h * w {
        if let Some(t) = inputs.argmax_at(i, 0..m) {
            final_areas[t] += 1;
        }
    }
    let selected = (0..m)
        .filter(|&t| original_areas[t] > 0 && final_areas[t] as f64 > lambda * original_areas[t] as f64)
        .collect();
    Ok(Selection {
        selected,
        original_areas,
        final_areas,
    })
}

/// Assigns each pixel to its most probable selected target, blank otherwise.
pub fn aggregate_labels(inputs: &TargetMaps, selected: &[usize]) -> Result<LabelMap> {
    if let Some(&bad) = selected.iter().find(|&&t| t >= inputs.len()) {
        return Err(Error::domain(format!("selected target index {bad} out of range")));
    }
    let mut order = selected.to_vec();
    order.sort_unstable();
    order.dedup();
    let (h, w) = inputs.dims();
    let labels = (0..h * w)
        .map(|i| inputs.argmax_at(i, order.iter().copied()).map(|t| t as TargetIndex))
        .collect();
    LabelMap::new(h, w, labels)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognitionResult {
    pub targets: Vec<String>,
    pub selection: Selection,
    pub labels: LabelMap,
}

impl RecognitionResult {
    pub fn selected_ids(&self) -> Vec<&str> {
        self.selection
            .selected
            .iter()
            .map(|&t| self.targets[t].as_str())
            .collect()
    }
}

pub fn recognize(inputs: &TargetMaps, lambda: f64) -> Result<RecognitionResult> {
    let selection = select_targets(inputs, lambda)?;
    let labels = aggregate_labels(inputs, &selection.selected)?;
    Ok(RecognitionResult {
        targets: inputs.targets.clone(),
        selection,
        labels,
    })
}

/// A detection box with confidence, as produced by box-prompted detectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    pub score: f64,
    pub target: String,
}

/// Intersection over union with inclusive pixel bounds.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let rows = a.max_row.min(b.max_row) as i64 - a.min_row.max(b.min_row) as i64 + 1;
    let cols = a.max_col.min(b.max_col) as i64 - a.min_col.max(b.min_col) as i64 + 1;
    if rows <= 0 || cols <= 0 {
        return 0.0;
    }
    let inter = (rows * cols) as f64;
    inter / (a.area() as f64 + b.area() as f64 - inter)
}

/// Greedy non-maximum suppression. Output is in descending score order;
/// equal scores keep input order.
pub fn nms(boxes: &[ScoredBox], iou_threshold: f64) -> Result<Vec<ScoredBox>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::domain(format!("IoU threshold {iou_threshold} outside [0, 1]")));
    }
    if let Some(b) = boxes.iter().find(|b| !b.score.is_finite()) {
        return Err(Error::domain(format!("non-finite score for {:?}", b.target)));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[j].score.total_cmp(&boxes[i].score));
    let mut kept: Vec<&ScoredBox> = Vec::new();
    for i in order {
        let candidate = &boxes[i];
        if kept.iter().all(|k| box_iou(&k.bbox, &candidate.bbox) <= iou_threshold) {
            kept.push(candidate);
        }
    }
    Ok(kept.into_iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(values: &[&[f64]], h: usize, w: usize) -> TargetMaps {
        let targets = (1..=values.len()).map(|i| format!("t{i}")).collect();
        let maps = values
            .iter()
            .map(|v| ProbabilityMap::from_f64(h, w, v).unwrap())
            .collect();
        TargetMaps::new(targets, maps).unwrap()
    }

    fn bx(r0: usize, c0: usize, r1: usize, c1: usize) -> BoundingBox {
        BoundingBox::new(r0, c0, r1, c1).unwrap()
    }

    #[test]
    fn single_target_is_selected() {
        let input = maps(&[&[0.9, 0.2, 0.7, 0.1]], 2, 2);
        let sel = select_targets(&input, 0.5).unwrap();
        assert_eq!(sel.selected, vec![0]);
        assert_eq!(sel.original_areas, sel.final_areas);
    }

    #[test]
    fn traced_two_target_example() {
        let input = maps(&[&[0.9, 0.9, 0.1, 0.1], &[0.6, 0.2, 0.2, 0.2]], 2, 2);
        let sel = select_targets(&input, 0.5).unwrap();
        assert_eq!(sel.original_areas, vec![2, 1]);
        assert_eq!(sel.final_areas, vec![2, 0]);
        assert_eq!(sel.selected, vec![0]);

        let labels = aggregate_labels(&input, &sel.selected).unwrap();
        assert_eq!(labels.labels(), &[Some(0), Some(0), None, None]);
    }

    #[test]
    fn nothing_above_threshold() {
        let input = maps(&[&[0.5, 0.1], &[0.3, 0.2]], 1, 2);
        let result = recognize(&input, 0.0).unwrap();
        assert!(result.selection.selected.is_empty());
        assert!(result.labels.labels().iter().all(Option::is_none));
    }

    #[test]
    fn empty_selection_gives_blank_labels() {
        let input = maps(&[&[0.9, 0.9]], 1, 2);
        let labels = aggregate_labels(&input, &[]).unwrap();
        assert!(labels.labels().iter().all(Option::is_none));
    }

    #[test]
    fn disjoint_targets_keep_their_masks() {
        let input = maps(&[&[0.9, 0.1, 0.1], &[0.1, 0.1, 0.8]], 1, 3);
        let result = recognize(&input, 0.5).unwrap();
        assert_eq!(result.selected_ids(), vec!["t1", "t2"]);
        assert_eq!(result.labels.labels(), &[Some(0), None, Some(1)]);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let input = maps(&[&[0.7], &[0.7]], 1, 1);
        let sel = select_targets(&input, 0.0).unwrap();
        assert_eq!(sel.final_areas, vec![1, 0]);
        // target 2 never wins a pixel and 0 > 0 * 1 fails
        assert_eq!(sel.selected, vec![0]);
    }

    #[test]
    fn full_confidence_identity() {
        let input = maps(&[&[1.0; 6]], 2, 3);
        let result = recognize(&input, 0.9).unwrap();
        assert!(result.labels.labels().iter().all(|&l| l == Some(0)));
    }

    #[test]
    fn invalid_inputs() {
        let m = ProbabilityMap::constant(2, 2, 0.1).unwrap();
        let n = ProbabilityMap::constant(2, 3, 0.1).unwrap();
        assert!(TargetMaps::new(vec![], vec![]).is_err());
        assert!(TargetMaps::new(vec!["a".into(), "a".into()], vec![m.clone(), m.clone()]).is_err());
        assert!(TargetMaps::new(vec!["a".into(), "b".into()], vec![m.clone(), n]).is_err());
        let input = TargetMaps::new(vec!["a".into()], vec![m]).unwrap();
        assert!(select_targets(&input, -0.1).is_err());
        assert!(aggregate_labels(&input, &[3]).is_err());
    }

    #[test]
    fn iou_examples() {
        assert_eq!(box_iou(&bx(0, 0, 3, 3), &bx(0, 0, 3, 3)), 1.0);
        assert_eq!(box_iou(&bx(0, 0, 1, 1), &bx(5, 5, 6, 6)), 0.0);
        assert_eq!(box_iou(&bx(0, 0, 1, 1), &bx(1, 1, 2, 2)), 1.0 / 7.0);
        // sharing an edge column only
        assert_eq!(box_iou(&bx(0, 0, 0, 1), &bx(0, 1, 0, 2)), 1.0 / 3.0);
    }

    #[test]
    fn nms_examples() {
        let a = ScoredBox {
            bbox: bx(0, 0, 4, 4),
            score: 0.8,
            target: "a".into(),
        };
        let b = ScoredBox {
            bbox: bx(0, 0, 4, 4),
            score: 0.9,
            target: "b".into(),
        };
        assert_eq!(nms(std::slice::from_ref(&a), 0.5).unwrap(), vec![a.clone()]);
        assert_eq!(nms(&[a.clone(), b.clone()], 0.5).unwrap(), vec![b.clone()]);

        let far = ScoredBox {
            bbox: bx(10, 10, 12, 12),
            score: 0.8,
            target: "c".into(),
        };
        let kept = nms(&[a.clone(), far.clone(), b.clone()], 0.5).unwrap();
        assert_eq!(kept, vec![b, far]);

        // equal scores: the earlier box survives
        let twin = ScoredBox {
            target: "twin".into(),
            ..a.clone()
        };
        assert_eq!(nms(&[twin.clone(), a.clone()], 0.5).unwrap(), vec![twin]);
        assert!(nms(&[a], 1.5).is_err());
    }
}
