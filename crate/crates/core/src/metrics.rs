//! Evaluation statistics: overlap, identification, ranking and significance.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{same_shape, BinaryMask};

/// `2|A ∩ B| / (|A| + |B|)`; two empty masks agree perfectly (1.0).
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    same_shape(a.dims(), b.dims())?;
    let inter = a.intersection_area(b)?;
    let total = a.area() + b.area();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Dice averaged with weights equal to the gold area.
pub fn weighted_dice<'a>(pairs: impl IntoIterator<Item = (&'a BinaryMask, &'a BinaryMask)>) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut seen = false;
    for (pred, gold) in pairs {
        seen = true;
        let w = gold.area() as f64;
        let d = dice(pred, gold)?;
        if w > 0.0 {
            num += w * d;
            den += w;
        }
    }
    if !seen {
        return Err(Error::domain("weighted Dice needs at least one pair"));
    }
    if den == 0.0 {
        return Err(Error::domain("all gold masks are empty; weights sum to zero"));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Undefined ratios are reported as 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identification {
    /// Pooled over every (image, object type) decision.
    pub micro: Prf,
    /// Mean of per-image scores.
    #[serde(rename = "macro")]
    pub macro_: Prf,
    /// `tn` counts types absent from both sets, over the union of all types seen.
    pub counts: ConfusionCounts,
    pub per_image: Vec<Prf>,
}

/// Precision, recall and F1 of predicted object types against gold, per image.
///
/// An image with no predicted and no gold types scores 1 on its own
/// (macro) row; it contributes nothing to the micro counts.
pub fn identification_prf(predicted: &[BTreeSet<String>], gold: &[BTreeSet<String>]) -> Result<Identification> {
    if predicted.len() != gold.len() {
        return Err(Error::domain(format!(
            "{} predicted images vs {} gold images",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::domain("identification needs at least one image"));
    }
    let universe: BTreeSet<&String> = predicted.iter().chain(gold).flatten().collect();
    let mut counts = ConfusionCounts::default();
    let mut per_image = Vec::with_capacity(gold.len());
    for (p, g) in predicted.iter().zip(gold) {
        let tp = p.intersection(g).count() as u64;
        let fp = p.len() as u64 - tp;
        let fn_ = g.len() as u64 - tp;
        counts.tp += tp;
        counts.fp += fp;
        counts.fn_ += fn_;
        counts.tn += universe.len() as u64 - (tp + fp + fn_);
        per_image.push(if p.is_empty() && g.is_empty() {
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            }
        } else {
            Prf::from_counts(tp, fp, fn_)
        });
    }
    let n = per_image.len() as f64;
    let mean = |f: fn(&Prf) -> f64| per_image.iter().map(f).sum::<f64>() / n;
    Ok(Identification {
        micro: Prf::from_counts(counts.tp, counts.fp, counts.fn_),
        macro_: Prf {
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
        },
        counts,
        per_image,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} contains non-finite value {v}")));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney statistic with midranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    check_finite(scores, "scores")?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("AUROC needs both positive and negative labels"));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    let pairs = p * n;
    // Evaluating the upper half as 1 - (pairs - u) / pairs makes flipping
    // the labels give exactly 1 - auroc.
    if 2.0 * u <= pairs {
        Ok(u / pairs)
    } else {
        Ok(1.0 - (pairs - u) / pairs)
    }
}

/// Index-aligned paired scores, e.g. two methods on the same test cases.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl PairedSamples {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::domain(format!(
                "paired samples differ in length: {} vs {}",
                first.len(),
                second.len()
            )));
        }
        if first.is_empty() {
            return Err(Error::domain("paired samples are empty"));
        }
        check_finite(&first, "first sample")?;
        check_finite(&second, "second sample")?;
        Ok(Self { first, second })
    }

    pub fn differences(&self) -> Vec<f64> {
        self.first.iter().zip(&self.second).map(|(a, b)| a - b).collect()
    }
}

/// Largest sample size for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilcoxonTest {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Number of sign assignments reaching each doubled positive-rank sum.
/// Doubling makes midranks integral.
fn signed_rank_null_counts(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Two-sided Wilcoxon signed-rank test.
///
/// Zero differences are dropped and tied magnitudes share midranks. Up to
/// [`WILCOXON_EXACT_MAX_N`] pairs the p-value comes from the exact null
/// distribution of all sign patterns; above that from the normal
/// approximation with tie-corrected variance and 0.5 continuity correction.
pub fn wilcoxon_signed_rank(pairs: &PairedSamples) -> Result<WilcoxonTest> {
    let diffs: Vec<f64> = pairs.differences().into_iter().filter(|&d| d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::domain("all paired differences are zero"));
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&magnitudes);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();

    if n <= WILCOXON_EXACT_MAX_N {
        let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
        let counts = signed_rank_null_counts(&doubled);
        let observed = (2.0 * w_plus).round() as usize;
        let total = 2f64.powi(n as i32);
        let lower: f64 = counts[..=observed].iter().sum::<f64>() / total;
        let upper: f64 = counts[observed..].iter().sum::<f64>() / total;
        return Ok(WilcoxonTest {
            w_plus,
            n,
            p_value: (2.0 * lower.min(upper)).min(1.0),
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_group_sizes(&magnitudes)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(WilcoxonTest {
        w_plus,
        n,
        p_value: libm::erfc(z / std::f64::consts::SQRT_2).min(1.0),
        method: WilcoxonMethod::Normal,
    })
}

fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters score 0.
pub fn silhouette<L: Ord>(points: &[Vec<f64>], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} points vs {} labels",
            points.len(),
            labels.len()
        )));
    }
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::domain("silhouette needs non-empty points"));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::domain("points differ in dimension"));
        }
        check_finite(p, "point")?;
    }
    let mut clusters: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        clusters.entry(l).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(Error::domain("silhouette needs at least two clusters"));
    }
    let members: Vec<&Vec<usize>> = clusters.values().collect();
    let cluster_of: Vec<usize> = {
        let mut c = vec![0; points.len()];
        for (ci, idx) in members.iter().enumerate() {
            for &i in idx.iter() {
                c[i] = ci;
            }
        }
        c
    };

    let total: f64 = (0..points.len())
        .map(|i| {
            let own = members[cluster_of[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let mean_to = |idx: &[usize]| {
                idx.iter()
                    .filter(|&&j| j != i)
                    .map(|&j| euclidean(&points[i], &points[j]))
                    .sum::<f64>()
            };
            let a = mean_to(own) / (own.len() - 1) as f64;
            let b = members
                .iter()
                .enumerate()
                .filter(|&(ci, _)| ci != cluster_of[i])
                .map(|(_, idx)| mean_to(idx) / idx.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .sum();
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub n: usize,
}

/// Median (mean of the middle pair for even n) and mean.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::domain("cannot summarize an empty list"));
    }
    check_finite(values, "values")?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(Summary {
        median,
        mean: values.iter().sum::<f64>() / n as f64,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dice_examples() {
        let a = BinaryMask::from_rows(&["##..", "...."]).unwrap();
        let b = BinaryMask::from_rows(&[".##.", "...."]).unwrap();
        let c = BinaryMask::from_rows(&["....", "..##"]).unwrap();
        let empty = BinaryMask::empty(2, 4).unwrap();
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&a, &empty).unwrap(), 0.0);
        assert!(dice(&a, &BinaryMask::empty(4, 2).unwrap()).is_err());
    }

    #[test]
    fn weighted_dice_examples() {
        let full10 = BinaryMask::new(1, 10, vec![true; 10]).unwrap();
        let gold30 = BinaryMask::new(1, 30, vec![true; 30]).unwrap();
        // dice 0.5 against 30 gold pixels: 10 predicted pixels, all inside
        let mut bits = vec![false; 30];
        bits[..10].fill(true);
        let pred30 = BinaryMask::new(1, 30, bits).unwrap();
        assert_eq!(dice(&pred30, &gold30).unwrap(), 0.5);
        let wd = weighted_dice([(&full10, &full10), (&pred30, &gold30)]).unwrap();
        assert_relative_eq!(wd, 0.625);
        assert_eq!(weighted_dice([(&pred30, &gold30)]).unwrap(), 0.5);

        let empty = BinaryMask::empty(1, 10).unwrap();
        assert!(weighted_dice([(&full10, &empty)]).is_err());
        assert!(weighted_dice(std::iter::empty()).is_err());
    }

    #[test]
    fn identification_examples() {
        let perfect = identification_prf(&[set(&["a", "b"])], &[set(&["a", "b"])]).unwrap();
        assert_eq!(
            (perfect.micro.precision, perfect.micro.recall, perfect.micro.f1),
            (1.0, 1.0, 1.0)
        );

        let none = identification_prf(&[set(&[])], &[set(&["a"])]).unwrap();
        assert_eq!(
            (none.micro.precision, none.micro.recall, none.micro.f1),
            (0.0, 0.0, 0.0)
        );

        let half = identification_prf(&[set(&["a", "b"])], &[set(&["a", "c"])]).unwrap();
        assert_eq!(
            half.counts,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 0
            }
        );
        assert_eq!(
            (half.micro.precision, half.micro.recall, half.micro.f1),
            (0.5, 0.5, 0.5)
        );

        assert!(identification_prf(&[set(&[])], &[]).is_err());
    }

    #[test]
    fn identification_micro_vs_macro() {
        let pred = [set(&["a"]), set(&["a", "b", "c"]), set(&[])];
        let gold = [set(&["a"]), set(&["a"]), set(&[])];
        let r = identification_prf(&pred, &gold).unwrap();
        assert_relative_eq!(r.micro.precision, 0.5);
        assert_relative_eq!(r.micro.recall, 1.0);
        assert_relative_eq!(r.macro_.precision, (1.0 + 1.0 / 3.0 + 1.0) / 3.0);
        // universe {a, b, c}: tn is 2 for image 1, 0 for image 2, 3 for image 3
        assert_eq!(r.counts.tn, 5);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
        // two of the four positive/negative pairs are inverted
        assert_eq!(auroc(&[0.3, 0.2, 0.8, 0.1], &[false, false, true, true]).unwrap(), 0.5);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wilcoxon_examples() {
        let one = PairedSamples::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(wilcoxon_signed_rank(&one).unwrap().p_value, 1.0);

        let sym = PairedSamples::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let t = wilcoxon_signed_rank(&sym).unwrap();
        assert_eq!((t.w_plus, t.p_value), (1.5, 1.0));

        let zeros = PairedSamples::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(wilcoxon_signed_rank(&zeros).is_err());
    }

    #[test]
    fn wilcoxon_exact_reference() {
        // Six positive differences of distinct size: p = 2 / 2^6.
        let pairs = PairedSamples::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.0; 6]).unwrap();
        let t = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(t.method, WilcoxonMethod::Exact);
        assert_eq!(t.w_plus, 21.0);
        assert_relative_eq!(t.p_value, 2.0 / 64.0);
    }

    #[test]
    fn wilcoxon_normal_path() {
        // 25 positive, distinct differences: W+ = 325, mu = 162.5, var = 1381.25
        let first: Vec<f64> = (1..=25).map(f64::from).collect();
        let pairs = PairedSamples::new(first, vec![0.0; 25]).unwrap();
        let t = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(t.method, WilcoxonMethod::Normal);
        let z = (325.0 - 162.5 - 0.5) / 1381.25f64.sqrt();
        assert_relative_eq!(t.p_value, libm::erfc(z / 2f64.sqrt()), max_relative = 1e-14);
        assert!(t.p_value < 1e-4);
    }

    #[test]
    fn silhouette_examples() {
        let points: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
        let s = silhouette(&points, &[0, 0, 1, 1]).unwrap();
        let expected = (2.0 * (1.0 - 1.0 / 10.5) + 2.0 * (1.0 - 1.0 / 9.5)) / 4.0;
        assert_relative_eq!(s, expected, epsilon = 1e-15);
        assert_relative_eq!(s, 0.900, epsilon = 1e-3);

        let same: Vec<Vec<f64>> = vec![vec![2.0, 2.0]; 4];
        assert_eq!(silhouette(&same, &["x", "x", "y", "y"]).unwrap(), 0.0);

        assert!(silhouette(&points, &[0, 0, 0, 0]).is_err());
        // singleton cluster scores zero
        let s = silhouette(&points[..3], &[0, 0, 1]).unwrap();
        assert_relative_eq!(s, (1.0 - 1.0 / 10.0 + 1.0 - 1.0 / 9.0) / 3.0);
    }

    #[test]
    fn summary_median_and_mean() {
        let s = summarize(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.median, s.mean, s.n), (2.5, 4.0, 4));
        assert!(summarize(&[]).is_err());
    }
}
