//! Canonical shape maps from many probability maps of one object type.
//!
//! Maps are folded in input order: each new map is translated to the integer
//! shift that maximizes its raw cross-correlation with the running sum, added,
//! and the sum is divided by the count at the end. Content shifted past the
//! frame edge is lost (zero padding).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{same_shape, RealGrid};
use crate::registry::{Named, Registry};

/// Integer translation; applying it moves content by `(d_row, d_col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Shift {
    pub d_row: i64,
    pub d_col: i64,
}

impl Shift {
    pub const ZERO: Shift = Shift { d_row: 0, d_col: 0 };

    pub fn new(d_row: i64, d_col: i64) -> Self {
        Self { d_row, d_col }
    }

    pub fn inverse(self) -> Self {
        Self::new(-self.d_row, -self.d_col)
    }

    fn norm2(self) -> i64 {
        self.d_row * self.d_row + self.d_col * self.d_col
    }

    fn check(self, dims: (usize, usize)) -> Result<()> {
        let (h, w) = (dims.0 as i64, dims.1 as i64);
        if self.d_row.abs() >= h || self.d_col.abs() >= w {
            return Err(Error::domain(format!(
                "shift ({}, {}) out of range for {h}x{w} grid",
                self.d_row, self.d_col
            )));
        }
        Ok(())
    }
}

/// A scored shift; `better_than` is the total order used to pick the argmax:
/// higher score, then smaller squared norm, then lexicographically smaller.
#[derive(Debug, Clone, Copy)]
struct Scored {
    shift: Shift,
    score: f64,
}

impl Scored {
    fn better_than(&self, other: &Scored) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        let (a, b) = (self.shift.norm2(), other.shift.norm2());
        if a != b {
            return a < b;
        }
        (self.shift.d_row, self.shift.d_col) < (other.shift.d_row, other.shift.d_col)
    }

    fn best(a: Scored, b: Scored) -> Scored {
        if b.better_than(&a) {
            b
        } else {
            a
        }
    }
}

/// Inclusive row/col bounds of the nonzero entries.
#[derive(Debug, Clone, Copy)]
struct Support {
    r0: i64,
    r1: i64,
    c0: i64,
    c1: i64,
}

fn support(grid: &RealGrid) -> Option<Support> {
    let w = grid.width();
    let mut s: Option<Support> = None;
    for (i, &v) in grid.values().iter().enumerate() {
        if v != 0.0 {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            s = Some(match s {
                None => Support {
                    r0: r,
                    r1: r,
                    c0: c,
                    c1: c,
                },
                Some(s) => Support {
                    r0: s.r0.min(r),
                    r1: s.r1.max(r),
                    c0: s.c0.min(c),
                    c1: s.c1.max(c),
                },
            });
        }
    }
    s
}

fn check_nonnegative(grid: &RealGrid, what: &str) -> Result<()> {
    if let Some(v) = grid.values().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::domain(format!("{what} contains invalid value {v}")));
    }
    Ok(())
}

/// `sum_x reference(x) * candidate(x - shift)`, skipping terms where either
/// support is known to be zero. The remaining terms are added in row-major
/// order, so the value is bit-identical to the plain full-frame sum.
fn correlation_at(
    reference: &RealGrid,
    candidate: &RealGrid,
    ref_sup: Support,
    cand_sup: Support,
    shift: Shift,
) -> Option<f64> {
    let r0 = ref_sup.r0.max(cand_sup.r0 + shift.d_row);
    let r1 = ref_sup.r1.min(cand_sup.r1 + shift.d_row);
    let c0 = ref_sup.c0.max(cand_sup.c0 + shift.d_col);
    let c1 = ref_sup.c1.min(cand_sup.c1 + shift.d_col);
    if r0 > r1 || c0 > c1 {
        return None;
    }
    let w = reference.width() as i64;
    let (rv, cv) = (reference.values(), candidate.values());
    let mut sum = 0.0;
    for r in r0..=r1 {
        let ref_row = (r * w) as usize;
        let cand_row = ((r - shift.d_row) * w) as usize;
        for c in c0..=c1 {
            sum += rv[ref_row + c as usize] * cv[cand_row + (c - shift.d_col) as usize];
        }
    }
    Some(sum)
}

/// Best shift among `rows x cols`, searched in parallel over rows.
fn search_window(
    reference: &RealGrid,
    candidate: &RealGrid,
    rows: std::ops::RangeInclusive<i64>,
    cols: std::ops::RangeInclusive<i64>,
) -> Shift {
    let (Some(ref_sup), Some(cand_sup)) = (support(reference), support(candidate)) else {
        return Shift::ZERO;
    };
    let best = rows
        .into_par_iter()
        .filter_map(|d_row| {
            cols.clone()
                .filter_map(|d_col| {
                    let shift = Shift::new(d_row, d_col);
                    correlation_at(reference, candidate, ref_sup, cand_sup, shift).map(|score| Scored { shift, score })
                })
                .reduce(Scored::best)
        })
        .reduce_with(Scored::best);
    match best {
        // With nonnegative grids a zero maximum is also attained at the
        // zero shift, which wins the tie on norm.
        Some(s) if s.score > 0.0 => s.shift,
        _ => Shift::ZERO,
    }
}

fn full_range(n: usize) -> std::ops::RangeInclusive<i64> {
    let n = n as i64;
    -(n - 1)..=(n - 1)
}

/// Exhaustive integer-shift cross-correlation argmax.
///
/// Maximizes `sum_x reference(x) * candidate(x - s)` over every `|d_row| < H`,
/// `|d_col| < W`; ties go to the smallest `|s|`, then the lexicographically
/// smallest `(d_row, d_col)`. An all-zero input yields the zero shift.
pub fn cross_correlate_argmax(reference: &RealGrid, candidate: &RealGrid) -> Result<Shift> {
    same_shape(reference.dims(), candidate.dims())?;
    check_nonnegative(reference, "reference")?;
    check_nonnegative(candidate, "candidate")?;
    Ok(search_window(
        reference,
        candidate,
        full_range(reference.height()),
        full_range(reference.width()),
    ))
}

/// Translates `map` by `shift`: `out(r, c) = map(r - d_row, c - d_col)`,
/// zero where the source falls outside the frame.
pub fn shift_map(map: &RealGrid, shift: Shift) -> Result<RealGrid> {
    shift.check(map.dims())?;
    let (h, w) = (map.height() as i64, map.width() as i64);
    let mut out = RealGrid::zeros(map.height(), map.width())?;
    let dst = out.values_mut();
    for r in 0.max(shift.d_row)..h.min(h + shift.d_row) {
        let sr = r - shift.d_row;
        let c0 = 0.max(shift.d_col);
        let c1 = w.min(w + shift.d_col);
        let (d, s) = ((r * w) as usize, (sr * w) as usize);
        dst[d + c0 as usize..d + c1 as usize]
            .copy_from_slice(&map.values()[s + (c0 - shift.d_col) as usize..s + (c1 - shift.d_col) as usize]);
    }
    Ok(out)
}

/// Strategy for aligning a candidate map to a reference.
pub trait ShiftSearch: Named + Send + Sync {
    fn find_shift(&self, reference: &RealGrid, candidate: &RealGrid) -> Result<Shift>;
}

/// Full search over every admissible shift; the reference behaviour.
pub struct ExhaustiveSearch;

impl Named for ExhaustiveSearch {
    fn name(&self) -> &'static str {
        "exhaustive"
    }
}

impl ShiftSearch for ExhaustiveSearch {
    fn find_shift(&self, reference: &RealGrid, candidate: &RealGrid) -> Result<Shift> {
        cross_correlate_argmax(reference, candidate)
    }
}

/// Coarse-to-fine search: exhaustive on a 2x-downsampled pyramid top, then a
/// `±radius` refinement per level. Faster on large grids, but may miss the
/// global optimum when the correlation surface has competing peaks.
pub struct PyramidSearch {
    /// Grids whose larger side is at most this are searched exhaustively.
    pub base_size: usize,
    pub radius: i64,
}

impl Default for PyramidSearch {
    fn default() -> Self {
        Self {
            base_size: 32,
            radius: 2,
        }
    }
}

fn downsample(grid: &RealGrid) -> RealGrid {
    let (h, w) = grid.dims();
    let (nh, nw) = (h.div_ceil(2), w.div_ceil(2));
    let mut values = vec![0.0; nh * nw];
    for r in 0..h {
        for c in 0..w {
            values[(r / 2) * nw + c / 2] += 0.25 * grid.get(r, c);
        }
    }
    RealGrid::new(nh, nw, values).expect("downsampled dims are consistent")
}

impl Named for PyramidSearch {
    fn name(&self) -> &'static str {
        "pyramid"
    }
}

impl PyramidSearch {
    fn search(&self, reference: &RealGrid, candidate: &RealGrid) -> Shift {
        let (h, w) = reference.dims();
        if h.max(w) <= self.base_size.max(1) || h < 2 || w < 2 {
            return search_window(reference, candidate, full_range(h), full_range(w));
        }
        let coarse = self.search(&downsample(reference), &downsample(candidate));
        let clamp = |center: i64, n: usize| {
            let lim = n as i64 - 1;
            (center - self.radius).max(-lim)..=(center + self.radius).min(lim)
        };
        search_window(
            reference,
            candidate,
            clamp(2 * coarse.d_row, h),
            clamp(2 * coarse.d_col, w),
        )
    }
}

impl ShiftSearch for PyramidSearch {
    fn find_shift(&self, reference: &RealGrid, candidate: &RealGrid) -> Result<Shift> {
        same_shape(reference.dims(), candidate.dims())?;
        check_nonnegative(reference, "reference")?;
        check_nonnegative(candidate, "candidate")?;
        Ok(self.search(reference, candidate))
    }
}

pub type ShiftSearchRegistry = Registry<dyn ShiftSearch>;

/// Registry with `exhaustive` (first, the default) and `pyramid`.
pub fn default_shift_searches() -> ShiftSearchRegistry {
    let mut reg = ShiftSearchRegistry::new("alignment strategy");
    reg.register(Box::new(ExhaustiveSearch))
        .register(Box::new(PyramidSearch::default()));
    reg
}

fn check_probability_grid(grid: &RealGrid, index: usize) -> Result<()> {
    if let Some(v) = grid
        .values()
        .iter()
        .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        return Err(Error::domain(format!("map {index} has value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Running sum of aligned maps.
#[derive(Debug, Clone)]
pub struct ShapeAccumulator {
    sum: RealGrid,
    count: usize,
    shifts: Vec<Shift>,
}

impl ShapeAccumulator {
    pub fn new(first: &RealGrid) -> Result<Self> {
        check_probability_grid(first, 0)?;
        Ok(Self {
            sum: first.clone(),
            count: 1,
            shifts: vec![Shift::ZERO],
        })
    }

    /// Aligns `map` to the running sum and adds it; returns the shift used.
    pub fn fold(&mut self, map: &RealGrid, search: &dyn ShiftSearch) -> Result<Shift> {
        same_shape(self.sum.dims(), map.dims())?;
        check_probability_grid(map, self.count)?;
        let shift = search.find_shift(&self.sum, map)?;
        let aligned = shift_map(map, shift)?;
        for (s, a) in self.sum.values_mut().iter_mut().zip(aligned.values()) {
            *s += a;
        }
        self.count += 1;
        self.shifts.push(shift);
        Ok(shift)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Shift applied to each folded map, in fold order (the first is zero).
    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn sum(&self) -> &RealGrid {
        &self.sum
    }

    /// The normalized shape map, `sum / count`.
    pub fn finish(&self) -> RealGrid {
        let n = self.count as f64;
        let values = self.sum.values().iter().map(|v| v / n).collect();
        RealGrid::new(self.sum.height(), self.sum.width(), values).expect("accumulator dims are consistent")
    }
}

/// Ensembles maps with an explicit alignment strategy.
pub fn ensemble_shapes_with(maps: &[RealGrid], search: &dyn ShiftSearch) -> Result<ShapeAccumulator> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| Error::domain("shape ensemble needs at least one map"))?;
    let mut acc = ShapeAccumulator::new(first)?;
    for map in rest {
        acc.fold(map, search)?;
    }
    Ok(acc)
}

/// Ensembles maps with exhaustive alignment.
pub fn ensemble_shapes(maps: &[RealGrid]) -> Result<RealGrid> {
    Ok(ensemble_shapes_with(maps, &ExhaustiveSearch)?.finish())
}

/// Unshifted elementwise mean, used to pre-aggregate the slices of a volume.
pub fn ensemble_volume(slices: &[RealGrid]) -> Result<RealGrid> {
    let first = slices
        .first()
        .ok_or_else(|| Error::domain("volume needs at least one slice"))?;
    let mut sum = vec![0.0; first.values().len()];
    for (i, slice) in slices.iter().enumerate() {
        same_shape(first.dims(), slice.dims())?;
        check_probability_grid(slice, i)?;
        for (s, v) in sum.iter_mut().zip(slice.values()) {
            *s += v;
        }
    }
    let n = slices.len() as f64;
    RealGrid::new(first.height(), first.width(), sum.into_iter().map(|s| s / n).collect())
}
