//! Pixel grids shared by every other module.
//!
//! All grids are row-major with `(row, col)` coordinates and row 0 at the
//! top. Types are immutable once built; constructors check their invariants.

use crate::error::{Error, Result};

/// Slack allowed when loading probabilities that drifted just outside [0, 1].
pub const PROBABILITY_SLACK: f64 = 1e-9;

fn check_dims(height: usize, width: usize, len: usize, what: &str) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::domain(format!(
            "{what}: dimensions must be positive, got {height}x{width}"
        )));
    }
    match height.checked_mul(width) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::domain(format!(
            "{what}: {len} values do not fill a {height}x{width} grid"
        ))),
    }
}

fn ensure_same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::domain(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// A segmented object as a boolean pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(height, width, bits.len(), "mask")?;
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![false; height.saturating_mul(width)])
    }

    /// Builds a mask with the listed `(row, col)` pixels set.
    pub fn from_pixels(height: usize, width: usize, pixels: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::empty(height, width)?;
        for &(r, c) in pixels {
            if r >= height || c >= width {
                return Err(Error::domain(format!("pixel ({r},{c}) outside {height}x{width} mask")));
            }
            mask.bits[r * width + c] = true;
        }
        Ok(mask)
    }

    /// Parses rows of `'#'`/`'1'` (set) and `'.'`/`'0'` (unset); handy in tests.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut bits = Vec::with_capacity(height * width);
        for row in rows {
            if row.chars().count() != width {
                return Err(Error::domain("ragged mask rows"));
            }
            for ch in row.chars() {
                bits.push(matches!(ch, '#' | '1'));
            }
        }
        Self::new(height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Iterates `(row, col)` of set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / w, i % w))
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize> {
        ensure_same_shape(self.dims(), other.dims())?;
        Ok(self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a && b).count())
    }
}

/// Per-pixel probabilities in [0, 1], stored as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ProbabilityMap {
    /// Strict constructor: every value must be finite and inside [0, 1].
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        check_dims(height, width, values.len(), "probability map")?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::domain(format!(
                "probability map value {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self { height, width, values })
    }

    /// Like [`ProbabilityMap::new`] but takes f64 input, rounding to f32.
    pub fn from_f64(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(height, width, values.iter().map(|&v| v as f32).collect())
    }

    /// A map filled with one value.
    pub fn constant(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height.saturating_mul(width)])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        f64::from(self.values[row * self.width + col])
    }

    pub fn to_grid(&self) -> RealGrid {
        RealGrid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// An 8-bit color image. Grayscale sources are stored replicated across the
/// three channels and flagged, so callers can decide how to treat them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    red: Vec<u8>,
    green: Vec<u8>,
    blue: Vec<u8>,
    grayscale: bool,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, red: Vec<u8>, green: Vec<u8>, blue: Vec<u8>) -> Result<Self> {
        check_dims(height, width, red.len(), "image red channel")?;
        check_dims(height, width, green.len(), "image green channel")?;
        check_dims(height, width, blue.len(), "image blue channel")?;
        Ok(Self {
            height,
            width,
            red,
            green,
            blue,
            grayscale: false,
        })
    }

    pub fn from_gray(height: usize, width: usize, gray: Vec<u8>) -> Result<Self> {
        check_dims(height, width, gray.len(), "grayscale image")?;
        Ok(Self {
            height,
            width,
            red: gray.clone(),
            green: gray.clone(),
            blue: gray,
            grayscale: true,
        })
    }

    pub fn constant(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self> {
        let n = height.saturating_mul(width);
        Self::new(height, width, vec![rgb[0]; n], vec![rgb[1]; n], vec![rgb[2]; n])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn is_grayscale(&self) -> bool {
        self.grayscale
    }

    pub fn channels(&self) -> [&[u8]; 3] {
        [&self.red, &self.green, &self.blue]
    }
}

/// Index of a target inside the ordered target list of a recognition run.
pub type TargetIndex = u16;

/// Per-pixel target assignment; `None` is blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<Option<TargetIndex>>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<Option<TargetIndex>>) -> Result<Self> {
        check_dims(height, width, labels.len(), "label map")?;
        Ok(Self { height, width, labels })
    }

    pub fn blank(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![None; height.saturating_mul(width)])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[Option<TargetIndex>] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Option<TargetIndex> {
        self.labels[row * self.width + col]
    }

    /// Pixels carrying `target`, as a mask.
    pub fn mask_of(&self, target: TargetIndex) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.labels.iter().map(|&l| l == Some(target)).collect(),
        }
    }
}

/// Unconstrained real-valued grid, used for shape accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl RealGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len(), "grid")?;
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height.saturating_mul(width)])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max_abs_diff(&self, other: &RealGrid) -> Result<f64> {
        ensure_same_shape(self.dims(), other.dims())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Converts to a probability map, clamping into [0, 1].
    pub fn to_probability_map(&self) -> Result<ProbabilityMap> {
        ProbabilityMap::new(
            self.height,
            self.width,
            self.values.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect(),
        )
    }
}

impl From<&ProbabilityMap> for RealGrid {
    fn from(map: &ProbabilityMap) -> Self {
        map.to_grid()
    }
}

/// Pixels whose probability is strictly greater than `threshold`.
pub fn binarize(map: &ProbabilityMap, threshold: f64) -> BinaryMask {
    BinaryMask {
        height: map.height,
        width: map.width,
        bits: map.values.iter().map(|&v| f64::from(v) > threshold).collect(),
    }
}

/// Mean probability over the set pixels of `mask`.
pub fn mask_mean(map: &ProbabilityMap, mask: &BinaryMask) -> Result<f64> {
    ensure_same_shape(map.dims(), mask.dims())?;
    masked_mean(mask, |i| f64::from(map.values[i]))
}

/// Mean of `value(i)` over set pixel indices of `mask`.
pub(crate) fn masked_mean(mask: &BinaryMask, value: impl Fn(usize) -> f64) -> Result<f64> {
    let (sum, count) = mask
        .bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold((0.0, 0usize), |(s, n), (i, _)| (s + value(i), n + 1));
    if count == 0 {
        return Err(Error::domain("empty region"));
    }
    Ok(sum / count as f64)
}

pub(crate) fn same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    ensure_same_shape(a, b)
}
