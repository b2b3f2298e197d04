//! Shape-regularity metrics for binary masks.
//!
//! Pixels are modelled as unit squares: pixel `(r, c)` covers
//! `[c, c+1] x [r, r+1]`. The convex hull is taken over the corners of the
//! set squares, and the rotational inertia includes the 1/6 second moment of
//! each square about its own center, so a single pixel has finite inertia and
//! every mask scores in (0, 1].

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BinaryMask;
use crate::registry::{Named, Registry};

/// Inclusive pixel-index bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BoundingBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BoundingBox {
    pub fn new(min_row: usize, min_col: usize, max_row: usize, max_col: usize) -> Result<Self> {
        if min_row > max_row || min_col > max_col {
            return Err(Error::domain(format!(
                "invalid box ({min_row},{min_col},{max_row},{max_col})"
            )));
        }
        Ok(Self {
            min_row,
            min_col,
            max_row,
            max_col,
        })
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeMetrics {
    pub box_ratio: f64,
    pub convex_ratio: f64,
    pub iri: f64,
}

fn require_nonempty(mask: &BinaryMask) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::domain("empty mask"));
    }
    Ok(())
}

pub fn tight_bbox(mask: &BinaryMask) -> Result<BoundingBox> {
    require_nonempty(mask)?;
    let mut bbox = BoundingBox {
        min_row: usize::MAX,
        min_col: usize::MAX,
        max_row: 0,
        max_col: 0,
    };
    for (r, c) in mask.pixels() {
        bbox.min_row = bbox.min_row.min(r);
        bbox.min_col = bbox.min_col.min(c);
        bbox.max_row = bbox.max_row.max(r);
        bbox.max_col = bbox.max_col.max(c);
    }
    Ok(bbox)
}

pub fn box_ratio(mask: &BinaryMask) -> Result<f64> {
    let bbox = tight_bbox(mask)?;
    Ok(mask.area() as f64 / bbox.area() as f64)
}

type Point = (i64, i64);

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear points.
fn monotone_chain(mut points: Vec<Point>) -> Vec<Point> {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * points.len());
    for &p in &points {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Twice the signed shoelace area of a closed polygon.
fn shoelace_twice(polygon: &[Point]) -> i64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = polygon[i];
            let (x1, y1) = polygon[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum()
}

/// Corner points of the leftmost and rightmost set pixel in every row; the
/// hull of these equals the hull of all set pixel squares.
fn extreme_corners(mask: &BinaryMask) -> Vec<Point> {
    let mut points = Vec::new();
    for r in 0..mask.height() {
        let row = &mask.bits()[r * mask.width()..(r + 1) * mask.width()];
        let (Some(first), Some(last)) = (row.iter().position(|&b| b), row.iter().rposition(|&b| b)) else {
            continue;
        };
        let (y0, y1) = (r as i64, r as i64 + 1);
        let (x0, x1) = (first as i64, last as i64 + 1);
        points.extend_from_slice(&[(x0, y0), (x0, y1), (x1, y0), (x1, y1)]);
    }
    points
}

/// Area of the convex hull of the set pixel squares, in pixel units.
pub fn convex_hull_area(mask: &BinaryMask) -> Result<f64> {
    require_nonempty(mask)?;
    let hull = monotone_chain(extreme_corners(mask));
    Ok(shoelace_twice(&hull).abs() as f64 / 2.0)
}

pub fn convex_ratio(mask: &BinaryMask) -> Result<f64> {
    let hull_area = convex_hull_area(mask)?;
    Ok(mask.area() as f64 / hull_area)
}

/// Inverse rotational inertia, `|M|^2 / (2 pi RI)`.
///
/// With pixel-center coordinates `x`, `n * sum |x - c|^2 = n * sum |x|^2 - |sum x|^2`
/// is an exact integer, so the result is bit-identical under translation and
/// 90 degree rotation.
pub fn iri(mask: &BinaryMask) -> Result<f64> {
    require_nonempty(mask)?;
    let (mut n, mut sum_r, mut sum_c, mut sum_sq) = (0u128, 0u128, 0u128, 0u128);
    for (r, c) in mask.pixels() {
        let (r, c) = (r as u128, c as u128);
        n += 1;
        sum_r += r;
        sum_c += c;
        sum_sq += r * r + c * c;
    }
    let spread = n * sum_sq - sum_r * sum_r - sum_c * sum_c;
    // RI = spread / n + n / 6, so IRI = 3 n^3 / (pi (6 spread + n^2)).
    let n_f = n as f64;
    let denom = (6 * spread + n * n) as f64;
    Ok(3.0 * n_f * n_f * n_f / (PI * denom))
}

pub fn shape_metrics(mask: &BinaryMask) -> Result<ShapeMetrics> {
    Ok(ShapeMetrics {
        box_ratio: box_ratio(mask)?,
        convex_ratio: convex_ratio(mask)?,
        iri: iri(mask)?,
    })
}

/// A scalar irregularity score computed from a mask.
pub trait ShapeMetric: Named + Send + Sync {
    fn compute(&self, mask: &BinaryMask) -> Result<f64>;
}

pub struct BoxRatio;
pub struct ConvexRatio;
pub struct InverseRotationalInertia;

impl Named for BoxRatio {
    fn name(&self) -> &'static str {
        "box_ratio"
    }
}

impl ShapeMetric for BoxRatio {
    fn compute(&self, mask: &BinaryMask) -> Result<f64> {
        box_ratio(mask)
    }
}

impl Named for ConvexRatio {
    fn name(&self) -> &'static str {
        "convex_ratio"
    }
}

impl ShapeMetric for ConvexRatio {
    fn compute(&self, mask: &BinaryMask) -> Result<f64> {
        convex_ratio(mask)
    }
}

impl Named for InverseRotationalInertia {
    fn name(&self) -> &'static str {
        "iri"
    }
}

impl ShapeMetric for InverseRotationalInertia {
    fn compute(&self, mask: &BinaryMask) -> Result<f64> {
        iri(mask)
    }
}

pub type ShapeMetricRegistry = Registry<dyn ShapeMetric>;

/// Registry holding `box_ratio`, `convex_ratio` and `iri`.
pub fn default_shape_metrics() -> ShapeMetricRegistry {
    let mut reg = ShapeMetricRegistry::new("shape metric");
    reg.register(Box::new(BoxRatio))
        .register(Box::new(ConvexRatio))
        .register(Box::new(InverseRotationalInertia));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn l_shape() -> BinaryMask {
        BinaryMask::from_pixels(2, 2, &[(0, 0), (0, 1), (1, 0)]).unwrap()
    }

    fn plus_sign() -> BinaryMask {
        BinaryMask::from_rows(&[".#.", "###", ".#."]).unwrap()
    }

    #[test]
    fn tight_bbox_examples() {
        let single = BinaryMask::from_pixels(8, 8, &[(3, 5)]).unwrap();
        assert_eq!(tight_bbox(&single).unwrap(), BoundingBox::new(3, 5, 3, 5).unwrap());

        let full = BinaryMask::new(4, 7, vec![true; 28]).unwrap();
        assert_eq!(tight_bbox(&full).unwrap(), BoundingBox::new(0, 0, 3, 6).unwrap());

        let two = BinaryMask::from_pixels(6, 6, &[(1, 1), (4, 2)]).unwrap();
        assert_eq!(tight_bbox(&two).unwrap(), BoundingBox::new(1, 1, 4, 2).unwrap());
    }

    #[test]
    fn empty_mask_is_a_domain_error() {
        let empty = BinaryMask::empty(3, 3).unwrap();
        assert!(tight_bbox(&empty).is_err());
        assert!(box_ratio(&empty).is_err());
        assert!(convex_hull_area(&empty).is_err());
        assert!(convex_ratio(&empty).is_err());
        assert!(iri(&empty).is_err());
    }

    #[test]
    fn box_ratio_examples() {
        let square = BinaryMask::new(10, 10, vec![true; 100]).unwrap();
        assert_eq!(box_ratio(&square).unwrap(), 1.0);
        assert_eq!(box_ratio(&l_shape()).unwrap(), 0.75);
    }

    #[test]
    fn hull_area_examples() {
        let single = BinaryMask::from_pixels(1, 1, &[(0, 0)]).unwrap();
        assert_eq!(convex_hull_area(&single).unwrap(), 1.0);
        let rect = BinaryMask::new(3, 5, vec![true; 15]).unwrap();
        assert_eq!(convex_hull_area(&rect).unwrap(), 15.0);
        assert_eq!(convex_hull_area(&l_shape()).unwrap(), 3.5);
        assert_eq!(convex_hull_area(&plus_sign()).unwrap(), 7.0);
    }

    #[test]
    fn convex_ratio_examples() {
        let rect = BinaryMask::new(3, 5, vec![true; 15]).unwrap();
        assert_eq!(convex_ratio(&rect).unwrap(), 1.0);
        assert_relative_eq!(convex_ratio(&l_shape()).unwrap(), 3.0 / 3.5);
        assert_relative_eq!(convex_ratio(&plus_sign()).unwrap(), 5.0 / 7.0);
    }

    #[test]
    fn iri_examples() {
        let single = BinaryMask::from_pixels(1, 1, &[(0, 0)]).unwrap();
        assert_relative_eq!(iri(&single).unwrap(), 3.0 / PI, max_relative = 1e-15);

        let strip = BinaryMask::new(1, 5, vec![true; 5]).unwrap();
        assert_relative_eq!(iri(&strip).unwrap(), 30.0 / (26.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn degenerate_hulls_have_positive_area() {
        let column = BinaryMask::new(7, 1, vec![true; 7]).unwrap();
        assert_eq!(convex_hull_area(&column).unwrap(), 7.0);
        let diagonal = BinaryMask::from_pixels(3, 3, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        // hexagon: 3x3 square minus two corner triangles of area 2 each
        assert_eq!(convex_hull_area(&diagonal).unwrap(), 5.0);
    }

    #[test]
    fn registry_lists_all_metrics() {
        let reg = default_shape_metrics();
        assert_eq!(reg.names(), vec!["box_ratio", "convex_ratio", "iri"]);
        let square = BinaryMask::new(4, 4, vec![true; 16]).unwrap();
        for metric in reg.iter() {
            let v = metric.compute(&square).unwrap();
            assert!(v > 0.0 && v <= 1.0, "{} = {v}", metric.name());
        }
    }
}
