//! Region metrics: raster-sampled areas and Jaccard measure, Hausdorff distances.
//!
//! The raster routines are deliberately independent of the closed forms in
//! [`crate::loss`]: a cell counts as inside a polygon when its center passes
//! the even-odd test. Rows are stored as half-open spans of cell indices, so
//! memory and time stay linear in the resolution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{CartesianContour, Point};

/// Point spacing used when turning contours into point sets for the Hausdorff distance.
pub const HD_SPACING: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("raster resolution must be a power of two >= 64, got {0}")]
    InvalidResolution(usize),
    #[error("both polygons have zero rasterized area")]
    ZeroUnion,
    #[error("point set is empty")]
    EmptySet,
    #[error("raster bounds are empty")]
    EmptyBounds,
}

/// Cell-center occupancy of one polygon on a square-indexed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    resolution: usize,
    bounds: (Point, Point),
    /// Per row, sorted disjoint half-open column ranges of inside cells.
    rows: Vec<Vec<(usize, usize)>>,
}

impl RasterGrid {
    pub fn rasterize(
        polygon: &CartesianContour,
        resolution: usize,
        bounds: (Point, Point),
    ) -> Result<Self, MetricsError> {
        check_resolution(resolution)?;
        let (lo, hi) = bounds;
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(MetricsError::EmptyBounds);
        }
        let dx = (hi.x - lo.x) / resolution as f64;
        let dy = (hi.y - lo.y) / resolution as f64;
        let mut rows = Vec::with_capacity(resolution);
        let mut xs = Vec::new();
        for iy in 0..resolution {
            let y = lo.y + (iy as f64 + 0.5) * dy;
            xs.clear();
            for (a, b) in polygon.edges() {
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(|a, b| a.total_cmp(b));
            let mut spans = Vec::with_capacity(xs.len() / 2);
            for pair in xs.chunks_exact(2) {
                let start = first_center_at_or_after(pair[0], lo.x, dx, resolution);
                let end = first_center_at_or_after(pair[1], lo.x, dx, resolution);
                if end > start {
                    spans.push((start, end));
                }
            }
            rows.push(spans);
        }
        Ok(Self { resolution, bounds, rows })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> (Point, Point) {
        self.bounds
    }

    pub fn cell_area(&self) -> f64 {
        let (lo, hi) = self.bounds;
        (hi.x - lo.x) * (hi.y - lo.y) / (self.resolution * self.resolution) as f64
    }

    pub fn is_inside(&self, ix: usize, iy: usize) -> bool {
        self.rows[iy].iter().any(|&(s, e)| (s..e).contains(&ix))
    }

    pub fn count(&self) -> usize {
        self.rows.iter().flatten().map(|(s, e)| e - s).sum()
    }

    /// Number of cells inside both grids. Grids must share resolution and bounds.
    pub fn intersection_count(&self, other: &RasterGrid) -> usize {
        assert_eq!(self.resolution, other.resolution, "grids differ in resolution");
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| overlap(a, b))
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.cell_area()
    }
}

fn check_resolution(resolution: usize) -> Result<(), MetricsError> {
    if resolution < 64 || !resolution.is_power_of_two() {
        return Err(MetricsError::InvalidResolution(resolution));
    }
    Ok(())
}

/// Index of the first cell whose center x is `>= x`, clamped to `[0, n]`.
fn first_center_at_or_after(x: f64, x0: f64, dx: f64, n: usize) -> usize {
    let j = ((x - x0) / dx - 0.5).ceil();
    j.clamp(0.0, n as f64) as usize
}

fn overlap(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterAreas {
    pub area_a: f64,
    pub area_b: f64,
    pub intersection: f64,
    pub union: f64,
}

impl RasterAreas {
    pub fn jaccard(&self) -> Option<f64> {
        (self.union > 0.0).then(|| self.intersection / self.union)
    }
}

/// Cells of padding added on every side of the covering box.
pub const PAD_CELLS: usize = 8;

/// Square covering box of both polygons with square cells. The box starts
/// [`PAD_CELLS`] whole cells below the lowest coordinates, so edges lying on
/// the lower or left side of the bounding box fall on cell boundaries.
pub fn covering_bounds(
    a: &CartesianContour,
    b: &CartesianContour,
    resolution: usize,
) -> (Point, Point) {
    let (lo_a, hi_a) = a.bounds();
    let (lo_b, hi_b) = b.bounds();
    let lo = Point::new(lo_a.x.min(lo_b.x), lo_a.y.min(lo_b.y));
    let hi = Point::new(hi_a.x.max(hi_b.x), hi_a.y.max(hi_b.y));
    let extent = (hi.x - lo.x).max(hi.y - lo.y).max(f64::EPSILON);
    let cell = extent / (resolution - 2 * PAD_CELLS) as f64;
    let origin = Point::new(lo.x - PAD_CELLS as f64 * cell, lo.y - PAD_CELLS as f64 * cell);
    let side = cell * resolution as f64;
    (origin, Point::new(origin.x + side, origin.y + side))
}

/// Areas of `a`, `b`, their intersection and union by cell-center sampling
/// over the padded covering box of both polygons.
pub fn raster_area_ops(
    a: &CartesianContour,
    b: &CartesianContour,
    resolution: usize,
) -> Result<RasterAreas, MetricsError> {
    check_resolution(resolution)?;
    let bounds = covering_bounds(a, b, resolution);
    let ga = RasterGrid::rasterize(a, resolution, bounds)?;
    let gb = RasterGrid::rasterize(b, resolution, bounds)?;
    let cell = ga.cell_area();
    let (na, nb) = (ga.count(), gb.count());
    let ni = ga.intersection_count(&gb);
    Ok(RasterAreas {
        area_a: na as f64 * cell,
        area_b: nb as f64 * cell,
        intersection: ni as f64 * cell,
        union: (na + nb - ni) as f64 * cell,
    })
}

/// Jaccard measure of two polygons. Evaluation passes the original
/// annotation as `gt`, not its resampled chain.
pub fn global_jm(
    pred: &CartesianContour,
    gt: &CartesianContour,
    resolution: usize,
) -> Result<f64, MetricsError> {
    raster_area_ops(pred, gt, resolution)?.jaccard().ok_or(MetricsError::ZeroUnion)
}

fn directed(xs: &[Point], ys: &[Point]) -> f64 {
    xs.iter()
        .map(|x| ys.iter().map(|y| x.distance(*y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance `max(h(X,Y), h(Y,X))`.
pub fn hausdorff(xs: &[Point], ys: &[Point]) -> Result<f64, MetricsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    Ok(directed(xs, ys).max(directed(ys, xs)))
}

/// Largest distance over all cross pairs, `max_{x,y} d(x, y)`.
///
/// This is the formula as literally printed for the evaluation; it measures
/// the cross-diameter of the two sets rather than their Hausdorff distance.
pub fn hd_paper_literal(xs: &[Point], ys: &[Point]) -> Result<f64, MetricsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    Ok(xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| x.distance(*y)))
        .fold(0.0, f64::max))
}

/// Per-image metrics for both boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub id: String,
    pub jm_lumen: f64,
    pub jm_media: f64,
    pub hd_lumen: f64,
    pub hd_media: f64,
    pub hd_paper_literal_lumen: f64,
    pub hd_paper_literal_media: f64,
}

/// Options for [`contour_metrics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub resolution: usize,
    /// Multiplies every distance, e.g. pixel size in mm.
    pub hd_scale: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { resolution: 1024, hd_scale: 1.0 }
    }
}

pub fn contour_metrics(
    id: &str,
    pred_lumen: &CartesianContour,
    pred_media: &CartesianContour,
    gt_lumen: &CartesianContour,
    gt_media: &CartesianContour,
    opts: MetricOptions,
) -> Result<MetricReport, MetricsError> {
    let dense = |c: &CartesianContour| c.densify(HD_SPACING);
    let (pl, pm, gl, gm) = (dense(pred_lumen), dense(pred_media), dense(gt_lumen), dense(gt_media));
    Ok(MetricReport {
        id: id.to_string(),
        jm_lumen: global_jm(pred_lumen, gt_lumen, opts.resolution)?,
        jm_media: global_jm(pred_media, gt_media, opts.resolution)?,
        hd_lumen: hausdorff(&pl, &gl)? * opts.hd_scale,
        hd_media: hausdorff(&pm, &gm)? * opts.hd_scale,
        hd_paper_literal_lumen: hd_paper_literal(&pl, &gl)? * opts.hd_scale,
        hd_paper_literal_media: hd_paper_literal(&pm, &gm)? * opts.hd_scale,
    })
}

pub const METRICS_CSV_HEADER: &str =
    "id,jm_lumen,jm_media,hd_lumen,hd_media,hd_paper_literal_lumen,hd_paper_literal_media";

/// One CSV row per image, followed by a `mean` row.
pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    let row = |out: &mut String, r: &MetricReport| {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.id,
            r.jm_lumen,
            r.jm_media,
            r.hd_lumen,
            r.hd_media,
            r.hd_paper_literal_lumen,
            r.hd_paper_literal_media
        ));
    };
    for r in reports {
        row(&mut out, r);
    }
    if let Some(mean) = mean_report(reports) {
        row(&mut out, &mean);
    }
    out
}

/// Field-wise mean, labelled `mean`.
pub fn mean_report(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Some(MetricReport {
        id: "mean".into(),
        jm_lumen: avg(|r| r.jm_lumen),
        jm_media: avg(|r| r.jm_media),
        hd_lumen: avg(|r| r.hd_lumen),
        hd_media: avg(|r| r.hd_media),
        hd_paper_literal_lumen: avg(|r| r.hd_paper_literal_lumen),
        hd_paper_literal_media: avg(|r| r.hd_paper_literal_media),
    })
}
