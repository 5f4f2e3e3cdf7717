//! Polar polygonal chains and the plane geometry shared by the rest of the crate.
//!
//! A [`PolarChain`] stores one radius per ray; ray `k` leaves the center at
//! `φ_k = 2πk/n_v`, measured from the +x axis towards +y. Image coordinates
//! grow downward, so this is clockwise on screen, but every routine uses the
//! same frame and orientation conventions cancel out.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to radii so wedge triangles never degenerate.
pub const MIN_RADIUS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("center ({x}, {y}) is not inside the contour")]
    CenterOutside { x: f64, y: f64 },
    #[error("ray {ray} does not intersect the contour boundary")]
    NoIntersection { ray: usize },
    #[error("collinear overlapping segments have no unique intersection")]
    Degenerate,
    #[error("contour needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("contour has duplicate consecutive points at index {0}")]
    DuplicatePoint(usize),
    #[error("chain needs at least 3 rays, got {0}")]
    TooFewRays(usize),
    #[error("radius {index} is {value}, radii must be finite and positive")]
    InvalidRadius { index: usize, value: f64 },
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(center: Point, radius: f64, angle: f64) -> Self {
        Self::new(center.x + radius * angle.cos(), center.y + radius * angle.sin())
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Closed polygon given by its vertices; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianContour {
    points: Vec<Point>,
}

impl CartesianContour {
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
            let next = points[(i + 1) % points.len()];
            if *p == next {
                return Err(GeometryError::DuplicatePoint(i));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterates the closed edge list, including the edge back to the first point.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        shoelace_area(&self.points)
    }

    /// Even-odd ray casting test.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Applies `f` to every vertex. Used by flips and rotations.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Self, GeometryError> {
        Self::new(self.points.iter().copied().map(f).collect())
    }

    /// Inserts points along every edge so consecutive points are at most
    /// `max_spacing` apart. The result is a point cloud for distance metrics.
    pub fn densify(&self, max_spacing: f64) -> Vec<Point> {
        assert!(max_spacing > 0.0, "spacing must be positive");
        let mut out = Vec::with_capacity(self.points.len() * 2);
        for (a, b) in self.edges() {
            let steps = (a.distance(b) / max_spacing).ceil().max(1.0) as usize;
            for s in 0..steps {
                let t = s as f64 / steps as f64;
                out.push(a + (b - a) * t);
            }
        }
        out
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Signed polygon area, positive when the vertices run counter-clockwise in
/// a y-up frame.
pub fn shoelace_area(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum();
    0.5 * twice
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point,
    pub angle: f64,
}

impl Ray {
    pub fn new(origin: Point, angle: f64) -> Self {
        Self { origin, angle: angle.rem_euclid(TAU) }
    }

    pub fn direction(&self) -> Point {
        Point::new(self.angle.cos(), self.angle.sin())
    }

    pub fn at(&self, t: f64) -> Point {
        self.origin + self.direction() * t
    }

    /// Distance along the ray to the closed segment `[p, q]`, if it is hit.
    /// A segment lying on the ray reports its farther endpoint.
    pub fn hit_segment(&self, p: Point, q: Point) -> Option<f64> {
        let d = self.direction();
        let e = q - p;
        let w = p - self.origin;
        let denom = d.cross(e);
        let scale = e.norm().max(w.norm()).max(1.0);
        if denom.abs() <= 1e-14 * scale {
            if w.cross(d).abs() > 1e-12 * scale {
                return None;
            }
            let tp = w.dot(d);
            let tq = (q - self.origin).dot(d);
            let t = tp.max(tq);
            return (t >= 0.0).then_some(t);
        }
        let t = w.cross(e) / denom;
        let u = w.cross(d) / denom;
        const SLACK: f64 = 1e-12;
        if t >= -SLACK && (-SLACK..=1.0 + SLACK).contains(&u) {
            Some(t.max(0.0))
        } else {
            None
        }
    }
}

/// Intersection of the open segments `p1p2` and `q1q2`.
///
/// Returns `Ok(None)` for disjoint or parallel segments and
/// [`GeometryError::Degenerate`] when collinear segments overlap.
pub fn segment_intersection(
    p1: Point,
    p2: Point,
    q1: Point,
    q2: Point,
) -> Result<Option<Point>, GeometryError> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    let qp = q1 - p1;
    let scale = r.norm() * s.norm();
    if denom.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        if qp.cross(r).abs() > 1e-12 * r.norm() * qp.norm().max(1.0) {
            return Ok(None);
        }
        // Collinear: project q onto p's parameter line.
        let rr = r.dot(r);
        let t0 = qp.dot(r) / rr;
        let t1 = (q2 - p1).dot(r) / rr;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        return if hi <= 0.0 || lo >= 1.0 {
            Ok(None)
        } else {
            Err(GeometryError::Degenerate)
        };
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
        Ok(Some(p1 + r * t))
    } else {
        Ok(None)
    }
}

/// Intersection of the infinite lines through `p1p2` and `q1q2`.
pub fn line_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let t = (q1 - p1).cross(s) / denom;
    Some(p1 + r * t)
}

/// Angle of ray `k` out of `n_v` equally spaced rays.
pub fn ray_angle(k: usize, n_v: usize) -> f64 {
    TAU * k as f64 / n_v as f64
}

/// Closed contour sampled on `n_v` equally spaced rays about `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarChain {
    center: Point,
    radii: Vec<f64>,
}

impl PolarChain {
    pub fn new(center: Point, radii: Vec<f64>) -> Result<Self, GeometryError> {
        if radii.len() < 3 {
            return Err(GeometryError::TooFewRays(radii.len()));
        }
        if let Some((index, &value)) =
            radii.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(GeometryError::InvalidRadius { index, value });
        }
        Ok(Self { center, radii })
    }

    /// Builds a chain after clamping every radius into `[MIN_RADIUS, r_max]`.
    pub fn clamped(center: Point, radii: Vec<f64>, r_max: f64) -> Result<Self, GeometryError> {
        let radii = radii
            .into_iter()
            .map(|r| if r.is_nan() { r } else { r.clamp(MIN_RADIUS, r_max) })
            .collect();
        Self::new(center, radii)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn n_v(&self) -> usize {
        self.radii.len()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Angle between consecutive rays.
    pub fn wedge_angle(&self) -> f64 {
        TAU / self.radii.len() as f64
    }

    pub fn angle(&self, k: usize) -> f64 {
        ray_angle(k, self.radii.len())
    }

    pub fn vertex(&self, k: usize) -> Point {
        Point::from_polar(self.center, self.radii[k], self.angle(k))
    }

    /// Joins consecutive vertices into a polygon.
    pub fn to_cartesian(&self) -> CartesianContour {
        let points = (0..self.n_v()).map(|k| self.vertex(k)).collect();
        // Vertices lie on distinct rays with positive radii, so they are distinct.
        CartesianContour { points }
    }

    /// Sum of the wedge triangle areas; equals the enclosed polygon area.
    pub fn area(&self) -> f64 {
        let n = self.n_v();
        let s = self.wedge_angle().sin();
        (0..n).map(|k| 0.5 * self.radii[k] * self.radii[(k + 1) % n] * s).sum()
    }
}

/// Samples `contour` on `n_v` rays about `center`.
///
/// When a ray crosses the boundary more than once the farthest crossing is kept.
pub fn resample(
    contour: &CartesianContour,
    center: Point,
    n_v: usize,
) -> Result<PolarChain, GeometryError> {
    if n_v < 3 {
        return Err(GeometryError::TooFewRays(n_v));
    }
    if !contour.contains(center) {
        return Err(GeometryError::CenterOutside { x: center.x, y: center.y });
    }
    let mut radii = Vec::with_capacity(n_v);
    for k in 0..n_v {
        let ray = Ray::new(center, ray_angle(k, n_v));
        let far = contour
            .edges()
            .filter_map(|(p, q)| ray.hit_segment(p, q))
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
        match far {
            Some(t) => radii.push(t.max(MIN_RADIUS)),
            None => return Err(GeometryError::NoIntersection { ray: k }),
        }
    }
    PolarChain::new(center, radii)
}

/// Chain JSON layout: `{"center":[cx,cy],"n_v":K,"radii":[...]}`.
#[derive(Serialize, Deserialize)]
struct ChainRecord {
    center: [f64; 2],
    n_v: usize,
    radii: Vec<f64>,
}

impl Serialize for PolarChain {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ChainRecord {
            center: [self.center.x, self.center.y],
            n_v: self.n_v(),
            radii: self.radii.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolarChain {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rec = ChainRecord::deserialize(deserializer)?;
        if rec.n_v != rec.radii.len() {
            return Err(D::Error::custom(format!(
                "n_v is {} but {} radii were given",
                rec.n_v,
                rec.radii.len()
            )));
        }
        PolarChain::new(Point::new(rec.center[0], rec.center[1]), rec.radii)
            .map_err(D::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ContourParseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("contour needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parses the label text format: one `x y` pair per line, separated by
/// whitespace or a comma. Blank lines are skipped.
pub fn parse_contour_text(text: &str) -> Result<CartesianContour, ContourParseError> {
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(ContourParseError::Parse {
                line: line_no,
                message: format!("expected 2 coordinates, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ContourParseError::Parse {
                    line: line_no,
                    message: format!("invalid number {s:?}"),
                })
        };
        points.push(Point::new(parse(fields[0])?, parse(fields[1])?));
    }
    if points.len() < 3 {
        return Err(ContourParseError::TooFewPoints(points.len()));
    }
    Ok(CartesianContour::new(points)?)
}

/// Formats a contour in the label text format with 6 decimals.
pub fn format_contour_text(contour: &CartesianContour) -> String {
    let mut out = String::with_capacity(contour.len() * 24);
    for p in contour.points() {
        out.push_str(&format!("{:.6} {:.6}\n", p.x, p.y));
    }
    out
}
