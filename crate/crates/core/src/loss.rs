//! Per-wedge Jaccard loss between predicted and ground-truth polar chains.
//!
//! Consecutive rays `i` and `i+1` cut both chains into shared-apex triangles.
//! The loss sums `1 - JM_i` over all wedges of both boundaries, where `JM_i`
//! is the intersection-over-union of the predicted and ground-truth triangle
//! of wedge `i`. Two backends compute `JM_i`:
//!
//! * [`JmBackend::Exact`] clips the two triangles exactly (containment or a
//!   single chord crossing) and differentiates that closed form.
//! * [`JmBackend::Paper`] evaluates the published six-case closed forms. The
//!   simplified forms of cases I, II, IV and V share the expression
//!   `r_i r_{i+1} / (a_i a_{i+1} - r_i r_{i+1})`, which is not the geometric
//!   IoU; cases III and VI are evaluated from [`CaseIIIGeometry`].
//!
//! All partials are with respect to the predicted radii unless stated.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{line_intersection, Point, PolarChain};
use crate::dual::Dual;

/// Paper-form denominators below this magnitude are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("singular denominator |a_i a_i+1 - r_i r_i+1| = {0:e} in the paper closed form")]
    SingularDenominator(f64),
    #[error("chains differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("chains do not share a center")]
    CenterMismatch,
    #[error("a Jaccard loss needs at least 3 rays, got {0}")]
    TooFewRays(usize),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("case {0} requires a chord crossing but the chords do not cross")]
    CaseMismatch(&'static str),
}

/// One angular wedge: predicted radii `r`, ground-truth radii `a`, wedge angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub r_i: f64,
    pub r_next: f64,
    pub a_i: f64,
    pub a_next: f64,
    pub theta: f64,
}

impl SegmentPair {
    pub fn new(r_i: f64, r_next: f64, a_i: f64, a_next: f64, theta: f64) -> Result<Self, LossError> {
        let seg = Self { r_i, r_next, a_i, a_next, theta };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let radii = [self.r_i, self.r_next, self.a_i, self.a_next];
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(LossError::InvalidSegment(format!("radii must be positive: {radii:?}")));
        }
        if !(self.theta > 0.0 && self.theta < PI) {
            return Err(LossError::InvalidSegment(format!("theta {} outside (0, pi)", self.theta)));
        }
        Ok(())
    }

    /// Same wedge seen from the other ray; maps case VI geometry onto case III.
    pub fn mirrored(&self) -> Self {
        Self {
            r_i: self.r_next,
            r_next: self.r_i,
            a_i: self.a_next,
            a_next: self.a_i,
            theta: self.theta,
        }
    }

    pub fn pred_area(&self) -> f64 {
        0.5 * self.r_i * self.r_next * self.theta.sin()
    }

    pub fn gt_area(&self) -> f64 {
        0.5 * self.a_i * self.a_next * self.theta.sin()
    }

    /// Predicted triangle in the local wedge frame (ray `i` along +x).
    pub fn pred_triangle(&self) -> [Point; 3] {
        wedge_triangle(self.r_i, self.r_next, self.theta)
    }

    pub fn gt_triangle(&self) -> [Point; 3] {
        wedge_triangle(self.a_i, self.a_next, self.theta)
    }
}

fn wedge_triangle(r0: f64, r1: f64, theta: f64) -> [Point; 3] {
    [
        Point::new(0.0, 0.0),
        Point::new(r0, 0.0),
        Point::new(r1 * theta.cos(), r1 * theta.sin()),
    ]
}

/// The six overlap scenarios of a wedge.
///
/// "Right" is ray `i`, "left" is ray `i+1`. In the crossing cases the
/// prediction overshoots the ground truth on one ray and undershoots on the
/// other. The obtuse variants are those where the overshoot triangle has an
/// obtuse angle at the ground-truth vertex, which is the usual shape for
/// narrow wedges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegmentCase {
    /// Case I.
    ContainedPredInGt,
    /// Case II.
    ContainedGtInPred,
    /// Case III.
    CrossRightObtuse { crossing: Point },
    /// Case IV.
    CrossRightOver { crossing: Point },
    /// Case V.
    CrossLeftOver { crossing: Point },
    /// Case VI.
    CrossLeftObtuse { crossing: Point },
}

impl SegmentCase {
    pub fn number(&self) -> u8 {
        match self {
            Self::ContainedPredInGt => 1,
            Self::ContainedGtInPred => 2,
            Self::CrossRightObtuse { .. } => 3,
            Self::CrossRightOver { .. } => 4,
            Self::CrossLeftOver { .. } => 5,
            Self::CrossLeftObtuse { .. } => 6,
        }
    }

    pub fn roman(&self) -> &'static str {
        ["I", "II", "III", "IV", "V", "VI"][self.number() as usize - 1]
    }

    pub fn crossing(&self) -> Option<Point> {
        match *self {
            Self::ContainedPredInGt | Self::ContainedGtInPred => None,
            Self::CrossRightObtuse { crossing }
            | Self::CrossRightOver { crossing }
            | Self::CrossLeftOver { crossing }
            | Self::CrossLeftObtuse { crossing } => Some(crossing),
        }
    }

    /// Case with the given number and a placeholder crossing point, for
    /// evaluating a specific closed form regardless of geometry.
    pub fn from_number(n: u8) -> Option<Self> {
        let crossing = Point::default();
        Some(match n {
            1 => Self::ContainedPredInGt,
            2 => Self::ContainedGtInPred,
            3 => Self::CrossRightObtuse { crossing },
            4 => Self::CrossRightOver { crossing },
            5 => Self::CrossLeftOver { crossing },
            6 => Self::CrossLeftObtuse { crossing },
            _ => return None,
        })
    }
}

/// Classifies a wedge. Ties (`r = a` on a ray) count as containment.
pub fn classify(seg: &SegmentPair) -> SegmentCase {
    let SegmentPair { r_i, r_next, a_i, a_next, theta } = *seg;
    if r_i <= a_i && r_next <= a_next {
        return SegmentCase::ContainedPredInGt;
    }
    if r_i >= a_i && r_next >= a_next {
        return SegmentCase::ContainedGtInPred;
    }
    let [_, p1, p2] = seg.pred_triangle();
    let [_, g1, g2] = seg.gt_triangle();
    // Strict opposite signs on the two rays guarantee a single crossing.
    let crossing = line_intersection(p1, p2, g1, g2).expect("crossing chords are not parallel");
    let c = theta.cos();
    if r_i > a_i {
        if a_next * c < a_i {
            SegmentCase::CrossRightObtuse { crossing }
        } else {
            SegmentCase::CrossRightOver { crossing }
        }
    } else if a_i * c < a_next {
        SegmentCase::CrossLeftObtuse { crossing }
    } else {
        SegmentCase::CrossLeftOver { crossing }
    }
}

/// Exact IoU of the two wedge triangles and its partials with respect to
/// `(r_i, r_next, a_i, a_next)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactJm {
    pub jm: f64,
    pub d_jm: [f64; 4],
}

pub fn jm_exact(seg: &SegmentPair) -> ExactJm {
    let out = exact_dual(seg);
    ExactJm { jm: out.v, d_jm: out.d }
}

fn exact_dual(seg: &SegmentPair) -> Dual<4> {
    let r_i = Dual::var(seg.r_i, 0);
    let r_n = Dual::var(seg.r_next, 1);
    let a_i = Dual::var(seg.a_i, 2);
    let a_n = Dual::var(seg.a_next, 3);
    let (s, c) = seg.theta.sin_cos();

    let contained = (seg.r_i <= seg.a_i && seg.r_next <= seg.a_next)
        || (seg.r_i >= seg.a_i && seg.r_next >= seg.a_next);
    if contained {
        // Nested triangles share the apex angle, so areas are proportional
        // to the radius products.
        return (r_i.min(a_i) * r_n.min(a_n)) / (r_i.max(a_i) * r_n.max(a_n));
    }

    // Crossing point of the chords, parametrised along the predicted chord.
    let (p1x, p1y) = (r_i, Dual::constant(0.0));
    let (p2x, p2y) = (r_n * c, r_n * s);
    let (g1x, g1y) = (a_i, Dual::constant(0.0));
    let (g2x, g2y) = (a_n * c, a_n * s);
    let (ex, ey) = (p2x - p1x, p2y - p1y);
    let (fx, fy) = (g2x - g1x, g2y - g1y);
    let (wx, wy) = (g1x - p1x, g1y - p1y);
    let t = (wx * fy - wy * fx) / (ex * fy - ey * fx);
    let xx = p1x + t * ex;
    let xy = p1y + t * ey;

    let m_i = r_i.min(a_i);
    let m_n = r_n.min(a_n);
    let inter = (m_i * xy + m_n * (xx * s - xy * c)) * 0.5;
    let union = (r_i * r_n + a_i * a_n) * (0.5 * s) - inter;
    inter / union
}

/// Lengths and angles of the chord-crossing construction used by cases III
/// and VI, in the frame where the prediction overshoots on ray `i`.
///
/// `a`/`b` split the ground-truth chord at the crossing point (`a` next to
/// `A_i`), `d`/`c` split the predicted chord (`d` next to `R_i`). Angles are
/// the interior triangle angles: `theta_ia`/`theta_ib` at the ground-truth
/// vertices, `theta_ic`/`theta_id` at the predicted vertices, `theta_i0` at
/// the apex. `k1 = a + b` is the ground-truth chord length and `p` the
/// projection of `a` onto ray `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseIIIGeometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub p: f64,
    pub theta_ia: f64,
    pub theta_ib: f64,
    pub theta_ic: f64,
    pub theta_id: f64,
    pub theta_i0: f64,
    pub k1: f64,
}

struct CrossingDual {
    a: Dual<2>,
    b: Dual<2>,
    c: Dual<2>,
    d: Dual<2>,
    p: Dual<2>,
    theta_ia: Dual<2>,
    theta_ib: Dual<2>,
    theta_ic: Dual<2>,
    theta_id: Dual<2>,
    k1: Dual<2>,
    jm: Dual<2>,
}

/// Requires `r_i > a_i`, `r_next < a_next`; partials with respect to `(r_i, r_next)`.
fn crossing_dual(seg: &SegmentPair) -> CrossingDual {
    let r_i = Dual::<2>::var(seg.r_i, 0);
    let r_n = Dual::<2>::var(seg.r_next, 1);
    let a_i = Dual::<2>::constant(seg.a_i);
    let a_n = Dual::<2>::constant(seg.a_next);
    let theta = seg.theta;
    let (s, c) = theta.sin_cos();

    let theta_ia = (a_n * s).atan2(a_i - a_n * c);
    let theta_ic = (r_n * s).atan2(r_i - r_n * c);
    let theta_ib = (PI - theta) - theta_ia;
    let theta_id = (PI - theta) - theta_ic;

    // Law of sines in the overshoot triangle (A_i, R_i, X): its angles are
    // pi - theta_ia at A_i, theta_ic at R_i and theta_ia - theta_ic at X.
    let overshoot = r_i - a_i;
    let at_x = (theta_ia - theta_ic).sin();
    let a = overshoot * theta_ic.sin() / at_x;
    let d = overshoot * theta_ia.sin() / at_x;
    let k1 = (a_i - a_n * c) / theta_ia.cos();
    let b = k1 - a;
    let pred_chord = (r_i * r_i + r_n * r_n - r_i * r_n * (2.0 * c)).sqrt();
    let c_len = pred_chord - d;
    let p = a * theta_ia.cos();

    let gt_area = a_i * a_n * (0.5 * s);
    let missing = b * (a_n - r_n) * theta_ib.sin() * 0.5;
    let extra = a * overshoot * theta_ia.sin() * 0.5;
    let jm = (gt_area - missing) / (gt_area + extra);

    CrossingDual {
        a,
        b,
        c: c_len,
        d,
        p,
        theta_ia,
        theta_ib,
        theta_ic,
        theta_id,
        k1,
        jm,
    }
}

impl CaseIIIGeometry {
    /// Construction for a case-III wedge; case-VI wedges must be mirrored first.
    pub fn from_segment(seg: &SegmentPair) -> Result<Self, LossError> {
        if !(seg.r_i > seg.a_i && seg.r_next < seg.a_next) {
            return Err(LossError::CaseMismatch("III"));
        }
        let g = crossing_dual(seg);
        Ok(Self {
            a: g.a.v,
            b: g.b.v,
            c: g.c.v,
            d: g.d.v,
            p: g.p.v,
            theta_ia: g.theta_ia.v,
            theta_ib: g.theta_ib.v,
            theta_ic: g.theta_ic.v,
            theta_id: g.theta_id.v,
            theta_i0: seg.theta,
            k1: g.k1.v,
        })
    }
}

/// Paper-backend evaluation of one wedge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperJm {
    pub jm: f64,
    /// Always `1 - jm`.
    pub epsilon: f64,
    /// `∂ε/∂r_i`, `∂ε/∂r_{i+1}`.
    pub d_epsilon: [f64; 2],
}

/// Evaluates the closed form of `case` on `seg`.
///
/// Cases I, II, IV and V use the shared simplified expression and fail with
/// [`LossError::SingularDenominator`] near `a_i a_{i+1} = r_i r_{i+1}`.
/// Cases III and VI need a matching crossing geometry.
pub fn jm_paper(seg: &SegmentPair, case: SegmentCase) -> Result<PaperJm, LossError> {
    match case {
        SegmentCase::ContainedPredInGt
        | SegmentCase::ContainedGtInPred
        | SegmentCase::CrossRightOver { .. }
        | SegmentCase::CrossLeftOver { .. } => {
            let rr = seg.r_i * seg.r_next;
            let aa = seg.a_i * seg.a_next;
            let den = aa - rr;
            if den.abs() < SINGULAR_EPS {
                return Err(LossError::SingularDenominator(den.abs()));
            }
            let jm = rr / den;
            // d(rr/(aa-rr))/d(rr) = aa/(aa-rr)^2
            let g = aa / (den * den);
            Ok(PaperJm {
                jm,
                epsilon: 1.0 - jm,
                d_epsilon: [-g * seg.r_next, -g * seg.r_i],
            })
        }
        SegmentCase::CrossRightObtuse { .. } => {
            if !(seg.r_i > seg.a_i && seg.r_next < seg.a_next) {
                return Err(LossError::CaseMismatch("III"));
            }
            let jm = crossing_dual(seg).jm;
            Ok(PaperJm {
                jm: jm.v,
                epsilon: 1.0 - jm.v,
                d_epsilon: [-jm.d[0], -jm.d[1]],
            })
        }
        SegmentCase::CrossLeftObtuse { .. } => {
            let m = seg.mirrored();
            if !(m.r_i > m.a_i && m.r_next < m.a_next) {
                return Err(LossError::CaseMismatch("VI"));
            }
            let jm = crossing_dual(&m).jm;
            Ok(PaperJm {
                jm: jm.v,
                epsilon: 1.0 - jm.v,
                d_epsilon: [-jm.d[1], -jm.d[0]],
            })
        }
    }
}

/// The published Num/Den pair for cases I, II, IV and V.
///
/// Two misprints are read as obvious index typos (`r_1` for `r_{i+1}` in
/// case I, `r_{i+11}` in case V). The last term of the case-II denominator is
/// printed with a factor 1/2; the rectangle it measures has no such factor,
/// so it is used with coefficient 1 here. See [`paper_case2_den_as_printed`].
pub fn paper_num_den(seg: &SegmentPair, case_number: u8) -> Option<(f64, f64)> {
    let SegmentPair { r_i, r_next: r_n, a_i, a_next: a_n, theta } = *seg;
    let (s, c) = theta.sin_cos();
    match case_number {
        1 => {
            let num = 0.5 * r_n * r_n * c * s - 0.5 * (r_n * c - r_i) * r_n * s;
            let den = 0.5 * a_n * a_n * s * c - 0.5 * (a_n * c - a_i) * a_n * s
                - 0.5 * r_n * r_n * s * c
                + 0.5 * (r_n * c - r_i) * r_n * s;
            Some((num, den))
        }
        2 => {
            let num = 0.5 * r_i * r_n * s;
            let den = 0.5 * r_n * s * (r_n * c - r_i)
                + 0.5 * a_n * s * (a_i - a_n * c)
                + 0.5 * (a_n - r_n).powi(2) * s * c
                + r_n * (a_n - r_n) * c * s;
            Some((num, den))
        }
        4 => {
            let num = r_i * r_n * s;
            let den = a_n * a_n * s * c - r_i * r_n * s - a_n * s * (a_n * c - a_i);
            Some((num, den))
        }
        5 => {
            let num = 0.5 * r_i * r_n * s;
            let den = 0.5 * a_i * a_n * s - 0.5 * r_i * r_n * s;
            Some((num, den))
        }
        _ => None,
    }
}

/// Case-II denominator exactly as printed, with the factor 1/2 on the last term.
pub fn paper_case2_den_as_printed(seg: &SegmentPair) -> f64 {
    let SegmentPair { r_i, r_next: r_n, a_i, a_next: a_n, theta } = *seg;
    let (s, c) = theta.sin_cos();
    0.5 * r_n * s * (r_n * c - r_i)
        + 0.5 * a_n * s * (a_i - a_n * c)
        + 0.5 * (a_n - r_n).powi(2) * s * c
        + 0.5 * r_n * (a_n - r_n) * c * s
}

/// The error expression printed next to each simplified case form. Kept for
/// audit only; the loss always uses `1 - JM`. Cases III and VI print none.
pub fn printed_epsilon(seg: &SegmentPair, case_number: u8) -> Option<f64> {
    let rr = seg.r_i * seg.r_next;
    let aa = seg.a_i * seg.a_next;
    match case_number {
        1 => Some(-aa / (rr - aa)),
        2 | 4 | 5 => Some((2.0 * rr - aa) / (rr - aa)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JmBackend {
    Exact,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossBackend {
    Exact,
    Paper,
    Mse,
}

impl From<JmBackend> for LossBackend {
    fn from(b: JmBackend) -> Self {
        match b {
            JmBackend::Exact => LossBackend::Exact,
            JmBackend::Paper => LossBackend::Paper,
        }
    }
}

/// Loss value with its gradient over lumen radii followed by media radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub value: f64,
    pub grad: Vec<f64>,
    /// `[lumen, media]` contribution of every wedge (or vertex, for MSE).
    pub per_segment: Vec<[f64; 2]>,
    pub backend: LossBackend,
    pub fallbacks: usize,
}

/// Loss of a single boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoss {
    pub value: f64,
    pub grad: Vec<f64>,
    pub per_segment: Vec<f64>,
    pub fallbacks: usize,
}

/// Configured Jaccard loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JmLoss {
    pub backend: JmBackend,
    /// Replace singular paper-form wedges by the exact form instead of failing.
    pub fallback: bool,
}

impl JmLoss {
    pub fn new(backend: JmBackend) -> Self {
        Self { backend, fallback: true }
    }

    /// `Σ_i (1 - JM_i)` over the wedges of one closed chain.
    pub fn boundary(&self, pred: &[f64], gt: &[f64]) -> Result<BoundaryLoss, LossError> {
        check_lengths(pred, gt)?;
        let n = pred.len();
        if n < 3 {
            return Err(LossError::TooFewRays(n));
        }
        let theta = std::f64::consts::TAU / n as f64;
        let mut grad = vec![0.0; n];
        let mut per_segment = Vec::with_capacity(n);
        let mut fallbacks = 0;
        for i in 0..n {
            let j = (i + 1) % n;
            let seg = SegmentPair::new(pred[i], pred[j], gt[i], gt[j], theta)?;
            let (eps, d) = match self.backend {
                JmBackend::Exact => exact_epsilon(&seg),
                JmBackend::Paper => match jm_paper(&seg, classify(&seg)) {
                    Ok(p) => (p.epsilon, p.d_epsilon),
                    Err(LossError::SingularDenominator(_)) if self.fallback => {
                        fallbacks += 1;
                        exact_epsilon(&seg)
                    }
                    Err(e) => return Err(e),
                },
            };
            per_segment.push(eps);
            grad[i] += d[0];
            grad[j] += d[1];
        }
        Ok(BoundaryLoss { value: per_segment.iter().sum(), grad, per_segment, fallbacks })
    }

    pub fn evaluate(
        &self,
        pred_lumen: &[f64],
        pred_media: &[f64],
        gt_lumen: &[f64],
        gt_media: &[f64],
    ) -> Result<LossReport, LossError> {
        check_lengths(pred_lumen, pred_media)?;
        let lumen = self.boundary(pred_lumen, gt_lumen)?;
        let media = self.boundary(pred_media, gt_media)?;
        Ok(combine(lumen, media, self.backend.into()))
    }
}

fn exact_epsilon(seg: &SegmentPair) -> (f64, [f64; 2]) {
    let e = jm_exact(seg);
    (1.0 - e.jm, [-e.d_jm[0], -e.d_jm[1]])
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), LossError> {
    if a.len() != b.len() {
        return Err(LossError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn combine(lumen: BoundaryLoss, media: BoundaryLoss, backend: LossBackend) -> LossReport {
    let per_segment = lumen.per_segment.iter().zip(&media.per_segment).map(|(l, m)| [*l, *m]).collect();
    let mut grad = lumen.grad;
    grad.extend(media.grad);
    LossReport {
        value: lumen.value + media.value,
        grad,
        per_segment,
        backend,
        fallbacks: lumen.fallbacks + media.fallbacks,
    }
}

/// Jaccard loss over both boundaries, with exact fallback for singular paper wedges.
pub fn jm_loss(
    pred_lumen: &[f64],
    pred_media: &[f64],
    gt_lumen: &[f64],
    gt_media: &[f64],
    backend: JmBackend,
) -> Result<LossReport, LossError> {
    JmLoss::new(backend).evaluate(pred_lumen, pred_media, gt_lumen, gt_media)
}

/// [`jm_loss`] on chains, checking that all four share a center and ray count.
pub fn jm_loss_chains(
    pred_lumen: &PolarChain,
    pred_media: &PolarChain,
    gt_lumen: &PolarChain,
    gt_media: &PolarChain,
    backend: JmBackend,
) -> Result<LossReport, LossError> {
    let chains = [pred_lumen, pred_media, gt_lumen, gt_media];
    if chains.iter().any(|c| c.center() != pred_lumen.center()) {
        return Err(LossError::CenterMismatch);
    }
    jm_loss(
        pred_lumen.radii(),
        pred_media.radii(),
        gt_lumen.radii(),
        gt_media.radii(),
        backend,
    )
}

/// Squared radial error of one boundary.
pub fn mse_boundary(pred: &[f64], gt: &[f64]) -> Result<BoundaryLoss, LossError> {
    check_lengths(pred, gt)?;
    let per_segment: Vec<f64> = pred.iter().zip(gt).map(|(r, a)| (r - a) * (r - a)).collect();
    let grad = pred.iter().zip(gt).map(|(r, a)| 2.0 * (r - a)).collect();
    Ok(BoundaryLoss { value: per_segment.iter().sum(), grad, per_segment, fallbacks: 0 })
}

/// `Σ (r - a)^2` over lumen and media radii.
pub fn mse_loss(
    pred_lumen: &[f64],
    pred_media: &[f64],
    gt_lumen: &[f64],
    gt_media: &[f64],
) -> Result<LossReport, LossError> {
    check_lengths(pred_lumen, pred_media)?;
    let lumen = mse_boundary(pred_lumen, gt_lumen)?;
    let media = mse_boundary(pred_media, gt_media)?;
    Ok(combine(lumen, media, LossBackend::Mse))
}
