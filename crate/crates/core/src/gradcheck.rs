//! Finite-difference checks of the loss gradients.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::item_rng;
use crate::contour::Point;
use crate::loss::{classify, jm_loss, mse_loss, JmBackend, LossBackend, LossError, LossReport, SegmentPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub backend: LossBackend,
    pub trials: usize,
    /// Central-difference step as a fraction of the largest radius.
    pub eps: f64,
    pub tol: f64,
    pub seed: u64,
    pub n_v: usize,
    /// Required fraction of passing trials.
    pub min_pass_rate: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { backend: LossBackend::Exact, trials: 1000, eps: 1e-5, tol: 1e-4, seed: 0, n_v: 16, min_pass_rate: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub backend: LossBackend,
    pub trials: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub max_rel_err: f64,
    pub median_rel_err: f64,
    pub tol: f64,
    pub eps: f64,
    pub seed: u64,
    /// Draws discarded for lying too close to a case boundary or singular set.
    pub rejected: usize,
    pub ok: bool,
}

/// Interior draws keep every radius at least this far from its ground truth,
/// and every crossing point this far from both rays of its wedge.
pub const CASE_MARGIN: f64 = 1e-2;
/// Minimum `|a_i a_{i+1} - r_i r_{i+1}| / a_i a_{i+1}` for paper-form wedges.
pub const SINGULAR_MARGIN: f64 = 0.05;

fn loss(backend: LossBackend, pl: &[f64], pm: &[f64], gl: &[f64], gm: &[f64]) -> Result<LossReport, LossError> {
    match backend {
        LossBackend::Exact => jm_loss(pl, pm, gl, gm, JmBackend::Exact),
        LossBackend::Paper => jm_loss(pl, pm, gl, gm, JmBackend::Paper),
        LossBackend::Mse => mse_loss(pl, pm, gl, gm),
    }
}

/// True when `pred` is away from case boundaries (and, for the paper form,
/// from its singular set) relative to `gt`.
pub fn is_interior(backend: LossBackend, pred: &[f64], gt: &[f64]) -> bool {
    let n = pred.len();
    if pred.iter().zip(gt).any(|(r, a)| (r - a).abs() <= CASE_MARGIN) {
        return false;
    }
    let theta = TAU / n as f64;
    let dir = Point::new(theta.cos(), theta.sin());
    (0..n).all(|i| {
        let j = (i + 1) % n;
        let Ok(seg) = SegmentPair::new(pred[i], pred[j], gt[i], gt[j], theta) else {
            return false;
        };
        if let Some(x) = classify(&seg).crossing() {
            if x.y.abs() <= CASE_MARGIN || dir.cross(x).abs() <= CASE_MARGIN {
                return false;
            }
        }
        let aa = gt[i] * gt[j];
        backend != LossBackend::Paper || (aa - pred[i] * pred[j]).abs() > SINGULAR_MARGIN * aa
    })
}

/// Largest radius drawn by [`loss_gradcheck`].
pub const R_MAX: f64 = 1.0;

/// Random interior chain pairs with radii in `[0.1, 1]·R_MAX`; each trial checks
/// every component of the gradient and passes when all are within `tol`.
pub fn loss_gradcheck(config: &GradcheckConfig) -> Result<GradcheckSummary, LossError> {
    let n = config.n_v;
    let mut errs = Vec::with_capacity(config.trials);
    let mut rejected = 0;
    let mut trial = 0u64;
    while errs.len() < config.trials {
        let mut rng = item_rng(config.seed, trial);
        trial += 1;
        let mut draw = || -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.1..1.0) * R_MAX).collect() };
        let (mut pl, mut pm, gl, gm) = (draw(), draw(), draw(), draw());
        if !(is_interior(config.backend, &pl, &gl) && is_interior(config.backend, &pm, &gm)) {
            rejected += 1;
            continue;
        }
        let report = loss(config.backend, &pl, &pm, &gl, &gm)?;
        let mut worst: f64 = 0.0;
        for k in 0..2 * n {
            let slot = |pl: &mut Vec<f64>, pm: &mut Vec<f64>, v: Option<f64>| -> f64 {
                let r = if k < n { &mut pl[k] } else { &mut pm[k - n] };
                let old = *r;
                if let Some(v) = v {
                    *r = v;
                }
                old
            };
            let orig = slot(&mut pl, &mut pm, None);
            let h = config.eps * R_MAX;
            slot(&mut pl, &mut pm, Some(orig + h));
            let up = loss(config.backend, &pl, &pm, &gl, &gm)?.value;
            slot(&mut pl, &mut pm, Some(orig - h));
            let down = loss(config.backend, &pl, &pm, &gl, &gm)?.value;
            slot(&mut pl, &mut pm, Some(orig));
            let numeric = (up - down) / (2.0 * h);
            let analytic = report.grad[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-10);
            worst = worst.max(rel);
        }
        errs.push(worst);
    }
    let passed = errs.iter().filter(|&&e| e < config.tol).count();
    let pass_rate = passed as f64 / config.trials.max(1) as f64;
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(GradcheckSummary {
        backend: config.backend,
        trials: config.trials,
        passed,
        pass_rate,
        max_rel_err: sorted.last().copied().unwrap_or(0.0),
        median_rel_err: sorted.get(sorted.len() / 2).copied().unwrap_or(0.0),
        tol: config.tol,
        eps: config.eps,
        seed: config.seed,
        rejected,
        ok: pass_rate >= config.min_pass_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(backend: LossBackend) -> GradcheckSummary {
        loss_gradcheck(&GradcheckConfig { backend, trials: 100, ..Default::default() }).unwrap()
    }

    #[test]
    fn exact_passes() {
        let s = run(LossBackend::Exact);
        assert!(s.ok && s.pass_rate >= 0.99, "{s:?}");
    }

    #[test]
    fn paper_passes() {
        let s = run(LossBackend::Paper);
        assert!(s.ok, "{s:?}");
    }

    #[test]
    fn mse_passes() {
        let s = run(LossBackend::Mse);
        assert!(s.ok && s.max_rel_err < 1e-6, "{s:?}");
    }
}
