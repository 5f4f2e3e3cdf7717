//! Audit of the simplified per-case closed forms against the exact overlap.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::dataset::item_rng;
use crate::loss::{
    classify, jm_exact, jm_paper, paper_case2_den_as_printed, paper_num_den, printed_epsilon, LossError,
    SegmentPair,
};

/// Wedge angles used for random draws.
pub const AUDIT_THETAS: [f64; 3] = [TAU / 16.0, TAU / 32.0, TAU / 64.0];

/// Draws with `|a_i a_{i+1} - r_i r_{i+1}| < SINGULAR_REL * a_i a_{i+1}` are skipped.
pub const SINGULAR_REL: f64 = 1e-3;

fn rel_dev(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1.0)
}

fn random_segment(seed: u64, index: u64) -> SegmentPair {
    let mut rng = item_rng(seed, index);
    let theta = AUDIT_THETAS[rng.gen_range(0..AUDIT_THETAS.len())];
    let mut r = || rng.gen_range(0.1..1.0);
    SegmentPair::new(r(), r(), r(), r(), theta).expect("positive radii")
}

fn singular(seg: &SegmentPair) -> bool {
    let aa = seg.a_i * seg.a_next;
    (aa - seg.r_i * seg.r_next).abs() < SINGULAR_REL * aa
}

/// Seeded random wedges falling in `case_number`, off the singular set.
/// Returns the wedges and the number of singular draws skipped.
pub fn case_samples(case_number: u8, count: usize, seed: u64) -> (Vec<SegmentPair>, usize) {
    let mut out = Vec::with_capacity(count);
    let mut skipped = 0;
    let mut index = 0u64;
    let cap = 1000 * count as u64 + 1000;
    while out.len() < count && index < cap {
        let seg = random_segment(seed ^ (u64::from(case_number) << 32), index);
        index += 1;
        if classify(&seg).number() != case_number {
            continue;
        }
        if singular(&seg) {
            skipped += 1;
            continue;
        }
        out.push(seg);
    }
    (out, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumDenCheck {
    pub case: &'static str,
    pub samples: usize,
    /// Largest `|simplified - Num/Den| / max(1, |Num/Den|)`.
    pub max_rel_dev: f64,
}

/// Compares the simplified closed form with its Num/Den definition for
/// cases I, II, IV and V.
pub fn num_den_consistency(trials: usize, seed: u64) -> Result<Vec<NumDenCheck>, LossError> {
    let mut out = Vec::new();
    for n in [1u8, 2, 4, 5] {
        let (segs, _) = case_samples(n, trials, seed);
        let mut worst: f64 = 0.0;
        for seg in &segs {
            let (num, den) = paper_num_den(seg, n).expect("open-form case");
            let simplified = jm_paper(seg, classify(seg))?.jm;
            worst = worst.max(rel_dev(simplified, num / den));
        }
        out.push(NumDenCheck { case: ROMAN[n as usize - 1], samples: segs.len(), max_rel_dev: worst });
    }
    Ok(out)
}

const ROMAN: [&str; 6] = ["I", "II", "III", "IV", "V", "VI"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseErrata {
    pub case: &'static str,
    pub number: u8,
    pub samples: usize,
    pub singular_skipped: usize,
    pub jm_exact_mean: f64,
    pub jm_paper_mean: f64,
    pub abs_diff_mean: f64,
    pub abs_diff_max: f64,
    /// Fraction of samples where the closed form leaves `[0, 1]`.
    pub out_of_range_rate: f64,
    pub num_den_max_rel_dev: Option<f64>,
    /// Largest gap between the printed error expression and `1 - JM`.
    pub printed_epsilon_max_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case2Denominator {
    pub samples: usize,
    /// Relative gap to `sin θ (a_i a_{i+1} - r_i r_{i+1}) / 2`.
    pub corrected_max_rel_dev: f64,
    pub as_printed_max_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrataExample {
    pub label: String,
    pub case: &'static str,
    pub r: [f64; 2],
    pub a: [f64; 2],
    pub theta: f64,
    pub jm_exact: f64,
    pub jm_paper: f64,
    pub epsilon: f64,
    pub printed_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrataReport {
    pub trials: usize,
    pub seed: u64,
    pub cases: Vec<CaseErrata>,
    pub case2_denominator: Case2Denominator,
    pub examples: Vec<ErrataExample>,
}

fn example(label: &str, r: [f64; 2], a: [f64; 2], theta: f64) -> Result<ErrataExample, LossError> {
    let seg = SegmentPair::new(r[0], r[1], a[0], a[1], theta)?;
    let case = classify(&seg);
    let paper = jm_paper(&seg, case)?;
    Ok(ErrataExample {
        label: label.to_string(),
        case: case.roman(),
        r,
        a,
        theta,
        jm_exact: jm_exact(&seg).jm,
        jm_paper: paper.jm,
        epsilon: paper.epsilon,
        printed_epsilon: printed_epsilon(&seg, case.number()),
    })
}

/// Per-case discrepancy between the closed forms and the exact overlap.
pub fn errata_report(trials: usize, seed: u64) -> Result<ErrataReport, LossError> {
    let mut cases = Vec::with_capacity(6);
    for n in 1u8..=6 {
        let (segs, singular_skipped) = case_samples(n, trials, seed);
        let (mut se, mut sp, mut sd, mut dmax, mut out) = (0.0, 0.0, 0.0, 0.0f64, 0usize);
        let mut nd: Option<f64> = None;
        let mut pe: Option<f64> = None;
        for seg in &segs {
            let exact = jm_exact(seg).jm;
            let paper = jm_paper(seg, classify(seg))?;
            se += exact;
            sp += paper.jm;
            let d = (paper.jm - exact).abs();
            sd += d;
            dmax = dmax.max(d);
            if !(0.0..=1.0).contains(&paper.jm) {
                out += 1;
            }
            if let Some((num, den)) = paper_num_den(seg, n) {
                nd = Some(nd.unwrap_or(0.0).max(rel_dev(paper.jm, num / den)));
            }
            if let Some(p) = printed_epsilon(seg, n) {
                pe = Some(pe.unwrap_or(0.0).max((p - paper.epsilon).abs()));
            }
        }
        let k = segs.len().max(1) as f64;
        cases.push(CaseErrata {
            case: ROMAN[n as usize - 1],
            number: n,
            samples: segs.len(),
            singular_skipped,
            jm_exact_mean: se / k,
            jm_paper_mean: sp / k,
            abs_diff_mean: sd / k,
            abs_diff_max: dmax,
            out_of_range_rate: out as f64 / k,
            num_den_max_rel_dev: nd,
            printed_epsilon_max_dev: pe,
        });
    }

    let (segs, _) = case_samples(2, trials, seed);
    let (mut corrected, mut printed) = (0.0f64, 0.0f64);
    for seg in &segs {
        let target = 0.5 * seg.theta.sin() * (seg.a_i * seg.a_next - seg.r_i * seg.r_next);
        let (_, den) = paper_num_den(seg, 2).expect("case II");
        corrected = corrected.max((den - target).abs() / target.abs());
        printed = printed.max((paper_case2_den_as_printed(seg) - target).abs() / target.abs());
    }
    let case2_denominator = Case2Denominator {
        samples: segs.len(),
        corrected_max_rel_dev: corrected,
        as_printed_max_rel_dev: printed,
    };

    let theta = TAU / 32.0;
    let examples = vec![
        example("case I, r=(1,1), a=(2,2)", [1.0, 1.0], [2.0, 2.0], theta)?,
        example("case I near r=a", [0.999, 0.999], [1.0, 1.0], theta)?,
        example("case II, r=(2,2), a=(1,1)", [2.0, 2.0], [1.0, 1.0], theta)?,
        example("case IV, r=(1.1,1), a=(1,1.2)", [1.1, 1.0], [1.0, 1.2], theta)?,
        example("case III, r=(1.5,0.5), a=(1,1)", [1.5, 0.5], [1.0, 1.0], theta)?,
    ];

    Ok(ErrataReport { trials, seed, cases, case2_denominator, examples })
}

impl ErrataReport {
    /// Plain-text table, one row per case.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<5}{:>8}{:>12}{:>12}{:>12}{:>12}{:>10}{:>12}{:>12}",
            "case", "n", "jm_exact", "jm_paper", "diff_mean", "diff_max", "out_rng", "num_den", "printed_eps"
        );
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{:<5}{:>8}{:>12.5}{:>12.5}{:>12.5}{:>12.5}{:>10.3}{:>12}{:>12}",
                c.case,
                c.samples,
                c.jm_exact_mean,
                c.jm_paper_mean,
                c.abs_diff_mean,
                c.abs_diff_max,
                c.out_of_range_rate,
                opt(c.num_den_max_rel_dev),
                opt(c.printed_epsilon_max_dev),
            );
        }
        let d = &self.case2_denominator;
        let _ = writeln!(
            s,
            "case II denominator: corrected {:.3e}, as printed {:.3e} (max rel dev, {} samples)",
            d.corrected_max_rel_dev, d.as_printed_max_rel_dev, d.samples
        );
        for e in &self.examples {
            let _ = writeln!(
                s,
                "{}: exact {:.6}, closed form {:.6}, printed eps {}",
                e.label,
                e.jm_exact,
                e.jm_paper,
                opt(e.printed_epsilon)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_example() {
        let r = errata_report(20, 3).unwrap();
        let e = &r.examples[0];
        assert_eq!(e.case, "I");
        assert!((e.jm_paper - 1.0 / 3.0).abs() < 1e-12);
        assert!((e.jm_exact - 0.25).abs() < 1e-12);
        assert_eq!(r.cases.len(), 6);
        assert!(r.cases.iter().all(|c| c.samples == 20));
    }

    #[test]
    fn crossing_obtuse_forms_match_exact() {
        let r = errata_report(200, 1).unwrap();
        for c in r.cases.iter().filter(|c| c.number == 3 || c.number == 6) {
            assert!(c.abs_diff_max < 1e-9, "{c:?}");
        }
        assert!(r.case2_denominator.corrected_max_rel_dev < 1e-12);
        assert!(r.case2_denominator.as_printed_max_rel_dev > 1e-3);
    }

    #[test]
    fn num_den_agree() {
        for c in num_den_consistency(200, 5).unwrap() {
            assert_eq!(c.samples, 200);
            assert!(c.max_rel_dev < 1e-9, "{c:?}");
        }
    }
}
