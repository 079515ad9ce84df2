//! Closed forms for the two worked radial examples, checked against the
//! generic radial pipeline.
//!
//! Example 1 is `ℓ = c + r`, for which `r ℓ⁴ D = 3cℓ`. Example 2 is
//! `ℓ = r + 1/L²` with `L = log(c + r)`, `c log(c)³ ≥ 2`; here D is a rational
//! function whose numerator is a quartic in r with L-dependent coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::potential::{parse_potential, RadialPotential};
use crate::radial::{classify_completeness, radial_state, Completeness, CompletenessConfig, CompletenessReport};
use crate::sampling::log_grid;

/// Lower bound on `log c` used in the positivity argument.
pub const LOG_C_LOWER: f64 = 0.87;

pub fn loglift_constraint(c: f64) -> f64 {
    c * c.ln().powi(3)
}

/// The closed-form pieces of D for Example 2 at `(r, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixTerms {
    pub r: f64,
    pub c: f64,
    /// `𝒜₀ … 𝒜₄`
    pub coeffs: [f64; 5],
    /// `Σ 𝒜ᵢ rⁱ`
    pub numer_from_coeffs: f64,
    /// The numerator as a polynomial in L.
    pub numer: f64,
    pub denom: f64,
    pub a: f64,
    pub b: f64,
    pub c_coef: f64,
    pub d: f64,
}

fn coeffs(c: f64, l: f64) -> [f64; 5] {
    let l2 = l * l;
    let l3 = l2 * l;
    let (l4, l5, l6) = (l3 * l, l3 * l2, l3 * l3);
    let c2 = c * c;
    let c3 = c2 * c;
    [
        3.0 * c3 * l3 * (-2.0 + c * l3),
        -18.0 * c2 * l2 - 16.0 * c2 * l3 + 12.0 * c3 * l5 + 12.0 * c3 * l6,
        -60.0 * c * l - 58.0 * c * l2 - 18.0 * c * l3 + 30.0 * c2 * l4 + 42.0 * c2 * l5 + 18.0 * c2 * l6,
        -60.0 - 88.0 * l - 44.0 * l2 - 8.0 * l3 + 12.0 * c * l3 + 54.0 * c * l4 + 44.0 * c * l5 + 12.0 * c * l6,
        -12.0 * l2 + 20.0 * l4 + 14.0 * l5 + 3.0 * l6,
    ]
}

pub fn appendix_terms(r: f64, c: f64) -> AppendixTerms {
    let l = (c + r).ln();
    let big = c + r;
    let (r2, r3) = (r * r, r * r * r);
    let (c2, c3) = (c * c, c * c * c);
    let lp = |k: i32| l.powi(k);
    let co = coeffs(c, l);
    let numer_from_coeffs = co[0] + r * (co[1] + r * (co[2] + r * (co[3] + r * co[4])));
    let numer = -60.0 * r3 - 4.0 * r2 * (15.0 * c + 22.0 * r) * l
        - 2.0 * r * (9.0 * c2 + 29.0 * c * r + 2.0 * r2 * (11.0 + 3.0 * r)) * lp(2)
        - 2.0 * (3.0 * c3 + 8.0 * c2 * r + 3.0 * c * (3.0 - 2.0 * r) * r2 + 4.0 * r3) * lp(3)
        + 2.0 * r2 * (15.0 * c2 + 27.0 * c * r + 10.0 * r2) * lp(4)
        + 2.0 * r * (6.0 * c3 + 21.0 * c2 * r + 22.0 * c * r2 + 7.0 * r3) * lp(5)
        + 3.0 * big.powi(4) * lp(6);
    let core = (2.0 * r + big * l) * (1.0 + r * lp(2));
    let denom = r * big.powi(3) * l * (2.0 * r + big * l) * (1.0 + r * lp(2)).powi(3);
    let a = lp(2) * (-2.0 + big * lp(3)) / (r * core);
    let b = l * (6.0 * r + 2.0 * (c + 2.0 * r) * l - big * big * lp(4)) / (r * big * core);
    let c_num = -60.0 * r3 - 4.0 * r2 * (19.0 * c + 26.0 * r) * l
        - 2.0 * r * (17.0 * c2 + 49.0 * c * r + 2.0 * r2 * (17.0 + 3.0 * r)) * lp(2)
        - 2.0 * (3.0 * c3 + 12.0 * c2 * r + 4.0 * r3 * (2.0 + 3.0 * r) + c * r2 * (17.0 + 6.0 * r)) * lp(3)
        - 2.0 * r2 * (5.0 * c2 + 17.0 * c * r + 14.0 * r2) * lp(4)
        + 2.0 * r * (2.0 * c3 + 3.0 * c2 * r - 2.0 * c * r2 - 3.0 * r3) * lp(5)
        + 3.0 * big * big * (c2 + 2.0 * c * r + r2 - 4.0 * r3) * lp(6)
        - 2.0 * r2 * big * big * (c + 3.0 * r) * lp(7)
        + 2.0 * r * big.powi(4) * lp(8)
        + r2 * big.powi(4) * lp(10);
    AppendixTerms {
        r,
        c,
        coeffs: co,
        numer_from_coeffs,
        numer,
        denom,
        a,
        b,
        c_coef: c_num / denom,
        d: numer / denom,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixD {
    pub value: f64,
    /// `c log(c)³ ≥ 2`; the value is computed either way.
    pub constraint_ok: bool,
}

pub fn appendix_a_d(r: f64, c: f64) -> AppendixD {
    AppendixD { value: appendix_terms(r, c).d, constraint_ok: loglift_constraint(c) >= 2.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundChainReport {
    pub c: f64,
    pub constraint_ok: bool,
    /// `u³eᵘ` at `u = 0.87`, below 2, so `c log(c)³ ≥ 2` forces `log c > 0.87`.
    pub footnote_value: f64,
    /// `0.87³ · 3`
    pub footnote_bound: f64,
    pub log_c: f64,
    /// `−36 + 20u + 44u² + 16u³` at `u = 0.87`
    pub a3_chain: f64,
    /// `−12 + 20u² + 14u³ + 3u⁴` at `u = 0.87`
    pub a4_chain: f64,
    /// `𝒜₃(0, c)`
    pub a3_at_zero: f64,
    /// Minima of `𝒜₀ … 𝒜₄` and of the numerator over the grid.
    pub coeff_min: [f64; 5],
    pub numer_min: f64,
    pub denom_min: f64,
    /// Largest `|Σ𝒜ᵢrⁱ − Numer[D]| / (1 + |Numer[D]|)` over the grid.
    pub transcription_defect: f64,
    pub passes: bool,
}

pub fn appendix_a_bound_chain(c: f64, grid: &[f64]) -> BoundChainReport {
    let u = LOG_C_LOWER;
    let (u2, u3) = (u * u, u * u * u);
    let terms: Vec<AppendixTerms> = grid.par_iter().map(|&r| appendix_terms(r, c)).collect();
    let mut coeff_min = [f64::INFINITY; 5];
    let (mut numer_min, mut denom_min, mut defect) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for t in &terms {
        for (m, v) in coeff_min.iter_mut().zip(t.coeffs) {
            *m = m.min(v);
        }
        numer_min = numer_min.min(t.numer);
        if t.r > 0.0 {
            denom_min = denom_min.min(t.denom);
        }
        defect = defect.max((t.numer_from_coeffs - t.numer).abs() / (1.0 + t.numer.abs()));
    }
    let a3_at_zero = appendix_terms(0.0, c).coeffs[3];
    let a3_chain = -36.0 + 20.0 * u + 44.0 * u2 + 16.0 * u3;
    let a4_chain = -12.0 + 20.0 * u2 + 14.0 * u3 + 3.0 * u2 * u2;
    let constraint_ok = loglift_constraint(c) >= 2.0;
    let footnote_value = u3 * u.exp();
    let passes = constraint_ok
        && footnote_value < 2.0
        && c.ln() > u
        && a3_chain > 0.0
        && a4_chain > 0.0
        && a3_at_zero > a3_chain
        && coeff_min.iter().all(|&m| m >= -1e-12)
        && numer_min >= -1e-12
        && denom_min > 0.0
        && defect <= 1e-12;
    BoundChainReport {
        c,
        constraint_ok,
        footnote_value,
        footnote_bound: u3 * 3.0,
        log_c: c.ln(),
        a3_chain,
        a4_chain,
        a3_at_zero,
        coeff_min,
        numer_min,
        denom_min,
        transcription_defect: defect,
        passes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPipelineReport {
    pub c: f64,
    pub max_rel_diff: f64,
    pub worst_r: f64,
    pub points: usize,
}

fn loglift(c: f64) -> Result<std::sync::Arc<RadialPotential>> {
    Ok(parse_potential(&format!("ell-loglift({c})"), 2)?.radial().unwrap().clone())
}

/// Rational-form D against the pipeline's D for `ell-loglift(c)`.
pub fn appendix_cross_pipeline(c: f64, grid: &[f64]) -> Result<CrossPipelineReport> {
    let rp = loglift(c)?;
    let diffs = grid
        .par_iter()
        .map(|&r| -> Result<(f64, f64)> {
            let s = radial_state(&rp, r)?;
            let closed = appendix_terms(r, c).d;
            Ok(((s.d_ell - closed).abs() / closed.abs().max(f64::MIN_POSITIVE), r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (max_rel_diff, worst_r) = diffs.into_iter().fold((0.0, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    Ok(CrossPipelineReport { c, max_rel_diff, worst_r, points: grid.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Report {
    pub c: f64,
    /// `max |r ℓ⁴ D − 3cℓ| / (1 + 3cℓ)`
    pub max_residual: f64,
    pub worst_r: f64,
    pub points: usize,
    pub passes: bool,
}

pub const EXAMPLE1_TOL: f64 = 1e-10;

pub fn example1_identity(c: f64, grid: &[f64]) -> Result<Example1Report> {
    let rp = parse_potential(&format!("ell-affine({c})"), 2)?.radial().unwrap().clone();
    let res = grid
        .par_iter()
        .map(|&r| -> Result<(f64, f64)> {
            let s = radial_state(&rp, r)?;
            let ell = c + r;
            let target = 3.0 * c * ell;
            Ok(((r * ell.powi(4) * s.d_ell - target).abs() / (1.0 + target), r))
        })
        .collect::<Result<Vec<_>>>()?;
    let (max_residual, worst_r) = res.into_iter().fold((0.0, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    Ok(Example1Report { c, max_residual, worst_r, points: grid.len(), passes: max_residual <= EXAMPLE1_TOL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Report {
    pub c: f64,
    pub constraint_value: f64,
    pub constraint_ok: bool,
    pub lambda_min: f64,
    /// `max |λ − (1/L² + 2r/(RL³))| / ℓ`
    pub lambda_formula_defect: f64,
    pub ell1_min: f64,
    pub ell2_min: f64,
    pub a_min: f64,
    pub a_plus_b_min: f64,
    pub d_pipeline_min: f64,
    pub d_closed_min: f64,
    pub d_max_rel_diff: f64,
    pub completeness: CompletenessReport,
    pub passes: bool,
}

pub fn example2_verdict(c: f64, grid: &[f64]) -> Result<Example2Report> {
    let rp = loglift(c)?;
    let states = grid.par_iter().map(|&r| radial_state(&rp, r)).collect::<Result<Vec<_>>>()?;
    let mut rep = Example2Report {
        c,
        constraint_value: loglift_constraint(c),
        constraint_ok: loglift_constraint(c) >= 2.0,
        lambda_min: f64::INFINITY,
        lambda_formula_defect: 0.0,
        ell1_min: f64::INFINITY,
        ell2_min: f64::INFINITY,
        a_min: f64::INFINITY,
        a_plus_b_min: f64::INFINITY,
        d_pipeline_min: f64::INFINITY,
        d_closed_min: f64::INFINITY,
        d_max_rel_diff: 0.0,
        completeness: classify_completeness(&rp, &CompletenessConfig::default()),
        passes: false,
    };
    for s in &states {
        let (r, big) = (s.r, c + s.r);
        let l = big.ln();
        let closed = appendix_terms(r, c);
        rep.lambda_min = rep.lambda_min.min(s.lambda);
        let lam_formula = 1.0 / (l * l) + 2.0 * r / (big * l.powi(3));
        // Scaled by ℓ: the subtraction ℓ − rℓ′ cannot do better than ε·ℓ.
        rep.lambda_formula_defect = rep.lambda_formula_defect.max((s.lambda - lam_formula).abs() / s.ell);
        rep.ell1_min = rep.ell1_min.min(s.ell1);
        rep.ell2_min = rep.ell2_min.min(s.ell2);
        rep.a_min = rep.a_min.min(s.a);
        rep.a_plus_b_min = rep.a_plus_b_min.min(s.a + s.b);
        rep.d_pipeline_min = rep.d_pipeline_min.min(s.d);
        rep.d_closed_min = rep.d_closed_min.min(closed.d);
        rep.d_max_rel_diff = rep.d_max_rel_diff.max((s.d_ell - closed.d).abs() / closed.d.abs().max(f64::MIN_POSITIVE));
    }
    rep.passes = rep.constraint_ok
        && rep.lambda_min > 0.0
        && rep.lambda_formula_defect <= 1e-12
        && rep.ell1_min > 0.0
        && rep.ell2_min > 0.0
        && rep.a_min > 0.0
        && rep.a_plus_b_min > 0.0
        && rep.d_pipeline_min > 0.0
        && rep.d_closed_min > 0.0
        && rep.d_max_rel_diff <= 1e-8
        && rep.completeness.verdict == Completeness::LikelyComplete;
    Ok(rep)
}

/// 512 log-spaced radii in `[1e-3, 1e3]`.
pub fn default_example_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 512)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_constants() {
        let rep = appendix_a_bound_chain(3.0, &[0.0, 1.0, 10.0]);
        assert!((rep.a3_chain - 25.239648).abs() < 1e-9);
        assert!((rep.a4_chain - 14.07573483).abs() < 1e-9);
        assert!((rep.footnote_bound - 1.975509).abs() < 1e-12);
        assert!(rep.passes, "{rep:?}");
    }

    #[test]
    fn transcription_self_check() {
        for (r, c) in [(0.7, 3.0), (2.5, 5.0), (40.0, 10.0)] {
            let t = appendix_terms(r, c);
            assert!((t.numer_from_coeffs - t.numer).abs() <= 1e-12 * t.numer.abs());
        }
    }

    #[test]
    fn example1_at_one() {
        let rep = example1_identity(1.0, &[1.0]).unwrap();
        assert!(rep.passes);
    }

    #[test]
    fn constraint_flag() {
        assert!(!appendix_a_d(1.0, 1.1).constraint_ok);
        assert!(appendix_a_d(1.0, 3.0).constraint_ok);
    }
}
