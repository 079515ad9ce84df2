//! Radial curvature profile and classifiers for O(n)-symmetric potentials.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::RadialPotential;
use crate::quad;
use crate::sampling::log_grid;
use crate::verdict::{SignStatus, SignVerdict, Witness};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 512;
pub const GRID_R_MAX_PROBE: f64 = 1e3;
const REFINE: usize = 8;

/// Radial quantities at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    pub r: f64,
    pub f: f64,
    pub f1: f64,
    pub fd: f64,
    pub fdd: f64,
    pub fddd: f64,
    pub h: f64,
    pub ell: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub ell3: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `(1+h/f)²A + 2(1+h/f)B + C`
    pub d: f64,
    pub a_ell: f64,
    pub ab_ell: f64,
    pub d_ell: f64,
}

impl RadialState {
    /// Largest scaled disagreement between the f-form and ℓ-form coefficients.
    pub fn form_discrepancy(&self) -> f64 {
        let rel = |x: f64, y: f64| (x - y).abs() / (1.0 + x.abs().max(y.abs()));
        rel(self.a, self.a_ell).max(rel(self.a + self.b, self.ab_ell)).max(rel(self.d, self.d_ell))
    }

    /// `h = λ/ℓ²` mismatch, relative.
    pub fn h_discrepancy(&self) -> f64 {
        let alt = self.lambda / (self.ell * self.ell);
        (self.h - alt).abs() / self.h.abs()
    }

    pub fn orth_bisectional(&self) -> f64 {
        let r2 = self.r * self.r;
        -self.fd + r2 * self.fd * self.fd / self.f - r2 * self.fdd
    }
}

/// Compute `f, h, ℓ, λ` and the coefficients A, B, C, D at `r` in both forms.
pub fn radial_state(rp: &RadialPotential, r: f64) -> Result<RadialState> {
    let p = rp.profile(r)?;
    let [ell, ell1, ell2, ell3] = rp.ell_derivs(r)?;
    let (f, fd, fdd, fddd) = (p.f, p.fd, p.fdd, p.fddd);
    let h = f + r * p.f1;
    let lambda = ell - r * ell1;
    if !(f > 0.0 && h > 0.0 && lambda > 0.0) {
        return Err(Error::MetricPositivity { r, f, h });
    }
    let r2 = r * r;
    let a = -(f / h) * fd;
    let b = (r2 / h) * (2.0 * fd * fd - f * fdd);
    let q = h / f;
    let c = (-4.0 / q + 2.0 + 8.0 * q - 6.0 * q * q) * fd
        + 4.0 * (q - 1.0 / q) * r2 * fdd
        + (r2 * r2 * r2 / h) * fdd * fdd
        - r2 * r2 * fddd;
    let d = (1.0 + q).powi(2) * a + 2.0 * (1.0 + q) * b + c;

    let (l, l1, l2, l3, lam) = (ell, ell1, ell2, ell3, lambda);
    let a_ell = l1 / (r * lam * l);
    let ab_ell = l2 / (lam * l);
    // Collected over λ so that no two large terms cancel (exact for affine ℓ).
    let d_ell = (3.0 * lam * l1 + 2.0 * r2 * l1 * l2 + r * l * l2 + r2 * l * l3 + r2 * r * l * l2 * l2 / lam) / (r * l * l * l);
    Ok(RadialState {
        r,
        f,
        f1: p.f1,
        fd,
        fdd,
        fddd,
        h,
        ell,
        ell1,
        ell2,
        ell3,
        lambda,
        a,
        b,
        c,
        d,
        a_ell,
        ab_ell,
        d_ell,
    })
}

/// `−f (log f)″`, the bisectional value for `u = x/r` and `v ⊥ x`.
pub fn orthogonal_bisectional_radial(rp: &RadialPotential, r: f64) -> Result<f64> {
    let p = rp.profile(r)?;
    let r2 = r * r;
    Ok(-p.fd + r2 * p.fd * p.fd / p.f - r2 * p.fdd)
}

/// Projections of a pair of complex unit vectors onto the radial direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialVectorPair {
    pub alpha_u: Complex64,
    pub alpha_v: Complex64,
    /// `Σ u_i v_i`
    pub beta: Complex64,
    /// `Σ u_i v̄_i`
    pub pair_lambda: Complex64,
}

impl RadialVectorPair {
    /// From a base point `x ≠ 0` and Euclidean-unit `u, v ∈ ℂⁿ`.
    pub fn from_vectors(x: &[f64], u: &[Complex64], v: &[Complex64]) -> Result<Self> {
        let r = crate::potential::norm(x);
        let unit = |w: &[Complex64]| (w.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-10;
        if r == 0.0 || u.len() != x.len() || v.len() != x.len() || !unit(u) || !unit(v) {
            return Err(Error::Invalid("vector pair must be unit vectors at a nonzero point".into()));
        }
        let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<Complex64>();
        let xr: Vec<Complex64> = x.iter().map(|t| Complex64::new(t / r, 0.0)).collect();
        let vbar: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        Ok(RadialVectorPair { alpha_u: dot(u, &xr), alpha_v: dot(v, &xr), beta: dot(u, v), pair_lambda: dot(u, &vbar) })
    }

    /// The data `α_u = 1, α_v = β = λ = 0` of `u = x/r`, `v ⊥ x`.
    pub fn radial_orthogonal() -> Self {
        let z = Complex64::new(0.0, 0.0);
        RadialVectorPair { alpha_u: Complex64::new(1.0, 0.0), alpha_v: z, beta: z, pair_lambda: z }
    }

    /// `ℬ = Re(β̄ α_u α_v)`
    pub fn cal_b(&self) -> f64 {
        (self.beta.conj() * self.alpha_u * self.alpha_v).re
    }

    /// `𝒞 = Re(λ ᾱ_u α_v)`
    pub fn cal_c(&self) -> f64 {
        (self.pair_lambda * self.alpha_u.conj() * self.alpha_v).re
    }

    fn check(&self) -> Result<()> {
        let ok = |z: Complex64| z.norm() <= 1.0 + 1e-12;
        if ok(self.alpha_u) && ok(self.alpha_v) && ok(self.beta) && ok(self.pair_lambda) {
            Ok(())
        } else {
            Err(Error::Invalid("inconsistent vector pair: projections exceed 1".into()))
        }
    }
}

/// `4 R(u, ū, v, v̄)` of the lifted metric at radius `r`.
pub fn bisectional_radial(rp: &RadialPotential, r: f64, pair: &RadialVectorPair) -> Result<f64> {
    pair.check()?;
    let p = rp.profile(r)?;
    let (f, fd, fdd, fddd) = (p.f, p.fd, p.fdd, p.fddd);
    let h = f + r * p.f1;
    let r2 = r * r;
    let r4 = r2 * r2;
    let au2 = pair.alpha_u.norm_sqr();
    let av2 = pair.alpha_v.norm_sqr();
    let uv2 = au2 * av2;
    Ok(-fd * (1.0 + pair.pair_lambda.norm_sqr()) - (f * fd / h) * pair.beta.norm_sqr()
        + (r2 * fd * fd / f - r2 * fdd) * (au2 + av2 + 2.0 * pair.cal_c())
        + uv2 * ((4.0 * r4 * fd * fdd + r4 * r2 * fdd * fdd) / h - 4.0 * r4 * fd.powi(3) / (f * h) - r4 * fddd)
        + pair.cal_b() * (4.0 * r2 * fd * fd - 2.0 * r2 * f * fdd) / h)
}

/// Default classifier grid: log-spaced on `(max(r_min,1e-4)·a′, 0.999·a′)`, `a′ = min(a, r_max_probe)`.
pub fn default_grid(rp: &RadialPotential, r_max_probe: f64, count: usize) -> Vec<f64> {
    let a = rp.radius().min(r_max_probe);
    log_grid(rp.r_min().max(1e-4) * a, 0.999 * a, count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoabVerdict {
    pub n: usize,
    pub a: SignVerdict,
    pub a_plus_b: SignVerdict,
    pub d: SignVerdict,
    pub status: SignStatus,
    /// Radii where the metric positivity check failed.
    pub failed_radii: Vec<f64>,
}

fn refine_around(grid: &[f64], idx: usize) -> Vec<f64> {
    let lo = grid[idx.saturating_sub(1)];
    let hi = grid[(idx + 1).min(grid.len() - 1)];
    if lo == hi {
        return vec![];
    }
    let count = REFINE * (if idx == 0 || idx + 1 == grid.len() { 1 } else { 2 }) + 1;
    log_grid(lo, hi, count)
}

fn sign_scan<F: Fn(&RadialState) -> f64 + Sync>(
    states: &[(f64, Option<RadialState>)],
    rp: &RadialPotential,
    name: &str,
    q: F,
    tol: f64,
) -> SignVerdict {
    let vals: Vec<(f64, f64)> = states.iter().filter_map(|(r, s)| s.as_ref().map(|s| (*r, q(s)))).collect();
    if vals.is_empty() {
        return SignVerdict::classify(f64::NAN, None, tol, 0);
    }
    let grid: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let mut spots: Vec<usize> = Vec::new();
    let argmin = (0..vals.len()).min_by(|&i, &j| vals[i].1.total_cmp(&vals[j].1)).unwrap();
    spots.push(argmin);
    for i in 0..vals.len().saturating_sub(1) {
        let (a, b) = (vals[i].1, vals[i + 1].1);
        if (a >= -tol) != (b >= -tol) {
            spots.push(i);
            spots.push(i + 1);
        }
    }
    spots.sort_unstable();
    spots.dedup();
    spots.truncate(64);
    let extra: Vec<f64> = spots.iter().flat_map(|&i| refine_around(&grid, i)).collect();
    let refined: Vec<(f64, f64)> =
        extra.par_iter().filter_map(|&r| radial_state(rp, r).ok().map(|s| (r, q(&s)))).collect();
    let (mut r_min, mut v_min) = vals[argmin];
    for &(r, v) in &refined {
        if v < v_min {
            v_min = v;
            r_min = r;
        }
    }
    let witness = Witness::Radius { r: r_min, quantity: name.to_string(), value: v_min };
    SignVerdict::classify(v_min, Some(witness), tol, vals.len() + refined.len())
}

/// (NOAB) on a radius grid: A+B ≥ 0 and D ≥ 0, plus A ≥ 0 when n ≥ 3.
pub fn classify_noab(rp: &RadialPotential, n: usize, grid: &[f64], tol: f64) -> NoabVerdict {
    let states: Vec<(f64, Option<RadialState>)> = grid.par_iter().map(|&r| (r, radial_state(rp, r).ok())).collect();
    let failed_radii: Vec<f64> = states.iter().filter(|s| s.1.is_none()).map(|s| s.0).collect();
    let a = sign_scan(&states, rp, "A", |s| s.a, tol);
    let a_plus_b = sign_scan(&states, rp, "A+B", |s| s.a + s.b, tol);
    let d = sign_scan(&states, rp, "D", |s| s.d_ell, tol);
    let mut status = a_plus_b.status.and(d.status);
    if n >= 3 {
        status = status.and(a.status);
    }
    if !failed_radii.is_empty() {
        status = status.and(SignStatus::Inconclusive);
    }
    NoabVerdict { n, a, a_plus_b, d, status, failed_radii }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Completeness {
    LikelyComplete,
    LikelyIncomplete,
    Inconclusive,
}

/// Tuning for [`classify_completeness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessConfig {
    /// Largest radius probed when `a = ∞`.
    pub r_max_probe: f64,
    /// Width of the tail fit window in decades.
    pub window_decades: f64,
    pub fit_points: usize,
    /// Exponents within `1 ± p_band` count as borderline.
    pub p_band: f64,
    /// Borderline tails `s^{-1} log^{-m}` count as divergent for `m ≤ 1 + m_band`.
    pub m_band: f64,
}

impl Default for CompletenessConfig {
    fn default() -> Self {
        CompletenessConfig { r_max_probe: 1e8, window_decades: 4.0, fit_points: 40, p_band: 0.05, m_band: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub verdict: Completeness,
    /// Fitted `p` in `√h ≈ C s^{-p} log(1/s)^{-m}` (s = distance to the boundary,
    /// or `1/r` when `a = ∞`).
    pub p: f64,
    pub m: f64,
    /// `(R, ∫ √h dr over [r₀, R])` on a geometric grid toward the boundary.
    pub partial_integrals: Vec<(f64, f64)>,
}

fn sqrt_h(rp: &RadialPotential, r: f64) -> Option<f64> {
    let [ell, ell1, ..] = rp.ell_derivs(r).ok()?;
    let lambda = ell - r * ell1;
    let h = lambda / (ell * ell);
    (h > 0.0 && h.is_finite()).then(|| h.sqrt())
}

/// Least-squares fit `log √h = c − p log t − m log log t` over `t` (t → ∞ at the boundary).
fn tail_fit(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(t, y) in samples {
        let row = Vector3::new(1.0, -t.ln(), -t.ln().ln());
        ata += row * row.transpose();
        atb += row * y;
    }
    let sol = ata.lu().solve(&atb)?;
    Some((sol[1], sol[2]))
}

/// Heuristic completeness test based on divergence of `∫ √h dr` toward the boundary.
pub fn classify_completeness(rp: &RadialPotential, cfg: &CompletenessConfig) -> CompletenessReport {
    let a = rp.radius();
    let start = if rp.smooth_at_origin() { 0.0 } else { rp.r_min() };
    // t grows toward the boundary: t = 1/(a − r) or t = r.
    let to_r = |t: f64| if a.is_finite() { a - 1.0 / t } else { t };
    let t_max = if a.is_finite() { 1e12 / a } else { cfg.r_max_probe };
    let t_lo = t_max / 10f64.powf(cfg.window_decades);
    let t_lo = if a.is_finite() { t_lo.max(2.0 / a) } else { t_lo.max(10.0) };
    let mut samples = Vec::with_capacity(cfg.fit_points);
    for t in log_grid(t_lo, t_max, cfg.fit_points) {
        if let Some(s) = sqrt_h(rp, to_r(t)) {
            samples.push((t, s.ln()));
        }
    }
    let mut partial_integrals = Vec::new();
    let mut acc = 0.0;
    let mut prev = start;
    let marks: Vec<f64> = if a.is_finite() {
        (1..=40).map(|k| a - a * 0.5f64.powi(k)).collect()
    } else {
        let mut v = vec![];
        let mut r = 1.0;
        while r <= cfg.r_max_probe {
            v.push(r);
            r *= 10.0;
        }
        v
    };
    for r in marks {
        // Substitute s = a − e^{−u} (finite a) or s = e^u so each panel spans comparable scales.
        let (v, _) = if a.is_finite() {
            let (u0, u1) = (-(a - prev).ln(), -(a - r).ln());
            quad::integrate(|u| sqrt_h(rp, a - (-u).exp()).map_or(f64::NAN, |q| q * (-u).exp()), u0, u1, 1e-300, 1e-8)
        } else if prev == 0.0 {
            quad::integrate(|s| sqrt_h(rp, s).unwrap_or(f64::NAN), 0.0, r, 1e-300, 1e-8)
        } else {
            quad::integrate(|u| sqrt_h(rp, u.exp()).map_or(f64::NAN, |q| q * u.exp()), prev.ln(), r.ln(), 1e-300, 1e-8)
        };
        if !v.is_finite() {
            break;
        }
        acc += v;
        prev = r;
        partial_integrals.push((r, acc));
    }
    let inconclusive = |p, m, partial_integrals| CompletenessReport { verdict: Completeness::Inconclusive, p, m, partial_integrals };
    if samples.len() < cfg.fit_points / 2 {
        return inconclusive(f64::NAN, f64::NAN, partial_integrals);
    }
    let Some((p, m)) = tail_fit(&samples) else {
        return inconclusive(f64::NAN, f64::NAN, partial_integrals);
    };
    // In t, divergence of ∫ √h dr means ∫ t^{-p} log^{-m}(t) dt/t^{2} (finite a) or dt (a = ∞) diverges.
    // Both reduce to comparing the effective exponent with 1.
    let divergent = if a.is_finite() {
        if p > 1.0 + cfg.p_band {
            Some(true)
        } else if p < 1.0 - cfg.p_band {
            Some(false)
        } else {
            // √h ~ s^{-1} log(1/s)^{-m}: divergent iff m ≤ 1.
            borderline(m, cfg.m_band)
        }
    } else if p < 1.0 - cfg.p_band {
        Some(true)
    } else if p > 1.0 + cfg.p_band {
        Some(false)
    } else {
        borderline(m, cfg.m_band)
    };
    let verdict = match divergent {
        Some(true) => Completeness::LikelyComplete,
        Some(false) => Completeness::LikelyIncomplete,
        None => Completeness::Inconclusive,
    };
    CompletenessReport { verdict, p, m, partial_integrals }
}

fn borderline(m: f64, band: f64) -> Option<bool> {
    if m <= 1.0 + band {
        Some(true)
    } else if m >= 1.0 + 3.0 * band {
        Some(false)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub completeness: Completeness,
    pub orth_bisectional_min: f64,
    pub orth_bisectional_argmin: f64,
    /// Complete with nonnegative orthogonal bisectional value on the grid, so f must be constant.
    pub flatness_branch: bool,
    pub max_abs_f1: f64,
    pub noab: SignStatus,
    /// (NOAB), n ≥ 3 and complete, so the domain must be all of ℝⁿ.
    pub unbounded_branch: bool,
    pub domain_unbounded: bool,
    pub consistent: bool,
}

/// Check the observable consequences of the rigidity statements on a grid.
pub fn flatness_diagnostic(
    rp: &RadialPotential,
    n: usize,
    grid: &[f64],
    tol: f64,
    cfg: &CompletenessConfig,
) -> FlatnessReport {
    let completeness = classify_completeness(rp, cfg).verdict;
    let mut orth_bisectional_min = f64::INFINITY;
    let mut orth_bisectional_argmin = f64::NAN;
    let mut max_abs_f1 = 0.0f64;
    for &r in grid {
        if let (Ok(v), Ok(p)) = (orthogonal_bisectional_radial(rp, r), rp.profile(r)) {
            if v < orth_bisectional_min {
                orth_bisectional_min = v;
                orth_bisectional_argmin = r;
            }
            max_abs_f1 = max_abs_f1.max(p.f1.abs());
        }
    }
    let complete = completeness == Completeness::LikelyComplete;
    let flatness_branch = complete && orth_bisectional_min >= -tol;
    let noab = classify_noab(rp, n, grid, tol).status;
    let unbounded_branch = complete && n >= 3 && noab == SignStatus::NonNegative;
    let domain_unbounded = rp.radius().is_infinite();
    let consistent = (!flatness_branch || max_abs_f1 <= tol) && (!unbounded_branch || domain_unbounded);
    FlatnessReport {
        completeness,
        orth_bisectional_min,
        orth_bisectional_argmin,
        flatness_branch,
        max_abs_f1,
        noab,
        unbounded_branch,
        domain_unbounded,
        consistent,
    }
}
