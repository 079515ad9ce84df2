//! The Ψ-cost `c(x, y) = Ψ(x − y)`: cost jets, the MTW tensor, c-segments,
//! relative c-convexity and quantitative quasiconvexity.
//!
//! Index convention: `c_{I,J}` differentiates in x along `I` and in y along `J`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{anti_bisectional_from, sample_nab, NabConfig, NabMode};
use crate::error::{Error, Result};
use crate::geodesy::{default_direction_count, dual_ball_convexity, eps_bisect, EpsSearch};
use crate::potential::{norm, Derivs, DualChart, PotentialJet};
use crate::sampling::{in_ball, stream, unit_vector, SampleRegion, Stream};
use crate::verdict::{MinTracker, SignStatus, SignVerdict, Witness};

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| (1.0 - t) * p + t * q).collect()
}

/// Mixed derivatives of a Ψ-cost at `(x, y)`. Higher arrays are flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostJet {
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    /// `c_i`
    pub c_x: DVector<f64>,
    /// `c_{,j}`
    pub c_y: DVector<f64>,
    /// `c_{i,j}`
    pub c_xy: DMatrix<f64>,
    /// `c_{ij,p}` as `[i][j][p]`
    pub c_xxy: Vec<f64>,
    /// `c_{q,rs}` as `[q][r][s]`
    pub c_xyy: Vec<f64>,
    /// `c_{ij,rs}` as `[i][j][r][s]`
    pub c_xxyy: Vec<f64>,
    /// `c^{i,j}`, the inverse of `c_{i,j}`
    pub c_inv: DMatrix<f64>,
}

impl CostJet {
    /// From the derivatives of Ψ at `x − y`: `c_{i,j} = −Ψ_ij`, `c_{ij,p} = −Ψ_ijp`,
    /// `c_{q,rs} = Ψ_qrs`, `c_{ij,rs} = Ψ_ijrs`.
    pub fn from_derivs(x: &[f64], y: &[f64], d: &Derivs) -> Result<Self> {
        if d.order < 4 {
            return Err(Error::Precondition("cost jets need fourth derivatives".into()));
        }
        let c_xy = -&d.hess;
        let c_inv = c_xy.clone().lu().try_inverse().ok_or(Error::Singular)?;
        Ok(CostJet {
            n: d.n,
            x: x.to_vec(),
            y: y.to_vec(),
            value: d.value,
            c_x: d.grad.clone(),
            c_y: -&d.grad,
            c_xy,
            c_xxy: d.third.iter().map(|v| -v).collect(),
            c_xyy: d.third.clone(),
            c_xxyy: d.fourth.clone(),
            c_inv,
        })
    }

    #[inline]
    fn xxy(&self, i: usize, j: usize, p: usize) -> f64 {
        self.c_xxy[(i * self.n + j) * self.n + p]
    }

    #[inline]
    fn xyy(&self, q: usize, r: usize, s: usize) -> f64 {
        self.c_xyy[(q * self.n + r) * self.n + s]
    }

    #[inline]
    fn xxyy(&self, i: usize, j: usize, r: usize, s: usize) -> f64 {
        let n = self.n;
        self.c_xxyy[((i * n + j) * n + r) * n + s]
    }
}

pub fn cost(p: &PotentialJet, x: &[f64], y: &[f64]) -> Result<f64> {
    p.value(&sub(x, y))
}

pub fn cost_jet(p: &PotentialJet, x: &[f64], y: &[f64]) -> Result<CostJet> {
    CostJet::from_derivs(x, y, &p.derivs(&sub(x, y), 4)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtwValue {
    pub value: f64,
    /// `η(ξ)`
    pub pairing: f64,
    pub orthogonal: bool,
}

/// `𝔖(ξ, η) = Σ (c_{ij,p} c^{p,q} c_{q,rs} − c_{ij,rs}) c^{r,k} c^{s,l} ξ^i ξ^j η_k η_l`
/// for a vector ξ and covector η.
pub fn mtw(cj: &CostJet, xi: &[f64], eta: &[f64], tol: f64) -> MtwValue {
    let n = cj.n;
    let w: Vec<f64> = (0..n).map(|r| (0..n).map(|k| cj.c_inv[(r, k)] * eta[k]).sum()).collect();
    let a: Vec<f64> = (0..n)
        .map(|p| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += cj.xxy(i, j, p) * xi[i] * xi[j];
                }
            }
            s
        })
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|q| {
            let mut s = 0.0;
            for r in 0..n {
                for t in 0..n {
                    s += cj.xyy(q, r, t) * w[r] * w[t];
                }
            }
            s
        })
        .collect();
    let mut first = 0.0;
    for p in 0..n {
        for q in 0..n {
            first += a[p] * cj.c_inv[(p, q)] * b[q];
        }
    }
    let mut second = 0.0;
    for i in 0..n {
        for j in 0..n {
            for r in 0..n {
                for t in 0..n {
                    second += cj.xxyy(i, j, r, t) * xi[i] * xi[j] * w[r] * w[t];
                }
            }
        }
    }
    let pairing: f64 = xi.iter().zip(eta).map(|(a, b)| a * b).sum();
    MtwValue { value: first - second, pairing, orthogonal: pairing.abs() <= tol * norm(xi) * norm(eta) }
}

/// `𝔄(ξ, Ψ⁻¹η)` at `x − y`, which equals `𝔖(ξ, η)` for the Ψ-cost.
pub fn mtw_via_anti_bisectional(d: &Derivs, xi: &[f64], eta: &[f64]) -> Result<f64> {
    let w = d.hess.clone().cholesky().ok_or(Error::Singular)?.solve(&DVector::from_column_slice(eta));
    anti_bisectional_from(d, xi, w.as_slice())
}

/// Euclidean balls `X = B(x_c, ε)`, `Y = B(y_c, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPair {
    pub x_center: Vec<f64>,
    pub y_center: Vec<f64>,
    pub eps: f64,
}

impl BallPair {
    /// The pair with `x_c − y_c = p` and `y_c = 0`.
    pub fn around(p: &[f64], eps: f64) -> Self {
        BallPair { x_center: p.to_vec(), y_center: vec![0.0; p.len()], eps }
    }

    pub fn difference_center(&self) -> Vec<f64> {
        sub(&self.x_center, &self.y_center)
    }

    /// Whether `X − Y = B(x_c − y_c, 2ε)` lies in the domain.
    pub fn fits(&self, p: &PotentialJet) -> bool {
        p.domain().margin(&self.difference_center()) > 2.0 * self.eps
    }

    pub fn sample_x(&self, rng: &mut Stream) -> Vec<f64> {
        in_ball(rng, &self.x_center, self.eps)
    }

    pub fn sample_y(&self, rng: &mut Stream) -> Vec<f64> {
        in_ball(rng, &self.y_center, self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistNondegReport {
    /// Smallest `|eigenvalue|` of `c_{i,j}` minus `floor`.
    pub nondeg: SignVerdict,
    /// Minus the round-trip error of the dual chart on `x − y`.
    pub twist: SignVerdict,
}

pub fn check_twist_nondeg(p: &PotentialJet, pair: &BallPair, samples: usize, floor: f64, tol: f64, seed: u64) -> TwistNondegReport {
    let chart = DualChart::new(p);
    let (nd, tw) = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let (x, y) = (pair.sample_x(&mut rng), pair.sample_y(&mut rng));
            let z = sub(&x, &y);
            let mut nd = MinTracker::default();
            let mut tw = MinTracker::default();
            match p.derivs_unchecked(&z, 2) {
                Ok(d) => {
                    let eig = d.hess.symmetric_eigenvalues();
                    let value = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min) - floor;
                    nd.push(value, || Witness::Point { x: z.clone(), quantity: "mixed_hessian_min_abs_eigenvalue".into(), value });
                }
                Err(_) => nd.push(f64::NEG_INFINITY, || Witness::Point { x: z.clone(), quantity: "cost_undefined".into(), value: f64::NAN }),
            }
            let err = chart
                .to_dual(&z)
                .and_then(|t| chart.from_dual(&t))
                .map(|back| norm(&sub(&back, &z)) / (1.0 + norm(&z)))
                .unwrap_or(f64::INFINITY);
            tw.push(-err, || Witness::Point { x: z.clone(), quantity: "dual_round_trip_error".into(), value: err });
            (nd, tw)
        })
        .reduce(|| (MinTracker::default(), MinTracker::default()), |a, b| (a.0.merge(b.0), a.1.merge(b.1)));
    let clean = |mut t: MinTracker| {
        if t.min == f64::NEG_INFINITY {
            t.min = -1.0;
        }
        t
    };
    TwistNondegReport { nondeg: clean(nd).verdict(tol), twist: clean(tw).verdict(tol) }
}

/// The c*-segment in Y with respect to `x0`: `θ(x0 − y(t))` is affine in `t`,
/// `y(t) = x0 − ∇Ψ*((1−t)θ(x0−y0) + tθ(x0−y1))`.
pub fn c_segment(p: &PotentialJet, x0: &[f64], y0: &[f64], y1: &[f64], t: f64) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(y0.to_vec());
    }
    if t == 1.0 {
        return Ok(y1.to_vec());
    }
    let chart = DualChart::new(p);
    let (z0, z1) = (sub(x0, y0), sub(x0, y1));
    let theta = lerp(&chart.to_dual(&z0)?, &chart.to_dual(&z1)?, t);
    let z = chart.from_dual_near(&theta, &lerp(&z0, &z1, t)).or_else(|_| chart.from_dual(&theta))?;
    Ok(sub(x0, &z))
}

/// The c-segment in X with respect to `y0`. Here `D_y c(x, y0) = −∇Ψ(x − y0)`;
/// the sign does not affect which paths are straight, so
/// `x(s) = y0 + ∇Ψ*((1−s)θ(x0−y0) + sθ(x1−y0))`.
pub fn x_segment(p: &PotentialJet, y0: &[f64], x0: &[f64], x1: &[f64], s: f64) -> Result<Vec<f64>> {
    if s == 0.0 {
        return Ok(x0.to_vec());
    }
    if s == 1.0 {
        return Ok(x1.to_vec());
    }
    let chart = DualChart::new(p);
    let (z0, z1) = (sub(x0, y0), sub(x1, y0));
    let theta = lerp(&chart.to_dual(&z0)?, &chart.to_dual(&z1)?, s);
    let z = chart.from_dual_near(&theta, &lerp(&z0, &z1, s)).or_else(|_| chart.from_dual(&theta))?;
    Ok(y0.iter().zip(&z).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CConvexityReport {
    /// Worst hull residual over the tested balls `x − Y` and `X − y`, as a verdict.
    pub verdict: SignVerdict,
    pub worst_residual: f64,
    pub balls_tested: usize,
}

/// Relative c-convexity of a ball pair: for `centers` sampled `x ∈ X` and
/// `y ∈ Y`, the balls `x − Y` and `X − y` must be convex in θ.
pub fn relative_c_convexity(p: &PotentialJet, pair: &BallPair, centers: usize, boundary: usize, tol: f64, seed: u64) -> Result<CConvexityReport> {
    let mut balls = Vec::with_capacity(2 * centers + 1);
    balls.push(pair.difference_center());
    let mut rng = stream(seed, 0xcc);
    for _ in 0..centers {
        balls.push(sub(&pair.sample_x(&mut rng), &pair.y_center));
        balls.push(sub(&pair.x_center, &pair.sample_y(&mut rng)));
    }
    let results = balls
        .iter()
        .map(|c| dual_ball_convexity(p, c, pair.eps, boundary, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut tracker = MinTracker::default();
    let mut worst_residual: f64 = 0.0;
    for r in &results {
        worst_residual = worst_residual.max(r.residual);
        tracker.push(r.verdict.min_value, || r.verdict.witness.clone().unwrap());
    }
    Ok(CConvexityReport { verdict: tracker.verdict(tol), worst_residual, balls_tested: results.len() })
}

/// Smallest ε in `[lo, hi]` at which relative c-convexity fails (`None` if it
/// holds throughout).
pub fn first_failing_eps(p: &PotentialJet, x_minus_y: &[f64], lo: f64, hi: f64, boundary: usize, tol: f64) -> Option<f64> {
    let test = |eps: f64| {
        let pair = BallPair::around(x_minus_y, eps);
        pair.fits(p) && relative_c_convexity(p, &pair, 4, boundary, tol, 0).map(|r| r.verdict.holds()).unwrap_or(false)
    };
    match eps_bisect(test, lo, hi, 30) {
        EpsSearch::PassesAtMax { .. } => None,
        EpsSearch::Threshold { failing, .. } => Some(failing),
        EpsSearch::FailsAtMin { eps } => Some(eps),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqConfig {
    pub tuples: usize,
    /// Extra tuples per side built so that `G(1) = 0`, where violations live.
    pub targeted: usize,
    pub t_points: usize,
    pub m_cap: f64,
    /// `G` comparisons use `tol_scale · (1 + |c(x_c, y_c)|)`.
    pub tol_scale: f64,
    pub refine: bool,
    pub seed: u64,
}

impl Default for QqConfig {
    fn default() -> Self {
        QqConfig { tuples: 32, targeted: 8, t_points: 17, m_cap: 1e6, tol_scale: 1e-9, refine: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqConvReport {
    pub pair: BallPair,
    /// Largest `max_t G(t)/(t G(1))` over tuples with `G(1) > tol` (at least 1).
    pub m_sup: f64,
    /// The tuple attaining `m_sup` when it exceeds 1.
    pub m_witness: Option<Witness>,
    /// `max |G(t) − t G(1)|`.
    pub max_linear_gap: f64,
    pub violations: Vec<Witness>,
    pub worst_violation: f64,
    pub tuples: usize,
    pub tol: f64,
    pub quantconv: bool,
}

struct Tuple {
    side: &'static str,
    x: Vec<f64>,
    x0: Vec<f64>,
    x1: Vec<f64>,
    y: Vec<f64>,
    y0: Vec<f64>,
    y1: Vec<f64>,
}

struct TupleEval {
    m_req: f64,
    /// `(t, G(t), G(1))` attaining `m_req`.
    m_at: Option<(f64, f64, f64)>,
    gap: f64,
    /// `(t, G(t), G(1))` of a violation, with its size `max G`.
    violation: Option<(f64, f64, f64)>,
}

impl Tuple {
    /// `G(t)` on the y-side or its x-side mirror `H(s)`.
    fn gain(&self, p: &PotentialJet, t: f64) -> Result<f64> {
        match self.side {
            "y" => {
                let yt = c_segment(p, &self.x0, &self.y0, &self.y1, t)?;
                cross_difference(p, &self.x0, &self.y0, &self.x, &yt)
            }
            _ => {
                let xs = x_segment(p, &self.y0, &self.x0, &self.x1, t)?;
                cross_difference(p, &self.x0, &self.y0, &xs, &self.y)
            }
        }
    }

    fn eval(&self, p: &PotentialJet, ts: &[f64], tol: f64, m_cap: f64) -> Result<TupleEval> {
        let g1 = self.gain(p, 1.0)?;
        let mut m_req: f64 = 1.0;
        let mut m_at = None;
        let mut gap: f64 = 0.0;
        let mut worst = (0.0, f64::NEG_INFINITY);
        for &t in ts {
            if t <= 0.0 || t >= 1.0 {
                continue;
            }
            let g = self.gain(p, t)?;
            gap = gap.max((g - t * g1).abs());
            if g > worst.1 {
                worst = (t, g);
            }
            if g1 > tol && g / (t * g1) > m_req {
                m_req = g / (t * g1);
                m_at = Some((t, g, g1));
            }
        }
        let violation = if g1 > tol {
            (m_req > m_cap).then_some((worst.0, worst.1, g1))
        } else {
            (worst.1 > tol).then_some((worst.0, worst.1, g1))
        };
        let (m_req, m_at) = if g1 > tol { (m_req, m_at) } else { (1.0, None) };
        Ok(TupleEval { m_req, m_at, gap, violation })
    }

    fn witness(&self, t: f64, g_t: f64, g_1: f64) -> Witness {
        Witness::Qqconv {
            side: self.side.into(),
            x: self.x.clone(),
            x0: self.x0.clone(),
            x1: self.x1.clone(),
            y: self.y.clone(),
            y0: self.y0.clone(),
            y1: self.y1.clone(),
            t,
            g_t,
            g_1,
        }
    }
}

/// Solve `f(base + s·dir) = 0` for `s` by the secant method, starting from `s = 0, h`.
fn secant<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Option<f64> {
    let (mut a, mut b) = (0.0, h);
    let (mut fa, mut fb) = (f(a).ok()?, f(b).ok()?);
    for _ in 0..40 {
        if fb == 0.0 || (fb - fa).abs() < f64::MIN_POSITIVE {
            return Some(b);
        }
        let c = b - fb * (b - a) / (fb - fa);
        let fc = f(c).ok()?;
        (a, fa, b, fb) = (b, fb, c, fc);
        if (b - a).abs() <= 1e-15 * (1.0 + b.abs()) {
            return Some(b);
        }
    }
    (fb.abs() < 1e-14).then_some(b)
}

fn random_tuple(pair: &BallPair, side: &'static str, rng: &mut Stream) -> Tuple {
    Tuple {
        side,
        x: pair.sample_x(rng),
        x0: pair.sample_x(rng),
        x1: pair.sample_x(rng),
        y: pair.sample_y(rng),
        y0: pair.sample_y(rng),
        y1: pair.sample_y(rng),
    }
}

/// A tuple with `G(1) = 0` up to roundoff. On the y-side, `x` moves from `x0`
/// along a direction orthogonal to `θ(x0−y1) − θ(x0−y0)` and is then corrected
/// along that difference; the x-side is symmetric in y.
fn targeted_tuple(p: &PotentialJet, pair: &BallPair, side: &'static str, rng: &mut Stream) -> Option<Tuple> {
    let n = pair.x_center.len();
    let chart = DualChart::new(p);
    let eps = pair.eps;
    let mut t = Tuple {
        side,
        x: vec![],
        x0: in_ball(rng, &pair.x_center, eps / 3.0),
        x1: pair.sample_x(rng),
        y: vec![],
        y0: in_ball(rng, &pair.y_center, eps / 3.0),
        y1: pair.sample_y(rng),
    };
    let (free_center, free_start, g) = if side == "y" {
        let g = sub(&chart.to_dual(&sub(&t.x0, &t.y1)).ok()?, &chart.to_dual(&sub(&t.x0, &t.y0)).ok()?);
        (pair.x_center.clone(), t.x0.clone(), g)
    } else {
        let g = sub(&chart.to_dual(&sub(&t.x1, &t.y0)).ok()?, &chart.to_dual(&sub(&t.x0, &t.y0)).ok()?);
        (pair.y_center.clone(), t.y0.clone(), g)
    };
    let gn = norm(&g);
    if gn == 0.0 || n < 2 {
        return None;
    }
    let ghat: Vec<f64> = g.iter().map(|v| v / gn).collect();
    let mut w = unit_vector(rng, n);
    let along: f64 = w.iter().zip(&ghat).map(|(a, b)| a * b).sum();
    w.iter_mut().zip(&ghat).for_each(|(a, b)| *a -= along * b);
    let wn = norm(&w);
    if wn < 1e-8 {
        return None;
    }
    let base: Vec<f64> = free_start.iter().zip(&w).map(|(a, b)| a + 0.5 * eps * b / wn).collect();
    let at = |s: f64| -> Vec<f64> { base.iter().zip(&ghat).map(|(a, b)| a + s * b).collect() };
    let g1 = |s: f64| -> Result<f64> {
        let mut probe = Tuple { side, x: t.x0.clone(), x0: t.x0.clone(), x1: t.x1.clone(), y: t.y0.clone(), y0: t.y0.clone(), y1: t.y1.clone() };
        if side == "y" {
            probe.x = at(s);
        } else {
            probe.y = at(s);
        }
        probe.gain(p, 1.0)
    };
    let s = secant(g1, 1e-3 * eps)?;
    let point = at(s);
    if norm(&sub(&point, &free_center)) >= eps {
        return None;
    }
    if side == "y" {
        t.x = point;
        t.y = pair.sample_y(rng);
    } else {
        t.y = point;
        t.x = pair.sample_x(rng);
    }
    Some(t)
}

const GL6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_1, 0.171_324_492_379_170_4),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_1, 0.171_324_492_379_170_4),
];

/// `−c(x, y) + c(x, y0) + c(x0, y) − c(x0, y0)` for the Ψ-cost, written as
/// `∫∫ ⟨x − x0, Ψ″(x0 − y0 + a(x − x0) − b(y − y0)) (y − y0)⟩ da db` so that no
/// four nearly equal costs are subtracted.
fn cross_difference(p: &PotentialJet, x0: &[f64], y0: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let u = DVector::from_vec(sub(x, x0));
    let w = DVector::from_vec(sub(y, y0));
    let z0 = sub(x0, y0);
    let mut total = 0.0;
    for &(na, wa) in &GL6 {
        let a = 0.5 * (na + 1.0);
        for &(nb, wb) in &GL6 {
            let b = 0.5 * (nb + 1.0);
            let z: Vec<f64> = (0..z0.len()).map(|i| z0[i] + a * u[i] - b * w[i]).collect();
            total += 0.25 * wa * wb * u.dot(&(p.hessian(&z)? * &w));
        }
    }
    Ok(total)
}

/// Sampled (QQConv) test on one ball pair, both sides.
pub fn qqconv(p: &PotentialJet, pair: &BallPair, cfg: &QqConfig) -> Result<QqConvReport> {
    if !pair.fits(p) {
        return Err(Error::Precondition("X − Y leaves the domain".into()));
    }
    let tol = cfg.tol_scale * (1.0 + cost(p, &pair.x_center, &pair.y_center)?.abs());
    let ts: Vec<f64> = (0..cfg.t_points).map(|k| k as f64 / (cfg.t_points - 1) as f64).collect();
    let per_side = cfg.tuples + cfg.targeted;
    let results: Vec<(Tuple, TupleEval)> = (0..(2 * per_side) as u64)
        .into_par_iter()
        .filter_map(|k| {
            let mut rng = stream(cfg.seed, k);
            let side = if (k as usize) < per_side { "y" } else { "x" };
            let tuple = if (k as usize) % per_side < cfg.tuples {
                random_tuple(pair, side, &mut rng)
            } else {
                targeted_tuple(p, pair, side, &mut rng)?
            };
            let e = tuple.eval(p, &ts, tol, cfg.m_cap).ok()?;
            Some((tuple, e))
        })
        .collect();
    let mut report = QqConvReport {
        pair: pair.clone(),
        m_sup: 1.0,
        m_witness: None,
        max_linear_gap: 0.0,
        violations: vec![],
        worst_violation: 0.0,
        tuples: results.len(),
        tol,
        quantconv: true,
    };
    let mut refine_from: Option<usize> = None;
    for (i, (tuple, e)) in results.iter().enumerate() {
        report.max_linear_gap = report.max_linear_gap.max(e.gap);
        if e.m_req > report.m_sup {
            report.m_sup = e.m_req;
            report.m_witness = e.m_at.map(|(t, g_t, g_1)| tuple.witness(t, g_t, g_1));
            refine_from = Some(i);
        }
        if let Some((t, g_t, g_1)) = e.violation {
            report.worst_violation = report.worst_violation.max(g_t);
            report.violations.push(tuple.witness(t, g_t, g_1));
        }
    }
    if cfg.refine {
        if let Some(i) = refine_from {
            let fine: Vec<f64> = (0..=4 * (cfg.t_points - 1)).map(|k| k as f64 / (4 * (cfg.t_points - 1)) as f64).collect();
            let (tuple, _) = &results[i];
            if let Ok(e) = tuple.eval(p, &fine, tol, cfg.m_cap) {
                if e.m_req > report.m_sup {
                    report.m_sup = e.m_req;
                    report.m_witness = e.m_at.map(|(t, g_t, g_1)| tuple.witness(t, g_t, g_1));
                }
                report.max_linear_gap = report.max_linear_gap.max(e.gap);
                if let Some((t, g_t, g_1)) = e.violation {
                    report.worst_violation = report.worst_violation.max(g_t);
                    report.violations.push(tuple.witness(t, g_t, g_1));
                }
            }
        }
    }
    report.quantconv = report.violations.is_empty() && report.m_sup <= 1.0 + 1e-6;
    Ok(report)
}

/// Re-evaluate a Qqconv witness: returns `(G(t), G(1))`.
pub fn replay_qqconv(p: &PotentialJet, w: &Witness) -> Result<(f64, f64)> {
    let Witness::Qqconv { side, x, x0, x1, y, y0, y1, t, .. } = w else {
        return Err(Error::Invalid("not a qqconv witness".into()));
    };
    let side = if side == "y" { "y" } else { "x" };
    let tuple = Tuple { side, x: x.clone(), x0: x0.clone(), x1: x1.clone(), y: y.clone(), y0: y0.clone(), y1: y1.clone() };
    Ok((tuple.gain(p, *t)?, tuple.gain(p, 1.0)?))
}

/// The point, vector and covector of the MTW configuration a Qqconv witness
/// approximates: `ξ = x − x0`, `η = θ(x0−y1) − θ(x0−y0)` at `x0 − y0` (y-side),
/// or with the roles of x and y exchanged.
pub fn witness_configuration(p: &PotentialJet, w: &Witness) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let Witness::Qqconv { side, x, x0, x1, y, y0, y1, .. } = w else {
        return Err(Error::Invalid("not a qqconv witness".into()));
    };
    let chart = DualChart::new(p);
    let z = sub(x0, y0);
    if side == "y" {
        let eta = sub(&chart.to_dual(&sub(x0, y1))?, &chart.to_dual(&z)?);
        Ok((z, sub(x, x0), eta))
    } else {
        let eta = sub(&chart.to_dual(&sub(x1, y0))?, &chart.to_dual(&z)?);
        Ok((z, sub(y, y0), eta))
    }
}

/// Minimum of 𝔖 over orthogonal pairs near `(z, ξ, η)`: `count` random
/// perturbations of relative size `spread`, with η made orthogonal to ξ.
pub fn mtw_sweep_near(p: &PotentialJet, z: &[f64], xi: &[f64], eta: &[f64], spread: f64, count: usize, tol: f64, seed: u64) -> SignVerdict {
    let n = z.len();
    let (sx, se) = (norm(xi).max(1e-300), norm(eta).max(1e-300));
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut t = MinTracker::default();
            let jitter = |rng: &mut Stream, base: &[f64], scale: f64, amount: f64| -> Vec<f64> {
                let u = unit_vector(rng, n);
                base.iter().zip(&u).map(|(b, d)| b + amount * scale * d).collect()
            };
            let amount = if k == 0 { 0.0 } else { spread };
            let zz = jitter(&mut rng, z, 1.0 + norm(z), amount * 0.1);
            let xi2: Vec<f64> = jitter(&mut rng, xi, sx, amount).iter().map(|v| v / sx).collect();
            let mut eta2: Vec<f64> = jitter(&mut rng, eta, se, amount).iter().map(|v| v / se).collect();
            let xx: f64 = xi2.iter().map(|v| v * v).sum();
            let pr: f64 = xi2.iter().zip(&eta2).map(|(a, b)| a * b).sum::<f64>() / xx;
            eta2.iter_mut().zip(&xi2).for_each(|(e, x)| *e -= pr * x);
            let value = p
                .derivs(&zz, 4)
                .and_then(|d| CostJet::from_derivs(&zz, &vec![0.0; n], &d))
                .map(|cj| mtw(&cj, &xi2, &eta2, 1e-9).value);
            if let Ok(value) = value {
                t.push(value, || Witness::PointVectors { x: zz.clone(), u: xi2.clone(), v: eta2.clone(), quantity: "mtw".into(), value });
            }
            t
        })
        .reduce(MinTracker::default, MinTracker::merge)
        .verdict(tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub eps: f64,
    pub pairs: usize,
    /// Half-width of the region the difference centers are drawn from.
    pub extent: f64,
    pub qq: QqConfig,
    pub nab: NabConfig,
    pub m_tol: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { eps: 0.1, pairs: 16, extent: 2.0, qq: QqConfig::default(), nab: NabConfig::default(), m_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    /// No (QQConv) violation on any pair.
    pub synthetic_noab: SignVerdict,
    /// Additionally `sup M ≤ 1 + m_tol` (QuantConv).
    pub synthetic_nab: SignVerdict,
    pub m_sup: f64,
    pub pairs_tested: usize,
    pub sampled_noab: SignVerdict,
    pub sampled_nab: SignVerdict,
    pub noab_agrees: bool,
    pub nab_agrees: bool,
}

fn pair_is_usable(p: &PotentialJet, pair: &BallPair) -> bool {
    let z = pair.difference_center();
    let n = z.len();
    if !pair.fits(p) || p.derivs(&z, 4).is_err() {
        return false;
    }
    (0..n).all(|i| {
        [-1.0, 1.0].iter().all(|s| {
            let mut q = z.clone();
            q[i] += s * 2.0 * pair.eps;
            p.derivs(&q, 4).is_ok()
        })
    })
}

/// (QQConv) and (QuantConv) over random ball pairs of radius ε, reported next
/// to the sampled anti-bisectional verdicts.
pub fn synthetic_verdicts(p: &PotentialJet, cfg: &SyntheticConfig) -> SyntheticReport {
    let n = p.dim();
    let region = SampleRegion::for_domain(p.domain(), n, cfg.extent);
    let mut rng = stream(cfg.seed(), 0x5e);
    let mut pairs = Vec::new();
    let mut attempts = 0;
    while pairs.len() < cfg.pairs && attempts < 50 * cfg.pairs.max(1) {
        attempts += 1;
        let pair = BallPair::around(&region.draw(&mut rng), cfg.eps);
        if pair_is_usable(p, &pair) {
            pairs.push(pair);
        }
    }
    let reports: Vec<QqConvReport> = pairs
        .iter()
        .enumerate()
        .filter_map(|(k, pair)| {
            let qq = QqConfig { seed: cfg.qq.seed.wrapping_add(1000 * k as u64), ..cfg.qq.clone() };
            qqconv(p, pair, &qq).ok()
        })
        .collect();
    let mut noab = MinTracker::default();
    let mut m_sup: f64 = 1.0;
    let mut m_witness = None;
    let mut tol: f64 = 0.0;
    for r in &reports {
        tol = tol.max(r.tol);
        let value = -r.worst_violation;
        let worst = r.violations.iter().find(|w| matches!(w, Witness::Qqconv { g_t, .. } if *g_t == r.worst_violation));
        noab.push(value, || worst.cloned().unwrap_or(Witness::Ball { center: r.pair.difference_center(), eps: r.pair.eps, residual: 0.0 }));
        if r.m_sup > m_sup {
            m_sup = r.m_sup;
            m_witness = r.m_witness.clone();
        }
    }
    let tol = if tol > 0.0 { tol } else { cfg.qq.tol_scale };
    let synthetic_noab = noab.verdict(tol);
    let mut synthetic_nab = SignVerdict::classify(1.0 - m_sup, m_witness, cfg.m_tol, reports.len());
    synthetic_nab.status = synthetic_nab.status.and(synthetic_noab.status);
    if synthetic_nab.witness.is_none() && synthetic_nab.is_violated() {
        synthetic_nab.witness = synthetic_noab.witness.clone();
    }
    let sampled_noab = sample_nab(p, &region, &NabConfig { mode: NabMode::Noab, ..cfg.nab.clone() });
    let sampled_nab = sample_nab(p, &region, &NabConfig { mode: NabMode::Nab, ..cfg.nab.clone() });
    let agree = |a: &SignVerdict, b: &SignVerdict| a.status == b.status || a.status == SignStatus::Inconclusive || b.status == SignStatus::Inconclusive;
    SyntheticReport {
        noab_agrees: agree(&synthetic_noab, &sampled_noab),
        nab_agrees: agree(&synthetic_nab, &sampled_nab),
        synthetic_noab,
        synthetic_nab,
        m_sup,
        pairs_tested: reports.len(),
        sampled_noab,
        sampled_nab,
    }
}

impl SyntheticConfig {
    fn seed(&self) -> u64 {
        self.qq.seed
    }
}

/// Default boundary sample count for ball tests in dimension `n`.
pub fn default_boundary(n: usize) -> usize {
    default_direction_count(n)
}
