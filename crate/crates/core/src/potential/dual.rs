//! Dual coordinates θ = ∇Ψ(x) and their inverse.

use nalgebra::{DMatrix, DVector};

use super::{norm, PotentialJet};
use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 100;

/// Forward and inverse gradient maps of a potential.
#[derive(Debug, Clone)]
pub struct DualChart<'a> {
    potential: &'a PotentialJet,
    tol: f64,
    max_iter: usize,
}

impl<'a> DualChart<'a> {
    pub fn new(potential: &'a PotentialJet) -> Self {
        DualChart { potential, tol: NEWTON_TOL, max_iter: NEWTON_MAX_ITER }
    }

    pub fn potential(&self) -> &PotentialJet {
        self.potential
    }

    pub fn to_dual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.potential.gradient(x)?.as_slice().to_vec())
    }

    pub fn from_dual(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let start = self.initial_guess(theta)?;
        self.from_dual_near(theta, &start)
    }

    fn initial_guess(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let n = self.potential.dim();
        if theta.len() != n {
            return Err(Error::WrongLength { expected: n, got: theta.len() });
        }
        if let Some(rp) = self.potential.radial() {
            // θ = f(r) x, so x is parallel to θ with φ′(r) = |θ|.
            let t = norm(theta);
            if t == 0.0 {
                return Ok(vec![0.0; n]);
            }
            let lo = if rp.smooth_at_origin() { 0.0 } else { rp.r_min().max(1e-300) };
            let r = solve_radius(|r| rp.phi_prime(r), lo, rp.radius(), t)?;
            return Ok(theta.iter().map(|v| v * r / t).collect());
        }
        Ok(match self.potential.domain() {
            super::Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            super::Domain::Ball { .. } => vec![0.0; n],
        })
    }

    /// Damped Newton on ∇Ψ(x) = θ from `start`.
    pub fn from_dual_near(&self, theta: &[f64], start: &[f64]) -> Result<Vec<f64>> {
        let p = self.potential;
        let target = DVector::from_column_slice(theta);
        let mut x = start.to_vec();
        let mut d = p.derivs(&x, 2)?;
        let mut res = (&d.grad - &target).norm();
        let mut polish = 0;
        for _ in 0..self.max_iter {
            if res <= self.tol {
                polish += 1;
                if polish > 2 || res == 0.0 {
                    return Ok(x);
                }
            }
            let step = d.hess.clone().lu().solve(&(&target - &d.grad)).ok_or(Error::Singular)?;
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + scale * s).collect();
                if let Ok(dt) = p.derivs(&trial, 2) {
                    let rt = (&dt.grad - &target).norm();
                    if rt < res {
                        x = trial;
                        d = dt;
                        res = rt;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                if res <= self.tol * (1.0 + target.norm()) {
                    return Ok(x);
                }
                return Err(Error::NewtonDiverged { iterations: self.max_iter, residual: res });
            }
        }
        if res <= self.tol {
            Ok(x)
        } else {
            Err(Error::NewtonDiverged { iterations: self.max_iter, residual: res })
        }
    }

    /// Legendre dual `Ψ*(θ) = ⟨θ, x⟩ − Ψ(x)` with `x = from_dual(θ)`.
    pub fn legendre(&self, theta: &[f64]) -> Result<f64> {
        let x = self.from_dual(theta)?;
        let dot: f64 = theta.iter().zip(&x).map(|(a, b)| a * b).sum();
        Ok(dot - self.potential.value(&x)?)
    }

    /// `Hess_θ Ψ*` by Richardson-extrapolated central differences of `from_dual`.
    pub fn dual_hessian(&self, theta: &[f64], step: f64) -> Result<DMatrix<f64>> {
        let n = theta.len();
        let x0 = self.from_dual(theta)?;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let column = |h: f64| -> Result<Vec<f64>> {
                let mut tp = theta.to_vec();
                let mut tm = theta.to_vec();
                tp[j] += h;
                tm[j] -= h;
                let xp = self.from_dual_near(&tp, &x0)?;
                let xm = self.from_dual_near(&tm, &x0)?;
                Ok(xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            };
            let coarse = column(step)?;
            let fine = column(0.5 * step)?;
            for i in 0..n {
                out[(i, j)] = (4.0 * fine[i] - coarse[i]) / 3.0;
            }
        }
        Ok(out)
    }
}

/// Solve the increasing equation `g(r) = target` on `(lo, hi)`.
fn solve_radius<G: Fn(f64) -> Result<f64>>(g: G, lo: f64, hi: f64, target: f64) -> Result<f64> {
    let mut a = lo;
    let mut b = if hi.is_finite() { hi * (1.0 - 1e-12) } else { 1.0 };
    if hi.is_finite() {
        if g(b)? < target {
            return Err(Error::Precondition("dual point outside the chart image".into()));
        }
    } else {
        let mut tries = 0;
        while g(b)? < target {
            a = b;
            b *= 2.0;
            tries += 1;
            if tries > 2000 {
                return Err(Error::Precondition("dual point outside the chart image".into()));
            }
        }
    }
    if g(a)? > target {
        return Err(Error::Precondition("dual point below the radial evaluation floor".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m)? < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::potential::{parse_potential, Domain};

    #[test]
    fn exponential_duality() {
        let p = PotentialJet::from_expr(Expr::parse("exp(x0)").unwrap(), 1, Domain::whole()).unwrap();
        let chart = DualChart::new(&p);
        assert!((chart.to_dual(&[0.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!(chart.from_dual(&[1.0]).unwrap()[0].abs() < 1e-12);
        assert!((chart.legendre(&[1.0]).unwrap() + 1.0).abs() < 1e-12);
        let x = chart.from_dual(&[20.0]).unwrap()[0];
        assert!((x - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn radial_round_trip() {
        let p = parse_potential("ell-affine(1)", 2).unwrap().jet(2).unwrap();
        let chart = DualChart::new(&p);
        let th = chart.to_dual(&[1.0, 0.0]).unwrap();
        assert!((th[0] - 0.5).abs() < 1e-15 && th[1] == 0.0);
        let x = chart.from_dual(&[0.3, -0.2]).unwrap();
        let back = chart.to_dual(&x).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-10 && (back[1] + 0.2).abs() < 1e-10);
    }
}
