#![allow(dead_code)]

use std::sync::Arc;

use kahler_tube::potential::{ScalarField, BUILTIN_NAMES};
use kahler_tube::sampling::{in_shell, stream, unit_vector};
use kahler_tube::{parse_potential, Derivs, Domain, PotentialJet, Result};

/// Builtins with concrete parameters.
pub const BUILTINS: [&str; 4] = ["flat", "ell-affine(1)", "ell-loglift(3)", "radial-power(4)"];

pub fn jet(spec: &str, n: usize) -> PotentialJet {
    parse_potential(spec, n).unwrap().jet(n).unwrap()
}

/// A strongly convex non-radial potential in `n` variables.
pub fn quartic_spec(n: usize) -> String {
    let squares: Vec<String> = (0..n).map(|i| format!("{}*x{i}^2", 1.0 + 0.25 * i as f64)).collect();
    let sum: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    format!("{} + 0.1*({})^4 + exp(0.3*x0 - 0.2*x{})", squares.join(" + "), sum.join(" + "), n - 1)
}

/// Points with `lo ≤ |x| ≤ hi`.
pub fn shell_points(n: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    (0..count as u64).map(|k| in_shell(&mut stream(seed, k), n, lo, hi)).collect()
}

pub fn unit_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count as u64).map(|k| unit_vector(&mut stream(seed, k), n)).collect()
}

pub fn builtin_names_are_covered() -> bool {
    BUILTIN_NAMES.iter().all(|name| {
        let stem = name.split('(').next().unwrap();
        BUILTINS.iter().any(|b| b.split('(').next().unwrap() == stem)
    })
}

/// One variable, `Ψ″ = e^{x²}` with `Ψ(0) = Ψ′(0) = 0`.
pub struct GaussHessian;

impl GaussHessian {
    /// `Ψ = Σ x^{2k+2} / (k! (2k+1)(2k+2))` and `Ψ′ = Σ x^{2k+1} / (k! (2k+1))`.
    fn series(x: f64) -> (f64, f64) {
        let (mut v, mut d) = (0.0, 0.0);
        let mut fact = 1.0;
        for k in 0..200 {
            if k > 0 {
                fact *= k as f64;
            }
            let m = 2 * k + 1;
            let p = x.powi(m as i32) / (fact * m as f64);
            d += p;
            v += p * x / (m + 1) as f64;
            if p.abs() < 1e-18 * d.abs().max(1e-300) && k > 4 {
                break;
            }
        }
        (v, d)
    }

    pub fn potential() -> PotentialJet {
        PotentialJet::new(Arc::new(GaussHessian), Domain::Ball { radius: 3.0 })
    }
}

impl ScalarField for GaussHessian {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(Self::series(x[0]).0)
    }

    fn derivs(&self, x: &[f64], order: usize) -> Result<Derivs> {
        let t = x[0];
        let e = (t * t).exp();
        let (v, d1) = Self::series(t);
        let mut d = Derivs::zeros(1, order);
        d.value = v;
        d.grad[0] = d1;
        d.hess[(0, 0)] = e;
        if order >= 3 {
            d.third[0] = 2.0 * t * e;
        }
        if order >= 4 {
            d.fourth[0] = (2.0 + 4.0 * t * t) * e;
        }
        Ok(d)
    }

    fn label(&self) -> String {
        "gauss-hessian".into()
    }
}

/// `|a − b| / (1 + |a|)`.
pub fn scaled(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs())
}
