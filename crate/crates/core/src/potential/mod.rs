//! Convex potentials with exact derivatives to fourth order.

mod builtins;
pub mod dual;
pub mod fd;
mod radial_potential;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;

pub use builtins::{parse_potential, Parsed, BUILTIN_NAMES};
pub use dual::DualChart;
pub use radial_potential::{RadialForm, RadialPotential, RadialProfile, R_MIN};

/// Derivatives of Ψ at a point. Tensors are flattened row-major over `[0, n)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivs {
    pub n: usize,
    pub order: usize,
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub third: Vec<f64>,
    pub fourth: Vec<f64>,
}

impl Derivs {
    pub fn zeros(n: usize, order: usize) -> Self {
        Derivs {
            n,
            order,
            value: 0.0,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
            third: vec![0.0; if order >= 3 { n * n * n } else { 0 }],
            fourth: vec![0.0; if order >= 4 { n * n * n * n } else { 0 }],
        }
    }

    pub fn from_jet(j: &Jet) -> Self {
        let n = j.layout().nvars();
        let order = j.order();
        let mut d = Derivs::zeros(n, order);
        d.value = j.value();
        if order >= 1 {
            d.grad = DVector::from_vec(j.derivative_tensor(1));
        }
        if order >= 2 {
            d.hess = DMatrix::from_row_slice(n, n, &j.derivative_tensor(2));
        }
        if order >= 3 {
            d.third = j.derivative_tensor(3);
        }
        if order >= 4 {
            d.fourth = j.derivative_tensor(4);
        }
        d
    }

    #[inline]
    pub fn t3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn t4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.fourth[((i * self.n + j) * self.n + k) * self.n + l]
    }

    /// `Ψ_{ijk} a^i b^j` as a covector in `k`.
    pub fn third_contract2(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.t3(i, j, k) * a[i] * b[j];
                }
            }
            s
        })
    }

    /// `Ψ_{ijkl} a^i b^j c^k d^l`.
    pub fn fourth_contract(&self, a: &[f64], b: &[f64], c: &[f64], e: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let ab = a[i] * b[j];
                if ab == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        s += self.t4(i, j, k, l) * ab * c[k] * e[l];
                    }
                }
            }
        }
        s
    }

    /// Largest violation of index-permutation symmetry over all arrays.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = (&self.hess - self.hess.transpose()).amax();
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = self.t3(i, j, k);
                        for w in [self.t3(j, i, k), self.t3(i, k, j), self.t3(k, j, i)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        if self.order >= 4 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let v = self.t4(i, j, k, l);
                            for w in [self.t4(j, i, k, l), self.t4(i, k, j, l), self.t4(i, j, l, k)] {
                                worst = worst.max((v - w).abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Where a potential is defined.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Open ball of the given radius around the origin (`∞` for all of ℝⁿ).
    Ball { radius: f64 },
    /// Open axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn whole() -> Self {
        Domain::Ball { radius: f64::INFINITY }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { radius } => norm(x) < *radius,
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v > l && v < h),
        }
    }

    /// Euclidean distance from `x` to the boundary (`∞` when unbounded).
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { radius } => radius - norm(x),
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// A source of derivative arrays. Implementations must be pure.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn derivs(&self, x: &[f64], order: usize) -> Result<Derivs>;
    /// Short human-readable name.
    fn label(&self) -> String;
}

/// A general expression `Ψ(x₀, …, x_{n−1})` differentiated with jets.
#[derive(Debug, Clone)]
pub struct ExprField {
    n: usize,
    expr: Expr,
    label: String,
}

impl ExprField {
    pub fn new(expr: Expr, n: usize, label: impl Into<String>) -> Result<Self> {
        expr.check_dimension(n)?;
        Ok(ExprField { n, expr, label: label.into() })
    }
}

fn radius_jet(xs: &[Jet]) -> Result<Jet> {
    let mut s = &xs[0] * &xs[0];
    for x in &xs[1..] {
        s = s + x * x;
    }
    s.sqrt()
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x, norm(x))
    }

    fn derivs(&self, x: &[f64], order: usize) -> Result<Derivs> {
        let xs = Jet::variables(x, order);
        let r = if self.expr.uses_r() { radius_jet(&xs)? } else { Jet::constant(xs[0].layout(), norm(x)) };
        Ok(Derivs::from_jet(&self.expr.eval_jet(&xs, &r)?))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `Ψ(x) = φ(|x|)` with derivative arrays assembled from `f, ḟ, f̈, f⃛`.
#[derive(Debug, Clone)]
pub struct RadialLift {
    n: usize,
    radial: Arc<RadialPotential>,
    label: String,
}

impl RadialLift {
    pub fn new(radial: Arc<RadialPotential>, n: usize, label: impl Into<String>) -> Self {
        RadialLift { n, radial, label: label.into() }
    }
}

impl ScalarField for RadialLift {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.radial.phi_value(norm(x))
    }

    fn derivs(&self, x: &[f64], order: usize) -> Result<Derivs> {
        let n = self.n;
        let r = norm(x);
        let p = self.radial.profile(r)?;
        let mut d = Derivs::zeros(n, order);
        d.value = self.radial.phi_value(r)?;
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        // Entries are evaluated at the sorted index tuple so all permutations agree bit for bit.
        for i in 0..n {
            d.grad[i] = p.f * x[i];
            for j in 0..n {
                let (a, b) = (i.min(j), i.max(j));
                d.hess[(i, j)] = p.f * delta(a, b) + p.fd * x[a] * x[b];
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = [i, j, k];
                        s.sort_unstable();
                        let [a, b, c] = s;
                        d.third[(i * n + j) * n + k] = p.fd
                            * (delta(a, b) * x[c] + delta(b, c) * x[a] + delta(a, c) * x[b])
                            + p.fdd * x[a] * x[b] * x[c];
                    }
                }
            }
        }
        if order >= 4 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let at = ((i * n + j) * n + k) * n + l;
                            let mut s = [i, j, k, l];
                            s.sort_unstable();
                            let [i, j, k, l] = s;
                            let dd = delta(i, j) * delta(k, l) + delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k);
                            let dx = delta(i, j) * x[k] * x[l]
                                + delta(i, k) * x[j] * x[l]
                                + delta(i, l) * x[j] * x[k]
                                + delta(j, k) * x[i] * x[l]
                                + delta(j, l) * x[i] * x[k]
                                + delta(k, l) * x[i] * x[j];
                            d.fourth[at] = p.fd * dd + p.fdd * dx + p.fddd * x[i] * x[j] * x[k] * x[l];
                        }
                    }
                }
            }
        }
        Ok(d)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// A strongly convex potential on a domain Ω ⊂ ℝⁿ.
#[derive(Clone)]
pub struct PotentialJet {
    field: Arc<dyn ScalarField>,
    domain: Domain,
    radial: Option<Arc<RadialPotential>>,
}

impl fmt::Debug for PotentialJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialJet")
            .field("label", &self.field.label())
            .field("n", &self.field.dim())
            .field("domain", &self.domain)
            .finish()
    }
}

impl PotentialJet {
    pub fn new(field: Arc<dyn ScalarField>, domain: Domain) -> Self {
        PotentialJet { field, domain, radial: None }
    }

    pub fn from_expr(expr: Expr, n: usize, domain: Domain) -> Result<Self> {
        let label = expr.to_string();
        Ok(Self::new(Arc::new(ExprField::new(expr, n, label)?), domain))
    }

    /// The O(n)-invariant lift `Ψ(x) = φ(|x|)` of a radial potential.
    pub fn lift_radial(rp: Arc<RadialPotential>, n: usize, label: impl Into<String>) -> Self {
        let domain = Domain::Ball { radius: rp.radius() };
        PotentialJet {
            field: Arc::new(RadialLift::new(rp.clone(), n, label)),
            domain,
            radial: Some(rp),
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn label(&self) -> String {
        self.field.label()
    }

    pub fn radial(&self) -> Option<&Arc<RadialPotential>> {
        self.radial.as_ref()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.domain.contains(x)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::WrongLength { expected: self.dim(), got: x.len() });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.field.value(x)
    }

    /// Derivative arrays to `order` (≤ 4), without the convexity check.
    pub fn derivs_unchecked(&self, x: &[f64], order: usize) -> Result<Derivs> {
        assert!(order <= 4, "derivatives are available to fourth order");
        self.check_point(x)?;
        self.field.derivs(x, order)
    }

    /// Derivative arrays to `order`; errors unless `Ψ_ij(x)` is positive definite.
    pub fn derivs(&self, x: &[f64], order: usize) -> Result<Derivs> {
        let d = self.derivs_unchecked(x, order.max(2))?;
        if d.hess.iter().any(|v| !v.is_finite()) || d.hess.clone().cholesky().is_none() {
            let min_eigenvalue = d.hess.clone().symmetric_eigenvalues().min();
            return Err(Error::NotStronglyConvex { point: x.to_vec(), min_eigenvalue });
        }
        Ok(d)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.derivs(x, 2)?.grad)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.derivs(x, 2)?.hess)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_field_matches_hand_derivatives() {
        // Ψ = x0²x1 + exp(x1)
        let p = PotentialJet::from_expr(Expr::parse("x0^2*x1 + exp(x1)").unwrap(), 2, Domain::whole()).unwrap();
        let d = p.derivs_unchecked(&[1.0, 0.5], 4).unwrap();
        let e = 0.5f64.exp();
        assert!((d.grad[0] - 1.0).abs() < 1e-15);
        assert!((d.hess[(1, 1)] - e).abs() < 1e-14);
        assert!((d.t3(0, 0, 1) - 2.0).abs() < 1e-15);
        assert!((d.t3(0, 1, 0) - 2.0).abs() < 1e-15);
        assert!((d.t4(1, 1, 1, 1) - e).abs() < 1e-14);
        assert_eq!(d.symmetry_defect(), 0.0);
    }

    #[test]
    fn non_convex_point_is_an_error() {
        let p = PotentialJet::from_expr(Expr::parse("x0^4").unwrap(), 1, Domain::whole()).unwrap();
        assert!(matches!(p.derivs(&[0.0], 2), Err(Error::NotStronglyConvex { .. })));
        assert!(p.derivs(&[1.0], 2).is_ok());
    }

    #[test]
    fn domain_is_enforced() {
        let p = PotentialJet::from_expr(Expr::parse("x0^2").unwrap(), 1, Domain::Ball { radius: 1.0 }).unwrap();
        assert!(matches!(p.value(&[2.0]), Err(Error::OutsideDomain { .. })));
        assert!(matches!(p.value(&[0.0, 1.0]), Err(Error::WrongLength { .. })));
    }
}
