//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a function
//! of `nvars` variables around a point, for every multi-index with
//! `|α| ≤ order`. Sums and products are exact truncated polynomial
//! operations; elementary functions are applied by composing their Taylor
//! series at the constant term with the nilpotent remainder. No step sizes
//! are involved anywhere, so every derivative is correct to rounding.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Largest number of variables a jet layout may carry.
pub const MAX_VARS: usize = 8;

/// Monomial bookkeeping shared by all jets with the same `(nvars, order)`.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    factorial: Vec<f64>,
    index: HashMap<Vec<u8>, usize>,
    /// `(a, b, out)` triples with `deg(a) + deg(b) ≤ order`.
    products: Vec<(u32, u32, u32)>,
    /// For each degree `d`, the monomial index of every flattened index tuple in `[0, n)^d`.
    tuples: Vec<Vec<u32>>,
}

fn enumerate(nvars: usize, degree: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() + 1 == nvars {
        let used: usize = prefix.iter().map(|&e| e as usize).sum();
        prefix.push((degree - used) as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    let used: usize = prefix.iter().map(|&e| e as usize).sum();
    for e in (0..=degree - used).rev() {
        prefix.push(e as u8);
        enumerate(nvars, degree, prefix, out);
        prefix.pop();
    }
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        assert!(nvars >= 1 && nvars <= MAX_VARS, "jet dimension out of range");
        let mut exponents = Vec::new();
        for d in 0..=order {
            enumerate(nvars, d, &mut Vec::new(), &mut exponents);
        }
        let degree: Vec<u8> = exponents.iter().map(|e| e.iter().sum()).collect();
        let factorial = exponents
            .iter()
            .map(|e| e.iter().map(|&k| (1..=k).map(f64::from).product::<f64>()).product())
            .collect();
        let index: HashMap<Vec<u8>, usize> =
            exponents.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mut products = Vec::new();
        let mut sum = vec![0u8; nvars];
        for (a, ea) in exponents.iter().enumerate() {
            for (b, eb) in exponents.iter().enumerate() {
                if (degree[a] + degree[b]) as usize > order {
                    continue;
                }
                for v in 0..nvars {
                    sum[v] = ea[v] + eb[v];
                }
                products.push((a as u32, b as u32, index[&sum] as u32));
            }
        }
        let mut tuples = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let count = nvars.pow(d as u32);
            let mut table = Vec::with_capacity(count);
            let mut e = vec![0u8; nvars];
            for flat in 0..count {
                e.iter_mut().for_each(|x| *x = 0);
                let mut rest = flat;
                for _ in 0..d {
                    e[rest % nvars] += 1;
                    rest /= nvars;
                }
                table.push(index[&e] as u32);
            }
            tuples.push(table);
        }
        Layout { nvars, order, exponents, factorial, index, products, tuples }
    }

    /// Shared layout for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> &'static Layout {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        *guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(Layout::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Index of the monomial with exponent vector `e`, if within the truncation.
    pub fn monomial(&self, e: &[u8]) -> Option<usize> {
        self.index.get(e).copied()
    }
}

/// A truncated Taylor expansion.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(layout: &'static Layout, value: f64) -> Jet {
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(layout: &'static Layout, value: f64, var: usize) -> Jet {
        assert!(var < layout.nvars);
        let mut j = Jet::constant(layout, value);
        if layout.order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            j.coeffs[layout.index[&e]] = 1.0;
        }
        j
    }

    /// Jets of all coordinate functions at `point`.
    pub fn variables(point: &[f64], order: usize) -> Vec<Jet> {
        let layout = Layout::get(point.len(), order);
        point.iter().enumerate().map(|(i, &v)| Jet::variable(layout, v, i)).collect()
    }

    /// Univariate jet of the identity `t ↦ t` at `t`.
    pub fn univariate(t: f64, order: usize) -> Jet {
        Jet::variable(Layout::get(1, order), t, 0)
    }

    /// Univariate jet from the derivatives `f(t), f'(t), …`.
    pub fn from_derivatives(derivs: &[f64]) -> Jet {
        let layout = Layout::get(1, derivs.len() - 1);
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Jet { layout, coeffs }
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of monomial index `m` (see [`Layout::monomial`]).
    pub fn coeff(&self, m: usize) -> f64 {
        self.coeffs[m]
    }

    /// Partial derivative `∂_{i₁} ⋯ ∂_{i_d} f` at the expansion point.
    pub fn partial(&self, indices: &[usize]) -> f64 {
        let d = indices.len();
        assert!(d <= self.layout.order, "derivative order exceeds jet truncation");
        let mut flat = 0;
        for &i in indices.iter().rev() {
            flat = flat * self.layout.nvars + i;
        }
        let m = self.layout.tuples[d][flat] as usize;
        self.coeffs[m] * self.layout.factorial[m]
    }

    /// All derivatives of order `d`, flattened row-major over `[0, n)^d`.
    pub fn derivative_tensor(&self, d: usize) -> Vec<f64> {
        assert!(d <= self.layout.order);
        self.layout.tuples[d]
            .iter()
            .map(|&m| self.coeffs[m as usize] * self.layout.factorial[m as usize])
            .collect()
    }

    /// k-th derivative of a univariate jet.
    pub fn nth_derivative(&self, k: usize) -> f64 {
        debug_assert_eq!(self.layout.nvars, 1);
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.coeffs[k] * fact
    }

    /// `d/dt` of a univariate jet; the result is one order shorter.
    pub fn derivative(&self) -> Jet {
        assert_eq!(self.layout.nvars, 1, "derivative() is for univariate jets");
        assert!(self.layout.order >= 1);
        let layout = Layout::get(1, self.layout.order - 1);
        let coeffs = (0..layout.len()).map(|k| (k + 1) as f64 * self.coeffs[k + 1]).collect();
        Jet { layout, coeffs }
    }

    /// Drop all terms above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.layout.order);
        if order == self.layout.order {
            return self.clone();
        }
        let layout = Layout::get(self.layout.nvars, order);
        let coeffs = layout.exponents.iter().map(|e| self.coeffs[self.layout.index[e]]).collect();
        Jet { layout, coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { layout: self.layout, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += s;
        j
    }

    /// `f ∘ self` where `derivs[k] = f^{(k)}(self.value())`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.layout.order;
        assert!(derivs.len() > order);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Jet::constant(self.layout, derivs[0]);
        let mut power = delta.clone();
        let mut fact = 1.0;
        for (k, &d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            fact *= k as f64;
            let w = d / fact;
            if w != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += w * p;
                }
            }
            if k < order {
                power = &power * &delta;
            }
        }
        out
    }

    fn checked(op: &'static str, value: f64, derivs: Vec<f64>) -> Result<Vec<f64>> {
        if derivs.iter().all(|d| d.is_finite()) {
            Ok(derivs)
        } else {
            Err(Error::Domain { op, value })
        }
    }

    pub fn exp(&self) -> Result<Jet> {
        let e = self.value().exp();
        let d = Jet::checked("exp", self.value(), vec![e; self.order() + 1])?;
        Ok(self.compose(&d))
    }

    pub fn ln(&self) -> Result<Jet> {
        let g = self.value();
        if !(g > 0.0) {
            return Err(Error::Domain { op: "log", value: g });
        }
        let mut d = vec![g.ln()];
        let mut fact = 1.0;
        for k in 1..=self.order() {
            if k > 1 {
                fact *= (k - 1) as f64;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * fact / g.powi(k as i32));
        }
        Ok(self.compose(&Jet::checked("log", g, d)?))
    }

    /// `self^p` for real `p`. Integer exponents allow any base (nonzero when
    /// negative); fractional exponents need a positive base.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let g = self.value();
        let integer = p.fract() == 0.0 && p.abs() < 1e9;
        if !integer && !(g > 0.0) {
            return Err(Error::Domain { op: "fractional power", value: g });
        }
        if integer && p < 0.0 && g == 0.0 {
            return Err(Error::Domain { op: "negative power", value: g });
        }
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut falling = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                falling *= p - (k - 1) as f64;
            }
            let v = if falling == 0.0 {
                0.0
            } else if integer {
                falling * g.powi((p as i64 - k as i64) as i32)
            } else {
                falling * g.powf(p - k as f64)
            };
            d.push(v);
        }
        Ok(self.compose(&Jet::checked("power", g, d)?))
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut acc = Jet::constant(self.layout, 1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn sqrt(&self) -> Result<Jet> {
        if !(self.value() > 0.0) {
            return Err(Error::Domain { op: "sqrt", value: self.value() });
        }
        self.powf(0.5)
    }

    pub fn recip(&self) -> Result<Jet> {
        if self.value() == 0.0 {
            return Err(Error::Domain { op: "division", value: 0.0 });
        }
        self.powf(-1.0)
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        Ok(self * &other.recip()?)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
    };
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        assert!(std::ptr::eq(self.layout, rhs.layout), "jet layouts differ");
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
        Jet { layout: self.layout, coeffs }
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        assert!(std::ptr::eq(self.layout, rhs.layout), "jet layouts differ");
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        Jet { layout: self.layout, coeffs }
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        assert!(std::ptr::eq(self.layout, rhs.layout), "jet layouts differ");
        let mut coeffs = vec![0.0; self.layout.len()];
        for &(a, b, o) in &self.layout.products {
            coeffs[o as usize] += self.coeffs[a as usize] * rhs.coeffs[b as usize];
        }
        Jet { layout: self.layout, coeffs }
    }
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
