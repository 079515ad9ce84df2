use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::quad;

/// Default radial evaluation floor.
pub const R_MIN: f64 = 1e-6;
/// Below this radius smooth potentials switch to their Taylor series at the origin.
const R_SERIES: f64 = 0.02;
const SERIES_ORDER: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum RadialForm {
    /// `Ψ(x) = φ(|x|)`.
    Phi(Expr),
    /// `ℓ(r) = r/φ′(r)`.
    Ell(Expr),
}

/// `f = φ′/r` and its radial derivatives at a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub r: f64,
    pub f: f64,
    /// df/dr
    pub f1: f64,
    /// `ḟ = f′/r`
    pub fd: f64,
    /// `f̈ = (ḟ)′/r`
    pub fdd: f64,
    /// `f⃛ = (f̈)′/r`
    pub fddd: f64,
}

/// An O(n)-symmetric potential on the ball of radius `a`.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    form: RadialForm,
    a: f64,
    r_min: f64,
    phi_closed: Option<Expr>,
    /// Taylor coefficients of `f` at the origin when `f` is even and smooth there.
    series: Option<Vec<f64>>,
}

impl RadialPotential {
    pub fn new(form: RadialForm, a: f64) -> Result<Self> {
        let expr = match &form {
            RadialForm::Phi(e) | RadialForm::Ell(e) => e,
        };
        if expr.arity() > 0 {
            return Err(Error::Invalid("radial expressions may only use r".into()));
        }
        if !(a > 0.0) {
            return Err(Error::Invalid(format!("domain radius must be positive, got {a}")));
        }
        let mut rp = RadialPotential { form, a, r_min: R_MIN, phi_closed: None, series: None };
        rp.series = rp.origin_series();
        Ok(rp)
    }

    pub fn phi(expr: Expr, a: f64) -> Result<Self> {
        Self::new(RadialForm::Phi(expr), a)
    }

    pub fn ell(expr: Expr, a: f64) -> Result<Self> {
        Self::new(RadialForm::Ell(expr), a)
    }

    /// Attach a closed form for φ (ℓ-form potentials otherwise integrate `s/ℓ(s)`).
    /// The closed form must satisfy `φ(0) = 0`.
    pub fn with_phi_closed(mut self, phi: Expr) -> Self {
        self.phi_closed = Some(phi);
        self
    }

    pub fn with_radius(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    pub fn form(&self) -> &RadialForm {
        &self.form
    }

    pub fn radius(&self) -> f64 {
        self.a
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// True when the lift is smooth at the origin and radii below `r_min` are allowed.
    pub fn smooth_at_origin(&self) -> bool {
        self.series.is_some()
    }

    fn origin_series(&self) -> Option<Vec<f64>> {
        let t = Jet::univariate(0.0, SERIES_ORDER + 2);
        let coeffs: Vec<f64> = match &self.form {
            RadialForm::Phi(e) => {
                let phi = e.eval_jet(&[], &t).ok()?;
                let c = phi.coeffs();
                let scale = c.iter().skip(2).fold(0.0f64, |m, v| m.max(v.abs()));
                if c[1].abs() > 1e-14 * scale.max(1e-300) {
                    return None;
                }
                (0..=SERIES_ORDER).map(|k| (k + 2) as f64 * c[k + 2]).collect()
            }
            RadialForm::Ell(e) => {
                let ell = e.eval_jet(&[], &t.truncate(SERIES_ORDER)).ok()?;
                ell.recip().ok()?.coeffs().to_vec()
            }
        };
        if !coeffs.iter().all(|c| c.is_finite()) || !(coeffs[0] > 0.0) {
            return None;
        }
        let even = coeffs.iter().step_by(2).fold(0.0f64, |m, v| m.max(v.abs()));
        let odd = coeffs.iter().skip(1).step_by(2).fold(0.0f64, |m, v| m.max(v.abs()));
        (odd <= 1e-12 * even).then_some(coeffs)
    }

    pub fn check_radius(&self, r: f64) -> Result<()> {
        let lo_ok = if self.series.is_some() { r >= 0.0 } else { r >= self.r_min };
        if lo_ok && r < self.a && r.is_finite() {
            Ok(())
        } else {
            Err(Error::RadiusOutOfRange { r, r_min: self.r_min, a: self.a })
        }
    }

    /// Univariate jet of `f` at `r` to order 3.
    fn f_jet(&self, r: f64) -> Result<Jet> {
        match &self.form {
            RadialForm::Phi(e) => {
                let phi = e.eval_jet(&[], &Jet::univariate(r, 4))?;
                phi.derivative().checked_div(&Jet::univariate(r, 3))
            }
            RadialForm::Ell(e) => e.eval_jet(&[], &Jet::univariate(r, 3))?.recip(),
        }
    }

    /// `[ℓ, ℓ′, ℓ″, ℓ‴]` at `r`.
    pub fn ell_derivs(&self, r: f64) -> Result<[f64; 4]> {
        self.check_radius(r)?;
        let ell = match &self.form {
            RadialForm::Ell(e) => e.eval_jet(&[], &Jet::univariate(r, 3))?,
            RadialForm::Phi(_) => self.f_jet(r)?.recip()?,
        };
        Ok([0, 1, 2, 3].map(|k| ell.nth_derivative(k)))
    }

    /// `[f, f′, f″, f‴]` at `r`.
    pub fn f_derivs(&self, r: f64) -> Result<[f64; 4]> {
        self.check_radius(r)?;
        let f = self.f_jet(r)?;
        Ok([0, 1, 2, 3].map(|k| f.nth_derivative(k)))
    }

    pub fn profile(&self, r: f64) -> Result<RadialProfile> {
        self.check_radius(r)?;
        if let Some(c) = self.series.as_ref().filter(|_| r < R_SERIES) {
            return Ok(series_profile(c, r));
        }
        let f = self.f_jet(r)?;
        let inv = |k: usize| Jet::univariate(r, k).recip();
        let fd = &f.derivative() * &inv(2)?;
        let fdd = &fd.derivative() * &inv(1)?;
        let fddd = fdd.derivative().value() / r;
        Ok(RadialProfile { r, f: f.value(), f1: f.nth_derivative(1), fd: fd.value(), fdd: fdd.value(), fddd })
    }

    /// `φ(r)` normalized so that ℓ-form potentials have `φ(0) = 0`.
    pub fn phi_value(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        if let Some(p) = &self.phi_closed {
            return p.eval(&[], r);
        }
        match &self.form {
            RadialForm::Phi(e) => e.eval(&[], r),
            RadialForm::Ell(e) => {
                let mut failure = None;
                let (v, _) = quad::integrate(
                    |s| match e.eval(&[], s) {
                        Ok(l) if l > 0.0 => s / l,
                        Ok(l) => {
                            failure.get_or_insert(Error::Domain { op: "ell", value: l });
                            0.0
                        }
                        Err(err) => {
                            failure.get_or_insert(err);
                            0.0
                        }
                    },
                    0.0,
                    r,
                    1e-300,
                    1e-15,
                );
                match failure {
                    Some(err) => Err(err),
                    None => Ok(v),
                }
            }
        }
    }

    /// `φ′(r) = r f(r)`.
    pub fn phi_prime(&self, r: f64) -> Result<f64> {
        Ok(r * self.profile(r)?.f)
    }
}

fn series_profile(c: &[f64], r: f64) -> RadialProfile {
    let r2 = r * r;
    let (mut f, mut fd, mut fdd, mut fddd) = (0.0, 0.0, 0.0, 0.0);
    for k in (0..c.len()).step_by(2).rev() {
        let m = k as f64;
        f = f * r2 + c[k];
        if k >= 2 {
            fd = fd * r2 + m * c[k];
        }
        if k >= 4 {
            fdd = fdd * r2 + m * (m - 2.0) * c[k];
        }
        if k >= 6 {
            fddd = fddd * r2 + m * (m - 2.0) * (m - 4.0) * c[k];
        }
    }
    RadialProfile { r, f, f1: r * fd, fd, fdd, fddd }
}
