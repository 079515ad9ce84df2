use std::sync::Arc;

use super::{Domain, PotentialJet, RadialPotential};
use crate::error::{Error, Result};
use crate::expr::Expr;

pub const BUILTIN_NAMES: [&str; 4] = ["flat", "ell-affine(c)", "ell-loglift(c)", "radial-power(p)"];

/// Result of [`parse_potential`].
#[derive(Debug, Clone)]
pub enum Parsed {
    Radial { potential: Arc<RadialPotential>, label: String },
    General(PotentialJet),
}

impl Parsed {
    pub fn radial(&self) -> Option<&Arc<RadialPotential>> {
        match self {
            Parsed::Radial { potential, .. } => Some(potential),
            Parsed::General(p) => p.radial(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Parsed::Radial { label, .. } => label.clone(),
            Parsed::General(p) => p.label(),
        }
    }

    /// The potential on ℝⁿ (lifting radial profiles).
    pub fn jet(&self, n: usize) -> Result<PotentialJet> {
        match self {
            Parsed::Radial { potential, label } => Ok(PotentialJet::lift_radial(potential.clone(), n, label.clone())),
            Parsed::General(p) if p.dim() == n => Ok(p.clone()),
            Parsed::General(p) => Err(Error::DimensionMismatch { index: p.dim(), dim: n }),
        }
    }
}

fn number_arg(body: &str, name: &str, offset: usize) -> Result<f64> {
    let inner = body
        .strip_prefix(name)
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Parse { position: offset, message: format!("expected {name}(<number>)") })?;
    inner.trim().parse::<f64>().map_err(|_| Error::Parse {
        position: offset + name.len() + 1,
        message: format!("bad numeric argument '{}'", inner.trim()),
    })
}

/// Parse a potential spec.
///
/// Accepted forms: a builtin name (`flat`, `ell-affine(c)`, `ell-loglift(c)`,
/// `radial-power(p)`), `phi:<expr in r>`, `ell:<expr in r>`, a bare expression
/// in `r` (read as φ), or an expression in `x0 … x{n−1}`. An optional suffix
/// `@a=<radius>` restricts to a ball, `@box=<lo>:<hi>` to a cube.
pub fn parse_potential(spec: &str, n: usize) -> Result<Parsed> {
    let (body, domain) = match spec.rsplit_once('@') {
        Some((b, d)) => (b.trim(), Some(parse_domain(d.trim(), b.len() + 1, n)?)),
        None => (spec.trim(), None),
    };
    let radius = match &domain {
        None => f64::INFINITY,
        Some(Domain::Ball { radius }) => *radius,
        Some(Domain::Box { .. }) => f64::NAN,
    };
    let radial = |rp: RadialPotential, label: String| -> Result<Parsed> {
        if radius.is_nan() {
            return Err(Error::Invalid("radial potentials take a ball domain (@a=…)".into()));
        }
        let rp = rp.with_radius(radius);
        probe_radial(&rp)?;
        Ok(Parsed::Radial { potential: Arc::new(rp), label })
    };
    let label = spec.trim().to_string();
    if body == "flat" {
        let rp = RadialPotential::ell(Expr::Const(1.0), f64::INFINITY)?.with_phi_closed(Expr::parse("r^2/2")?);
        return radial(rp, label);
    }
    if body.starts_with("ell-affine") {
        let c = number_arg(body, "ell-affine", 0)?;
        if !(c > 0.0) {
            return Err(Error::Invalid(format!("ell-affine needs c > 0, got {c}")));
        }
        let rp = RadialPotential::ell(Expr::parse(&format!("{c} + r"))?, f64::INFINITY)?
            .with_phi_closed(Expr::parse(&format!("r - {c}*log(({c} + r)/{c})"))?);
        return radial(rp, label);
    }
    if body.starts_with("ell-loglift") {
        let c = number_arg(body, "ell-loglift", 0)?;
        if !(c > 1.0) {
            return Err(Error::Invalid(format!("ell-loglift needs c > 1, got {c}")));
        }
        let rp = RadialPotential::ell(Expr::parse(&format!("r + 1/log({c} + r)^2"))?, f64::INFINITY)?;
        return radial(rp, label);
    }
    if body.starts_with("radial-power") {
        let p = number_arg(body, "radial-power", 0)?;
        if !(p > 1.0) {
            return Err(Error::Invalid(format!("radial-power needs p > 1, got {p}")));
        }
        let rp = RadialPotential::phi(Expr::parse(&format!("r^{p}/{p}"))?, f64::INFINITY)?;
        return radial(rp, label);
    }
    if let Some(rest) = body.strip_prefix("phi:") {
        return radial(RadialPotential::phi(Expr::parse(rest)?, f64::INFINITY)?, label);
    }
    if let Some(rest) = body.strip_prefix("ell:") {
        return radial(RadialPotential::ell(Expr::parse(rest)?, f64::INFINITY)?, label);
    }
    let expr = Expr::parse(body)?;
    if expr.arity() == 0 && expr.uses_r() {
        return radial(RadialPotential::phi(expr, f64::INFINITY)?, label);
    }
    expr.check_dimension(n)?;
    let p = PotentialJet::from_expr(expr, n, domain.unwrap_or_else(Domain::whole))?;
    probe_general(&p)?;
    Ok(Parsed::General(p))
}

fn parse_domain(text: &str, offset: usize, n: usize) -> Result<Domain> {
    let bad = |m: &str| Error::Parse { position: offset, message: m.to_string() };
    if let Some(v) = text.strip_prefix("a=") {
        let radius: f64 = v.trim().parse().map_err(|_| bad("bad radius"))?;
        if !(radius > 0.0) {
            return Err(bad("radius must be positive"));
        }
        return Ok(Domain::Ball { radius });
    }
    if let Some(v) = text.strip_prefix("box=") {
        let (lo, hi) = v.split_once(':').ok_or_else(|| bad("expected box=<lo>:<hi>"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad("bad box bound"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("bad box bound"))?;
        if !(lo < hi) {
            return Err(bad("empty box"));
        }
        return Ok(Domain::Box { lo: vec![lo; n], hi: vec![hi; n] });
    }
    Err(bad("expected a=<radius> or box=<lo>:<hi>"))
}

fn probe_radial(rp: &RadialPotential) -> Result<()> {
    let a = rp.radius();
    let probes = [0.1, 0.5, 1.0, 2.0, 10.0].map(|t| if a.is_finite() { t * a / 11.0 } else { t });
    for r in probes {
        let p = match rp.profile(r) {
            Ok(p) => p,
            Err(Error::Domain { .. } | Error::RadiusOutOfRange { .. }) => continue,
            Err(e) => return Err(e),
        };
        let h = p.f + r * p.f1;
        if !(p.f > 0.0 && h > 0.0) {
            return Err(Error::MetricPositivity { r, f: p.f, h });
        }
    }
    Ok(())
}

fn probe_general(p: &PotentialJet) -> Result<()> {
    let n = p.dim();
    let mut probes = vec![vec![0.0; n]];
    if let Domain::Box { lo, hi } = p.domain() {
        probes[0] = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    }
    let scale = (0.5 * p.domain().margin(&probes[0])).min(0.5);
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut x = probes[0].clone();
            x[i] += s * scale;
            probes.push(x);
        }
    }
    for x in probes {
        match p.derivs(&x, 2) {
            Ok(_) => {}
            Err(e @ Error::NotStronglyConvex { .. }) => return Err(e),
            Err(_) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let p = parse_potential("ell-affine(1)", 2).unwrap();
        let ell = p.radial().unwrap().ell_derivs(1.0).unwrap();
        assert_eq!(ell[..3], [2.0, 1.0, 0.0]);
        let q = parse_potential("ell-loglift(3)", 2).unwrap();
        let ell0 = q.radial().unwrap().ell_derivs(1e-5).unwrap()[0];
        let expect = 1e-5 + 1.0 / (3.0f64 + 1e-5).ln().powi(2);
        assert!((ell0 - expect).abs() < 1e-15);
    }

    #[test]
    fn general_and_radial_forms() {
        assert!(matches!(parse_potential("x0^2 + x1^2", 2).unwrap(), Parsed::General(_)));
        assert!(matches!(parse_potential("r^2/2 + r^4", 2).unwrap(), Parsed::Radial { .. }));
        assert!(matches!(parse_potential("ell:1 + r^(1/2)", 3).unwrap(), Parsed::Radial { .. }));
        assert!(matches!(parse_potential("x0^2 + x2^2", 2), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(parse_potential("x0^2 - x1^2", 2), Err(Error::NotStronglyConvex { .. })));
        assert!(matches!(parse_potential("ell-affine(1", 2), Err(Error::Parse { .. })));
    }

    #[test]
    fn domain_suffix() {
        let p = parse_potential("flat@a=1", 2).unwrap();
        assert_eq!(p.radial().unwrap().radius(), 1.0);
        let q = parse_potential("x0^2@box=-1:1", 1).unwrap().jet(1).unwrap();
        assert!(!q.contains(&[1.5]));
    }
}
