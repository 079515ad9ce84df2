use std::path::Path;

use serde::Serialize;

use kahler_tube::curvature::{self, BoundSide};
use kahler_tube::geodesy;
use kahler_tube::radial::radial_state;
use kahler_tube::transport;
use kahler_tube::{DualChart, SignVerdict, Witness};

use crate::commands::{bound_side, load, ricci_excess, Failure, Loaded, Outcome, NONDEG_FLOOR};
use crate::report::{Report, WitnessEntry};

#[derive(Debug, Serialize)]
pub struct ReplayLine {
    pub source: String,
    pub quantity: String,
    pub recorded: f64,
    pub replayed: Option<f64>,
    pub identical: bool,
    pub reproduced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ReplayReport {
    pub command: &'static str,
    pub source_command: String,
    pub entries: Vec<ReplayLine>,
}

impl ReplayReport {
    /// 1 when every witnessed violation reproduces, 2 when some do not, 0 with nothing to replay.
    pub fn exit_code(&self) -> i32 {
        if self.entries.is_empty() {
            0
        } else if self.entries.iter().all(|e| e.reproduced) {
            1
        } else {
            2
        }
    }
}

pub fn replay(path: &Path) -> Outcome<ReplayReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let report: Report = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{} is not a report: {e}", path.display())))?;
    let loaded = if report.witnesses.is_empty() { None } else { Some(load(&report.config)?) };
    let entries = report
        .witnesses
        .iter()
        .map(|w| {
            let got = evaluate(loaded.as_ref().unwrap(), &report, w);
            let (replayed, error) = match got {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.message)),
            };
            ReplayLine {
                source: w.source.clone(),
                quantity: w.quantity.clone(),
                recorded: w.value,
                replayed,
                identical: replayed == Some(w.value),
                reproduced: replayed.is_some_and(|v| SignVerdict::classify(v, None, w.tol, 1).is_violated()),
                error,
            }
        })
        .collect();
    Ok(ReplayReport { command: "replay", source_command: report.command, entries })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Re-evaluate the signed quantity a witness entry records.
fn evaluate(loaded: &Loaded, report: &Report, e: &WitnessEntry) -> Outcome<f64> {
    let p = &loaded.jet;
    let cfg = &report.config;
    let q = e.quantity.as_str();
    match &e.witness {
        Witness::Radius { r, .. } => {
            let s = radial_state(loaded.radial()?, *r)?;
            match q {
                "A" => Ok(s.a),
                "A+B" => Ok(s.a + s.b),
                "D" => Ok(s.d_ell),
                _ => Err(unknown(q)),
            }
        }
        Witness::PointVectors { x, u, v, .. } => match q {
            "anti_bisectional" => Ok(curvature::anti_bisectional(p, x, u, v)?),
            "mtw" => {
                let d = p.derivs(x, 4)?;
                let cj = transport::CostJet::from_derivs(x, &vec![0.0; x.len()], &d)?;
                Ok(transport::mtw(&cj, u, v, 1e-9).value)
            }
            _ => Err(unknown(q)),
        },
        Witness::Point { x, .. } => match q {
            "ricci_excess" => Ok(ricci_excess(p, x, cfg.kappa.unwrap_or(0.0), bound_side(cfg)?)?),
            "mixed_hessian_min_abs_eigenvalue" => {
                let eig = p.derivs_unchecked(x, 2)?.hess.symmetric_eigenvalues();
                Ok(eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min) - NONDEG_FLOOR)
            }
            "cost_undefined" => Ok(if p.derivs_unchecked(x, 2).is_err() { -1.0 } else { 0.0 }),
            "dual_round_trip_error" => {
                let chart = DualChart::new(p);
                let norm = kahler_tube::potential::norm;
                let err = chart.to_dual(x).and_then(|t| chart.from_dual(&t)).map(|b| norm(&sub(&b, x)) / (1.0 + norm(x))).unwrap_or(f64::INFINITY);
                Ok(-err)
            }
            _ => Err(unknown(q)),
        },
        Witness::Segment { p1, p2, lambda, kappa, .. } => {
            let sign = if bound_side(cfg)? == BoundSide::Lower { 1.0 } else { -1.0 };
            let m: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let qk = |y: &[f64]| curvature::q_kappa(p, y, *kappa);
            Ok(sign * (qk(&m)? - lambda * qk(p1)? - (1.0 - lambda) * qk(p2)?))
        }
        Witness::Qqconv { t, .. } => {
            let (g_t, g_1) = transport::replay_qqconv(p, &e.witness)?;
            match q {
                "qqconv_gain" => Ok(-g_t),
                "qqconv_m" => Ok(1.0 - g_t / (t * g_1)),
                _ => Err(unknown(q)),
            }
        }
        Witness::Ball { center, eps, .. } => {
            let r = if report.command == "geodesy ball" {
                geodesy::geodesic_ball_convexity(p, center, *eps, cfg.points, cfg.tol)?
            } else {
                geodesy::dual_ball_convexity(p, center, *eps, cfg.points, cfg.tol)?
            };
            Ok(r.verdict.min_value)
        }
    }
}

fn unknown(q: &str) -> Failure {
    Failure::usage(format!("cannot replay quantity {q:?}"))
}
