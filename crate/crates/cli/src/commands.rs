use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use kahler_tube::curvature::{self, BoundSide, NabConfig, NabMode};
use kahler_tube::geodesy::{self, EpsSearch, MetricField};
use kahler_tube::radial::{self, Completeness, CompletenessConfig};
use kahler_tube::sampling::{log_grid, stream, SampleRegion};
use kahler_tube::transport::{self, BallPair, QqConfig, SyntheticConfig};
use kahler_tube::verify;
use kahler_tube::{parse_potential, Error, Parsed, PotentialJet, RadialPotential, SignVerdict};

use crate::opts::{CurvatureCmd, GeodesyCmd, Group, RadialCmd, RunConfig, TransportCmd, VerifyCmd};
use crate::report::{Report, Status};

/// Smallest admissible `|eigenvalue|` of the mixed cost Hessian.
pub const NONDEG_FLOOR: f64 = 1e-8;
/// Interior weights of the Ricci midpoint probes.
pub const RICCI_LAMBDAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        // Bad input is a usage error; anything the numerics ran into is inconclusive.
        let code = match e {
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::WrongLength { .. }
            | Error::NotStronglyConvex { .. }
            | Error::Precondition(_)
            | Error::Invalid(_)
            | Error::OutsideDomain { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub struct Loaded {
    pub parsed: Parsed,
    pub jet: PotentialJet,
}

impl Loaded {
    pub fn radial(&self) -> Outcome<&RadialPotential> {
        self.parsed.radial().map(|r| r.as_ref()).ok_or_else(|| Failure::usage("this command needs a radial potential"))
    }
}

pub fn load(cfg: &RunConfig) -> Outcome<Loaded> {
    let spec = cfg.potential.as_deref().ok_or_else(|| Failure::usage("--potential is required"))?;
    let parsed = parse_potential(spec, cfg.dim)?;
    let jet = parsed.jet(cfg.dim)?;
    Ok(Loaded { parsed, jet })
}

pub fn region(p: &PotentialJet, cfg: &RunConfig) -> SampleRegion {
    SampleRegion::for_domain(p.domain(), cfg.dim, cfg.extent)
}

pub fn bound_side(cfg: &RunConfig) -> Outcome<BoundSide> {
    match cfg.side.as_str() {
        "lower" => Ok(BoundSide::Lower),
        "upper" => Ok(BoundSide::Upper),
        s => Err(Failure::usage(format!("--side {s} is not a Ricci bound side (lower|upper)"))),
    }
}

fn radial_grid(rp: &RadialPotential, cfg: &RunConfig) -> Vec<f64> {
    radial::default_grid(rp, cfg.r_max, cfg.grid)
}

fn example_grid(cfg: &RunConfig) -> Vec<f64> {
    log_grid(1e-3, cfg.r_max, cfg.grid)
}

/// Curve data for `--csv`.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write(&self, path: &Path) -> Outcome<()> {
        let io = |e: csv::Error| Failure { code: 3, message: format!("cannot write {}: {e}", path.display()) };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush().map_err(|e| Failure { code: 3, message: e.to_string() })
    }
}

pub fn run(group: Group, cfg: &RunConfig) -> Outcome<(Report, Option<Table>)> {
    let mut rep = Report::new(group.name(), cfg);
    let table = match group {
        Group::Radial { cmd } => radial_cmd(cmd, cfg, &mut rep)?,
        Group::Curvature { cmd } => {
            curvature_cmd(cmd, cfg, &mut rep)?;
            None
        }
        Group::Transport { cmd } => transport_cmd(cmd, cfg, &mut rep)?,
        Group::Geodesy { cmd } => geodesy_cmd(cmd, cfg, &mut rep)?,
        Group::Verify { cmd } => {
            verify_cmd(cmd, cfg, &mut rep)?;
            None
        }
    };
    Ok((rep, table))
}

#[derive(Serialize)]
struct ProfileSummary {
    radii: usize,
    failed_radii: Vec<f64>,
    min_a: f64,
    min_a_plus_b: f64,
    min_d: f64,
    max_orth_bisectional: f64,
    max_form_discrepancy: f64,
}

fn radial_cmd(cmd: RadialCmd, cfg: &RunConfig, rep: &mut Report) -> Outcome<Option<Table>> {
    let loaded = load(cfg)?;
    let rp = loaded.radial()?;
    let grid = radial_grid(rp, cfg);
    match cmd {
        RadialCmd::Analyze => {
            let states: Vec<_> = grid.par_iter().map(|&r| (r, radial::radial_state(rp, r))).collect();
            let mut summary = ProfileSummary {
                radii: grid.len(),
                failed_radii: vec![],
                min_a: f64::INFINITY,
                min_a_plus_b: f64::INFINITY,
                min_d: f64::INFINITY,
                max_orth_bisectional: f64::NEG_INFINITY,
                max_form_discrepancy: 0.0,
            };
            let mut rows = Vec::new();
            for (r, s) in states {
                let Ok(s) = s else {
                    summary.failed_radii.push(r);
                    continue;
                };
                summary.min_a = summary.min_a.min(s.a);
                summary.min_a_plus_b = summary.min_a_plus_b.min(s.a + s.b);
                summary.min_d = summary.min_d.min(s.d_ell);
                summary.max_orth_bisectional = summary.max_orth_bisectional.max(s.orth_bisectional());
                summary.max_form_discrepancy = summary.max_form_discrepancy.max(s.form_discrepancy());
                rows.push(vec![s.r, s.f, s.h, s.ell, s.lambda, s.a, s.b, s.c, s.d_ell, s.orth_bisectional()]);
            }
            let noab = radial::classify_noab(rp, cfg.dim, &grid, cfg.tol);
            push_noab(rep, &noab);
            rep.result(&json!({ "profile": summary, "noab": noab }));
            let header = ["r", "f", "h", "ell", "lambda", "A", "B", "C", "D", "orth_bisectional"].map(String::from).to_vec();
            return Ok(Some(Table { header, rows }));
        }
        RadialCmd::Noab => {
            let noab = radial::classify_noab(rp, cfg.dim, &grid, cfg.tol);
            push_noab(rep, &noab);
            rep.result(&noab);
        }
        RadialCmd::Completeness => {
            let c = radial::classify_completeness(rp, &CompletenessConfig::default());
            rep.status("completeness", completeness_status(c.verdict));
            rep.result(&c);
        }
        RadialCmd::Flatness => {
            let f = radial::flatness_diagnostic(rp, cfg.dim, &grid, cfg.tol, &CompletenessConfig::default());
            rep.check("consistent", f.consistent);
            rep.result(&f);
        }
    }
    Ok(None)
}

fn completeness_status(c: Completeness) -> Status {
    match c {
        Completeness::LikelyComplete => Status::Pass,
        Completeness::LikelyIncomplete => Status::Fail,
        Completeness::Inconclusive => Status::Inconclusive,
    }
}

fn push_noab(rep: &mut Report, v: &radial::NoabVerdict) {
    if v.n >= 3 {
        rep.sign("A", &v.a);
    }
    rep.sign("A+B", &v.a_plus_b);
    rep.sign("D", &v.d);
    if !v.failed_radii.is_empty() {
        rep.status("metric_positivity", Status::Inconclusive);
    }
}

/// `count` segments with endpoints drawn from the sampling region.
pub fn ricci_segments(p: &PotentialJet, cfg: &RunConfig) -> Vec<(Vec<f64>, Vec<f64>)> {
    let region = region(p, cfg);
    (0..cfg.points as u64)
        .map(|k| {
            let mut rng = stream(cfg.seed, 0x7e00 + k);
            (region.draw(&mut rng), region.draw(&mut rng))
        })
        .collect()
}

fn curvature_cmd(cmd: CurvatureCmd, cfg: &RunConfig, rep: &mut Report) -> Outcome<()> {
    let p = load(cfg)?.jet;
    match cmd {
        CurvatureCmd::Tensor => {
            let summary = curvature::curvature_report(&p, &cfg.point, &cfg.u, &cfg.v)?;
            let r = curvature::curvature_tensor(&p, &cfg.point)?;
            rep.check("kahler_symmetry", summary.kahler_symmetry_defect <= 1e-10 * (1.0 + summary.r_norm));
            rep.result(&json!({ "summary": summary, "n": r.n, "components": r.data }));
        }
        CurvatureCmd::SampleNab => {
            let mode = if cfg.mode == "nab" { NabMode::Nab } else { NabMode::Noab };
            let nab = NabConfig { n_points: cfg.points, n_pairs: cfg.pairs, mode, tol: cfg.tol, seed: cfg.seed };
            let v = curvature::sample_nab(&p, &region(&p, cfg), &nab);
            rep.sign(&cfg.mode, &v);
            rep.result(&v);
        }
        CurvatureCmd::Ricci => {
            let d = p.derivs(&cfg.point, 4)?;
            let rho = curvature::ricci_form_from(&d)?;
            let mut eig: Vec<f64> = rho.clone().symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let mut bound = None;
            if let Some(kappa) = cfg.kappa {
                let side = bound_side(cfg)?;
                let value = ricci_excess(&p, &cfg.point, kappa, side)?;
                let w = kahler_tube::Witness::Point { x: cfg.point.clone(), quantity: "ricci_excess".into(), value };
                let v = SignVerdict::classify(value, Some(w), cfg.tol, 1);
                rep.sign("ricci_bound", &v);
                bound = Some(v);
            }
            let rows: Vec<Vec<f64>> = rho.row_iter().map(|r| r.iter().copied().collect()).collect();
            rep.result(&json!({ "point": cfg.point, "ricci": rows, "eigenvalues": eig, "bound": bound }));
        }
        CurvatureCmd::SyntheticRicci => {
            let side = bound_side(cfg)?;
            let kappa = cfg.kappa.unwrap_or(0.0);
            let segs = ricci_segments(&p, cfg);
            let r = curvature::synthetic_ricci(&p, kappa, side, &segs, &RICCI_LAMBDAS, cfg.tol);
            rep.sign("synthetic", &r.synthetic);
            if let Some(c) = &r.classical {
                rep.sign("pointwise", c);
            }
            let agree = r.agree();
            rep.result(&json!({ "kappa": kappa, "side": side, "segments": segs.len(), "report": r, "agree": agree }));
        }
    }
    Ok(())
}

/// Smallest eigenvalue of `±(ρ − κΨ″)` at `x`.
pub fn ricci_excess(p: &PotentialJet, x: &[f64], kappa: f64, side: BoundSide) -> Outcome<f64> {
    let d = p.derivs(x, 4)?;
    let sign = if side == BoundSide::Lower { 1.0 } else { -1.0 };
    let m = (curvature::ricci_form_from(&d)? - kappa * &d.hess) * sign;
    Ok(m.symmetric_eigen().eigenvalues.min())
}

fn transport_cmd(cmd: TransportCmd, cfg: &RunConfig, rep: &mut Report) -> Outcome<Option<Table>> {
    let p = load(cfg)?.jet;
    let n = cfg.dim;
    match cmd {
        TransportCmd::Mtw => {
            let z: Vec<f64> = cfg.point.iter().zip(&cfg.y).map(|(a, b)| a - b).collect();
            let cj = transport::cost_jet(&p, &z, &vec![0.0; n])?;
            let value = transport::mtw(&cj, &cfg.u, &cfg.v, cfg.tol);
            let via = transport::mtw_via_anti_bisectional(&p.derivs(&z, 4)?, &cfg.u, &cfg.v)?;
            if value.orthogonal {
                let w = kahler_tube::Witness::PointVectors { x: z.clone(), u: cfg.u.clone(), v: cfg.v.clone(), quantity: "mtw".into(), value: value.value };
                rep.sign("mtw", &SignVerdict::classify(value.value, Some(w), cfg.tol, 1));
            }
            let sweep = transport::mtw_sweep_near(&p, &z, &cfg.u, &cfg.v, cfg.eps, cfg.samples, cfg.tol, cfg.seed);
            rep.sign("mtw_sweep", &sweep);
            rep.result(&json!({ "z": z, "mtw": value, "anti_bisectional": via, "sweep": sweep }));
        }
        TransportCmd::Qqconv => {
            let pair = BallPair::around(&cfg.point, cfg.eps);
            let q = QqConfig { tuples: cfg.samples, seed: cfg.seed, ..QqConfig::default() };
            let r = transport::qqconv(&p, &pair, &q)?;
            push_qqconv(rep, "qqconv", &r);
            rep.result(&r);
        }
        TransportCmd::Cseg => {
            let count = cfg.samples.max(2);
            let ts: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
            let (start, end) = match cfg.side.as_str() {
                "y" => (&cfg.y0, &cfg.y1),
                "x" => (&cfg.point, &cfg.x1),
                s => return Err(Failure::usage(format!("--side {s} is not a segment side (y|x)"))),
            };
            let path = ts
                .iter()
                .map(|&t| match cfg.side.as_str() {
                    "y" => transport::c_segment(&p, &cfg.point, &cfg.y0, &cfg.y1, t),
                    _ => transport::x_segment(&p, &cfg.y0, &cfg.point, &cfg.x1, t),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let endpoints = &path[0] == start && path.last().unwrap() == end;
            rep.check("endpoints", endpoints);
            rep.result(&json!({ "side": cfg.side, "t": ts, "points": path }));
            let mut header = vec!["t".to_string()];
            header.extend((0..n).map(|i| format!("p{i}")));
            let rows = ts.iter().zip(&path).map(|(t, q)| std::iter::once(*t).chain(q.iter().copied()).collect()).collect();
            return Ok(Some(Table { header, rows }));
        }
        TransportCmd::Cconvexity => {
            let pair = BallPair::around(&cfg.point, cfg.eps);
            let tn = transport::check_twist_nondeg(&p, &pair, 64, NONDEG_FLOOR, cfg.tol, cfg.seed);
            rep.sign("twist", &tn.twist);
            rep.sign("nondeg", &tn.nondeg);
            let cc = transport::relative_c_convexity(&p, &pair, cfg.samples, cfg.points, cfg.tol, cfg.seed)?;
            rep.sign("c_convexity", &cc.verdict);
            let first_failing = cfg.eps_max.map(|hi| transport::first_failing_eps(&p, &cfg.point, cfg.eps, hi, cfg.points, cfg.tol));
            rep.result(&json!({ "twist_nondeg": tn, "c_convexity": cc, "first_failing_eps": first_failing }));
        }
        TransportCmd::Synthetic => {
            let sc = synthetic_config(cfg);
            let r = transport::synthetic_verdicts(&p, &sc);
            rep.sign("synthetic_noab", &r.synthetic_noab);
            push_synthetic_nab(rep, &r, sc.m_tol);
            rep.sign("sampled_noab", &r.sampled_noab);
            rep.sign("sampled_nab", &r.sampled_nab);
            rep.check("noab_agrees", r.noab_agrees);
            rep.check("nab_agrees", r.nab_agrees);
            rep.result(&r);
        }
    }
    Ok(None)
}

pub fn synthetic_config(cfg: &RunConfig) -> SyntheticConfig {
    SyntheticConfig {
        eps: cfg.eps,
        pairs: cfg.pairs,
        extent: cfg.extent,
        qq: QqConfig { tuples: cfg.samples, seed: cfg.seed, ..QqConfig::default() },
        nab: NabConfig { n_points: cfg.points, seed: cfg.seed, tol: cfg.tol, ..NabConfig::default() },
        ..SyntheticConfig::default()
    }
}

/// A qqconv verdict is the worst `G(t)` among reported violations.
fn push_qqconv(rep: &mut Report, name: &str, r: &transport::QqConvReport) {
    let worst = if r.violations.is_empty() { 0.0 } else { -r.worst_violation };
    let v = SignVerdict::classify(worst, None, r.tol, r.tuples.max(1));
    rep.sign(name, &v);
    if v.is_violated() {
        for w in &r.violations {
            // Borderline violations stay in the result but are not replay targets.
            if let kahler_tube::Witness::Qqconv { g_t, .. } = w {
                if -g_t < -10.0 * r.tol {
                    rep.witness(name, "qqconv_gain", r.tol, -g_t, w.clone());
                }
            }
        }
    }
}

fn push_synthetic_nab(rep: &mut Report, r: &transport::SyntheticReport, m_tol: f64) {
    let v = &r.synthetic_nab;
    let mut line = v.clone();
    line.witness = None;
    rep.sign("synthetic_nab", &line);
    if let (true, Some(w)) = (v.is_violated(), &v.witness) {
        if 1.0 - r.m_sup < -10.0 * m_tol {
            rep.witness("synthetic_nab", "qqconv_m", m_tol, 1.0 - r.m_sup, w.clone());
        } else if let kahler_tube::Witness::Qqconv { g_t, .. } = w {
            rep.witness("synthetic_nab", "qqconv_gain", r.synthetic_noab.tol, -g_t, w.clone());
        }
    }
}

fn geodesy_cmd(cmd: GeodesyCmd, cfg: &RunConfig, rep: &mut Report) -> Outcome<Option<Table>> {
    let p = load(cfg)?.jet;
    let n = cfg.dim;
    match cmd {
        GeodesyCmd::Shoot => {
            let path = geodesy::geodesic(&MetricField::new(&p), &cfg.point, &cfg.u, cfg.length, cfg.step)?;
            rep.check("energy_drift", path.drift <= cfg.tol.max(1e-8));
            let mut header = vec!["s".to_string()];
            header.extend((0..n).map(|i| format!("x{i}")));
            header.extend((0..n).map(|i| format!("v{i}")));
            let rows = (0..path.s.len())
                .map(|k| std::iter::once(path.s[k]).chain(path.points[k].iter().copied()).chain(path.velocities[k].iter().copied()).collect())
                .collect();
            rep.result(&path);
            return Ok(Some(Table { header, rows }));
        }
        GeodesyCmd::Ball | GeodesyCmd::DualBall => {
            let dual = matches!(cmd, GeodesyCmd::DualBall);
            let test = |eps: f64| {
                if dual {
                    geodesy::dual_ball_convexity(&p, &cfg.point, eps, cfg.points, cfg.tol)
                } else {
                    geodesy::geodesic_ball_convexity(&p, &cfg.point, eps, cfg.points, cfg.tol)
                }
            };
            let r = test(cfg.eps)?;
            rep.sign("ball_convexity", &r.verdict);
            let search: Option<EpsSearch> =
                cfg.eps_max.map(|hi| geodesy::eps_bisect(|e| test(e).map(|r| r.convex).unwrap_or(false), cfg.eps, hi, 20));
            rep.result(&json!({ "ball": r, "eps_search": search }));
        }
        GeodesyCmd::Scale => {
            let probes: Vec<Vec<f64>> = if cfg.points <= 1 {
                vec![cfg.point.clone()]
            } else {
                let region = region(&p, cfg);
                let mut rng = stream(cfg.seed, 0x5ca1e);
                std::iter::once(cfg.point.clone()).chain((1..cfg.points).map(|_| region.draw(&mut rng))).collect()
            };
            let q = geodesy::estimate_scale_control(&p, &probes, cfg.r)?;
            rep.result(&q);
        }
    }
    Ok(None)
}

fn verify_cmd(cmd: VerifyCmd, cfg: &RunConfig, rep: &mut Report) -> Outcome<()> {
    match cmd {
        VerifyCmd::Example1 => {
            let r = verify::example1_identity(cfg.c, &example_grid(cfg))?;
            rep.check("example1", r.passes);
            rep.result(&r);
        }
        VerifyCmd::Example2 => {
            let r = verify::example2_verdict(cfg.c, &example_grid(cfg))?;
            rep.check("constraint", r.constraint_ok);
            rep.check("example2", r.passes);
            rep.result(&r);
        }
        VerifyCmd::AppendixA => {
            let chain_grid: Vec<f64> = std::iter::once(0.0).chain(log_grid(1e-3, 100.0, cfg.grid.max(2))).collect();
            let chain = verify::appendix_a_bound_chain(cfg.c, &chain_grid);
            rep.check("bound_chain", chain.passes);
            let cross = if chain.constraint_ok { Some(verify::appendix_cross_pipeline(cfg.c, &example_grid(cfg))?) } else { None };
            if let Some(x) = &cross {
                rep.check("cross_pipeline", x.max_rel_diff <= 1e-8);
            }
            rep.result(&json!({ "bound_chain": chain, "cross_pipeline": cross }));
        }
    }
    Ok(())
}
