mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;
use kahler_tube::curvature::{anti_bisectional, NabConfig};
use kahler_tube::potential::fd::fd_jet_oracle;
use kahler_tube::sampling::{in_ball, stream};
use kahler_tube::transport::*;
use kahler_tube::{DualChart, SignStatus, Witness};

fn solve(h: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    h.clone().lu().solve(&DVector::from_column_slice(v)).unwrap().as_slice().to_vec()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn sign_table_against_fd_of_cost() {
    let n = 2;
    for spec in ["ell-affine(1)".to_string(), quartic_spec(n), "ell-loglift(3)".to_string()] {
        let p = jet(&spec, n);
        for (k, z) in shell_points(n, 6, 0.5, 1.2, 31).iter().enumerate() {
            let y = &unit_vectors(n, 1, 3100 + k as u64)[0];
            let y: Vec<f64> = y.iter().map(|v| 0.3 * v).collect();
            let x: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a + b).collect();
            let cj = cost_jet(&p, &x, &y).unwrap();
            let xy: Vec<f64> = x.iter().chain(&y).copied().collect();
            let fd = fd_jet_oracle(|w| cost(&p, &w[..n], &w[n..]), &xy, 4, 1e-2).unwrap();
            let m = 2 * n;
            let scale = 1.0 + fd.fourth.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut worst: f64 = 0.0;
            for i in 0..n {
                worst = worst.max((cj.c_x[i] - fd.grad[i]).abs()).max((cj.c_y[i] - fd.grad[n + i]).abs());
                for j in 0..n {
                    worst = worst.max((cj.c_xy[(i, j)] - fd.hess[(i, n + j)]).abs());
                    for q in 0..n {
                        worst = worst.max((cj.c_xxy[(i * n + j) * n + q] - fd.t3(i, j, n + q)).abs());
                        worst = worst.max((cj.c_xyy[(i * n + j) * n + q] - fd.t3(i, n + j, n + q)).abs());
                        for s in 0..n {
                            let idx = ((i * n + j) * n + q) * n + s;
                            worst = worst.max((cj.c_xxyy[idx] - fd.fourth[((i * m + j) * m + n + q) * m + n + s]).abs());
                        }
                    }
                }
            }
            assert!(worst <= 1e-4 * scale, "{spec}: {worst:e}");
        }
    }
}

#[test]
fn mixed_hessian_inverse() {
    for (spec, n) in [("ell-loglift(3)".to_string(), 3), (quartic_spec(4), 4), ("radial-power(4)".to_string(), 2)] {
        let p = jet(&spec, n);
        for z in shell_points(n, 20, 0.4, 1.5, 32) {
            let cj = cost_jet(&p, &z, &vec![0.0; n]).unwrap();
            assert!((&cj.c_inv * &cj.c_xy - DMatrix::identity(n, n)).amax() <= 1e-10);
        }
    }
}

#[test]
fn cost_jet_examples() {
    let flat = cost_jet(&jet("flat", 3), &[0.2, 0.3, -0.1], &[0.5, 0.0, 0.1]).unwrap();
    assert_eq!(flat.c_xy, -DMatrix::<f64>::identity(3, 3));
    let cj = cost_jet(&jet("ell-affine(1)", 2), &[1.5, 0.2], &[0.5, 0.2]).unwrap();
    assert!((cj.c_xy[(0, 0)] + 0.25).abs() < 1e-14 && (cj.c_xy[(1, 1)] + 0.5).abs() < 1e-14 && cj.c_xy[(0, 1)].abs() < 1e-14);
}

#[test]
fn mtw_equals_anti_bisectional() {
    for n in [2usize, 3, 4] {
        for spec in ["ell-affine(1)".to_string(), "ell-loglift(3)".to_string(), "radial-power(4)".to_string(), quartic_spec(n)] {
            let p = jet(&spec, n);
            for (k, z) in shell_points(n, 100, 0.4, 1.5, 33).iter().enumerate() {
                let vs = unit_vectors(n, 2, 3300 + k as u64);
                let cj = cost_jet(&p, z, &vec![0.0; n]).unwrap();
                let s = mtw(&cj, &vs[0], &vs[1], 1e-12).value;
                let w = solve(&p.hessian(z).unwrap(), &vs[1]);
                let a = anti_bisectional(&p, z, &vs[0], &w).unwrap();
                assert!(scaled(a, s) <= 1e-8, "{spec} n={n}: {s} vs {a}");
            }
        }
    }
}

#[test]
fn orthogonality_matches_psi_orthogonality() {
    let n = 3;
    let p = jet(&quartic_spec(n), n);
    for (k, z) in shell_points(n, 30, 0.2, 1.0, 34).iter().enumerate() {
        let h = p.hessian(z).unwrap();
        let vs = unit_vectors(n, 2, 3400 + k as u64);
        // η(ξ) = Ψ(ξ, Ψ⁻¹η) identically.
        let w = solve(&h, &vs[1]);
        let pairing: f64 = vs[0].iter().zip(&vs[1]).map(|(a, b)| a * b).sum();
        let psi: f64 = (0..n).map(|i| (0..n).map(|j| vs[0][i] * h[(i, j)] * w[j]).sum::<f64>()).sum();
        assert!((pairing - psi).abs() <= 1e-12);
        let eta: Vec<f64> = vs[1].iter().zip(&vs[0]).map(|(e, x)| e - pairing * x).collect();
        let cj = cost_jet(&p, z, &vec![0.0; n]).unwrap();
        assert!(mtw(&cj, &vs[0], &eta, 1e-12).orthogonal);
        assert!(!mtw(&cj, &vs[0], &vs[0], 1e-12).orthogonal);
    }
}

/// `quartic_spec(n)` with each `x_i` replaced by `(A x)_i`.
fn transformed_spec(n: usize, a: &DMatrix<f64>) -> String {
    let mut s = quartic_spec(n);
    for i in 0..n {
        s = s.replace(&format!("x{i}"), &format!("@{i}@"));
    }
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}*x{j}", a[(i, j)])).collect();
        s = s.replace(&format!("@{i}@"), &format!("({})", row.join(" + ")));
    }
    s
}

#[test]
fn mtw_is_coordinate_covariant() {
    let n = 3;
    let a = DMatrix::from_row_slice(3, 3, &[1.2, 0.3, -0.1, 0.0, 0.9, 0.4, 0.2, -0.3, 1.1]);
    let ainv = a.clone().try_inverse().unwrap();
    let p = jet(&quartic_spec(n), n);
    let q = jet(&transformed_spec(n, &a), n);
    for (k, z) in shell_points(n, 20, 0.2, 0.8, 35).iter().enumerate() {
        let vs = unit_vectors(n, 2, 3500 + k as u64);
        let s = mtw(&cost_jet(&p, z, &vec![0.0; n]).unwrap(), &vs[0], &vs[1], 1e-12).value;
        let zt = &ainv * DVector::from_column_slice(z);
        let xi = &ainv * DVector::from_column_slice(&vs[0]);
        let eta = a.transpose() * DVector::from_column_slice(&vs[1]);
        let st = mtw(&cost_jet(&q, zt.as_slice(), &[0.0; 3]).unwrap(), xi.as_slice(), eta.as_slice(), 1e-12).value;
        assert!(scaled(s, st) <= 1e-8, "{s} vs {st}");
    }
}

#[test]
fn flat_and_affine_mtw() {
    let cj = cost_jet(&jet("flat", 3), &[0.4, 0.1, 0.0], &[0.0, 0.2, 0.0]).unwrap();
    for (k, _) in (0..10).enumerate() {
        let vs = unit_vectors(3, 2, 3600 + k as u64);
        assert_eq!(mtw(&cj, &vs[0], &vs[1], 1e-12).value, 0.0);
    }
    let p = jet("ell-affine(1)", 3);
    for (k, z) in shell_points(3, 50, 0.2, 3.0, 36).iter().enumerate() {
        let vs = unit_vectors(3, 2, 3700 + k as u64);
        let pr: f64 = vs[0].iter().zip(&vs[1]).map(|(a, b)| a * b).sum();
        let eta: Vec<f64> = vs[1].iter().zip(&vs[0]).map(|(e, x)| e - pr * x).collect();
        let v = mtw(&cost_jet(&p, z, &vec![0.0; 3]).unwrap(), &vs[0], &eta, 1e-9);
        assert!(v.orthogonal && v.value >= -1e-9, "{}", v.value);
    }
}

#[test]
fn c_segment_endpoints_and_halves() {
    for (spec, n) in [("ell-affine(1)".to_string(), 2), ("ell-loglift(3)".to_string(), 3), (quartic_spec(2), 2)] {
        let p = jet(&spec, n);
        let pair = BallPair::around(&shell_points(n, 1, 0.8, 1.0, 37)[0], 0.1);
        let mut rng = stream(37, 1);
        for _ in 0..5 {
            let (x0, y0, y1) = (pair.sample_x(&mut rng), pair.sample_y(&mut rng), pair.sample_y(&mut rng));
            assert_eq!(c_segment(&p, &x0, &y0, &y1, 0.0).unwrap(), y0);
            assert_eq!(c_segment(&p, &x0, &y0, &y1, 1.0).unwrap(), y1);
            let mid = c_segment(&p, &x0, &y0, &y1, 0.5).unwrap();
            // The second half of [y0, y1] is the full segment [mid, y1].
            for s in [0.25, 0.5, 0.8] {
                let composed = c_segment(&p, &x0, &mid, &y1, s).unwrap();
                let direct = c_segment(&p, &x0, &y0, &y1, 0.5 + 0.5 * s).unwrap();
                assert!(dist(&composed, &direct) <= 1e-9, "{spec}");
            }
            let (x1, yy) = (pair.sample_x(&mut rng), pair.sample_y(&mut rng));
            assert_eq!(x_segment(&p, &yy, &x0, &x1, 0.0).unwrap(), x0);
            assert_eq!(x_segment(&p, &yy, &x0, &x1, 1.0).unwrap(), x1);
            let xm = x_segment(&p, &yy, &x0, &x1, 0.5).unwrap();
            let composed = x_segment(&p, &yy, &x0, &xm, 0.5).unwrap();
            let direct = x_segment(&p, &yy, &x0, &x1, 0.25).unwrap();
            assert!(dist(&composed, &direct) <= 1e-9);
        }
    }
    let flat = jet("flat", 2);
    let y = c_segment(&flat, &[1.0, 1.0], &[0.2, 0.0], &[0.0, 0.4], 0.3).unwrap();
    assert!(dist(&y, &[0.14, 0.12]) < 1e-14);
}

#[test]
fn midpoint_matches_bisection_oracle() {
    let p = jet("ell-affine(1)", 2);
    let chart = DualChart::new(&p);
    let (x0, y0, y1) = ([1.3, 0.4], [0.1, -0.1], [0.2, 0.15]);
    let mid = c_segment(&p, &x0, &y0, &y1, 0.5).unwrap();
    let th: Vec<f64> = {
        let a = chart.to_dual(&[x0[0] - y0[0], x0[1] - y0[1]]).unwrap();
        let b = chart.to_dual(&[x0[0] - y1[0], x0[1] - y1[1]]).unwrap();
        a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect()
    };
    // ∇Ψ is parallel to z for a radial potential; bisect |∇Ψ(ρ θ̂)| = |θ| in ρ.
    let tn = (th[0] * th[0] + th[1] * th[1]).sqrt();
    let dir = [th[0] / tn, th[1] / tn];
    let g = |rho: f64| {
        let gr = p.gradient(&[rho * dir[0], rho * dir[1]]).unwrap();
        (gr[0] * gr[0] + gr[1] * gr[1]).sqrt() - tn
    };
    let (mut lo, mut hi) = (1e-6, 10.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m) > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    let rho = 0.5 * (lo + hi);
    let oracle = [x0[0] - rho * dir[0], x0[1] - rho * dir[1]];
    assert!(dist(&mid, &oracle) <= 1e-10, "{mid:?} vs {oracle:?}");
}

#[test]
fn twist_and_nondeg() {
    let flat = check_twist_nondeg(&jet("flat", 2), &BallPair::around(&[0.5, 0.5], 0.2), 32, 1e-8, 1e-9, 1);
    assert!(flat.nondeg.holds() && flat.twist.holds());
    assert!((flat.nondeg.min_value - (1.0 - 1e-8)).abs() < 1e-15);
    let affine = check_twist_nondeg(&jet("ell-affine(1)", 3), &BallPair::around(&[0.6, 0.2, -0.4], 0.1), 64, 1e-8, 1e-9, 2);
    assert!(affine.nondeg.holds() && affine.twist.holds());
    // Ψ_00 = 12x0² vanishes on x0 = 0; the domain [0.5, 2]² excludes it but the balls reach it.
    let degenerate = jet("x0^4 + x1^2@box=0.5:2", 2);
    let rep = check_twist_nondeg(&degenerate, &BallPair::around(&[0.0, 1.0], 0.05), 64, 1e-3, 1e-9, 3);
    assert_eq!(rep.nondeg.status, SignStatus::Violated);
    assert!(matches!(rep.nondeg.witness, Some(Witness::Point { .. })));
}

#[test]
fn relative_c_convexity_examples() {
    let flat = relative_c_convexity(&jet("flat", 2), &BallPair::around(&[0.4, 0.1], 0.3), 4, 64, 1e-9, 0).unwrap();
    assert!(flat.verdict.holds() && flat.worst_residual <= 1e-12);
    let p = jet("ell-affine(1)", 2);
    for z in shell_points(2, 4, 0.5, 1.5, 38) {
        let rep = relative_c_convexity(&p, &BallPair::around(&z, 0.05), 4, default_boundary(2), 1e-6, 0).unwrap();
        assert!(rep.verdict.holds() && rep.worst_residual <= 1e-6, "{z:?}: {}", rep.worst_residual);
        assert_eq!(rep.balls_tested, 9);
    }
    assert_eq!(first_failing_eps(&jet("flat", 2), &[0.5, 0.0], 0.01, 1.0, 64, 1e-9), None);
}

#[test]
fn qqconv_examples() {
    let flat = qqconv(&jet("flat", 2), &BallPair::around(&[0.3, 0.2], 0.1), &QqConfig::default()).unwrap();
    assert!((flat.m_sup - 1.0).abs() <= 1e-9 && flat.max_linear_gap <= 1e-9 && flat.quantconv);

    let affine = jet("ell-affine(1)", 2);
    let rep = qqconv(&affine, &BallPair::around(&[0.9, 0.4], 0.1), &QqConfig::default()).unwrap();
    assert!(rep.violations.is_empty() && rep.m_sup.is_finite() && rep.m_sup >= 1.0);

    assert!(qqconv(&jet("flat@a=1", 2), &BallPair::around(&[0.9, 0.0], 0.1), &QqConfig::default()).is_err());
}

#[test]
fn power_violations_replay() {
    let power = jet("radial-power(4)", 3);
    let syn = synthetic_verdicts(&power, &SyntheticConfig { nab: NabConfig { n_points: 32, ..Default::default() }, ..Default::default() });
    assert!(syn.synthetic_noab.is_violated());
    assert_eq!(syn.sampled_noab.status, SignStatus::Violated);
    assert!(syn.noab_agrees);
    let w = syn.synthetic_noab.witness.clone().unwrap();
    let Witness::Qqconv { g_t, g_1, .. } = &w else { panic!("{w:?}") };
    let (gt, g1) = replay_qqconv(&power, &w).unwrap();
    assert_eq!((gt, g1), (*g_t, *g_1));
    assert_eq!(-gt, syn.synthetic_noab.min_value);
    let (z, xi, eta) = witness_configuration(&power, &w).unwrap();
    assert!(mtw_sweep_near(&power, &z, &xi, &eta, 0.05, 64, 1e-9, 6).is_violated());

    assert!(syn.synthetic_nab.is_violated());
    let w = syn.synthetic_nab.witness.clone().unwrap();
    let Witness::Qqconv { t, g_t, g_1, .. } = &w else { panic!("{w:?}") };
    assert_eq!(replay_qqconv(&power, &w).unwrap(), (*g_t, *g_1));
    if *g_1 > 0.0 {
        assert_eq!(g_t / (t * g_1), syn.m_sup);
    }
}

#[test]
fn synthetic_verdict_examples() {
    let small = SyntheticConfig { pairs: 4, nab: NabConfig { n_points: 32, ..Default::default() }, ..Default::default() };
    let flat = synthetic_verdicts(&jet("flat", 2), &small);
    assert!(flat.synthetic_noab.holds() && flat.synthetic_nab.holds());
    assert!(flat.noab_agrees && flat.nab_agrees && flat.pairs_tested == 4);

    let affine = synthetic_verdicts(&jet("ell-affine(1)", 2), &small);
    assert!(affine.synthetic_noab.holds() && affine.noab_agrees);
    assert!(affine.m_sup >= 1.0 && affine.m_sup.is_finite());
}

#[test]
fn qqconv_is_deterministic() {
    let p = jet(&quartic_spec(2), 2);
    let pair = BallPair::around(&[0.5, 0.2], 0.1);
    let cfg = QqConfig { seed: 4, ..Default::default() };
    assert_eq!(qqconv(&p, &pair, &cfg).unwrap(), qqconv(&p, &pair, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flat_gain_is_linear(seed in 0u64..10_000) {
        let p = jet("flat", 3);
        let mut rng = stream(seed, 0);
        let c = [0.0; 3];
        let pair = BallPair::around(&in_ball(&mut rng, &c, 1.0), 0.2);
        let rep = qqconv(&p, &pair, &QqConfig { tuples: 4, targeted: 2, seed, ..Default::default() }).unwrap();
        prop_assert!(rep.violations.is_empty());
        prop_assert!(rep.max_linear_gap <= 1e-9);
    }

    #[test]
    fn segments_stay_in_dual_line(seed in 0u64..10_000, t in 0.05f64..0.95) {
        let p = jet("ell-loglift(3)", 2);
        let chart = DualChart::new(&p);
        let pair = BallPair::around(&[0.8, 0.3], 0.1);
        let mut rng = stream(seed, 1);
        let (x0, y0, y1) = (pair.sample_x(&mut rng), pair.sample_y(&mut rng), pair.sample_y(&mut rng));
        let y = c_segment(&p, &x0, &y0, &y1, t).unwrap();
        let th = |y: &[f64]| chart.to_dual(&[x0[0] - y[0], x0[1] - y[1]]).unwrap();
        let (a, b, m) = (th(&y0), th(&y1), th(&y));
        for i in 0..2 {
            prop_assert!((m[i] - ((1.0 - t) * a[i] + t * b[i])).abs() <= 1e-12);
        }
    }
}
