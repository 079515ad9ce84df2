mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use common::*;
use kahler_tube::curvature::*;
use kahler_tube::potential::fd::fd_jet_oracle;
use kahler_tube::radial::radial_state;
use kahler_tube::sampling::{in_ball, stream, SampleRegion};
use kahler_tube::{parse_potential, SignStatus};

/// (spec, n) pairs covering radial lifts and non-radial potentials.
fn cases() -> Vec<(String, usize)> {
    let mut v = Vec::new();
    for n in [2usize, 3, 4] {
        for spec in ["ell-affine(1)", "ell-loglift(3)", "radial-power(4)"] {
            v.push((spec.to_string(), n));
        }
        v.push((quartic_spec(n), n));
    }
    v
}

#[test]
fn anti_bisectional_assembles_from_tensor() {
    let mut count = 0;
    for (spec, n) in cases() {
        let p = jet(&spec, n);
        for (k, x) in shell_points(n, 10, 0.4, 1.6, 21).iter().enumerate() {
            let vs = unit_vectors(n, 2, 2100 + k as u64);
            let r = curvature_tensor(&p, x).unwrap();
            let direct = anti_bisectional(&p, x, &vs[0], &vs[1]).unwrap();
            let assembled = 4.0 * r.contract(&vs[0], &vs[1], &vs[0], &vs[1]);
            assert!(scaled(direct, assembled) <= 1e-10, "{spec} n={n}: {direct} vs {assembled}");
            count += 1;
        }
    }
    assert!(count >= 100);
}

#[test]
fn kahler_symmetries() {
    for (spec, n) in cases() {
        let p = jet(&spec, n);
        for x in shell_points(n, 10, 0.3, 1.8, 22) {
            let r = curvature_tensor(&p, &x).unwrap();
            assert!(r.kahler_symmetry_defect() <= 1e-12 * (1.0 + r.norm()), "{spec} n={n}");
        }
    }
}

#[test]
fn ricci_form_matches_trace() {
    for (spec, n) in cases() {
        let p = jet(&spec, n);
        for x in shell_points(n, 10, 0.3, 1.8, 23) {
            let d = p.derivs(&x, 4).unwrap();
            let rho = ricci_form_from(&d).unwrap();
            let trace = ricci_trace(&curvature_tensor_from(&d).unwrap(), &inverse_hessian(&d).unwrap());
            assert!((&rho - &trace).amax() <= 1e-8 * (1.0 + rho.amax()), "{spec} n={n}");
            assert!((&rho - rho.transpose()).amax() <= 1e-12 * (1.0 + rho.amax()));
        }
    }
}

#[test]
fn one_dimensional_closed_forms() {
    let p = jet("x0^2/2 + x0^6/30", 1);
    assert!((curvature_tensor(&p, &[1.0]).unwrap().get(0, 0, 0, 0) + 1.0).abs() < 1e-12);
    // 4R = −Ψ⁗ + Ψ‴²/Ψ″ elsewhere on the line.
    for x in [-0.8f64, 0.3, 1.7] {
        let (d2, d3, d4) = (1.0 + x.powi(4), 4.0 * x.powi(3), 12.0 * x * x);
        let want = 0.25 * (-d4 + d3 * d3 / d2);
        let got = curvature_tensor(&p, &[x]).unwrap().get(0, 0, 0, 0);
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        let b = bisectional(&p, &[x], &[1.0], &[1.0]).unwrap();
        assert_eq!(b.signum(), want.signum());
    }
    let e = jet("exp(x0)", 1);
    for x in [-2.0f64, 0.0, 1.5] {
        assert!(curvature_tensor(&e, &[x]).unwrap().get(0, 0, 0, 0).abs() <= 1e-12 * (1.0 + x.exp()));
        assert!(ricci_form(&e, &[x]).unwrap()[(0, 0)].abs() < 1e-12);
    }
    let g = GaussHessian::potential();
    for x in [-1.0, 0.0, 0.5, 2.0] {
        assert!((ricci_form(&g, &[x]).unwrap()[(0, 0)] + 0.5).abs() < 1e-10);
    }
}

#[test]
fn bisectional_examples() {
    let flat = jet("flat", 3);
    let vs = unit_vectors(3, 2, 24);
    assert!(bisectional(&flat, &[0.2, 0.1, -0.5], &vs[0], &vs[1]).unwrap().abs() < 1e-15);
    let p = jet("ell-affine(1)", 2);
    let b = bisectional(&p, &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((4.0 * b + 0.125).abs() < 1e-12);
    let c = bisectional_complex(&p, &[1.0, 0.0], &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], &[
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
    ])
    .unwrap();
    assert!((c - b).abs() < 1e-15);
}

#[test]
fn radial_decomposition_of_anti_bisectional() {
    // Euclidean-unit u, v with Ψ_uv = 0 and α the cosine with x/|x|.
    for (spec, x) in [("ell-affine(1)", [1.0, 0.0, 0.0]), ("ell-loglift(3)", [0.0, 0.7, 0.0]), ("radial-power(4)", [0.0, 0.0, 1.3])] {
        let parsed = parse_potential(spec, 3).unwrap();
        let s = radial_state(parsed.radial().unwrap(), kahler_tube::potential::norm(&x)).unwrap();
        let p = parsed.jet(3).unwrap();
        let axis = x.iter().position(|v| *v != 0.0).unwrap();
        let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
        for (a, b) in [(0.0f64, 0.0f64), (1.0, 0.0), (0.6, 0.3), (0.2, -0.9)] {
            let c2 = if a < 1.0 { -s.h * a * b / (s.f * (1.0 - a * a).sqrt()) } else { 0.0 };
            let c3 = (1.0 - b * b - c2 * c2).sqrt();
            if c3.is_nan() {
                continue;
            }
            let mut u = [0.0; 3];
            u[axis] = a;
            u[o1] = (1.0 - a * a).sqrt();
            let mut v = [0.0; 3];
            v[axis] = b;
            v[o1] = c2;
            v[o2] = c3;
            let got = anti_bisectional(&p, &x, &u, &v).unwrap();
            let want = s.a + s.b * (a * a + b * b) + s.c * a * a * b * b;
            assert!(scaled(got, want) <= 1e-10, "{spec} a={a} b={b}: {got} vs {want}");
        }
    }
}

#[test]
fn quartic_matches_fd_assembly() {
    let n = 3;
    let p = jet(&quartic_spec(n), n);
    for (k, x) in shell_points(n, 12, 0.0, 0.8, 25).iter().enumerate() {
        let fd = fd_jet_oracle(|z| p.value(z), x, 4, 2e-2).unwrap();
        let vs = unit_vectors(n, 2, 2500 + k as u64);
        let want = anti_bisectional_from(&fd, &vs[0], &vs[1]).unwrap();
        let got = anti_bisectional(&p, x, &vs[0], &vs[1]).unwrap();
        let scale = curvature_tensor(&p, x).unwrap().norm().max(1.0);
        assert!((got - want).abs() <= 1e-6 * scale, "{x:?}: {got} vs {want}");
        let ra = curvature_tensor(&p, x).unwrap();
        let rf = curvature_tensor_from(&fd).unwrap();
        let worst = ra.data.iter().zip(&rf.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst <= 1e-6 * scale, "{worst:e}");
    }
}

#[test]
fn sample_nab_examples() {
    let flat = jet("flat", 3);
    for mode in [NabMode::Nab, NabMode::Noab] {
        let v = sample_nab(&flat, &SampleRegion::for_domain(flat.domain(), 3, 2.0), &NabConfig { n_points: 32, mode, ..Default::default() });
        assert_eq!(v.status, SignStatus::NonNegative);
        assert_eq!(v.min_value, 0.0);
    }

    let affine = jet("ell-affine(1)", 3);
    let v = sample_nab(&affine, &SampleRegion::for_domain(affine.domain(), 3, 5.0), &NabConfig::default());
    assert_eq!(v.status, SignStatus::NonNegative, "{}", v.min_value);
    assert!(v.min_value >= -1e-9);

    let power = jet("radial-power(4)", 3);
    let v = sample_nab(&power, &SampleRegion::for_domain(power.domain(), 3, 2.0), &NabConfig::default());
    assert_eq!(v.status, SignStatus::Violated);
    let w = v.witness.expect("witness");
    let kahler_tube::Witness::PointVectors { x, u, v: vv, value, .. } = w else { panic!() };
    assert!((anti_bisectional(&power, &x, &u, &vv).unwrap() - value).abs() < 1e-12);
    let h = power.hessian(&x).unwrap();
    let huv: f64 = (0..3).map(|i| (0..3).map(|j| u[i] * h[(i, j)] * vv[j]).sum::<f64>()).sum();
    assert!(huv.abs() <= 1e-12 * h.amax());
}

#[test]
fn sample_nab_is_deterministic() {
    let p = jet(&quartic_spec(3), 3);
    let region = SampleRegion::Ball { center: vec![0.0; 3], radius: 1.0 };
    let cfg = NabConfig { n_points: 40, mode: NabMode::Nab, seed: 9, ..Default::default() };
    assert_eq!(sample_nab(&p, &region, &cfg), sample_nab(&p, &region, &cfg));
}

fn segments(seed: u64, n: usize, radius: f64, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream(seed, 0);
    let c = vec![0.0; n];
    (0..count).map(|_| (in_ball(&mut rng, &c, radius), in_ball(&mut rng, &c, radius))).collect()
}

#[test]
fn synthetic_ricci_examples() {
    let lambdas = [0.25, 0.5, 0.75];
    let flat = jet("flat", 2);
    let rep = synthetic_ricci(&flat, 0.0, BoundSide::Lower, &segments(1, 2, 1.5, 20), &lambdas, 1e-9);
    assert!(rep.synthetic.holds() && rep.synthetic.min_value.abs() < 1e-12);
    assert_eq!(rep.agree(), Some(true));

    let g = GaussHessian::potential();
    let rep = synthetic_ricci(&g, 0.0, BoundSide::Lower, &segments(2, 1, 1.5, 30), &lambdas, 1e-9);
    assert_eq!(rep.synthetic.status, SignStatus::Violated);
    assert_eq!(rep.agree(), Some(true));
    // ρ ≤ 0 holds for the same potential.
    let rep = synthetic_ricci(&g, 0.0, BoundSide::Upper, &segments(2, 1, 1.5, 30), &lambdas, 1e-9);
    assert_eq!(rep.synthetic.status, SignStatus::NonNegative);
    assert_eq!(rep.agree(), Some(true));

    let e = jet("exp(x0)", 1);
    for side in [BoundSide::Lower, BoundSide::Upper] {
        let rep = synthetic_ricci(&e, 0.0, side, &segments(3, 1, 2.0, 20), &lambdas, 1e-9);
        assert!(rep.synthetic.holds() && rep.agree() == Some(true));
    }
}

#[test]
fn singular_hessian_is_an_error() {
    let mut d = kahler_tube::Derivs::zeros(2, 4);
    d.hess = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(curvature_tensor_from(&d).is_err());
    let short = jet("flat", 2).derivs(&[0.0, 0.0], 2).unwrap();
    assert!(curvature_tensor_from(&short).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noab_projection_is_psi_orthogonal(seed in 0u64..10_000) {
        let n = 3;
        let p = jet(&quartic_spec(n), n);
        let x = in_ball(&mut stream(seed, 0), &[0.0; 3], 1.0);
        let h = p.hessian(&x).unwrap();
        let vs = unit_vectors(n, 2, seed);
        if let Some(w) = psi_orthogonalize(&h, &vs[0], &vs[1]) {
            let huv: f64 = (0..n).map(|i| (0..n).map(|j| vs[0][i] * h[(i, j)] * w[j]).sum::<f64>()).sum();
            prop_assert!(huv.abs() <= 1e-12 * h.amax());
            prop_assert!((w.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn anti_bisectional_is_quartic_homogeneous(seed in 0u64..10_000, s in 0.2f64..3.0, t in 0.2f64..3.0) {
        let p = jet("ell-loglift(3)", 2);
        let x = in_ball(&mut stream(seed, 1), &[0.0; 2], 1.5);
        let vs = unit_vectors(2, 2, seed);
        let base = anti_bisectional(&p, &x, &vs[0], &vs[1]).unwrap();
        let su: Vec<f64> = vs[0].iter().map(|v| s * v).collect();
        let tv: Vec<f64> = vs[1].iter().map(|v| t * v).collect();
        let scaled_value = anti_bisectional(&p, &x, &su, &tv).unwrap();
        prop_assert!((scaled_value - s * s * t * t * base).abs() <= 1e-10 * (1.0 + (s * s * t * t * base).abs()));
    }
}
