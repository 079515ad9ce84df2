//! Curvature of the Kähler metric with potential Ψ(x), x = Re z.
//!
//! Components are taken in the frame `∂/∂z_i`, in which the metric is
//! `¼Ψ_ij` and
//!
//! `R_{i j̄ k l̄} = −¼Ψ_ijkl + ¼ Σ Ψ_ipk Ψ^{pq} Ψ_jql`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Derivs, PotentialJet};
use crate::sampling::{stream, unit_vector, SampleRegion};
use crate::verdict::{MinTracker, SignVerdict, Witness};

/// `R_{i j̄ k l̄}` flattened row-major as `[i][j][k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    pub n: usize,
    pub data: Vec<f64>,
}

impl CurvatureTensor {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    /// `Σ R_{i j̄ k l̄} a_i b_j c_k e_l` for real vectors.
    pub fn contract(&self, a: &[f64], b: &[f64], c: &[f64], e: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.get(i, j, k, l) * a[i] * b[j] * c[k] * e[l];
                    }
                }
            }
        }
        s
    }

    /// `Σ R_{i j̄ k l̄} u_i ū_j v_k v̄_l`.
    pub fn contract_complex(&self, u: &[Complex64], v: &[Complex64]) -> f64 {
        let n = self.n;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let uu = u[i] * u[j].conj();
                for k in 0..n {
                    for l in 0..n {
                        s += self.get(i, j, k, l) * uu * v[k] * v[l].conj();
                    }
                }
            }
        }
        s.re
    }

    /// Largest violation of `R_{ij̄kl̄} = R_{kj̄il̄} = R_{il̄kj̄}`.
    pub fn kahler_symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        worst = worst.max((v - self.get(k, j, i, l)).abs()).max((v - self.get(i, l, k, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn inverse_hessian(d: &Derivs) -> Result<DMatrix<f64>> {
    d.hess.clone().cholesky().map(|c| c.inverse()).ok_or(Error::Singular)
}

fn need_order(d: &Derivs, order: usize) -> Result<()> {
    if d.order < order {
        return Err(Error::Precondition(format!("derivatives to order {order} required")));
    }
    Ok(())
}

/// [`curvature_tensor`] from precomputed derivative arrays.
pub fn curvature_tensor_from(d: &Derivs) -> Result<CurvatureTensor> {
    need_order(d, 4)?;
    let n = d.n;
    let inv = inverse_hessian(d)?;
    // rows (i,k), columns p: Ψ_ipk
    let t = DMatrix::from_fn(n * n, n, |ik, p| d.t3(ik / n, p, ik % n));
    let s = &t * inv * t.transpose();
    let mut data = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    data[((i * n + j) * n + k) * n + l] = 0.25 * (s[(i * n + k, j * n + l)] - d.t4(i, j, k, l));
                }
            }
        }
    }
    Ok(CurvatureTensor { n, data })
}

pub fn curvature_tensor(p: &PotentialJet, x: &[f64]) -> Result<CurvatureTensor> {
    curvature_tensor_from(&p.derivs(x, 4)?)
}

/// Bisectional curvature `R(u, ū, v, v̄)` for real `u, v`.
pub fn bisectional(p: &PotentialJet, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(curvature_tensor(p, x)?.contract(u, u, v, v))
}

/// Bisectional curvature `R(u, ū, v, v̄)` for complex `u, v`.
pub fn bisectional_complex(p: &PotentialJet, x: &[f64], u: &[Complex64], v: &[Complex64]) -> Result<f64> {
    Ok(curvature_tensor(p, x)?.contract_complex(u, v))
}

/// `𝔄(u, v) = −Ψ_uuvv + Ψ_uup Ψ^{pq} Ψ_vvq` from precomputed derivative arrays.
pub fn anti_bisectional_from(d: &Derivs, u: &[f64], v: &[f64]) -> Result<f64> {
    need_order(d, 4)?;
    let inv = inverse_hessian(d)?;
    let a = d.third_contract2(u, u);
    let b = d.third_contract2(v, v);
    Ok(a.dot(&(inv * b)) - d.fourth_contract(u, u, v, v))
}

pub fn anti_bisectional(p: &PotentialJet, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    anti_bisectional_from(&p.derivs(x, 4)?, u, v)
}

/// `ρ_{ij̄} = −¼ ∂_i∂_j log det Ψ″` from precomputed derivative arrays.
pub fn ricci_form_from(d: &Derivs) -> Result<DMatrix<f64>> {
    need_order(d, 4)?;
    let n = d.n;
    let inv = inverse_hessian(d)?;
    // ∂_i log det = tr(H⁻¹ H_i), ∂_i∂_j log det = tr(H⁻¹ H_ij) − tr(H⁻¹ H_i H⁻¹ H_j)
    let slices: Vec<DMatrix<f64>> =
        (0..n).map(|i| &inv * DMatrix::from_fn(n, n, |a, b| d.t3(i, a, b))).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let mut first = 0.0;
        for k in 0..n {
            for l in 0..n {
                first += inv[(k, l)] * d.t4(k, l, i, j);
            }
        }
        let second = (&slices[i] * &slices[j]).trace();
        -0.25 * (first - second)
    }))
}

pub fn ricci_form(p: &PotentialJet, x: &[f64]) -> Result<DMatrix<f64>> {
    ricci_form_from(&p.derivs(x, 4)?)
}

/// `Σ_{kl} Ψ^{kl} R_{i j̄ k l̄}`, which equals ρ.
pub fn ricci_trace(r: &CurvatureTensor, inv_hess: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.n;
    DMatrix::from_fn(n, n, |i, j| {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += inv_hess[(k, l)] * r.get(i, j, k, l);
            }
        }
        s
    })
}

/// Which positivity condition [`sample_nab`] tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NabMode {
    /// `𝔄(u, v) ≥ 0` for all `u, v`.
    Nab,
    /// `𝔄(u, v) ≥ 0` whenever `Ψ_uv = 0`.
    Noab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NabConfig {
    pub n_points: usize,
    pub n_pairs: usize,
    pub mode: NabMode,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NabConfig {
    fn default() -> Self {
        NabConfig { n_points: 256, n_pairs: 64, mode: NabMode::Noab, tol: 1e-9, seed: 0 }
    }
}

/// `v − (Ψ_uv/Ψ_uu) u`, Euclidean-normalized; `None` when `v ∥ u`.
pub fn psi_orthogonalize(hess: &DMatrix<f64>, u: &[f64], v: &[f64]) -> Option<Vec<f64>> {
    let (du, dv) = (DVector::from_column_slice(u), DVector::from_column_slice(v));
    let huu = du.dot(&(hess * &du));
    let w = &dv - (du.dot(&(hess * &dv)) / huu) * &du;
    let nw = w.norm();
    (nw > 1e-8).then(|| (w / nw).as_slice().to_vec())
}

/// Sign of 𝔄 over random points of `region` and random vector pairs.
///
/// For radial lifts each point also tries `u = x/|x|` against a Ψ-orthogonal
/// partner and a pair orthogonal to `x`.
pub fn sample_nab(p: &PotentialJet, region: &SampleRegion, cfg: &NabConfig) -> SignVerdict {
    let n = p.dim();
    let tracker = (0..cfg.n_points as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream(cfg.seed, idx);
            let mut t = MinTracker::default();
            let x = region.draw(&mut rng);
            let Ok(d) = p.derivs(&x, 4) else {
                return t;
            };
            let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(cfg.n_pairs + 2);
            if p.radial().is_some() && n >= 2 {
                let r = crate::potential::norm(&x);
                if r > 0.0 {
                    let xr: Vec<f64> = x.iter().map(|a| a / r).collect();
                    let w = unit_vector(&mut rng, n);
                    pairs.push((xr.clone(), w.clone()));
                    if n >= 3 {
                        let dr = DVector::from_column_slice(&xr);
                        let mut a = DVector::from_vec(unit_vector(&mut rng, n));
                        a -= a.dot(&dr) * &dr;
                        let mut b = DVector::from_vec(unit_vector(&mut rng, n));
                        b -= b.dot(&dr) * &dr;
                        if a.norm() > 1e-8 {
                            a.normalize_mut();
                            b -= b.dot(&a) * &a;
                            if b.norm() > 1e-8 {
                                pairs.push((a.as_slice().to_vec(), b.normalize().as_slice().to_vec()));
                            }
                        }
                    }
                }
            }
            for _ in 0..cfg.n_pairs {
                pairs.push((unit_vector(&mut rng, n), unit_vector(&mut rng, n)));
            }
            for (u, v) in pairs {
                let v = match cfg.mode {
                    NabMode::Nab => v,
                    NabMode::Noab => match psi_orthogonalize(&d.hess, &u, &v) {
                        Some(w) => w,
                        None => continue,
                    },
                };
                let Ok(value) = anti_bisectional_from(&d, &u, &v) else {
                    continue;
                };
                t.push(value, || Witness::PointVectors {
                    x: x.clone(),
                    u: u.clone(),
                    v: v.clone(),
                    quantity: "anti_bisectional".into(),
                    value,
                });
            }
            t
        })
        .reduce(MinTracker::default, MinTracker::merge);
    tracker.verdict(cfg.tol)
}

/// Direction of a Ricci bound `ρ ≥ κΨ″` (lower) or `ρ ≤ κΨ″` (upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Lower,
    Upper,
}

/// `Q_κ = log det Ψ″ + 4κΨ`.
pub fn q_kappa(p: &PotentialJet, x: &[f64], kappa: f64) -> Result<f64> {
    let d = p.derivs(x, 2)?;
    let det = d.hess.clone().cholesky().ok_or(Error::Singular)?.determinant();
    Ok(det.ln() + 4.0 * kappa * d.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciBoundReport {
    /// Midpoint test: `Q_κ` concave (lower) or convex (upper) along the probes.
    pub synthetic: SignVerdict,
    /// Smallest eigenvalue of `±(ρ − κΨ″)` over the probe points, when fourth derivatives exist.
    pub classical: Option<SignVerdict>,
}

impl RicciBoundReport {
    /// Whether both tests reach the same verdict.
    pub fn agree(&self) -> Option<bool> {
        self.classical.as_ref().map(|c| c.status == self.synthetic.status)
    }
}

/// Synthetic Ricci bound along segments `[p₁, p₂]` at each weight in `lambdas`.
pub fn synthetic_ricci(
    p: &PotentialJet,
    kappa: f64,
    side: BoundSide,
    segments: &[(Vec<f64>, Vec<f64>)],
    lambdas: &[f64],
    tol: f64,
) -> RicciBoundReport {
    let sign = match side {
        BoundSide::Lower => 1.0,
        BoundSide::Upper => -1.0,
    };
    let synthetic = segments
        .par_iter()
        .map(|(p1, p2)| {
            let mut t = MinTracker::default();
            let (Ok(q1), Ok(q2)) = (q_kappa(p, p1, kappa), q_kappa(p, p2, kappa)) else {
                return t;
            };
            for &lambda in lambdas {
                let m: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let Ok(qm) = q_kappa(p, &m, kappa) else {
                    continue;
                };
                let value = sign * (qm - lambda * q1 - (1.0 - lambda) * q2);
                t.push(value, || Witness::Segment { p1: p1.clone(), p2: p2.clone(), lambda, kappa, value });
            }
            t
        })
        .reduce(MinTracker::default, MinTracker::merge)
        .verdict(tol);

    let mut points: Vec<Vec<f64>> = Vec::new();
    for (p1, p2) in segments {
        points.push(p1.clone());
        points.push(p2.clone());
        for &lambda in lambdas {
            points.push(p1.iter().zip(p2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect());
        }
    }
    let classical = points
        .par_iter()
        .map(|x| -> Result<MinTracker> {
            let d = p.derivs(x, 4)?;
            let rho = ricci_form_from(&d)?;
            let m = (rho - kappa * &d.hess) * sign;
            let value = SymmetricEigen::new(m).eigenvalues.min();
            let mut t = MinTracker::default();
            t.push(value, || Witness::Point { x: x.clone(), quantity: "ricci_excess".into(), value });
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()
        .ok()
        .map(|ts| ts.into_iter().fold(MinTracker::default(), MinTracker::merge).verdict(tol));
    RicciBoundReport { synthetic, classical }
}

/// Pointwise curvature summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub vectors: [Vec<f64>; 2],
    pub r_norm: f64,
    pub kahler_symmetry_defect: f64,
    pub bisectional: f64,
    pub anti_bisectional: f64,
    pub ricci_eigenvalues: Vec<f64>,
}

pub fn curvature_report(p: &PotentialJet, x: &[f64], u: &[f64], v: &[f64]) -> Result<CurvatureReport> {
    let d = p.derivs(x, 4)?;
    let r = curvature_tensor_from(&d)?;
    let mut ricci_eigenvalues: Vec<f64> = SymmetricEigen::new(ricci_form_from(&d)?).eigenvalues.iter().copied().collect();
    ricci_eigenvalues.sort_by(f64::total_cmp);
    Ok(CurvatureReport {
        point: x.to_vec(),
        vectors: [u.to_vec(), v.to_vec()],
        r_norm: r.norm(),
        kahler_symmetry_defect: r.kahler_symmetry_defect(),
        bisectional: r.contract(u, u, v, v),
        anti_bisectional: anti_bisectional_from(&d, u, v)?,
        ricci_eigenvalues,
    })
}
