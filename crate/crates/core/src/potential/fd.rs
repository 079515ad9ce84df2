//! Finite-difference derivative oracle, independent of the jet machinery.
//!
//! Every mixed partial `∂_{i₁}⋯∂_{i_k}` is the product of central differences
//! along each index, extrapolated once (Richardson, steps `h` and `h/2`).

use nalgebra::{DMatrix, DVector};

use super::Derivs;
use crate::error::Result;

fn central<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], dirs: &[&[f64]], h: f64) -> Result<f64> {
    let k = dirs.len();
    let mut sum = 0.0;
    let mut p = x.to_vec();
    for mask in 0..(1usize << k) {
        p.copy_from_slice(x);
        let mut sign = 1.0;
        for (b, d) in dirs.iter().enumerate() {
            let s = if mask >> b & 1 == 1 {
                sign = -sign;
                -h
            } else {
                h
            };
            for (pi, di) in p.iter_mut().zip(d.iter()) {
                *pi += s * di;
            }
        }
        sum += sign * f(&p)?;
    }
    Ok(sum / (2.0 * h).powi(k as i32))
}

/// Directional derivative `D_{d₁}⋯D_{d_k} f(x)`.
pub fn directional<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], dirs: &[&[f64]], h: f64) -> Result<f64> {
    if dirs.is_empty() {
        return f(x);
    }
    let coarse = central(f, x, dirs, h)?;
    let fine = central(f, x, dirs, 0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Partial derivative along coordinate indices.
pub fn partial<F: Fn(&[f64]) -> Result<f64>>(f: &F, x: &[f64], indices: &[usize], h: f64) -> Result<f64> {
    let n = x.len();
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let dirs: Vec<&[f64]> = indices.iter().map(|&i| basis[i].as_slice()).collect();
    directional(f, x, &dirs, h)
}

/// All derivative arrays of `f` at `x` up to `order ≤ 4`.
pub fn fd_jet_oracle<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], order: usize, step: f64) -> Result<Derivs> {
    let n = x.len();
    let mut d = Derivs::zeros(n, order);
    d.value = f(x)?;
    if order >= 1 {
        d.grad = DVector::from_iterator(n, (0..n).map(|i| partial(&f, x, &[i], step)).collect::<Result<Vec<_>>>()?);
    }
    if order >= 2 {
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = partial(&f, x, &[i, j], step)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        d.hess = h;
    }
    if order >= 3 {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = partial(&f, x, &[i, j, k], step)?;
                    for (a, b, c) in perms3(i, j, k) {
                        d.third[(a * n + b) * n + c] = v;
                    }
                }
            }
        }
    }
    if order >= 4 {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    for l in k..n {
                        let v = partial(&f, x, &[i, j, k, l], step)?;
                        for (a, b, c, e) in perms4(i, j, k, l) {
                            d.fourth[((a * n + b) * n + c) * n + e] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(d)
}

fn perms3(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
}

fn perms4(i: usize, j: usize, k: usize, l: usize) -> Vec<(usize, usize, usize, usize)> {
    let idx = [i, j, k, l];
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for e in 0..4 {
                    if a != b && a != c && a != e && b != c && b != e && c != e {
                        out.push((idx[a], idx[b], idx[c], idx[e]));
                    }
                }
            }
        }
    }
    out
}
