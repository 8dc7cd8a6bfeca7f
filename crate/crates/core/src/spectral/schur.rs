//! Complex Schur decomposition by Householder reduction to Hessenberg form
//! followed by single-shift QR sweeps with Givens rotations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 30;

/// A = Z T Z^H with T upper triangular and Z unitary.
pub struct ComplexSchur {
    pub t: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
    pub sweeps: usize,
}

pub fn complex_schur(a: &DMatrix<Complex64>) -> Result<ComplexSchur> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "schur form needs a square matrix");
    let mut h = a.clone();
    let mut z = DMatrix::<Complex64>::identity(n, n);
    reduce_to_hessenberg(&mut h, &mut z);
    let sweeps = hessenberg_qr(&mut h, &mut z)?;
    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { t: h, z, sweeps })
}

fn reduce_to_hessenberg(h: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let zero = Complex64::new(0.0, 0.0);
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut v: Vec<Complex64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let alpha = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let tail = v[1..].iter().map(|x| x.norm_sqr()).sum::<f64>();
        if alpha == 0.0 || tail == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let beta = -phase * alpha;
        v[0] -= beta;
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= vnorm;
        }

        // Left: rows k+1.., columns k..
        for j in k..n {
            let mut dot = zero;
            for i in 0..len {
                dot += v[i].conj() * h[(k + 1 + i, j)];
            }
            let dot = dot * 2.0;
            for i in 0..len {
                h[(k + 1 + i, j)] -= v[i] * dot;
            }
        }
        // Right: all rows, columns k+1..
        for i in 0..n {
            let mut dot = zero;
            for l in 0..len {
                dot += h[(i, k + 1 + l)] * v[l];
            }
            let dot = dot * 2.0;
            for l in 0..len {
                h[(i, k + 1 + l)] -= dot * v[l].conj();
            }
        }
        for i in 0..n {
            let mut dot = zero;
            for l in 0..len {
                dot += z[(i, k + 1 + l)] * v[l];
            }
            let dot = dot * 2.0;
            for l in 0..len {
                z[(i, k + 1 + l)] -= dot * v[l].conj();
            }
        }
        h[(k + 1, k)] = beta;
        for i in (k + 2)..n {
            h[(i, k)] = zero;
        }
    }
}

/// Rotation [[c, s], [-conj(s), c]] zeroing the second component of (x, y).
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let r = ax.hypot(ay);
    let c = ax / r;
    let s = (x / ax) * y.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    let disc = (p * p + bc).sqrt();
    let denom = if (p + disc).norm() >= (p - disc).norm() {
        p + disc
    } else {
        p - disc
    };
    if denom.norm() == 0.0 {
        d
    } else {
        d - bc / denom
    }
}

fn hessenberg_qr(h: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>) -> Result<usize> {
    let n = h.nrows();
    if n < 2 {
        return Ok(0);
    }
    let eps = f64::EPSILON;
    let norm = h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let budget = MAX_SWEEPS_PER_EIGENVALUE * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if scale == 0.0 {
                scale = norm;
            }
            if sub <= eps * scale {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        total += 1;
        since_deflation += 1;
        if total > budget {
            return Err(Error::NoConvergence { iterations: total });
        }

        let mu = if since_deflation.is_multiple_of(10) {
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for k in lo..hi {
            let (x, y) = if k == lo {
                (h[(k, k)] - mu, h[(k + 1, k)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let first_col = if k == lo { k } else { k - 1 };
            for j in first_col..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
            }
            let last_row = (k + 2).min(hi);
            for i in 0..=last_row {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + b * s.conj();
                h[(i, k + 1)] = -a * s + b * c;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * c + b * s.conj();
                z[(i, k + 1)] = -a * s + b * c;
            }
        }
    }
    Ok(total)
}

/// Right eigenvectors of A from its Schur form, one column per diagonal entry
/// of T, each normalised to unit Euclidean length.
pub fn schur_eigenvectors(schur: &ComplexSchur) -> DMatrix<Complex64> {
    let t = &schur.t;
    let n = t.nrows();
    let tnorm = t.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut x = DVector::<Complex64>::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        x.fill(Complex64::new(0.0, 0.0));
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            x[i] = -s / d;
            let big = x.rows(i, k - i + 1).iter().map(|v| v.norm()).fold(0.0, f64::max);
            if big > 1e150 {
                for v in x.rows_mut(i, k - i + 1).iter_mut() {
                    *v /= big;
                }
            }
        }
        let mut col = vectors.column_mut(k);
        for r in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=k {
                acc += schur.z[(r, j)] * x[j];
            }
            col[r] = acc;
        }
        let nrm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in col.iter_mut() {
            *v /= nrm;
        }
    }
    vectors
}
