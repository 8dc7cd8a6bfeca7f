//! Eigendecompositions of the trapped operators and a decomposition-free
//! propagator used to cross-check them.
//!
//! The quantum operator H = H0 - iΓ is complex symmetric (H = Hᵀ), so if
//! H v = E v then vᵀ H = E vᵀ: the left eigenvector is the plain transpose of
//! the right one. Normalising every right vector so that vᵀ v = 1 therefore
//! yields a biorthonormal pair ⟨Φ̃_l|Φ_l'⟩ = δ_ll' without a second solve.

mod expm;
mod schur;

pub use expm::{expm, scaling_exponent};
pub use schur::{complex_schur, schur_eigenvectors, ComplexSchur};

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{EffectiveHamiltonian, OperatorKind};

/// Eigenvalues closer than this (relative to ‖H‖₁) are treated as one cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-8;
/// Minimum |vᵀv| / ‖v‖² accepted before a vector is declared self-orthogonal.
pub const MIN_BILINEAR_OVERLAP: f64 = 1e-10;

/// Decay rates below this are counted as exactly zero (dark states).
pub fn dark_state_threshold(gamma: f64) -> f64 {
    1e-12f64.max(1e-9 * gamma)
}

/// Spectrum of the classical transfer operator T, stored as decay rates
/// λ_l ≥ 0 (T φ_l = -λ_l φ_l), ascending.
#[derive(Debug, Clone)]
pub struct RealSpectralDecomposition {
    rates: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl RealSpectralDecomposition {
    pub fn n(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Orthonormal eigenvectors as columns, in the order of [`Self::rates`].
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn min_rate(&self) -> f64 {
        self.rates[0]
    }

    /// max |(ΦᵀΦ - 1)_ij|
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Rebuilds T = -Σ λ_l |φ_l⟩⟨φ_l|.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.n(), self.n(), |i, l| -self.rates[l] * self.vectors[(i, l)]);
        scaled * self.vectors.transpose()
    }
}

/// Eigen-decomposes the real symmetric classical transfer operator.
pub fn decompose_symmetric(op: &EffectiveHamiltonian) -> Result<RealSpectralDecomposition> {
    if op.kind() != OperatorKind::ClassicalTransfer {
        return Err(Error::Contract(
            "symmetric decomposition needs a classical transfer operator".into(),
        ));
    }
    let m = op.matrix();
    let n = op.n();
    let scale = op.norm_one().max(1.0);
    if m.iter().any(|z| z.im != 0.0) {
        return Err(Error::Contract("classical transfer operator must be real".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)].re - m[(j, i)].re).abs() > 1e-14 * scale {
                return Err(Error::Contract(format!(
                    "operator is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let eig = op.real_part().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (-eig.eigenvalues[a]).total_cmp(&-eig.eigenvalues[b]));
    let rates = order.iter().map(|&l| -eig.eigenvalues[l]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok(RealSpectralDecomposition { rates, vectors })
}

/// Biorthonormal eigensystem of the non-Hermitian quantum operator.
///
/// Eigenvalues E_l = ε_l - iγ_l are ordered by γ ascending, then ε ascending.
#[derive(Debug, Clone)]
pub struct BiorthogonalDecomposition {
    eigenvalues: Vec<Complex64>,
    right: DMatrix<Complex64>,
    left: DMatrix<Complex64>,
    sweeps: usize,
}

/// Diagnostic numbers for one decomposition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvariantReport {
    /// max |⟨Φ̃_l|Φ_l'⟩ - δ_ll'|
    pub biorthonormality: f64,
    /// max |(Σ_l |Φ_l⟩⟨Φ̃_l| - 1)_ij|
    pub completeness: f64,
    pub min_decay_rate: f64,
    pub energy_sum: f64,
    pub decay_sum: f64,
}

impl BiorthogonalDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// ε_l = Re E_l
    pub fn energy(&self, l: usize) -> f64 {
        self.eigenvalues[l].re
    }

    /// γ_l = -Im E_l
    pub fn decay_rate(&self, l: usize) -> f64 {
        -self.eigenvalues[l].im
    }

    pub fn decay_rates(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| -e.im).collect()
    }

    /// Right eigenvectors |Φ_l⟩ as columns.
    pub fn right(&self) -> &DMatrix<Complex64> {
        &self.right
    }

    /// Left eigenvectors ⟨Φ̃_l| as rows.
    pub fn left(&self) -> &DMatrix<Complex64> {
        &self.left
    }

    /// QR sweeps spent in the Schur iteration.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn dark_state_count(&self, gamma: f64) -> usize {
        let thr = dark_state_threshold(gamma);
        self.eigenvalues.iter().filter(|e| -e.im < thr).count()
    }

    pub fn invariant_report(&self) -> InvariantReport {
        let n = self.n();
        let ident = DMatrix::<Complex64>::identity(n, n);
        let bi = (&self.left * &self.right - &ident)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let comp = (&self.right * &self.left - &ident)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        InvariantReport {
            biorthonormality: bi,
            completeness: comp,
            min_decay_rate: self.eigenvalues.iter().map(|e| -e.im).fold(f64::INFINITY, f64::min),
            energy_sum: self.eigenvalues.iter().map(|e| e.re).sum(),
            decay_sum: self.eigenvalues.iter().map(|e| -e.im).sum(),
        }
    }

    /// CSV with header `l,epsilon,gamma`, one row per eigenvalue in contract order.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("l,epsilon,gamma\n");
        for (l, e) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", l + 1, e.re, -e.im);
        }
        out
    }
}

fn bilinear(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>()
}

/// Rescales `v` so that vᵀv = 1; returns the pre-normalisation overlap |vᵀv|/‖v‖².
fn bilinear_normalize(v: &mut [Complex64]) -> f64 {
    let q = bilinear(v, v);
    let overlap = q.norm() / norm2(v);
    let root = q.sqrt();
    if root.norm() > 0.0 {
        for x in v.iter_mut() {
            *x /= root;
        }
    }
    overlap
}

/// Bilinear Gram-Schmidt inside one cluster of (nearly) equal eigenvalues so
/// that the cluster's vectors satisfy uᵢᵀuⱼ = δᵢⱼ.
fn rebiorthonormalize_cluster(vectors: &mut [Vec<Complex64>], cluster: &[usize]) -> Result<()> {
    // a defective eigenvalue shows up as a cluster of almost parallel vectors
    let k = cluster.len();
    let basis = DMatrix::from_fn(vectors[0].len(), k, |i, c| {
        let v = &vectors[cluster[c]];
        v[i] / norm2(v).sqrt()
    });
    let independence = (basis.adjoint() * &basis)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if independence < MIN_BILINEAR_OVERLAP {
        return Err(Error::IllConditioned {
            cluster: cluster.to_vec(),
            overlap: independence.max(0.0),
        });
    }
    let mut remaining: Vec<Vec<Complex64>> = cluster.iter().map(|&i| vectors[i].clone()).collect();
    let mut accepted: Vec<Vec<Complex64>> = Vec::with_capacity(cluster.len());
    let ratio = |v: &[Complex64]| bilinear(v, v).norm() / norm2(v).max(f64::MIN_POSITIVE);

    while !remaining.is_empty() {
        if let Some(u) = accepted.last() {
            for r in remaining.iter_mut() {
                let p = bilinear(u, r);
                for (x, y) in r.iter_mut().zip(u) {
                    *x -= p * y;
                }
                let nrm = norm2(r).sqrt();
                if nrm > 0.0 {
                    for x in r.iter_mut() {
                        *x /= nrm;
                    }
                }
            }
        }
        let (mut best, mut best_ratio) = (0usize, -1.0f64);
        for (i, r) in remaining.iter().enumerate() {
            let q = ratio(r);
            if q > best_ratio {
                best = i;
                best_ratio = q;
            }
        }
        if best_ratio < MIN_BILINEAR_OVERLAP {
            // every remaining vector is isotropic; try mixing pairs
            let mut mixed: Option<(usize, Vec<Complex64>, f64)> = None;
            for i in 0..remaining.len() {
                for j in 0..remaining.len() {
                    if i == j {
                        continue;
                    }
                    for coef in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                        let cand: Vec<Complex64> = remaining[i]
                            .iter()
                            .zip(&remaining[j])
                            .map(|(a, b)| a + coef * b)
                            .collect();
                        let q = ratio(&cand);
                        if mixed.as_ref().is_none_or(|m| q > m.2) {
                            mixed = Some((i, cand, q));
                        }
                    }
                }
            }
            match mixed {
                Some((i, cand, q)) if q >= MIN_BILINEAR_OVERLAP => {
                    remaining[i] = cand;
                    best = i;
                }
                _ => {
                    return Err(Error::IllConditioned {
                        cluster: cluster.to_vec(),
                        overlap: best_ratio.max(0.0),
                    })
                }
            }
        }
        let mut u = remaining.swap_remove(best);
        bilinear_normalize(&mut u);
        accepted.push(u);
    }
    for (&slot, u) in cluster.iter().zip(accepted) {
        vectors[slot] = u;
    }
    Ok(())
}

fn clusters(eigenvalues: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = eigenvalues.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigenvalues[i] - eigenvalues[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Biorthonormal eigendecomposition of the complex symmetric quantum operator.
pub fn decompose_nonhermitian(op: &EffectiveHamiltonian) -> Result<BiorthogonalDecomposition> {
    if op.kind() != OperatorKind::QuantumNonHermitian {
        return Err(Error::Contract(
            "biorthogonal decomposition needs the quantum operator".into(),
        ));
    }
    let n = op.n();
    let schur = complex_schur(op.matrix())?;
    let raw = schur_eigenvectors(&schur);
    let values: Vec<Complex64> = (0..n).map(|k| schur.t[(k, k)]).collect();
    let mut vectors: Vec<Vec<Complex64>> = raw.column_iter().map(|c| c.iter().copied().collect()).collect();

    let tol = CLUSTER_TOLERANCE * op.norm_one().max(f64::MIN_POSITIVE);
    for cluster in clusters(&values, tol) {
        if cluster.len() == 1 {
            let k = cluster[0];
            let overlap = bilinear_normalize(&mut vectors[k]);
            if overlap < MIN_BILINEAR_OVERLAP {
                return Err(Error::IllConditioned { cluster, overlap });
            }
        } else {
            rebiorthonormalize_cluster(&mut vectors, &cluster)?;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (-values[a].im)
            .total_cmp(&-values[b].im)
            .then(values[a].re.total_cmp(&values[b].re))
    });
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let right = DMatrix::from_fn(n, n, |i, c| vectors[order[c]][i]);
    let left = right.transpose();
    Ok(BiorthogonalDecomposition {
        eigenvalues,
        right,
        left,
        sweeps: schur.sweeps,
    })
}

/// Full propagator exp(-iHt) (quantum) or exp(Tt) (classical).
pub fn evolution_operator(op: &EffectiveHamiltonian, t: f64) -> Result<DMatrix<Complex64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    let factor = match op.kind() {
        OperatorKind::QuantumNonHermitian => Complex64::new(0.0, -t),
        OperatorKind::ClassicalTransfer => Complex64::new(t, 0.0),
    };
    expm(&(op.matrix() * factor))
}

/// Applies the propagator to a state vector.
pub fn propagate_expm(op: &EffectiveHamiltonian, state: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
    if state.len() != op.n() {
        return Err(Error::Contract(format!(
            "state has length {} but operator acts on {} sites",
            state.len(),
            op.n()
        )));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    Ok(evolution_operator(op, t)? * state)
}

/// Largest entrywise gap between the spectral propagator Σ_l e^{-iE_l t}|Φ_l⟩⟨Φ̃_l|
/// and the Padé exponential of the same operator.
pub fn propagator_deviation(op: &EffectiveHamiltonian, dec: &BiorthogonalDecomposition, t: f64) -> Result<f64> {
    if op.kind() != OperatorKind::QuantumNonHermitian || op.n() != dec.n() {
        return Err(Error::Contract(
            "propagator check needs the quantum operator of the same ring".into(),
        ));
    }
    let reference = evolution_operator(op, t)?;
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dec.n(),
        dec.eigenvalues().iter().map(|e| (Complex64::new(0.0, -t) * e).exp()),
    ));
    let spectral = dec.right() * phases * dec.left();
    Ok((spectral - reference).iter().map(|z| z.norm()).fold(0.0, f64::max))
}
