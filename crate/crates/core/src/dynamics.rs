//! Transition amplitudes and mean survival probabilities on time grids.
//!
//! The exact quantum survival probability is evaluated in spectral form. With
//! R the right eigenvectors (columns), L the left ones (rows) and C the
//! non-trap sites,
//!
//! ```text
//! Π(t) = 1/(N-M) Σ_{l,l'} e^{-i(E_l - E_l'^*)t} A_{ll'} B_{ll'}
//! A_{ll'} = Σ_{k∈C} R_kl conj(R_kl'),   B_{ll'} = Σ_{j∈C} L_lj conj(L_l'j)
//! ```
//!
//! which is the double sum of |α_kj|² over C×C regrouped so that each time
//! point costs O(N²). Writing the complement sums as "all sites minus traps"
//! gives the familiar diagonal-plus-trap-overlap expansion; the eigenvectors
//! of the trapped operator are not orthonormal, so the full Gram matrices are
//! kept rather than replaced by δ_ll'.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::TrapConfiguration;
use crate::spectral::{BiorthogonalDecomposition, RealSpectralDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Logarithmic,
    /// Samples supplied directly.
    Irregular,
}

/// Strictly increasing, non-negative sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    samples: Vec<f64>,
    spacing: Spacing,
}

pub const DEFAULT_GRID_POINTS: usize = 400;
pub const DEFAULT_T_MIN: f64 = 1e-2;
/// Upper end of the default grid when Γ = 0 (no 1/Γ scale exists).
pub const TRAP_FREE_T_MAX: f64 = 1e3;

impl TimeGrid {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::checked(samples, Spacing::Irregular)
    }

    fn checked(samples: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain("a time grid needs at least 2 samples".into()));
        }
        if !samples.iter().all(|t| t.is_finite()) || samples[0] < 0.0 {
            return Err(Error::Domain("grid samples must be finite and >= 0".into()));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid samples must be strictly increasing".into()));
        }
        Ok(Self { samples, spacing })
    }

    pub fn linear(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Domain("a time grid needs at least 2 samples".into()));
        }
        let step = (t_max - t_min) / (points - 1) as f64;
        let mut samples: Vec<f64> = (0..points).map(|i| t_min + step * i as f64).collect();
        samples[points - 1] = t_max;
        Self::checked(samples, Spacing::Linear)
    }

    pub fn logarithmic(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(Error::Domain("a logarithmic grid needs t_min > 0".into()));
        }
        if points < 2 {
            return Err(Error::Domain("a time grid needs at least 2 samples".into()));
        }
        let (a, b) = (t_min.log10(), t_max.log10());
        let step = (b - a) / (points - 1) as f64;
        let mut samples: Vec<f64> = (0..points).map(|i| 10f64.powf(a + step * i as f64)).collect();
        samples[0] = t_min;
        samples[points - 1] = t_max;
        Self::checked(samples, Spacing::Logarithmic)
    }

    /// 400 log-spaced points on [10⁻², 10³/Γ].
    pub fn default_for_gamma(gamma: f64) -> Self {
        let t_max = if gamma > 0.0 { 1e3 / gamma } else { TRAP_FREE_T_MAX };
        Self::logarithmic(DEFAULT_T_MIN, t_max, DEFAULT_GRID_POINTS).expect("default grid parameters are valid")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn last(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    QuantumExact,
    QuantumAsymptotic,
    ClassicalExact,
    ClassicalAsymptotic,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::QuantumExact => "quantum_exact",
            CurveKind::QuantumAsymptotic => "quantum_asymptotic",
            CurveKind::ClassicalExact => "classical_exact",
            CurveKind::ClassicalAsymptotic => "classical_asymptotic",
        }
    }
}

/// Survival probability samples on a grid, tagged with the trap set that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: CurveKind,
    pub meta: TrapConfiguration,
}

impl SurvivalCurve {
    pub fn times(&self) -> &[f64] {
        self.grid.samples()
    }

    /// Mean over the last decade of the grid, t ≥ t_max / 10.
    pub fn tail_decade_mean(&self) -> f64 {
        let cut = self.grid.last() / 10.0;
        let tail: Vec<f64> = self
            .times()
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= cut)
            .map(|(_, v)| *v)
            .collect();
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// `t,value,kind` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,kind\n");
        write_csv_rows(&mut out, self);
        out
    }

    /// Provenance block for the sidecar JSON file.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.as_str(),
            "points": self.grid.len(),
            "t_min": self.grid.first(),
            "t_max": self.grid.last(),
            "spacing": self.grid.spacing(),
            "traps": self.meta.to_json(),
        })
    }
}

/// Appends the rows of `curve` to `out` without a header.
pub fn write_csv_rows(out: &mut String, curve: &SurvivalCurve) {
    for (t, v) in curve.times().iter().zip(&curve.values) {
        let _ = writeln!(out, "{:.16e},{:.16e},{}", t, v, curve.kind.as_str());
    }
}

fn check_system(n_dec: usize, traps: &TrapConfiguration) -> Result<usize> {
    if n_dec != traps.n() {
        return Err(Error::Contract(format!(
            "decomposition has {} sites but trap configuration has {}",
            n_dec,
            traps.n()
        )));
    }
    let survivors = traps.n() - traps.absorbing_nodes().len();
    if survivors == 0 {
        return Err(Error::Domain("every site is a trap; no survival average exists".into()));
    }
    Ok(survivors)
}

fn check_node(n: usize, node: usize) -> Result<usize> {
    if node == 0 || node > n {
        return Err(Error::Domain(format!("node {node} outside 1..={n}")));
    }
    Ok(node - 1)
}

/// α_kj(t) = Σ_l e^{-(γ_l + iε_l)t} ⟨k|Φ_l⟩⟨Φ̃_l|j⟩ for 1-based labels.
pub fn transition_amplitude(dec: &BiorthogonalDecomposition, k: usize, j: usize, t: f64) -> Result<Complex64> {
    let n = dec.n();
    let (k, j) = (check_node(n, k)?, check_node(n, j)?);
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, e) in dec.eigenvalues().iter().enumerate() {
        acc += (Complex64::new(0.0, -t) * e).exp() * dec.right()[(k, l)] * dec.left()[(l, j)];
    }
    Ok(acc)
}

/// π_kj(t) = |α_kj(t)|².
pub fn transition_probability(dec: &BiorthogonalDecomposition, k: usize, j: usize, t: f64) -> Result<f64> {
    Ok(transition_amplitude(dec, k, j, t)?.norm_sqr())
}

/// Precomputed overlaps for repeated evaluation of Π(t).
pub struct QuantumSurvivalKernel {
    eigenvalues: Vec<Complex64>,
    weights: DMatrix<Complex64>,
    survivors: usize,
}

impl QuantumSurvivalKernel {
    pub fn new(dec: &BiorthogonalDecomposition, traps: &TrapConfiguration) -> Result<Self> {
        let survivors = check_system(dec.n(), traps)?;
        let n = dec.n();
        let open: Vec<usize> = (1..=n)
            .filter(|k| !traps.absorbing_nodes().contains(k))
            .map(|k| k - 1)
            .collect();
        let r_open = dec.right().select_rows(open.iter());
        let l_open = dec.left().select_columns(open.iter());
        let a = r_open.transpose() * r_open.conjugate();
        let b = &l_open * l_open.adjoint();
        Ok(Self {
            eigenvalues: dec.eigenvalues().to_vec(),
            weights: a.component_mul(&b),
            survivors,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|e| (Complex64::new(0.0, -t) * e).exp())
            .collect();
        let n = u.len();
        let mut total = Complex64::new(0.0, 0.0);
        for lp in 0..n {
            let cu = u[lp].conj();
            let col = self.weights.column(lp);
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..n {
                acc += u[l] * col[l];
            }
            total += acc * cu;
        }
        // the sum is a non-negative quadratic form; only round-off can push it below zero
        (total.re / self.survivors as f64).max(0.0)
    }
}

/// Exact Π_M(t) on the grid.
pub fn quantum_survival(
    dec: &BiorthogonalDecomposition,
    traps: &TrapConfiguration,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    let kernel = QuantumSurvivalKernel::new(dec, traps)?;
    let values = grid.samples().iter().map(|&t| kernel.eval(t)).collect();
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values,
        kind: CurveKind::QuantumExact,
        meta: traps.clone(),
    })
}

/// Π_M(t) as the explicit double sum of π_kj over non-trap pairs. O(N³) per
/// time point; a reference path for small systems.
pub fn quantum_survival_direct(
    dec: &BiorthogonalDecomposition,
    traps: &TrapConfiguration,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    let survivors = check_system(dec.n(), traps)?;
    let n = dec.n();
    let open: Vec<usize> = (1..=n).filter(|k| !traps.absorbing_nodes().contains(k)).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid.samples() {
        let mut sum = 0.0;
        for &k in &open {
            for &j in &open {
                sum += transition_probability(dec, k, j, t)?;
            }
        }
        values.push(sum / survivors as f64);
    }
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values,
        kind: CurveKind::QuantumExact,
        meta: traps.clone(),
    })
}

/// 1/(N-M) Σ_l e^{-2γ_l t}.
pub fn quantum_survival_asymptotic(
    dec: &BiorthogonalDecomposition,
    traps: &TrapConfiguration,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    let survivors = check_system(dec.n(), traps)?;
    let rates = dec.decay_rates();
    let values = grid
        .samples()
        .iter()
        .map(|&t| rates.iter().map(|g| (-2.0 * g * t).exp()).sum::<f64>() / survivors as f64)
        .collect();
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values,
        kind: CurveKind::QuantumAsymptotic,
        meta: traps.clone(),
    })
}

/// |Σ_{k∉M} ⟨k|φ_l⟩|² for every mode.
fn classical_weights(dec: &RealSpectralDecomposition, traps: &TrapConfiguration) -> Vec<f64> {
    let absorbing = traps.absorbing_nodes();
    dec.vectors()
        .column_iter()
        .map(|col| {
            let s: f64 = col
                .iter()
                .enumerate()
                .filter(|(i, _)| !absorbing.contains(&(i + 1)))
                .map(|(_, x)| *x)
                .sum();
            s * s
        })
        .collect()
}

/// Exact P_M(t) = 1/(N-M) Σ_l e^{-λ_l t} |Σ_{k∉M} ⟨k|φ_l⟩|².
pub fn classical_survival(
    dec: &RealSpectralDecomposition,
    traps: &TrapConfiguration,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    let survivors = check_system(dec.n(), traps)? as f64;
    let weights = classical_weights(dec, traps);
    let values = grid
        .samples()
        .iter()
        .map(|&t| {
            dec.rates()
                .iter()
                .zip(&weights)
                .map(|(lam, w)| (-lam * t).exp() * w)
                .sum::<f64>()
                / survivors
        })
        .collect();
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values,
        kind: CurveKind::ClassicalExact,
        meta: traps.clone(),
    })
}

/// Single-mode form dominated by λ_min.
pub fn classical_survival_asymptotic(
    dec: &RealSpectralDecomposition,
    traps: &TrapConfiguration,
    grid: &TimeGrid,
) -> Result<SurvivalCurve> {
    let survivors = check_system(dec.n(), traps)? as f64;
    let w0 = classical_weights(dec, traps)[0];
    let lam = dec.min_rate();
    let values = grid
        .samples()
        .iter()
        .map(|&t| (-lam * t).exp() * w0 / survivors)
        .collect();
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values,
        kind: CurveKind::ClassicalAsymptotic,
        meta: traps.clone(),
    })
}
