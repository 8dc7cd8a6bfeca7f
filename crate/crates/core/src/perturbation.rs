//! First-order perturbation theory in Γ for the trapped ring.
//!
//! The trap-free ring has plane-wave modes ⟨j|Φ_l⟩ = e^{-i2πlj/N}/√N with
//! energies 2 - 2cos(2πl/N); every level except l = N (and l = N/2 for even
//! N) is a degenerate pair {l, N-l}. Within a pair the trap operator acts as
//! the 2×2 block
//!
//! ```text
//! -iΓ/N [[M, S], [S*, M]],   S = Σ_m e^{4iπ l m/N}
//! ```
//!
//! whose eigenvalues are -iΓ/N (M ± |S|). The pair always carries a total
//! correction of -2iΓM/N; when all phases e^{4iπ l m/N} coincide (|S| = M)
//! one member is dark and the other absorbs twice the average rate.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{RingGraph, TrapConfiguration};
use crate::spectral::BiorthogonalDecomposition;

/// Absolute tolerance on M - |S| for calling a mode resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnperturbedMode {
    /// Mode index l in 1..=N.
    pub index: usize,
    pub n: usize,
    pub energy: f64,
}

impl UnperturbedMode {
    /// ⟨j|Φ_l⟩ for a 1-based site label.
    pub fn amplitude(&self, site: usize) -> Complex64 {
        let phase = -2.0 * PI * (self.index * site) as f64 / self.n as f64;
        Complex64::from_polar(1.0 / (self.n as f64).sqrt(), phase)
    }

    /// Index of the degenerate partner N - l, or `None` for l = N and l = N/2.
    pub fn partner(&self) -> Option<usize> {
        if self.index == self.n || 2 * self.index == self.n {
            None
        } else {
            Some(self.n - self.index)
        }
    }
}

pub fn unperturbed_energy(n: usize, l: usize) -> f64 {
    2.0 - 2.0 * (2.0 * PI * l as f64 / n as f64).cos()
}

/// All N trap-free modes, l = 1..=N.
pub fn unperturbed_spectrum(n: usize) -> Result<Vec<UnperturbedMode>> {
    RingGraph::new(n)?;
    Ok((1..=n)
        .map(|l| UnperturbedMode {
            index: l,
            n,
            energy: unperturbed_energy(n, l),
        })
        .collect())
}

fn check_mode(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > n {
        return Err(Error::Domain(format!("mode index {l} outside 1..={n}")));
    }
    Ok(())
}

/// V_ij = ⟨Φ_i| -iΓ |Φ_j⟩ = -iΓ/N Σ_m e^{i2π(i-j)m/N}.
pub fn trap_matrix_element(traps: &TrapConfiguration, i: usize, j: usize) -> Result<Complex64> {
    let n = traps.n();
    check_mode(n, i)?;
    check_mode(n, j)?;
    let diff = i as i64 - j as i64;
    let s: Complex64 = traps
        .trap_nodes()
        .iter()
        .map(|&m| {
            let k = (diff * m as i64).rem_euclid(n as i64);
            Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
        })
        .sum();
    Ok(Complex64::new(0.0, -traps.gamma() / n as f64) * s)
}

fn phase_sum(n: usize, nodes: &[usize], l: usize) -> Complex64 {
    nodes
        .iter()
        .map(|&m| {
            let k = (2 * l * m) % n;
            Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    NonDegenerate,
    /// l in [1, N/2): correction -iΓ/N (M + |S|).
    DegeneratePlus,
    /// l in (N/2, N): correction -iΓ/N (M - |S|).
    DegenerateMinus,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::NonDegenerate => "nondegenerate",
            Branch::DegeneratePlus => "plus",
            Branch::DegenerateMinus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderCorrection {
    pub index: usize,
    /// E_l^(1), with Γ included.
    pub correction: Complex64,
    pub branch: Branch,
}

impl FirstOrderCorrection {
    /// γ_l^(1) = -Im E_l^(1)
    pub fn decay_rate(&self) -> f64 {
        -self.correction.im
    }
}

/// First-order corrections for every mode l = 1..=N.
pub fn first_order_corrections(traps: &TrapConfiguration) -> Vec<FirstOrderCorrection> {
    let n = traps.n();
    let m = traps.m() as f64;
    let scale = Complex64::new(0.0, -traps.gamma() / n as f64);
    (1..=n)
        .map(|l| {
            if l == n || 2 * l == n {
                FirstOrderCorrection {
                    index: l,
                    correction: scale * m,
                    branch: Branch::NonDegenerate,
                }
            } else {
                let s = phase_sum(n, traps.trap_nodes(), l).norm();
                let (value, branch) = if 2 * l < n {
                    (m + s, Branch::DegeneratePlus)
                } else {
                    (m - s, Branch::DegenerateMinus)
                };
                FirstOrderCorrection {
                    index: l,
                    correction: scale * value,
                    branch,
                }
            }
        })
        .collect()
}

/// Whether all trap phases e^{4iπ l m_j/N} coincide, which is the
/// operational form of the resonance condition on the trap positions.
pub fn resonance_condition_holds(n: usize, nodes: &[usize], l: usize) -> Result<bool> {
    check_mode(n, l)?;
    if l == n || 2 * l == n {
        return Err(Error::Domain(format!(
            "mode {l} is non-degenerate on a ring of {n}; resonance is undefined"
        )));
    }
    let s = phase_sum(n, nodes, l).norm();
    Ok(nodes.len() as f64 - s <= RESONANCE_TOLERANCE)
}

/// Resonant mode indices for a periodic trap arrangement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResonanceSet {
    pub n: usize,
    pub m: usize,
    pub members: Vec<usize>,
}

impl ResonanceSet {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }
}

fn check_periodic(n: usize, m: usize) -> Result<()> {
    RingGraph::new(n)?;
    if m == 0 || m > n {
        return Err(Error::Domain(format!("trap count must satisfy 1 <= m <= n, got m={m}")));
    }
    if !n.is_multiple_of(m) {
        return Err(Error::Config(format!(
            "resonance counting needs a periodic arrangement (n={n} not divisible by m={m})"
        )));
    }
    Ok(())
}

/// Closed-form count: ⌊(N-2)/M⌋ for even M, ⌊(N-2)/(2M)⌋ for odd M.
///
/// Exact for even N. On an odd ring with a single trap it is one short of the
/// enumerated set, because the last pair l = (N-1)/2 is also resonant there.
pub fn upsilon_count_formula(n: usize, m: usize) -> Result<usize> {
    check_periodic(n, m)?;
    Ok(if m.is_multiple_of(2) {
        (n - 2) / m
    } else {
        (n - 2) / (2 * m)
    })
}

/// Enumerates the degenerate pairs l in [1, N/2) with 2l/M integral.
pub fn upsilon_set(n: usize, m: usize) -> Result<ResonanceSet> {
    check_periodic(n, m)?;
    let last = n.div_ceil(2) - 1;
    let members = (1..=last).filter(|l| (2 * l) % m == 0).collect();
    Ok(ResonanceSet { n, m, members })
}

/// Long-time plateau |Υ|/(N-M) of the quantum survival for periodic traps.
pub fn periodic_plateau(n: usize, m: usize) -> Result<f64> {
    let set = upsilon_set(n, m)?;
    if m == n {
        return Err(Error::Domain("every site is a trap; no plateau exists".into()));
    }
    Ok(set.cardinality() as f64 / (n - m) as f64)
}

/// Closed form for sequential traps m_j = j:
/// -iΓ/N (M ± |sin(2πMl/N) / sin(2πl/N)|), + for l < N/2.
pub fn sequential_correction(n: usize, m: usize, gamma: f64, l: usize) -> Result<Complex64> {
    RingGraph::new(n)?;
    check_mode(n, l)?;
    if l == n || 2 * l == n {
        return Err(Error::Domain(format!(
            "sequential closed form needs a degenerate mode, got l={l}"
        )));
    }
    let ratio = (2.0 * PI * (m * l % n) as f64 / n as f64).sin() / (2.0 * PI * l as f64 / n as f64).sin();
    let sign = if 2 * l < n { 1.0 } else { -1.0 };
    Ok(Complex64::new(0.0, -gamma / n as f64) * (m as f64 + sign * ratio.abs()))
}

/// Perturbative versus numerical decay rates for one trap-free level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelComparison {
    /// Mode indices of the level (one or two).
    pub modes: Vec<usize>,
    pub energy: f64,
    /// First-order rates, in the order of `modes`.
    pub perturbative: Vec<f64>,
    /// Numerical rates matched to `modes`.
    pub numeric: Vec<f64>,
    pub max_abs_error: f64,
    /// True when swapping the numerical pair would match the branches better.
    pub swapped_fits_better: bool,
}

/// Matches numerical eigenvalues to trap-free levels by energy order and
/// compares decay rates level by level.
pub fn compare_with_numerics(
    traps: &TrapConfiguration,
    dec: &BiorthogonalDecomposition,
) -> Result<Vec<LevelComparison>> {
    let n = traps.n();
    if dec.n() != n {
        return Err(Error::Contract(format!(
            "decomposition has {} sites but trap configuration has {}",
            dec.n(),
            n
        )));
    }
    let corrections = first_order_corrections(traps);
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for l in 1..=n {
        let partner = n - l;
        if l == n || 2 * l == n {
            levels.push(vec![l]);
        } else if l < partner {
            levels.push(vec![l, partner]);
        }
    }
    levels.sort_by(|a, b| {
        unperturbed_energy(n, a[0])
            .total_cmp(&unperturbed_energy(n, b[0]))
            .then(a[0].cmp(&b[0]))
    });

    let mut numeric: Vec<Complex64> = dec.eigenvalues().to_vec();
    numeric.sort_by(|a, b| a.re.total_cmp(&b.re));

    let mut cursor = 0;
    let mut out = Vec::with_capacity(levels.len());
    for modes in levels {
        let pert: Vec<f64> = modes.iter().map(|&l| corrections[l - 1].decay_rate()).collect();
        let mut num: Vec<f64> = numeric[cursor..cursor + modes.len()].iter().map(|e| -e.im).collect();
        cursor += modes.len();
        let mut swapped_fits_better = false;
        if num.len() == 2 {
            // align the larger numerical rate with the larger perturbative one
            if (num[0] > num[1]) != (pert[0] > pert[1]) {
                num.swap(0, 1);
            }
            let direct = (num[0] - pert[0]).abs().max((num[1] - pert[1]).abs());
            let swapped = (num[1] - pert[0]).abs().max((num[0] - pert[1]).abs());
            swapped_fits_better = swapped < direct;
            if swapped_fits_better {
                log::debug!("level {modes:?}: opposite branch assignment fits better");
            }
        }
        let max_abs_error = num.iter().zip(&pert).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(LevelComparison {
            energy: unperturbed_energy(n, modes[0]),
            modes,
            perturbative: pert,
            numeric: num,
            max_abs_error,
            swapped_fits_better,
        });
    }
    Ok(out)
}

/// Largest |γ_numeric - γ^(1)| over all modes.
pub fn max_rate_error(levels: &[LevelComparison]) -> f64 {
    levels.iter().map(|l| l.max_abs_error).fold(0.0, f64::max)
}

/// CSV `l,re_E1,im_E1,branch,resonant`, plus `gamma_numeric,abs_error`
/// when a comparison is supplied.
pub fn corrections_csv(traps: &TrapConfiguration, comparison: Option<&[LevelComparison]>) -> String {
    let n = traps.n();
    let corrections = first_order_corrections(traps);
    let mut numeric = vec![f64::NAN; n];
    if let Some(levels) = comparison {
        for level in levels {
            for (&l, &g) in level.modes.iter().zip(&level.numeric) {
                numeric[l - 1] = g;
            }
        }
    }
    let mut out = String::from("l,re_E1,im_E1,branch,resonant");
    if comparison.is_some() {
        out.push_str(",gamma_numeric,abs_error");
    }
    out.push('\n');
    for c in &corrections {
        let resonant = match c.branch {
            Branch::NonDegenerate => String::new(),
            _ => resonance_condition_holds(n, traps.trap_nodes(), c.index)
                .map(|b| b.to_string())
                .unwrap_or_default(),
        };
        let _ = write!(
            out,
            "{},{:.16e},{:.16e},{},{}",
            c.index,
            c.correction.re,
            c.correction.im,
            c.branch.as_str(),
            resonant
        );
        if comparison.is_some() {
            let g = numeric[c.index - 1];
            let _ = write!(out, ",{:.16e},{:.16e}", g, (g - c.decay_rate()).abs());
        }
        out.push('\n');
    }
    out
}
