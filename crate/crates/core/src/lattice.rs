//! Ring lattices, trap configurations and the trapped evolution operators.
//!
//! Node labels are 1-based everywhere in the public interface (`1..=n`);
//! matrices are indexed 0-based internally, so node `k` lives in row `k - 1`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ring of `n` sites, each coupled to its two nearest neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingGraph {
    n_nodes: usize,
}

impl RingGraph {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::Domain(format!("a ring needs at least 3 nodes, got {n_nodes}")));
        }
        Ok(Self { n_nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Coordination number z_i; 2 for every node of a ring.
    pub fn coordination(&self, _node: usize) -> usize {
        2
    }

    /// The two neighbours of a 1-based node label.
    pub fn neighbors(&self, node: usize) -> [usize; 2] {
        let n = self.n_nodes;
        let prev = if node == 1 { n } else { node - 1 };
        let next = if node == n { 1 } else { node + 1 };
        [prev, next]
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        let n = self.n_nodes;
        let mut entries = DMatrix::zeros(n, n);
        for node in 1..=n {
            let i = node - 1;
            entries[(i, i)] = self.coordination(node) as f64;
            for nb in self.neighbors(node) {
                entries[(i, nb - 1)] = -1.0;
            }
        }
        LaplacianMatrix { entries }
    }
}

/// Graph Laplacian L = Z - A. For the ring this is also the tight-binding
/// Hamiltonian H0 (hopping rate fixed to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entry by 1-based node labels.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row - 1, col - 1)]
    }
}

/// Builds the cyclic tridiagonal ring Laplacian.
pub fn build_ring_laplacian(n: usize) -> Result<LaplacianMatrix> {
    Ok(RingGraph::new(n)?.laplacian())
}

/// How the trap sites were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrangementKind {
    Periodic,
    Sequential,
    Random,
    /// An explicit, hand-picked set of trap labels.
    Custom,
}

impl fmt::Display for ArrangementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArrangementKind::Periodic => "periodic",
            ArrangementKind::Sequential => "sequential",
            ArrangementKind::Random => "random",
            ArrangementKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ArrangementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(ArrangementKind::Periodic),
            "sequential" => Ok(ArrangementKind::Sequential),
            "random" => Ok(ArrangementKind::Random),
            "custom" => Ok(ArrangementKind::Custom),
            other => Err(Error::Config(format!("unknown arrangement '{other}'"))),
        }
    }
}

/// Arrangement together with the data needed to regenerate it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    /// m_j = j N / M.
    Periodic,
    /// m_j = j.
    Sequential,
    /// M distinct sites drawn uniformly without replacement.
    Random {
        seed: u64,
    },
    Custom,
}

impl Arrangement {
    pub fn kind(&self) -> ArrangementKind {
        match self {
            Arrangement::Periodic => ArrangementKind::Periodic,
            Arrangement::Sequential => ArrangementKind::Sequential,
            Arrangement::Random { .. } => ArrangementKind::Random,
            Arrangement::Custom => ArrangementKind::Custom,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Arrangement::Random { seed } => Some(*seed),
            _ => None,
        }
    }
}

/// The trap set M on a ring of `n` sites with uniform capture strength Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TrapConfigRecord", try_from = "TrapConfigRecord")]
pub struct TrapConfiguration {
    n: usize,
    gamma: f64,
    arrangement: Arrangement,
    trap_nodes: Vec<usize>,
}

impl TrapConfiguration {
    /// Builds a configuration from an explicit list of 1-based trap labels.
    pub fn custom(n: usize, nodes: &[usize], gamma: f64) -> Result<Self> {
        RingGraph::new(n)?;
        check_gamma(gamma)?;
        let mut trap_nodes = nodes.to_vec();
        trap_nodes.sort_unstable();
        if let Some(&bad) = trap_nodes.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::Domain(format!("trap label {bad} outside 1..={n}")));
        }
        if trap_nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("trap labels must be distinct".into()));
        }
        Ok(Self {
            n,
            gamma,
            arrangement: Arrangement::Custom,
            trap_nodes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of traps M.
    pub fn m(&self) -> usize {
        self.trap_nodes.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn arrangement(&self) -> Arrangement {
        self.arrangement
    }

    /// Sorted 1-based trap labels.
    pub fn trap_nodes(&self) -> &[usize] {
        &self.trap_nodes
    }

    pub fn is_trap(&self, node: usize) -> bool {
        self.trap_nodes.binary_search(&node).is_ok()
    }

    /// Trap labels that actually absorb: with Γ = 0 the traps are inert and
    /// the survival averages run over the whole ring.
    pub fn absorbing_nodes(&self) -> &[usize] {
        if self.gamma == 0.0 {
            &[]
        } else {
            &self.trap_nodes
        }
    }

    /// Same trap set with a different capture strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, ..self.clone() })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trap configuration serializes")
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!(
            "capture strength must be finite and >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// Flat JSON form used for provenance records.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrapConfigRecord {
    n: usize,
    m: usize,
    gamma: f64,
    arrangement: ArrangementKind,
    seed: Option<u64>,
    trap_nodes: Vec<usize>,
}

impl From<TrapConfiguration> for TrapConfigRecord {
    fn from(c: TrapConfiguration) -> Self {
        Self {
            n: c.n,
            m: c.trap_nodes.len(),
            gamma: c.gamma,
            arrangement: c.arrangement.kind(),
            seed: c.arrangement.seed(),
            trap_nodes: c.trap_nodes,
        }
    }
}

impl TryFrom<TrapConfigRecord> for TrapConfiguration {
    type Error = Error;

    fn try_from(r: TrapConfigRecord) -> Result<Self> {
        let rebuilt = match r.arrangement {
            ArrangementKind::Custom => TrapConfiguration::custom(r.n, &r.trap_nodes, r.gamma)?,
            kind => make_trap_config(kind, r.n, r.m, r.gamma, r.seed)?,
        };
        if rebuilt.trap_nodes != r.trap_nodes {
            return Err(Error::Config(format!(
                "trap_nodes {:?} do not match the {} arrangement {:?}",
                r.trap_nodes, r.arrangement, rebuilt.trap_nodes
            )));
        }
        Ok(rebuilt)
    }
}

/// Places `m` traps on a ring of `n` sites.
///
/// Periodic traps sit at `j n / m`, sequential ones at `1..=m`, random ones
/// are drawn without replacement by a partial Fisher-Yates shuffle driven by
/// a ChaCha8 stream seeded from `seed`, then sorted.
pub fn make_trap_config(
    arrangement: ArrangementKind,
    n: usize,
    m: usize,
    gamma: f64,
    seed: Option<u64>,
) -> Result<TrapConfiguration> {
    RingGraph::new(n)?;
    check_gamma(gamma)?;
    if m == 0 || m > n {
        return Err(Error::Domain(format!(
            "trap count must satisfy 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let (arr, trap_nodes) = match arrangement {
        ArrangementKind::Periodic => {
            if !n.is_multiple_of(m) {
                return Err(Error::Config(format!(
                    "periodic arrangement needs n divisible by m (n={n}, m={m})"
                )));
            }
            let spacing = n / m;
            (Arrangement::Periodic, (1..=m).map(|j| j * spacing).collect())
        }
        ArrangementKind::Sequential => (Arrangement::Sequential, (1..=m).collect()),
        ArrangementKind::Random => {
            let seed = seed.ok_or_else(|| Error::Config("random arrangement requires a seed".into()))?;
            (Arrangement::Random { seed }, sample_sites(n, m, seed))
        }
        ArrangementKind::Custom => {
            return Err(Error::Config(
                "custom arrangements are built from explicit labels".into(),
            ))
        }
    };
    Ok(TrapConfiguration {
        n,
        gamma,
        arrangement: arr,
        trap_nodes,
    })
}

fn sample_sites(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<usize> = (1..=n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        sites.swap(i, j);
    }
    let mut chosen = sites[..m].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Which evolution operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// H = H0 - iΓ, generating α(t) = exp(-iHt).
    QuantumNonHermitian,
    /// T = -L - Γ, generating p(t) = exp(Tt).
    ClassicalTransfer,
}

/// A trapped evolution operator stored as a dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    entries: DMatrix<Complex64>,
    kind: OperatorKind,
}

impl EffectiveHamiltonian {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Real part as a real matrix (exactly the operator for the classical kind).
    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        matrix_norm_one(&self.entries)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }
}

pub(crate) fn matrix_norm_one(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_same_ring(lap: &LaplacianMatrix, traps: &TrapConfiguration) -> Result<()> {
    if lap.n() != traps.n() {
        return Err(Error::Contract(format!(
            "laplacian has {} nodes but trap configuration has {}",
            lap.n(),
            traps.n()
        )));
    }
    Ok(())
}

/// H = L - iΓ Σ_m |m><m|.
pub fn build_effective_hamiltonian(lap: &LaplacianMatrix, traps: &TrapConfiguration) -> Result<EffectiveHamiltonian> {
    check_same_ring(lap, traps)?;
    let mut entries = lap.matrix().map(|x| Complex64::new(x, 0.0));
    for &m in traps.trap_nodes() {
        entries[(m - 1, m - 1)] -= Complex64::new(0.0, traps.gamma());
    }
    Ok(EffectiveHamiltonian {
        entries,
        kind: OperatorKind::QuantumNonHermitian,
    })
}

/// T = -L - Γ Σ_m |m><m|.
pub fn build_classical_transfer(lap: &LaplacianMatrix, traps: &TrapConfiguration) -> Result<EffectiveHamiltonian> {
    check_same_ring(lap, traps)?;
    let mut entries = lap.matrix().map(|x| Complex64::new(-x, 0.0));
    for &m in traps.trap_nodes() {
        entries[(m - 1, m - 1)] -= Complex64::new(traps.gamma(), 0.0);
    }
    Ok(EffectiveHamiltonian {
        entries,
        kind: OperatorKind::ClassicalTransfer,
    })
}
