//! Random-trap ensembles: averaged survival curves, decay-law fits and the
//! exponent-versus-concentration sweep.

mod fit;

pub use fit::{
    fit_exponential, fit_power_law, select_window, transient_time, DecayModel, ExponentialFit, FitWindow, PowerLawFit,
    MIN_WINDOW_POINTS, SATURATION_DECADES, WINDOW_DECADES,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{classical_survival, quantum_survival, CurveKind, SurvivalCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::lattice::{
    build_classical_transfer, build_effective_hamiltonian, build_ring_laplacian, make_trap_config, ArrangementKind,
    TrapConfiguration,
};
use crate::spectral::{decompose_nonhermitian, decompose_symmetric};

pub const DEFAULT_REALIZATIONS: usize = 120;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const RETRY_SALT: u64 = 0xa076_1d64_78bd_642f;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `index`, derived from the master seed without shared state.
pub fn split_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub realizations: usize,
    pub master_seed: u64,
    /// Upper bound on concurrently evaluated realizations; 0 uses every core.
    pub workers: usize,
}

impl EnsembleParams {
    pub fn new(n: usize, m: usize, gamma: f64, realizations: usize, master_seed: u64) -> Self {
        EnsembleParams {
            n,
            m,
            gamma,
            realizations,
            master_seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub params: EnsembleParams,
    pub mean_quantum: SurvivalCurve,
    pub mean_classical: SurvivalCurve,
    /// Per-realization curves in index order.
    pub quantum_runs: Vec<Vec<f64>>,
    pub classical_runs: Vec<Vec<f64>>,
    /// Seed actually used by each realization.
    pub seeds: Vec<u64>,
    pub retries: usize,
}

impl EnsembleResult {
    pub fn realizations(&self) -> usize {
        self.seeds.len()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    /// Both means as `t,value,kind` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,kind\n");
        crate::dynamics::write_csv_rows(&mut out, &self.mean_quantum);
        crate::dynamics::write_csv_rows(&mut out, &self.mean_classical);
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.params.n,
            "m": self.params.m,
            "gamma": self.params.gamma,
            "realizations": self.realizations(),
            "master_seed": self.params.master_seed,
            "retries": self.retries,
            "seeds": self.seeds,
        })
    }
}

struct Realization {
    seed: u64,
    retried: bool,
    quantum: Vec<f64>,
    classical: Vec<f64>,
}

fn evaluate(traps: &TrapConfiguration, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let lap = build_ring_laplacian(traps.n())?;
    let h = build_effective_hamiltonian(&lap, traps)?;
    let q = quantum_survival(&decompose_nonhermitian(&h)?, traps, grid)?;
    let t = build_classical_transfer(&lap, traps)?;
    let c = classical_survival(&decompose_symmetric(&t)?, traps, grid)?;
    Ok((q.values, c.values))
}

fn realize(params: &EnsembleParams, index: usize, grid: &TimeGrid) -> Result<Realization> {
    let seed = split_seed(params.master_seed, index as u64);
    let build = |s| make_trap_config(ArrangementKind::Random, params.n, params.m, params.gamma, Some(s));
    match evaluate(&build(seed)?, grid) {
        Ok((quantum, classical)) => Ok(Realization {
            seed,
            retried: false,
            quantum,
            classical,
        }),
        Err(first) if first.is_numerical() => {
            let fresh = split_seed(params.master_seed ^ RETRY_SALT, index as u64);
            log::warn!("realization {index} (seed {seed}) failed: {first}; retrying with seed {fresh}");
            let (quantum, classical) = evaluate(&build(fresh)?, grid).map_err(|second| {
                Error::Contract(format!(
                    "realization {index} failed twice: seed {seed}: {first}; seed {fresh}: {second}"
                ))
            })?;
            Ok(Realization {
                seed: fresh,
                retried: true,
                quantum,
                classical,
            })
        }
        Err(e) => Err(e),
    }
}

/// Neumaier-compensated pointwise mean of equally long rows, summed in row order.
pub fn compensated_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut sum = vec![0.0; first.len()];
    let mut comp = vec![0.0; first.len()];
    for row in rows {
        for (k, &x) in row.iter().enumerate() {
            let t = sum[k] + x;
            if sum[k].abs() >= x.abs() {
                comp[k] += (sum[k] - t) + x;
            } else {
                comp[k] += (x - t) + sum[k];
            }
            sum[k] = t;
        }
    }
    let r = rows.len() as f64;
    sum.iter().zip(&comp).map(|(s, c)| (s + c) / r).collect()
}

fn check_params(params: &EnsembleParams) -> Result<()> {
    if params.realizations == 0 {
        return Err(Error::Domain("an ensemble needs at least one realization".into()));
    }
    if params.m >= params.n {
        return Err(Error::Domain(format!(
            "random ensembles need m < n, got m={}, n={}",
            params.m, params.n
        )));
    }
    Ok(())
}

fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Averages quantum and classical survival over `realizations` random trap
/// sets. Realization `i` draws its traps from `split_seed(master_seed, i)`;
/// both curves of a realization share that trap set.
pub fn run_random_ensemble(params: &EnsembleParams, grid: &TimeGrid) -> Result<EnsembleResult> {
    check_params(params)?;
    let runs: Vec<Result<Realization>> = run_in_pool(params.workers, || {
        (0..params.realizations)
            .into_par_iter()
            .map(|i| realize(params, i, grid))
            .collect()
    })?;
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let retries = runs.iter().filter(|r| r.retried).count();
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let mut quantum_runs = Vec::with_capacity(runs.len());
    let mut classical_runs = Vec::with_capacity(runs.len());
    for r in runs {
        quantum_runs.push(r.quantum);
        classical_runs.push(r.classical);
    }
    let meta = make_trap_config(
        ArrangementKind::Random,
        params.n,
        params.m,
        params.gamma,
        Some(params.master_seed),
    )?;
    let curve = |values, kind| SurvivalCurve {
        grid: grid.clone(),
        values,
        kind,
        meta: meta.clone(),
    };
    Ok(EnsembleResult {
        params: *params,
        mean_quantum: curve(compensated_mean(&quantum_runs), CurveKind::QuantumExact),
        mean_classical: curve(compensated_mean(&classical_runs), CurveKind::ClassicalExact),
        quantum_runs,
        classical_runs,
        seeds,
        retries,
    })
}

/// Standard deviation of μ over bootstrap resamples of the realization
/// curves, each refitted on the fixed `window`. Resamples whose fit fails
/// are skipped.
pub fn bootstrap_mu_stderr(result: &EnsembleResult, window: FitWindow, resamples: usize, seed: u64) -> Result<f64> {
    let r = result.realizations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mus = Vec::with_capacity(resamples);
    let mut picked = Vec::with_capacity(r);
    for _ in 0..resamples {
        picked.clear();
        picked.extend((0..r).map(|_| result.quantum_runs[rng.random_range(0..r)].clone()));
        let curve = SurvivalCurve {
            values: compensated_mean(&picked),
            ..result.mean_quantum.clone()
        };
        if let Ok(fit) = fit_power_law(&curve, Some(window)) {
            mus.push(fit.mu);
        }
    }
    if mus.len() < 2 {
        return Err(Error::Fit(
            "too few successful bootstrap fits to estimate a spread".into(),
        ));
    }
    let k = mus.len() as f64;
    let mean = mus.iter().sum::<f64>() / k;
    let var = mus.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(var.sqrt())
}

/// Fits used to tell quantum from classical ensemble decay.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleFits {
    pub quantum_power: PowerLawFit,
    /// Semilog fit of the quantum mean on the power-law window.
    pub quantum_exponential: ExponentialFit,
    pub classical_exponential: ExponentialFit,
    /// Log-log fit of the classical mean on its exponential window.
    pub classical_power: Option<PowerLawFit>,
    pub mu_stderr: f64,
}

impl EnsembleFits {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mu": self.quantum_power.mu,
            "rate": self.classical_exponential.rate,
            "stderr": self.mu_stderr,
            "quantum": {
                "mu": self.quantum_power.mu,
                "prefactor": self.quantum_power.prefactor,
                "window": [self.quantum_power.window.t_lo, self.quantum_power.window.t_hi],
                "r_squared": self.quantum_power.r_squared,
                "r_squared_exponential": self.quantum_exponential.r_squared,
                "stderr": self.mu_stderr,
            },
            "classical": {
                "rate": self.classical_exponential.rate,
                "prefactor": self.classical_exponential.prefactor,
                "window": [self.classical_exponential.window.t_lo, self.classical_exponential.window.t_hi],
                "r_squared": self.classical_exponential.r_squared,
                "r_squared_power_law": self.classical_power.map(|f| f.r_squared),
            },
        })
    }
}

/// Power-law fit of the quantum mean, exponential fit of the classical mean,
/// each cross-checked against the other model on the same window.
pub fn fit_ensemble(result: &EnsembleResult) -> Result<EnsembleFits> {
    let quantum_power = fit_power_law(&result.mean_quantum, None)?;
    let quantum_exponential = fit_exponential(&result.mean_quantum, Some(quantum_power.window))?;
    let classical_exponential = fit_exponential(&result.mean_classical, None)?;
    let classical_power = fit_power_law(&result.mean_classical, Some(classical_exponential.window)).ok();
    let mu_stderr = bootstrap_mu_stderr(
        result,
        quantum_power.window,
        BOOTSTRAP_RESAMPLES,
        result.params.master_seed,
    )?;
    Ok(EnsembleFits {
        quantum_power,
        quantum_exponential,
        classical_exponential,
        classical_power,
        mu_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub mu: f64,
    pub mu_stderr: f64,
    pub r_squared: f64,
    pub window: Option<FitWindow>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Sweep over the cartesian product of `n_list` and `m_list`. Every cell
/// reuses `master_seed`; failed cells are reported as rows carrying the error.
pub fn sweep_mu_vs_concentration(
    n_list: &[usize],
    m_list: &[usize],
    gamma: f64,
    realizations: usize,
    master_seed: u64,
    workers: usize,
    grid: &TimeGrid,
) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() || m_list.is_empty() {
        return Err(Error::Config("sweep needs non-empty n and m lists".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len() * m_list.len());
    for &n in n_list {
        for &m in m_list {
            let c = m as f64 / n as f64;
            let params = EnsembleParams::new(n, m, gamma, realizations, master_seed).with_workers(workers);
            let cell = run_random_ensemble(&params, grid).and_then(|res| {
                let fit = fit_power_law(&res.mean_quantum, None)?;
                let stderr = bootstrap_mu_stderr(&res, fit.window, BOOTSTRAP_RESAMPLES, master_seed)?;
                Ok((fit, stderr))
            });
            rows.push(match cell {
                Ok((fit, stderr)) => SweepRow {
                    n,
                    m,
                    c,
                    mu: fit.mu,
                    mu_stderr: stderr,
                    r_squared: fit.r_squared,
                    window: Some(fit.window),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep cell n={n} m={m} failed: {e}");
                    SweepRow {
                        n,
                        m,
                        c,
                        mu: f64::NAN,
                        mu_stderr: f64::NAN,
                        r_squared: f64::NAN,
                        window: None,
                        error: Some(e.to_string()),
                    }
                }
            });
        }
    }
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.c.total_cmp(&b.c)));
    Ok(rows)
}

/// `n,m,c,mu,mu_stderr,r_squared`; failed cells carry `nan`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,m,c,mu,mu_stderr,r_squared\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.n, r.m, r.c, r.mu, r.mu_stderr, r.r_squared
        ));
    }
    out
}
