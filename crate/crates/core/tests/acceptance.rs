//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;

use trapwalk_core::dynamics::{classical_survival, quantum_survival, transition_amplitude, SurvivalCurve, TimeGrid};
use trapwalk_core::ensemble::{
    bootstrap_mu_stderr, fit_ensemble, fit_exponential, run_random_ensemble, split_seed, EnsembleParams, FitWindow,
    BOOTSTRAP_RESAMPLES,
};
use trapwalk_core::lattice::{
    build_classical_transfer, build_effective_hamiltonian, build_ring_laplacian, make_trap_config, Arrangement,
    ArrangementKind, TrapConfiguration,
};
use trapwalk_core::perturbation::{compare_with_numerics, max_rate_error, upsilon_count_formula, upsilon_set};
use trapwalk_core::spectral::{
    decompose_nonhermitian, decompose_symmetric, propagate_expm, BiorthogonalDecomposition, RealSpectralDecomposition,
};
use trapwalk_core::Result;

const INVARIANT_TOL: f64 = 1e-8;

/// Worst invariant residuals over every decomposition built by the suite.
#[derive(Default)]
struct InvariantLedger {
    decompositions: usize,
    biorthonormality: f64,
    completeness: f64,
    decay_sum_rel: f64,
    energy_sum_rel: f64,
    classical_orthogonality: f64,
    classical_trace_rel: f64,
}

impl InvariantLedger {
    fn quantum(&mut self, dec: &BiorthogonalDecomposition, traps: &TrapConfiguration) {
        let r = dec.invariant_report();
        let n = traps.n() as f64;
        let gm = traps.gamma() * traps.m() as f64;
        self.decompositions += 1;
        self.biorthonormality = self.biorthonormality.max(r.biorthonormality);
        self.completeness = self.completeness.max(r.completeness);
        let decay_err = if gm > 0.0 {
            (r.decay_sum - gm).abs() / gm
        } else {
            r.decay_sum.abs()
        };
        self.decay_sum_rel = self.decay_sum_rel.max(decay_err);
        self.energy_sum_rel = self.energy_sum_rel.max((r.energy_sum - 2.0 * n).abs() / (2.0 * n));
    }

    fn classical(&mut self, dec: &RealSpectralDecomposition, traps: &TrapConfiguration) {
        let trace = 2.0 * traps.n() as f64 + traps.gamma() * traps.m() as f64;
        let sum: f64 = dec.rates().iter().sum();
        self.decompositions += 1;
        self.classical_orthogonality = self.classical_orthogonality.max(dec.orthogonality_error());
        self.classical_trace_rel = self.classical_trace_rel.max((sum - trace).abs() / trace);
    }

    fn worst(&self) -> f64 {
        [
            self.biorthonormality,
            self.completeness,
            self.decay_sum_rel,
            self.energy_sum_rel,
            self.classical_orthogonality,
            self.classical_trace_rel,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

struct Solved {
    traps: TrapConfiguration,
    quantum: BiorthogonalDecomposition,
    classical: RealSpectralDecomposition,
}

fn solve(traps: TrapConfiguration, ledger: &mut InvariantLedger) -> Result<Solved> {
    let lap = build_ring_laplacian(traps.n())?;
    let quantum = decompose_nonhermitian(&build_effective_hamiltonian(&lap, &traps)?)?;
    let classical = decompose_symmetric(&build_classical_transfer(&lap, &traps)?)?;
    ledger.quantum(&quantum, &traps);
    ledger.classical(&classical, &traps);
    Ok(Solved {
        traps,
        quantum,
        classical,
    })
}

/// Largest |Π(0) - 1| and |P(0) - 1| seen by the suite.
#[derive(Default)]
struct InitialValues {
    configs: usize,
    worst: f64,
}

impl InitialValues {
    fn check(&mut self, s: &Solved) -> Result<()> {
        let grid = TimeGrid::from_samples(vec![0.0, 1.0])?;
        let q = quantum_survival(&s.quantum, &s.traps, &grid)?.values[0];
        let c = classical_survival(&s.classical, &s.traps, &grid)?.values[0];
        self.configs += 1;
        self.worst = self.worst.max((q - 1.0).abs()).max((c - 1.0).abs());
        Ok(())
    }
}

struct Suite {
    ledger: InvariantLedger,
    initial: InitialValues,
}

fn periodic_plateau(s: &mut Suite) -> Result<Outcome> {
    let start = Instant::now();
    let grid = TimeGrid::default_for_gamma(0.01);
    let mut tails = Vec::new();
    for m in [10, 75] {
        let solved = solve(
            make_trap_config(ArrangementKind::Periodic, 300, m, 0.01, None)?,
            &mut s.ledger,
        )?;
        s.initial.check(&solved)?;
        tails.push(quantum_survival(&solved.quantum, &solved.traps, &grid)?.tail_decade_mean());
    }
    let elapsed = start.elapsed();
    let target = 1.0 / 225.0;
    let pass = (0.095..=0.105).contains(&tails[0])
        && (tails[1] - target).abs() <= 0.1 * target
        && elapsed <= Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "M=10 tail mean {:.5} (want [0.095, 0.105]); M=75 tail mean {:.6} (want 1/225 = {:.6} ± 10%); {:.2?} (limit 30 s)",
            tails[0], tails[1], target, elapsed
        ),
    )
}

fn dark_states(s: &mut Suite) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, m, expected) in [(300, 10, 29), (300, 75, 1), (20, 5, 1)] {
        let gamma = 0.01;
        let solved = solve(
            make_trap_config(ArrangementKind::Periodic, n, m, gamma, None)?,
            &mut s.ledger,
        )?;
        s.initial.check(&solved)?;
        let dark = solved.quantum.dark_state_count(gamma);
        let upsilon = upsilon_set(n, m)?.cardinality();
        let formula = upsilon_count_formula(n, m)?;
        pass &= dark == expected && upsilon == expected && formula == expected;
        parts.push(format!(
            "({n},{m}): dark {dark}, |Υ| {upsilon}, formula {formula}, want {expected}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn sequential_rates(s: &mut Suite) -> Result<Outcome> {
    let gamma = 0.001;
    let solved = solve(
        make_trap_config(ArrangementKind::Sequential, 48, 24, gamma, None)?,
        &mut s.ledger,
    )?;
    s.initial.check(&solved)?;
    let grid = TimeGrid::default_for_gamma(gamma);
    let q = fit_exponential(&quantum_survival(&solved.quantum, &solved.traps, &grid)?, None)?;
    let c = fit_exponential(&classical_survival(&solved.classical, &solved.traps, &grid)?, None)?;
    let ratio = q.rate / c.rate;
    let pass = (0.95 * gamma..=1.05 * gamma).contains(&q.rate)
        && (0.95 * gamma / 2.0..=1.05 * gamma / 2.0).contains(&c.rate)
        && (q.prefactor - 0.5).abs() <= 0.05
        && (c.prefactor - 0.5).abs() <= 0.05
        && (1.9..=2.1).contains(&ratio);
    outcome(
        pass,
        format!(
            "quantum rate {:.4}Γ A={:.4} on [{:.3e}, {:.3e}]; classical rate {:.4}Γ/2 A={:.4} on [{:.3e}, {:.3e}]; ratio {:.4}",
            q.rate / gamma,
            q.prefactor,
            q.window.t_lo,
            q.window.t_hi,
            c.rate / (gamma / 2.0),
            c.prefactor,
            c.window.t_lo,
            c.window.t_hi,
            ratio
        ),
    )
}

fn sequential_collapse(s: &mut Suite) -> Result<Outcome> {
    // every curve is sampled at the same rescaled times Γt
    let scaled: Vec<f64> = (0..=400).map(|k| 1.0 + 4.0 * k as f64 / 400.0).collect();
    let mut curves = Vec::new();
    for (n, gamma) in [(32, 0.04), (48, 0.01), (64, 0.004), (96, 0.004)] {
        let solved = solve(
            make_trap_config(ArrangementKind::Sequential, n, n / 2, gamma, None)?,
            &mut s.ledger,
        )?;
        s.initial.check(&solved)?;
        let grid = TimeGrid::from_samples(scaled.iter().map(|x| x / gamma).collect())?;
        curves.push((n, quantum_survival(&solved.quantum, &solved.traps, &grid)?.values));
    }
    let mut worst = (0.0, 0, 0);
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let d = curves[a]
                .1
                .iter()
                .zip(&curves[b].1)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if d > worst.0 {
                worst = (d, curves[a].0, curves[b].0);
            }
        }
    }
    outcome(
        worst.0 <= 0.05,
        format!(
            "max pairwise sup |ΔΠ| over Γt ∈ [1,5] = {:.4} (N={} vs N={}; want ≤ 0.05)",
            worst.0, worst.1, worst.2
        ),
    )
}

fn perturbation_convergence(s: &mut Suite) -> Result<Outcome> {
    let mut errors = Vec::new();
    for gamma in [0.04, 0.02, 0.01] {
        let solved = solve(
            make_trap_config(ArrangementKind::Periodic, 300, 10, gamma, None)?,
            &mut s.ledger,
        )?;
        s.initial.check(&solved)?;
        errors.push(max_rate_error(&compare_with_numerics(&solved.traps, &solved.quantum)?));
    }
    let r1 = errors[0] / errors[1];
    let r2 = errors[1] / errors[2];
    outcome(
        r1 >= 3.0 && r2 >= 3.0,
        format!(
            "max |Δγ| = {:.3e}, {:.3e}, {:.3e} for Γ = 0.04, 0.02, 0.01; reduction factors {:.2}, {:.2} (want ≥ 3)",
            errors[0], errors[1], errors[2], r1, r2
        ),
    )
}

fn oracle_configs(n: usize, gamma: f64) -> Result<Vec<TrapConfiguration>> {
    let mut out = Vec::new();
    for m in 1..n {
        if n.is_multiple_of(m) {
            out.push(make_trap_config(ArrangementKind::Periodic, n, m, gamma, None)?);
        }
        out.push(make_trap_config(ArrangementKind::Sequential, n, m, gamma, None)?);
        out.push(make_trap_config(
            ArrangementKind::Random,
            n,
            m,
            gamma,
            Some((100 * n + m) as u64),
        )?);
    }
    Ok(out)
}

fn oracle_equivalence(s: &mut Suite) -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    let mut redrawn = Vec::new();
    for n in 3..=12 {
        let lap = build_ring_laplacian(n)?;
        for gamma in [0.0, 0.01, 0.1, 1.0] {
            for traps in oracle_configs(n, gamma)? {
                let solved = match (solve(traps.clone(), &mut s.ledger), traps.arrangement()) {
                    (Err(e), Arrangement::Random { seed }) if e.is_numerical() => {
                        redrawn.push(format!("{:?} at Γ={gamma}: {e}", traps.trap_nodes()));
                        let fresh =
                            make_trap_config(ArrangementKind::Random, n, traps.m(), gamma, Some(split_seed(seed, 1)))?;
                        solve(fresh, &mut s.ledger)?
                    }
                    (r, _) => r?,
                };
                let h = build_effective_hamiltonian(&lap, &solved.traps)?;
                s.initial.check(&solved)?;
                for t in [0.1, 1.0, 10.0] {
                    for j in 1..=n {
                        let mut e = DVector::from_element(n, Complex64::new(0.0, 0.0));
                        e[j - 1] = Complex64::new(1.0, 0.0);
                        let col = propagate_expm(&h, &e, t)?;
                        for k in 1..=n {
                            let a = transition_amplitude(&solved.quantum, k, j, t)?;
                            worst = worst.max((a - col[k - 1]).norm());
                        }
                    }
                    cases += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed <= Duration::from_secs(5),
        format!(
            "{cases} (config, t) cases, max |α_spectral - α_expm| = {worst:.3e} (want ≤ 1e-8); {elapsed:.2?} (limit 5 s); random draws redrawn after eigensolver rejection: {} [{}]",
            redrawn.len(),
            redrawn.join("; ")
        ),
    )
}

fn conservation(s: &mut Suite) -> Result<Outcome> {
    let grid = TimeGrid::default_for_gamma(0.0);
    let mut worst = 0.0f64;
    let mut configs = 0;
    for n in [3, 8, 25, 60] {
        let mut set = vec![
            make_trap_config(ArrangementKind::Sequential, n, 1, 0.0, None)?,
            make_trap_config(ArrangementKind::Random, n, n / 2, 0.0, Some(n as u64))?,
        ];
        if n % 5 == 0 {
            set.push(make_trap_config(ArrangementKind::Periodic, n, 5, 0.0, None)?);
        }
        for traps in set {
            let solved = solve(traps, &mut s.ledger)?;
            s.initial.check(&solved)?;
            let q: SurvivalCurve = quantum_survival(&solved.quantum, &solved.traps, &grid)?;
            let c = classical_survival(&solved.classical, &solved.traps, &grid)?;
            for v in q.values.iter().chain(&c.values) {
                worst = worst.max((v - 1.0).abs());
            }
            configs += 1;
        }
    }
    outcome(
        worst <= 1e-9 && s.initial.worst <= 1e-9,
        format!(
            "Γ=0: max |Π-1|, |P-1| = {worst:.3e} over {configs} configs x {} times; t=0: max deviation {:.3e} over {} configs (want ≤ 1e-9)",
            grid.len(),
            s.initial.worst,
            s.initial.configs
        ),
    )
}

fn random_discrimination(s: &mut Suite) -> Result<Outcome> {
    let gamma = 0.1;
    let seed = 20_240_601;
    let params = EnsembleParams::new(101, 8, gamma, 120, seed);
    let grid = TimeGrid::default_for_gamma(gamma);
    let start = Instant::now();
    let res = run_random_ensemble(&params, &grid)?;
    let fits = fit_ensemble(&res)?;
    let elapsed = start.elapsed();

    let again = run_random_ensemble(&params.with_workers(1), &grid)?;
    let deterministic = again.mean_quantum.values == res.mean_quantum.values
        && again.mean_classical.values == res.mean_classical.values
        && bootstrap_mu_stderr(&again, fits.quantum_power.window, BOOTSTRAP_RESAMPLES, seed)? == fits.mu_stderr;

    for &seed in &res.seeds {
        let traps = make_trap_config(ArrangementKind::Random, 101, 8, gamma, Some(seed))?;
        solve(traps, &mut s.ledger)?;
    }

    let q = &fits.quantum_power;
    let c = &fits.classical_exponential;
    let pass = q.r_squared > fits.quantum_exponential.r_squared
        && c.r_squared >= 0.99
        && q.mu > 0.0
        && deterministic
        && fits.mu_stderr < 0.2 * q.mu
        && elapsed <= Duration::from_secs(600);
    let w = |w: FitWindow| format!("[{:.3e}, {:.3e}]", w.t_lo, w.t_hi);
    outcome(
        pass,
        format!(
            "quantum on {}: r²(power) {:.5} vs r²(exp) {:.5}, μ = {:.4} ± {:.4}; classical on {}: r²(exp) {:.5}, rate {:.4e}; deterministic {}; {:.2?} (limit 10 min)",
            w(q.window),
            q.r_squared,
            fits.quantum_exponential.r_squared,
            q.mu,
            fits.mu_stderr,
            w(c.window),
            c.r_squared,
            c.rate,
            deterministic,
            elapsed
        ),
    )
}

fn invariants(s: &mut Suite) -> Result<Outcome> {
    let l = &s.ledger;
    outcome(
        l.worst() <= INVARIANT_TOL,
        format!(
            "{} decompositions: biorthonormality {:.2e}, completeness {:.2e}, Σγ rel {:.2e}, Σε rel {:.2e}, classical orthogonality {:.2e}, classical trace rel {:.2e} (want ≤ 1e-8)",
            l.decompositions,
            l.biorthonormality,
            l.completeness,
            l.decay_sum_rel,
            l.energy_sum_rel,
            l.classical_orthogonality,
            l.classical_trace_rel
        ),
    )
}

type Criterion = fn(&mut Suite) -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("periodic plateau", periodic_plateau),
        ("dark-state count", dark_states),
        ("sequential decay rates", sequential_rates),
        ("sequential collapse in Γt", sequential_collapse),
        ("perturbation convergence", perturbation_convergence),
        ("oracle equivalence", oracle_equivalence),
        ("conservation limits", conservation),
        ("random-trap discrimination", random_discrimination),
        ("spectral invariants", invariants),
    ];
    let mut suite = Suite {
        ledger: InvariantLedger::default(),
        initial: InitialValues::default(),
    };
    let mut failed = 0;
    // conservation reports on every t=0 check, so it runs after the others that build systems
    let order = [0, 1, 2, 3, 4, 5, 7, 6, 8];
    let mut lines = vec![String::new(); criteria.len()];
    for i in order {
        let (name, run) = criteria[i];
        let (pass, detail) = match run(&mut suite) {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        lines[i] = format!(
            "criterion {}: {} {} ({})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            detail
        );
        println!("{}", lines[i]);
    }
    println!();
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
