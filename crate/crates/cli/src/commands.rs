//! One runner per subcommand. Runners print a short summary and hand every
//! file to the output directory; they return the seeds that were used.

use serde_json::json;

use trapwalk_core::dynamics::{
    classical_survival, classical_survival_asymptotic, quantum_survival, quantum_survival_asymptotic, write_csv_rows,
    SurvivalCurve,
};
use trapwalk_core::ensemble::{
    fit_ensemble, run_random_ensemble, split_seed, sweep_csv, sweep_mu_vs_concentration, EnsembleParams,
    DEFAULT_REALIZATIONS,
};
use trapwalk_core::lattice::{
    build_classical_transfer, build_effective_hamiltonian, build_ring_laplacian, make_trap_config, Arrangement,
    ArrangementKind, TrapConfiguration,
};
use trapwalk_core::perturbation::{
    compare_with_numerics, corrections_csv, first_order_corrections, max_rate_error, upsilon_set,
};
use trapwalk_core::spectral::{
    dark_state_threshold, decompose_nonhermitian, decompose_symmetric, propagator_deviation, BiorthogonalDecomposition,
    RealSpectralDecomposition,
};

use crate::error::{CliError, CliResult};
use crate::output::{tag, OutputDir};
use crate::settings::{grid, record_grid_defaults, systems, Settings};

pub const VALIDATION_TOLERANCE: f64 = 1e-8;
const VALIDATION_TIMES: [f64; 3] = [0.1, 1.0, 10.0];

fn quantum(traps: &TrapConfiguration) -> CliResult<BiorthogonalDecomposition> {
    let lap = build_ring_laplacian(traps.n())?;
    Ok(decompose_nonhermitian(&build_effective_hamiltonian(&lap, traps)?)?)
}

fn classical(traps: &TrapConfiguration) -> CliResult<RealSpectralDecomposition> {
    let lap = build_ring_laplacian(traps.n())?;
    Ok(decompose_symmetric(&build_classical_transfer(&lap, traps)?)?)
}

fn seeds_of(systems: &[TrapConfiguration]) -> Vec<u64> {
    systems.iter().filter_map(|t| t.arrangement().seed()).collect()
}

fn single_gamma(systems: &[TrapConfiguration], s: &mut Settings) {
    if let Some(first) = systems.first() {
        if systems.iter().all(|t| t.gamma() == first.gamma()) {
            record_grid_defaults(s, first.gamma());
        }
    }
}

pub fn spectrum(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    let systems = systems(s)?;
    for traps in &systems {
        let dec = quantum(traps)?;
        let cl = classical(traps)?;
        let name = tag(traps);
        out.write(&format!("spectrum_{name}.csv"), &dec.spectrum_csv())?;
        let dark = dec.dark_state_count(traps.gamma());
        out.write_json(
            &format!("spectrum_{name}.json"),
            &json!({
                "traps": traps.to_json(),
                "invariants": dec.invariant_report(),
                "dark_states": dark,
                "dark_threshold": dark_state_threshold(traps.gamma()),
                "qr_sweeps": dec.sweeps(),
                "classical_min_rate": cl.min_rate(),
            }),
        )?;
        println!(
            "{name}: {dark} dark states, min decay rate {:.6e}, classical min rate {:.6e}",
            dec.decay_rates().iter().copied().fold(f64::INFINITY, f64::min),
            cl.min_rate()
        );
    }
    Ok(seeds_of(&systems))
}

pub fn survival(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    let systems = systems(s)?;
    s.set_default("model", "both");
    let model = s.raw("model").unwrap_or("both").to_ascii_lowercase();
    let (want_q, want_c) = match model.as_str() {
        "quantum" => (true, false),
        "classical" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::config(format!("unknown model `{other}`"))),
    };
    let asymptotic = s.flag("asymptotic")?;
    for traps in &systems {
        let g = grid(s, traps.gamma())?;
        let mut curves: Vec<SurvivalCurve> = Vec::new();
        if want_q {
            let dec = quantum(traps)?;
            curves.push(quantum_survival(&dec, traps, &g)?);
            if asymptotic {
                curves.push(quantum_survival_asymptotic(&dec, traps, &g)?);
            }
        }
        if want_c {
            let dec = classical(traps)?;
            curves.push(classical_survival(&dec, traps, &g)?);
            if asymptotic {
                curves.push(classical_survival_asymptotic(&dec, traps, &g)?);
            }
        }
        let name = tag(traps);
        let mut csv = String::from("t,value,kind\n");
        for c in &curves {
            write_csv_rows(&mut csv, c);
        }
        out.write(&format!("survival_{name}.csv"), &csv)?;
        let tails: serde_json::Map<String, serde_json::Value> = curves
            .iter()
            .map(|c| (c.kind.as_str().to_string(), json!(c.tail_decade_mean())))
            .collect();
        out.write_json(
            &format!("survival_{name}.json"),
            &json!({
                "curves": curves.iter().map(SurvivalCurve::sidecar_json).collect::<Vec<_>>(),
                "tail_decade_mean": tails,
            }),
        )?;
        let summary: Vec<String> = curves
            .iter()
            .map(|c| format!("{} {:.6}", c.kind.as_str(), c.tail_decade_mean()))
            .collect();
        println!("{name}: tail-decade mean {}", summary.join(", "));
    }
    single_gamma(&systems, s);
    Ok(seeds_of(&systems))
}

pub fn perturb(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    let systems = systems(s)?;
    let compare = s.flag("compare")?;
    for traps in &systems {
        let name = tag(traps);
        let comparison = if compare {
            Some(compare_with_numerics(traps, &quantum(traps)?)?)
        } else {
            None
        };
        out.write(
            &format!("perturbation_{name}.csv"),
            &corrections_csv(traps, comparison.as_deref()),
        )?;
        let resonant = first_order_corrections(traps)
            .iter()
            .filter(|c| c.decay_rate().abs() < dark_state_threshold(traps.gamma()))
            .count();
        let upsilon = match traps.arrangement() {
            Arrangement::Periodic => Some(upsilon_set(traps.n(), traps.m())?.members),
            _ => None,
        };
        let bound = 5.0 * traps.gamma() * traps.gamma();
        let max_error = comparison.as_deref().map(max_rate_error);
        out.write_json(
            &format!("perturbation_{name}.json"),
            &json!({
                "traps": traps.to_json(),
                "first_order_dark_modes": resonant,
                "upsilon": upsilon,
                "max_abs_error": max_error,
                "error_bound": bound,
                "levels": comparison,
            }),
        )?;
        match max_error {
            Some(e) => println!(
                "{name}: max |gamma_numeric - gamma_pert| = {e:.3e} ({} 5*gamma^2 = {bound:.3e})",
                if e <= bound { "<=" } else { ">" }
            ),
            None => println!("{name}: {resonant} modes with vanishing first-order decay"),
        }
    }
    Ok(seeds_of(&systems))
}

pub fn ensemble(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    s.set_default("arrangement", "random");
    s.set_default("realizations", DEFAULT_REALIZATIONS);
    let systems = systems(s)?;
    let realizations: usize = s.require("realizations")?;
    let workers = s.workers()?;
    let mut seeds = Vec::new();
    for traps in &systems {
        let Arrangement::Random { seed } = traps.arrangement() else {
            return Err(CliError::config("ensembles need arrangement = random"));
        };
        let g = grid(s, traps.gamma())?;
        let params = EnsembleParams::new(traps.n(), traps.m(), traps.gamma(), realizations, seed).with_workers(workers);
        let res = run_random_ensemble(&params, &g)?;
        let fits = fit_ensemble(&res)?;
        let name = format!("n{}_m{}_g{}_s{}", traps.n(), traps.m(), traps.gamma(), seed);
        out.write(&format!("ensemble_{name}.csv"), &res.to_csv())?;
        let mut doc = fits.to_json();
        doc["ensemble"] = res.summary_json();
        out.write_json(&format!("fits_{name}.json"), &doc)?;
        println!(
            "{name}: mu = {:.4} +/- {:.4} (r2 power {:.4} vs exp {:.4}); classical rate {:.4e} (r2 {:.4})",
            fits.quantum_power.mu,
            fits.mu_stderr,
            fits.quantum_power.r_squared,
            fits.quantum_exponential.r_squared,
            fits.classical_exponential.rate,
            fits.classical_exponential.r_squared
        );
        seeds.extend(res.seeds);
    }
    single_gamma(&systems, s);
    Ok(seeds)
}

pub fn sweep(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    s.set_default("arrangement", "random");
    s.set_default("realizations", DEFAULT_REALIZATIONS);
    if s.raw("arrangement") != Some("random") {
        return Err(CliError::config("sweeps need arrangement = random"));
    }
    let ns: Vec<usize> = s
        .list("n")?
        .ok_or_else(|| CliError::config("missing required setting `n`"))?;
    let ms: Vec<usize> = s
        .list("m")?
        .ok_or_else(|| CliError::config("missing required setting `m`"))?;
    let gamma: f64 = s.require("gamma")?;
    let seed: u64 = s.require("seed")?;
    let realizations: usize = s.require("realizations")?;
    let workers = s.workers()?;
    let g = grid(s, gamma)?;
    let rows = sweep_mu_vs_concentration(&ns, &ms, gamma, realizations, seed, workers, &g)?;
    out.write("sweep.csv", &sweep_csv(&rows))?;
    out.write_json(
        "sweep.json",
        &json!({ "gamma": gamma, "realizations": realizations, "rows": rows }),
    )?;
    for r in &rows {
        match &r.error {
            None => println!(
                "n={} m={} c={:.5}: mu = {:.4} +/- {:.4} (r2 {:.4})",
                r.n, r.m, r.c, r.mu, r.mu_stderr, r.r_squared
            ),
            Some(e) => println!("n={} m={} c={:.5}: failed: {e}", r.n, r.m, r.c),
        }
    }
    record_grid_defaults(s, gamma);
    Ok(vec![seed])
}

/// Every arrangement and trap count on a ring of `n` sites.
fn validation_systems(n: usize, gamma: f64, seed: u64) -> CliResult<Vec<TrapConfiguration>> {
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
            Some(split_seed(seed, m as u64)),
        )?);
    }
    Ok(out)
}

pub fn validate(s: &mut Settings, out: &mut OutputDir) -> CliResult<Vec<u64>> {
    s.set_default("n", 8);
    s.set_default("gamma", "0,0.01,0.1,1");
    s.set_default("seed", 0);
    let ns: Vec<usize> = s.list("n")?.unwrap_or_default();
    let gammas: Vec<f64> = s.list("gamma")?.unwrap_or_default();
    let seed: u64 = s.require("seed")?;
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    let mut redrawn = Vec::new();
    let mut seeds = Vec::new();
    for &n in &ns {
        let lap = build_ring_laplacian(n)?;
        for &gamma in &gammas {
            for traps in validation_systems(n, gamma, seed)? {
                // exceptional points of a random draw get one fresh draw
                let traps = match (quantum(&traps), traps.arrangement()) {
                    (Err(e), Arrangement::Random { seed }) if e.code == crate::error::EXIT_NUMERICAL => {
                        redrawn.push(json!({ "traps": traps.to_json(), "error": e.message }));
                        make_trap_config(ArrangementKind::Random, n, traps.m(), gamma, Some(split_seed(seed, 1)))?
                    }
                    _ => traps,
                };
                let dec = quantum(&traps)?;
                let h = build_effective_hamiltonian(&lap, &traps)?;
                for t in VALIDATION_TIMES {
                    worst = worst.max(propagator_deviation(&h, &dec, t)?);
                    cases += 1;
                }
                seeds.extend(traps.arrangement().seed());
            }
        }
    }
    let pass = worst < VALIDATION_TOLERANCE;
    out.write_json(
        "validate.json",
        &json!({
            "cases": cases,
            "times": VALIDATION_TIMES,
            "max_deviation": worst,
            "tolerance": VALIDATION_TOLERANCE,
            "pass": pass,
            "redrawn": redrawn,
        }),
    )?;
    println!(
        "max deviation {worst:.3e} over {cases} cases (tolerance {VALIDATION_TOLERANCE:e}): {}",
        if pass { "ok" } else { "FAILED" }
    );
    if pass {
        Ok(seeds)
    } else {
        Err(CliError::numerical(format!(
            "spectral and exponential propagators differ by {worst:.3e}"
        )))
    }
}
