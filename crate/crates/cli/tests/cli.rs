use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn trapwalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapwalk"))
        .current_dir(dir)
        .env_remove("TRAPWALK_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

#[test]
fn periodic_survival_tail_mean() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "survival",
            "--n",
            "300",
            "--arrangement",
            "periodic",
            "--m",
            "10",
            "--gamma",
            "0.01",
            "-o",
            "out",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("out/survival_n300_m10_g0.01_periodic.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,value,kind"));
    let rows: Vec<(f64, f64, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 800);
    let quantum_tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.2 == "quantum_exact" && r.0 >= 1e4)
        .map(|r| r.1)
        .collect();
    let mean = quantum_tail.iter().sum::<f64>() / quantum_tail.len() as f64;
    assert!((mean - 0.1).abs() < 0.005, "tail mean {mean}");

    let sidecar = json(dir.path().join("out/survival_n300_m10_g0.01_periodic.json"));
    assert!((sidecar["tail_decade_mean"]["quantum_exact"].as_f64().unwrap() - mean).abs() < 1e-12);
    let manifest = json(dir.path().join("out/manifest.json"));
    assert_eq!(manifest["command"], "survival");
    assert_eq!(manifest["config"]["t_max"], "100000");
}

#[test]
fn validate_reports_small_deviation() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(dir.path(), &["validate", "--n", "8", "--gamma", "0.1", "-o", "v"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max deviation"));
    let report = json(dir.path().join("v/validate.json"));
    assert!(report["max_deviation"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["pass"], true);
}

#[test]
fn perturb_compare_within_bound() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "perturb",
            "--n",
            "20",
            "--arrangement",
            "periodic",
            "--m",
            "5",
            "--gamma",
            "0.01",
            "--compare",
            "-o",
            "p",
        ],
    );
    assert!(o.status.success());
    let csv = read(dir.path().join("p/perturbation_n20_m5_g0.01_periodic.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("l,re_E1,im_E1,branch,resonant,gamma_numeric,abs_error")
    );
    let mut rows = 0;
    for l in lines {
        let err: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err <= 5.0 * 0.01 * 0.01);
        rows += 1;
    }
    assert_eq!(rows, 20);
}

#[test]
fn spectrum_files_and_dark_states() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &["spectrum", "--n", "20", "--m", "5", "--gamma", "0.01", "-o", "s"],
    );
    assert!(o.status.success());
    let meta = json(dir.path().join("s/spectrum_n20_m5_g0.01_periodic.json"));
    assert_eq!(meta["dark_states"], 1);
    let csv = read(dir.path().join("s/spectrum_n20_m5_g0.01_periodic.csv"));
    assert_eq!(csv.lines().next(), Some("l,epsilon,gamma"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn exit_codes_and_error_json() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(dir.path(), &["survival", "--n", "10", "--m", "3", "--gamma", "0.1"]);
    assert_eq!(o.status.code(), Some(2), "periodic needs m | n");
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["exit_code"], 2);

    let o = trapwalk(dir.path(), &["survival", "--n", "x", "--m", "3", "--gamma", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = trapwalk(dir.path(), &["spectrum", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "spectrum",
            "--n",
            "6",
            "--m",
            "2",
            "--gamma",
            "0.1",
            "-o",
            "blocker/sub",
        ],
    );
    assert_eq!(o.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "n = 12\nm = 3\ngamma = 0.5\narrangement = \"sequential\"\npoints = 20\n",
    )
    .unwrap();
    let o = trapwalk(
        dir.path(),
        &["survival", "--config", "c.toml", "--gamma", "0.25", "-o", "c"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(dir.path().join("c/manifest.json"));
    assert_eq!(manifest["config"]["gamma"], "0.25");
    assert_eq!(manifest["config"]["points"], "20");
    assert!(dir.path().join("c/survival_n12_m3_g0.25_sequential.csv").exists());

    std::fs::write(dir.path().join("bad.toml"), "n = 12\ncolour = \"red\"\n").unwrap();
    let o = trapwalk(dir.path(), &["survival", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("other.toml"), "command = \"sweep\"\n").unwrap();
    let o = trapwalk(dir.path(), &["survival", "--config", "other.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "ensemble", "--n", "15", "--m", "3", "--gamma", "0.2", "--seed", "4", "-r", "6", "--points", "120", "-o",
            "first",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = trapwalk(
        dir.path(),
        &["ensemble", "--config", "first/manifest.json", "-o", "second"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let name = "ensemble_n15_m3_g0.2_s4.csv";
    assert_eq!(
        read(dir.path().join("first").join(name)),
        read(dir.path().join("second").join(name))
    );
    let fits = json(dir.path().join("first/fits_n15_m3_g0.2_s4.json"));
    for key in ["mu", "rate", "stderr"] {
        assert!(fits[key].is_number(), "{key}");
    }
    let manifest = json(dir.path().join("first/manifest.json"));
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 6);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "ensemble", "--n", "13", "--m", "2", "--gamma", "0.3", "--seed", "9", "-r", "8", "--points", "80", "-o",
            out,
        ]
    };
    let one = Command::new(env!("CARGO_BIN_EXE_trapwalk"))
        .current_dir(dir.path())
        .env("TRAPWALK_WORKERS", "1")
        .args(args("one"))
        .output()
        .unwrap();
    assert!(one.status.success());
    let many = trapwalk(dir.path(), &[args("many"), vec!["--workers", "4"]].concat());
    assert!(many.status.success());
    let name = "ensemble_n13_m2_g0.3_s9.csv";
    assert_eq!(
        read(dir.path().join("one").join(name)),
        read(dir.path().join("many").join(name))
    );
    assert_eq!(json(dir.path().join("one/manifest.json"))["config"]["workers"], "1");
}

#[test]
fn sweep_rows_sorted_by_size_and_concentration() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "sweep", "--n", "21,15", "--m", "4,2", "--gamma", "0.3", "--seed", "2", "-r", "6", "--points", "150", "-o",
            "sw",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("sw/sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,m,c,mu,mu_stderr,r_squared"));
    let keys: Vec<(usize, usize)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(15, 2), (15, 4), (21, 2), (21, 4)]);
}

#[test]
fn presets_are_written_and_runnable() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(dir.path(), &["presets", "-o", "p"]);
    assert!(o.status.success());
    for name in ["fig2", "fig3", "fig4", "fig5"] {
        assert!(dir.path().join(format!("p/{name}.toml")).exists());
    }
    assert!(read(dir.path().join("p/fig4.toml")).contains("n = [48,"));
    let o = trapwalk(dir.path(), &["presets", "--name", "fig9", "-o", "q"]);
    assert_eq!(o.status.code(), Some(2));

    // fig2 with a coarse grid keeps the run short
    let o = trapwalk(
        dir.path(),
        &["survival", "--config", "p/fig2.toml", "--points", "40", "-o", "f2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("f2/survival_n300_m75_g0.01_periodic.csv").exists());
}

#[test]
fn custom_traps_from_flags() {
    let dir = TempDir::new().unwrap();
    let o = trapwalk(
        dir.path(),
        &[
            "survival",
            "--n",
            "9",
            "--arrangement",
            "custom",
            "--traps",
            "2,7",
            "--gamma",
            "0.5",
            "--asymptotic",
            "-o",
            "cu",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("cu/survival_n9_m2_g0.5_custom.csv"));
    for kind in [
        "quantum_exact",
        "quantum_asymptotic",
        "classical_exact",
        "classical_asymptotic",
    ] {
        assert!(csv.contains(kind), "{kind}");
    }
}
