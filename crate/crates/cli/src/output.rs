use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use trapwalk_core::lattice::{Arrangement, TrapConfiguration};

use crate::error::{CliError, CliResult};
use crate::settings::Settings;

pub const DEFAULT_OUTPUT: &str = "trapwalk-output";

/// Collects every file written by one command, for the manifest.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: &'a str,
    config: serde_json::Value,
    seeds: &'a [u64],
    files: &'a [String],
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, command: &str, settings: &Settings, seeds: &[u64]) -> CliResult<PathBuf> {
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            library_version: trapwalk_core::VERSION,
            command,
            config: settings.to_json(),
            seeds,
            files: &files,
        };
        let value = serde_json::to_value(&manifest).expect("manifest always serializes");
        self.write_json("manifest.json", &value)
    }
}

/// File-name stem identifying one system, e.g. `n300_m10_g0.01_periodic`.
pub fn tag(traps: &TrapConfiguration) -> String {
    let base = format!(
        "n{}_m{}_g{}_{}",
        traps.n(),
        traps.m(),
        traps.gamma(),
        traps.arrangement().kind()
    );
    match traps.arrangement() {
        Arrangement::Random { seed } => format!("{base}_s{seed}"),
        _ => base,
    }
}
