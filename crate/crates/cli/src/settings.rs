//! Flat key/value experiment settings: config file first, then flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use trapwalk_core::dynamics::{TimeGrid, DEFAULT_GRID_POINTS, DEFAULT_T_MIN, TRAP_FREE_T_MAX};
use trapwalk_core::lattice::{make_trap_config, ArrangementKind, TrapConfiguration};

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "command",
    "n",
    "m",
    "gamma",
    "arrangement",
    "seed",
    "traps",
    "t_min",
    "t_max",
    "points",
    "spacing",
    "model",
    "asymptotic",
    "compare",
    "realizations",
    "workers",
    "output",
];

pub const WORKERS_ENV: &str = "TRAPWALK_WORKERS";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn scalar_text(key: &str, value: &toml::Value) -> CliResult<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(x) => Ok(x.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Array(_) | toml::Value::Table(_) => {
                    Err(CliError::config(format!("`{key}`: nested lists are not supported")))
                }
                other => scalar_text(key, other),
            })
            .collect::<CliResult<Vec<_>>>()
            .map(|parts| parts.join(",")),
        _ => Err(CliError::config(format!("`{key}`: expected a flat value"))),
    }
}

impl Settings {
    /// Reads a TOML file of flat keys, or the `config` block of a manifest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut settings = Settings::default();
        if path.extension().is_some_and(|e| e == "json") {
            let doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let Some(config) = doc.get("config").and_then(|c| c.as_object()) else {
                return Err(CliError::config(format!("{}: no `config` object", path.display())));
            };
            for (k, v) in config {
                let text = v
                    .as_str()
                    .ok_or_else(|| CliError::config(format!("{}: `{k}` is not a string", path.display())))?;
                settings.set(k, text)?;
            }
        } else {
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            for (k, v) in &table {
                settings.set(k, scalar_text(k, v)?)?;
            }
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::config(format!("unknown setting `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn set_default(&mut self, key: &str, value: impl Display) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    /// Applies a flag value; flags always win over the file.
    pub fn overlay(&mut self, key: &str, value: Option<impl Display>) -> CliResult<()> {
        match value {
            Some(v) => self.set(key, v.to_string()),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CliError::config(format!("`{key}` = `{s}`: {e}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::config(format!("missing required setting `{key}`")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(s) = self.raw(key) else {
            return Ok(None);
        };
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|e| CliError::config(format!("`{key}` entry `{}`: {e}", part.trim())))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    pub fn flag(&self, key: &str) -> CliResult<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    /// Worker count: flag, then config, then the environment, else all cores.
    pub fn workers(&mut self) -> CliResult<usize> {
        if self.raw("workers").is_none() {
            if let Ok(v) = std::env::var(WORKERS_ENV) {
                self.set("workers", v)?;
            }
        }
        Ok(self.get("workers")?.unwrap_or(0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).unwrap_or_default()
    }
}

/// Broadcasts per-key lists to a common length; single values repeat.
fn zip_len(lens: &[(&str, usize)]) -> CliResult<usize> {
    let mut len = 1;
    for &(key, l) in lens {
        if l > 1 {
            if len > 1 && l != len {
                return Err(CliError::config(format!(
                    "list `{key}` has {l} entries but another list has {len}"
                )));
            }
            len = l;
        }
    }
    Ok(len)
}

fn pick<T: Clone>(items: &[T], i: usize) -> T {
    items[if items.len() == 1 { 0 } else { i }].clone()
}

/// Trap configurations described by the settings, one per zipped entry.
pub fn systems(s: &Settings) -> CliResult<Vec<TrapConfiguration>> {
    let ns: Vec<usize> = s
        .list("n")?
        .ok_or_else(|| CliError::config("missing required setting `n`"))?;
    let gammas: Vec<f64> = s
        .list("gamma")?
        .ok_or_else(|| CliError::config("missing required setting `gamma`"))?;
    let kinds: Vec<ArrangementKind> = s
        .list("arrangement")?
        .unwrap_or_else(|| vec![ArrangementKind::Periodic]);

    if kinds.contains(&ArrangementKind::Custom) {
        if ns.len() != 1 || kinds.len() != 1 {
            return Err(CliError::config("custom arrangements describe a single system"));
        }
        let nodes: Vec<usize> = s
            .list("traps")?
            .ok_or_else(|| CliError::config("custom arrangement needs `traps`"))?;
        if let Some(m) = s.get::<usize>("m")? {
            if m != nodes.len() {
                return Err(CliError::config(format!(
                    "m = {m} but {} trap labels given",
                    nodes.len()
                )));
            }
        }
        return gammas
            .iter()
            .map(|&g| Ok(TrapConfiguration::custom(ns[0], &nodes, g)?))
            .collect();
    }
    if s.raw("traps").is_some() {
        return Err(CliError::config("`traps` is only valid with arrangement = custom"));
    }

    let ms: Vec<usize> = s
        .list("m")?
        .ok_or_else(|| CliError::config("missing required setting `m`"))?;
    let seeds: Vec<u64> = s.list("seed")?.unwrap_or_default();
    if kinds.contains(&ArrangementKind::Random) && seeds.is_empty() {
        return Err(CliError::config("random arrangement requires `seed`"));
    }
    let len = zip_len(&[
        ("n", ns.len()),
        ("m", ms.len()),
        ("gamma", gammas.len()),
        ("arrangement", kinds.len()),
        ("seed", seeds.len()),
    ])?;
    (0..len)
        .map(|i| {
            let seed = (!seeds.is_empty()).then(|| pick(&seeds, i));
            Ok(make_trap_config(
                pick(&kinds, i),
                pick(&ns, i),
                pick(&ms, i),
                pick(&gammas, i),
                seed,
            )?)
        })
        .collect()
}

/// Time grid from the settings; missing pieces follow the default rule for Γ.
pub fn grid(s: &Settings, gamma: f64) -> CliResult<TimeGrid> {
    let fallback = TimeGrid::default_for_gamma(gamma);
    let t_min = s.get::<f64>("t_min")?.unwrap_or(DEFAULT_T_MIN);
    let t_max = s.get::<f64>("t_max")?.unwrap_or(fallback.last());
    let points = s.get::<usize>("points")?.unwrap_or(DEFAULT_GRID_POINTS);
    let spacing = s.raw("spacing").unwrap_or("logarithmic").to_ascii_lowercase();
    let g = match spacing.as_str() {
        "log" | "logarithmic" => TimeGrid::logarithmic(t_min, t_max, points)?,
        "linear" => TimeGrid::linear(t_min, t_max, points)?,
        other => return Err(CliError::config(format!("unknown spacing `{other}`"))),
    };
    Ok(g)
}

/// Writes the grid defaults into the settings when every system shares one Γ.
pub fn record_grid_defaults(s: &mut Settings, gamma: f64) {
    let t_max = if gamma > 0.0 { 1e3 / gamma } else { TRAP_FREE_T_MAX };
    s.set_default("t_min", DEFAULT_T_MIN);
    if s.list::<f64>("gamma").ok().flatten().is_some_and(|g| g.len() == 1) {
        s.set_default("t_max", t_max);
    }
    s.set_default("points", DEFAULT_GRID_POINTS);
    s.set_default("spacing", "logarithmic");
}
