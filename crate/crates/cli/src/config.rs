//! `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use nestprog::cohort::Cohort;
use nestprog::models::Algorithm;
use nestprog::tuning::{parameter_names, Axis, PRESET_NAMES};

use crate::error::{CliError, Result};

/// Recognised keys besides `grid.<parameter>`.
pub const KEYS: [&str; 12] = [
    "data",
    "schema",
    "records",
    "cohort",
    "algorithm",
    "grid",
    "neighbors",
    "seed",
    "repeats",
    "workers",
    "out",
    "permutation_repeats",
];

const PATH_KEYS: [&str; 4] = ["data", "schema", "records", "out"];

#[derive(Clone, Debug, PartialEq)]
pub enum CohortChoice {
    /// The data file already carries an outcome column.
    Prebuilt,
    /// Build this cohort from predictors plus diagnosis records.
    Build(Cohort),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridChoice {
    /// The published grid; `expand_gbm` takes the full GBM integer ranges.
    Full { expand_gbm: bool },
    /// A single fixed combination from the named presets.
    Named(String),
    Custom(Vec<Axis>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub records: Option<PathBuf>,
    pub cohort: CohortChoice,
    pub algorithm: Algorithm,
    pub grid: GridChoice,
    pub neighbors: usize,
    pub seed: u64,
    pub repeats: usize,
    pub workers: usize,
    pub out: PathBuf,
    pub permutation_repeats: usize,
}

/// Raw key/value pairs; later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) || key.strip_prefix("grid.").is_some_and(|p| !p.is_empty()) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown configuration key `{key}`")))
    }
}

impl ConfigMap {
    /// Parses `key = value` lines. `#` starts a comment line. Relative paths
    /// are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<ConfigMap> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("config line {}: expected key=value, got `{line}`", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            check_key(k)?;
            let v = if PATH_KEYS.contains(&k) { base.join(v).to_string_lossy().into_owned() } else { v.to_string() };
            if map.values.insert(k.to_string(), v).is_some() {
                return Err(CliError::Config(format!("config line {}: key `{k}` given twice", n + 1)));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<ConfigMap> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        ConfigMap::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn overlay(&mut self, other: ConfigMap) {
        self.values.extend(other.values);
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T, what: &str) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("key `{key}`: expected {what}, got `{v}`"))),
        }
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        self.get(key)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn grid(&self, algorithm: Algorithm) -> Result<GridChoice> {
        let custom: Vec<(&str, &str)> = self
            .values
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("grid.").map(|p| (p, v.as_str())))
            .collect();
        let name = self.get("grid").unwrap_or(if custom.is_empty() { "full" } else { "custom" });
        if !custom.is_empty() && name != "custom" {
            return Err(CliError::Config(format!("grid.<parameter> keys need grid=custom, got grid={name}")));
        }
        match name {
            "full" => Ok(GridChoice::Full { expand_gbm: false }),
            "full-expanded" => Ok(GridChoice::Full { expand_gbm: true }),
            "custom" => {
                if custom.is_empty() {
                    return Err(CliError::Config("grid=custom needs at least one grid.<parameter> key".into()));
                }
                // Axes follow the algorithm's parameter order, not key order.
                let mut axes = Vec::new();
                for (param, _) in parameter_names(algorithm) {
                    if let Some((_, list)) = custom.iter().find(|(p, _)| p == param) {
                        let values = list
                            .split(',')
                            .map(|s| {
                                s.trim().parse::<f64>().map_err(|_| {
                                    CliError::Config(format!("key `grid.{param}`: expected numbers, got `{s}`"))
                                })
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        axes.push(Axis { name: param.to_string(), values });
                    }
                }
                if let Some((p, _)) = custom.iter().find(|(p, _)| !parameter_names(algorithm).iter().any(|(n, _)| n == p)) {
                    return Err(CliError::Config(format!("`{p}` is not a {algorithm} parameter")));
                }
                Ok(GridChoice::Custom(axes))
            }
            n if PRESET_NAMES.contains(&n) => Ok(GridChoice::Named(n.to_string())),
            other => Err(CliError::Config(format!(
                "key `grid`: unknown grid `{other}` (full, full-expanded, custom, {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Applies defaults and checks types. Paths are checked by [`RunConfig::check_paths`].
    pub fn resolve(&self) -> Result<RunConfig> {
        let algorithm: Algorithm = self
            .get("algorithm")
            .ok_or_else(|| CliError::Config("missing required key `algorithm`".into()))?
            .parse()
            .map_err(|e: String| CliError::Config(format!("key `algorithm`: {e}")))?;
        let cohort = match self.get("cohort").unwrap_or("prebuilt") {
            "prebuilt" | "pre-built" => CohortChoice::Prebuilt,
            c => CohortChoice::Build(c.parse().map_err(|e: String| CliError::Config(format!("key `cohort`: {e}")))?),
        };
        let records = self.get("records").map(PathBuf::from);
        if matches!(cohort, CohortChoice::Build(_)) && records.is_none() {
            return Err(CliError::Config("cohort building needs the `records` key".into()));
        }
        let cfg = RunConfig {
            data: self.path("data")?,
            schema: self.path("schema")?,
            records,
            cohort,
            algorithm,
            grid: self.grid(algorithm)?,
            neighbors: self.parsed("neighbors", 5, "a positive integer")?,
            seed: self.parsed("seed", 0, "an unsigned integer")?,
            repeats: self.parsed("repeats", 1, "a positive integer")?,
            workers: self.parsed("workers", 1, "a positive integer")?,
            out: self.path("out")?,
            permutation_repeats: self.parsed(
                "permutation_repeats",
                nestprog::importance::DEFAULT_PERMUTATION_REPEATS,
                "a positive integer",
            )?,
        };
        for (key, v) in [
            ("neighbors", cfg.neighbors),
            ("repeats", cfg.repeats),
            ("workers", cfg.workers),
            ("permutation_repeats", cfg.permutation_repeats),
        ] {
            if v == 0 {
                return Err(CliError::Config(format!("key `{key}` must be at least 1")));
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn check_paths(&self) -> Result<()> {
        let inputs = [Some(&self.data), Some(&self.schema), self.records.as_ref()];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file `{}` does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Path| p.to_string_lossy().into_owned();
        let _ = writeln!(s, "data = {}", path(&self.data));
        let _ = writeln!(s, "schema = {}", path(&self.schema));
        if let Some(r) = &self.records {
            let _ = writeln!(s, "records = {}", path(r));
        }
        let cohort = match self.cohort {
            CohortChoice::Prebuilt => "prebuilt".to_string(),
            CohortChoice::Build(c) => c.name().to_ascii_lowercase(),
        };
        let _ = writeln!(s, "cohort = {cohort}");
        let _ = writeln!(s, "algorithm = {}", self.algorithm.name());
        match &self.grid {
            GridChoice::Full { expand_gbm: false } => s.push_str("grid = full\n"),
            GridChoice::Full { expand_gbm: true } => s.push_str("grid = full-expanded\n"),
            GridChoice::Named(n) => {
                let _ = writeln!(s, "grid = {n}");
            }
            GridChoice::Custom(axes) => {
                s.push_str("grid = custom\n");
                for a in axes {
                    let vals: Vec<String> = a.values.iter().map(|v| format!("{v:?}")).collect();
                    let _ = writeln!(s, "grid.{} = {}", a.name, vals.join(","));
                }
            }
        }
        let _ = writeln!(s, "neighbors = {}", self.neighbors);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "repeats = {}", self.repeats);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "out = {}", path(&self.out));
        let _ = writeln!(s, "permutation_repeats = {}", self.permutation_repeats);
        s
    }

    pub fn log(&self) {
        for line in self.to_text().lines() {
            info!("config {line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ConfigMap {
        ConfigMap::parse("data = d.csv\nschema = s.txt\nalgorithm = cart\nout = o\n", Path::new("/w")).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = minimal().resolve().unwrap();
        assert_eq!((cfg.neighbors, cfg.repeats, cfg.seed, cfg.workers), (5, 1, 0, 1));
        assert_eq!(cfg.data, PathBuf::from("/w/d.csv"));
        assert_eq!(cfg.grid, GridChoice::Full { expand_gbm: false });
        assert_eq!(cfg.cohort, CohortChoice::Prebuilt);
    }

    #[test]
    fn overrides_win() {
        let mut map = minimal();
        map.set("repeats", "10").unwrap();
        let mut flags = ConfigMap::default();
        flags.set("repeats", "100").unwrap();
        map.overlay(flags);
        assert_eq!(map.resolve().unwrap().repeats, 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ConfigMap::parse("foo=1\n", Path::new("")).unwrap_err();
        assert!(err.to_string().contains("`foo`"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn type_mismatch() {
        let mut map = minimal();
        map.set("seed", "abc").unwrap();
        assert!(map.resolve().unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn missing_path() {
        let map = ConfigMap::parse("schema = s\nalgorithm = en\nout = o\n", Path::new("")).unwrap();
        assert!(map.resolve().unwrap_err().to_string().contains("`data`"));
    }

    #[test]
    fn custom_grid_round_trips() {
        let mut map = minimal();
        map.set("grid.cp_index", "1, 50,200").unwrap();
        let cfg = map.resolve().unwrap();
        let GridChoice::Custom(axes) = &cfg.grid else { panic!("expected custom grid") };
        assert_eq!(axes[0].values, vec![1.0, 50.0, 200.0]);
        let back = ConfigMap::parse(&cfg.to_text(), Path::new("/")).unwrap().resolve().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn foreign_grid_parameter() {
        let mut map = minimal();
        map.set("grid.lambda", "1").unwrap();
        assert!(map.resolve().is_err());
    }

    #[test]
    fn cohort_needs_records() {
        let mut map = minimal();
        map.set("cohort", "cn_b").unwrap();
        assert!(map.resolve().unwrap_err().to_string().contains("records"));
    }
}
