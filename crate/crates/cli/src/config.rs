//! Flat `key = value` run configuration.
//!
//! Values are applied in order: built-in defaults, then the config file, then
//! environment variables, then command-line flags. The effective configuration
//! is echoed into the run manifest in the same syntax, so a manifest can be fed
//! back as a config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gew_core::data::{CensoringKind, ColumnMap, LoadOptions};
use gew_core::inference::{geometric_grid, DEFAULT_GRID_END, DEFAULT_GRID_POINTS, DEFAULT_GRID_START};
use gew_core::prior::Prior;
use gew_core::samplers::{Method, SamplerConfig};
use gew_core::{GewParams, Param, PriorConfig, StressLevel, VTransform};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`, got `{line}`")]
    Syntax { origin: String, line: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeGrid {
    Geometric { start: f64, end: f64, points: usize },
    Explicit(Vec<f64>),
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::Geometric { start, end, points } => geometric_grid(*start, *end, *points),
            TimeGrid::Explicit(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: String,
    pub prior_overrides: [Option<Prior>; 5],
    pub v_transform: VTransform,
    pub censoring: CensoringKind,
    pub sampler: SamplerConfig,
    pub n_burn: usize,
    pub n_keep: usize,
    pub n_chains: usize,
    /// Worker pool size for chains; defaults to the chain count.
    pub workers: Option<usize>,
    pub use_temperature: f64,
    pub use_stress: f64,
    pub grid: TimeGrid,
    pub band_levels: Vec<f64>,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub temperature_factor: bool,
    pub init: Option<GewParams>,
    pub columns: ColumnMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "GEW1".into(),
            prior_overrides: [None; 5],
            v_transform: VTransform::Log,
            censoring: CensoringKind::TypeI,
            sampler: SamplerConfig::default(),
            n_burn: 50_000,
            n_keep: 200_000,
            n_chains: 2,
            workers: None,
            use_temperature: 350.0,
            use_stress: 0.3,
            grid: TimeGrid::Geometric {
                start: DEFAULT_GRID_START,
                end: DEFAULT_GRID_END,
                points: DEFAULT_GRID_POINTS,
            },
            band_levels: vec![0.025, 0.5, 0.975],
            input: None,
            out_dir: PathBuf::from("gew_out"),
            temperature_factor: true,
            init: None,
            columns: ColumnMap::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| invalid(key, value, e))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse::<f64>(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Keys that only appear in manifests and are skipped when one is re-read.
const MANIFEST_ONLY: [&str; 3] = ["dataset_digest", "sha256.", "version"];
pub const MANIFEST_HEADER: &str = "# gew fit manifest";

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let value = value.trim();
        if let Some(name) = key.strip_prefix("prior.") {
            let p: Param = parse(key, name).map_err(|_| ConfigError::UnknownKey(key.into()))?;
            self.prior_overrides[p.index()] = if value.is_empty() || value == "preset" {
                None
            } else {
                Some(parse(key, value)?)
            };
            return Ok(());
        }
        if let Some(col) = key.strip_prefix("column.") {
            let slot = match col {
                "group" => &mut self.columns.group,
                "temperature" => &mut self.columns.temperature,
                "stress" => &mut self.columns.stress,
                "time" => &mut self.columns.time,
                "event" => &mut self.columns.event,
                _ => return Err(ConfigError::UnknownKey(key.into())),
            };
            *slot = value.to_string();
            return Ok(());
        }
        match key {
            "model" => {
                PriorConfig::preset(value).map_err(|e| invalid(key, value, e))?;
                self.model = value.to_string();
            }
            "v_transform" => self.v_transform = parse(key, value)?,
            "censoring" => self.censoring = parse(key, value)?,
            "sampler" => self.sampler.method = parse::<Method>(key, value)?,
            "slice_width" => self.sampler.slice_width = parse(key, value)?,
            "max_doublings" => self.sampler.max_doublings = parse(key, value)?,
            "ars_max_points" => self.sampler.ars_max_points = parse(key, value)?,
            "seed" => self.sampler.seed = parse(key, value)?,
            "n_burn" => self.n_burn = parse(key, value)?,
            "n_keep" => self.n_keep = parse(key, value)?,
            "n_chains" => self.n_chains = parse(key, value)?,
            "workers" => {
                self.workers = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "use_temperature" => self.use_temperature = parse(key, value)?,
            "use_stress" => self.use_stress = parse(key, value)?,
            "grid_start" | "grid_end" | "grid_points" => {
                let (mut start, mut end, mut points) = match self.grid {
                    TimeGrid::Geometric { start, end, points } => (start, end, points),
                    TimeGrid::Explicit(_) => (DEFAULT_GRID_START, DEFAULT_GRID_END, DEFAULT_GRID_POINTS),
                };
                match key {
                    "grid_start" => start = parse(key, value)?,
                    "grid_end" => end = parse(key, value)?,
                    _ => points = parse(key, value)?,
                }
                self.grid = TimeGrid::Geometric { start, end, points };
            }
            "times" => self.grid = TimeGrid::Explicit(parse_list(key, value)?),
            "band_levels" => self.band_levels = parse_list(key, value)?,
            "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "temperature_factor" => self.temperature_factor = parse_bool(key, value)?,
            "init" => {
                self.init = match value {
                    "" | "center" => None,
                    v => {
                        let a = parse_list(key, v)?;
                        let arr: [f64; 5] = a
                            .try_into()
                            .map_err(|_| invalid(key, value, "expected 5 comma-separated numbers"))?;
                        Some(GewParams::from_array(arr))
                    }
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every `key = value` line; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str, manifest: bool) -> Result<(), ConfigError> {
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    origin: origin.to_string(),
                    line: line.to_string(),
                });
            };
            let k = k.trim();
            if manifest && MANIFEST_ONLY.iter().any(|m| k.starts_with(m)) {
                continue;
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        // A manifest from an earlier run is a valid config; its digests are skipped.
        let manifest = text.starts_with(MANIFEST_HEADER);
        self.apply_text(&text, &path.display().to_string(), manifest)
    }

    pub fn prior_config(&self) -> Result<PriorConfig, ConfigError> {
        let base = PriorConfig::preset(&self.model).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut priors = base.priors;
        for (slot, o) in priors.iter_mut().zip(&self.prior_overrides) {
            if let Some(p) = o {
                *slot = *p;
            }
        }
        if priors == base.priors {
            return Ok(base);
        }
        PriorConfig::new("custom", priors).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn use_level(&self) -> Result<StressLevel, ConfigError> {
        StressLevel::new(self.use_temperature, self.use_stress, self.v_transform)
            .map_err(|e| ConfigError::Invalid(format!("use stress: {e}")))
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            columns: self.columns.clone(),
            censoring: self.censoring,
            transform: self.v_transform,
            use_temperature: self.use_temperature,
            use_stress: self.use_stress,
        }
    }

    /// Checks every invariant that can be checked before touching data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let prior = self.prior_config()?;
        self.sampler
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.n_keep == 0 {
            return Err(ConfigError::Invalid("n_keep must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(ConfigError::Invalid("n_chains must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        self.use_level()?;
        match &self.grid {
            TimeGrid::Geometric { start, end, points } => {
                if !(*start > 0.0 && end > start && *points >= 1) {
                    return Err(ConfigError::Invalid(format!(
                        "time grid needs 0 < start < end and at least one point, got {start}..{end} with {points}"
                    )));
                }
            }
            TimeGrid::Explicit(t) => {
                if t.is_empty() || t.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(ConfigError::Invalid("times must be a non-empty list of non-negative numbers".into()));
                }
                if t.windows(2).any(|w| w[1] < w[0]) {
                    return Err(ConfigError::Invalid("times must be non-decreasing".into()));
                }
            }
        }
        if self.band_levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(ConfigError::Invalid("band levels must lie in [0, 1]".into()));
        }
        if let Some(init) = &self.init {
            if !prior.in_support(init) {
                return Err(ConfigError::Invalid(format!("init {init:?} lies outside the prior support")));
            }
        }
        Ok(())
    }

    /// Every effective setting as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_string(), v));
        put("model", self.model.clone());
        let prior = self.prior_config().ok();
        for p in Param::ALL {
            let v = match (&self.prior_overrides[p.index()], &prior) {
                (Some(o), _) => o.to_string(),
                (None, Some(c)) => c.prior(p).to_string(),
                (None, None) => "preset".into(),
            };
            put(&format!("prior.{p}"), v);
        }
        put("v_transform", self.v_transform.to_string());
        put("censoring", self.censoring.to_string());
        put("sampler", self.sampler.method.to_string());
        put("slice_width", self.sampler.slice_width.to_string());
        put("max_doublings", self.sampler.max_doublings.to_string());
        put("ars_max_points", self.sampler.ars_max_points.to_string());
        put("seed", self.sampler.seed.to_string());
        put("n_burn", self.n_burn.to_string());
        put("n_keep", self.n_keep.to_string());
        put("n_chains", self.n_chains.to_string());
        put("workers", self.workers.map_or("auto".into(), |w| w.to_string()));
        put("use_temperature", self.use_temperature.to_string());
        put("use_stress", self.use_stress.to_string());
        match &self.grid {
            TimeGrid::Geometric { start, end, points } => {
                put("grid_start", start.to_string());
                put("grid_end", end.to_string());
                put("grid_points", points.to_string());
            }
            TimeGrid::Explicit(t) => put("times", join(t)),
        }
        put("band_levels", join(&self.band_levels));
        put(
            "input",
            self.input.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        put("temperature_factor", self.temperature_factor.to_string());
        put(
            "init",
            self.init.map_or("center".into(), |p| join(&p.to_array())),
        );
        put("column.group", self.columns.group.clone());
        put("column.temperature", self.columns.temperature.clone());
        put("column.stress", self.columns.stress.clone());
        put("column.time", self.columns.time.clone());
        put("column.event", self.columns.event.clone());
        e
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
