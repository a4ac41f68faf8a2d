//! Accelerated-life-test datasets: validation, CSV ingestion, sufficient
//! statistics for the grouped censored likelihood, and synthetic data.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    eyring_alpha, theta_loadings, weibull_time_from_uniform, GewParams, ModelError, StressLevel,
    VTransform, WeibullParams,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: malformed CSV: {message}")]
    Csv { line: u64, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: column `{column}` has invalid value `{value}`")]
    InvalidNumber {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: time must be strictly positive, got {value}")]
    NonPositiveTime { line: u64, value: f64 },
    #[error("line {line}: event must be 0 or 1, got `{value}`")]
    InvalidEvent { line: u64, value: String },
    #[error("no groups: the dataset is empty")]
    NoGroups,
    #[error("line {line}: censored observation in a complete sample")]
    CensoredUnderComplete { line: u64 },
    #[error("line {line}: failure at {time} occurs after the type-I censoring time {tau}")]
    FailureAfterTau { line: u64, time: f64, tau: f64 },
    #[error("line {line}: type-I censoring time {time} differs from {tau} used earlier in group `{group}`")]
    InconsistentTau {
        line: u64,
        group: String,
        time: f64,
        tau: f64,
    },
    #[error("line {line}: type-II censoring time {time} must equal the last failure time {expected}")]
    TypeIICensorTime { line: u64, time: f64, expected: f64 },
    #[error("line {line}: group label `{label}` is used for more than one stress combination")]
    InconsistentGroupLabel { line: u64, label: String },
    #[error("group `{group}`: {r} failures exceed {n} items on test")]
    TooManyFailures { group: String, r: usize, n: usize },
    #[error("group `{group}`: {reason}")]
    InvalidGroup { group: String, reason: String },
    #[error("stress combination (T = {temperature}, S = {stress}) appears in more than one group")]
    DuplicateStress { temperature: f64, stress: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DataError {
    fn io(path: &Path, e: impl fmt::Display) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Censoring applied to one test group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensoringScheme {
    Complete,
    /// Test stops at a fixed time; the failure count is random.
    TypeI { tau: f64 },
    /// Test stops at the `r`-th failure.
    TypeII { r: usize },
}

/// Censoring kind without its per-group parameter, used when loading files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CensoringKind {
    #[default]
    Complete,
    TypeI,
    TypeII,
}

impl CensoringScheme {
    pub fn kind(&self) -> CensoringKind {
        match self {
            CensoringScheme::Complete => CensoringKind::Complete,
            CensoringScheme::TypeI { .. } => CensoringKind::TypeI,
            CensoringScheme::TypeII { .. } => CensoringKind::TypeII,
        }
    }
}

impl fmt::Display for CensoringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CensoringKind::Complete => "complete",
            CensoringKind::TypeI => "type1",
            CensoringKind::TypeII => "type2",
        })
    }
}

impl FromStr for CensoringKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "complete" | "none" => Ok(CensoringKind::Complete),
            "type1" | "typei" | "i" => Ok(CensoringKind::TypeI),
            "type2" | "typeii" | "ii" => Ok(CensoringKind::TypeII),
            other => Err(format!("unknown censoring scheme `{other}`")),
        }
    }
}

/// Items tested at one stress combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGroup {
    pub label: String,
    pub stress: StressLevel,
    /// Items on test.
    pub n: usize,
    /// Observed failure times in hours, ascending.
    pub failures: Vec<f64>,
    pub scheme: CensoringScheme,
}

impl TestGroup {
    pub fn new(
        label: impl Into<String>,
        stress: StressLevel,
        n: usize,
        mut failures: Vec<f64>,
        scheme: CensoringScheme,
    ) -> Result<Self, DataError> {
        let label = label.into();
        let invalid = |reason: String| DataError::InvalidGroup {
            group: label.clone(),
            reason,
        };
        if n == 0 {
            return Err(invalid("no items on test".into()));
        }
        if let Some(&bad) = failures.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(invalid(format!("failure time {bad} is not strictly positive")));
        }
        failures.sort_by(f64::total_cmp);
        let r = failures.len();
        if r > n {
            return Err(DataError::TooManyFailures { group: label, r, n });
        }
        match scheme {
            CensoringScheme::Complete if r != n => {
                return Err(invalid(format!("complete sample has {r} failures but {n} items")));
            }
            CensoringScheme::TypeI { tau } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(invalid(format!("type-I censoring time {tau} must be positive")));
                }
                if let Some(&last) = failures.last() {
                    if last > tau {
                        return Err(invalid(format!("failure at {last} after censoring time {tau}")));
                    }
                }
            }
            CensoringScheme::TypeII { r: planned } if planned == 0 || planned != r => {
                return Err(invalid(format!(
                    "type-II plan stops at {planned} failures but {r} were recorded"
                )));
            }
            _ => {}
        }
        Ok(Self {
            label,
            stress,
            n,
            failures,
            scheme,
        })
    }

    pub fn r(&self) -> usize {
        self.failures.len()
    }

    pub fn n_censored(&self) -> usize {
        self.n - self.r()
    }

    /// Time at which the surviving items were withdrawn; the last failure for
    /// type-II plans.
    pub fn censor_time(&self) -> Option<f64> {
        match self.scheme {
            CensoringScheme::Complete => None,
            CensoringScheme::TypeI { tau } => Some(tau),
            CensoringScheme::TypeII { .. } => self.failures.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltDataset {
    pub groups: Vec<TestGroup>,
    /// Normal-use stress the predictions target.
    pub use_stress: StressLevel,
    pub transform: VTransform,
}

impl AltDataset {
    pub fn new(
        groups: Vec<TestGroup>,
        use_stress: StressLevel,
        transform: VTransform,
    ) -> Result<Self, DataError> {
        if groups.is_empty() {
            return Err(DataError::NoGroups);
        }
        for (i, a) in groups.iter().enumerate() {
            for b in &groups[i + 1..] {
                if a.stress.temperature == b.stress.temperature
                    && a.stress.nonthermal == b.stress.nonthermal
                {
                    return Err(DataError::DuplicateStress {
                        temperature: a.stress.temperature,
                        stress: a.stress.nonthermal,
                    });
                }
            }
        }
        Ok(Self {
            groups,
            use_stress,
            transform,
        })
    }

    pub fn total_failures(&self) -> usize {
        self.groups.iter().map(TestGroup::r).sum()
    }

    pub fn total_items(&self) -> usize {
        self.groups.iter().map(|g| g.n).sum()
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        write_dataset(self, &mut buf).expect("writing to memory cannot fail");
        hex_digest(&buf)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub group: String,
    pub temperature: String,
    pub stress: String,
    pub time: String,
    pub event: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            group: "group".into(),
            temperature: "temperature_K".into(),
            stress: "stress".into(),
            time: "time".into(),
            event: "event".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    pub censoring: CensoringKind,
    pub transform: VTransform,
    /// Normal-use temperature (K) and raw non-thermal stress.
    pub use_temperature: f64,
    pub use_stress: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            censoring: CensoringKind::Complete,
            transform: VTransform::Log,
            use_temperature: 350.0,
            use_stress: 0.3,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<AltDataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_dataset(file, opts)
}

struct RawGroup {
    label: String,
    temperature: f64,
    stress: f64,
    failures: Vec<f64>,
    censored: Vec<(u64, f64)>,
    failure_lines: Vec<(u64, f64)>,
}

pub fn parse_dataset<R: Read>(reader: R, opts: &LoadOptions) -> Result<AltDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let cols = &opts.columns;
    let (ig, it, is, ix, ie) = (
        find(&cols.group)?,
        find(&cols.temperature)?,
        find(&cols.stress)?,
        find(&cols.time)?,
        find(&cols.event)?,
    );

    let mut groups: Vec<RawGroup> = Vec::new();
    let mut by_key: HashMap<(u64, u64), usize> = HashMap::new();
    let mut by_label: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let number = |idx: usize, name: &str| -> Result<f64, DataError> {
            let raw = &rec[idx];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::InvalidNumber {
                    line,
                    column: name.to_string(),
                    value: raw.to_string(),
                })
        };
        let label = rec[ig].to_string();
        let temperature = number(it, &cols.temperature)?;
        let stress = number(is, &cols.stress)?;
        let time = number(ix, &cols.time)?;
        if time <= 0.0 {
            return Err(DataError::NonPositiveTime { line, value: time });
        }
        let failed = match &rec[ie] {
            "1" => true,
            "0" => false,
            other => {
                return Err(DataError::InvalidEvent {
                    line,
                    value: other.to_string(),
                })
            }
        };
        if !failed && opts.censoring == CensoringKind::Complete {
            return Err(DataError::CensoredUnderComplete { line });
        }

        let key = (temperature.to_bits(), stress.to_bits());
        let idx = match by_key.get(&key) {
            Some(&idx) => {
                if groups[idx].label != label {
                    return Err(DataError::InconsistentGroupLabel { line, label });
                }
                idx
            }
            None => {
                if by_label.contains_key(&label) {
                    return Err(DataError::InconsistentGroupLabel { line, label });
                }
                groups.push(RawGroup {
                    label: label.clone(),
                    temperature,
                    stress,
                    failures: Vec::new(),
                    censored: Vec::new(),
                    failure_lines: Vec::new(),
                });
                by_key.insert(key, groups.len() - 1);
                by_label.insert(label, groups.len() - 1);
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        if failed {
            g.failures.push(time);
            g.failure_lines.push((line, time));
        } else {
            g.censored.push((line, time));
        }
    }
    if groups.is_empty() {
        return Err(DataError::NoGroups);
    }

    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let stress = StressLevel::new(g.temperature, g.stress, opts.transform)?;
        let n = g.failures.len() + g.censored.len();
        let scheme = match opts.censoring {
            CensoringKind::Complete => CensoringScheme::Complete,
            CensoringKind::TypeI => {
                let tau = match g.censored.first() {
                    Some(&(_, tau)) => {
                        if let Some(&(line, time)) = g.censored.iter().find(|(_, t)| *t != tau) {
                            return Err(DataError::InconsistentTau {
                                line,
                                group: g.label,
                                time,
                                tau,
                            });
                        }
                        if let Some(&(line, time)) = g.failure_lines.iter().find(|(_, t)| *t > tau) {
                            return Err(DataError::FailureAfterTau { line, time, tau });
                        }
                        tau
                    }
                    None => g.failures.iter().copied().fold(0.0, f64::max),
                };
                CensoringScheme::TypeI { tau }
            }
            CensoringKind::TypeII => {
                let last = g.failures.iter().copied().fold(0.0, f64::max);
                if let Some(&(line, time)) = g.censored.iter().find(|(_, t)| *t != last) {
                    return Err(DataError::TypeIICensorTime {
                        line,
                        time,
                        expected: last,
                    });
                }
                CensoringScheme::TypeII {
                    r: g.failures.len(),
                }
            }
        };
        out.push(TestGroup::new(g.label, stress, n, g.failures, scheme)?);
    }
    let use_stress = StressLevel::new(opts.use_temperature, opts.use_stress, opts.transform)?;
    AltDataset::new(out, use_stress, opts.transform)
}

/// Writes the dataset in the loader's CSV schema. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_dataset<W: Write>(d: &AltDataset, mut w: W) -> std::io::Result<()> {
    let kind = d.groups[0].scheme.kind();
    writeln!(w, "# v_transform={}", d.transform)?;
    writeln!(w, "# censoring={kind}")?;
    writeln!(
        w,
        "# use_temperature_K={} use_stress={}",
        d.use_stress.temperature, d.use_stress.nonthermal
    )?;
    writeln!(w, "group,temperature_K,stress,time,event")?;
    for g in &d.groups {
        let (t, s) = (g.stress.temperature, g.stress.nonthermal);
        for x in &g.failures {
            writeln!(w, "{},{t},{s},{x},1", g.label)?;
        }
        if let Some(tau) = g.censor_time() {
            for _ in 0..g.n_censored() {
                writeln!(w, "{},{t},{s},{tau},0", g.label)?;
            }
        }
    }
    Ok(())
}

pub fn save_dataset(d: &AltDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_dataset(d, &mut buf).map_err(|e| DataError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| DataError::io(path, e))
}

/// Per-group quantities the likelihood needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub temperature: f64,
    pub v: f64,
    pub ln_temperature: f64,
    /// `(1, 1/T, V, V/T)`.
    pub loadings: [f64; 4],
    pub r: usize,
    /// `n - r`.
    pub n_censored: usize,
    /// `ln(tau)`; only meaningful when `n_censored > 0`.
    pub ln_tau: f64,
    /// `ln(x_ij)` for each observed failure.
    pub ln_failures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub sum_r: f64,
    pub sum_r_over_t: f64,
    pub sum_rv: f64,
    pub sum_rv_over_t: f64,
    /// Sum of `ln x_ij` over all failures.
    pub sum_ln_x: f64,
    /// Sum of `r_i ln T_i`, the parameter-free temperature factor.
    pub sum_r_ln_t: f64,
    pub groups: Vec<GroupStats>,
    /// Whether the constant `prod T_i^{r_i}` factor is kept in the likelihood.
    pub include_temperature_factor: bool,
}

impl SufficientStats {
    /// Statistics of an empty experiment: the likelihood is identically one,
    /// so conditionals reduce to the priors.
    pub fn empty() -> Self {
        Self {
            sum_r: 0.0,
            sum_r_over_t: 0.0,
            sum_rv: 0.0,
            sum_rv_over_t: 0.0,
            sum_ln_x: 0.0,
            sum_r_ln_t: 0.0,
            groups: Vec::new(),
            include_temperature_factor: true,
        }
    }

    /// Coefficients of theta1..theta4 in the log-likelihood's linear term.
    pub fn theta_coefficients(&self) -> [f64; 4] {
        [
            self.sum_r,
            self.sum_r_over_t,
            self.sum_rv,
            self.sum_rv_over_t,
        ]
    }

    pub fn without_temperature_factor(mut self) -> Self {
        self.include_temperature_factor = false;
        self
    }
}

pub fn sufficient_stats(d: &AltDataset) -> SufficientStats {
    let mut s = SufficientStats {
        sum_r: 0.0,
        sum_r_over_t: 0.0,
        sum_rv: 0.0,
        sum_rv_over_t: 0.0,
        sum_ln_x: 0.0,
        sum_r_ln_t: 0.0,
        groups: Vec::with_capacity(d.groups.len()),
        include_temperature_factor: true,
    };
    for g in &d.groups {
        let r = g.r() as f64;
        let t = g.stress.temperature;
        let v = g.stress.v;
        s.sum_r += r;
        s.sum_r_over_t += r / t;
        s.sum_rv += r * v;
        s.sum_rv_over_t += r * v / t;
        s.sum_r_ln_t += r * t.ln();
        let ln_failures: Vec<f64> = g.failures.iter().map(|x| x.ln()).collect();
        s.sum_ln_x += ln_failures.iter().sum::<f64>();
        s.groups.push(GroupStats {
            temperature: t,
            v,
            ln_temperature: t.ln(),
            loadings: theta_loadings(&g.stress),
            r: g.r(),
            n_censored: g.n_censored(),
            ln_tau: if g.n_censored() > 0 {
                g.censor_time().map_or(0.0, f64::ln)
            } else {
                0.0
            },
            ln_failures,
        });
    }
    s
}

/// One row of a simulation plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedGroup {
    pub stress: StressLevel,
    pub n: usize,
    pub scheme: CensoringScheme,
}

/// Draws failure times by inverse-CDF sampling at each planned stress level.
pub fn simulate_dataset(
    truth: &GewParams,
    plan: &[PlannedGroup],
    use_stress: StressLevel,
    transform: VTransform,
    seed: u64,
) -> Result<AltDataset, DataError> {
    if plan.is_empty() {
        return Err(DataError::NoGroups);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(plan.len());
    for (i, pg) in plan.iter().enumerate() {
        let label = format!("g{}", i + 1);
        if let CensoringScheme::TypeII { r } = pg.scheme {
            if r == 0 || r > pg.n {
                return Err(DataError::InvalidGroup {
                    group: label,
                    reason: format!("type-II plan needs 1 <= r <= n, got r = {r}, n = {}", pg.n),
                });
            }
        }
        let w = WeibullParams::new(eyring_alpha(truth, &pg.stress)?, truth.beta)?;
        let mut times: Vec<f64> = (0..pg.n)
            .map(|_| weibull_time_from_uniform(&w, rng.sample(Open01)))
            .collect();
        times.sort_by(f64::total_cmp);
        let failures = match pg.scheme {
            CensoringScheme::Complete => times,
            CensoringScheme::TypeI { tau } => times.into_iter().filter(|x| *x <= tau).collect(),
            CensoringScheme::TypeII { r } => times[..r].to_vec(),
        };
        groups.push(TestGroup::new(label, pg.stress, pg.n, failures, pg.scheme)?);
    }
    AltDataset::new(groups, use_stress, transform)
}
