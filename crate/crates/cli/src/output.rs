//! Run artifacts: chain CSVs, reports, manifest and the staging directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gew_core::diagnostics::{ChainMeta, ChainOutput, DicReport, ParamSummary, ScaleReduction};
use gew_core::inference::{QuantileBand, ReliabilityCurve};
use gew_core::samplers::Method;
use gew_core::{GewParams, Param};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const CHAIN_COLUMNS: [&str; 7] = ["iteration", "theta1", "theta2", "theta3", "theta4", "beta", "deviance"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Comment block naming the model, seed and V transform.
pub fn header(cfg: &RunConfig, model: &str) -> String {
    format!(
        "# model={model}\n# seed={}\n# v_transform={}\n",
        cfg.sampler.seed, cfg.v_transform
    )
}

pub fn chain_csv(cfg: &RunConfig, c: &ChainOutput) -> String {
    let m = &c.meta;
    let mut s = format!(
        "# model={}\n# seed={}\n# v_transform={}\n",
        m.model, m.seed, cfg.v_transform
    );
    let ars: Vec<String> = m.ars_params.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(s, "# chain={}", m.chain_index);
    let _ = writeln!(s, "# family={}", m.family);
    let _ = writeln!(s, "# sampler={}", m.method);
    let _ = writeln!(s, "# ars_params={}", ars.join(" "));
    let _ = writeln!(s, "# dataset_digest={}", m.dataset_digest);
    let _ = writeln!(s, "# n_burn={}", m.n_burn);
    let _ = writeln!(s, "# n_keep={}", m.n_keep);
    s.push_str(&CHAIN_COLUMNS.join(","));
    s.push('\n');
    for (i, (d, dev)) in c.draws.iter().zip(&c.deviance).enumerate() {
        let [a, b, cc, e, f] = d.to_array();
        let _ = writeln!(s, "{},{a},{b},{cc},{e},{f},{dev}", m.n_burn + i + 1);
    }
    s
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: msg.to_string(),
    }
}

/// Reads a chain written by [`chain_csv`].
pub fn read_chain(path: &Path) -> Result<ChainOutput, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut tags = BTreeMap::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        if let Some((k, v)) = line.trim().split_once('=') {
            tags.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| bad(path, e))?.clone();
    if head.iter().collect::<Vec<_>>() != CHAIN_COLUMNS {
        return Err(bad(path, format!("unexpected columns {head:?}")));
    }
    let mut draws = Vec::new();
    let mut deviance = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(path, e))?;
        let v: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>().map_err(|e| bad(path, format!("{x}: {e}"))))
            .collect::<Result<_, _>>()?;
        draws.push(GewParams::new(v[0], v[1], v[2], v[3], v[4]));
        deviance.push(v[5]);
    }
    let tag = |k: &str| tags.get(k).cloned().unwrap_or_default();
    let num = |k: &str| tag(k).parse::<usize>().unwrap_or(0);
    let meta = ChainMeta {
        model: tag("model"),
        family: tag("family"),
        seed: tag("seed").parse().unwrap_or(0),
        chain_index: num("chain"),
        method: tag("sampler").parse().unwrap_or(Method::Ars),
        ars_params: tag("ars_params")
            .split_whitespace()
            .filter_map(|p| p.parse::<Param>().ok())
            .collect(),
        dataset_digest: tag("dataset_digest"),
        n_burn: num("n_burn"),
        n_keep: num("n_keep"),
    };
    Ok(ChainOutput { draws, deviance, meta })
}

/// All `chain_<i>.csv` files in a run directory, in chain order.
pub fn read_chains(dir: &Path) -> Result<Vec<ChainOutput>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(i) = name
            .strip_prefix("chain_")
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|i| i.parse::<usize>().ok())
        {
            found.push((i, path));
        }
    }
    if found.is_empty() {
        return Err(bad(dir, "no chain_<i>.csv files"));
    }
    found.sort();
    found.iter().map(|(_, p)| read_chain(p)).collect()
}

pub fn summary_csv(cfg: &RunConfig, model: &str, rows: &[ParamSummary], rhat: Option<&[ScaleReduction]>) -> String {
    let mut s = header(cfg, model);
    s.push_str("parameter,mean,sd,p2.5,median,p97.5,n");
    if rhat.is_some() {
        s.push_str(",rhat");
    }
    s.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(s, "{},{},{},{},{},{},{}", r.param, r.mean, r.sd, r.q025, r.median, r.q975, r.n);
        if let Some(g) = rhat {
            let _ = write!(s, ",{}", g[i].rhat);
        }
        s.push('\n');
    }
    s
}

pub fn summary_text(
    cfg: &RunConfig,
    model: &str,
    rows: &[ParamSummary],
    rhat: Option<&[ScaleReduction]>,
    dic: Option<&DicReport>,
) -> String {
    let mut s = header(cfg, model);
    let _ = write!(
        s,
        "{:<8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "param", "mean", "sd", "2.5%", "median", "97.5%"
    );
    if rhat.is_some() {
        let _ = write!(s, " {:>8}", "rhat");
    }
    s.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = write!(
            s,
            "{:<8} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.param.to_string(),
            r.mean,
            r.sd,
            r.q025,
            r.median,
            r.q975
        );
        if let Some(g) = rhat {
            let _ = write!(s, " {:>8.4}", g[i].rhat);
        }
        s.push('\n');
    }
    if let Some(d) = dic {
        let _ = writeln!(
            s,
            "\nDbar = {:.4}  Dhat = {:.4}  pD = {:.4}  DIC = {:.4}",
            d.d_bar, d.d_hat, d.p_d, d.dic
        );
    }
    let _ = writeln!(s, "draws = {}", rows.first().map_or(0, |r| r.n));
    s
}

pub fn dic_csv(cfg: &RunConfig, model: &str, d: &DicReport) -> String {
    let mut s = header(cfg, model);
    let _ = writeln!(s, "dbar,dhat,p_d,dic\n{},{},{},{}", d.d_bar, d.d_hat, d.p_d, d.dic);
    s
}

pub fn gelman_rubin_csv(cfg: &RunConfig, model: &str, rows: &[ScaleReduction]) -> String {
    let mut s = header(cfg, model);
    s.push_str("parameter,rhat,rhat_uncorrected,within,between,v_hat,df\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.label, r.rhat, r.rhat_uncorrected, r.within, r.between, r.v_hat, r.df
        );
    }
    s
}

pub fn reliability_csv(cfg: &RunConfig, model: &str, curve: &ReliabilityCurve, band: &QuantileBand) -> String {
    let mut s = header(cfg, model);
    let _ = writeln!(
        s,
        "# use_temperature={} use_stress={} draws={}",
        curve.use_stress.temperature, curve.use_stress.nonthermal, curve.draws
    );
    s.push_str("time,mean");
    for l in &band.levels {
        let _ = write!(s, ",q{l}");
    }
    s.push('\n');
    for (i, t) in curve.times.iter().enumerate() {
        let _ = write!(s, "{t},{}", curve.reliability[i]);
        for v in &band.values {
            let _ = write!(s, ",{}", v[i]);
        }
        s.push('\n');
    }
    s
}

/// Output directory that only becomes visible once every file is written.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    files: Vec<(String, String)>,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let name = target
            .file_name()
            .map_or("out".into(), |n| n.to_string_lossy().into_owned());
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// `(file name, sha256)` of everything written so far.
    pub fn digests(&self) -> &[(String, String)] {
        &self.files
    }

    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        for (name, _) in &self.files {
            let to = self.target.join(name);
            fs::rename(self.dir.join(name), &to).map_err(|e| CliError::io(&to, e))?;
        }
        let _ = fs::remove_dir(&self.dir);
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
