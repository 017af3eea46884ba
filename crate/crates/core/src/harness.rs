//! Config-driven experiment sweeps.
//!
//! A sweep expands a config into grid points, runs them (in parallel when
//! allowed), and writes `results.csv`, per-point artifacts under `points/`
//! and `manifest.json` into the output directory. Every file is written
//! atomically. Given the same config, everything except the manifest's
//! `wall_clock_seconds` is byte-identical across reruns.
//!
//! Column order of `results.csv` per kind:
//!
//! * construct-sweep: `index,family,d,alpha,N,k,width,depth,kappa,width_stated,depth_stated,kappa_stated,sup_error,bound,holds,status`
//! * probe-sweep (rademacher): `index,n,d,K,L,trials,mc_mean,mc_stderr,formula_lb,formula_ub,brackets,status`
//! * probe-sweep (packing): `index,m,size,min_hamming,required_size,radius,holds,status`
//! * probe-sweep (wasserstein): `index,n,d,mc_samples,estimate,stderr,formula_lb,holds,status`
//! * probe-sweep (bounds): `index,d,alpha,K,L,general_power_term,lipschitz_explicit,status`
//! * regress-sweep: `index,n,budget,budget_value,replicate,seed,final_loss,final_kappa,final_heldout_l2,max_kappa,opt_gap,status`
//! * gan-run: `index,replicate,seed,initial_ipm,final_ipm,final_kappa,max_lipschitz_excess,status`

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constructions::{
    build_monomial, build_product, build_square, build_taylor_net_capped, ApproxCertificate, GridSpec,
    DEFAULT_MEMORY_CAP,
};
use crate::error::{Error, Result};
use crate::learn::{train_gan, train_regression, Budget, GanConfig, RegressionConfig, RegressionTarget};
use crate::probes;
use crate::rng;

pub const THREADS_ENV: &str = "NORMNET_THREADS";

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Installs a global rayon pool capped by `NORMNET_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        // A pool may already exist (e.g. in tests); that is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ConstructSweep,
    ProbeSweep,
    RegressSweep,
    GanRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    /// Default output directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Run grid points on worker threads.
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<ConstructGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regress: Option<RegressGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gan: Option<GanGrid>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructGrid {
    /// `square`, `product`, `monomial` or `taylor`.
    pub family: String,
    pub k: Vec<usize>,
    #[serde(rename = "N", default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Named target for `taylor`.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub memory_cap: Option<usize>,
    /// Points per axis of the certification grid (tensor grids only);
    /// defaults to the standard grid for the dimension.
    #[serde(default)]
    pub grid_per_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGrid {
    /// `rademacher`, `packing`, `wasserstein` or `bounds`.
    pub probe: String,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(rename = "K", default)]
    pub k: Vec<f64>,
    #[serde(rename = "L", default)]
    pub l: Vec<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Coordinate bound `B` entering the Rademacher upper bound.
    #[serde(rename = "B", default = "one")]
    pub bound: f64,
}

fn default_trials() -> usize {
    1000
}

fn default_mc() -> usize {
    10_000
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressGrid {
    pub d: usize,
    pub target: RegressionTarget,
    pub n: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: Vec<u64>,
    pub width: usize,
    pub depth: usize,
    /// Fixed budgets.
    #[serde(rename = "K", default)]
    pub k: Option<Vec<f64>>,
    /// Penalty weights.
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    /// Budget growing with the sample size:
    /// `K = K_scaled * n^((d+1)/(2d+4 alpha+2))`.
    #[serde(rename = "K_scaled", default)]
    pub k_scaled: Option<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
}

fn default_replicates() -> Vec<u64> {
    vec![0]
}

fn default_t0() -> f64 {
    1000.0
}

fn default_holdout() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanGrid {
    #[serde(default = "default_replicates")]
    pub replicates: Vec<u64>,
    #[serde(flatten)]
    pub config: GanConfig,
}

/// Exponent of the sample-size dependent budget `K ~ n^e`.
pub fn budget_exponent(d: usize, alpha: f64) -> f64 {
    (d as f64 + 1.0) / (2.0 * d as f64 + 4.0 * alpha + 2.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn diag(out: &mut Vec<Diagnostic>, field: &str, reason: impl Into<String>) {
    out.push(Diagnostic {
        field: field.to_string(),
        reason: reason.into(),
    });
}

fn require_nonempty<T>(out: &mut Vec<Diagnostic>, field: &str, v: &[T]) {
    if v.is_empty() {
        diag(out, field, "grid must not be empty");
    }
}

/// Empty iff the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if cfg.seed.is_none() {
        diag(&mut out, "seed", "a seed is required");
    }
    let sections = [
        ("construct", cfg.construct.is_some(), Kind::ConstructSweep),
        ("probe", cfg.probe.is_some(), Kind::ProbeSweep),
        ("regress", cfg.regress.is_some(), Kind::RegressSweep),
        ("gan", cfg.gan.is_some(), Kind::GanRun),
    ];
    for (name, present, kind) in sections {
        if present && kind != cfg.kind {
            diag(&mut out, name, format!("section does not match kind {:?}", cfg.kind));
        }
        if !present && kind == cfg.kind {
            diag(&mut out, name, "section required for this kind is missing");
        }
    }
    match cfg.kind {
        Kind::ConstructSweep => {
            if let Some(c) = &cfg.construct {
                validate_construct(c, &mut out);
            }
        }
        Kind::ProbeSweep => {
            if let Some(p) = &cfg.probe {
                validate_probe(p, &mut out);
            }
        }
        Kind::RegressSweep => {
            if let Some(r) = &cfg.regress {
                validate_regress(r, &mut out);
            }
        }
        Kind::GanRun => {
            if let Some(g) = &cfg.gan {
                require_nonempty(&mut out, "gan.replicates", &g.replicates);
                if let Err(e) = g.config.validate() {
                    diag(&mut out, "gan", e.to_string());
                }
            }
        }
    }
    out
}

fn validate_construct(c: &ConstructGrid, out: &mut Vec<Diagnostic>) {
    require_nonempty(out, "construct.k", &c.k);
    if c.k.contains(&0) {
        diag(out, "construct.k", "entries must be at least 1");
    }
    match c.family.as_str() {
        "square" | "product" => {}
        "monomial" => {
            require_nonempty(out, "construct.d", &c.d);
            if c.d.iter().any(|&d| d < 2) {
                diag(out, "construct.d", "monomials need d >= 2");
            }
        }
        "taylor" => {
            require_nonempty(out, "construct.N", &c.n_grid);
            require_nonempty(out, "construct.d", &c.d);
            require_nonempty(out, "construct.alpha", &c.alpha);
            if c.n_grid.contains(&0) {
                diag(out, "construct.N", "entries must be at least 1");
            }
            if c.alpha.iter().any(|&a| !(a > 0.0)) {
                diag(out, "construct.alpha", "entries must be positive");
            }
            match c.target.as_deref() {
                None => diag(out, "construct.target", "taylor sweeps need a named target"),
                Some(name) => {
                    for &d in &c.d {
                        for &a in &c.alpha {
                            if let Err(e) = crate::targets::by_name(name, d, a) {
                                diag(out, "construct.target", e.to_string());
                            }
                        }
                    }
                }
            }
        }
        other => diag(out, "construct.family", format!("unknown family `{other}`")),
    }
    if c.grid_per_dim == Some(0) || c.grid_per_dim == Some(1) {
        diag(out, "construct.grid_per_dim", "needs at least 2 points per axis");
    }
}

fn validate_probe(p: &ProbeGrid, out: &mut Vec<Diagnostic>) {
    match p.probe.as_str() {
        "rademacher" => {
            require_nonempty(out, "probe.n", &p.n);
            require_nonempty(out, "probe.d", &p.d);
            require_nonempty(out, "probe.K", &p.k);
            require_nonempty(out, "probe.L", &p.l);
            if p.trials == 0 {
                diag(out, "probe.trials", "must be at least 1");
            }
            if p.k.iter().any(|&k| !(k >= 0.0)) {
                diag(out, "probe.K", "entries must be nonnegative");
            }
        }
        "packing" => {
            require_nonempty(out, "probe.m", &p.m);
            if p.m.iter().any(|m| !(8..=probes::MAX_PACKING_LENGTH).contains(m)) {
                diag(out, "probe.m", "entries must lie in 8..=24");
            }
        }
        "wasserstein" => {
            require_nonempty(out, "probe.n", &p.n);
            require_nonempty(out, "probe.d", &p.d);
            if p.mc_samples == 0 {
                diag(out, "probe.mc_samples", "must be at least 1");
            }
        }
        "bounds" => {
            require_nonempty(out, "probe.d", &p.d);
            require_nonempty(out, "probe.alpha", &p.alpha);
            require_nonempty(out, "probe.K", &p.k);
            require_nonempty(out, "probe.L", &p.l);
            for &d in &p.d {
                for &a in &p.alpha {
                    if !(d as f64 > 2.0 * a) {
                        diag(
                            out,
                            "probe.d",
                            format!("regime: the lower bound needs d > 2 alpha (d = {d}, alpha = {a})"),
                        );
                    }
                }
            }
            if p.k.iter().any(|&k| !(k >= 1.0)) {
                diag(out, "probe.K", "entries must be at least 1");
            }
        }
        other => diag(out, "probe.probe", format!("unknown probe `{other}`")),
    }
    if p.n.contains(&0) {
        diag(out, "probe.n", "entries must be at least 1");
    }
    if p.d.contains(&0) {
        diag(out, "probe.d", "entries must be at least 1");
    }
    if p.l.contains(&0) {
        diag(out, "probe.L", "entries must be at least 1");
    }
}

fn validate_regress(r: &RegressGrid, out: &mut Vec<Diagnostic>) {
    require_nonempty(out, "regress.n", &r.n);
    require_nonempty(out, "regress.replicates", &r.replicates);
    let set = [r.k.is_some(), r.lambda.is_some(), r.k_scaled.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if set != 1 {
        diag(
            out,
            "regress.K",
            "exactly one of K, lambda and K_scaled must be set (budget or penalty, not both)",
        );
    }
    if let Some(k) = &r.k {
        require_nonempty(out, "regress.K", k);
    }
    if let Some(l) = &r.lambda {
        require_nonempty(out, "regress.lambda", l);
    }
    if r.n.contains(&0) {
        diag(out, "regress.n", "entries must be at least 1");
    }
    if let Some(sample) = regress_points(r, 0).first() {
        if let Err(e) = sample.validate() {
            diag(out, "regress", e.to_string());
        }
    }
}

/// Reads a TOML config (JSON when the extension is `.json`).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.extension().is_some_and(|e| e == "json"))
}

pub fn parse_config(text: &str, json: bool) -> Result<ExperimentConfig> {
    if json {
        Ok(serde_json::from_str(text)?)
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// SHA-256 of the canonical JSON form of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub kind: Kind,
    pub seed: u64,
    pub versions: Versions,
    pub points: usize,
    pub failures: Vec<PointFailure>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub normnet: String,
    pub output_format: u32,
}

/// One finished grid point: its CSV row and extra files.
struct PointOutput {
    row: Vec<String>,
    files: Vec<(String, Vec<u8>)>,
    error: Option<String>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_f)
}

/// Seed of grid point `index`, derived from the sweep seed.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    rng::stream(seed, index as u64).random()
}

/// Runs a validated config, writing outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(Error::Config(msg.join("; ")));
    }
    let start = Instant::now();
    let seed = cfg.seed.unwrap();
    let (header, outputs) = match cfg.kind {
        Kind::ConstructSweep => run_construct(cfg.construct.as_ref().unwrap(), cfg.parallel)?,
        Kind::ProbeSweep => run_probe(cfg.probe.as_ref().unwrap(), seed, cfg.parallel)?,
        Kind::RegressSweep => run_regress(cfg.regress.as_ref().unwrap(), seed, cfg.parallel)?,
        Kind::GanRun => run_gan(cfg.gan.as_ref().unwrap(), seed, cfg.parallel)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    csv.write_record(&header).map_err(csv_err)?;
    let mut written = vec!["results.csv".to_string()];
    let mut failures = Vec::new();
    for (index, p) in outputs.iter().enumerate() {
        csv.write_record(&p.row).map_err(csv_err)?;
        if let Some(e) = &p.error {
            failures.push(PointFailure {
                index,
                error: e.clone(),
            });
        }
        for (name, bytes) in &p.files {
            let rel = format!("points/{name}");
            write_atomic(&out_dir.join(&rel), bytes)?;
            written.push(rel);
        }
    }
    let bytes = csv.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    write_atomic(&out_dir.join("results.csv"), &bytes)?;
    written.push("manifest.json".into());
    let manifest = Manifest {
        config_sha256: config_hash(cfg)?,
        kind: cfg.kind,
        seed,
        versions: Versions {
            normnet: env!("CARGO_PKG_VERSION").to_string(),
            output_format: 1,
        },
        points: outputs.len(),
        failures,
        outputs: written,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

fn map_points<T: Sync, F>(items: &[T], parallel: bool, f: F) -> Vec<PointOutput>
where
    F: Fn(usize, &T) -> PointOutput + Sync,
{
    if parallel {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    } else {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

fn failed(mut row: Vec<String>, width: usize, e: &Error) -> PointOutput {
    row.resize(width - 1, String::new());
    let msg = e.to_string();
    row.push(format!("error: {msg}"));
    PointOutput {
        row,
        files: Vec::new(),
        error: Some(msg),
    }
}

type Sweep = (Vec<&'static str>, Vec<PointOutput>);

#[derive(Clone, Debug)]
struct ConstructPoint {
    d: usize,
    alpha: f64,
    n_grid: usize,
    k: usize,
}

fn run_construct(c: &ConstructGrid, parallel: bool) -> Result<Sweep> {
    let header = vec![
        "index", "family", "d", "alpha", "N", "k", "width", "depth", "kappa", "width_stated",
        "depth_stated", "kappa_stated", "sup_error", "bound", "holds", "status",
    ];
    let mut points = Vec::new();
    let ds: Vec<usize> = if c.d.is_empty() { vec![0] } else { c.d.clone() };
    let alphas: Vec<f64> = if c.alpha.is_empty() { vec![0.0] } else { c.alpha.clone() };
    let grids: Vec<usize> = if c.n_grid.is_empty() { vec![0] } else { c.n_grid.clone() };
    match c.family.as_str() {
        "square" | "product" => {
            for &k in &c.k {
                points.push(ConstructPoint { d: if c.family == "square" { 1 } else { 2 }, alpha: 0.0, n_grid: 0, k });
            }
        }
        "monomial" => {
            for &d in &ds {
                for &k in &c.k {
                    points.push(ConstructPoint { d, alpha: 0.0, n_grid: 0, k });
                }
            }
        }
        _ => {
            for &d in &ds {
                for &alpha in &alphas {
                    for &n_grid in &grids {
                        for &k in &c.k {
                            points.push(ConstructPoint { d, alpha, n_grid, k });
                        }
                    }
                }
            }
        }
    }
    let width = header.len();
    let outputs = map_points(&points, parallel, |index, p| {
        let base = vec![
            index.to_string(),
            c.family.clone(),
            p.d.to_string(),
            if p.alpha > 0.0 { fmt_f(p.alpha) } else { String::new() },
            if p.n_grid > 0 { p.n_grid.to_string() } else { String::new() },
            p.k.to_string(),
        ];
        match construct_point(c, p) {
            Ok((cert, rep)) => {
                let mut row = base;
                row.extend([
                    rep.width.to_string(),
                    rep.depth.to_string(),
                    fmt_f(rep.kappa),
                    cert.width.to_string(),
                    cert.depth.to_string(),
                    fmt_f(cert.kappa_stated),
                    fmt_opt(rep.grid_sup_error),
                    fmt_f(cert.error_bound),
                    rep.holds.unwrap_or(false).to_string(),
                    "ok".into(),
                ]);
                let mut json = serde_json::to_vec_pretty(&rep).unwrap_or_default();
                json.push(b'\n');
                PointOutput {
                    row,
                    files: vec![(format!("{index:04}_certificate.json"), json)],
                    error: None,
                }
            }
            Err(e) => failed(base, width, &e),
        }
    });
    Ok((header, outputs))
}

type Target = Box<dyn Fn(&[f64]) -> f64 + Sync>;

fn construct_point(
    c: &ConstructGrid,
    p: &ConstructPoint,
) -> Result<(ApproxCertificate, crate::constructions::CertificateReport)> {
    let (cert, f, lo, lip): (ApproxCertificate, Target, f64, Option<f64>) = match c.family.as_str() {
        "square" => (build_square(p.k)?, Box::new(|x: &[f64]| x[0] * x[0]), 0.0, Some(2.0)),
        "product" => (build_product(p.k)?, Box::new(|x: &[f64]| x[0] * x[1]), -1.0, Some(2.0)),
        "monomial" => (
            build_monomial(p.d, p.k)?,
            Box::new(|x: &[f64]| x.iter().product()),
            -1.0,
            Some(p.d as f64),
        ),
        _ => {
            let spec = crate::targets::by_name(c.target.as_deref().unwrap_or(""), p.d, p.alpha)?;
            let cert = build_taylor_net_capped(&spec, p.n_grid, p.k, c.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP))?;
            let lip = spec.lipschitz;
            (cert, Box::new(move |x: &[f64]| spec.eval(x)), 0.0, lip)
        }
    };
    let grid = match c.grid_per_dim {
        Some(per_dim) if p.d <= 2 => GridSpec::Uniform {
            d: p.d,
            lo,
            hi: 1.0,
            per_dim,
        },
        Some(per_dim) => GridSpec::Latin {
            d: p.d,
            lo,
            hi: 1.0,
            n: per_dim,
            seed: 0,
        },
        None => GridSpec::default_for(p.d, lo, 1.0),
    };
    let rep = cert.certify(&*f, lip, &grid)?;
    Ok((cert, rep))
}

fn probe_header(kind: &str) -> Vec<&'static str> {
    match kind {
        "rademacher" => vec![
            "index", "n", "d", "K", "L", "trials", "mc_mean", "mc_stderr", "formula_lb", "formula_ub", "brackets",
            "status",
        ],
        "packing" => vec!["index", "m", "size", "min_hamming", "required_size", "radius", "holds", "status"],
        "wasserstein" => vec!["index", "n", "d", "mc_samples", "estimate", "stderr", "formula_lb", "holds", "status"],
        _ => vec!["index", "d", "alpha", "K", "L", "general_power_term", "lipschitz_explicit", "status"],
    }
}

fn run_probe(p: &ProbeGrid, seed: u64, parallel: bool) -> Result<Sweep> {
    let header = probe_header(&p.probe);
    let width = header.len();
    let outputs = match p.probe.as_str() {
        "rademacher" => {
            let mut pts = Vec::new();
            for &n in &p.n {
                for &d in &p.d {
                    for &k in &p.k {
                        for &l in &p.l {
                            pts.push((n, d, k, l));
                        }
                    }
                }
            }
            map_points(&pts, parallel, |index, &(n, d, k, l)| {
                let base = vec![index.to_string(), n.to_string(), d.to_string(), fmt_f(k), l.to_string()];
                let s = point_seed(seed, index);
                let points = rng::uniform_points(&mut rng::stream(s, u64::MAX), n, d, 0.0, 1.0);
                match probes::rademacher_linear_lb(&points, k, p.trials, s, l, p.bound) {
                    Ok(est) => {
                        let mut row = base;
                        row.extend([
                            p.trials.to_string(),
                            fmt_f(est.mc_mean),
                            fmt_f(est.mc_stderr),
                            fmt_f(est.formula_lb),
                            fmt_f(est.formula_ub),
                            est.brackets().to_string(),
                            "ok".into(),
                        ]);
                        PointOutput { row, files: Vec::new(), error: None }
                    }
                    Err(e) => failed(base, width, &e),
                }
            })
        }
        "packing" => map_points(&p.m, parallel, |index, &m| {
            let base = vec![index.to_string(), m.to_string()];
            match probes::greedy_sign_packing(m) {
                Ok(pack) => {
                    let required = 2f64.powf(m as f64 / 4.0);
                    let radius = m / 8;
                    let holds = pack.vectors.len() as f64 >= required && pack.min_hamming > radius;
                    let mut row = base;
                    row.extend([
                        pack.vectors.len().to_string(),
                        pack.min_hamming.to_string(),
                        fmt_f(required),
                        radius.to_string(),
                        holds.to_string(),
                        "ok".into(),
                    ]);
                    PointOutput { row, files: Vec::new(), error: None }
                }
                Err(e) => failed(base, width, &e),
            }
        }),
        "wasserstein" => {
            let pts: Vec<(usize, usize)> = p.n.iter().flat_map(|&n| p.d.iter().map(move |&d| (n, d))).collect();
            map_points(&pts, parallel, |index, &(n, d)| {
                let base = vec![index.to_string(), n.to_string(), d.to_string(), p.mc_samples.to_string()];
                let s = point_seed(seed, index);
                let points = rng::uniform_points(&mut rng::stream(s, u64::MAX), n, d, 0.0, 1.0);
                match probes::w1_nn_probe(&points, p.mc_samples, s) {
                    Ok(w) => {
                        let mut row = base;
                        row.extend([
                            fmt_f(w.estimate),
                            fmt_f(w.stderr),
                            fmt_f(w.formula_lb),
                            (w.estimate >= w.formula_lb - 3.0 * w.stderr).to_string(),
                            "ok".into(),
                        ]);
                        PointOutput { row, files: Vec::new(), error: None }
                    }
                    Err(e) => failed(base, width, &e),
                }
            })
        }
        _ => {
            let mut pts = Vec::new();
            for &d in &p.d {
                for &a in &p.alpha {
                    for &k in &p.k {
                        for &l in &p.l {
                            pts.push((d, a, k, l));
                        }
                    }
                }
            }
            map_points(&pts, parallel, |index, &(d, a, k, l)| {
                let base = vec![index.to_string(), d.to_string(), fmt_f(a), fmt_f(k), l.to_string()];
                match probes::approx_lower_bound_formulas(d, a, k, l) {
                    Ok(b) => {
                        let mut row = base;
                        row.extend([fmt_f(b.general_power_term), fmt_opt(b.lipschitz_explicit), "ok".into()]);
                        PointOutput { row, files: Vec::new(), error: None }
                    }
                    Err(e) => failed(base, width, &e),
                }
            })
        }
    };
    Ok((header, outputs))
}

/// Expanded regression configs in grid order: `n`, then budget, then
/// replicate.
pub fn regress_points(r: &RegressGrid, seed: u64) -> Vec<RegressionConfig> {
    let mut out = Vec::new();
    for &n in &r.n {
        let budgets: Vec<Budget> = if let Some(ks) = &r.k {
            ks.iter().map(|&k| Budget::Constraint(k)).collect()
        } else if let Some(ls) = &r.lambda {
            ls.iter().map(|&l| Budget::Penalty(l)).collect()
        } else if let Some(base) = r.k_scaled {
            vec![Budget::Constraint(base * (n as f64).powf(budget_exponent(r.d, r.alpha)))]
        } else {
            Vec::new()
        };
        for budget in budgets {
            for &rep in &r.replicates {
                let index = out.len();
                out.push(RegressionConfig {
                    d: r.d,
                    target: r.target.clone(),
                    n,
                    noise_std: r.noise_std,
                    width: r.width,
                    depth: r.depth,
                    budget,
                    epochs: r.epochs,
                    lr: r.lr,
                    batch: r.batch,
                    t0: r.t0,
                    holdout: r.holdout,
                    seed: point_seed(seed ^ rep.rotate_left(32), index),
                });
            }
        }
    }
    out
}

fn run_regress(r: &RegressGrid, seed: u64, parallel: bool) -> Result<Sweep> {
    let header = vec![
        "index", "n", "budget", "budget_value", "replicate", "seed", "final_loss", "final_kappa",
        "final_heldout_l2", "max_kappa", "opt_gap", "status",
    ];
    let width = header.len();
    let configs = regress_points(r, seed);
    let reps = r.replicates.len();
    let outputs = map_points(&configs, parallel, |index, cfg| {
        let (kind, value) = match cfg.budget {
            Budget::Constraint(k) => ("K", k),
            Budget::Penalty(l) => ("lambda", l),
        };
        let base = vec![
            index.to_string(),
            cfg.n.to_string(),
            kind.to_string(),
            fmt_f(value),
            r.replicates[index % reps].to_string(),
            cfg.seed.to_string(),
        ];
        match train_regression(cfg) {
            Ok(rep) => {
                let last = rep.epochs.last();
                let max_kappa = rep.epochs.iter().map(|e| e.kappa).fold(0.0, f64::max);
                let mut row = base;
                row.extend([
                    fmt_opt(last.map(|e| e.loss)),
                    fmt_opt(last.map(|e| e.kappa)),
                    fmt_opt(last.and_then(|e| e.heldout_l2)),
                    fmt_f(max_kappa),
                    fmt_f(rep.opt_gap),
                    "ok".into(),
                ]);
                let mut files = vec![(format!("{index:04}_epochs.csv"), rep.to_csv().into_bytes())];
                if let Ok(json) = rep.net.to_json() {
                    files.push((format!("{index:04}_net.json"), json.into_bytes()));
                }
                PointOutput { row, files, error: None }
            }
            Err(e) => failed(base, width, &e),
        }
    });
    Ok((header, outputs))
}

fn run_gan(g: &GanGrid, seed: u64, parallel: bool) -> Result<Sweep> {
    let header = vec![
        "index", "replicate", "seed", "initial_ipm", "final_ipm", "final_kappa", "max_lipschitz_excess", "status",
    ];
    let width = header.len();
    let configs: Vec<GanConfig> = g
        .replicates
        .iter()
        .enumerate()
        .map(|(index, &rep)| GanConfig {
            seed: point_seed(seed ^ rep.rotate_left(32), index),
            ..g.config.clone()
        })
        .collect();
    let outputs = map_points(&configs, parallel, |index, cfg| {
        let base = vec![index.to_string(), g.replicates[index].to_string(), cfg.seed.to_string()];
        match train_gan(cfg) {
            Ok(rep) => {
                let first = rep.epochs.first().and_then(|e| e.ipm_surrogate);
                let last = rep.epochs.last();
                let excess = rep
                    .epochs
                    .iter()
                    .filter_map(|e| e.lipschitz.map(|l| l - e.kappa))
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut row = base;
                row.extend([
                    fmt_opt(first),
                    fmt_opt(last.and_then(|e| e.ipm_surrogate)),
                    fmt_opt(last.map(|e| e.kappa)),
                    fmt_f(excess),
                    "ok".into(),
                ]);
                let mut files = vec![(format!("{index:04}_steps.csv"), rep.to_csv().into_bytes())];
                if let Ok(json) = rep.net.to_json() {
                    files.push((format!("{index:04}_discriminator.json"), json.into_bytes()));
                }
                if let Some(Ok(json)) = rep.generator.as_ref().map(|n| n.to_json()) {
                    files.push((format!("{index:04}_generator.json"), json.into_bytes()));
                }
                PointOutput { row, files, error: None }
            }
            Err(e) => failed(base, width, &e),
        }
    });
    Ok((header, outputs))
}
