//! Seeded synthetic completion experiments.
//!
//! For every trial `t` and rank `r` the runner draws a low-rank tensor, adds
//! noise, samples Ω, fits the rank-1 weight and evaluates each requested
//! estimator against the noise-free truth. Trial `t` draws all of its
//! randomness from seed `seed ^ t`, so results do not depend on the order in
//! which the worker pool finishes tasks.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{parse_key_values, parse_list, parse_value};
use crate::error::{Result, TensorError};
use crate::eval::{metrics, ErrorMetrics};
use crate::hosvd::{hosvd_p, hosvd_plain, weighted_hosvd};
use crate::mask::{gen_mask_nonuniform, gen_mask_uniform, SamplingPattern};
use crate::synth::{add_noise, generate_smooth_tucker, generate_tucker, NoiseModel};
use crate::tensor::{DenseTensor, TuckerRank};
use crate::tv::{tv_complete, TvConfig};
use crate::weight::{estimate_weight, DEFAULT_WEIGHT_ITERS, DEFAULT_WEIGHT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Hosvd,
    HosvdP,
    Whosvd,
    Tv,
    WhosvdTv,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Hosvd, Method::HosvdP, Method::Whosvd, Method::Tv, Method::WhosvdTv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hosvd => "hosvd",
            Method::HosvdP => "hosvd_p",
            Method::Whosvd => "whosvd",
            Method::Tv => "tv",
            Method::WhosvdTv => "whosvd_tv",
        }
    }

    pub fn is_tv(self) -> bool {
        matches!(self, Method::Tv | Method::WhosvdTv)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| TensorError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    Uniform,
    /// Separable ramp whose extreme corners differ by `skew` per mode.
    NonUniform { skew: f64 },
}

/// Which low-rank generator produces the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// Gaussian core, orthonormalized Gaussian factors, raw scale.
    Tucker,
    /// Cosine-basis factors, unit ∞-norm.
    Smooth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub shape: Vec<usize>,
    pub ranks: Vec<usize>,
    pub sampling: Sampling,
    pub p: f64,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub generator: Generator,
    pub tv: TvConfig,
    pub weight_iters: usize,
    pub weight_tol: f64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub output: PathBuf,
    pub summary: Option<PathBuf>,
    pub timing: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shape: vec![30, 30, 30],
            ranks: vec![2, 3, 4, 5],
            sampling: Sampling::Uniform,
            p: 0.1,
            sigma: 1e-2,
            trials: 20,
            seed: 0,
            methods: vec![Method::Hosvd, Method::HosvdP, Method::Whosvd],
            generator: Generator::Tucker,
            tv: TvConfig::default(),
            weight_iters: DEFAULT_WEIGHT_ITERS,
            weight_tol: DEFAULT_WEIGHT_TOL,
            workers: 0,
            output: PathBuf::from("records.csv"),
            summary: None,
            timing: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a flat `key=value` file. Unset keys keep their defaults;
    /// unknown keys are an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut sampling = "uniform".to_string();
        let mut skew = 5.0;
        for (key, value) in parse_key_values(text)? {
            let v = value.as_str();
            match key.as_str() {
                "shape" => cfg.shape = parse_list(&key, v)?,
                "ranks" => cfg.ranks = parse_list(&key, v)?,
                "sampling" => sampling = value.clone(),
                "skew" => skew = parse_value(&key, v)?,
                "p" => cfg.p = parse_value(&key, v)?,
                "sigma" => cfg.sigma = parse_value(&key, v)?,
                "trials" => cfg.trials = parse_value(&key, v)?,
                "seed" => cfg.seed = parse_value(&key, v)?,
                "methods" => cfg.methods = parse_list(&key, v)?,
                "generator" => {
                    cfg.generator = match v {
                        "tucker" => Generator::Tucker,
                        "smooth" => Generator::Smooth,
                        _ => return Err(TensorError::Config(format!("unknown generator `{v}`"))),
                    }
                }
                "tv_max_iters" => cfg.tv.max_iters = parse_value(&key, v)?,
                "tv_lambda" => cfg.tv.lambda = parse_value(&key, v)?,
                "tv_step0" => cfg.tv.step0 = parse_value(&key, v)?,
                "tv_schedule" => cfg.tv.schedule = parse_value(&key, v)?,
                "tv_tol" => cfg.tv.converge_tol = parse_value(&key, v)?,
                "tv_stabilize" => cfg.tv.stabilize = parse_value(&key, v)?,
                "weight_iters" => cfg.weight_iters = parse_value(&key, v)?,
                "weight_tol" => cfg.weight_tol = parse_value(&key, v)?,
                "workers" => cfg.workers = parse_value(&key, v)?,
                "output" => cfg.output = PathBuf::from(v),
                "summary" => cfg.summary = Some(PathBuf::from(v)),
                "timing" => cfg.timing = Some(PathBuf::from(v)),
                _ => return Err(TensorError::Config(format!("unknown config key `{key}`"))),
            }
        }
        cfg.sampling = match sampling.as_str() {
            "uniform" => Sampling::Uniform,
            "nonuniform" => Sampling::NonUniform { skew },
            other => return Err(TensorError::Config(format!("unknown sampling mode `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TensorError::Config(msg));
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p must lie in (0, 1], got {}", self.p));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ranks.is_empty() || self.methods.is_empty() {
            return bad("ranks and methods must be non-empty".into());
        }
        if let Sampling::NonUniform { skew } = self.sampling {
            if !(skew >= 1.0) || !skew.is_finite() {
                return bad(format!("skew must be finite and at least 1, got {skew}"));
            }
        }
        NoiseModel::new(self.sigma, 0)?;
        DenseTensor::zeros(&self.shape)?;
        for &r in &self.ranks {
            TuckerRank::uniform(r, self.shape.len())?.validate_for(&self.shape)?;
        }
        self.tv.validate()
    }

    pub fn summary_path(&self) -> PathBuf {
        self.summary
            .clone()
            .unwrap_or_else(|| sibling(&self.output, "summary"))
    }

    pub fn timing_path(&self) -> PathBuf {
        self.timing.clone().unwrap_or_else(|| sibling(&self.output, "timing"))
    }
}

/// `out/records.csv` → `out/records.<tag>.csv`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub r: usize,
    /// `Err` carries the message of whatever failed in this trial.
    pub outcome: std::result::Result<ErrorMetrics, String>,
    /// TV iteration count; `None` for the HOSVD estimators.
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub wall_seconds: f64,
}

/// Per-trial observations, shared by every method.
struct TrialData {
    truth: DenseTensor,
    observed: DenseTensor,
    omega: SamplingPattern,
}

fn trial_data(cfg: &ExperimentConfig, trial: usize, r: usize) -> Result<TrialData> {
    let seed = cfg.seed ^ trial as u64;
    let ranks = TuckerRank::uniform(r, cfg.shape.len())?;
    let truth = match cfg.generator {
        Generator::Tucker => generate_tucker(&cfg.shape, &ranks, seed)?,
        Generator::Smooth => generate_smooth_tucker(&cfg.shape, &ranks, seed)?,
    };
    let noisy = add_noise(&truth, &NoiseModel::new(cfg.sigma, seed)?);
    let omega = match cfg.sampling {
        Sampling::Uniform => gen_mask_uniform(&cfg.shape, cfg.p, seed)?,
        Sampling::NonUniform { skew } => gen_mask_nonuniform(&cfg.shape, cfg.p, skew, seed)?,
    };
    let observed = omega.restrict(&noisy)?;
    Ok(TrialData { truth, observed, omega })
}

fn run_task(cfg: &ExperimentConfig, trial: usize, r: usize) -> Vec<TrialRecord> {
    let failed = |msg: String| {
        log::warn!("trial {trial}, r={r}: {msg}");
        cfg.methods
            .iter()
            .map(|&method| TrialRecord {
                trial,
                method,
                r,
                outcome: Err(msg.clone()),
                iterations: None,
                converged: None,
                wall_seconds: 0.0,
            })
            .collect()
    };
    let data = match trial_data(cfg, trial, r) {
        Ok(d) => d,
        Err(e) => return failed(e.to_string()),
    };
    let weight = match estimate_weight(&data.omega, cfg.weight_iters, cfg.weight_tol) {
        Ok(w) => w,
        Err(e) => return failed(e.to_string()),
    };
    let ranks = TuckerRank::uniform(r, cfg.shape.len()).expect("validated with config");

    let mut whosvd_cache: Option<DenseTensor> = None;
    let mut records = Vec::with_capacity(cfg.methods.len());
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    for method in methods {
        let start = Instant::now();
        let mut iterations = None;
        let mut converged = None;
        let estimate = match method {
            Method::Hosvd => hosvd_plain(&data.observed, &data.omega, &ranks),
            Method::HosvdP => hosvd_p(&data.observed, &data.omega, &ranks),
            Method::Whosvd => weighted_hosvd(&data.observed, &data.omega, &weight, &ranks),
            Method::Tv | Method::WhosvdTv => {
                let warm = if method == Method::WhosvdTv {
                    match &whosvd_cache {
                        Some(w) => Ok(Some(w.clone())),
                        None => weighted_hosvd(&data.observed, &data.omega, &weight, &ranks).map(Some),
                    }
                } else {
                    Ok(None)
                };
                warm.and_then(|init| tv_complete(&data.observed, &data.omega, init.as_ref(), &cfg.tv))
                    .map(|report| {
                        iterations = Some(report.iterations);
                        converged = Some(report.converged);
                        report.recovered
                    })
            }
        };
        if method == Method::Whosvd {
            whosvd_cache = estimate.as_ref().ok().cloned();
        }
        let outcome = estimate
            .and_then(|e| metrics(&e, &data.truth, Some(&weight)))
            .map_err(|e| {
                log::warn!("trial {trial}, r={r}, {method}: {e}");
                e.to_string()
            });
        records.push(TrialRecord {
            trial,
            method,
            r,
            outcome,
            iterations,
            converged,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    records
}

/// Runs every (trial, r) task on a pool of `cfg.workers` threads and returns
/// the records sorted by (trial, method, r).
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| cfg.ranks.iter().map(move |&r| (t, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| TensorError::Config(format!("cannot start worker pool: {e}")))?;
    let mut records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(t, r)| {
                log::debug!("trial {t}, r={r}");
                run_task(cfg, t, r)
            })
            .collect()
    });
    records.sort_by_key(|rec| (rec.trial, rec.method, rec.r));
    Ok(records)
}

/// Runs the experiment and writes the records, summary and timing CSVs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let records = run_trials(cfg)?;
    write_records(&cfg.output, &records)?;
    write_summary(cfg.summary_path(), &summarize(&records))?;
    write_timing(cfg.timing_path(), &records)?;
    Ok(records)
}

pub const RECORD_HEADER: [&str; 10] = [
    "trial",
    "method",
    "r",
    "rse",
    "rmse",
    "rel_unweighted",
    "rel_weighted",
    "iterations",
    "converged",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Records without wall-clock time, so identical inputs give identical bytes.
pub fn write_records(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_HEADER)?;
    for rec in records {
        let (m, status) = match &rec.outcome {
            Ok(m) => (Some(*m), "ok".to_string()),
            Err(e) => (None, format!("error: {e}")),
        };
        w.write_record([
            rec.trial.to_string(),
            rec.method.to_string(),
            rec.r.to_string(),
            opt(m.map(|m| m.rse)),
            opt(m.map(|m| m.rmse)),
            opt(m.map(|m| m.rel_unweighted)),
            opt(m.map(|m| m.rel_weighted)),
            opt(rec.iterations),
            opt(rec.converged),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "method", "r", "wall_seconds"])?;
    for rec in records {
        w.write_record([
            rec.trial.to_string(),
            rec.method.to_string(),
            rec.r.to_string(),
            rec.wall_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Means over the successful trials of one (method, r) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub r: usize,
    pub ok_trials: usize,
    pub failed_trials: usize,
    pub mean_rse: f64,
    pub mean_rmse: f64,
    pub mean_rel_unweighted: f64,
    pub mean_rel_weighted: f64,
    pub mean_iterations: Option<f64>,
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = records.iter().map(|r| (r.method, r.r)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, r)| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|x| x.method == method && x.r == r).collect();
            let ok: Vec<(&ErrorMetrics, Option<usize>)> = cell
                .iter()
                .filter_map(|x| x.outcome.as_ref().ok().map(|m| (m, x.iterations)))
                .collect();
            let n = ok.len() as f64;
            let mean = |f: fn(&ErrorMetrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|(m, _)| f(m)).sum::<f64>() / n
                }
            };
            let iters: Vec<usize> = ok.iter().filter_map(|(_, i)| *i).collect();
            SummaryRow {
                method,
                r,
                ok_trials: ok.len(),
                failed_trials: cell.len() - ok.len(),
                mean_rse: mean(|m| m.rse),
                mean_rmse: mean(|m| m.rmse),
                mean_rel_unweighted: mean(|m| m.rel_unweighted),
                mean_rel_weighted: mean(|m| m.rel_weighted),
                mean_iterations: (!iters.is_empty())
                    .then(|| iters.iter().sum::<usize>() as f64 / iters.len() as f64),
            }
        })
        .collect()
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "r",
        "ok_trials",
        "failed_trials",
        "mean_rse",
        "mean_rmse",
        "mean_rel_unweighted",
        "mean_rel_weighted",
        "mean_iterations",
    ])?;
    for row in rows {
        w.write_record([
            row.method.to_string(),
            row.r.to_string(),
            row.ok_trials.to_string(),
            row.failed_trials.to_string(),
            row.mean_rse.to_string(),
            row.mean_rmse.to_string(),
            row.mean_rel_unweighted.to_string(),
            row.mean_rel_weighted.to_string(),
            opt(row.mean_iterations),
        ])?;
    }
    w.flush()?;
    Ok(())
}
