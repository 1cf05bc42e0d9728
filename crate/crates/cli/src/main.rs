use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tensor_complete::eval::{bound_report, metrics};
use tensor_complete::experiment::{run_experiment, ExperimentConfig};
use tensor_complete::formats::{
    read_mask, read_tensor, read_weight_factors, write_mask, write_tensor, write_weight_factors,
};
use tensor_complete::frames::ingest_frame_files;
use tensor_complete::synth::{add_noise, generate_smooth_tucker, generate_tucker, NoiseModel};
use tensor_complete::weight::{estimate_weight, DEFAULT_WEIGHT_ITERS, DEFAULT_WEIGHT_TOL};
use tensor_complete::{
    gen_mask_nonuniform, gen_mask_uniform, hosvd_p, hosvd_plain, tv_complete, weighted_hosvd, Rank1Weight,
    SamplingPattern, StepSchedule, TensorError, TuckerRank, TvConfig,
};

/// Tensor completion with weighted HOSVD and total-variation refinement.
#[derive(Parser)]
#[command(name = "tcomp", version)]
struct Cli {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a low-rank Tucker tensor, optionally with Gaussian noise.
    GenSynthetic {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Use smooth cosine-basis factors scaled to unit max-norm.
        #[arg(long)]
        smooth: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the noise-free tensor here.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Draw a uniform, or with --skew a separable non-uniform, sampling mask.
    GenMask {
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        skew: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the rank-1 weight tensor to a mask.
    EstimateWeight {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WEIGHT_ITERS)]
        iters: usize,
        #[arg(long, default_value_t = DEFAULT_WEIGHT_TOL)]
        tol: f64,
    },
    /// Fill in the unobserved entries of a tensor.
    Complete(CompleteArgs),
    /// Compare an estimate with the truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Prefix of the weight factor files (`<prefix>.f1`, ...).
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the error bound terms for a mask and weight.
    Bound {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        tinf: f64,
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded experiment described by a key=value config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides the config; 0 = automatic).
        #[arg(long)]
        workers: Option<usize>,
        /// Records CSV path (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stack raw planar f32 frames into an order-4 tensor.
    IngestFrames {
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        frames: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompleteMethod {
    Hosvd,
    #[value(name = "hosvd_p")]
    HosvdP,
    Whosvd,
    Tv,
    #[value(name = "whosvd_tv")]
    WhosvdTv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Fixed,
    Invsqrt,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long, value_enum)]
    method: CompleteMethod,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Prefix of precomputed weight factors; estimated from the mask if absent.
    #[arg(long)]
    weight: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    step0: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<Schedule>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Disable the gradient floor in the TV update.
    #[arg(long)]
    no_stabilize: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration CSV for the TV methods.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 3 for numerical failures of an iterative method, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<TensorError>().is_some_and(TensorError::is_numerical));
    if numerical {
        3
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::GenSynthetic {
            shape,
            ranks,
            sigma,
            smooth,
            out,
            truth_out,
        } => {
            let ranks = TuckerRank::new(ranks)?;
            let truth = if smooth {
                generate_smooth_tucker(&shape, &ranks, seed)?
            } else {
                generate_tucker(&shape, &ranks, seed)?
            };
            let noisy = add_noise(&truth, &NoiseModel::new(sigma, seed)?);
            write_tensor(&out, &noisy)?;
            if let Some(path) = truth_out {
                write_tensor(path, &truth)?;
            }
        }
        Command::GenMask { shape, p, skew, out } => {
            let mask = match skew {
                Some(skew) => gen_mask_nonuniform(&shape, p, skew, seed)?,
                None => gen_mask_uniform(&shape, p, seed)?,
            };
            info!("mask has {} of {} entries", mask.count(), mask.len());
            write_mask(out, &mask)?;
        }
        Command::EstimateWeight { mask, out, iters, tol } => {
            let omega = read_mask(&mask).with_context(|| format!("reading {}", mask.display()))?;
            let w = estimate_weight(&omega, iters, tol)?;
            write_tensor(&out, &w.materialize())?;
            write_weight_factors(&out, &w)?;
        }
        Command::Complete(args) => complete(args)?,
        Command::Eval {
            estimate,
            truth,
            weight,
            out,
        } => {
            let est = read_tensor(&estimate).with_context(|| format!("reading {}", estimate.display()))?;
            let truth = read_tensor(&truth).with_context(|| format!("reading {}", truth.display()))?;
            let w = weight.map(|p| read_weight_factors(p, truth.order())).transpose()?;
            let m = metrics(&est, &truth, w.as_ref())?;
            write_csv(
                &out,
                &["rse", "rmse", "rel_unweighted", "rel_weighted"],
                &[vec![m.rse, m.rmse, m.rel_unweighted, m.rel_weighted]],
            )?;
        }
        Command::Bound {
            mask,
            weight,
            sigma,
            tinf,
            ranks,
            out,
        } => {
            let omega = read_mask(&mask).with_context(|| format!("reading {}", mask.display()))?;
            let w = read_weight_factors(&weight, omega.shape().len())?;
            let n = omega.shape().len();
            // The rank-dependent summands are only reported when ranks are given.
            let rank_list = ranks.clone().unwrap_or_else(|| vec![1; n]);
            let report = bound_report(&w, &omega, &TuckerRank::new(rank_list)?, sigma, tinf)?;
            let mut header: Vec<String> = ["mu", "bound1", "prob1"].map(String::from).to_vec();
            let mut row = vec![report.mu, report.bound1, report.prob1];
            header.extend((1..=n).map(|k| format!("mu_{k}")));
            row.extend(&report.mu_k);
            header.extend((1..=n).map(|k| format!("spec_{k}")));
            row.extend(&report.spectral_terms);
            if ranks.is_some() {
                header.extend(["noise_term2", "signal_term2"].map(String::from));
                row.extend([report.noise_term2, report.signal_term2]);
            }
            header.extend(["prob2_sum", "prob2_prod"].map(String::from));
            row.extend([report.prob2_sum, report.prob2_prod]);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(&out, &header, &[row])?;
        }
        Command::Experiment { config, workers, out } => {
            let mut cfg =
                ExperimentConfig::read(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(out) = out {
                cfg.output = out;
            }
            let records = run_experiment(&cfg)?;
            let failed = records.iter().filter(|r| r.outcome.is_err()).count();
            info!("{} records written to {}, {failed} failed", records.len(), cfg.output.display());
        }
        Command::IngestFrames { meta, frames, out } => {
            let t = ingest_frame_files(&frames, &meta)?;
            write_tensor(out, &t)?;
        }
    }
    Ok(())
}

fn load_weight(prefix: Option<&Path>, omega: &SamplingPattern) -> Result<Rank1Weight> {
    Ok(match prefix {
        Some(p) => read_weight_factors(p, omega.shape().len())?,
        None => estimate_weight(omega, DEFAULT_WEIGHT_ITERS, DEFAULT_WEIGHT_TOL)?,
    })
}

fn complete(args: CompleteArgs) -> Result<()> {
    let data = read_tensor(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let omega = read_mask(&args.mask).with_context(|| format!("reading {}", args.mask.display()))?;
    let needs_ranks = args.method != CompleteMethod::Tv;
    let ranks = match (&args.ranks, needs_ranks) {
        (Some(r), _) => Some(TuckerRank::new(r.clone())?),
        (None, true) => bail!(TensorError::InvalidArgument("--ranks is required for this method".into())),
        (None, false) => None,
    };
    if args.report.is_some() && !matches!(args.method, CompleteMethod::Tv | CompleteMethod::WhosvdTv) {
        bail!(TensorError::InvalidArgument("--report only applies to tv and whosvd_tv".into()));
    }
    let hosvd_ranks = || ranks.as_ref().expect("checked above");
    let estimate = match args.method {
        CompleteMethod::Hosvd => hosvd_plain(&data, &omega, hosvd_ranks())?,
        CompleteMethod::HosvdP => hosvd_p(&data, &omega, hosvd_ranks())?,
        CompleteMethod::Whosvd => {
            let w = load_weight(args.weight.as_deref(), &omega)?;
            weighted_hosvd(&data, &omega, &w, hosvd_ranks())?
        }
        CompleteMethod::Tv | CompleteMethod::WhosvdTv => {
            let defaults = TvConfig::default();
            let cfg = TvConfig {
                max_iters: args.max_iters.unwrap_or(defaults.max_iters),
                lambda: args.lambda.unwrap_or(defaults.lambda),
                step0: args.step0.unwrap_or(defaults.step0),
                schedule: match args.schedule {
                    Some(Schedule::Fixed) => StepSchedule::Fixed,
                    Some(Schedule::Invsqrt) => StepSchedule::InverseSqrt,
                    None => defaults.schedule,
                },
                converge_tol: args.tol.unwrap_or(defaults.converge_tol),
                stabilize: !args.no_stabilize,
                ..defaults
            };
            let init = if args.method == CompleteMethod::WhosvdTv {
                let w = load_weight(args.weight.as_deref(), &omega)?;
                Some(weighted_hosvd(&data, &omega, &w, hosvd_ranks())?)
            } else {
                None
            };
            let report = tv_complete(&data, &omega, init.as_ref(), &cfg)?;
            info!(
                "{} iterations, converged: {}, final TV {}",
                report.iterations, report.converged, report.final_tv
            );
            if let Some(path) = &args.report {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["iter", "step_delta", "tv_norm"])?;
                for (k, (d, tv)) in report.step_deltas.iter().zip(&report.tv_norms).enumerate() {
                    w.write_record([(k + 1).to_string(), d.to_string(), tv.to_string()])?;
                }
                w.flush()?;
            }
            report.recovered
        }
    };
    write_tensor(&args.out, &estimate)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
