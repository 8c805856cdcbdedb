//! CLI harness for the re-identification pipeline.
//!
//! Exit codes: 0 success, 1 data/ingest errors, 2 configuration errors,
//! 3 runtime/evaluation errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reident::eval::ClassWeights;
use reident::pipeline::{
    cmd_attack, cmd_heatmap, cmd_optimize, cmd_sweep, cmd_synth, cmd_validate, ClassPolicy,
    DataSource, PipelineError, RunConfig, WeightSpec, DEFAULT_SWEEP_FRACTIONS,
};
use reident::preprocess::{ClassFilterSide, Normalization, PreprocessConfig};
use reident::dtw::{DistanceNormalization, DtwConfig, StepPattern};
use reident::ranking::RankingMethod;
use reident::synth::SyntheticConfig;
use reident::types::{AffectiveClass, LogicalSensor, WeightVector};

const DATA_DIR_ENV: &str = "REIDENT_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "reident",
    about = "Similarity-based re-identification attacks on wearable sensor data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Dataset directory (falls back to $REIDENT_DATA_DIR); mutually
    /// exclusive with --synth.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Generate a synthetic dataset in memory instead of loading one.
    #[arg(long, default_value_t = false)]
    synth: bool,
    #[arg(long, default_value_t = 15)]
    subjects: usize,
    /// Synthetic recording length in seconds.
    #[arg(long, default_value_t = 2160.0)]
    duration: f64,
    /// How strongly synthetic subjects differ, in [0,1].
    #[arg(long, default_value_t = 0.8)]
    separability: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl SourceArgs {
    fn resolve(&self) -> Result<DataSource, PipelineError> {
        if self.synth {
            return Ok(DataSource::Synthetic(SyntheticConfig {
                n_subjects: self.subjects,
                duration_s: self.duration,
                seed: self.seed,
                separability: self.separability,
            }));
        }
        let dir = self
            .data
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .ok_or_else(|| {
                PipelineError::Config(format!(
                    "no data source: pass --data, set ${DATA_DIR_ENV}, or use --synth"
                ))
            })?;
        Ok(DataSource::Dataset { dir })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory for result artifacts.
    #[arg(long, short)]
    out: PathBuf,
    /// Load a full run configuration from JSON; other flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ranking method: score or rank.
    #[arg(long, default_value = "score")]
    method: RankingMethod,
    /// Restrict the attack to one affective class.
    #[arg(long)]
    class: Option<AffectiveClass>,
    /// Evaluate all three classes and combine with the default class weights.
    #[arg(long, default_value_t = false)]
    weighted_classes: bool,
    /// Which sides see class-filtered data: both or snippet_only.
    #[arg(long, default_value = "both")]
    class_filter_side: ClassFilterSide,
    /// Attacker snippet size as a fraction of the recording.
    #[arg(long, default_value_t = 0.0001)]
    snippet_frac: f64,
    /// Explicit sensor weights as acc,bvp,eda,temp (must sum to 1).
    #[arg(long, value_parser = parse_weights)]
    weights: Option<WeightVector>,
    /// Restrict scoring to a sensor subset, e.g. bvp,acc.
    #[arg(long, value_delimiter = ',')]
    sensors: Option<Vec<LogicalSensor>>,
    /// Common resampling rate in Hz.
    #[arg(long, default_value_t = 64.0)]
    rate: f64,
    /// Snippet floor window in milliseconds.
    #[arg(long, default_value_t = 210.0)]
    window_ms: f64,
    /// Normalization: zscore or none.
    #[arg(long, default_value = "zscore")]
    normalize: Normalization,
    /// DTW step pattern: symmetric1 or symmetric2.
    #[arg(long, default_value = "symmetric2")]
    step_pattern: StepPattern,
    /// Sakoe-Chiba band half-width in samples (unconstrained if omitted).
    #[arg(long)]
    band: Option<usize>,
    /// Skip path normalization of DTW distances.
    #[arg(long, default_value_t = false)]
    raw_distance: bool,
    /// Snippet fractions for the set-size sweep.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Grid step for weight optimization.
    #[arg(long, default_value_t = 0.1)]
    grid_step: f64,
    /// Worker thread count (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_weights(s: &str) -> Result<WeightVector, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated weights: acc,bvp,eda,temp".to_string());
    }
    let mut vals = [0.0; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p.trim().parse::<f64>().map_err(|e| e.to_string())?;
    }
    WeightVector::new(vals[0], vals[1], vals[2], vals[3])
}

impl RunArgs {
    fn build(&self) -> Result<RunConfig, PipelineError> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                PipelineError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| {
                PipelineError::Config(format!("invalid config {}: {e}", path.display()))
            })?;
            config.output_dir = self.out.clone();
            return Ok(config);
        }
        let class_policy = match (self.weighted_classes, self.class) {
            (true, Some(_)) => {
                return Err(PipelineError::Config(
                    "--class conflicts with --weighted-classes".to_string(),
                ))
            }
            (true, None) => ClassPolicy::WeightedMean(ClassWeights::default()),
            (false, Some(class)) => ClassPolicy::Single(class),
            (false, None) => ClassPolicy::All,
        };
        let weights = match (&self.weights, &self.sensors) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "--weights conflicts with --sensors".to_string(),
                ))
            }
            (Some(w), None) => WeightSpec::Explicit(*w),
            (None, Some(sensors)) => WeightSpec::Sensors(sensors.clone()),
            (None, None) => WeightSpec::Equal,
        };
        Ok(RunConfig {
            source: self.source.resolve()?,
            preprocess: PreprocessConfig {
                common_rate_hz: self.rate,
                window_ms: self.window_ms,
                normalization: self.normalize,
            },
            dtw: DtwConfig {
                step_pattern: self.step_pattern,
                window_constraint: self.band,
                distance_normalization: if self.raw_distance {
                    DistanceNormalization::None
                } else {
                    DistanceNormalization::PathNormalized
                },
            },
            method: self.method,
            class_policy,
            weights,
            snippet_fraction: self.snippet_frac,
            sweep_fractions: self
                .fractions
                .clone()
                .unwrap_or_else(|| DEFAULT_SWEEP_FRACTIONS.to_vec()),
            filter_side: self.class_filter_side,
            grid_step: self.grid_step,
            output_dir: self.out.clone(),
            seed: self.source.seed,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the attack on every subject and report Precision@k.
    Attack(RunArgs),
    /// Sweep sensor combinations and attacker set sizes.
    Sweep(RunArgs),
    /// Grid-search sensor weights per affective class.
    Optimize(RunArgs),
    /// Pairwise similarity matrices between all subjects.
    Heatmap(RunArgs),
    /// Generate a synthetic dataset on disk.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 15)]
        subjects: usize,
        #[arg(long, default_value_t = 2160.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.8)]
        separability: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Check a dataset directory for structural problems.
    Validate {
        /// Dataset directory (falls back to $REIDENT_DATA_DIR).
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn configure_threads(threads: Option<usize>) -> Result<(), PipelineError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), PipelineError> {
    match Cli::parse().command {
        Command::Attack(args) => {
            configure_threads(args.threads)?;
            let config = args.build()?;
            let report = cmd_attack(&config)?;
            println!(
                "attacked {} targets ({} skipped): P@1 = {}, max@k = {}",
                report.n_targets,
                report.n_skipped,
                report.p(1),
                report.max_at_k
            );
            println!("results written to {}", config.output_dir.display());
        }
        Command::Sweep(args) => {
            configure_threads(args.threads)?;
            let config = args.build()?;
            cmd_sweep(&config)?;
            println!("sweep results written to {}", config.output_dir.display());
        }
        Command::Optimize(args) => {
            configure_threads(args.threads)?;
            let config = args.build()?;
            cmd_optimize(&config)?;
            println!(
                "optimization results written to {}",
                config.output_dir.display()
            );
        }
        Command::Heatmap(args) => {
            configure_threads(args.threads)?;
            let config = args.build()?;
            cmd_heatmap(&config)?;
            println!("heatmaps written to {}", config.output_dir.display());
        }
        Command::Synth {
            out,
            subjects,
            duration,
            separability,
            seed,
        } => {
            cmd_synth(
                &SyntheticConfig {
                    n_subjects: subjects,
                    duration_s: duration,
                    seed,
                    separability,
                },
                &out,
            )?;
            println!("synthetic dataset written to {}", out.display());
        }
        Command::Validate { data } => {
            let dir = data
                .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
                .ok_or_else(|| {
                    PipelineError::Config(format!(
                        "no data source: pass --data or set ${DATA_DIR_ENV}"
                    ))
                })?;
            for line in cmd_validate(&dir)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
