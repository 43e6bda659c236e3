//! Command-line front end: synth, train, infer and eval subcommands over the
//! core pipeline. Exit codes: 0 success, 2 validation error, 3 numeric
//! failure.

use bcgnn_core::config::{ConfigError, RunConfig};
use bcgnn_core::pipeline::{cmd_eval, cmd_infer, cmd_synth, cmd_train, PipelineError};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "bcgnn",
    about = "Boundary-content graph network for temporal action proposals",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Config file (key = value lines); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override ablation switches, e.g.
    /// `directed=true,edge_update=false,gcn_baseline=false`.
    #[arg(long)]
    pub ablation: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(spec) = &self.ablation {
            apply_ablation(&mut cfg, spec)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_ablation(cfg: &mut RunConfig, spec: &str) -> Result<(), ConfigError> {
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| ConfigError::BadValue {
            key: "ablation".into(),
            value: part.to_string(),
        })?;
        let flag: bool = value.trim().parse().map_err(|_| ConfigError::BadValue {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        })?;
        match key.trim() {
            "directed" => cfg.directed = flag,
            "edge_update" => cfg.edge_update = flag,
            "gcn_baseline" => cfg.gcn_baseline = flag,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    Ok(())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic feature dataset.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for feature files and annotations.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write the best checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dataset directory (feature files + annotations.json).
        #[arg(long)]
        data_dir: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every video in a directory with a trained checkpoint.
    Infer {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
        /// Proposal results JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional config override (must match the checkpoint shapes).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Thread budget for per-video parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute AR@AN and AUC for a results file.
    Eval {
        /// Results JSON from `infer`.
        #[arg(long)]
        results: PathBuf,
        /// Annotation JSON the results are judged against.
        #[arg(long)]
        annotations: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Metrics report output path (stdout summary either way).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate even when the results carry a different config hash.
        #[arg(long)]
        force: bool,
        /// Thread budget for per-video parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Execute a parsed command, writing progress to stdout.
pub fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth { config, out_dir } => {
            let cfg = config.resolve()?;
            let n = cmd_synth(&cfg, &out_dir)?;
            println!("config_hash={}", cfg.hash());
            println!("wrote {n} videos to {}", out_dir.display());
            Ok(())
        }
        Command::Train {
            config,
            data_dir,
            out,
        } => {
            let cfg = config.resolve()?;
            let log_path = log_path_for(&out);
            let mut log_file = std::fs::File::create(&log_path).map_err(|source| {
                PipelineError::Io {
                    path: log_path.display().to_string(),
                    source,
                }
            })?;
            let summary = cmd_train(&cfg, &data_dir, &out, |line| {
                use std::io::Write;
                println!("{line}");
                let _ = writeln!(log_file, "{line}");
            })?;
            println!("config_hash={}", summary.config_hash);
            if let Some(epoch) = summary.outcome.stopped_early_at {
                println!("early_stop_epoch={epoch}");
            }
            println!(
                "best_epoch={} checkpoint={}",
                summary.outcome.best_epoch,
                summary.checkpoint.display()
            );
            Ok(())
        }
        Command::Infer {
            checkpoint,
            data_dir,
            out,
            config,
            jobs,
        } => {
            let cfg = match config {
                Some(path) => Some(RunConfig::load(&path)?),
                None => None,
            };
            let summary = cmd_infer(&checkpoint, &data_dir, &out, cfg.as_ref(), jobs)?;
            println!("config_hash={}", summary.config_hash);
            println!(
                "wrote proposals for {} videos to {}",
                summary.n_videos,
                summary.results.display()
            );
            Ok(())
        }
        Command::Eval {
            results,
            annotations,
            config,
            out,
            force,
            jobs,
        } => {
            let cfg = config.resolve()?;
            let report = bcgnn_core::par::with_jobs(jobs, || {
                cmd_eval(&results, &annotations, &cfg, out.as_deref(), force)
            })?;
            println!("config_hash={}", report.config_hash);
            println!(
                "AR@10={:.4} AR@50={:.4} AR@100={:.4} AUC={:.2}",
                report.ar_at_10, report.ar_at_50, report.ar_at_100, report.auc
            );
            Ok(())
        }
    }
}

/// Sidecar log path: `<checkpoint>.log.jsonl`.
pub fn log_path_for(checkpoint: &std::path::Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".log.jsonl");
    checkpoint.with_file_name(name)
}
