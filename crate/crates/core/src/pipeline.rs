//! End-to-end commands: synthesize data, train, infer and evaluate. The CLI
//! is a thin wrapper over these.

use crate::config::{ConfigError, RunConfig};
use crate::data::{
    load_features, read_annotations, rescale_instance, rescale_linear, slide_windows,
    synth_dataset, write_annotations, write_features, AnnotationFile, DataError, FeatureSequence,
    GroundTruthInstance,
};
use crate::model::{BcGnn, ModelError};
use crate::par::{map_indexed, with_jobs};
use crate::postprocess::{
    ar_at_an, fuse_scores, soft_nms, EvalError, MetricsReport, PerVideo, ScoredProposal,
};
use crate::proposals::score_candidates;
use crate::tensor::{ParamStore, Tape, TensorError};
use crate::training::{load_checkpoint, save_checkpoint, train, TrainError, TrainOutcome};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json on {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("config hash mismatch: results carry {found}, current config is {expected} (pass --force to evaluate anyway)")]
    HashMismatch { found: String, expected: String },
}

impl PipelineError {
    /// Process exit code: 3 for numeric failures, 2 for validation/i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Train(TrainError::NonFiniteLoss { .. })
            | PipelineError::Train(TrainError::Tensor(TensorError::NonFiniteLoss { .. })) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Sidecar metadata written next to schema-pinned output files.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
}

fn meta_path(of: &Path) -> PathBuf {
    let mut name = of.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    of.with_file_name(name)
}

fn write_meta(of: &Path, hash: &str) -> Result<(), PipelineError> {
    let p = meta_path(of);
    let text = serde_json::to_string_pretty(&RunMeta {
        config_hash: hash.to_string(),
    })
    .expect("meta always serializes");
    std::fs::write(&p, text).map_err(io_err(&p))
}

fn read_meta(of: &Path) -> Option<RunMeta> {
    let p = meta_path(of);
    let text = std::fs::read_to_string(p).ok()?;
    serde_json::from_str(&text).ok()
}

/// Generate a synthetic dataset on disk: one feature file per video plus
/// `annotations.json`, with a hash sidecar.
pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path) -> Result<usize, PipelineError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let data = synth_dataset(&synth_spec(cfg))?;
    let mut ann = AnnotationFile::default();
    for (seq, gts) in &data {
        let path = out_dir.join(format!("{}.bcgf", seq.video_id));
        write_features(&path, seq)?;
        ann.push(&seq.video_id, seq.len(), gts);
    }
    let ann_path = out_dir.join("annotations.json");
    write_annotations(&ann_path, &ann)?;
    write_meta(&ann_path, &cfg.hash())?;
    Ok(data.len())
}

pub fn synth_spec(cfg: &RunConfig) -> crate::data::SynthSpec {
    crate::data::SynthSpec {
        seed: cfg.seed,
        n_videos: cfg.synth_videos,
        l_s: cfg.synth_len,
        d_i: cfg.d_i,
        min_instances: cfg.synth_min_instances,
        max_instances: cfg.synth_max_instances,
        snippet_interval: 4,
    }
}

/// Load every annotated video's features from a directory.
pub fn load_dataset(
    data_dir: &Path,
) -> Result<Vec<(FeatureSequence, Vec<GroundTruthInstance>)>, PipelineError> {
    let ann = read_annotations(&data_dir.join("annotations.json"))?;
    let mut videos = ann.videos.clone();
    videos.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::with_capacity(videos.len());
    for v in &videos {
        let seq = load_features(&data_dir.join(format!("{}.bcgf", v.id)))?;
        out.push((seq, v.instances()));
    }
    Ok(out)
}

/// Rescale (when configured) and cut observation windows for one video.
fn video_windows(
    cfg: &RunConfig,
    seq: &FeatureSequence,
    gts: &[GroundTruthInstance],
) -> Result<Vec<crate::data::ObservationWindow>, PipelineError> {
    if cfg.rescale_len > 0 {
        let scaled = rescale_linear(seq, cfg.rescale_len)?;
        let sgts: Vec<GroundTruthInstance> = gts
            .iter()
            .map(|&g| rescale_instance(g, seq.len(), cfg.rescale_len))
            .collect();
        Ok(slide_windows(&scaled, &sgts, cfg.l_w, cfg.effective_stride())?)
    } else {
        Ok(slide_windows(seq, gts, cfg.l_w, cfg.effective_stride())?)
    }
}

/// Deterministic by-video split: the trailing `val_fraction` of the
/// id-sorted list validates.
pub fn split_train_val<T>(items: Vec<T>, val_fraction: f32) -> (Vec<T>, Vec<T>) {
    let n = items.len();
    let n_val = ((n as f32) * val_fraction).floor() as usize;
    let n_train = n - n_val;
    let mut items = items;
    let val = items.split_off(n_train);
    (items, val)
}

#[derive(Debug)]
pub struct TrainSummary {
    pub outcome: TrainOutcome,
    pub checkpoint: PathBuf,
    pub config_hash: String,
    pub n_train_windows: usize,
    pub n_val_windows: usize,
}

/// Train on a dataset directory and write the best checkpoint (with the
/// resolved config embedded).
pub fn cmd_train(
    cfg: &RunConfig,
    data_dir: &Path,
    out_checkpoint: &Path,
    mut log_line: impl FnMut(&str),
) -> Result<TrainSummary, PipelineError> {
    cfg.validate()?;
    let dataset = load_dataset(data_dir)?;
    let (train_videos, val_videos) = split_train_val(dataset, cfg.val_fraction);

    let mut train_windows = Vec::new();
    for (seq, gts) in &train_videos {
        train_windows.extend(video_windows(cfg, seq, gts)?);
    }
    let mut val_windows = Vec::new();
    for (seq, gts) in &val_videos {
        val_windows.extend(video_windows(cfg, seq, gts)?);
    }

    let model = BcGnn::new(cfg.model_dims(), cfg.ablation());
    let hash = cfg.hash();
    log_line(&format!("{{\"event\":\"config\",\"hash\":\"{hash}\"}}"));
    let (store, outcome) = train(
        &model,
        &train_windows,
        &val_windows,
        &cfg.train_config(),
        &mut log_line,
    )?;
    if let Some(dir) = out_checkpoint.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    save_checkpoint(out_checkpoint, &store, &cfg.serialize())?;
    Ok(TrainSummary {
        outcome,
        checkpoint: out_checkpoint.to_path_buf(),
        config_hash: hash,
        n_train_windows: train_windows.len(),
        n_val_windows: val_windows.len(),
    })
}

/// Proposals for one video: window-local scoring, offset back to video
/// coordinates, duplicate merge by max score, Soft-NMS, top-k.
pub fn infer_video(
    model: &BcGnn,
    store: &ParamStore,
    cfg: &RunConfig,
    seq: &FeatureSequence,
) -> Result<Vec<ScoredProposal>, PipelineError> {
    let l_orig = seq.len();
    let windows = video_windows(cfg, seq, &[])?;
    let effective_len = if cfg.rescale_len > 0 {
        cfg.rescale_len
    } else {
        l_orig
    };
    let mut merged: BTreeMap<(usize, usize), f32> = BTreeMap::new();
    for w in &windows {
        let mut tape = Tape::new();
        let scores = model.forward_window(&mut tape, store, w)?;
        for cand in score_candidates(&tape, &scores) {
            let fused = fuse_scores(&cand);
            let (s, e) = (cand.t_s + w.window_start, cand.t_e + w.window_start);
            if e > effective_len {
                // padded tail of a short video
                continue;
            }
            let entry = merged.entry((s, e)).or_insert(0.0);
            if fused.score > *entry {
                *entry = fused.score;
            }
        }
    }
    let scale = if cfg.rescale_len > 0 {
        l_orig as f32 / cfg.rescale_len as f32
    } else {
        1.0
    };
    let pool: Vec<ScoredProposal> = merged
        .into_iter()
        .map(|((s, e), score)| ScoredProposal {
            start: s as f32 * scale,
            end: e as f32 * scale,
            score,
        })
        .collect();
    Ok(soft_nms(&pool, cfg.nms_sigma, cfg.nms_floor, cfg.nms_top_k))
}

/// Result document: video id to proposal list.
pub type ResultsFile = BTreeMap<String, Vec<ScoredProposal>>;

#[derive(Debug)]
pub struct InferSummary {
    pub results: PathBuf,
    pub config_hash: String,
    pub n_videos: usize,
}

/// Run inference over every feature file in a directory using a checkpoint;
/// `config` overrides the checkpoint's embedded config when given (the
/// parameter inventory still has to match).
pub fn cmd_infer(
    checkpoint: &Path,
    data_dir: &Path,
    out_file: &Path,
    config: Option<&RunConfig>,
    jobs: Option<usize>,
) -> Result<InferSummary, PipelineError> {
    let (store, embedded) = load_checkpoint(checkpoint)?;
    let cfg = match config {
        Some(c) => c.clone(),
        None => RunConfig::parse(&embedded)?,
    };
    let model = BcGnn::new(cfg.model_dims(), cfg.ablation());
    model.verify_store(&store)?;

    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir)
        .map_err(io_err(data_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "bcgf").unwrap_or(false))
        .collect();
    paths.sort();

    let sequences: Vec<FeatureSequence> = paths
        .iter()
        .map(|p| load_features(p))
        .collect::<Result<_, _>>()?;

    let per_video: Vec<Result<Vec<ScoredProposal>, PipelineError>> = with_jobs(jobs, || {
        map_indexed(sequences.len(), |i| {
            infer_video(&model, &store, &cfg, &sequences[i])
        })
    });

    let mut results = ResultsFile::new();
    for (seq, props) in sequences.iter().zip(per_video) {
        results.insert(seq.video_id.clone(), props?);
    }
    let text = serde_json::to_string_pretty(&results).expect("results always serialize");
    std::fs::write(out_file, text).map_err(io_err(out_file))?;
    write_meta(out_file, &cfg.hash())?;
    Ok(InferSummary {
        results: out_file.to_path_buf(),
        config_hash: cfg.hash(),
        n_videos: results.len(),
    })
}

/// Evaluate a results file against annotations: AR@AN plus AUC.
pub fn cmd_eval(
    results_path: &Path,
    annotations_path: &Path,
    cfg: &RunConfig,
    out_report: Option<&Path>,
    force: bool,
) -> Result<MetricsReport, PipelineError> {
    let text = std::fs::read_to_string(results_path).map_err(io_err(results_path))?;
    let results: ResultsFile = serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: results_path.display().to_string(),
        source,
    })?;
    let ann = read_annotations(annotations_path)?;

    let expected = cfg.hash();
    if let Some(meta) = read_meta(results_path) {
        if meta.config_hash != expected && !force {
            return Err(PipelineError::HashMismatch {
                found: meta.config_hash,
                expected,
            });
        }
    }

    let known: std::collections::BTreeSet<&str> =
        ann.videos.iter().map(|v| v.id.as_str()).collect();
    if let Some(bad) = results.keys().find(|k| !known.contains(k.as_str())) {
        return Err(EvalError::IdMismatch(bad.clone()).into());
    }

    let mut per_video = PerVideo::new();
    for v in &ann.videos {
        let props = results.get(&v.id).cloned().unwrap_or_default();
        let gts: Vec<(f64, f64)> = v
            .instances
            .iter()
            .map(|i| (i.start as f64, i.end as f64))
            .collect();
        per_video.insert(v.id.clone(), (props, gts));
    }

    let an_values: Vec<usize> = (1..=100).collect();
    let curve = ar_at_an(&per_video, &cfg.tiou_thresholds.values(), &an_values);
    let report = MetricsReport::from_curve(&expected, &curve)?;
    if let Some(path) = out_report {
        let text = serde_json::to_string_pretty(&report).expect("report always serializes");
        std::fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(report)
}
