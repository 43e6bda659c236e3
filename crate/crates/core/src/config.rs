//! Run configuration: a flat `key = value` text format covering every
//! module setting. Parsing starts from defaults, rejects unknown keys, and
//! serialization always writes every key in a fixed order, so a config
//! round-trips losslessly and hashes stably.

use crate::model::{Ablation, ModelDims};
use crate::training::TrainConfig;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("line {line} is not `key = value`: {text}")]
    BadLine { line: usize, text: String },
    #[error("config i/o on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

/// Which tIoU threshold grid evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdStyle {
    /// `[0.5 : 0.05 : 0.95]`
    ActivityNet,
    /// `[0.5 : 0.05 : 1.0]`
    Thumos,
}

impl ThresholdStyle {
    pub fn values(self) -> Vec<f64> {
        match self {
            ThresholdStyle::ActivityNet => crate::postprocess::thresholds_activitynet(),
            ThresholdStyle::Thumos => crate::postprocess::thresholds_thumos(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ThresholdStyle::ActivityNet => "anet",
            ThresholdStyle::Thumos => "thumos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // dimensions
    pub d_i: usize,
    pub d_b: usize,
    pub d_g: usize,
    pub d_c: usize,
    pub l_w: usize,
    /// 0 means "no cap": D_max = l_w - 1.
    pub d_max: usize,
    pub n_content: usize,
    /// 0 means l_w / 2.
    pub stride: usize,
    /// 0 disables whole-video rescaling before windowing.
    pub rescale_len: usize,
    // training
    pub lr: f32,
    pub weight_decay: f32,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f32,
    pub seed: u64,
    // ablations
    pub directed: bool,
    pub edge_update: bool,
    pub gcn_baseline: bool,
    // post-processing
    pub nms_sigma: f64,
    pub nms_floor: f64,
    pub nms_top_k: usize,
    pub tiou_thresholds: ThresholdStyle,
    // synthetic data
    pub synth_videos: usize,
    pub synth_len: usize,
    pub synth_min_instances: usize,
    pub synth_max_instances: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d_i: 8,
            d_b: 32,
            d_g: 32,
            d_c: 32,
            l_w: 32,
            d_max: 0,
            n_content: 16,
            stride: 0,
            rescale_len: 0,
            lr: 1e-4,
            weight_decay: 5e-3,
            max_epochs: 20,
            patience: 5,
            val_fraction: 0.2,
            seed: 7,
            directed: true,
            edge_update: true,
            gcn_baseline: false,
            nms_sigma: 0.5,
            nms_floor: 0.001,
            nms_top_k: 100,
            tiou_thresholds: ThresholdStyle::ActivityNet,
            synth_videos: 20,
            synth_len: 64,
            synth_min_instances: 1,
            synth_max_instances: 2,
        }
    }
}

impl RunConfig {
    pub fn effective_d_max(&self) -> usize {
        if self.d_max == 0 {
            self.l_w - 1
        } else {
            self.d_max.min(self.l_w - 1)
        }
    }

    pub fn effective_stride(&self) -> usize {
        if self.stride == 0 {
            (self.l_w / 2).max(1)
        } else {
            self.stride
        }
    }

    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            d_i: self.d_i,
            d_b: self.d_b,
            d_g: self.d_g,
            d_c: self.d_c,
            l_w: self.l_w,
            d_max: self.effective_d_max(),
            n_content: self.n_content,
        }
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            directed: self.directed,
            edge_update: self.edge_update,
            gcn_baseline: self.gcn_baseline,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(msg.to_string()))
            }
        };
        check(self.d_i >= 1, "d_i must be >= 1")?;
        check(self.l_w >= 2, "l_w must be >= 2")?;
        check(self.n_content >= 2, "n_content must be >= 2")?;
        check(self.lr > 0.0, "lr must be positive")?;
        check(self.max_epochs >= 1, "max_epochs must be >= 1")?;
        check(self.patience >= 1, "patience must be >= 1")?;
        check(
            (0.0..1.0).contains(&self.val_fraction),
            "val_fraction must be in [0, 1)",
        )?;
        check(self.nms_sigma > 0.0, "nms_sigma must be positive")?;
        check(self.nms_top_k >= 1, "nms_top_k must be >= 1")?;
        check(self.synth_videos >= 1, "synth_videos must be >= 1")?;
        check(
            self.synth_min_instances <= self.synth_max_instances,
            "synth_min_instances must not exceed synth_max_instances",
        )?;
        check(
            self.stride <= self.l_w,
            "stride must not exceed l_w",
        )?;
        Ok(())
    }

    /// Canonical serialization: every key, fixed order.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let kv = &mut s;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(kv, "{k} = {v}");
        };
        put("d_i", self.d_i.to_string());
        put("d_b", self.d_b.to_string());
        put("d_g", self.d_g.to_string());
        put("d_c", self.d_c.to_string());
        put("l_w", self.l_w.to_string());
        put("d_max", self.d_max.to_string());
        put("n_content", self.n_content.to_string());
        put("stride", self.stride.to_string());
        put("rescale_len", self.rescale_len.to_string());
        put("lr", format!("{}", self.lr));
        put("weight_decay", format!("{}", self.weight_decay));
        put("max_epochs", self.max_epochs.to_string());
        put("patience", self.patience.to_string());
        put("val_fraction", format!("{}", self.val_fraction));
        put("seed", self.seed.to_string());
        put("directed", self.directed.to_string());
        put("edge_update", self.edge_update.to_string());
        put("gcn_baseline", self.gcn_baseline.to_string());
        put("nms_sigma", format!("{}", self.nms_sigma));
        put("nms_floor", format!("{}", self.nms_floor));
        put("nms_top_k", self.nms_top_k.to_string());
        put("tiou_thresholds", self.tiou_thresholds.as_str().to_string());
        put("synth_videos", self.synth_videos.to_string());
        put("synth_len", self.synth_len.to_string());
        put("synth_min_instances", self.synth_min_instances.to_string());
        put("synth_max_instances", self.synth_max_instances.to_string());
        s
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        macro_rules! parse {
            () => {
                value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "d_i" => self.d_i = parse!(),
            "d_b" => self.d_b = parse!(),
            "d_g" => self.d_g = parse!(),
            "d_c" => self.d_c = parse!(),
            "l_w" => self.l_w = parse!(),
            "d_max" => self.d_max = parse!(),
            "n_content" => self.n_content = parse!(),
            "stride" => self.stride = parse!(),
            "rescale_len" => self.rescale_len = parse!(),
            "lr" => self.lr = parse!(),
            "weight_decay" => self.weight_decay = parse!(),
            "max_epochs" => self.max_epochs = parse!(),
            "patience" => self.patience = parse!(),
            "val_fraction" => self.val_fraction = parse!(),
            "seed" => self.seed = parse!(),
            "directed" => self.directed = parse!(),
            "edge_update" => self.edge_update = parse!(),
            "gcn_baseline" => self.gcn_baseline = parse!(),
            "nms_sigma" => self.nms_sigma = parse!(),
            "nms_floor" => self.nms_floor = parse!(),
            "nms_top_k" => self.nms_top_k = parse!(),
            "tiou_thresholds" => {
                self.tiou_thresholds = match value {
                    "anet" => ThresholdStyle::ActivityNet,
                    "thumos" => ThresholdStyle::Thumos,
                    _ => return Err(bad()),
                }
            }
            "synth_videos" => self.synth_videos = parse!(),
            "synth_len" => self.synth_len = parse!(),
            "synth_min_instances" => self.synth_min_instances = parse!(),
            "synth_max_instances" => self.synth_max_instances = parse!(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse `key = value` lines over the defaults. Blank lines and `#`
    /// comments are allowed; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: ln + 1,
                text: raw.to_string(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// FNV-1a hash of the canonical serialization, as fixed-width hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.serialize().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
