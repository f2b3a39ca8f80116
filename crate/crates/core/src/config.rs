//! Engine parameters, with `key = value` config files.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::global_query::GlobalQueryConfig;
use crate::local_index::FrameSize;
use crate::local_query::{HoughConfig, LocalQueryConfig, ScoreMode};

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub d_bow: usize,
    pub m: usize,
    pub d_pq: usize,
    pub tau_pq: f32,
    pub prune_fraction: f64,
    pub d_fk: usize,
    pub pca_dim: usize,
    pub binary_clusters: usize,
    pub k_probe: usize,
    pub epsilon: f64,
    pub warmup: usize,
    pub hold: usize,
    pub window: usize,
    pub top_n: usize,
    pub seed: u64,
    pub frame_width: f32,
    pub frame_height: f32,
    pub score_mode: ScoreMode,
    pub kmeans_iters: usize,
    pub pq_iters: usize,
    pub gmm_iters: usize,
    pub binary_iters: usize,
    /// Cap on local descriptors sampled for codebook training.
    pub max_local_train: usize,
    /// Cap on dense global features sampled for PCA and mixture training.
    pub max_global_train: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            d_bow: 10_000,
            m: 8,
            d_pq: 256,
            tau_pq: 0.72,
            prune_fraction: 0.05,
            d_fk: 256,
            pca_dim: 64,
            binary_clusters: 32,
            k_probe: 5,
            epsilon: 0.01,
            warmup: 10,
            hold: 5,
            window: 50,
            top_n: 100,
            seed: 0,
            frame_width: 640.0,
            frame_height: 480.0,
            score_mode: ScoreMode::Symmetric,
            kmeans_iters: 20,
            pq_iters: 20,
            gmm_iters: 30,
            binary_iters: 20,
            max_local_train: 200_000,
            max_global_train: 100_000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

impl EngineConfig {
    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "d_bow" => self.d_bow = parse(key, v)?,
            "m" => self.m = parse(key, v)?,
            "d_pq" => self.d_pq = parse(key, v)?,
            "tau_pq" => self.tau_pq = parse(key, v)?,
            "prune_fraction" => self.prune_fraction = parse(key, v)?,
            "d_fk" => self.d_fk = parse(key, v)?,
            "pca_dim" => self.pca_dim = parse(key, v)?,
            "binary_clusters" => self.binary_clusters = parse(key, v)?,
            "k_probe" => self.k_probe = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "hold" => self.hold = parse(key, v)?,
            "window" => self.window = parse(key, v)?,
            "top_n" => self.top_n = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "frame_width" => self.frame_width = parse(key, v)?,
            "frame_height" => self.frame_height = parse(key, v)?,
            "score_mode" => {
                self.score_mode = match v {
                    "symmetric" => ScoreMode::Symmetric,
                    "asymmetric" => ScoreMode::Asymmetric,
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "score_mode: unknown mode {v:?}"
                        )))
                    }
                }
            }
            "kmeans_iters" => self.kmeans_iters = parse(key, v)?,
            "pq_iters" => self.pq_iters = parse(key, v)?,
            "gmm_iters" => self.gmm_iters = parse(key, v)?,
            "binary_iters" => self.binary_iters = parse(key, v)?,
            "max_local_train" => self.max_local_train = parse(key, v)?,
            "max_global_train" => self.max_global_train = parse(key, v)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Malformed(format!("config line {}: expected key = value", n + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).map_err(|e| e.at(path))?;
        Ok(cfg)
    }

    pub fn frame(&self) -> FrameSize {
        FrameSize::new(self.frame_width, self.frame_height)
    }

    pub fn local_query(&self) -> LocalQueryConfig {
        LocalQueryConfig {
            tau_pq: self.tau_pq,
            top_n: self.top_n,
            mode: self.score_mode,
            hough: HoughConfig::default(),
        }
    }

    pub fn global_query(&self) -> GlobalQueryConfig {
        GlobalQueryConfig {
            k_probe: self.k_probe,
            top_n: self.top_n,
            brute_force: false,
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            epsilon: self.epsilon,
            warmup: self.warmup,
            hold: self.hold,
            window: self.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.d_bow < 2 {
            return bad(format!("d_bow {} below 2", self.d_bow));
        }
        if self.m == 0 || !(2..=256).contains(&self.d_pq) {
            return bad(format!("m {} / d_pq {} out of range", self.m, self.d_pq));
        }
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return bad("frame size must be positive".into());
        }
        if self.d_fk == 0 || self.pca_dim == 0 || self.binary_clusters == 0 {
            return bad("d_fk, pca_dim and binary_clusters must be positive".into());
        }
        if self.top_n == 0 {
            return bad("top_n must be positive".into());
        }
        self.local_query().validate()?;
        self.fusion().validate()
    }
}
