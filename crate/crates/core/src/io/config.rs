//! Run configuration: `key = value` lines, `#` starts a comment.
//!
//! Values are resolved with the precedence command line > file > defaults.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::query::GridSpec;
use crate::tracker::{AssociationParams, TrackerConfig};

/// Every accepted key, in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "clip_len",
    "overlap",
    "grid",
    "w",
    "epsilon",
    "alpha",
    "beta1",
    "beta2",
    "t_mem",
    "tau_conf",
    "tau_new",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda5",
    "focal_gamma",
    "focal_alpha",
    "seed",
    "match_class",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub clip_len: usize,
    /// `None` means `clip_len - 1`.
    pub overlap: Option<usize>,
    pub grid: GridSpec,
    /// Association window growth per frame of distance.
    pub window: usize,
    /// Box IoU threshold of the neighbor set.
    pub epsilon: f64,
    /// Voxel weight of target and neighbor pixels in the inter-instance BCE.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub t_mem: usize,
    pub tau_conf: f64,
    pub tau_new: f64,
    pub loss_weights: LossWeights,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub seed: u64,
    pub match_class: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            clip_len: 4,
            overlap: None,
            grid: GridSpec::new(4, 4),
            window: 5,
            epsilon: 0.1,
            alpha: 2.0,
            beta1: 1.0,
            beta2: 1.0,
            t_mem: 10,
            tau_conf: 0.3,
            tau_new: 0.2,
            loss_weights: LossWeights::default(),
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            seed: 0,
            match_class: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_grid(value: &str) -> Result<GridSpec> {
    let (r, c) = value
        .split_once(['x', 'X', ','])
        .ok_or_else(|| Error::Config(format!("grid = {value:?}: expected ROWSxCOLS")))?;
    Ok(GridSpec::new(parse_value("grid", r.trim())?, parse_value("grid", c.trim())?))
}

impl RunConfig {
    pub fn overlap(&self) -> usize {
        self.overlap.unwrap_or(self.clip_len.saturating_sub(1))
    }

    /// Sets one key from its textual value. Does not validate ranges.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "clip_len" => self.clip_len = parse_value(key, v)?,
            "overlap" => self.overlap = Some(parse_value(key, v)?),
            "grid" => self.grid = parse_grid(v)?,
            "w" => self.window = parse_value(key, v)?,
            "epsilon" => self.epsilon = parse_value(key, v)?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "beta1" => self.beta1 = parse_value(key, v)?,
            "beta2" => self.beta2 = parse_value(key, v)?,
            "t_mem" => self.t_mem = parse_value(key, v)?,
            "tau_conf" => self.tau_conf = parse_value(key, v)?,
            "tau_new" => self.tau_new = parse_value(key, v)?,
            "lambda1" => self.loss_weights.cls = parse_value(key, v)?,
            "lambda2" => self.loss_weights.boxes = parse_value(key, v)?,
            "lambda3" => self.loss_weights.inter_mask = parse_value(key, v)?,
            "lambda4" => self.loss_weights.init_sem = parse_value(key, v)?,
            "lambda5" => self.loss_weights.init_reid = parse_value(key, v)?,
            "focal_gamma" => self.focal_gamma = parse_value(key, v)?,
            "focal_alpha" => self.focal_alpha = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "match_class" => self.match_class = parse_value(key, v)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; valid keys: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.clip_len == 0 {
            return bad("clip_len must be at least 1".into());
        }
        if self.overlap() >= self.clip_len {
            return bad(format!("overlap {} must be below clip_len {}", self.overlap(), self.clip_len));
        }
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return bad("grid extents must be positive".into());
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return bad(format!("alpha {} must be at least 1", self.alpha));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be finite and non-negative"));
            }
        }
        if self.beta1 == 0.0 && self.beta2 == 0.0 {
            return bad("beta1 and beta2 cannot both be zero".into());
        }
        if !(0.0..=1.0).contains(&self.tau_conf) {
            return bad(format!("tau_conf {} outside [0, 1]", self.tau_conf));
        }
        if !self.tau_new.is_finite() {
            return bad(format!("tau_new {} must be finite", self.tau_new));
        }
        if !(self.focal_gamma.is_finite() && self.focal_gamma >= 0.0) {
            return bad(format!("focal_gamma {} must be non-negative", self.focal_gamma));
        }
        if !(0.0..=1.0).contains(&self.focal_alpha) {
            return bad(format!("focal_alpha {} outside [0, 1]", self.focal_alpha));
        }
        self.loss_weights.validate()
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            clip_len: self.clip_len,
            overlap: self.overlap(),
            t_mem: self.t_mem,
            tau_conf: self.tau_conf,
            association: AssociationParams {
                beta1: self.beta1,
                beta2: self.beta2,
                tau_new: self.tau_new,
                match_class: self.match_class,
            },
        }
    }
}

/// Parses config text on top of the defaults without validating ranges.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        cfg.set(k, v).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
            other => other,
        })?;
    }
    Ok(cfg)
}

/// Defaults, then the file (if any), then `overrides` in order; validated.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => parse_config(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
