//! Flat `key = value` run configuration.
//!
//! One setting per line, dotted section keys, `#` starts a comment. Lists
//! are comma separated. Unknown keys are errors.
//!
//! ```text
//! input.synthetic = text
//! input.size = 64
//! mask.missing_pct = 0.5
//! model.depth = 3
//! objective.regularizer = tvl2
//! objective.lambda = 0.004
//! optimizer.eta = 0.001
//! output.restored = restored.pgm
//! ```

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::synthetic::SyntheticKind;
use crate::error::{Error, Result};
use crate::model::ActivationKind;
use crate::objective::{RegularizerKind, DEFAULT_LAMBDA, DEFAULT_TV_EPS};
use crate::optim::{InitScheme, OptimizerKind, TrainConfig, DEFAULT_INIT_STD};
use crate::probe::FlowProbeConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    Synthetic {
        kind: SyntheticKind,
        size: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskSource {
    File(PathBuf),
    Generate { missing_pct: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    Gaussian,
    Balanced,
}

/// Lists left as `None` fall back to the single value of the base config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSpec {
    pub missing_pct: Option<Vec<f64>>,
    pub activation: Option<Vec<ActivationKind>>,
    pub regularizer: Option<Vec<RegularizerKind>>,
    pub lambda: Option<Vec<f64>>,
    pub depth: Option<Vec<usize>>,
    pub width: Option<Vec<usize>>,
    pub seed: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub image: ImageSource,
    pub mask: MaskSource,
    pub depth: usize,
    /// Hidden width; `None` means the image width.
    pub width: Option<usize>,
    /// Full `[m_0, ..., m_L]`; overrides depth and width when set.
    pub dims: Option<Vec<usize>>,
    pub activation: ActivationKind,
    /// `None` means "biases iff the activation is nonlinear".
    pub use_bias: Option<bool>,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub tv_eps: f64,
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub max_iters: usize,
    pub loss_delta_tol: f64,
    pub init: InitKind,
    pub init_std: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub restored_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    pub trajectory_path: Option<PathBuf>,
    pub mask_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub snapshot_every: usize,
    /// Restored image scored by the `metrics` command.
    pub metrics_restored: Option<PathBuf>,
    pub sweep: SweepSpec,
    pub probe: FlowProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image: ImageSource::Synthetic {
                kind: SyntheticKind::Text,
                size: 64,
                seed: 0,
            },
            mask: MaskSource::Generate {
                missing_pct: 0.5,
                seed: 0,
            },
            depth: 3,
            width: None,
            dims: None,
            activation: ActivationKind::Linear,
            use_bias: None,
            regularizer: RegularizerKind::TvL2,
            lambda: DEFAULT_LAMBDA,
            tv_eps: DEFAULT_TV_EPS,
            optimizer: OptimizerKind::Adam,
            eta: 1e-3,
            max_iters: 10_000,
            loss_delta_tol: 1e-3,
            init: InitKind::Gaussian,
            init_std: DEFAULT_INIT_STD,
            init_scale: 1.0,
            seed: 0,
            restored_path: None,
            metrics_path: None,
            trajectory_path: None,
            mask_path: None,
            checkpoint_path: None,
            snapshot_every: 0,
            metrics_restored: None,
            sweep: SweepSpec::default(),
            probe: FlowProbeConfig::default(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{raw}': {e}")))
}

fn boolean(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{raw}' is not a boolean"))),
    }
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn path(raw: &str) -> Option<PathBuf> {
    (!raw.is_empty()).then(|| PathBuf::from(raw))
}

fn show_path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl RunConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        match key {
            "input.image" => {
                self.image = ImageSource::File(
                    path(raw).ok_or_else(|| Error::Config("input.image: empty path".into()))?,
                )
            }
            "input.synthetic" | "input.size" | "input.seed" => {
                let (mut kind, mut size, mut seed) = match &self.image {
                    ImageSource::Synthetic { kind, size, seed } => (*kind, *size, *seed),
                    ImageSource::File(_) => (SyntheticKind::Text, 64, 0),
                };
                match key {
                    "input.synthetic" => kind = value(key, raw)?,
                    "input.size" => size = value(key, raw)?,
                    _ => seed = value(key, raw)?,
                }
                self.image = ImageSource::Synthetic { kind, size, seed };
            }
            "mask.path" => {
                self.mask = MaskSource::File(
                    path(raw).ok_or_else(|| Error::Config("mask.path: empty path".into()))?,
                )
            }
            "mask.missing_pct" | "mask.seed" => {
                let (mut missing_pct, mut seed) = match &self.mask {
                    MaskSource::Generate { missing_pct, seed } => (*missing_pct, *seed),
                    MaskSource::File(_) => (0.5, 0),
                };
                if key == "mask.missing_pct" {
                    missing_pct = value(key, raw)?;
                } else {
                    seed = value(key, raw)?;
                }
                self.mask = MaskSource::Generate { missing_pct, seed };
            }
            "model.depth" => self.depth = value(key, raw)?,
            "model.width" => self.width = if raw == "auto" { None } else { Some(value(key, raw)?) },
            "model.dims" => self.dims = if raw.is_empty() { None } else { Some(list(key, raw)?) },
            "model.activation" => self.activation = value(key, raw)?,
            "model.use_bias" => {
                self.use_bias = if raw == "auto" { None } else { Some(boolean(key, raw)?) }
            }
            "objective.regularizer" => self.regularizer = value(key, raw)?,
            "objective.lambda" => self.lambda = value(key, raw)?,
            "objective.eps" => self.tv_eps = value(key, raw)?,
            "optimizer.kind" => {
                self.optimizer = match raw.to_ascii_lowercase().as_str() {
                    "adam" => OptimizerKind::Adam,
                    "gd" | "sgd" => OptimizerKind::GradientDescent,
                    _ => return Err(Error::Config(format!("{key}: unknown optimizer '{raw}'"))),
                }
            }
            "optimizer.eta" => self.eta = value(key, raw)?,
            "optimizer.max_iters" => self.max_iters = value(key, raw)?,
            "optimizer.loss_delta_tol" => self.loss_delta_tol = value(key, raw)?,
            "optimizer.init" => {
                self.init = match raw.to_ascii_lowercase().as_str() {
                    "gaussian" => InitKind::Gaussian,
                    "balanced" => InitKind::Balanced,
                    _ => return Err(Error::Config(format!("{key}: unknown init '{raw}'"))),
                }
            }
            "optimizer.init_std" => self.init_std = value(key, raw)?,
            "optimizer.init_scale" => self.init_scale = value(key, raw)?,
            "optimizer.seed" => self.seed = value(key, raw)?,
            "output.restored" => self.restored_path = path(raw),
            "output.metrics" => self.metrics_path = path(raw),
            "output.trajectory" => self.trajectory_path = path(raw),
            "output.mask" => self.mask_path = path(raw),
            "output.checkpoint" => self.checkpoint_path = path(raw),
            "output.snapshot_every" => self.snapshot_every = value(key, raw)?,
            "metrics.restored" => self.metrics_restored = path(raw),
            "sweep.missing_pct" => self.sweep.missing_pct = Some(list(key, raw)?),
            "sweep.activation" => self.sweep.activation = Some(list(key, raw)?),
            "sweep.regularizer" => self.sweep.regularizer = Some(list(key, raw)?),
            "sweep.lambda" => self.sweep.lambda = Some(list(key, raw)?),
            "sweep.depth" => self.sweep.depth = Some(list(key, raw)?),
            "sweep.width" => self.sweep.width = Some(list(key, raw)?),
            "sweep.seed" => self.sweep.seed = Some(list(key, raw)?),
            "probe.d" => self.probe.d = value(key, raw)?,
            "probe.depth" => self.probe.depth = value(key, raw)?,
            "probe.dt" => self.probe.dt = value(key, raw)?,
            "probe.steps" => self.probe.steps = value(key, raw)?,
            "probe.lambda" => self.probe.lambda = value(key, raw)?,
            "probe.use_tvquad" => self.probe.use_tvquad = boolean(key, raw)?,
            "probe.mask_density" => self.probe.mask_density = value(key, raw)?,
            "probe.seed" => self.probe.seed = value(key, raw)?,
            "probe.init_scale" => self.probe.init_scale = value(key, raw)?,
            "probe.target_std" => self.probe.target_std = value(key, raw)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)` in a fixed order; [`parse`](Self::parse)
    /// of [`to_text`](Self::to_text) reproduces `self`.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e: Vec<(&'static str, String)> = Vec::new();
        match &self.image {
            ImageSource::File(p) => e.push(("input.image", p.display().to_string())),
            ImageSource::Synthetic { kind, size, seed } => {
                e.push(("input.synthetic", kind.to_string()));
                e.push(("input.size", size.to_string()));
                e.push(("input.seed", seed.to_string()));
            }
        }
        match &self.mask {
            MaskSource::File(p) => e.push(("mask.path", p.display().to_string())),
            MaskSource::Generate { missing_pct, seed } => {
                e.push(("mask.missing_pct", missing_pct.to_string()));
                e.push(("mask.seed", seed.to_string()));
            }
        }
        e.push(("model.depth", self.depth.to_string()));
        e.push(("model.width", self.width.map_or("auto".into(), |w| w.to_string())));
        if let Some(d) = &self.dims {
            e.push(("model.dims", join(d)));
        }
        e.push(("model.activation", self.activation.to_string()));
        e.push(("model.use_bias", self.use_bias.map_or("auto".into(), |b| b.to_string())));
        e.push(("objective.regularizer", self.regularizer.to_string()));
        e.push(("objective.lambda", self.lambda.to_string()));
        e.push(("objective.eps", self.tv_eps.to_string()));
        e.push((
            "optimizer.kind",
            match self.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::GradientDescent => "gd",
            }
            .into(),
        ));
        e.push(("optimizer.eta", self.eta.to_string()));
        e.push(("optimizer.max_iters", self.max_iters.to_string()));
        e.push(("optimizer.loss_delta_tol", self.loss_delta_tol.to_string()));
        e.push((
            "optimizer.init",
            match self.init {
                InitKind::Gaussian => "gaussian",
                InitKind::Balanced => "balanced",
            }
            .into(),
        ));
        e.push(("optimizer.init_std", self.init_std.to_string()));
        e.push(("optimizer.init_scale", self.init_scale.to_string()));
        e.push(("optimizer.seed", self.seed.to_string()));
        let paths = [
            ("output.restored", &self.restored_path),
            ("output.metrics", &self.metrics_path),
            ("output.trajectory", &self.trajectory_path),
            ("output.mask", &self.mask_path),
            ("output.checkpoint", &self.checkpoint_path),
            ("metrics.restored", &self.metrics_restored),
        ];
        for (k, p) in paths {
            if let Some(s) = show_path(p) {
                e.push((k, s));
            }
        }
        e.push(("output.snapshot_every", self.snapshot_every.to_string()));
        let s = &self.sweep;
        if let Some(v) = &s.missing_pct {
            e.push(("sweep.missing_pct", join(v)));
        }
        if let Some(v) = &s.activation {
            e.push(("sweep.activation", join(v)));
        }
        if let Some(v) = &s.regularizer {
            e.push(("sweep.regularizer", join(v)));
        }
        if let Some(v) = &s.lambda {
            e.push(("sweep.lambda", join(v)));
        }
        if let Some(v) = &s.depth {
            e.push(("sweep.depth", join(v)));
        }
        if let Some(v) = &s.width {
            e.push(("sweep.width", join(v)));
        }
        if let Some(v) = &s.seed {
            e.push(("sweep.seed", join(v)));
        }
        let p = &self.probe;
        e.push(("probe.d", p.d.to_string()));
        e.push(("probe.depth", p.depth.to_string()));
        e.push(("probe.dt", p.dt.to_string()));
        e.push(("probe.steps", p.steps.to_string()));
        e.push(("probe.lambda", p.lambda.to_string()));
        e.push(("probe.use_tvquad", p.use_tvquad.to_string()));
        e.push(("probe.mask_density", p.mask_density.to_string()));
        e.push(("probe.seed", p.seed.to_string()));
        e.push(("probe.init_scale", p.init_scale.to_string()));
        e.push(("probe.target_std", p.target_std.to_string()));
        e
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn run_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn use_bias_resolved(&self, activation: ActivationKind) -> bool {
        self.use_bias.unwrap_or(activation != ActivationKind::Linear)
    }

    /// Layer sizes for a `rows × cols` image.
    pub fn dims_for(&self, rows: usize, cols: usize) -> Result<Vec<usize>> {
        let dims = match &self.dims {
            Some(d) => d.clone(),
            None => {
                if self.depth == 0 {
                    return Err(Error::Config("model.depth must be at least 1".into()));
                }
                let w = self.width.unwrap_or(cols);
                let mut d = vec![w; self.depth + 1];
                d[0] = cols;
                d[self.depth] = rows;
                d
            }
        };
        if dims.len() < 2 || dims[0] != cols || dims[dims.len() - 1] != rows {
            return Err(Error::Config(format!(
                "model dims {dims:?} must start with the image width {cols} and end with its height {rows}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Config("model dims must be positive".into()));
        }
        Ok(dims)
    }

    /// Training settings for a `rows × cols` image.
    pub fn train_config(&self, rows: usize, cols: usize) -> Result<TrainConfig> {
        self.validate()?;
        let mut tc = TrainConfig::for_shape(rows, cols);
        tc.dims = self.dims_for(rows, cols)?;
        tc.activation = self.activation;
        tc.use_bias = self.use_bias_resolved(self.activation);
        tc.init = match self.init {
            InitKind::Gaussian => InitScheme::Gaussian { std: self.init_std },
            InitKind::Balanced => InitScheme::Balanced {
                scale: self.init_scale,
            },
        };
        tc.optimizer = self.optimizer;
        tc.eta = self.eta;
        tc.max_iters = self.max_iters;
        tc.loss_delta_tol = self.loss_delta_tol;
        tc.seed = self.seed;
        Ok(tc)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let MaskSource::Generate { missing_pct, .. } = self.mask {
            if !(0.0..=1.0).contains(&missing_pct) {
                return bad(format!("mask.missing_pct must lie in [0, 1], got {missing_pct}"));
            }
        }
        if let Some(v) = &self.sweep.missing_pct {
            if let Some(p) = v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return bad(format!("sweep.missing_pct values must lie in [0, 1], got {p}"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("objective.lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.tv_eps > 0.0 && self.tv_eps.is_finite()) {
            return bad(format!("objective.eps must be positive, got {}", self.tv_eps));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("optimizer.eta must be positive, got {}", self.eta));
        }
        if !(self.loss_delta_tol >= 0.0) {
            return bad("optimizer.loss_delta_tol must be >= 0".into());
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad(format!("optimizer.init_std must be >= 0, got {}", self.init_std));
        }
        Ok(())
    }
}
