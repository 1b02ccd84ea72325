//! Mini-batch SGD on the bidirectional margin loss.

mod gradcheck;
mod loss;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gradcheck::{compare_gradients, gradient_check, GradCheckReport, KINK_GUARD, REL_ERROR_FLOOR};
pub use loss::{
    contrastive_loss, hardest_negatives, hinge_arguments, hinge_pair_loss, loss_and_gradients,
    loss_gradients, sample_negatives, ModelGrad, Pairing, Sample,
};

use crate::dataset::Dataset;
use crate::divergences::DistanceKind;
use crate::encoders::ModelParams;
use crate::error::{Error, Result};

/// Step used when `check_gradients` is on.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Gradient checks during `fit` are skipped above this many parameters.
pub const GRAD_CHECK_MAX_PARAMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub distance_kind: DistanceKind,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    /// Mine the most violating in-batch negative instead of sampling.
    pub hard_negatives: bool,
    /// Keep every variance parameter at its initial value.
    pub freeze_variances: bool,
    /// Run a finite-difference check on the first batch of training.
    pub check_gradients: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            distance_kind: DistanceKind::Wasserstein2Sq,
            margin: 0.2,
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 32,
            embed_dim: 64,
            seed: 0,
            negatives_per_positive: 1,
            hard_negatives: false,
            freeze_variances: false,
            check_gradients: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::Config(format!("margin must be >= 0, got {}", self.margin)));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size must be >= 2, got {}", self.batch_size)));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("negatives must be >= 1".into()));
        }
        if self.distance_kind == DistanceKind::Jeffreys {
            return Err(Error::Config("jeffreys is an analysis measure, train with mahalanobis, kl or w2".into()));
        }
        Ok(())
    }

    /// Serialises to `key = value` lines.
    ///
    /// The optional switches are written only when enabled.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "distance = {}", self.distance_kind);
        let _ = writeln!(out, "margin = {}", self.margin);
        let _ = writeln!(out, "lr = {}", self.learning_rate);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "dim = {}", self.embed_dim);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "negatives = {}", self.negatives_per_positive);
        for (key, on) in [
            ("hard_negatives", self.hard_negatives),
            ("freeze_variances", self.freeze_variances),
            ("check_gradients", self.check_gradients),
        ] {
            if on {
                let _ = writeln!(out, "{key} = true");
            }
        }
        out
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "distance" => self.distance_kind = value.parse()?,
            "margin" => self.margin = parse_value(key, value)?,
            "lr" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "dim" => self.embed_dim = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "negatives" => self.negatives_per_positive = parse_value(key, value)?,
            "hard_negatives" => self.hard_negatives = parse_value(key, value)?,
            "freeze_variances" => self.freeze_variances = parse_value(key, value)?,
            "check_gradients" => self.check_gradients = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per positive pair, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub final_loss: Option<f64>,
    pub grad_check_max_rel_error: Option<f64>,
    pub seconds: f64,
}

impl TrainReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (e, l) in self.epoch_losses.iter().enumerate() {
            let _ = writeln!(out, "epoch {:>4}  loss {:.6}", e + 1, l);
        }
        match self.final_loss {
            Some(l) => {
                let _ = writeln!(out, "final loss {l:.6}");
            }
            None => {
                let _ = writeln!(out, "no epochs run");
            }
        }
        if let Some(err) = self.grad_check_max_rel_error {
            let _ = writeln!(out, "gradient check max relative error {err:.3e}");
        }
        let _ = writeln!(out, "elapsed {:.2}s", self.seconds);
        out
    }
}

fn samples<'a>(dataset: &'a Dataset, indices: &[usize]) -> Vec<Sample<'a>> {
    indices
        .iter()
        .map(|&i| Sample {
            features: &dataset.items[i].features,
            tags: &dataset.items[i].tags,
        })
        .collect()
}

/// Splits a shuffled epoch into batches, folding a trailing singleton into
/// the previous batch.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + batch_size).min(order.len());
        if order.len() - end == 1 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

/// Initialises a model for `dataset` and trains it.
pub fn fit(config: &TrainConfig, dataset: &Dataset) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(item) = dataset.items.iter().find(|it| it.tags.is_empty()) {
        return Err(Error::ItemWithoutTags(item.id.clone()));
    }
    if dataset.len() < 2 {
        return Err(Error::BatchTooSmall(dataset.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParams::init(
        config.embed_dim,
        dataset.feature_dim,
        dataset.vocabulary.clone(),
        config.distance_kind,
        config.margin,
        &mut rng,
    )?;
    train(config, dataset, params, &mut rng)
}

/// Continues training from `params` with the given generator state.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
    mut params: ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let kind = config.distance_kind;
    let margin = config.margin;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_check = None;

    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (b, idx) in batches(&order, config.batch_size).into_iter().enumerate() {
            let batch = samples(dataset, idx);
            let per_positive = config.negatives_per_positive.min(batch.len() - 1);
            let pairing = if config.hard_negatives {
                hardest_negatives(&params, &batch, kind, margin)?
            } else {
                sample_negatives(batch.len(), per_positive, rng)?
            };
            if epoch == 0 && b == 0 && config.check_gradients && params.num_parameters() <= GRAD_CHECK_MAX_PARAMS {
                grad_check = Some(gradient_check(&params, &batch, &pairing, kind, margin, GRAD_CHECK_STEP)?);
            }
            let (loss, mut grad) = loss_and_gradients(&params, &batch, &pairing, kind, margin)?;
            if config.freeze_variances {
                grad.clear_variance_terms();
            }
            for (p, g) in params.arrays_mut().into_iter().zip(grad.arrays()) {
                for (w, dw) in p.iter_mut().zip(g) {
                    *w -= config.learning_rate * dw;
                }
            }
            total += loss;
            pairs += pairing.num_pairs();
        }
        epoch_losses.push(total / pairs as f64);
    }

    let report = TrainReport {
        final_loss: epoch_losses.last().copied(),
        epoch_losses,
        grad_check_max_rel_error: grad_check,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}
