//! Bidirectional margin loss, negative pairing and analytic gradients.
//!
//! For a positive `(x⁺, v⁺)` and a negative `(x⁻, v⁻)` drawn from another
//! sample of the batch, the pair loss is
//!
//! ```text
//! max(0, m + D(x⁺, v⁺) − D(x⁺, v⁻)) + max(0, m + D(v⁺, x⁺) − D(v⁻, x⁺))
//! ```
//!
//! with `D = distance(kind, ·, ·)`, and the batch loss is the plain sum.

use rand::seq::index;
use rand::Rng;

use crate::divergences::{distance, distance_grad, DistanceKind};
use crate::encoders::{sigmoid, ModelParams};
use crate::error::{Error, Result};
use crate::gaussian::SphericalGaussian;

/// One training example: precomputed features and the ids of its tags.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub tags: &'a [usize],
}

/// For each positive `i`, the batch indices whose `(item, tags)` act as negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub negatives: Vec<Vec<usize>>,
}

impl Pairing {
    pub fn single(negatives: Vec<usize>) -> Self {
        Pairing {
            negatives: negatives.into_iter().map(|j| vec![j]).collect(),
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.negatives.iter().map(Vec::len).sum()
    }

    fn validate(&self, batch_len: usize) -> Result<()> {
        if batch_len < 2 {
            return Err(Error::BatchTooSmall(batch_len));
        }
        if self.negatives.len() != batch_len {
            return Err(Error::Config(format!(
                "pairing covers {} positives but batch has {batch_len}",
                self.negatives.len()
            )));
        }
        for (i, negs) in self.negatives.iter().enumerate() {
            if let Some(&j) = negs.iter().find(|&&j| j == i || j >= batch_len) {
                return Err(Error::Config(format!("invalid negative {j} for positive {i}")));
            }
        }
        Ok(())
    }
}

/// Draws `per_positive` distinct negatives `j ≠ i` uniformly for every positive.
pub fn sample_negatives(batch_len: usize, per_positive: usize, rng: &mut impl Rng) -> Result<Pairing> {
    if batch_len < 2 {
        return Err(Error::BatchTooSmall(batch_len));
    }
    if per_positive == 0 || per_positive > batch_len - 1 {
        return Err(Error::Config(format!(
            "cannot draw {per_positive} distinct negatives from a batch of {batch_len}"
        )));
    }
    let negatives = (0..batch_len)
        .map(|i| {
            index::sample(rng, batch_len - 1, per_positive)
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j })
                .collect()
        })
        .collect();
    Ok(Pairing { negatives })
}

/// Picks, for every positive, the other sample with the largest pair loss.
/// Ties go to the lowest index.
pub fn hardest_negatives(
    params: &ModelParams,
    batch: &[Sample<'_>],
    kind: DistanceKind,
    margin: f64,
) -> Result<Pairing> {
    if batch.len() < 2 {
        return Err(Error::BatchTooSmall(batch.len()));
    }
    let encoded = encode_batch(params, batch)?;
    let mut negatives = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..batch.len()).filter(|&j| j != i) {
            let [h1, h2] = hinge_args(kind, margin, &encoded[i], &encoded[j].1)?;
            let loss = h1.max(0.0) + h2.max(0.0);
            if best.is_none_or(|(_, b)| loss > b) {
                best = Some((j, loss));
            }
        }
        negatives.push(vec![best.map(|(j, _)| j).unwrap_or_default()]);
    }
    Ok(Pairing { negatives })
}

/// Pair loss from the four distances directly.
pub fn hinge_pair_loss(margin: f64, pos_xv: f64, neg_xv: f64, pos_vx: f64, neg_vx: f64) -> f64 {
    (margin + pos_xv - neg_xv).max(0.0) + (margin + pos_vx - neg_vx).max(0.0)
}

type Encoded = (SphericalGaussian, SphericalGaussian);

fn encode_batch(params: &ModelParams, batch: &[Sample<'_>]) -> Result<Vec<Encoded>> {
    batch
        .iter()
        .map(|s| Ok((params.encode_item(s.features)?, params.encode_tag_set(s.tags)?)))
        .collect()
}

/// `[m + D(x⁺,v⁺) − D(x⁺,v⁻), m + D(v⁺,x⁺) − D(v⁻,x⁺)]`.
fn hinge_args(kind: DistanceKind, margin: f64, pos: &Encoded, neg_tags: &SphericalGaussian) -> Result<[f64; 2]> {
    let (x, v) = pos;
    Ok([
        margin + distance(kind, x, v)? - distance(kind, x, neg_tags)?,
        margin + distance(kind, v, x)? - distance(kind, neg_tags, x)?,
    ])
}

/// Every hinge argument of the batch, in pairing order, two per pair.
pub fn hinge_arguments(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
) -> Result<Vec<f64>> {
    pairing.validate(batch.len())?;
    let encoded = encode_batch(params, batch)?;
    let mut out = Vec::with_capacity(2 * pairing.num_pairs());
    for (i, negs) in pairing.negatives.iter().enumerate() {
        for &j in negs {
            out.extend(hinge_args(kind, margin, &encoded[i], &encoded[j].1)?);
        }
    }
    Ok(out)
}

pub fn contrastive_loss(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
) -> Result<f64> {
    Ok(hinge_arguments(params, batch, pairing, kind, margin)?
        .into_iter()
        .map(|h| h.max(0.0))
        .sum())
}

/// Gradient of the batch loss, laid out like the trainable arrays of
/// [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub w_item: Vec<f64>,
    pub b_item: Vec<f64>,
    pub item_var_head: Vec<f64>,
    pub item_var_bias: f64,
    pub tag_means: Vec<f64>,
    pub tag_logvars: Vec<f64>,
}

impl ModelGrad {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrad {
            w_item: vec![0.0; params.w_item.len()],
            b_item: vec![0.0; params.b_item.len()],
            item_var_head: vec![0.0; params.item_var_head.len()],
            item_var_bias: 0.0,
            tag_means: vec![0.0; params.tag_means.len()],
            tag_logvars: vec![0.0; params.tag_logvars.len()],
        }
    }

    pub fn arrays(&self) -> [&[f64]; 6] {
        [
            &self.w_item,
            &self.b_item,
            &self.item_var_head,
            std::slice::from_ref(&self.item_var_bias),
            &self.tag_means,
            &self.tag_logvars,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w_item,
            &mut self.b_item,
            &mut self.item_var_head,
            std::slice::from_mut(&mut self.item_var_bias),
            &mut self.tag_means,
            &mut self.tag_logvars,
        ]
    }

    /// Flattened in persistence order.
    pub fn flat(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    pub fn is_zero(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|&g| g == 0.0))
    }

    pub fn add_assign(&mut self, other: &ModelGrad) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn clear_variance_terms(&mut self) {
        self.item_var_head.iter_mut().for_each(|g| *g = 0.0);
        self.item_var_bias = 0.0;
        self.tag_logvars.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Upstream gradient arriving at an encoded distribution.
struct Upstream {
    mean: Vec<f64>,
    var: f64,
}

impl Upstream {
    fn zeros(d: usize) -> Self {
        Upstream { mean: vec![0.0; d], var: 0.0 }
    }

    fn add(&mut self, mean: &[f64], var: f64, scale: f64) {
        for (a, b) in self.mean.iter_mut().zip(mean) {
            *a += scale * b;
        }
        self.var += scale * var;
    }
}

fn backprop_item(params: &ModelParams, features: &[f64], up: &Upstream, grad: &mut ModelGrad) {
    let r = params.feature_dim;
    for (k, g) in up.mean.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        for (w, f) in grad.w_item[k * r..(k + 1) * r].iter_mut().zip(features) {
            *w += g * f;
        }
        grad.b_item[k] += g;
    }
    let g_logit = up.var * sigmoid(params.item_var_logit(features));
    for (h, f) in grad.item_var_head.iter_mut().zip(features) {
        *h += g_logit * f;
    }
    grad.item_var_bias += g_logit;
}

/// Chain rule through the centroid fusion.
///
/// With per-tag precisions `λ_t = 1/σ_t²` and `Λ = Σ λ_t` over `n` tags,
/// the fused distribution is `μ = Σ λ_t μ_t / Λ` and `σ² = n / Λ`.
fn backprop_tag_set(params: &ModelParams, tags: &[usize], fused_mean: &[f64], up: &Upstream, grad: &mut ModelGrad) {
    let d = params.dim;
    let n = tags.len() as f64;
    let vars: Vec<f64> = tags
        .iter()
        .map(|&t| crate::encoders::softplus(params.tag_logvars[t]) + crate::gaussian::VAR_FLOOR)
        .collect();
    let total_precision: f64 = vars.iter().map(|v| 1.0 / v).sum();
    for (&t, &var) in tags.iter().zip(&vars) {
        let precision = 1.0 / var;
        let mean_t = params.tag_mean(t);
        let weight = precision / total_precision;
        let mut g_precision = -up.var * n / (total_precision * total_precision);
        for k in 0..d {
            grad.tag_means[t * d + k] += up.mean[k] * weight;
            g_precision += up.mean[k] * (mean_t[k] - fused_mean[k]) / total_precision;
        }
        let g_var = -g_precision / (var * var);
        grad.tag_logvars[t] += g_var * sigmoid(params.tag_logvars[t]);
    }
}

/// Batch loss together with its gradient.
pub fn loss_and_gradients(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
) -> Result<(f64, ModelGrad)> {
    pairing.validate(batch.len())?;
    let encoded = encode_batch(params, batch)?;
    let d = params.dim;
    let mut item_up: Vec<Upstream> = (0..batch.len()).map(|_| Upstream::zeros(d)).collect();
    let mut tags_up: Vec<Upstream> = (0..batch.len()).map(|_| Upstream::zeros(d)).collect();
    let mut loss = 0.0;

    for (i, negs) in pairing.negatives.iter().enumerate() {
        let (x, v) = &encoded[i];
        for &j in negs {
            let v_neg = &encoded[j].1;
            let [h1, h2] = hinge_args(kind, margin, &encoded[i], v_neg)?;
            if h1 > 0.0 {
                loss += h1;
                let pos = distance_grad(kind, x, v)?;
                let neg = distance_grad(kind, x, v_neg)?;
                item_up[i].add(&pos.d_mean_a, pos.d_var_a, 1.0);
                item_up[i].add(&neg.d_mean_a, neg.d_var_a, -1.0);
                tags_up[i].add(&pos.d_mean_b, pos.d_var_b, 1.0);
                tags_up[j].add(&neg.d_mean_b, neg.d_var_b, -1.0);
            }
            if h2 > 0.0 {
                loss += h2;
                let pos = distance_grad(kind, v, x)?;
                let neg = distance_grad(kind, v_neg, x)?;
                tags_up[i].add(&pos.d_mean_a, pos.d_var_a, 1.0);
                item_up[i].add(&pos.d_mean_b, pos.d_var_b, 1.0);
                tags_up[j].add(&neg.d_mean_a, neg.d_var_a, -1.0);
                item_up[i].add(&neg.d_mean_b, neg.d_var_b, -1.0);
            }
        }
    }

    let mut grad = ModelGrad::zeros_like(params);
    for (idx, sample) in batch.iter().enumerate() {
        backprop_item(params, sample.features, &item_up[idx], &mut grad);
        backprop_tag_set(params, sample.tags, encoded[idx].1.mean(), &tags_up[idx], &mut grad);
    }
    Ok((loss, grad))
}

pub fn loss_gradients(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
) -> Result<ModelGrad> {
    loss_and_gradients(params, batch, pairing, kind, margin).map(|(_, g)| g)
}
