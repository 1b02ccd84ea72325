//! Parameterised maps from items, tags and tag sets to spherical Gaussians.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergences::DistanceKind;
use crate::error::{Error, Result};
use crate::gaussian::{fuse, from_natural, to_natural, SphericalGaussian, VAR_FLOOR};

/// softplus⁻¹(1) = ln(e − 1); a log-variance parameter at this value gives σ² = 1.
pub const UNIT_VARIANCE_LOGVAR: f64 = 0.541_324_854_612_918_1;

/// `ln(1 + eᶻ)`, without overflow for large `z`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// All trainable state plus the metadata needed to interpret it.
///
/// Matrices are stored row-major: `w_item` is `d × r`, `tag_means` is `s × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub feature_dim: usize,
    pub vocabulary: Vec<String>,
    pub distance_kind: DistanceKind,
    pub margin: f64,
    pub w_item: Vec<f64>,
    pub b_item: Vec<f64>,
    pub item_var_head: Vec<f64>,
    pub item_var_bias: f64,
    pub tag_means: Vec<f64>,
    pub tag_logvars: Vec<f64>,
}

impl ModelParams {
    /// All-zero weights with every variance parameter at [`UNIT_VARIANCE_LOGVAR`].
    pub fn zeros(
        dim: usize,
        feature_dim: usize,
        vocabulary: Vec<String>,
        distance_kind: DistanceKind,
        margin: f64,
    ) -> Result<Self> {
        if dim == 0 || feature_dim == 0 || vocabulary.is_empty() {
            return Err(Error::Config(format!(
                "model dimensions must be positive (d={dim}, r={feature_dim}, s={})",
                vocabulary.len()
            )));
        }
        let s = vocabulary.len();
        Ok(Self {
            dim,
            feature_dim,
            vocabulary,
            distance_kind,
            margin,
            w_item: vec![0.0; dim * feature_dim],
            b_item: vec![0.0; dim],
            item_var_head: vec![0.0; feature_dim],
            item_var_bias: UNIT_VARIANCE_LOGVAR,
            tag_means: vec![0.0; s * dim],
            tag_logvars: vec![UNIT_VARIANCE_LOGVAR; s],
        })
    }

    /// Training initialisation: item projection and tag means uniform in
    /// `±1/√r`, zero item bias and variance head, and unit variances
    /// everywhere.
    pub fn init(
        dim: usize,
        feature_dim: usize,
        vocabulary: Vec<String>,
        distance_kind: DistanceKind,
        margin: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut params = Self::zeros(dim, feature_dim, vocabulary, distance_kind, margin)?;
        let bound = 1.0 / (feature_dim as f64).sqrt();
        for w in params.w_item.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
        for m in params.tag_means.iter_mut() {
            *m = rng.random_range(-bound..bound);
        }
        Ok(params)
    }

    pub fn num_tags(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.vocabulary.iter().position(|t| t == name)
    }

    pub fn tag_mean(&self, tag_id: usize) -> &[f64] {
        &self.tag_means[tag_id * self.dim..(tag_id + 1) * self.dim]
    }

    /// Number of scalars across all trainable arrays.
    pub fn num_parameters(&self) -> usize {
        self.w_item.len()
            + self.b_item.len()
            + self.item_var_head.len()
            + 1
            + self.tag_means.len()
            + self.tag_logvars.len()
    }

    /// Mutable views of every trainable array, in persistence order.
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

    /// Pre-activation of the item variance head.
    pub(crate) fn item_var_logit(&self, features: &[f64]) -> f64 {
        self.item_var_bias
            + self
                .item_var_head
                .iter()
                .zip(features)
                .map(|(h, f)| h * f)
                .sum::<f64>()
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: features.len(),
            });
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidGaussian("features contain non-finite values".into()));
        }
        Ok(())
    }

    /// `N(W f + b, softplus(h·f + c) + VAR_FLOOR)`.
    pub fn encode_item(&self, features: &[f64]) -> Result<SphericalGaussian> {
        self.check_features(features)?;
        let r = self.feature_dim;
        let mean = self
            .w_item
            .chunks_exact(r)
            .zip(&self.b_item)
            .map(|(row, b)| b + row.iter().zip(features).map(|(w, f)| w * f).sum::<f64>())
            .collect();
        SphericalGaussian::new(mean, softplus(self.item_var_logit(features)) + VAR_FLOOR)
    }

    pub fn encode_tag(&self, tag_id: usize) -> Result<SphericalGaussian> {
        if tag_id >= self.num_tags() {
            return Err(Error::UnknownTag(tag_id));
        }
        SphericalGaussian::new(
            self.tag_mean(tag_id).to_vec(),
            softplus(self.tag_logvars[tag_id]) + VAR_FLOOR,
        )
    }

    /// Fuses the tags' natural parameters and maps the centroid back.
    ///
    /// Tags are accumulated in ascending id order, so the result does not
    /// depend on the order of `tag_ids` even in the last bit.
    pub fn encode_tag_set(&self, tag_ids: &[usize]) -> Result<SphericalGaussian> {
        validate_tag_set(tag_ids, self.num_tags())?;
        if let [single] = tag_ids {
            return self.encode_tag(*single);
        }
        let mut sorted = tag_ids.to_vec();
        sorted.sort_unstable();
        let parts = sorted
            .iter()
            .map(|&t| self.encode_tag(t).map(|g| to_natural(&g)))
            .collect::<Result<Vec<_>>>()?;
        from_natural(&fuse(&parts)?)
    }
}

pub(crate) fn validate_tag_set(tag_ids: &[usize], num_tags: usize) -> Result<()> {
    if tag_ids.is_empty() {
        return Err(Error::EmptyTagSet);
    }
    for (i, &t) in tag_ids.iter().enumerate() {
        if t >= num_tags {
            return Err(Error::UnknownTag(t));
        }
        if tag_ids[..i].contains(&t) {
            return Err(Error::DuplicateTag(t));
        }
    }
    Ok(())
}
