//! Spherical Gaussians and their exponential-family coordinates.
//!
//! A spherical Gaussian `N(μ, σ²I)` has two affine coordinate systems:
//!
//! | coordinates | first component | second component |
//! |-------------|-----------------|------------------|
//! | natural θ | `μ / σ²` | `-1 / (2σ²)` |
//! | expectation η | `μ` | `μ² + σ²` (per coordinate) |
//!
//! Sets of distributions are combined linearly only in natural coordinates:
//! [`fuse`] takes the centroid of the θ vectors and [`from_natural`] maps the
//! centroid back to a mean and variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest variance any constructed distribution may carry.
pub const VAR_FLOOR: f64 = 1e-8;

/// `theta2` must stay at or below `-THETA2_CEIL` to describe a distribution.
pub const THETA2_CEIL: f64 = 1e-8;

/// `N(mean, variance · I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalGaussian {
    mean: Vec<f64>,
    variance: f64,
}

impl SphericalGaussian {
    /// Builds a distribution, raising tiny positive variances to [`VAR_FLOOR`].
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidGaussian("mean must have at least one entry".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidGaussian("mean has non-finite entries".into()));
        }
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidGaussian(format!(
                "variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self {
            mean,
            variance: variance.max(VAR_FLOOR),
        })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim.max(1)],
            variance: 1.0,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// σ, the per-coordinate standard deviation.
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }
}

/// Natural coordinates `(θ¹, θ²)` with θ² stored as the scalar on the diagonal
/// of `-(1/2σ²) I_d`.
///
/// Values of this type are free to leave the distribution manifold while
/// doing algebra on them; [`from_natural`] is where validity is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams {
    pub theta1: Vec<f64>,
    pub theta2: f64,
}

impl NaturalParams {
    pub fn dim(&self) -> usize {
        self.theta1.len()
    }

    /// True when the coordinates map back to a distribution.
    pub fn is_valid(&self) -> bool {
        self.theta2 <= -THETA2_CEIL && self.theta1.iter().all(|t| t.is_finite())
    }
}

/// Expectation coordinates: `η¹ = μ` and `η² = μ² + σ²`, per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationParams {
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
}

pub fn to_natural(g: &SphericalGaussian) -> NaturalParams {
    let precision = 1.0 / g.variance;
    NaturalParams {
        theta1: g.mean.iter().map(|m| m * precision).collect(),
        theta2: -0.5 * precision,
    }
}

pub fn from_natural(n: &NaturalParams) -> Result<SphericalGaussian> {
    if !(n.theta2 <= -THETA2_CEIL) {
        return Err(Error::DegenerateNaturalParams { theta2: n.theta2 });
    }
    let variance = -0.5 / n.theta2;
    let mean = n.theta1.iter().map(|t| variance * t).collect();
    SphericalGaussian::new(mean, variance)
}

/// Unweighted centroid of a set of natural parameters.
pub fn fuse(parts: &[NaturalParams]) -> Result<NaturalParams> {
    let first = parts.first().ok_or(Error::EmptyFusionSet)?;
    let dim = first.dim();
    let mut theta1 = vec![0.0; dim];
    let mut theta2 = 0.0;
    for p in parts {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
        for (acc, t) in theta1.iter_mut().zip(&p.theta1) {
            *acc += t;
        }
        theta2 += p.theta2;
    }
    if parts.len() == 1 {
        return Ok(first.clone());
    }
    let n = parts.len() as f64;
    theta1.iter_mut().for_each(|t| *t /= n);
    Ok(NaturalParams {
        theta1,
        theta2: theta2 / n,
    })
}

pub fn to_expectation(g: &SphericalGaussian) -> ExpectationParams {
    ExpectationParams {
        eta1: g.mean.clone(),
        eta2: g.mean.iter().map(|m| m * m + g.variance).collect(),
    }
}
