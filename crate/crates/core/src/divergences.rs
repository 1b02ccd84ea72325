//! Closed-form distances and divergences between spherical Gaussians.
//!
//! With `Δ = μa − μb` in `d` dimensions and variances `sa`, `sb`:
//!
//! | measure | closed form |
//! |---------|-------------|
//! | [`mahalanobis`] | `sqrt(‖Δ‖² / s)`, `s = (sa + sb) / 2` |
//! | [`kl`] | `(d/2) ln(sb/sa) − d/2 + ‖Δ‖²/(2 sb) + (d/2)(sa/sb)` |
//! | [`jeffreys`] | `kl(a, b) + kl(b, a)` |
//! | [`wasserstein2_sq`] | `‖Δ‖² + d (σa − σb)²` |
//!
//! [`oracle`] holds the dense full-covariance forms used to cross-check these.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::SphericalGaussian;

pub mod oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceKind {
    #[serde(rename = "mahalanobis")]
    Mahalanobis,
    #[serde(rename = "kl")]
    Kl,
    #[serde(rename = "jeffreys")]
    Jeffreys,
    #[serde(rename = "w2")]
    Wasserstein2Sq,
}

impl DistanceKind {
    /// The kinds a model may be trained with.
    pub const TRAINABLE: [DistanceKind; 3] =
        [DistanceKind::Mahalanobis, DistanceKind::Kl, DistanceKind::Wasserstein2Sq];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Mahalanobis => "mahalanobis",
            DistanceKind::Kl => "kl",
            DistanceKind::Jeffreys => "jeffreys",
            DistanceKind::Wasserstein2Sq => "w2",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mahalanobis" => Ok(DistanceKind::Mahalanobis),
            "kl" => Ok(DistanceKind::Kl),
            "jeffreys" => Ok(DistanceKind::Jeffreys),
            "w2" => Ok(DistanceKind::Wasserstein2Sq),
            other => Err(Error::Config(format!(
                "unknown distance '{other}' (expected mahalanobis, kl, jeffreys or w2)"
            ))),
        }
    }
}

fn squared_gap(a: &SphericalGaussian, b: &SphericalGaussian) -> f64 {
    a.mean().iter().zip(b.mean()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mahalanobis distance under the joint covariance `½(Σa + Σb)`.
pub fn mahalanobis(a: &SphericalGaussian, b: &SphericalGaussian) -> Result<f64> {
    a.check_same_dim(b)?;
    let joint = 0.5 * (a.variance() + b.variance());
    Ok((squared_gap(a, b) / joint).sqrt())
}

/// `D_KL[a ‖ b]`.
pub fn kl(a: &SphericalGaussian, b: &SphericalGaussian) -> Result<f64> {
    a.check_same_dim(b)?;
    let d = a.dim() as f64;
    let (sa, sb) = (a.variance(), b.variance());
    let value = 0.5 * d * (sb / sa).ln() - 0.5 * d + squared_gap(a, b) / (2.0 * sb) + 0.5 * d * (sa / sb);
    // rounding can leave a tiny negative residue when a ≈ b
    Ok(value.max(0.0))
}

/// Symmetrised KL, `D_KL[a‖b] + D_KL[b‖a]`.
pub fn jeffreys(a: &SphericalGaussian, b: &SphericalGaussian) -> Result<f64> {
    Ok(kl(a, b)? + kl(b, a)?)
}

/// Squared 2-Wasserstein distance.
pub fn wasserstein2_sq(a: &SphericalGaussian, b: &SphericalGaussian) -> Result<f64> {
    a.check_same_dim(b)?;
    let d = a.dim() as f64;
    let gap = a.std_dev() - b.std_dev();
    Ok(squared_gap(a, b) + d * gap * gap)
}

/// Distance between an image-side distribution `a` and a tag-side
/// distribution `b`, as used by the training loss and by ranking.
///
/// For [`DistanceKind::Kl`] this evaluates `D_KL[b ‖ a]`: the inverse
/// variances sit on the image side, as in the training objective.
pub fn distance(kind: DistanceKind, a: &SphericalGaussian, b: &SphericalGaussian) -> Result<f64> {
    match kind {
        DistanceKind::Mahalanobis => mahalanobis(a, b),
        DistanceKind::Kl => kl(b, a),
        DistanceKind::Jeffreys => jeffreys(a, b),
        DistanceKind::Wasserstein2Sq => wasserstein2_sq(a, b),
    }
}

/// Partial derivatives of a distance with respect to both arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGrad {
    pub value: f64,
    pub d_mean_a: Vec<f64>,
    pub d_var_a: f64,
    pub d_mean_b: Vec<f64>,
    pub d_var_b: f64,
}

impl DistanceGrad {
    fn swap(self) -> Self {
        DistanceGrad {
            value: self.value,
            d_mean_a: self.d_mean_b,
            d_var_a: self.d_var_b,
            d_mean_b: self.d_mean_a,
            d_var_b: self.d_var_a,
        }
    }
}

fn kl_grad(p: &SphericalGaussian, q: &SphericalGaussian) -> DistanceGrad {
    let d = p.dim() as f64;
    let (sp, sq) = (p.variance(), q.variance());
    let delta: Vec<f64> = p.mean().iter().zip(q.mean()).map(|(x, y)| x - y).collect();
    let gap2: f64 = delta.iter().map(|x| x * x).sum();
    let value = 0.5 * d * (sq / sp).ln() - 0.5 * d + gap2 / (2.0 * sq) + 0.5 * d * (sp / sq);
    DistanceGrad {
        value,
        d_mean_a: delta.iter().map(|x| x / sq).collect(),
        d_var_a: -0.5 * d / sp + 0.5 * d / sq,
        d_mean_b: delta.iter().map(|x| -x / sq).collect(),
        d_var_b: 0.5 * d / sq - (gap2 + d * sp) / (2.0 * sq * sq),
    }
}

/// Value and gradient of [`distance`], differentiating with respect to the
/// mean vectors and the variance scalars.
///
/// Where the distance is not differentiable (Mahalanobis at zero
/// separation) the gradient is taken as zero.
pub fn distance_grad(
    kind: DistanceKind,
    a: &SphericalGaussian,
    b: &SphericalGaussian,
) -> Result<DistanceGrad> {
    a.check_same_dim(b)?;
    let d = a.dim() as f64;
    let delta: Vec<f64> = a.mean().iter().zip(b.mean()).map(|(x, y)| x - y).collect();
    let gap2: f64 = delta.iter().map(|x| x * x).sum();
    let (sa, sb) = (a.variance(), b.variance());
    Ok(match kind {
        DistanceKind::Mahalanobis => {
            let joint = 0.5 * (sa + sb);
            let value = (gap2 / joint).sqrt();
            if value == 0.0 {
                DistanceGrad {
                    value,
                    d_mean_a: vec![0.0; delta.len()],
                    d_var_a: 0.0,
                    d_mean_b: vec![0.0; delta.len()],
                    d_var_b: 0.0,
                }
            } else {
                let scale = 1.0 / (joint * value);
                let d_var = -gap2 / (4.0 * value * joint * joint);
                DistanceGrad {
                    value,
                    d_mean_a: delta.iter().map(|x| x * scale).collect(),
                    d_var_a: d_var,
                    d_mean_b: delta.iter().map(|x| -x * scale).collect(),
                    d_var_b: d_var,
                }
            }
        }
        DistanceKind::Kl => kl_grad(b, a).swap(),
        DistanceKind::Jeffreys => {
            let ab = kl_grad(a, b);
            let ba = kl_grad(b, a).swap();
            DistanceGrad {
                value: ab.value + ba.value,
                d_mean_a: ab.d_mean_a.iter().zip(&ba.d_mean_a).map(|(x, y)| x + y).collect(),
                d_var_a: ab.d_var_a + ba.d_var_a,
                d_mean_b: ab.d_mean_b.iter().zip(&ba.d_mean_b).map(|(x, y)| x + y).collect(),
                d_var_b: ab.d_var_b + ba.d_var_b,
            }
        }
        DistanceKind::Wasserstein2Sq => {
            let (sd_a, sd_b) = (sa.sqrt(), sb.sqrt());
            let gap = sd_a - sd_b;
            DistanceGrad {
                value: gap2 + d * gap * gap,
                d_mean_a: delta.iter().map(|x| 2.0 * x).collect(),
                d_var_a: d * gap / sd_a,
                d_mean_b: delta.iter().map(|x| -2.0 * x).collect(),
                d_var_b: -d * gap / sd_b,
            }
        }
    })
}
