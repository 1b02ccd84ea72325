//! Tag variance tables and item-variance correlation matrices.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::encoders::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagVarianceRow {
    pub tag: String,
    pub tag_id: usize,
    pub variance: f64,
    /// Number of items carrying the tag.
    pub count: usize,
}

/// Every tag with its embedded variance and frequency, largest variance
/// first. Equal variances keep vocabulary order.
pub fn tag_variance_report(model: &ModelParams, dataset: &Dataset) -> Result<Vec<TagVarianceRow>> {
    if model.vocabulary != dataset.vocabulary {
        return Err(Error::Config("model and dataset vocabularies differ".into()));
    }
    let counts = dataset.tag_counts();
    let mut rows = (0..model.num_tags())
        .map(|t| {
            Ok(TagVarianceRow {
                tag: model.vocabulary[t].clone(),
                tag_id: t,
                variance: model.encode_tag(t)?.variance(),
                count: counts[t],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.variance.total_cmp(&a.variance));
    Ok(rows)
}

/// Per-item statistics correlated by [`image_variance_correlation`].
pub const CORRELATION_COLUMNS: [&str; 5] = [
    "item_variance",
    "tag_count",
    "mean_tag_frequency",
    "min_tag_frequency",
    "max_tag_frequency",
];

/// Pearson correlations between [`CORRELATION_COLUMNS`]. Entries involving
/// a constant column are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == a)?;
        let j = self.columns.iter().position(|c| c == b)?;
        self.values[i][j]
    }
}

fn pearson_matrix(columns: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let n = columns[0].len() as f64;
    let centred: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centred.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    // a column whose spread is rounding noise relative to its values is constant
    let constant: Vec<bool> = norms
        .iter()
        .zip(&scale)
        .map(|(&norm, &s)| norm <= 1e-12 * s.max(f64::MIN_POSITIVE) * n.sqrt())
        .collect();
    (0..columns.len())
        .map(|i| {
            (0..columns.len())
                .map(|j| {
                    if constant[i] || constant[j] {
                        None
                    } else if i == j {
                        Some(1.0)
                    } else {
                        let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
                        Some((dot / (norms[i] * norms[j])).clamp(-1.0, 1.0))
                    }
                })
                .collect()
        })
        .collect()
}

/// Correlates each item's embedded variance with statistics of its tags:
/// tag count and the mean, minimum and maximum dataset frequency of its tags.
pub fn image_variance_correlation(model: &ModelParams, dataset: &Dataset) -> Result<CorrelationMatrix> {
    if dataset.len() < 3 {
        return Err(Error::TooFewItems {
            needed: 3,
            got: dataset.len(),
        });
    }
    let counts = dataset.tag_counts();
    let mut columns = vec![Vec::with_capacity(dataset.len()); CORRELATION_COLUMNS.len()];
    for item in &dataset.items {
        if item.tags.is_empty() {
            return Err(Error::ItemWithoutTags(item.id.clone()));
        }
        let freqs: Vec<f64> = item
            .tags
            .iter()
            .map(|&t| counts.get(t).copied().map(|c| c as f64).ok_or(Error::UnknownTag(t)))
            .collect::<Result<_>>()?;
        columns[0].push(model.encode_item(&item.features)?.variance());
        columns[1].push(item.tags.len() as f64);
        columns[2].push(freqs.iter().sum::<f64>() / freqs.len() as f64);
        columns[3].push(freqs.iter().copied().fold(f64::INFINITY, f64::min));
        columns[4].push(freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(CorrelationMatrix {
        columns: CORRELATION_COLUMNS.iter().map(|c| c.to_string()).collect(),
        values: pearson_matrix(&columns),
    })
}
