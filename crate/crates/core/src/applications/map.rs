//! Two-dimensional maps of tag means.

use serde::{Deserialize, Serialize};

use crate::encoders::{validate_tag_set, ModelParams};
use crate::error::{Error, Result};

/// Convergence tolerance on successive power-iteration directions.
pub const POWER_ITERATION_TOL: f64 = 1e-9;

const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projector {
    #[default]
    Pca,
}

impl std::str::FromStr for Projector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Projector::Pca),
            other => Err(Error::Config(format!("unknown projector '{other}' (expected pca)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub tag: String,
    pub tag_id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapExport {
    pub projector: Projector,
    pub points: Vec<MapPoint>,
    /// Share of the total variance of the centred means captured by the two
    /// axes; `None` when every mean coincides.
    pub explained_variance_ratio: Option<f64>,
}

fn mat_vec(c: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    c.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Leading eigenpair of the symmetric PSD matrix `c`, restricted to the
/// orthogonal complement of `exclude`.
fn power_iteration(c: &[Vec<f64>], exclude: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let d = c.len();
    let project = |v: &mut Vec<f64>| {
        for u in exclude {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
        }
    };
    // start from the coordinate axis with the most variance left
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| c[b][b].total_cmp(&c[a][a]).then(a.cmp(&b)));
    let mut v = vec![0.0; d];
    for &j in &order {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        project(&mut e);
        if normalise(&mut e) > 1e-6 {
            v = e;
            break;
        }
    }

    for _ in 0..MAX_ITERATIONS {
        let mut next = mat_vec(c, &v);
        project(&mut next);
        if normalise(&mut next) <= f64::MIN_POSITIVE {
            break;
        }
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = next;
        if delta < POWER_ITERATION_TOL {
            break;
        }
    }
    let lambda = dot(&v, &mat_vec(c, &v)).max(0.0);
    (lambda, v)
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Projects the means of `tag_ids` onto their top two principal axes.
///
/// Axes come from power iteration with deflation on the covariance of the
/// centred means. Each axis is signed so its first nonzero loading is
/// positive.
pub fn export_map(model: &ModelParams, tag_ids: &[usize], projector: Projector) -> Result<MapExport> {
    let Projector::Pca = projector;
    if tag_ids.len() < 2 {
        return Err(Error::TooFewTags {
            needed: 2,
            got: tag_ids.len(),
        });
    }
    validate_tag_set(tag_ids, model.num_tags())?;
    let d = model.dim;
    if d < 2 {
        return Err(Error::Config(format!("a 2-d map needs embedding dimension ≥ 2, model has {d}")));
    }

    let n = tag_ids.len() as f64;
    let mut centre = vec![0.0; d];
    for &t in tag_ids {
        centre.iter_mut().zip(model.tag_mean(t)).for_each(|(c, m)| *c += m / n);
    }
    let centred: Vec<Vec<f64>> = tag_ids
        .iter()
        .map(|&t| model.tag_mean(t).iter().zip(&centre).map(|(m, c)| m - c).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for row in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += row[i] * row[j] / n;
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();

    let (l1, mut v1) = power_iteration(&cov, &[]);
    fix_sign(&mut v1);
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, mut v2) = power_iteration(&deflated, std::slice::from_ref(&v1));
    fix_sign(&mut v2);

    let points = tag_ids
        .iter()
        .zip(&centred)
        .map(|(&t, row)| MapPoint {
            tag: model.vocabulary[t].clone(),
            tag_id: t,
            x: dot(row, &v1),
            y: dot(row, &v2),
        })
        .collect();
    Ok(MapExport {
        projector,
        points,
        explained_variance_ratio: (trace > 0.0).then(|| ((l1 + l2) / trace).min(1.0)),
    })
}
