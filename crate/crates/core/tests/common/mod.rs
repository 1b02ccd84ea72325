#![allow(dead_code)]

use dgvse::dataset::{Dataset, SyntheticSpec};
use dgvse::training::Sample;
use dgvse::{generate_synthetic, DistanceKind, ModelParams};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random model with spread-out variance parameters.
pub fn random_model(rng: &mut ChaCha8Rng, kind: DistanceKind, d: usize, r: usize, s: usize) -> ModelParams {
    let vocab = (0..s).map(|i| format!("t{i}")).collect();
    let mut p = ModelParams::init(d, r, vocab, kind, 0.2, rng).unwrap();
    p.b_item.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    p.item_var_head.iter_mut().for_each(|h| *h = rng.random_range(-0.5..0.5));
    p.item_var_bias = rng.random_range(-1.0..1.0);
    p.tag_logvars.iter_mut().for_each(|l| *l = rng.random_range(-1.5..1.5));
    p
}

/// `n` feature vectors and tag sets of 1 to 3 distinct tags.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, r: usize, s: usize) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let features = (0..n).map(|_| (0..r).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let tags = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=3.min(s));
            index::sample(rng, s, k).into_vec()
        })
        .collect();
    (features, tags)
}

pub fn as_samples<'a>(features: &'a [Vec<f64>], tags: &'a [Vec<usize>]) -> Vec<Sample<'a>> {
    features
        .iter()
        .zip(tags)
        .map(|(f, t)| Sample { features: f, tags: t })
        .collect()
}

/// The 8-cluster synthetic corpus used by the end-to-end checks.
pub fn trend_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_clusters: 8,
        items_per_cluster: 40,
        feature_dim: 16,
        cluster_spread: 0.3,
        n_generic_tags: 4,
        n_specific_tags: 8,
        seed,
    }
}

pub fn trend_dataset(seed: u64) -> Dataset {
    generate_synthetic(&trend_spec(seed)).unwrap()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Independent re-computation of encodings and distances from raw
/// parameters, used to cross-check ranked outputs.
pub mod oracle {
    use dgvse::{DistanceKind, ModelParams};

    #[derive(Debug, Clone)]
    pub struct G {
        pub mean: Vec<f64>,
        pub var: f64,
    }

    fn softplus(z: f64) -> f64 {
        if z > 30.0 {
            z + (-z).exp()
        } else {
            z.exp().ln_1p()
        }
    }

    pub fn item(p: &ModelParams, f: &[f64]) -> G {
        let r = p.feature_dim;
        let mean = (0..p.dim)
            .map(|k| p.b_item[k] + (0..r).map(|j| p.w_item[k * r + j] * f[j]).sum::<f64>())
            .collect();
        let logit = p.item_var_bias + (0..r).map(|j| p.item_var_head[j] * f[j]).sum::<f64>();
        G {
            mean,
            var: softplus(logit) + 1e-8,
        }
    }

    pub fn tag(p: &ModelParams, t: usize) -> G {
        G {
            mean: p.tag_means[t * p.dim..(t + 1) * p.dim].to_vec(),
            var: softplus(p.tag_logvars[t]) + 1e-8,
        }
    }

    /// Precision-weighted mean and harmonic-mean variance.
    pub fn tag_set(p: &ModelParams, tags: &[usize]) -> G {
        let parts: Vec<G> = tags.iter().map(|&t| tag(p, t)).collect();
        let total: f64 = parts.iter().map(|g| 1.0 / g.var).sum();
        let mean = (0..p.dim)
            .map(|k| parts.iter().map(|g| g.mean[k] / g.var).sum::<f64>() / total)
            .collect();
        G {
            mean,
            var: parts.len() as f64 / total,
        }
    }

    /// `base` shifted by `(Σ add − Σ remove) / n` in (μ/σ², −1/2σ²) coordinates.
    pub fn algebra(p: &ModelParams, base: &G, n: usize, remove: &[usize], add: &[usize]) -> (G, bool) {
        let mut t1: Vec<f64> = base.mean.iter().map(|m| m / base.var).collect();
        let mut t2 = -0.5 / base.var;
        for (tags, sign) in [(add, 1.0), (remove, -1.0)] {
            for &t in tags {
                let g = tag(p, t);
                for k in 0..p.dim {
                    t1[k] += sign * g.mean[k] / g.var / n as f64;
                }
                t2 += sign * (-0.5 / g.var) / n as f64;
            }
        }
        let degenerate = t2 > -1e-8;
        if degenerate {
            t2 = -1e-8;
        }
        let var = -0.5 / t2;
        (
            G {
                mean: t1.iter().map(|x| x * var).collect(),
                var: var.max(1e-8),
            },
            degenerate,
        )
    }

    fn sq(a: &G, b: &G) -> f64 {
        a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum()
    }

    /// `item` is the first argument of the model distance, `query` the second.
    pub fn distance(kind: DistanceKind, item: &G, query: &G) -> f64 {
        let d = item.mean.len() as f64;
        let kl = |p: &G, q: &G| 0.5 * (d * (q.var / p.var).ln() - d + sq(p, q) / q.var + d * p.var / q.var);
        match kind {
            DistanceKind::Mahalanobis => (2.0 * sq(item, query) / (item.var + query.var)).sqrt(),
            DistanceKind::Kl => kl(query, item).max(0.0),
            DistanceKind::Jeffreys => kl(item, query) + kl(query, item),
            DistanceKind::Wasserstein2Sq => sq(item, query) + d * (item.var.sqrt() - query.var.sqrt()).powi(2),
        }
    }

    /// Brute-force ranking: (id, score) sorted by score desc then id asc.
    pub fn rank(scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
        let mut v = scored;
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}
