//! Trains on the clustered synthetic dataset and prints tag variances and
//! the item-variance / tag-count correlation.
//!
//! cargo run --release -p dgvse --example synthetic_trend -- [kl|w2|mahalanobis] [seed]

use dgvse::dataset::{generate_synthetic, SyntheticSpec};
use dgvse::{fit, DistanceKind, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind: DistanceKind = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(DistanceKind::Kl);
    let seed: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0);
    let spec = SyntheticSpec {
        n_clusters: 8,
        items_per_cluster: 40,
        feature_dim: 16,
        cluster_spread: env_or("SPREAD", 0.3),
        n_generic_tags: 4,
        n_specific_tags: 8,
        seed,
    };
    let data = generate_synthetic(&spec).unwrap();
    let config = TrainConfig {
        distance_kind: kind,
        embed_dim: 8,
        seed,
        epochs: env_or("EPOCHS", 50),
        learning_rate: env_or("LR", 0.001),
        ..TrainConfig::default()
    };
    let (model, report) = fit(&config, &data).unwrap();
    println!("loss first {:.4} last {:.4}", report.epoch_losses[0], report.final_loss.unwrap());
    let counts = data.tag_counts();
    for (t, name) in data.vocabulary.iter().enumerate() {
        println!("{name:>12} count {:>4} var {:.6}", counts[t], model.encode_tag(t).unwrap().variance());
    }
    let item_vars: Vec<f64> = data.items.iter().map(|it| model.encode_item(&it.features).unwrap().variance()).collect();
    let tag_counts: Vec<f64> = data.items.iter().map(|it| it.tags.len() as f64).collect();
    println!("corr(item var, tag count) = {:.4}", pearson(&item_vars, &tag_counts));
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}
