#![allow(dead_code)]

pub mod queries;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgvse::dataset::SyntheticSpec;
use dgvse::{fit, generate_synthetic, save_dataset, save_model, DistanceKind, TrainConfig};
use dgvse_cli::payloads::ServiceState;
use tempfile::TempDir;

/// A small trained model and its dataset, on disk and in memory.
pub struct Fixture {
    pub dir: TempDir,
    pub model: PathBuf,
    pub data: PathBuf,
    pub state: ServiceState,
}

pub fn spec() -> SyntheticSpec {
    SyntheticSpec {
        n_clusters: 4,
        items_per_cluster: 12,
        feature_dim: 6,
        cluster_spread: 0.3,
        n_generic_tags: 2,
        n_specific_tags: 4,
        seed: 11,
    }
}

pub fn fixture(kind: DistanceKind) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let dataset = generate_synthetic(&spec()).unwrap();
    let cfg = TrainConfig {
        distance_kind: kind,
        embed_dim: 4,
        epochs: 10,
        learning_rate: 0.01,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&cfg, &dataset).unwrap();
    let model_path = dir.path().join("model.dgvse");
    let data_path = dir.path().join("data.jsonl");
    save_model(&model, &model_path).unwrap();
    save_dataset(&dataset, &data_path).unwrap();
    Fixture {
        model: model_path,
        data: data_path,
        state: ServiceState::new(model, dataset).unwrap(),
        dir,
    }
}

pub fn dgvse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgvse")).args(args).output().unwrap()
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}
