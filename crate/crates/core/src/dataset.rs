//! Datasets of items with precomputed features and tag lists.
//!
//! On disk a dataset is UTF-8 text with one JSON object per line:
//!
//! ```text
//! {"id":"item-0001","features":[0.12,-0.5,...],"tags":["denim","casual"]}
//! ```
//!
//! The tag vocabulary is built in order of first appearance.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub features: Vec<f64>,
    /// Indices into [`Dataset::vocabulary`].
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<Item>,
    pub vocabulary: Vec<String>,
    pub feature_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    features: Vec<f64>,
    tags: Vec<String>,
}

/// Incrementally validates records and assigns tag ids.
struct Builder {
    items: Vec<Item>,
    vocabulary: Vec<String>,
    tag_index: HashMap<String, usize>,
    ids: HashSet<String>,
    feature_dim: Option<usize>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            items: Vec::new(),
            vocabulary: Vec::new(),
            tag_index: HashMap::new(),
            ids: HashSet::new(),
            feature_dim: None,
        }
    }

    fn push(&mut self, line: usize, record: Record) -> Result<()> {
        let expected = *self.feature_dim.get_or_insert(record.features.len());
        if record.features.len() != expected || expected == 0 {
            return Err(Error::InconsistentFeatureLength {
                line,
                expected,
                actual: record.features.len(),
            });
        }
        if record.features.iter().any(|f| !f.is_finite()) {
            return Err(Error::ParseError {
                line,
                message: "features must be finite numbers".into(),
            });
        }
        if record.tags.is_empty() {
            return Err(Error::EmptyTagsList(line));
        }
        if !self.ids.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        let mut tags = Vec::with_capacity(record.tags.len());
        for name in record.tags {
            let next = self.vocabulary.len();
            let id = *self.tag_index.entry(name.clone()).or_insert_with(|| next);
            if id == next {
                self.vocabulary.push(name);
            }
            if tags.contains(&id) {
                return Err(Error::ParseError {
                    line,
                    message: format!("tag '{}' listed twice", self.vocabulary[id]),
                });
            }
            tags.push(id);
        }
        self.items.push(Item {
            id: record.id,
            features: record.features,
            tags,
        });
        Ok(())
    }

    fn finish(self) -> Result<Dataset> {
        let feature_dim = self.feature_dim.ok_or(Error::EmptyDataset)?;
        Ok(Dataset {
            items: self.items,
            vocabulary: self.vocabulary,
            feature_dim,
        })
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_tags(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.vocabulary.iter().position(|t| t == name)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id == id)
    }

    /// Number of items carrying each tag.
    pub fn tag_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_tags()];
        for item in &self.items {
            for &t in &item.tags {
                counts[t] += 1;
            }
        }
        counts
    }

    /// Parses line-delimited records. Blank lines are ignored.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut builder = Builder::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line).map_err(|e| Error::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
            builder.push(line_no, record)?;
        }
        builder.finish()
    }

    pub fn write_to(&self, mut writer: impl Write) -> Result<()> {
        for item in &self.items {
            let record = Record {
                id: item.id.clone(),
                features: item.features.clone(),
                tags: item.tags.iter().map(|&t| self.vocabulary[t].clone()).collect(),
            };
            serde_json::to_writer(&mut writer, &record).map_err(|e| Error::Io(e.to_string()))?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    Dataset::from_reader(BufReader::new(file))
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    dataset.write_to(BufWriter::new(file))
}

/// Parameters of the clustered synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub items_per_cluster: usize,
    pub feature_dim: usize,
    pub cluster_spread: f64,
    pub n_generic_tags: usize,
    pub n_specific_tags: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.items_per_cluster == 0 || self.feature_dim == 0 {
            return Err(Error::Config("synthetic counts must be at least 1".into()));
        }
        if self.n_specific_tags == 0 {
            return Err(Error::Config("at least one specific tag is required".into()));
        }
        if !(self.cluster_spread > 0.0) {
            return Err(Error::Config("cluster_spread must be positive".into()));
        }
        Ok(())
    }

    pub fn specific_tag_name(k: usize) -> String {
        format!("specific-{k:02}")
    }

    pub fn generic_tag_name(k: usize) -> String {
        format!("generic-{k:02}")
    }

    /// Cluster that owns specific tag `k`.
    pub fn cluster_of_specific(&self, k: usize) -> usize {
        k % self.n_clusters
    }
}

/// Id of the `i`-th item of cluster `c`.
pub fn synthetic_item_id(cluster: usize, index: usize) -> String {
    format!("c{cluster:02}-{index:04}")
}

/// Chance that an item carries a given generic tag.
pub const GENERIC_TAG_RATE: f64 = 0.7;

/// Draws a clustered dataset.
///
/// Cluster centres lie on the unit sphere. Every item of cluster `c` carries
/// the specific tag of `c` (specific tags beyond the cluster count are
/// spread round-robin, so a cluster may own several). Generic tags are
/// attached to each item independently with probability
/// [`GENERIC_TAG_RATE`], whatever its cluster, and every cluster holds at
/// least one item with each generic tag. Generic tags are thus frequent but
/// carry no cluster information. An item's features are its centre plus
/// isotropic noise of scale `cluster_spread`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.feature_dim;

    let centers: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| loop {
            let v: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();

    let mut builder = Builder::new();
    let mut line = 0;
    for (c, center) in centers.iter().enumerate() {
        let mut specifics: Vec<String> = (0..spec.n_specific_tags)
            .filter(|&k| spec.cluster_of_specific(k) == c)
            .map(SyntheticSpec::specific_tag_name)
            .collect();
        if specifics.is_empty() {
            // fewer specific tags than clusters: share one round-robin
            specifics.push(SyntheticSpec::specific_tag_name(c % spec.n_specific_tags));
        }
        let features: Vec<Vec<f64>> = (0..spec.items_per_cluster)
            .map(|_| {
                center
                    .iter()
                    .map(|m| m + spec.cluster_spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let mut generic = vec![vec![false; spec.n_generic_tags]; spec.items_per_cluster];
        for g in 0..spec.n_generic_tags {
            for row in generic.iter_mut() {
                row[g] = rng.random_bool(GENERIC_TAG_RATE);
            }
            if !generic.iter().any(|row| row[g]) {
                let anchor = rng.random_range(0..spec.items_per_cluster);
                generic[anchor][g] = true;
            }
        }
        for (i, (features, flags)) in features.into_iter().zip(generic).enumerate() {
            let mut tags = specifics.clone();
            tags.extend(
                flags
                    .iter()
                    .enumerate()
                    .filter(|(_, &on)| on)
                    .map(|(g, _)| SyntheticSpec::generic_tag_name(g)),
            );
            line += 1;
            builder.push(
                line,
                Record {
                    id: synthetic_item_id(c, i),
                    features,
                    tags,
                },
            )?;
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_records_in_first_appearance_order() {
        let text = r#"{"id":"a","features":[1.0,2.0],"tags":["red","skirt"]}
{"id":"b","features":[0.5,-1.0],"tags":["blue","red"]}
"#;
        let ds = Dataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.vocabulary, vec!["red", "skirt", "blue"]);
        assert_eq!(ds.items[1].tags, vec![2, 0]);
        assert_eq!(ds.feature_dim, 2);
    }

    #[test]
    fn reports_inconsistent_features_with_line() {
        let text = r#"{"id":"a","features":[1,2,3,4],"tags":["x"]}
{"id":"b","features":[1,2,3],"tags":["x"]}"#;
        assert_eq!(
            Dataset::from_reader(text.as_bytes()).unwrap_err(),
            Error::InconsistentFeatureLength { line: 2, expected: 4, actual: 3 }
        );
    }

    #[test]
    fn reports_other_errors() {
        let bad_json = "{\"id\":\"a\",\"features\":[1],\"tags\":[\"x\"]}\nnot json";
        assert!(matches!(
            Dataset::from_reader(bad_json.as_bytes()).unwrap_err(),
            Error::ParseError { line: 2, .. }
        ));
        let dup = "{\"id\":\"a\",\"features\":[1],\"tags\":[\"x\"]}\n{\"id\":\"a\",\"features\":[2],\"tags\":[\"y\"]}";
        assert_eq!(Dataset::from_reader(dup.as_bytes()).unwrap_err(), Error::DuplicateId("a".into()));
        let empty = "{\"id\":\"a\",\"features\":[1],\"tags\":[]}";
        assert_eq!(Dataset::from_reader(empty.as_bytes()).unwrap_err(), Error::EmptyTagsList(1));
        assert_eq!(Dataset::from_reader("".as_bytes()).unwrap_err(), Error::EmptyDataset);
    }

    fn spec(seed: u64) -> SyntheticSpec {
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

    #[test]
    fn single_cluster_single_tag() {
        let ds = generate_synthetic(&SyntheticSpec {
            n_clusters: 1,
            items_per_cluster: 5,
            feature_dim: 3,
            cluster_spread: 0.1,
            n_generic_tags: 0,
            n_specific_tags: 1,
            seed: 1,
        })
        .unwrap();
        assert_eq!(ds.vocabulary, vec!["specific-00"]);
        assert!(ds.items.iter().all(|it| it.tags == vec![0]));
    }

    #[test]
    fn generic_tags_span_half_the_clusters() {
        for (seed, per) in (0..10).zip([1, 2, 40].into_iter().cycle()) {
            let s = SyntheticSpec {
                items_per_cluster: per,
                ..spec(seed)
            };
            let ds = generate_synthetic(&s).unwrap();
            for g in 0..s.n_generic_tags {
                let id = ds.tag_id(&SyntheticSpec::generic_tag_name(g)).unwrap();
                let clusters: HashSet<usize> = ds
                    .items
                    .iter()
                    .enumerate()
                    .filter(|(_, it)| it.tags.contains(&id))
                    .map(|(i, _)| i / s.items_per_cluster)
                    .collect();
                assert!(clusters.len() >= s.n_clusters.div_ceil(2), "seed {seed} tag {g}");
            }
        }
    }

    #[test]
    fn every_item_has_its_specific_tag() {
        let s = spec(3);
        let ds = generate_synthetic(&s).unwrap();
        for (i, item) in ds.items.iter().enumerate() {
            let c = i / s.items_per_cluster;
            let own = ds.tag_id(&SyntheticSpec::specific_tag_name(c)).unwrap();
            assert_eq!(item.tags[0], own);
            assert!(item.features.iter().all(|f| f.is_finite()));
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_synthetic(&spec(42)).unwrap().write_to(&mut a).unwrap();
        generate_synthetic(&spec(42)).unwrap().write_to(&mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_synthetic(&spec(43)).unwrap().write_to(&mut c).unwrap();
        assert_ne!(a, c);
    }
}
