//! Tag-algebra retrieval and relevance re-ordering.
//!
//! A query starts from a base distribution (an item's encoding or a fused
//! tag set) and edits it in natural-parameter coordinates:
//!
//! ```text
//! Θ_q = Θ_base + (ΣΘ_add − ΣΘ_remove) / |T_base|
//! ```
//!
//! where `|T_base|` is the size of the base tag set (for an item base, the
//! number of tags the item carries). If the edit drives θ₂ above
//! `−THETA2_CEIL` it is clamped there and the result is flagged
//! `degenerate`.
//!
//! Results are sorted by score `−distance(kind, item, query)` descending,
//! ties broken by ascending item id.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::divergences::distance;
use crate::encoders::ModelParams;
use crate::error::{Error, Result};
use crate::gaussian::{from_natural, to_natural, NaturalParams, SphericalGaussian, THETA2_CEIL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    /// Edit the base in natural-parameter space.
    #[default]
    Algebra,
    /// Re-fuse the edited tag set `(T_base \ remove) ∪ add` from scratch.
    Refuse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    /// Dataset index of the base item.
    Item(usize),
    Tags(Vec<usize>),
}

/// A validated query over tag ids and dataset indices.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub base: Base,
    pub remove: Vec<usize>,
    pub add: Vec<usize>,
    pub k: usize,
    pub mode: QueryMode,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidQuery {
        field: field.into(),
        message: message.into(),
    }
}

fn check_tag_list(field: &str, tags: &[usize], num_tags: usize) -> Result<()> {
    for (i, &t) in tags.iter().enumerate() {
        if t >= num_tags {
            return Err(Error::UnknownTag(t));
        }
        if tags[..i].contains(&t) {
            return Err(invalid(field, format!("tag {t} is listed twice")));
        }
    }
    Ok(())
}

impl QuerySpec {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let num_tags = dataset.num_tags();
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        check_tag_list("remove", &self.remove, num_tags)?;
        check_tag_list("add", &self.add, num_tags)?;
        if let Some(t) = self.add.iter().find(|t| self.remove.contains(t)) {
            return Err(invalid("add", format!("tag {t} is both added and removed")));
        }
        let base_tags = match &self.base {
            Base::Item(i) => {
                let item = dataset
                    .items
                    .get(*i)
                    .ok_or_else(|| Error::UnknownId(format!("#{i}")))?;
                &item.tags
            }
            Base::Tags(tags) => {
                if tags.is_empty() {
                    return Err(invalid("base", "tag list is empty"));
                }
                check_tag_list("base", tags, num_tags)?;
                tags
            }
        };
        let requires_tags = matches!(self.base, Base::Tags(_)) || self.mode == QueryMode::Refuse;
        if requires_tags && base_tags.iter().all(|t| self.remove.contains(t)) && self.add.is_empty() {
            return Err(invalid("remove", "no tags left after the edits"));
        }
        Ok(())
    }

    /// The edited tag set `(T_base \ remove) ∪ add` in ascending id order.
    fn edited_tags(&self, base_tags: &[usize]) -> Vec<usize> {
        let mut tags: Vec<usize> = base_tags
            .iter()
            .copied()
            .filter(|t| !self.remove.contains(t))
            .chain(self.add.iter().copied())
            .collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }
}

/// The query distribution and whether θ₂ had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGaussian {
    pub gaussian: SphericalGaussian,
    pub degenerate: bool,
}

/// Builds the query distribution of a validated `spec`.
pub fn build_query(model: &ModelParams, dataset: &Dataset, spec: &QuerySpec) -> Result<QueryGaussian> {
    spec.validate(dataset)?;
    let (base, base_tags) = match &spec.base {
        Base::Item(i) => {
            let item = &dataset.items[*i];
            (model.encode_item(&item.features)?, item.tags.as_slice())
        }
        Base::Tags(tags) => (model.encode_tag_set(tags)?, tags.as_slice()),
    };
    // with nothing to edit the query is the base itself, in either mode
    if spec.add.is_empty() && spec.remove.is_empty() {
        return Ok(QueryGaussian {
            gaussian: base,
            degenerate: false,
        });
    }
    if spec.mode == QueryMode::Refuse {
        let gaussian = model.encode_tag_set(&spec.edited_tags(base_tags))?;
        return Ok(QueryGaussian {
            gaussian,
            degenerate: false,
        });
    }

    let mut theta = to_natural(&base);
    let scale = 1.0 / base_tags.len().max(1) as f64;
    let mut apply = |tags: &[usize], sign: f64| -> Result<()> {
        for &t in tags {
            let part = to_natural(&model.encode_tag(t)?);
            for (acc, v) in theta.theta1.iter_mut().zip(&part.theta1) {
                *acc += sign * scale * v;
            }
            theta.theta2 += sign * scale * part.theta2;
        }
        Ok(())
    };
    apply(&spec.add, 1.0)?;
    apply(&spec.remove, -1.0)?;

    let degenerate = !(theta.theta2 <= -THETA2_CEIL);
    if degenerate {
        theta = NaturalParams {
            theta1: theta.theta1,
            theta2: -THETA2_CEIL,
        };
    }
    Ok(QueryGaussian {
        gaussian: from_natural(&theta)?,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

/// Ranked items, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub results: Vec<ScoredItem>,
    pub degenerate: bool,
}

fn by_score_then_id(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

fn check_compatible(model: &ModelParams, dataset: &Dataset) -> Result<()> {
    if model.vocabulary != dataset.vocabulary {
        return Err(Error::Config("model and dataset vocabularies differ".into()));
    }
    if model.feature_dim != dataset.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            actual: dataset.feature_dim,
        });
    }
    Ok(())
}

/// A model paired with a dataset and every item's encoding.
#[derive(Debug, Clone)]
pub struct Index<'a> {
    pub model: &'a ModelParams,
    pub dataset: &'a Dataset,
    items: Cow<'a, [SphericalGaussian]>,
}

impl<'a> Index<'a> {
    pub fn new(model: &'a ModelParams, dataset: &'a Dataset) -> Result<Self> {
        check_compatible(model, dataset)?;
        let items: Vec<SphericalGaussian> = dataset
            .items
            .iter()
            .map(|it| model.encode_item(&it.features))
            .collect::<Result<_>>()?;
        Ok(Index {
            model,
            dataset,
            items: Cow::Owned(items),
        })
    }

    /// Reuses encodings produced earlier by [`Index::item_gaussians`].
    pub fn with_items(model: &'a ModelParams, dataset: &'a Dataset, items: &'a [SphericalGaussian]) -> Result<Self> {
        check_compatible(model, dataset)?;
        if items.len() != dataset.len() {
            return Err(Error::DimensionMismatch {
                expected: dataset.len(),
                actual: items.len(),
            });
        }
        if let Some(g) = items.iter().find(|g| g.dim() != model.dim) {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                actual: g.dim(),
            });
        }
        Ok(Index {
            model,
            dataset,
            items: Cow::Borrowed(items),
        })
    }

    pub fn item_gaussians(&self) -> &[SphericalGaussian] {
        &self.items
    }

    fn rank(&self, indices: impl Iterator<Item = usize>, target: &SphericalGaussian, k: usize) -> Result<Vec<ScoredItem>> {
        let kind = self.model.distance_kind;
        let mut scored = indices
            .map(|i| {
                let d = distance(kind, &self.items[i], target)?;
                Ok(ScoredItem {
                    id: self.dataset.items[i].id.clone(),
                    // avoid a negative zero on the wire
                    score: if d == 0.0 { 0.0 } else { -d },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(by_score_then_id);
        scored.truncate(k);
        Ok(scored)
    }

    pub fn retrieve(&self, spec: &QuerySpec) -> Result<RankedResult> {
        let query = build_query(self.model, self.dataset, spec)?;
        Ok(RankedResult {
            results: self.rank(0..self.items.len(), &query.gaussian, spec.k)?,
            degenerate: query.degenerate,
        })
    }

    /// Ranks `subset` (dataset indices; all items carrying the tag when
    /// `None`) by relevance to `tag_id`.
    pub fn reorder(&self, tag_id: usize, subset: Option<&[usize]>, k: Option<usize>) -> Result<RankedResult> {
        let tag = self.model.encode_tag(tag_id)?;
        let indices: Vec<usize> = match subset {
            Some(s) => {
                let mut seen = HashSet::new();
                for &i in s {
                    if i >= self.items.len() {
                        return Err(Error::UnknownId(format!("#{i}")));
                    }
                    if !seen.insert(i) {
                        return Err(invalid("subset", format!("'{}' is listed twice", self.dataset.items[i].id)));
                    }
                }
                s.to_vec()
            }
            None => (0..self.items.len())
                .filter(|&i| self.dataset.items[i].tags.contains(&tag_id))
                .collect(),
        };
        if indices.is_empty() {
            return Err(Error::EmptySubset);
        }
        if k == Some(0) {
            return Err(invalid("k", "must be at least 1"));
        }
        Ok(RankedResult {
            results: self.rank(indices.into_iter(), &tag, k.unwrap_or(usize::MAX))?,
            degenerate: false,
        })
    }
}

pub fn retrieve(model: &ModelParams, dataset: &Dataset, spec: &QuerySpec) -> Result<RankedResult> {
    Index::new(model, dataset)?.retrieve(spec)
}

pub fn reorder(model: &ModelParams, dataset: &Dataset, tag_id: usize, subset: Option<&[usize]>) -> Result<RankedResult> {
    Index::new(model, dataset)?.reorder(tag_id, subset, None)
}

/// Base of a query as sent over the wire: exactly one of `item` or `tags`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

/// A query with item ids and tag names, as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub base: BaseRequest,
    #[serde(default)]
    pub remove: Vec<String>,
    #[serde(default)]
    pub add: Vec<String>,
    pub k: usize,
    #[serde(default)]
    pub mode: QueryMode,
}

fn tag_ids(dataset: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| dataset.tag_id(n).ok_or_else(|| Error::UnknownTagName(n.clone())))
        .collect()
}

impl QueryRequest {
    /// Resolves names against `dataset` and validates the result.
    pub fn resolve(&self, dataset: &Dataset) -> Result<QuerySpec> {
        let base = match (&self.base.item, &self.base.tags) {
            (Some(id), None) => Base::Item(dataset.item_index(id).ok_or_else(|| Error::UnknownId(id.clone()))?),
            (None, Some(tags)) => Base::Tags(tag_ids(dataset, tags)?),
            _ => return Err(invalid("base", "give exactly one of 'item' or 'tags'")),
        };
        let spec = QuerySpec {
            base,
            remove: tag_ids(dataset, &self.remove)?,
            add: tag_ids(dataset, &self.add)?,
            k: self.k,
            mode: self.mode,
        };
        spec.validate(dataset)?;
        Ok(spec)
    }

    /// The request field an error from [`QueryRequest::resolve`] refers to.
    pub fn field_of(&self, error: &Error) -> Option<String> {
        match error {
            Error::InvalidQuery { field, .. } => Some(field.clone()),
            Error::UnknownId(_) => Some("base.item".into()),
            Error::UnknownTagName(name) => {
                if self.base.tags.as_ref().is_some_and(|t| t.contains(name)) {
                    Some("base.tags".into())
                } else if self.remove.contains(name) {
                    Some("remove".into())
                } else {
                    Some("add".into())
                }
            }
            _ => None,
        }
    }
}

/// A re-ordering request as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReorderRequest {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl ReorderRequest {
    pub fn run(&self, index: &Index<'_>) -> Result<RankedResult> {
        let tag = index
            .dataset
            .tag_id(&self.tag)
            .ok_or_else(|| Error::UnknownTagName(self.tag.clone()))?;
        let subset = self
            .subset
            .as_ref()
            .map(|ids| {
                ids.iter()
                    .map(|id| index.dataset.item_index(id).ok_or_else(|| Error::UnknownId(id.clone())))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        index.reorder(tag, subset.as_deref(), self.k)
    }

    pub fn field_of(&self, error: &Error) -> Option<String> {
        match error {
            Error::InvalidQuery { field, .. } => Some(field.clone()),
            Error::UnknownTagName(_) => Some("tag".into()),
            Error::UnknownId(_) | Error::EmptySubset => Some("subset".into()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Item;
    use crate::divergences::DistanceKind;
    use crate::encoders::UNIT_VARIANCE_LOGVAR;

    /// Tags a, b, c at x = 0, 4, 8 on the first axis; items on the axis.
    fn toy() -> (ModelParams, Dataset) {
        let vocabulary: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut m = ModelParams::zeros(2, 2, vocabulary.clone(), DistanceKind::Wasserstein2Sq, 0.2).unwrap();
        m.w_item = vec![1.0, 0.0, 0.0, 1.0];
        m.item_var_bias = UNIT_VARIANCE_LOGVAR;
        m.tag_logvars = vec![UNIT_VARIANCE_LOGVAR; 3];
        m.tag_means = vec![0.0, 0.0, 4.0, 0.0, 8.0, 0.0];
        let item = |id: &str, x: f64, tags: Vec<usize>| Item {
            id: id.into(),
            features: vec![x, 0.0],
            tags,
        };
        let ds = Dataset {
            items: vec![
                item("p", 0.0, vec![0]),
                item("q", 4.0, vec![1]),
                item("r", 8.0, vec![2]),
                item("s", 2.0, vec![0, 1]),
                item("t", 2.0, vec![0, 1]),
            ],
            vocabulary,
            feature_dim: 2,
        };
        (m, ds)
    }

    fn spec(base: Base, remove: Vec<usize>, add: Vec<usize>, k: usize) -> QuerySpec {
        QuerySpec {
            base,
            remove,
            add,
            k,
            mode: QueryMode::Algebra,
        }
    }

    #[test]
    fn empty_edit_returns_the_base_itself() {
        let (m, ds) = toy();
        let r = retrieve(&m, &ds, &spec(Base::Item(2), vec![], vec![], 1)).unwrap();
        assert_eq!(r.results[0].id, "r");
        assert_eq!(r.results[0].score.to_bits(), 0.0f64.to_bits());
        let q = build_query(&m, &ds, &spec(Base::Item(2), vec![], vec![], 1)).unwrap();
        assert_eq!(q.gaussian, m.encode_item(&ds.items[2].features).unwrap());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let (m, ds) = toy();
        let r = retrieve(&m, &ds, &spec(Base::Tags(vec![0, 1]), vec![], vec![], 5)).unwrap();
        let ids: Vec<&str> = r.results.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(&ids[..2], ["s", "t"]);
        assert_eq!(r.results[0].score, r.results[1].score);
        assert!(r.results.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn swapping_a_tag_moves_the_query() {
        let (m, ds) = toy();
        // Item p carries one tag, so the edit is at full strength: θ_p − θ_a + θ_c.
        let q = build_query(&m, &ds, &spec(Base::Item(0), vec![0], vec![2], 1)).unwrap();
        assert!((q.gaussian.mean()[0] - 8.0).abs() < 1e-12);
        assert!((q.gaussian.variance() - 1.0).abs() < 1e-7);
        let r = retrieve(&m, &ds, &spec(Base::Item(0), vec![0], vec![2], 1)).unwrap();
        assert_eq!(r.results[0].id, "r");
        assert!(!r.degenerate);
    }

    #[test]
    fn removal_past_zero_precision_is_flagged() {
        let (m, ds) = toy();
        let q = build_query(&m, &ds, &spec(Base::Tags(vec![0]), vec![1, 2], vec![], 1)).unwrap();
        assert!(q.degenerate);
        assert!((q.gaussian.variance() - 0.5 / THETA2_CEIL).abs() < 1e-3);
        let r = retrieve(&m, &ds, &spec(Base::Tags(vec![0]), vec![1, 2], vec![], 5)).unwrap();
        assert!(r.degenerate);
        assert!(r.results.iter().all(|s| s.score.is_finite()));
    }

    #[test]
    fn refuse_mode_reencodes_the_edited_set() {
        let (m, ds) = toy();
        let s = QuerySpec {
            mode: QueryMode::Refuse,
            ..spec(Base::Item(3), vec![0], vec![2], 1)
        };
        let q = build_query(&m, &ds, &s).unwrap();
        assert_eq!(q.gaussian, m.encode_tag_set(&[1, 2]).unwrap());
    }

    #[test]
    fn validation_errors_name_the_field() {
        let (_, ds) = toy();
        let field = |s: QuerySpec| match s.validate(&ds).unwrap_err() {
            Error::InvalidQuery { field, .. } => field,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(field(spec(Base::Item(0), vec![1], vec![1], 3)), "add");
        assert_eq!(field(spec(Base::Item(0), vec![], vec![], 0)), "k");
        assert_eq!(field(spec(Base::Tags(vec![]), vec![], vec![], 1)), "base");
        assert_eq!(field(spec(Base::Tags(vec![0]), vec![0], vec![], 1)), "remove");
        assert_eq!(field(spec(Base::Item(0), vec![2, 2], vec![], 1)), "remove");
        assert_eq!(
            spec(Base::Item(9), vec![], vec![], 1).validate(&ds).unwrap_err(),
            Error::UnknownId("#9".into())
        );
        assert_eq!(
            spec(Base::Item(0), vec![], vec![7], 1).validate(&ds).unwrap_err(),
            Error::UnknownTag(7)
        );
    }

    #[test]
    fn wire_requests_resolve_names() {
        let (m, ds) = toy();
        let req: QueryRequest =
            serde_json::from_str(r#"{"base":{"item":"q"},"remove":["b"],"add":["a"],"k":2}"#).unwrap();
        let s = req.resolve(&ds).unwrap();
        assert_eq!(s, spec(Base::Item(1), vec![1], vec![0], 2));
        assert_eq!(retrieve(&m, &ds, &s).unwrap().results[0].id, "p");

        let bad: QueryRequest = serde_json::from_str(r#"{"base":{"tags":["a"]},"add":["zz"],"k":1}"#).unwrap();
        let err = bad.resolve(&ds).unwrap_err();
        assert_eq!(err, Error::UnknownTagName("zz".into()));
        assert_eq!(bad.field_of(&err).as_deref(), Some("add"));

        let both: QueryRequest = serde_json::from_str(r#"{"base":{"item":"p","tags":["a"]},"k":1}"#).unwrap();
        assert!(matches!(both.resolve(&ds).unwrap_err(), Error::InvalidQuery { field, .. } if field == "base"));
        assert!(serde_json::from_str::<QueryRequest>(r#"{"base":{},"k":1,"colour":2}"#).is_err());
    }

    #[test]
    fn reorder_ranks_subset_by_relevance() {
        let (m, ds) = toy();
        let index = Index::new(&m, &ds).unwrap();
        let r = index.reorder(1, None, None).unwrap();
        let ids: Vec<&str> = r.results.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["q", "s", "t"]);
        let one = index.reorder(2, Some(&[0]), None).unwrap();
        assert_eq!(one.results.len(), 1);
        assert_eq!(index.reorder(0, Some(&[]), None).unwrap_err(), Error::EmptySubset);
        assert_eq!(index.reorder(5, None, None).unwrap_err(), Error::UnknownTag(5));
        assert!(index.reorder(0, Some(&[1, 1]), None).is_err());

        let req: ReorderRequest = serde_json::from_str(r#"{"tag":"a","subset":["r","q"],"k":1}"#).unwrap();
        assert_eq!(req.run(&index).unwrap().results[0].id, "q");
    }

    #[test]
    fn index_rejects_mismatched_vocabulary() {
        let (mut m, ds) = toy();
        m.vocabulary.swap(0, 1);
        assert!(matches!(Index::new(&m, &ds).unwrap_err(), Error::Config(_)));
    }
}
