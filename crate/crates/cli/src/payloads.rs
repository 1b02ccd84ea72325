//! Loaded model state and the JSON bodies shared by the CLI and the service.

use std::path::Path;

use dgvse::applications::{
    export_map, image_variance_correlation, tag_variance_report, CorrelationMatrix, Index, MapExport, Projector,
    QueryRequest, RankedResult, ReorderRequest,
};
use dgvse::{load_dataset, load_model, Dataset, Error, ModelParams, Result, SphericalGaussian};
use serde::{Deserialize, Serialize};

use crate::exit::{self, CliError};

/// A model, the dataset it ranks, and every item's encoding. Immutable once
/// built.
#[derive(Debug, Clone)]
pub struct ServiceState {
    pub model: ModelParams,
    pub dataset: Dataset,
    items: Vec<SphericalGaussian>,
}

impl ServiceState {
    pub fn new(model: ModelParams, dataset: Dataset) -> Result<Self> {
        let items = Index::new(&model, &dataset)?.item_gaussians().to_vec();
        Ok(ServiceState { model, dataset, items })
    }

    /// Loads both files. A model that does not fit the dataset is a data error.
    pub fn open(model_path: &Path, data_path: &Path) -> std::result::Result<Self, CliError> {
        let model = load_model(model_path).map_err(|e| CliError::new(exit::DATA, format!("{}: {e}", model_path.display())))?;
        let dataset = load_dataset(data_path).map_err(|e| CliError::new(exit::DATA, format!("{}: {e}", data_path.display())))?;
        ServiceState::new(model, dataset).map_err(|e| CliError::new(exit::DATA, format!("model does not match dataset: {e}")))
    }

    pub fn index(&self) -> Index<'_> {
        Index::with_items(&self.model, &self.dataset, &self.items).expect("checked at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub items: usize,
    pub tags: usize,
}

pub fn health(state: &ServiceState) -> Health {
    Health {
        status: "ok".into(),
        items: state.dataset.len(),
        tags: state.dataset.num_tags(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEntry {
    pub id: usize,
    pub tag: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagList {
    pub tags: Vec<TagEntry>,
}

pub fn tags(state: &ServiceState) -> TagList {
    let counts = state.dataset.tag_counts();
    TagList {
        tags: state
            .dataset
            .vocabulary
            .iter()
            .enumerate()
            .map(|(id, tag)| TagEntry {
                id,
                tag: tag.clone(),
                count: counts[id],
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    /// 1-based position by descending variance.
    pub rank: usize,
    pub tag: String,
    pub tag_id: usize,
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    /// Sum of `count` over every tag.
    pub total: usize,
}

pub fn variance(state: &ServiceState) -> Result<VarianceTable> {
    let rows: Vec<VarianceRow> = tag_variance_report(&state.model, &state.dataset)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| VarianceRow {
            rank: i + 1,
            tag: r.tag,
            tag_id: r.tag_id,
            variance: r.variance,
            count: r.count,
        })
        .collect();
    let total = rows.iter().map(|r| r.count).sum();
    Ok(VarianceTable { rows, total })
}

/// Tag map over `names`, or over the whole vocabulary.
pub fn map(state: &ServiceState, projector: Projector, names: Option<&[String]>) -> Result<MapExport> {
    let ids = match names {
        Some(names) => names
            .iter()
            .map(|n| state.dataset.tag_id(n).ok_or_else(|| Error::UnknownTagName(n.clone())))
            .collect::<Result<Vec<_>>>()?,
        None => (0..state.dataset.num_tags()).collect(),
    };
    export_map(&state.model, &ids, projector)
}

pub fn correlation(state: &ServiceState) -> Result<CorrelationMatrix> {
    image_variance_correlation(&state.model, &state.dataset)
}

pub fn retrieve(state: &ServiceState, request: &QueryRequest) -> Result<RankedResult> {
    let spec = request.resolve(&state.dataset)?;
    state.index().retrieve(&spec)
}

pub fn reorder(state: &ServiceState, request: &ReorderRequest) -> Result<RankedResult> {
    request.run(&state.index())
}

/// Compact JSON, the exact bytes sent by the service.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("payloads serialise")
}
