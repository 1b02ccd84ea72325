//! Uses of a trained model: tag-algebra retrieval, relevance re-ordering,
//! variance reports, item-variance correlations and 2-D tag maps.

mod map;
mod query;
mod reports;

pub use map::{export_map, MapExport, MapPoint, Projector, POWER_ITERATION_TOL};
pub use query::{
    build_query, reorder, retrieve, Base, BaseRequest, Index, QueryGaussian, QueryMode, QueryRequest, QuerySpec,
    RankedResult, ReorderRequest, ScoredItem,
};
pub use reports::{
    image_variance_correlation, tag_variance_report, CorrelationMatrix, TagVarianceRow, CORRELATION_COLUMNS,
};
