//! Typological language knowledge base: a sparse (language, feature, source)
//! store, multi-source ingestion, aggregation, imputation, pairwise language
//! distances with explicit "not computable" answers, per-pair confidence
//! scores, and the evaluation kit used to validate all of it.

pub mod aggregate;
pub mod confidence;
pub mod distance;
pub mod engine;
pub mod error;
pub mod evalkit;
pub mod impute;
pub mod ingest;
pub mod kb;

pub use aggregate::{AggregatedMatrix, AggregationMode, SourceSelector};
pub use distance::{DistanceRequest, DistanceResult, FeatureMatrix, Metric, NotComputable};
pub use engine::KnowledgeBase;
pub use error::{Error, Result};
pub use impute::{ImputeMethod, ImputedMatrix, Imputer};
pub use kb::{
    Batch, BatchCell, CellValue, FeatureCategory, FeatureDescriptor, FeatureOrigin, FeatureSelector, FeatureTensor,
    LanguageRecord, ResourceTier, SourceStats,
};
