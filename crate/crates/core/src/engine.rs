//! Query facade over a tensor: cached aggregation, optional imputation,
//! distances and confidence, all recomputed from current data.

use std::path::Path;
use std::sync::Arc;

use crate::aggregate::{AggregatedMatrix, AggregationCache, AggregationMode, SourceSelector};
use crate::confidence::{confidence_report, ConfidenceReport, QualityCache};
use crate::distance::{distance_matrix, language_distance, DistanceRequest, DistanceResult};
use crate::error::Result;
use crate::impute::{fill_dialects, ImputeMethod, ImputedMatrix, Imputer};
use crate::kb::{Batch, ExtendReport, FeatureSelector, FeatureTensor};

pub const QUALITY_FILE: &str = "quality_runs.json";

#[derive(Debug, Default)]
pub struct KnowledgeBase {
    tensor: FeatureTensor,
    cache: AggregationCache,
    quality: QualityCache,
    /// Fill dialect gaps from parent languages before imputing.
    pub dialect_fill: bool,
}

impl KnowledgeBase {
    pub fn new(tensor: FeatureTensor) -> Self {
        KnowledgeBase { tensor, ..Default::default() }
    }

    /// Loads the tensor and any cached quality runs from `dir`.
    pub fn open(dir: &Path) -> Result<Self> {
        let tensor = FeatureTensor::load(dir)?;
        let quality = QualityCache::load(&dir.join(QUALITY_FILE))?;
        Ok(KnowledgeBase { tensor, quality, ..Default::default() })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.tensor.save(dir)?;
        if !self.quality.is_empty() {
            self.quality.save(&dir.join(QUALITY_FILE))?;
        }
        Ok(())
    }

    pub fn tensor(&self) -> &FeatureTensor {
        &self.tensor
    }

    pub fn quality(&self) -> &QualityCache {
        &self.quality
    }

    pub fn quality_mut(&mut self) -> &mut QualityCache {
        &mut self.quality
    }

    pub fn extend(&mut self, batch: Batch, overwrite: bool) -> Result<ExtendReport> {
        self.tensor.extend_with(batch, overwrite)
    }

    pub fn matrix(&self, mode: AggregationMode, sources: &SourceSelector) -> Result<Arc<AggregatedMatrix>> {
        self.cache.get(&self.tensor, mode, sources)
    }

    pub fn imputed(
        &self,
        mode: AggregationMode,
        sources: &SourceSelector,
        imputer: &dyn Imputer,
    ) -> Result<ImputedMatrix> {
        let matrix = self.matrix(mode, sources)?;
        if self.dialect_fill {
            imputer.impute(&fill_dialects(&matrix, self.tensor.languages()))
        } else {
            imputer.impute(&matrix)
        }
    }

    pub fn distance(&self, req: &DistanceRequest) -> Result<DistanceResult> {
        match &req.imputer {
            None => language_distance(req, self.matrix(req.aggregation, &req.sources)?.as_ref()),
            Some(method) => language_distance(req, &self.imputed(req.aggregation, &req.sources, method)?),
        }
    }

    pub fn distances(&self, languages: &[String], template: &DistanceRequest) -> Result<Vec<Vec<DistanceResult>>> {
        match &template.imputer {
            None => {
                distance_matrix(languages, template, self.matrix(template.aggregation, &template.sources)?.as_ref())
            }
            Some(method) => {
                distance_matrix(languages, template, &self.imputed(template.aggregation, &template.sources, method)?)
            }
        }
    }

    pub fn confidence(
        &self,
        lang_a: &str,
        lang_b: &str,
        scope: &FeatureSelector,
        method: Option<&ImputeMethod>,
        mode: AggregationMode,
    ) -> Result<ConfidenceReport> {
        confidence_report(lang_a, lang_b, &self.tensor, scope, method, mode, &self.quality)
    }
}
