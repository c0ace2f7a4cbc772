//! Per-pair confidence components. They are reported side by side and never
//! combined into one number.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationMode;
use crate::error::{Error, Result};
use crate::evalkit::{QualityMetrics, QualityReport};
use crate::impute::ImputeMethod;
use crate::kb::{FeatureSelector, FeatureTensor};

fn scope_columns(tensor: &FeatureTensor, scope: &FeatureSelector) -> Result<Vec<usize>> {
    let cols = scope.resolve(tensor.features()).map_err(|e| match e {
        Error::EmptyFeatureList => Error::EmptyScope,
        other => other,
    })?;
    if cols.is_empty() {
        return Err(Error::EmptyScope);
    }
    Ok(cols)
}

/// Fraction of `columns` with no known value in any source.
pub fn missing_fraction(tensor: &FeatureTensor, language: usize, columns: &[usize]) -> f64 {
    let missing = columns.iter().filter(|&&f| tensor.sources_at(language, f).next().is_none()).count();
    missing as f64 / columns.len() as f64
}

/// `1 − (p(a) + p(b)) / 2` where `p` is the missing fraction over the scope.
pub fn completeness(lang_a: &str, lang_b: &str, tensor: &FeatureTensor, scope: &FeatureSelector) -> Result<f64> {
    let cols = scope_columns(tensor, scope)?;
    let a = tensor.language_position(lang_a)?;
    let b = tensor.language_position(lang_b)?;
    Ok(1.0 - (missing_fraction(tensor, a, &cols) + missing_fraction(tensor, b, &cols)) / 2.0)
}

/// Most frequent value and how many sources hold it. Ties go to the lowest
/// value.
pub fn source_mode(values: &[f64]) -> Option<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().position(|v| *v != sorted[i]).map_or(sorted.len(), |p| i + p);
        if !best.is_some_and(|(_, n)| j - i <= n) {
            best = Some((sorted[i], j - i));
        }
        i = j;
    }
    best
}

/// Source agreement `a(L)` over the scope, with the number of features `k`
/// that have at least one source. `None` when no feature has a source.
pub fn agreement(tensor: &FeatureTensor, language: usize, columns: &[usize]) -> Option<(f64, usize)> {
    let (mut sum, mut k) = (0.0, 0usize);
    for &f in columns {
        let values: Vec<f64> = tensor.sources_at(language, f).map(|(_, v)| v).collect();
        if let Some((_, z)) = source_mode(&values) {
            sum += z as f64 / values.len() as f64;
            k += 1;
        }
    }
    (k > 0).then(|| (sum / k as f64, k))
}

/// Mean source agreement of the two languages.
pub fn consistency(lang_a: &str, lang_b: &str, tensor: &FeatureTensor, scope: &FeatureSelector) -> Result<f64> {
    let cols = scope_columns(tensor, scope)?;
    let mut total = 0.0;
    for id in [lang_a, lang_b] {
        let l = tensor.language_position(id)?;
        let (a, _) = agreement(tensor, l, &cols).ok_or_else(|| Error::NoSourcedFeatures(id.to_string()))?;
        total += a;
    }
    Ok(total / 2.0)
}

/// One cached quality-test outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedQuality {
    pub method: String,
    pub mode: AggregationMode,
    pub metrics: QualityMetrics,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Quality-test results keyed by aggregation mode and imputer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityCache {
    runs: BTreeMap<String, CachedQuality>,
}

fn cache_key(mode: AggregationMode, method: &str) -> String {
    format!("{mode}/{method}")
}

impl QualityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, report: &QualityReport) {
        let entry = CachedQuality {
            method: report.method.clone(),
            mode: report.mode,
            metrics: report.metrics.clone(),
            seed: Some(report.seed),
        };
        self.runs.insert(cache_key(report.mode, &report.method), entry);
    }

    pub fn insert(&mut self, method: &ImputeMethod, mode: AggregationMode, metrics: QualityMetrics) {
        let entry = CachedQuality { method: method.key(), mode, metrics, seed: None };
        self.runs.insert(cache_key(mode, &method.key()), entry);
    }

    pub fn get(&self, method: &ImputeMethod, mode: AggregationMode) -> Option<&CachedQuality> {
        self.runs.get(&cache_key(mode, &method.key()))
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Missing file means an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::format(path.display().to_string(), e.line() as u64, e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// γ: F1 for union data, 1 − RMSE for average data, 1 without imputation.
pub fn imputation_quality(method: Option<&ImputeMethod>, mode: AggregationMode, cache: &QualityCache) -> Result<f64> {
    let Some(method) = method else {
        return Ok(1.0);
    };
    cache
        .get(method, mode)
        .map(|c| c.metrics.gamma())
        .ok_or_else(|| Error::MissingQualityRun { method: method.key(), mode: mode.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceReport {
    pub pair: [String; 2],
    pub completeness: f64,
    /// `None` when either language has no sourced feature in scope.
    pub consistency: Option<f64>,
    pub imputation_quality: f64,
    /// Number of features in scope.
    pub feature_count_k: usize,
}

pub fn confidence_report(
    lang_a: &str,
    lang_b: &str,
    tensor: &FeatureTensor,
    scope: &FeatureSelector,
    method: Option<&ImputeMethod>,
    mode: AggregationMode,
    cache: &QualityCache,
) -> Result<ConfidenceReport> {
    let cols = scope_columns(tensor, scope)?;
    let completeness = completeness(lang_a, lang_b, tensor, scope)?;
    let consistency = match consistency(lang_a, lang_b, tensor, scope) {
        Ok(c) => Some(c),
        Err(Error::NoSourcedFeatures(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ConfidenceReport {
        pair: [lang_a.to_string(), lang_b.to_string()],
        completeness,
        consistency,
        imputation_quality: imputation_quality(method, mode, cache)?,
        feature_count_k: cols.len(),
    })
}
