//! Collapses the source dimension: each (language, feature) cell becomes the
//! max (union) or mean (average) of its known source values.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{
    format_value, parse_value, CellValue, FeatureCategory, FeatureDescriptor, FeatureTensor, LanguageRecord,
    TensorStamp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Union,
    Average,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::Union => "union",
            AggregationMode::Average => "average",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "union" | "max" => Ok(AggregationMode::Union),
            "average" | "avg" | "mean" => Ok(AggregationMode::Average),
            other => Err(format!("unknown aggregation mode `{other}`")),
        }
    }
}

/// Which sources feed an aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SourceSelector {
    #[default]
    AllSources,
    OneSource(String),
    Subset(Vec<String>),
}

impl SourceSelector {
    fn names(&self) -> Option<Vec<String>> {
        match self {
            SourceSelector::AllSources => None,
            SourceSelector::OneSource(s) => Some(vec![s.clone()]),
            SourceSelector::Subset(v) => Some(v.clone()),
        }
    }
}

/// Dense language × feature matrix of aggregated cells, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMatrix {
    pub mode: AggregationMode,
    pub languages: Vec<LanguageRecord>,
    pub features: Vec<FeatureDescriptor>,
    /// Sources the cells were aggregated from.
    pub sources: Vec<String>,
    values: Vec<CellValue>,
}

impl AggregatedMatrix {
    /// Builds a matrix from row-major cells.
    pub fn from_cells(
        mode: AggregationMode,
        languages: Vec<LanguageRecord>,
        features: Vec<FeatureDescriptor>,
        values: Vec<CellValue>,
    ) -> Result<Self> {
        if values.len() != languages.len() * features.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cells for a {}x{} matrix",
                values.len(),
                languages.len(),
                features.len()
            )));
        }
        for v in &values {
            if let CellValue::Known(x) = v {
                if !x.is_finite() || !(0.0..=1.0).contains(x) {
                    return Err(Error::InvalidValue(*x));
                }
            }
        }
        Ok(AggregatedMatrix { mode, languages, features, sources: Vec::new(), values })
    }

    /// Convenience constructor from `Option` rows; features are named by prefix.
    pub fn from_rows(
        mode: AggregationMode,
        languages: &[&str],
        features: &[&str],
        rows: &[Vec<Option<f64>>],
    ) -> Result<Self> {
        let langs = languages.iter().map(|l| LanguageRecord::new(*l)).collect();
        let feats = features.iter().map(|f| FeatureDescriptor::native(*f)).collect::<Result<Vec<_>>>()?;
        if rows.iter().any(|r| r.len() != features.len()) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        let cells = rows.iter().flatten().map(|v| CellValue::from(*v)).collect();
        Self::from_cells(mode, langs, feats, cells)
    }

    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn get(&self, language: usize, feature: usize) -> CellValue {
        self.values[language * self.features.len() + feature]
    }

    pub fn set(&mut self, language: usize, feature: usize, value: CellValue) {
        let n = self.features.len();
        self.values[language * n + feature] = value;
    }

    pub fn row(&self, language: usize) -> &[CellValue] {
        let n = self.features.len();
        &self.values[language * n..(language + 1) * n]
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.values
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_known()).count()
    }

    /// Positions of every known cell, row-major.
    pub fn observed_positions(&self) -> Vec<(usize, usize)> {
        let n = self.features.len();
        self.values.iter().enumerate().filter(|(_, v)| v.is_known()).map(|(i, _)| (i / n, i % n)).collect()
    }

    pub fn language_position(&self, id: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l.glottocode == id)
            .or_else(|| self.languages.iter().position(|l| l.iso639_3.as_deref() == Some(id)))
            .ok_or_else(|| Error::UnknownLanguage(id.to_string()))
    }

    pub fn feature_position(&self, name: &str) -> Result<usize> {
        self.features.iter().position(|f| f.name == name).ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Writes `language,<features...>` rows with `--` for missing cells.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["language".to_string()];
        header.extend(self.features.iter().map(|f| f.name.clone()));
        w.write_record(&header)?;
        for (l, lang) in self.languages.iter().enumerate() {
            let mut row = vec![lang.glottocode.clone()];
            row.extend(self.row(l).iter().map(|v| format_value(*v)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// Reads the layout produced by [`write_csv`](Self::write_csv). Feature
    /// categories are taken from the name prefixes.
    pub fn read_csv(reader: impl Read, mode: AggregationMode, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("language") {
            return Err(Error::format(origin, 1, "first column must be `language`"));
        }
        let features = headers
            .iter()
            .skip(1)
            .map(|h| FeatureDescriptor::native(h).map_err(|e| Error::format(origin, 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut languages = Vec::new();
        let mut values = Vec::new();
        for record in rdr.records() {
            let record =
                record.map_err(|e| Error::format(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            languages.push(LanguageRecord::new(&record[0]));
            for field in record.iter().skip(1) {
                values.push(parse_value(field).map_err(|m| Error::format(origin, line, m))?);
            }
        }
        Self::from_cells(mode, languages, features, values)
    }

    /// Same matrix restricted to the given feature columns.
    pub fn select_features(&self, columns: &[usize]) -> AggregatedMatrix {
        let features = columns.iter().map(|&c| self.features[c].clone()).collect();
        let values = (0..self.n_languages())
            .flat_map(|l| columns.iter().map(move |&c| (l, c)))
            .map(|(l, c)| self.get(l, c))
            .collect();
        AggregatedMatrix {
            mode: self.mode,
            languages: self.languages.clone(),
            features,
            sources: self.sources.clone(),
            values,
        }
    }

    pub fn category_of(&self, feature: usize) -> FeatureCategory {
        self.features[feature].category
    }
}

/// Aggregates `tensor` over `sources` (all registered sources when `None`).
pub fn aggregate(
    tensor: &FeatureTensor,
    mode: AggregationMode,
    sources: Option<&[String]>,
) -> Result<AggregatedMatrix> {
    let selected: Vec<usize> = match sources {
        None => (0..tensor.sources().len()).collect(),
        Some([]) => return Err(Error::EmptySourceSubset),
        Some(names) => {
            let mut idx = names.iter().map(|s| tensor.source_position(s)).collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            idx
        }
    };
    let mut use_source = vec![false; tensor.sources().len()];
    for &s in &selected {
        use_source[s] = true;
    }

    let n_features = tensor.features().len();
    let mut sum = vec![0.0_f64; tensor.languages().len() * n_features];
    let mut max = vec![f64::NEG_INFINITY; sum.len()];
    let mut count = vec![0u32; sum.len()];
    for (l, f, s, v) in tensor.known_cells() {
        if !use_source[s] {
            continue;
        }
        let i = l * n_features + f;
        sum[i] += v;
        max[i] = max[i].max(v);
        count[i] += 1;
    }
    let values = (0..sum.len())
        .map(|i| match (count[i], mode) {
            (0, _) => CellValue::Missing,
            (_, AggregationMode::Union) => CellValue::Known(max[i]),
            (1, AggregationMode::Average) => CellValue::Known(sum[i]),
            (n, AggregationMode::Average) => CellValue::Known((sum[i] / f64::from(n)).clamp(0.0, 1.0)),
        })
        .collect();
    Ok(AggregatedMatrix {
        mode,
        languages: tensor.languages().to_vec(),
        features: tensor.features().to_vec(),
        sources: selected.iter().map(|&s| tensor.sources()[s].clone()).collect(),
        values,
    })
}

pub fn aggregate_selected(
    tensor: &FeatureTensor,
    mode: AggregationMode,
    sources: &SourceSelector,
) -> Result<AggregatedMatrix> {
    aggregate(tensor, mode, sources.names().as_deref())
}

type CacheKey = (AggregationMode, Option<Vec<String>>);

/// Memoizes aggregations of one tensor. Entries are dropped as soon as the
/// cache sees a different tensor identity or revision.
#[derive(Debug, Default)]
pub struct AggregationCache {
    inner: Mutex<CacheState>,
}

#[derive(Debug, Default)]
struct CacheState {
    stamp: Option<TensorStamp>,
    entries: HashMap<CacheKey, Arc<AggregatedMatrix>>,
}

impl AggregationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        tensor: &FeatureTensor,
        mode: AggregationMode,
        sources: &SourceSelector,
    ) -> Result<Arc<AggregatedMatrix>> {
        let mut names = sources.names();
        if let Some(v) = names.as_mut() {
            v.sort();
            v.dedup();
        }
        let key = (mode, names);
        let mut state = self.inner.lock().expect("aggregation cache poisoned");
        if state.stamp != Some(tensor.stamp()) {
            state.entries.clear();
            state.stamp = Some(tensor.stamp());
        }
        if let Some(hit) = state.entries.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let matrix = Arc::new(aggregate(tensor, mode, key.1.as_deref())?);
        state.entries.insert(key, Arc::clone(&matrix));
        Ok(matrix)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("aggregation cache poisoned").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
