use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{validate_source_name, CellValue, FeatureDescriptor, LanguageRecord};
use crate::error::{Error, Result};

static NEXT_TENSOR_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed)
}

/// Identity of a tensor state. Two stamps compare equal only if they refer
/// to the same tensor value at the same revision; derived caches key on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorStamp {
    pub id: u64,
    pub revision: u64,
}

/// Key ordering is (language, feature, source) so all sources of one
/// (language, feature) pair sit in a contiguous range.
type CellKey = (u32, u32, u32);

/// Sparse three-dimensional store over (language, feature, source).
///
/// Absent entries are missing. Registries are append-only; known cells are
/// only ever replaced through an explicit overwrite.
#[derive(Debug)]
pub struct FeatureTensor {
    languages: Vec<LanguageRecord>,
    language_index: HashMap<String, usize>,
    iso_index: HashMap<String, usize>,
    features: Vec<FeatureDescriptor>,
    feature_index: HashMap<String, usize>,
    sources: Vec<String>,
    source_index: HashMap<String, usize>,
    cells: BTreeMap<CellKey, f64>,
    id: u64,
    revision: u64,
}

impl Clone for FeatureTensor {
    // A clone is a distinct tensor value: it gets a fresh identity so caches
    // built on the original are never served for the copy.
    fn clone(&self) -> Self {
        FeatureTensor {
            languages: self.languages.clone(),
            language_index: self.language_index.clone(),
            iso_index: self.iso_index.clone(),
            features: self.features.clone(),
            feature_index: self.feature_index.clone(),
            sources: self.sources.clone(),
            source_index: self.source_index.clone(),
            cells: self.cells.clone(),
            id: fresh_id(),
            revision: 0,
        }
    }
}

impl Default for FeatureTensor {
    fn default() -> Self {
        Self::new()
    }
}

/// One value to be written by [`FeatureTensor::extend_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchCell {
    pub language: String,
    pub feature: String,
    pub source: String,
    pub value: f64,
}

/// A set of new registry entries and known cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub languages: Vec<LanguageRecord>,
    pub features: Vec<FeatureDescriptor>,
    pub sources: Vec<String>,
    pub cells: Vec<BatchCell>,
}

impl Batch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty() && self.features.is_empty() && self.sources.is_empty() && self.cells.is_empty()
    }

    pub fn push(&mut self, language: &str, feature: &str, source: &str, value: f64) {
        self.cells.push(BatchCell {
            language: language.to_string(),
            feature: feature.to_string(),
            source: source.to_string(),
            value,
        });
    }

    /// Adds another batch's contents, skipping registry entries already present.
    pub fn merge(&mut self, other: Batch) {
        for l in other.languages {
            if !self.languages.iter().any(|x| x.glottocode == l.glottocode) {
                self.languages.push(l);
            }
        }
        for f in other.features {
            if !self.features.iter().any(|x| x.name == f.name) {
                self.features.push(f);
            }
        }
        for s in other.sources {
            if !self.sources.contains(&s) {
                self.sources.push(s);
            }
        }
        self.cells.extend(other.cells);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtendReport {
    pub new_languages: usize,
    pub new_features: usize,
    pub new_sources: usize,
    pub cells_written: usize,
    pub cells_overwritten: usize,
}

/// Sources holding a known value for one (language, feature) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceStats {
    pub n: usize,
    /// Known values in source registry order.
    pub values: Vec<f64>,
}

impl FeatureTensor {
    pub fn new() -> Self {
        FeatureTensor {
            languages: Vec::new(),
            language_index: HashMap::new(),
            iso_index: HashMap::new(),
            features: Vec::new(),
            feature_index: HashMap::new(),
            sources: Vec::new(),
            source_index: HashMap::new(),
            cells: BTreeMap::new(),
            id: fresh_id(),
            revision: 0,
        }
    }

    pub fn languages(&self) -> &[LanguageRecord] {
        &self.languages
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn stamp(&self) -> TensorStamp {
        TensorStamp { id: self.id, revision: self.revision }
    }

    /// Number of known cells.
    pub fn known_count(&self) -> usize {
        self.cells.len()
    }

    /// Looks a language up by glottocode, falling back to its ISO alias.
    pub fn language_position(&self, id: &str) -> Result<usize> {
        self.language_index
            .get(id)
            .or_else(|| self.iso_index.get(id))
            .copied()
            .ok_or_else(|| Error::UnknownLanguage(id.to_string()))
    }

    pub fn language(&self, id: &str) -> Result<&LanguageRecord> {
        Ok(&self.languages[self.language_position(id)?])
    }

    pub fn feature_position(&self, name: &str) -> Result<usize> {
        self.feature_index.get(name).copied().ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn source_position(&self, name: &str) -> Result<usize> {
        self.source_index.get(name).copied().ok_or_else(|| Error::UnknownSource(name.to_string()))
    }

    pub fn get_cell(&self, language: &str, feature: &str, source: &str) -> Result<CellValue> {
        let key = (
            self.language_position(language)? as u32,
            self.feature_position(feature)? as u32,
            self.source_position(source)? as u32,
        );
        Ok(self.cells.get(&key).copied().into())
    }

    /// Cell lookup by registry positions; out-of-range positions read as missing.
    pub fn cell_at(&self, language: usize, feature: usize, source: usize) -> CellValue {
        self.cells.get(&(language as u32, feature as u32, source as u32)).copied().into()
    }

    /// Known `(source, value)` pairs for a (language, feature) pair, in source order.
    pub fn sources_at(&self, language: usize, feature: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (l, f) = (language as u32, feature as u32);
        self.cells.range((l, f, 0)..=(l, f, u32::MAX)).map(|(&(_, _, s), &v)| (s as usize, v))
    }

    pub fn source_stats(&self, language: &str, feature: &str) -> Result<SourceStats> {
        let l = self.language_position(language)?;
        let f = self.feature_position(feature)?;
        Ok(self.source_stats_at(l, f))
    }

    pub fn source_stats_at(&self, language: usize, feature: usize) -> SourceStats {
        let values: Vec<f64> = self.sources_at(language, feature).map(|(_, v)| v).collect();
        SourceStats { n: values.len(), values }
    }

    /// Every known cell as `(language, feature, source, value)` positions.
    pub fn known_cells(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.cells.iter().map(|(&(l, f, s), &v)| (l as usize, f as usize, s as usize, v))
    }

    /// Known cells of one language.
    pub fn language_cells(&self, language: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let l = language as u32;
        self.cells.range((l, 0, 0)..=(l, u32::MAX, u32::MAX)).map(|(&(_, f, s), &v)| (f as usize, s as usize, v))
    }

    /// Validates and applies `batch` atomically: on error the tensor is untouched.
    ///
    /// Registry entries already present must match exactly. A cell that hits
    /// an existing known cell with a different value is a conflict unless
    /// `overwrite` is set.
    pub fn extend_with(&mut self, batch: Batch, overwrite: bool) -> Result<ExtendReport> {
        let mut report = ExtendReport::default();

        let mut new_languages: Vec<LanguageRecord> = Vec::new();
        let mut new_language_index: HashMap<String, usize> = HashMap::new();
        for record in batch.languages {
            record.validate()?;
            if let Some(&i) = self.language_index.get(&record.glottocode) {
                if self.languages[i] != record {
                    return Err(Error::RegistryConflict(record.glottocode));
                }
                continue;
            }
            if let Some(&j) = new_language_index.get(&record.glottocode) {
                if new_languages[j] != record {
                    return Err(Error::RegistryConflict(record.glottocode));
                }
                continue;
            }
            new_language_index.insert(record.glottocode.clone(), self.languages.len() + new_languages.len());
            new_languages.push(record);
        }
        self.check_new_parents(&new_languages, &new_language_index)?;

        let mut new_features: Vec<FeatureDescriptor> = Vec::new();
        let mut new_feature_index: HashMap<String, usize> = HashMap::new();
        for descriptor in batch.features {
            descriptor.validate()?;
            let existing =
                self.feature_index.get(&descriptor.name).map(|&i| &self.features[i]).or_else(|| {
                    new_feature_index.get(&descriptor.name).map(|&i| &new_features[i - self.features.len()])
                });
            match existing {
                Some(d) if *d != descriptor => return Err(Error::RegistryConflict(descriptor.name)),
                Some(_) => continue,
                None => {
                    new_feature_index.insert(descriptor.name.clone(), self.features.len() + new_features.len());
                    new_features.push(descriptor);
                }
            }
        }

        let mut new_sources: Vec<String> = Vec::new();
        for source in batch.sources {
            validate_source_name(&source)?;
            if !self.source_index.contains_key(&source) && !new_sources.contains(&source) {
                new_sources.push(source);
            }
        }
        let new_source_index: HashMap<&str, usize> =
            new_sources.iter().enumerate().map(|(i, s)| (s.as_str(), self.sources.len() + i)).collect();

        let mut writes: BTreeMap<CellKey, f64> = BTreeMap::new();
        for cell in &batch.cells {
            let l = self
                .language_index
                .get(&cell.language)
                .or_else(|| new_language_index.get(&cell.language))
                .copied()
                .ok_or_else(|| Error::UnknownLanguage(cell.language.clone()))?;
            let f = self
                .feature_index
                .get(&cell.feature)
                .or_else(|| new_feature_index.get(&cell.feature))
                .copied()
                .ok_or_else(|| Error::UnknownFeature(cell.feature.clone()))?;
            let s = self
                .source_index
                .get(&cell.source)
                .or_else(|| new_source_index.get(cell.source.as_str()))
                .copied()
                .ok_or_else(|| Error::UnknownSource(cell.source.clone()))?;
            let CellValue::Known(value) = CellValue::known(cell.value)? else {
                unreachable!("CellValue::known never yields Missing")
            };
            let key = (l as u32, f as u32, s as u32);
            let conflict = |existing: f64| Error::ConflictingWrite {
                language: cell.language.clone(),
                feature: cell.feature.clone(),
                source_name: cell.source.clone(),
                existing,
                incoming: value,
            };
            if let Some(&staged) = writes.get(&key) {
                if staged != value {
                    return Err(conflict(staged));
                }
                continue;
            }
            if let Some(&existing) = self.cells.get(&key) {
                if existing != value {
                    if !overwrite {
                        return Err(conflict(existing));
                    }
                    report.cells_overwritten += 1;
                }
            }
            writes.insert(key, value);
        }

        report.new_languages = new_languages.len();
        report.new_features = new_features.len();
        report.new_sources = new_sources.len();
        report.cells_written = writes.len();

        for record in new_languages {
            if let Some(iso) = &record.iso639_3 {
                self.iso_index.entry(iso.clone()).or_insert(self.languages.len());
            }
            self.language_index.insert(record.glottocode.clone(), self.languages.len());
            self.languages.push(record);
        }
        for descriptor in new_features {
            self.feature_index.insert(descriptor.name.clone(), self.features.len());
            self.features.push(descriptor);
        }
        for source in new_sources {
            self.source_index.insert(source.clone(), self.sources.len());
            self.sources.push(source);
        }
        self.cells.extend(writes);
        self.revision += 1;
        Ok(report)
    }

    fn check_new_parents(&self, new: &[LanguageRecord], new_index: &HashMap<String, usize>) -> Result<()> {
        // Existing records are already acyclic and cannot point at new ones,
        // so any cycle must run through new records only.
        let offset = self.languages.len();
        for record in new {
            let mut seen: HashSet<&str> = HashSet::new();
            let mut current = record;
            seen.insert(&current.glottocode);
            while let Some(parent) = current.parent.as_deref() {
                if self.language_index.contains_key(parent) {
                    break;
                }
                let Some(&j) = new_index.get(parent) else {
                    return Err(Error::InvalidLanguage(
                        record.glottocode.clone(),
                        format!("parent `{parent}` is not registered"),
                    ));
                };
                if !seen.insert(parent) {
                    return Err(Error::InvalidLanguage(record.glottocode.clone(), "parent chain is cyclic".into()));
                }
                current = &new[j - offset];
            }
        }
        Ok(())
    }

    /// Registry positions of `language`'s ancestors, nearest first.
    pub fn ancestors(&self, language: usize) -> Vec<usize> {
        ancestors_in(&self.languages, &self.language_index, language)
    }
}

pub(crate) fn ancestors_in(
    languages: &[LanguageRecord],
    index: &HashMap<String, usize>,
    language: usize,
) -> Vec<usize> {
    let mut chain = Vec::new();
    let mut current = language;
    while let Some(parent) = languages[current].parent.as_deref() {
        match index.get(parent) {
            Some(&p) if !chain.contains(&p) && p != language => {
                chain.push(p);
                current = p;
            }
            _ => break,
        }
    }
    chain
}
