//! Turns external database exports into tensor batches.
//!
//! Each source file is a CSV of `language,feature,value` rows using the
//! source's own language identifiers and free-text feature labels. An
//! [`IngestSchema`] declares the variable kind and category of every label;
//! nominal labels are one-hot encoded, ordinal labels become presence
//! indicators, and all names are canonicalized. Language identifiers go
//! through an [`IdResolutionTable`], and redundancy rules are applied to the
//! merged batch before it reaches the tensor.

mod binarize;
mod names;
mod resolve;
mod rules;

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use binarize::{binarize_nominal, binarize_ordinal};
pub use names::{canonicalize_feature_name, nominal_level_name, NameRegistry, MAX_NAME_LEN};
pub use resolve::{is_glottocode, resolve_language, IdResolutionTable, Resolution, ResolvedVia};
pub use rules::{apply_inference, read_rules, read_rules_path, InferenceOutcome, InferenceRule, RuleDirection};

use crate::error::{Error, Result};
use crate::kb::{
    Batch, FeatureCategory, FeatureDescriptor, FeatureOrigin, FeatureTensor, LanguageRecord, ResourceTier,
};

/// Declared kind of a raw feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Binary,
    Nominal {
        categories: Vec<String>,
    },
    Ordinal {
        max_level: u32,
    },
    /// Already-numeric values in `[0, 1]`, e.g. averaged imports or
    /// geographic vectors.
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub category: FeatureCategory,
    #[serde(flatten)]
    pub kind: VariableKind,
}

fn default_missing_markers() -> Vec<String> {
    ["--", "", "?", "NA"].iter().map(|s| s.to_string()).collect()
}

/// Per-label variable kinds and categories for one ingest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSchema {
    pub features: BTreeMap<String, FeatureSchema>,
    #[serde(default = "default_missing_markers")]
    pub missing_markers: Vec<String>,
}

impl IngestSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.line() as u64, e.to_string()))
    }
}

/// A raw value after parsing against the schema.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Nominal(String),
    Ordinal(u32),
    Binary(u8),
    Real(f64),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub external_lang_id: String,
    pub feature_label: String,
    pub value: RawValue,
    pub source_name: String,
    /// Line in the originating file, for error messages.
    pub line: u64,
}

impl RawValue {
    pub fn parse(text: &str, kind: &VariableKind, missing_markers: &[String]) -> std::result::Result<Self, String> {
        let text = text.trim();
        if missing_markers.iter().any(|m| m == text) {
            return Ok(RawValue::Missing);
        }
        match kind {
            VariableKind::Binary => match text {
                "0" | "false" | "False" => Ok(RawValue::Binary(0)),
                "1" | "true" | "True" => Ok(RawValue::Binary(1)),
                _ => Err(format!("`{text}` is not a binary value")),
            },
            VariableKind::Ordinal { .. } => {
                text.parse().map(RawValue::Ordinal).map_err(|_| format!("`{text}` is not an ordinal level"))
            }
            VariableKind::Nominal { .. } => Ok(RawValue::Nominal(text.to_string())),
            VariableKind::Real => match text.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(RawValue::Real(v)),
                _ => Err(format!("`{text}` is not a number in [0, 1]")),
            },
        }
    }
}

#[derive(Deserialize)]
struct RawRow {
    language: String,
    feature: String,
    value: String,
}

/// Reads one source export (`language,feature,value`) against `schema`.
pub fn read_raw_records(
    reader: impl Read,
    source: &str,
    origin: &str,
    schema: &IngestSchema,
) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["language", "feature", "value"] {
        return Err(Error::format(origin, 1, "expected header `language,feature,value`"));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::format(origin, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: RawRow = record.deserialize(Some(&headers)).map_err(|e| Error::format(origin, line, e.to_string()))?;
        let decl = schema
            .features
            .get(&row.feature)
            .ok_or_else(|| Error::format(origin, line, format!("feature `{}` not in schema", row.feature)))?;
        let value = RawValue::parse(&row.value, &decl.kind, &schema.missing_markers)
            .map_err(|m| Error::format(origin, line, m))?;
        out.push(RawRecord {
            external_lang_id: row.language,
            feature_label: row.feature,
            value,
            source_name: source.to_string(),
            line,
        });
    }
    Ok(out)
}

pub fn read_raw_path(path: &Path, source: &str, schema: &IngestSchema) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_records(file, source, &path.display().to_string(), schema)
}

#[derive(Deserialize)]
struct LanguageRow {
    glottocode: String,
    #[serde(default)]
    iso639_3: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    parent: String,
    #[serde(default)]
    tier: String,
}

/// Reads language metadata rows `glottocode,iso639_3,name,parent,tier`.
pub fn read_language_records(reader: impl Read, origin: &str) -> Result<Vec<LanguageRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: LanguageRow =
            record.deserialize(Some(&headers)).map_err(|e| Error::format(origin, line, e.to_string()))?;
        let tier: ResourceTier = row.tier.parse().map_err(|e: Error| Error::format(origin, line, e.to_string()))?;
        let mut rec = LanguageRecord::new(&row.glottocode).with_tier(tier);
        if !row.name.is_empty() {
            rec = rec.with_name(row.name);
        }
        if !row.iso639_3.is_empty() {
            rec = rec.with_iso(row.iso639_3);
        }
        if !row.parent.is_empty() {
            rec = rec.with_parent(row.parent);
        }
        rec.validate().map_err(|e| Error::format(origin, line, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Accounting for one ingest run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub sources: BTreeMap<String, SourceReport>,
    pub cells_written: usize,
    pub cells_overwritten: usize,
    pub conflicts: usize,
    pub name_collisions: usize,
    pub inferred_cells: usize,
    pub removed_features: Vec<String>,
    pub new_languages: usize,
    pub new_features: usize,
    /// Identifiers that were rewritten (not passed through), with the result.
    pub resolved_ids: BTreeMap<String, Resolution>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceReport {
    pub rows_read: usize,
    pub missing_rows: usize,
    pub cells_emitted: usize,
}

/// State shared across the sources of one ingest run.
pub struct Ingestor<'a> {
    schema: &'a IngestSchema,
    table: &'a IdResolutionTable,
    names: NameRegistry,
    language_meta: HashMap<String, LanguageRecord>,
    report: IngestReport,
}

impl<'a> Ingestor<'a> {
    pub fn new(schema: &'a IngestSchema, table: &'a IdResolutionTable) -> Self {
        Ingestor {
            schema,
            table,
            names: NameRegistry::new(),
            language_meta: HashMap::new(),
            report: IngestReport::default(),
        }
    }

    /// Metadata used when a language is registered for the first time.
    pub fn with_languages(mut self, records: Vec<LanguageRecord>) -> Self {
        for r in records {
            self.language_meta.insert(r.glottocode.clone(), r);
        }
        self
    }

    /// Converts one source's raw records into a batch.
    pub fn source_batch(&mut self, source: &str, records: &[RawRecord]) -> Result<Batch> {
        let mut batch = Batch::new();
        batch.sources.push(source.to_string());
        let mut source_report = SourceReport::default();
        let mut seen_features: HashMap<String, ()> = HashMap::new();
        let mut seen_languages: HashMap<String, ()> = HashMap::new();

        for rec in records {
            source_report.rows_read += 1;
            let at = |e: Error| match e {
                Error::Format { .. } => e,
                other => Error::format(source, rec.line, other.to_string()),
            };
            let decl = self.schema.features.get(&rec.feature_label).ok_or_else(|| {
                Error::format(source, rec.line, format!("feature `{}` not in schema", rec.feature_label))
            })?;
            let resolution = self.table.resolve(&rec.external_lang_id).map_err(at)?;
            if resolution.via != ResolvedVia::Passthrough {
                self.report.resolved_ids.insert(rec.external_lang_id.clone(), resolution.clone());
            }
            let glottocode = resolution.glottocode.clone();

            let cells: Vec<(FeatureDescriptor, f64)> = match (&decl.kind, &rec.value) {
                (_, RawValue::Missing) => {
                    source_report.missing_rows += 1;
                    continue;
                }
                (VariableKind::Binary, RawValue::Binary(b)) => {
                    let name = self.names.canonicalize(&rec.feature_label, decl.category).map_err(at)?;
                    vec![(FeatureDescriptor::new(name, decl.category, FeatureOrigin::Native)?, f64::from(*b))]
                }
                (VariableKind::Real, RawValue::Real(v)) => {
                    let name = self.names.canonicalize(&rec.feature_label, decl.category).map_err(at)?;
                    vec![(FeatureDescriptor::new(name, decl.category, FeatureOrigin::Native)?, *v)]
                }
                (VariableKind::Ordinal { max_level }, RawValue::Ordinal(level)) => {
                    let (name, v) =
                        binarize_ordinal(&rec.feature_label, decl.category, *max_level, *level).map_err(at)?;
                    self.names.claim(&name, &rec.feature_label).map_err(at)?;
                    let origin = FeatureOrigin::BinarizedOrdinal { parent_feature: rec.feature_label.clone() };
                    vec![(FeatureDescriptor::new(name, decl.category, origin)?, v)]
                }
                (VariableKind::Nominal { categories }, RawValue::Nominal(observed)) => {
                    let group =
                        binarize_nominal(&rec.feature_label, decl.category, categories, observed).map_err(at)?;
                    group
                        .into_iter()
                        .zip(categories)
                        .map(|((name, v), level)| {
                            self.names.claim(&name, &format!("{} [{}]", rec.feature_label, level)).map_err(at)?;
                            let origin = FeatureOrigin::BinarizedNominal {
                                parent_feature: rec.feature_label.clone(),
                                level: level.clone(),
                            };
                            Ok((FeatureDescriptor::new(name, decl.category, origin)?, v))
                        })
                        .collect::<Result<_>>()?
                }
                (kind, value) => {
                    return Err(Error::format(
                        source,
                        rec.line,
                        format!("value {value:?} does not match kind {kind:?}"),
                    ))
                }
            };

            if seen_languages.insert(glottocode.clone(), ()).is_none() {
                let record = self.language_meta.get(&glottocode).cloned().unwrap_or_else(|| {
                    let mut r = LanguageRecord::new(&glottocode);
                    if resolution.via == ResolvedVia::Iso {
                        r = r.with_iso(rec.external_lang_id.trim());
                    }
                    r
                });
                batch.languages.push(record);
            }
            for (descriptor, value) in cells {
                batch.push(&glottocode, &descriptor.name, source, value);
                source_report.cells_emitted += 1;
                if seen_features.insert(descriptor.name.clone(), ()).is_none() {
                    batch.features.push(descriptor);
                }
            }
        }
        self.report.sources.insert(source.to_string(), source_report);
        Ok(batch)
    }

    /// Builds batches for every source, applies `rules`, and extends `tensor`.
    /// The tensor is left untouched if any step fails.
    pub fn ingest_into(
        mut self,
        tensor: &mut FeatureTensor,
        sources: &[(String, Vec<RawRecord>)],
        rules: &[InferenceRule],
        overwrite: bool,
    ) -> Result<IngestReport> {
        let mut merged = Batch::new();
        for (name, records) in sources {
            let batch = self.source_batch(name, records)?;
            merged.merge(batch);
        }
        // Metadata-only languages (e.g. dialect parents without data) still
        // need registering.
        for record in self.language_meta.values() {
            if !merged.languages.iter().any(|l| l.glottocode == record.glottocode) {
                merged.languages.push(record.clone());
            }
        }
        merged.languages.sort_by(|a, b| a.glottocode.cmp(&b.glottocode));
        // Languages already in the tensor keep their stored record.
        merged.languages.retain(|l| tensor.language_position(&l.glottocode).is_err());

        let outcome = apply_inference(rules, merged, Some(tensor))?;
        let extend = tensor.extend_with(outcome.batch, overwrite)?;

        let mut report = self.report;
        report.inferred_cells = outcome.inferred_cells;
        report.removed_features = outcome.removed_features;
        report.cells_written = extend.cells_written;
        report.cells_overwritten = extend.cells_overwritten;
        report.conflicts = extend.cells_overwritten;
        report.new_languages = extend.new_languages;
        report.new_features = extend.new_features;
        Ok(report)
    }
}
