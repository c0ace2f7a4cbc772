//! Language, feature and source registries plus the sparse
//! (language, feature, source) value store every other module reads from.

mod store;
mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use store::{REGISTRIES_FILE, SOURCES_DIR};
pub use tensor::{Batch, BatchCell, ExtendReport, FeatureTensor, SourceStats, TensorStamp};

/// Resource level of a language, used to break coverage reports down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum ResourceTier {
    #[serde(rename = "HRL")]
    High,
    #[serde(rename = "MRL")]
    Medium,
    #[serde(rename = "LRL")]
    Low,
    #[default]
    Unknown,
}

impl ResourceTier {
    pub const ALL: [ResourceTier; 4] =
        [ResourceTier::High, ResourceTier::Medium, ResourceTier::Low, ResourceTier::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceTier::High => "HRL",
            ResourceTier::Medium => "MRL",
            ResourceTier::Low => "LRL",
            ResourceTier::Unknown => "Unknown",
        }
    }
}

impl FromStr for ResourceTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HRL" | "HIGH" => Ok(ResourceTier::High),
            "MRL" | "MEDIUM" => Ok(ResourceTier::Medium),
            "LRL" | "LOW" => Ok(ResourceTier::Low),
            "" | "UNKNOWN" => Ok(ResourceTier::Unknown),
            other => Err(Error::InvalidLanguage(other.to_string(), "unknown resource tier".into())),
        }
    }
}

/// A registered language. The glottocode is the primary key; the ISO 639-3
/// code is kept as a lookup alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageRecord {
    pub glottocode: String,
    #[serde(default)]
    pub iso639_3: Option<String>,
    #[serde(rename = "name")]
    pub display_name: String,
    /// Parent language for dialects.
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(rename = "tier", default)]
    pub resource_tier: ResourceTier,
}

impl LanguageRecord {
    pub fn new(glottocode: impl Into<String>) -> Self {
        let glottocode = glottocode.into();
        LanguageRecord {
            display_name: glottocode.clone(),
            glottocode,
            iso639_3: None,
            parent: None,
            resource_tier: ResourceTier::Unknown,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.display_name = name.into();
        self
    }

    pub fn with_iso(mut self, iso: impl Into<String>) -> Self {
        self.iso639_3 = Some(iso.into());
        self
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent = Some(parent.into());
        self
    }

    pub fn with_tier(mut self, tier: ResourceTier) -> Self {
        self.resource_tier = tier;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let code = &self.glottocode;
        if code.is_empty() || code.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::InvalidLanguage(code.clone(), "glottocode must be a non-empty token".into()));
        }
        if self.parent.as_deref() == Some(code.as_str()) {
            return Err(Error::InvalidLanguage(code.clone(), "language cannot be its own parent".into()));
        }
        Ok(())
    }
}

/// Feature category. The category is encoded in the feature name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Syntactic,
    Phonological,
    Inventory,
    Morphological,
    Geographic,
    Genetic,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 6] = [
        FeatureCategory::Syntactic,
        FeatureCategory::Phonological,
        FeatureCategory::Inventory,
        FeatureCategory::Morphological,
        FeatureCategory::Geographic,
        FeatureCategory::Genetic,
    ];

    /// The four categories that count toward typological distance.
    pub const TYPOLOGICAL: [FeatureCategory; 4] = [
        FeatureCategory::Syntactic,
        FeatureCategory::Phonological,
        FeatureCategory::Inventory,
        FeatureCategory::Morphological,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            FeatureCategory::Syntactic => "S_",
            FeatureCategory::Phonological => "P_",
            FeatureCategory::Inventory => "INV_",
            FeatureCategory::Morphological => "M_",
            FeatureCategory::Geographic => "GEO_",
            FeatureCategory::Genetic => "GEN_",
        }
    }

    /// Category implied by a canonical feature name's prefix.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| name.starts_with(c.prefix()))
    }

    pub fn is_typological(self) -> bool {
        Self::TYPOLOGICAL.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Syntactic => "syntactic",
            FeatureCategory::Phonological => "phonological",
            FeatureCategory::Inventory => "inventory",
            FeatureCategory::Morphological => "morphological",
            FeatureCategory::Geographic => "geographic",
            FeatureCategory::Genetic => "genetic",
        }
    }
}

impl fmt::Display for FeatureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "syntactic" | "syntax" | "syn" | "s" => Ok(FeatureCategory::Syntactic),
            "phonological" | "phonology" | "pho" | "p" => Ok(FeatureCategory::Phonological),
            "inventory" | "inv" => Ok(FeatureCategory::Inventory),
            "morphological" | "morphology" | "mor" | "m" => Ok(FeatureCategory::Morphological),
            "geographic" | "geography" | "geo" => Ok(FeatureCategory::Geographic),
            "genetic" | "gen" => Ok(FeatureCategory::Genetic),
            other => Err(Error::InvalidFeatureName(other.to_string(), "unknown feature category".into())),
        }
    }
}

/// Where a binary feature came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureOrigin {
    #[default]
    Native,
    /// One-hot column for `level` of a nominal feature.
    BinarizedNominal { parent_feature: String, level: String },
    /// Presence indicator replacing an ordinal feature.
    BinarizedOrdinal { parent_feature: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub category: FeatureCategory,
    #[serde(default)]
    pub origin: FeatureOrigin,
}

impl FeatureDescriptor {
    pub fn new(name: impl Into<String>, category: FeatureCategory, origin: FeatureOrigin) -> Result<Self> {
        let descriptor = FeatureDescriptor { name: name.into(), category, origin };
        descriptor.validate()?;
        Ok(descriptor)
    }

    /// Native feature whose category is read off the name prefix.
    pub fn native(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let category = FeatureCategory::from_name(&name)
            .ok_or_else(|| Error::InvalidFeatureName(name.clone(), "missing category prefix".into()))?;
        Self::new(name, category, FeatureOrigin::Native)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !name.starts_with(self.category.prefix()) {
            return Err(Error::InvalidFeatureName(
                name.clone(),
                format!("expected prefix {} for {} feature", self.category.prefix(), self.category),
            ));
        }
        if name.len() == self.category.prefix().len() {
            return Err(Error::InvalidFeatureName(name.clone(), "empty body after prefix".into()));
        }
        if !name.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_') {
            return Err(Error::InvalidFeatureName(
                name.clone(),
                "only uppercase letters, digits and underscores allowed".into(),
            ));
        }
        Ok(())
    }
}

/// A single stored value, or its absence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Known(f64),
    Missing,
}

impl CellValue {
    /// Builds a known value, clamping into `[0, 1]`.
    pub fn known(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidValue(value));
        }
        Ok(CellValue::Known(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            CellValue::Known(v) => Some(v),
            CellValue::Missing => None,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, CellValue::Known(_))
    }

    pub fn is_missing(self) -> bool {
        matches!(self, CellValue::Missing)
    }
}

impl From<Option<f64>> for CellValue {
    fn from(value: Option<f64>) -> Self {
        match value {
            Some(v) => CellValue::Known(v),
            None => CellValue::Missing,
        }
    }
}

/// Text form used in every CSV this crate reads and writes. `--` marks a
/// missing cell; known values use the shortest round-trip representation.
pub fn format_value(value: CellValue) -> String {
    match value {
        CellValue::Missing => MISSING_MARKER.to_string(),
        CellValue::Known(v) => format!("{v}"),
    }
}

pub const MISSING_MARKER: &str = "--";

pub(crate) fn parse_value(text: &str) -> std::result::Result<CellValue, String> {
    let text = text.trim();
    if text == MISSING_MARKER {
        return Ok(CellValue::Missing);
    }
    let v: f64 = text.parse().map_err(|_| format!("cannot parse value `{text}`"))?;
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(format!("value `{text}` outside [0, 1]"));
    }
    Ok(CellValue::Known(v))
}

/// Which features a query looks at.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FeatureSelector {
    #[default]
    All,
    Category(FeatureCategory),
    ExplicitList(Vec<String>),
}

impl FeatureSelector {
    /// Indices (into `features`) selected, in registry order.
    pub fn resolve(&self, features: &[FeatureDescriptor]) -> Result<Vec<usize>> {
        match self {
            FeatureSelector::All => Ok((0..features.len()).collect()),
            FeatureSelector::Category(c) => {
                Ok(features.iter().enumerate().filter(|(_, d)| d.category == *c).map(|(i, _)| i).collect())
            }
            FeatureSelector::ExplicitList(names) => {
                if names.is_empty() {
                    return Err(Error::EmptyFeatureList);
                }
                let mut picked = Vec::with_capacity(names.len());
                for name in names {
                    let idx = features
                        .iter()
                        .position(|d| &d.name == name)
                        .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
                    if picked.contains(&idx) {
                        return Err(Error::DuplicateFeature(name.clone()));
                    }
                    picked.push(idx);
                }
                picked.sort_unstable();
                Ok(picked)
            }
        }
    }
}

pub(crate) fn validate_source_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSourceName(name.to_string()))
    }
}
