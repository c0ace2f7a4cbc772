use super::names::{canonicalize_feature_name, nominal_level_name};
use crate::error::{Error, Result};
use crate::kb::FeatureCategory;

/// One-hot encodes a nominal observation: one binary column per declared
/// category, with a 1 only in the observed category's column.
pub fn binarize_nominal(
    label: &str,
    category: FeatureCategory,
    categories: &[String],
    observed: &str,
) -> Result<Vec<(String, f64)>> {
    if categories.len() < 2 {
        return Err(Error::TooFewCategories(label.to_string()));
    }
    if !categories.iter().any(|c| c == observed) {
        return Err(Error::UnknownCategory { feature: label.to_string(), observed: observed.to_string() });
    }
    categories
        .iter()
        .map(|level| {
            let name = nominal_level_name(label, level, category)?;
            Ok((name, if level == observed { 1.0 } else { 0.0 }))
        })
        .collect()
}

/// Replaces an ordinal level by a presence indicator: 1 for any level above
/// zero, 0 for level zero.
pub fn binarize_ordinal(
    label: &str,
    category: FeatureCategory,
    max_level: u32,
    observed: u32,
) -> Result<(String, f64)> {
    if observed > max_level {
        return Err(Error::LevelOutOfRange { feature: label.to_string(), max_level, observed });
    }
    let name = canonicalize_feature_name(label, category)?;
    Ok((name, if observed > 0 { 1.0 } else { 0.0 }))
}
