use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kb::FeatureCategory;

/// Upper bound on canonical feature name length, prefix included.
pub const MAX_NAME_LEN: usize = 64;

/// Uppercases, turns whitespace into underscores, drops anything that is
/// not an ASCII letter, digit or underscore, and collapses underscore runs.
fn canonical_body(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.trim().chars() {
        let mapped = if c.is_whitespace() || c == '_' {
            '_'
        } else if c.is_ascii_alphanumeric() {
            c.to_ascii_uppercase()
        } else {
            continue;
        };
        if mapped == '_' && (out.is_empty() || out.ends_with('_')) {
            continue;
        }
        out.push(mapped);
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

fn body_of(raw: &str, category: FeatureCategory) -> Result<String> {
    let trimmed = raw.trim();
    // Labels that already carry the category prefix are not prefixed twice.
    let stripped = trimmed.strip_prefix(category.prefix()).unwrap_or(trimmed);
    let body = canonical_body(stripped);
    if body.is_empty() {
        return Err(Error::InvalidFeatureName(raw.to_string(), "nothing left after canonicalization".into()));
    }
    Ok(body)
}

/// Canonical feature name for a raw label: category prefix followed by the
/// uppercased, underscored label, truncated to [`MAX_NAME_LEN`] characters.
pub fn canonicalize_feature_name(raw: &str, category: FeatureCategory) -> Result<String> {
    let mut name = format!("{}{}", category.prefix(), body_of(raw, category)?);
    name.truncate(MAX_NAME_LEN);
    while name.ends_with('_') && name.len() > category.prefix().len() + 1 {
        name.pop();
    }
    Ok(name)
}

/// Name of the one-hot column for `level` of nominal feature `label`. The
/// label part is shortened first so the level suffix survives truncation.
pub fn nominal_level_name(label: &str, level: &str, category: FeatureCategory) -> Result<String> {
    let body = body_of(label, category)?;
    let suffix = canonical_body(level);
    if suffix.is_empty() {
        return Err(Error::InvalidFeatureName(level.to_string(), "empty nominal level".into()));
    }
    let prefix = category.prefix();
    let room = MAX_NAME_LEN.saturating_sub(prefix.len() + 1 + suffix.len()).max(1);
    let mut head = body;
    head.truncate(room);
    while head.len() > 1 && head.ends_with('_') {
        head.pop();
    }
    let mut name = format!("{prefix}{head}_{suffix}");
    name.truncate(MAX_NAME_LEN);
    Ok(name)
}

/// Tracks canonical names produced during one ingest run and reports two
/// distinct raw labels that map onto the same name.
#[derive(Debug, Default)]
pub struct NameRegistry {
    seen: HashMap<String, String>,
}

impl NameRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `raw` produced `canonical`.
    pub fn claim(&mut self, canonical: &str, raw: &str) -> Result<()> {
        match self.seen.get(canonical) {
            Some(previous) if previous != raw => Err(Error::NameCollision {
                canonical: canonical.to_string(),
                first: previous.clone(),
                second: raw.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.seen.insert(canonical.to_string(), raw.to_string());
                Ok(())
            }
        }
    }

    pub fn canonicalize(&mut self, raw: &str, category: FeatureCategory) -> Result<String> {
        let name = canonicalize_feature_name(raw, category)?;
        self.claim(&name, raw)?;
        Ok(name)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}
