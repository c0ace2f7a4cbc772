//! Cross-database redundancy rules: values of one feature inferred from
//! another, with equivalent features dropped from the incoming batch.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use petgraph::algo::toposort;
use petgraph::graphmap::DiGraphMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{Batch, FeatureTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleDirection {
    Implies,
    Equivalent,
}

impl FromStr for RuleDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "implies" | "=>" => Ok(RuleDirection::Implies),
            "equivalent" | "<=>" => Ok(RuleDirection::Equivalent),
            other => Err(format!("unknown rule direction `{other}`")),
        }
    }
}

/// `from_feature` known with value `x` lets us fill `to_feature` with
/// `polarity[x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRule {
    pub from_feature: String,
    pub to_feature: String,
    pub direction: RuleDirection,
    pub polarity: Vec<(f64, f64)>,
}

impl InferenceRule {
    pub fn new(from: &str, to: &str, direction: RuleDirection, polarity: Vec<(f64, f64)>) -> Result<Self> {
        let rule = InferenceRule { from_feature: from.to_string(), to_feature: to.to_string(), direction, polarity };
        rule.validate()?;
        Ok(rule)
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidRule { from: self.from_feature.clone(), to: self.to_feature.clone(), reason: reason.to_string() }
    }

    fn validate(&self) -> Result<()> {
        if self.from_feature == self.to_feature {
            return Err(self.invalid("a feature cannot infer itself"));
        }
        if self.polarity.is_empty() {
            return Err(self.invalid("empty value mapping"));
        }
        for (i, (a, b)) in self.polarity.iter().enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(self.invalid("non-finite value"));
            }
            for (c, d) in &self.polarity[..i] {
                if a == c && b != d {
                    return Err(self.invalid("value mapped twice"));
                }
                // Equivalence must be invertible so the rule reads the same
                // in both directions.
                if self.direction == RuleDirection::Equivalent && b == d && a != c {
                    return Err(self.invalid("equivalent rule mapping is not one-to-one"));
                }
            }
        }
        Ok(())
    }

    pub fn map(&self, from_value: f64) -> Option<f64> {
        self.polarity.iter().find(|(a, _)| *a == from_value).map(|(_, b)| *b)
    }
}

#[derive(Deserialize)]
struct RuleRow {
    from_feature: String,
    to_feature: String,
    direction: String,
    from_value: f64,
    to_value: f64,
}

/// Rows of one rule: direction, polarity pairs, first line.
type RuleRows = (RuleDirection, Vec<(f64, f64)>, u64);

/// Reads `from_feature,to_feature,direction,from_value,to_value` rows; rows
/// sharing (from, to, direction) are merged into one rule.
pub fn read_rules(reader: impl Read, origin: &str) -> Result<Vec<InferenceRule>> {
    let mut grouped: BTreeMap<(String, String), RuleRows> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: RuleRow =
            record.deserialize(Some(&headers)).map_err(|e| Error::format(origin, line, e.to_string()))?;
        let direction: RuleDirection = row.direction.parse().map_err(|m| Error::format(origin, line, m))?;
        let entry = grouped.entry((row.from_feature, row.to_feature)).or_insert_with(|| (direction, Vec::new(), line));
        if entry.0 != direction {
            return Err(Error::format(origin, line, "rule direction differs from an earlier row"));
        }
        entry.1.push((row.from_value, row.to_value));
    }
    grouped
        .into_iter()
        .map(|((from, to), (direction, polarity, line))| {
            InferenceRule::new(&from, &to, direction, polarity).map_err(|e| Error::format(origin, line, e.to_string()))
        })
        .collect()
}

pub fn read_rules_path(path: &Path) -> Result<Vec<InferenceRule>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rules(file, &path.display().to_string())
}

fn check_acyclic(rules: &[InferenceRule]) -> Result<()> {
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for rule in rules.iter().filter(|r| r.direction == RuleDirection::Implies) {
        graph.add_edge(rule.from_feature.as_str(), rule.to_feature.as_str(), ());
    }
    toposort(&graph, None).map(|_| ()).map_err(|cycle| Error::CyclicRules(cycle.node_id().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOutcome {
    pub batch: Batch,
    pub inferred_cells: usize,
    /// Features dropped because an equivalent feature carries their values.
    pub removed_features: Vec<String>,
}

type CellIndex = HashMap<(String, String, String), f64>;

/// Applies `rules` to `batch` until nothing new can be inferred.
///
/// A target cell is only filled where it is missing in both the batch and
/// `context`. The source value for a language is the consensus of its known
/// `from_feature` values across sources; languages whose sources disagree
/// are skipped. Target cells go into every source that already carries the
/// target feature. After inference, the `from_feature` of each equivalent
/// rule is removed from the batch.
pub fn apply_inference(
    rules: &[InferenceRule],
    batch: Batch,
    context: Option<&FeatureTensor>,
) -> Result<InferenceOutcome> {
    check_acyclic(rules)?;
    for rule in rules {
        rule.validate()?;
        for feature in [&rule.from_feature, &rule.to_feature] {
            let known = batch.features.iter().any(|d| &d.name == feature)
                || context.is_some_and(|t| t.feature_position(feature).is_ok());
            // An equivalent rule's source column is gone once the rule has run.
            let already_removed = rule.direction == RuleDirection::Equivalent && feature == &rule.from_feature;
            if !known && !already_removed {
                return Err(Error::UnknownFeature(feature.clone()));
            }
        }
    }

    let mut batch = batch;
    let mut index: CellIndex =
        batch.cells.iter().map(|c| ((c.language.clone(), c.feature.clone(), c.source.clone()), c.value)).collect();
    let mut inferred = 0;

    // Each pass only adds cells; a pass that adds none is a fixpoint.
    loop {
        let mut added = 0;
        for rule in rules {
            for (language, source, value) in pending_inferences(rule, &index, context) {
                index.insert((language.clone(), rule.to_feature.clone(), source.clone()), value);
                batch.push(&language, &rule.to_feature, &source, value);
                added += 1;
            }
        }
        inferred += added;
        if added == 0 {
            break;
        }
    }

    let removed: BTreeSet<String> = rules
        .iter()
        .filter(|r| r.direction == RuleDirection::Equivalent)
        .map(|r| r.from_feature.clone())
        .filter(|f| batch.features.iter().any(|d| &d.name == f) || batch.cells.iter().any(|c| &c.feature == f))
        .collect();
    batch.cells.retain(|c| !removed.contains(&c.feature));
    batch.features.retain(|d| !removed.contains(&d.name));

    Ok(InferenceOutcome { batch, inferred_cells: inferred, removed_features: removed.into_iter().collect() })
}

fn pending_inferences(
    rule: &InferenceRule,
    index: &CellIndex,
    context: Option<&FeatureTensor>,
) -> Vec<(String, String, f64)> {
    // language -> Some(value) while sources agree, None once they disagree
    let mut from_values: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let mut note = |language: &str, value: f64| {
        from_values
            .entry(language.to_string())
            .and_modify(|v| {
                if *v != Some(value) {
                    *v = None;
                }
            })
            .or_insert(Some(value));
    };
    let mut target_sources: BTreeSet<String> = BTreeSet::new();
    for ((language, feature, source), &value) in index {
        if feature == &rule.from_feature {
            note(language, value);
        } else if feature == &rule.to_feature {
            target_sources.insert(source.clone());
        }
    }
    if let Some(tensor) = context {
        if let Ok(f) = tensor.feature_position(&rule.from_feature) {
            for (l, feat, _, v) in tensor.known_cells() {
                if feat == f {
                    note(&tensor.languages()[l].glottocode, v);
                }
            }
        }
        if let Ok(f) = tensor.feature_position(&rule.to_feature) {
            for (_, feat, s, _) in tensor.known_cells() {
                if feat == f {
                    target_sources.insert(tensor.sources()[s].clone());
                }
            }
        }
    }

    let known_in_context = |language: &str, source: &str| {
        context.is_some_and(|t| t.get_cell(language, &rule.to_feature, source).map(|c| c.is_known()).unwrap_or(false))
    };

    let mut out = Vec::new();
    for (language, value) in &from_values {
        let Some(target) = value.and_then(|v| rule.map(v)) else { continue };
        for source in &target_sources {
            let key = (language.clone(), rule.to_feature.clone(), source.clone());
            if !index.contains_key(&key) && !known_in_context(language, source) {
                out.push((language.clone(), source.clone(), target));
            }
        }
    }
    out
}
