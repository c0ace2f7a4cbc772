use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::kb::{FeatureCategory, FeatureTensor, ResourceTier};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TierCounts {
    pub total: usize,
    pub by_tier: BTreeMap<ResourceTier, usize>,
}

impl TierCounts {
    fn add(&mut self, tier: ResourceTier) {
        self.total += 1;
        *self.by_tier.entry(tier).or_default() += 1;
    }
}

/// How many languages have any data per feature category, split by tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub languages: usize,
    pub per_category: BTreeMap<FeatureCategory, TierCounts>,
    /// Languages with at least one known typological cell.
    pub typological_eligible: TierCounts,
}

/// Counts a language toward a category when it has a known cell for any
/// feature of that category in any source. `tiers` overrides the tier
/// stored on the language record.
pub fn coverage_report(tensor: &FeatureTensor, tiers: Option<&HashMap<String, ResourceTier>>) -> CoverageReport {
    let mut per_language: Vec<BTreeSet<FeatureCategory>> = vec![BTreeSet::new(); tensor.languages().len()];
    for (l, f, _, _) in tensor.known_cells() {
        per_language[l].insert(tensor.features()[f].category);
    }
    let mut per_category: BTreeMap<FeatureCategory, TierCounts> =
        FeatureCategory::ALL.iter().map(|c| (*c, TierCounts::default())).collect();
    let mut eligible = TierCounts::default();
    for (record, categories) in tensor.languages().iter().zip(&per_language) {
        let tier = tiers.and_then(|t| t.get(&record.glottocode).copied()).unwrap_or(record.resource_tier);
        for c in categories {
            per_category.get_mut(c).expect("all categories present").add(tier);
        }
        if categories.iter().any(|c| c.is_typological()) {
            eligible.add(tier);
        }
    }
    CoverageReport { languages: tensor.languages().len(), per_category, typological_eligible: eligible }
}
