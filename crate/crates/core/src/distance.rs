//! Pairwise language distances over aggregated or imputed matrices.
//!
//! A distance is only defined over the features both languages know. When
//! that set is empty, or either masked vector has zero norm, the answer is
//! [`DistanceResult::NotComputable`] rather than a made-up number.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatedMatrix, AggregationMode, SourceSelector};
use crate::error::{Error, Result};
use crate::impute::{ImputeMethod, ImputedMatrix};
use crate::kb::{FeatureCategory, FeatureDescriptor, FeatureSelector, LanguageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Angular,
    Cosine,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Angular => "angular",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "angular" => Ok(Metric::Angular),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NotComputable {
    NoSharedData,
    ZeroVector,
}

impl NotComputable {
    pub fn reason(self) -> &'static str {
        match self {
            NotComputable::NoSharedData => "no shared data",
            NotComputable::ZeroVector => "zero vector",
        }
    }
}

impl fmt::Display for NotComputable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceResult {
    Value { d: f64, shared_features: usize, metric: Metric, aggregation: AggregationMode },
    NotComputable(NotComputable),
}

impl DistanceResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            DistanceResult::Value { d, .. } => Some(*d),
            DistanceResult::NotComputable(_) => None,
        }
    }

    pub fn is_computable(&self) -> bool {
        self.value().is_some()
    }

    /// JSON-ready record for the pair `(a, b)`.
    pub fn record(&self, a: &str, b: &str) -> DistanceRecord {
        let pair = [a.to_string(), b.to_string()];
        match *self {
            DistanceResult::Value { d, shared_features, metric, aggregation } => {
                DistanceRecord::Value { pair, metric, aggregation, distance: d, shared_features }
            }
            DistanceResult::NotComputable(r) => {
                DistanceRecord::NotComputable { pair, status: "not_computable".into(), reason: r.reason().into() }
            }
        }
    }
}

/// Serialized form of a pair distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistanceRecord {
    Value { pair: [String; 2], metric: Metric, aggregation: AggregationMode, distance: f64, shared_features: usize },
    NotComputable { pair: [String; 2], status: String, reason: String },
}

/// Everything that shapes one distance query.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRequest {
    pub lang_a: String,
    pub lang_b: String,
    pub metric: Metric,
    pub aggregation: AggregationMode,
    pub features: FeatureSelector,
    pub sources: SourceSelector,
    /// Impute before measuring; `None` uses observed data only.
    pub imputer: Option<ImputeMethod>,
}

impl DistanceRequest {
    pub fn new(lang_a: impl Into<String>, lang_b: impl Into<String>) -> Self {
        DistanceRequest {
            lang_a: lang_a.into(),
            lang_b: lang_b.into(),
            metric: Metric::Angular,
            aggregation: AggregationMode::Union,
            features: FeatureSelector::All,
            sources: SourceSelector::AllSources,
            imputer: None,
        }
    }

    pub fn metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn aggregation(mut self, mode: AggregationMode) -> Self {
        self.aggregation = mode;
        self
    }

    pub fn features(mut self, features: FeatureSelector) -> Self {
        self.features = features;
        self
    }

    pub fn sources(mut self, sources: SourceSelector) -> Self {
        self.sources = sources;
        self
    }

    pub fn imputer(mut self, imputer: Option<ImputeMethod>) -> Self {
        self.imputer = imputer;
        self
    }

    pub fn with_pair(&self, a: &str, b: &str) -> Self {
        DistanceRequest { lang_a: a.to_string(), lang_b: b.to_string(), ..self.clone() }
    }
}

/// Read access shared by aggregated and imputed matrices.
pub trait FeatureMatrix: Sync {
    fn mode(&self) -> AggregationMode;
    fn languages(&self) -> &[LanguageRecord];
    fn features(&self) -> &[FeatureDescriptor];
    fn cell(&self, language: usize, feature: usize) -> Option<f64>;

    fn language_index(&self, id: &str) -> Result<usize> {
        let langs = self.languages();
        langs
            .iter()
            .position(|l| l.glottocode == id)
            .or_else(|| langs.iter().position(|l| l.iso639_3.as_deref() == Some(id)))
            .ok_or_else(|| Error::UnknownLanguage(id.to_string()))
    }
}

impl FeatureMatrix for AggregatedMatrix {
    fn mode(&self) -> AggregationMode {
        self.mode
    }
    fn languages(&self) -> &[LanguageRecord] {
        &self.languages
    }
    fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }
    fn cell(&self, language: usize, feature: usize) -> Option<f64> {
        self.get(language, feature).value()
    }
}

impl FeatureMatrix for ImputedMatrix {
    fn mode(&self) -> AggregationMode {
        self.mode
    }
    fn languages(&self) -> &[LanguageRecord] {
        &self.languages
    }
    fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }
    fn cell(&self, language: usize, feature: usize) -> Option<f64> {
        Some(self.get(language, feature))
    }
}

/// Distance between two vectors given as aligned pairs. Only the pairs
/// passed in count as shared.
///
/// The angle comes from the normalized difference and sum vectors rather
/// than `acos` of the cosine, which loses half the digits near zero.
pub fn vector_distance(
    pairs: impl IntoIterator<Item = (f64, f64)>,
    metric: Metric,
    aggregation: AggregationMode,
) -> DistanceResult {
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
    if pairs.is_empty() {
        return DistanceResult::NotComputable(NotComputable::NoSharedData);
    }
    let na = pairs.iter().map(|(x, _)| x * x).sum::<f64>().sqrt();
    let nb = pairs.iter().map(|(_, y)| y * y).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return DistanceResult::NotComputable(NotComputable::ZeroVector);
    }
    let n = pairs.len();
    let d = if pairs.iter().all(|(x, y)| x == y) {
        0.0
    } else {
        let (mut diff, mut sum) = (0.0, 0.0);
        for (x, y) in &pairs {
            let (u, v) = (x / na, y / nb);
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        match metric {
            Metric::Cosine => (diff / 2.0).clamp(0.0, 1.0),
            Metric::Angular => (FRAC_2_PI * 2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, 1.0),
        }
    };
    DistanceResult::Value { d, shared_features: n, metric, aggregation }
}

fn pair_distance(matrix: &dyn FeatureMatrix, a: usize, b: usize, columns: &[usize], metric: Metric) -> DistanceResult {
    let pairs = columns.iter().filter_map(|&f| Some((matrix.cell(a, f)?, matrix.cell(b, f)?)));
    vector_distance(pairs, metric, matrix.mode())
}

fn check_mode(matrix: &dyn FeatureMatrix, requested: AggregationMode) -> Result<()> {
    if matrix.mode() != requested {
        return Err(Error::ModeMismatch { matrix: matrix.mode().to_string(), requested: requested.to_string() });
    }
    Ok(())
}

/// Distance for one request against a matrix already built for it. The
/// request's source selector and imputer are assumed to have been applied
/// when the matrix was produced.
pub fn language_distance(req: &DistanceRequest, matrix: &dyn FeatureMatrix) -> Result<DistanceResult> {
    check_mode(matrix, req.aggregation)?;
    let a = matrix.language_index(&req.lang_a)?;
    let b = matrix.language_index(&req.lang_b)?;
    let columns = req.features.resolve(matrix.features())?;
    Ok(pair_distance(matrix, a, b, &columns, req.metric))
}

/// Symmetric matrix of distances between `languages`. Individual pairs may be
/// not computable; that never aborts the batch.
pub fn distance_matrix(
    languages: &[String],
    template: &DistanceRequest,
    matrix: &dyn FeatureMatrix,
) -> Result<Vec<Vec<DistanceResult>>> {
    if languages.len() < 2 {
        return Err(Error::InvalidParameter("a distance matrix needs at least 2 languages".into()));
    }
    check_mode(matrix, template.aggregation)?;
    let rows: Vec<usize> = languages.iter().map(|l| matrix.language_index(l)).collect::<Result<_>>()?;
    let columns = template.features.resolve(matrix.features())?;
    let n = rows.len();
    let upper: Vec<Vec<DistanceResult>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| pair_distance(matrix, rows[i], rows[j], &columns, template.metric)).collect())
        .collect();
    let mut out = vec![vec![DistanceResult::NotComputable(NotComputable::NoSharedData); n]; n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, r) in row.into_iter().enumerate() {
            out[i][i + offset] = r;
            out[i + offset][i] = r;
        }
    }
    Ok(out)
}

/// Distance over the genetic (family membership) features only.
pub fn genetic_distance(
    lang_a: &str,
    lang_b: &str,
    matrix: &dyn FeatureMatrix,
    metric: Metric,
) -> Result<DistanceResult> {
    let req = DistanceRequest::new(lang_a, lang_b)
        .metric(metric)
        .aggregation(matrix.mode())
        .features(FeatureSelector::Category(FeatureCategory::Genetic));
    language_distance(&req, matrix)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<Option<f64>>], features: &[&str]) -> AggregatedMatrix {
        let names: Vec<String> = (0..rows.len()).map(|i| format!("lang{i:04}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        AggregatedMatrix::from_rows(AggregationMode::Union, &names, features, rows).unwrap()
    }

    fn req(a: usize, b: usize) -> DistanceRequest {
        DistanceRequest::new(format!("lang{a:04}"), format!("lang{b:04}"))
    }

    #[test]
    fn parallel_vectors_are_at_distance_zero() {
        let one =
            vector_distance([(0.015281991049207033, 0.6143270785569467)], Metric::Angular, AggregationMode::Average);
        assert_eq!(one.value(), Some(0.0));
        for metric in [Metric::Angular, Metric::Cosine] {
            let d = vector_distance([(0.2, 0.6), (0.1, 0.3), (0.7, 2.1)], metric, AggregationMode::Average);
            assert!(d.value().unwrap() < 1e-15, "{d:?}");
        }
    }

    #[test]
    fn orthogonal_vectors_are_at_distance_one() {
        let m = matrix(&[vec![Some(1.0), Some(0.0)], vec![Some(0.0), Some(1.0)]], &["S_A", "S_B"]);
        let d = language_distance(&req(0, 1), &m).unwrap();
        // (2/pi) * acos(0)
        assert!((d.value().unwrap() - 1.0).abs() < 1e-15);
        let d = language_distance(&req(0, 1).metric(Metric::Cosine), &m).unwrap();
        assert_eq!(d.value(), Some(1.0));
    }

    #[test]
    fn identical_vectors_are_at_distance_zero() {
        let m =
            matrix(&[vec![Some(1.0), Some(1.0), None], vec![Some(1.0), Some(1.0), Some(0.0)]], &["S_A", "S_B", "S_C"]);
        match language_distance(&req(0, 1), &m).unwrap() {
            DistanceResult::Value { d, shared_features, .. } => {
                assert_eq!(d, 0.0);
                assert_eq!(shared_features, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disjoint_data_is_not_computable() {
        let m = matrix(&[vec![Some(1.0), None], vec![None, Some(1.0)]], &["P_A", "P_B"]);
        assert_eq!(
            language_distance(&req(0, 1), &m).unwrap(),
            DistanceResult::NotComputable(NotComputable::NoSharedData)
        );
        let z = matrix(&[vec![Some(0.0)], vec![Some(1.0)]], &["P_A"]);
        assert_eq!(
            language_distance(&req(0, 1), &z).unwrap(),
            DistanceResult::NotComputable(NotComputable::ZeroVector)
        );
    }

    #[test]
    fn json_shapes() {
        let v = DistanceResult::Value {
            d: 0.48,
            shared_features: 123,
            metric: Metric::Angular,
            aggregation: AggregationMode::Union,
        };
        assert_eq!(
            serde_json::to_string(&v.record("a", "b")).unwrap(),
            r#"{"pair":["a","b"],"metric":"angular","aggregation":"union","distance":0.48,"shared_features":123}"#
        );
        let n = DistanceResult::NotComputable(NotComputable::NoSharedData);
        assert_eq!(
            serde_json::to_string(&n.record("a", "b")).unwrap(),
            r#"{"pair":["a","b"],"status":"not_computable","reason":"no shared data"}"#
        );
    }

    #[test]
    fn mode_mismatch_and_unknown_language() {
        let m = matrix(&[vec![Some(1.0)], vec![Some(1.0)]], &["S_A"]);
        assert!(matches!(
            language_distance(&req(0, 1).aggregation(AggregationMode::Average), &m),
            Err(Error::ModeMismatch { .. })
        ));
        assert!(matches!(language_distance(&req(0, 9), &m), Err(Error::UnknownLanguage(_))));
    }

    #[test]
    fn matrix_with_a_dataless_language() {
        let m = matrix(&[vec![Some(1.0), Some(0.0)], vec![Some(1.0), Some(0.0)], vec![None, None]], &["S_A", "S_B"]);
        let langs: Vec<String> = (0..3).map(|i| format!("lang{i:04}")).collect();
        let dm = distance_matrix(&langs, &req(0, 0), &m).unwrap();
        assert_eq!(dm[0][1].value(), Some(0.0));
        assert_eq!(dm[0][0].value(), Some(0.0));
        for i in 0..3 {
            assert!(!dm[2][i].is_computable());
            assert!(!dm[i][2].is_computable());
        }
    }

    #[test]
    fn genetic_distance_uses_family_features() {
        let m = matrix(
            &[
                vec![Some(1.0), Some(1.0), Some(0.0), Some(0.0)],
                vec![Some(0.0), Some(1.0), Some(0.0), Some(0.0)],
                vec![Some(1.0), Some(0.0), Some(1.0), Some(1.0)],
            ],
            &["S_A", "GEN_X", "GEN_Y", "GEN_Z"],
        );
        assert_eq!(genetic_distance("lang0000", "lang0001", &m, Metric::Angular).unwrap().value(), Some(0.0));
        let d = genetic_distance("lang0000", "lang0002", &m, Metric::Angular).unwrap().value().unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    fn cell() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), Just(Some(0.0)), Just(Some(1.0)), (0.0f64..=1.0).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn matrix_matches_pairwise_queries(rows in proptest::collection::vec(proptest::collection::vec(cell(), 4), 5)) {
            let m = matrix(&rows, &["S_A", "S_B", "P_C", "P_D"]);
            let langs: Vec<String> = (0..5).map(|i| format!("lang{i:04}")).collect();
            let dm = distance_matrix(&langs, &req(0, 0), &m).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert_eq!(dm[i][j], language_distance(&req(i, j), &m).unwrap());
                }
            }
        }

        #[test]
        fn category_equals_explicit_list(rows in proptest::collection::vec(proptest::collection::vec(cell(), 4), 2)) {
            let m = matrix(&rows, &["S_A", "P_B", "S_C", "INV_D"]);
            let by_cat = language_distance(&req(0, 1).features(FeatureSelector::Category(FeatureCategory::Syntactic)), &m).unwrap();
            let by_list = language_distance(&req(0, 1).features(FeatureSelector::ExplicitList(vec!["S_A".into(), "S_C".into()])), &m).unwrap();
            match (by_cat, by_list) {
                (DistanceResult::Value { d: x, .. }, DistanceResult::Value { d: y, .. }) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
