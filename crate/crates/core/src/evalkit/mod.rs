//! Evaluation kit: the masked imputation quality test, k selection for
//! k-NN, rank correlation with a permutation test, and coverage counts.

mod casestudy;
mod coverage;
mod rank;
pub mod synthetic;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use casestudy::{read_case_study, read_case_study_path, run_case_study, CaseStudyReport, CaseStudyRow};
pub use coverage::{coverage_report, CoverageReport, TierCounts};
pub use rank::{
    kendall_tau, perm_both_exact, perm_both_test, CorrelationResult, PermTestResult, DELTA_EPSILON, MAX_EXACT_PAIRS,
};

use crate::aggregate::{AggregatedMatrix, AggregationMode};
use crate::error::{Error, Result};
use crate::impute::{binarize, fill_dialects, ImputedMatrix, Imputer, KnnModel};
use crate::kb::{CellValue, FeatureCategory};

/// Share of observed cells hidden by the quality test.
pub const MASK_FRACTION: f64 = 0.2;
pub const MIN_OBSERVED: usize = 5;
pub const DEFAULT_KS: [usize; 5] = [3, 6, 9, 12, 15];
pub const DEFAULT_FOLDS: usize = 5;

/// Binary classification scores, value 1 being the positive class.
/// Undefined ratios are reported as 0 with the matching flag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub count: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub count: usize,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QualityMetrics {
    Classification(ClassificationMetrics),
    Regression(RegressionMetrics),
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn classification_metrics(truth: &[f64], predicted: &[f64]) -> ClassificationMetrics {
    let (mut tp, mut fp, mut tn, mut fnn) = (0.0, 0.0, 0.0, 0.0);
    for (t, p) in truth.iter().zip(predicted) {
        match (binarize(*t) == 1.0, binarize(*p) == 1.0) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fnn += 1.0,
        }
    }
    let (accuracy, _) = ratio(tp + tn, tp + tn + fp + fnn);
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fnn);
    let (f1, f1_undefined) = ratio(2.0 * precision * recall, precision + recall);
    ClassificationMetrics {
        count: truth.len(),
        accuracy,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    }
}

pub fn regression_metrics(truth: &[f64], predicted: &[f64]) -> RegressionMetrics {
    let n = truth.len();
    if n == 0 {
        return RegressionMetrics { count: 0, rmse: 0.0, mae: 0.0 };
    }
    let (mut sq, mut abs) = (0.0, 0.0);
    for (t, p) in truth.iter().zip(predicted) {
        sq += (t - p) * (t - p);
        abs += (t - p).abs();
    }
    RegressionMetrics { count: n, rmse: (sq / n as f64).sqrt(), mae: abs / n as f64 }
}

impl QualityMetrics {
    pub fn compute(mode: AggregationMode, truth: &[f64], predicted: &[f64]) -> Self {
        match mode {
            AggregationMode::Union => QualityMetrics::Classification(classification_metrics(truth, predicted)),
            AggregationMode::Average => QualityMetrics::Regression(regression_metrics(truth, predicted)),
        }
    }

    pub fn f1(&self) -> Option<f64> {
        match self {
            QualityMetrics::Classification(c) => Some(c.f1),
            QualityMetrics::Regression(_) => None,
        }
    }

    pub fn rmse(&self) -> Option<f64> {
        match self {
            QualityMetrics::Classification(_) => None,
            QualityMetrics::Regression(r) => Some(r.rmse),
        }
    }

    /// Single quality score in `[0, 1]`: F1, or 1 − RMSE.
    pub fn gamma(&self) -> f64 {
        match self {
            QualityMetrics::Classification(c) => c.f1,
            QualityMetrics::Regression(r) => (1.0 - r.rmse).clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mode: AggregationMode,
    pub method: String,
    pub seed: u64,
    pub dialect_fill: bool,
    pub observed_count: usize,
    pub masked_count: usize,
    pub metrics: QualityMetrics,
    pub per_category: BTreeMap<FeatureCategory, QualityMetrics>,
}

/// A quality test together with what it hid and what came back.
#[derive(Debug, Clone)]
pub struct QualityRun {
    pub report: QualityReport,
    /// Hidden (language, feature) positions in row-major order.
    pub masked: Vec<(usize, usize)>,
    pub imputed: ImputedMatrix,
}

/// Scores predictions at `positions` against the true values.
fn score(
    truth: &AggregatedMatrix,
    positions: &[(usize, usize)],
    predicted: impl Fn(usize, usize) -> f64,
) -> (QualityMetrics, BTreeMap<FeatureCategory, QualityMetrics>) {
    let mut all = (Vec::new(), Vec::new());
    let mut by_cat: BTreeMap<FeatureCategory, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for &(l, f) in positions {
        let t = truth.get(l, f).value().expect("scored cells are known in the truth matrix");
        let p = predicted(l, f);
        all.0.push(t);
        all.1.push(p);
        let e = by_cat.entry(truth.category_of(f)).or_default();
        e.0.push(t);
        e.1.push(p);
    }
    let mode = truth.mode;
    let per_category = by_cat.into_iter().map(|(c, (t, p))| (c, QualityMetrics::compute(mode, &t, &p))).collect();
    (QualityMetrics::compute(mode, &all.0, &all.1), per_category)
}

/// Hides ⌊0.2·N⌋ observed cells chosen uniformly with `seed`, optionally
/// fills dialects from their parents, imputes, and scores the hidden cells.
pub fn quality_run(
    matrix: &AggregatedMatrix,
    imputer: &dyn Imputer,
    seed: u64,
    dialect_fill: bool,
) -> Result<QualityRun> {
    let observed = matrix.observed_positions();
    if observed.len() < MIN_OBSERVED {
        return Err(Error::TooFewObserved { have: observed.len(), need: MIN_OBSERVED });
    }
    let n_mask = (observed.len() as f64 * MASK_FRACTION).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, observed.len(), n_mask).into_vec();
    picks.sort_unstable();
    let masked: Vec<(usize, usize)> = picks.into_iter().map(|i| observed[i]).collect();

    let mut test = matrix.clone();
    for &(l, f) in &masked {
        test.set(l, f, CellValue::Missing);
    }
    if dialect_fill {
        test = fill_dialects(&test, &matrix.languages);
    }
    let imputed = imputer.impute(&test)?;
    let (metrics, per_category) = score(matrix, &masked, |l, f| imputed.get(l, f));
    let report = QualityReport {
        mode: matrix.mode,
        method: imputer.label(),
        seed,
        dialect_fill,
        observed_count: observed.len(),
        masked_count: masked.len(),
        metrics,
        per_category,
    };
    Ok(QualityRun { report, masked, imputed })
}

pub fn quality_test(
    matrix: &AggregatedMatrix,
    imputer: &dyn Imputer,
    seed: u64,
    dialect_fill: bool,
) -> Result<QualityReport> {
    quality_run(matrix, imputer, seed, dialect_fill).map(|r| r.report)
}

/// Scores an imputation of `holed` against the complete `truth`, over the
/// cells that were missing in `holed`.
pub fn score_against_truth(
    truth: &AggregatedMatrix,
    holed: &AggregatedMatrix,
    imputed: &ImputedMatrix,
) -> QualityMetrics {
    let n = holed.n_features();
    let holes: Vec<(usize, usize)> =
        holed.cells().iter().enumerate().filter(|(_, c)| c.is_missing()).map(|(i, _)| (i / n, i % n)).collect();
    score(truth, &holes, |l, f| imputed.get(l, f)).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelection {
    pub k: usize,
    /// Mean fold score per candidate: F1 (union) or RMSE (average).
    pub scores: Vec<(usize, f64)>,
}

/// Cross-validated choice of k for k-NN imputation. Observed cells are
/// shuffled with `seed` and dealt into `folds` folds; each fold is hidden in
/// turn. Union maximizes F1, average minimizes RMSE; ties go to the
/// smaller k.
pub fn knn_select_k(matrix: &AggregatedMatrix, candidates: &[usize], folds: usize, seed: u64) -> Result<KSelection> {
    let mut ks: Vec<usize> = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::InvalidParameter("candidate ks must be positive and non-empty".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    let mut pool = matrix.observed_positions();
    if pool.len() < folds.max(MIN_OBSERVED) {
        return Err(Error::TooFewObserved { have: pool.len(), need: folds.max(MIN_OBSERVED) });
    }
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let union = matrix.mode == AggregationMode::Union;
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|fold| {
            let held: Vec<(usize, usize)> = pool.iter().skip(fold).step_by(folds).copied().collect();
            let mut train = matrix.clone();
            for &(l, f) in &held {
                train.set(l, f, CellValue::Missing);
            }
            let model = KnnModel::fit(&train)?;
            Ok(ks
                .iter()
                .map(|&k| {
                    let (metrics, _) = score(matrix, &held, |l, f| {
                        let p = model.predict(l, f, k).clamp(0.0, 1.0);
                        if union {
                            binarize(p)
                        } else {
                            p
                        }
                    });
                    if union {
                        metrics.f1().expect("union scores are classification metrics")
                    } else {
                        metrics.rmse().expect("average scores are regression metrics")
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(usize, f64)> =
        ks.iter().enumerate().map(|(i, &k)| (k, per_fold.iter().map(|s| s[i]).sum::<f64>() / folds as f64)).collect();
    let mut best = scores[0];
    for &(k, s) in &scores[1..] {
        let better = if union { s > best.1 } else { s < best.1 };
        if better {
            best = (k, s);
        }
    }
    Ok(KSelection { k: best.0, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impute::ImputeMethod;

    /// Returns the held-out truth for every missing cell.
    struct Oracle<'a>(&'a AggregatedMatrix);

    impl Imputer for Oracle<'_> {
        fn impute(&self, m: &AggregatedMatrix) -> Result<ImputedMatrix> {
            let n = m.n_features();
            let fills: Vec<f64> = (0..m.cells().len())
                .filter(|&i| m.cells()[i].is_missing())
                .map(|i| self.0.get(i / n, i % n).value().unwrap())
                .collect();
            Ok(ImputedMatrix::assemble(m, fills, ImputeMethod::External { name: "oracle".into() }, Default::default()))
        }
    }

    struct Constant(f64);

    impl Imputer for Constant {
        fn impute(&self, m: &AggregatedMatrix) -> Result<ImputedMatrix> {
            let fills = vec![self.0; m.cells().len() - m.observed_count()];
            Ok(ImputedMatrix::assemble(
                m,
                fills,
                ImputeMethod::External { name: "constant".into() },
                Default::default(),
            ))
        }
    }

    fn grid(
        mode: AggregationMode,
        rows: usize,
        cols: usize,
        f: impl Fn(usize, usize) -> Option<f64>,
    ) -> AggregatedMatrix {
        let names: Vec<String> = (0..rows).map(|i| format!("lang{i:04}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let feats: Vec<String> =
            (0..cols).map(|j| if j % 2 == 0 { format!("S_F{j}") } else { format!("P_F{j}") }).collect();
        let feats: Vec<&str> = feats.iter().map(String::as_str).collect();
        let rows: Vec<Vec<Option<f64>>> = (0..rows).map(|r| (0..cols).map(|c| f(r, c)).collect()).collect();
        AggregatedMatrix::from_rows(mode, &names, &feats, &rows).unwrap()
    }

    #[test]
    fn ten_observed_cells_mask_two() {
        let m = grid(AggregationMode::Union, 5, 2, |r, _| Some((r % 2) as f64));
        let run = quality_run(&m, &ImputeMethod::Mean, 1, false).unwrap();
        assert_eq!(run.report.masked_count, 2);
        assert_eq!(run.masked.len(), 2);
    }

    #[test]
    fn too_few_observed() {
        let m = grid(AggregationMode::Union, 2, 2, |_, _| Some(1.0));
        assert!(matches!(quality_test(&m, &ImputeMethod::Mean, 0, false), Err(Error::TooFewObserved { have: 4, .. })));
    }

    #[test]
    fn oracle_scores_perfectly() {
        let u = grid(AggregationMode::Union, 10, 4, |r, c| Some(((r + c) % 2) as f64));
        let r = quality_test(&u, &Oracle(&u), 3, false).unwrap();
        assert_eq!(r.metrics.f1(), Some(1.0));
        let a = grid(AggregationMode::Average, 10, 4, |r, c| Some((r * c) as f64 / 27.0));
        let r = quality_test(&a, &Oracle(&a), 3, false).unwrap();
        assert_eq!(r.metrics.rmse(), Some(0.0));
    }

    #[test]
    fn constant_zero_confusion_matrix() {
        let c = classification_metrics(&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.accuracy, 0.5);
        assert_eq!(c.recall, 0.0);
        assert!(c.precision_undefined);
        assert!(c.f1_undefined);
        assert!(!c.recall_undefined);
    }

    #[test]
    fn half_counts_as_positive() {
        let c = classification_metrics(&[1.0], &[0.5]);
        assert_eq!(c.f1, 1.0);
    }

    #[test]
    fn seeded_runs_repeat_and_categories_partition() {
        let m = grid(
            AggregationMode::Union,
            12,
            6,
            |r, c| if (r + c) % 5 == 0 { None } else { Some(((r * c) % 2) as f64) },
        );
        let a = quality_test(&m, &Constant(1.0), 9, true).unwrap();
        let b = quality_test(&m, &Constant(1.0), 9, true).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let total: usize = a
            .per_category
            .values()
            .map(|m| match m {
                QualityMetrics::Classification(c) => c.count,
                QualityMetrics::Regression(r) => r.count,
            })
            .sum();
        assert_eq!(total, a.masked_count);
    }

    #[test]
    fn masked_dialect_cells_can_come_back_from_the_parent() {
        use crate::kb::LanguageRecord;
        let mut m = grid(AggregationMode::Union, 6, 1, |_, _| Some(1.0));
        m.languages[1] = LanguageRecord::new("lang0001").with_parent("lang0000");
        // constant 0 is wrong everywhere, so any correct answer came from the parent
        for seed in 0..20 {
            let run = quality_run(&m, &Constant(0.0), seed, true).unwrap();
            for &(l, f) in &run.masked {
                let expected = if l == 1 && !run.masked.contains(&(0, 0)) { 1.0 } else { 0.0 };
                assert_eq!(run.imputed.get(l, f), expected);
            }
        }
    }

    #[test]
    fn k_selection_tie_and_dominance() {
        // every row identical: all ks predict the same value
        let flat = grid(AggregationMode::Average, 20, 3, |_, c| Some(c as f64 / 2.0));
        assert_eq!(knn_select_k(&flat, &DEFAULT_KS, 5, 1).unwrap().k, 3);

        // tight clusters of 4: only the first few neighbours share the cluster
        let clustered = grid(AggregationMode::Average, 40, 6, |r, c| Some(((r / 4 * 7 + c * 3) % 10) as f64 / 9.0));
        let sel = knn_select_k(&clustered, &DEFAULT_KS, 5, 2).unwrap();
        let best = sel.scores.iter().cloned().fold((0, f64::INFINITY), |b, s| if s.1 < b.1 { s } else { b });
        assert_eq!(sel.k, best.0);
        assert_eq!(sel.k, 3);
    }

    #[test]
    fn k_selection_errors() {
        let m = grid(AggregationMode::Union, 2, 1, |_, _| Some(1.0));
        assert!(matches!(knn_select_k(&m, &DEFAULT_KS, 5, 0), Err(Error::TooFewObserved { .. })));
        assert!(knn_select_k(&m, &[], 5, 0).is_err());
    }
}
