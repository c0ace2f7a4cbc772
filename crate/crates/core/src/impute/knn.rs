use rayon::prelude::*;

use super::{column_means, column_names, ImputeDiagnostics, ImputeMethod, ImputedMatrix};
use crate::aggregate::AggregatedMatrix;
use crate::error::{Error, Result};

/// Neighbor lists for every language with a missing cell, sorted by masked
/// distance. Built once and reusable for any k.
#[derive(Debug, Clone)]
pub struct KnnModel<'a> {
    matrix: &'a AggregatedMatrix,
    neighbors: Vec<Vec<(f64, usize)>>,
    means: Vec<f64>,
    empty_columns: Vec<usize>,
}

/// Mean absolute difference over features known in both rows.
fn masked_distance(matrix: &AggregatedMatrix, a: usize, b: usize) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (x, y) in matrix.row(a).iter().zip(matrix.row(b)) {
        if let (Some(x), Some(y)) = (x.value(), y.value()) {
            sum += (x - y).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

impl<'a> KnnModel<'a> {
    pub fn fit(matrix: &'a AggregatedMatrix) -> Result<Self> {
        if matrix.n_languages() < 2 {
            return Err(Error::InvalidParameter("k-NN imputation needs at least 2 languages".into()));
        }
        let (means, empty_columns) = column_means(matrix)?;
        let neighbors = (0..matrix.n_languages())
            .into_par_iter()
            .map(|l| {
                if matrix.row(l).iter().all(|c| c.is_known()) {
                    return Vec::new();
                }
                let mut list: Vec<(f64, usize)> = (0..matrix.n_languages())
                    .filter(|&j| j != l)
                    .filter_map(|j| masked_distance(matrix, l, j).map(|d| (d, j)))
                    .collect();
                list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                list
            })
            .collect();
        Ok(KnnModel { matrix, neighbors, means, empty_columns })
    }

    /// Raw (unrounded) prediction for one cell.
    pub fn predict(&self, language: usize, feature: usize, k: usize) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for &(_, j) in &self.neighbors[language] {
            if n == k {
                break;
            }
            if let Some(v) = self.matrix.get(j, feature).value() {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            self.means[feature]
        } else {
            sum / n as f64
        }
    }

    pub fn impute(&self, k: usize) -> Result<ImputedMatrix> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let m = self.matrix;
        let nf = m.n_features();
        let missing: Vec<usize> =
            m.cells().iter().enumerate().filter(|(_, c)| c.is_missing()).map(|(i, _)| i).collect();
        let fills: Vec<f64> = missing.par_iter().map(|&i| self.predict(i / nf, i % nf, k)).collect();
        let diagnostics = ImputeDiagnostics {
            converged: true,
            all_missing_columns: column_names(m, &self.empty_columns),
            ..Default::default()
        };
        Ok(ImputedMatrix::assemble(m, fills, ImputeMethod::Knn { k }, diagnostics))
    }
}

/// Averages the k nearest languages that know the feature; falls back to the
/// column mean when no such language shares data with the target.
pub fn impute_knn(matrix: &AggregatedMatrix, k: usize) -> Result<ImputedMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    KnnModel::fit(matrix)?.impute(k)
}
