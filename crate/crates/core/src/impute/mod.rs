//! Missing-value imputation over aggregated matrices.
//!
//! Every imputer returns an [`ImputedMatrix`] whose observed cells are
//! copied bit-for-bit from the input; only missing cells are filled. Filled
//! values are clamped to `[0, 1]` and, for union-aggregated input, rounded
//! to `{0, 1}` at 0.5 (ties go to 1).

mod dialect;
mod knn;
mod soft;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dialect::fill_dialects;
pub use knn::{impute_knn, KnnModel};
pub use soft::{impute_softimpute, soft_impute_run, Lambda, SoftImputeConfig, SoftImputeRun};

use crate::aggregate::{AggregatedMatrix, AggregationMode};
use crate::error::{Error, Result};
use crate::kb::{CellValue, FeatureDescriptor, LanguageRecord};

/// Rounding applied to union-mode predictions.
pub const BINARY_THRESHOLD: f64 = 0.5;

pub fn binarize(value: f64) -> f64 {
    if value >= BINARY_THRESHOLD {
        1.0
    } else {
        0.0
    }
}

/// Which imputer produced a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ImputeMethod {
    Mean,
    Knn {
        k: usize,
    },
    SoftImpute(SoftImputeConfig),
    /// Values supplied by an outside tool (e.g. an autoencoder imputer).
    External {
        name: String,
    },
}

impl ImputeMethod {
    /// Short stable key, used to look up cached quality runs.
    pub fn key(&self) -> String {
        match self {
            ImputeMethod::Mean => "mean".into(),
            ImputeMethod::Knn { k } => format!("knn:{k}"),
            ImputeMethod::SoftImpute(_) => "softimpute".into(),
            ImputeMethod::External { name } => format!("external:{name}"),
        }
    }
}

impl fmt::Display for ImputeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for ImputeMethod {
    type Err = String;

    /// Accepts `mean`, `knn:<k>`, `softimpute`, `softimpute:<lambda>` and
    /// `external:<name>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("mean", None) => Ok(ImputeMethod::Mean),
            ("knn", Some(k)) => {
                let k: usize = k.parse().map_err(|_| format!("bad k `{k}`"))?;
                if k == 0 {
                    return Err("k must be positive".into());
                }
                Ok(ImputeMethod::Knn { k })
            }
            ("softimpute", None) => Ok(ImputeMethod::SoftImpute(SoftImputeConfig::default())),
            ("softimpute", Some(l)) => {
                let lambda: f64 = l.parse().map_err(|_| format!("bad lambda `{l}`"))?;
                if lambda.is_nan() || lambda < 0.0 {
                    return Err("lambda must be non-negative".into());
                }
                Ok(ImputeMethod::SoftImpute(SoftImputeConfig { lambda: Lambda::Fixed(lambda), ..Default::default() }))
            }
            ("external", Some(name)) if !name.is_empty() => Ok(ImputeMethod::External { name: name.to_string() }),
            _ => Err(format!("unknown imputer `{s}`")),
        }
    }
}

/// Run details that are not part of the imputed values themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ImputeDiagnostics {
    pub iterations: usize,
    /// False when an iterative imputer stopped at its iteration limit.
    pub converged: bool,
    /// Columns with no observed value, filled with the global mean.
    pub all_missing_columns: Vec<String>,
    /// Penalized objective after each iteration (SoftImpute only).
    pub objective_trace: Vec<f64>,
    pub lambda: Option<f64>,
}

/// Fully observed language × feature matrix plus a mask of imputed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedMatrix {
    pub mode: AggregationMode,
    pub languages: Vec<LanguageRecord>,
    pub features: Vec<FeatureDescriptor>,
    pub method: ImputeMethod,
    pub diagnostics: ImputeDiagnostics,
    values: Vec<f64>,
    imputed_mask: Vec<bool>,
}

impl ImputedMatrix {
    /// Assembles the output from the input matrix and raw fills for its
    /// missing cells (row-major, one per missing cell in order).
    pub(crate) fn assemble(
        source: &AggregatedMatrix,
        fills: impl IntoIterator<Item = f64>,
        method: ImputeMethod,
        diagnostics: ImputeDiagnostics,
    ) -> Self {
        let mut fills = fills.into_iter();
        let mut values = Vec::with_capacity(source.cells().len());
        let mut mask = Vec::with_capacity(source.cells().len());
        for cell in source.cells() {
            match cell {
                CellValue::Known(v) => {
                    values.push(*v);
                    mask.push(false);
                }
                CellValue::Missing => {
                    let raw = fills.next().expect("one fill per missing cell");
                    let v = if raw.is_finite() { raw.clamp(0.0, 1.0) } else { 0.0 };
                    values.push(match source.mode {
                        AggregationMode::Union => binarize(v),
                        AggregationMode::Average => v,
                    });
                    mask.push(true);
                }
            }
        }
        debug_assert!(fills.next().is_none(), "more fills than missing cells");
        ImputedMatrix {
            mode: source.mode,
            languages: source.languages.clone(),
            features: source.features.clone(),
            method,
            diagnostics,
            values,
            imputed_mask: mask,
        }
    }

    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn get(&self, language: usize, feature: usize) -> f64 {
        self.values[language * self.features.len() + feature]
    }

    pub fn is_imputed(&self, language: usize, feature: usize) -> bool {
        self.imputed_mask[language * self.features.len() + feature]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn imputed_mask(&self) -> &[bool] {
        &self.imputed_mask
    }

    pub fn imputed_count(&self) -> usize {
        self.imputed_mask.iter().filter(|m| **m).count()
    }

    pub fn language_position(&self, id: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l.glottocode == id)
            .or_else(|| self.languages.iter().position(|l| l.iso639_3.as_deref() == Some(id)))
            .ok_or_else(|| Error::UnknownLanguage(id.to_string()))
    }

    /// Dense export in the aggregated-matrix CSV layout.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        self.write_grid(writer, |i| format!("{}", self.values[i]))
    }

    /// Sibling mask export: 1 where a value was imputed, 0 where observed.
    pub fn write_mask_csv(&self, writer: impl Write) -> Result<()> {
        self.write_grid(writer, |i| if self.imputed_mask[i] { "1".into() } else { "0".into() })
    }

    fn write_grid(&self, writer: impl Write, cell: impl Fn(usize) -> String) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["language".to_string()];
        header.extend(self.features.iter().map(|f| f.name.clone()));
        w.write_record(&header)?;
        let n = self.features.len();
        for (l, lang) in self.languages.iter().enumerate() {
            let mut row = vec![lang.glottocode.clone()];
            row.extend((0..n).map(|f| cell(l * n + f)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// The imputed values viewed as an aggregated matrix with every cell known.
    pub fn to_aggregated(&self) -> AggregatedMatrix {
        AggregatedMatrix::from_cells(
            self.mode,
            self.languages.clone(),
            self.features.clone(),
            self.values.iter().map(|v| CellValue::Known(*v)).collect(),
        )
        .expect("imputed values are in range")
    }
}

/// Anything that can fill an aggregated matrix.
pub trait Imputer {
    fn impute(&self, matrix: &AggregatedMatrix) -> Result<ImputedMatrix>;

    /// Name recorded in quality reports.
    fn label(&self) -> String {
        "custom".into()
    }
}

impl Imputer for ImputeMethod {
    fn impute(&self, matrix: &AggregatedMatrix) -> Result<ImputedMatrix> {
        match self {
            ImputeMethod::Mean => impute_mean(matrix),
            ImputeMethod::Knn { k } => impute_knn(matrix, *k),
            ImputeMethod::SoftImpute(config) => impute_softimpute(matrix, config),
            ImputeMethod::External { name } => {
                Err(Error::InvalidParameter(format!("external imputer `{name}` needs a pre-imputed matrix file")))
            }
        }
    }

    fn label(&self) -> String {
        self.key()
    }
}

/// Column means over observed cells. Columns without observations get the
/// global mean and are listed in the second return value.
pub(crate) fn column_means(matrix: &AggregatedMatrix) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = matrix.n_features();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (i, cell) in matrix.cells().iter().enumerate() {
        if let CellValue::Known(v) = cell {
            sum[i % n] += v;
            count[i % n] += 1;
        }
    }
    let total: usize = count.iter().sum();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let global = sum.iter().sum::<f64>() / total as f64;
    let mut empty = Vec::new();
    let means = (0..n)
        .map(|f| {
            if count[f] == 0 {
                empty.push(f);
                global
            } else {
                sum[f] / count[f] as f64
            }
        })
        .collect();
    Ok((means, empty))
}

fn column_names(matrix: &AggregatedMatrix, columns: &[usize]) -> Vec<String> {
    columns.iter().map(|&c| matrix.features[c].name.clone()).collect()
}

/// Fills each missing cell with its column's observed mean.
pub fn impute_mean(matrix: &AggregatedMatrix) -> Result<ImputedMatrix> {
    let n = matrix.n_features();
    if matrix.observed_count() == matrix.cells().len() {
        return Ok(ImputedMatrix::assemble(matrix, std::iter::empty(), ImputeMethod::Mean, converged_now()));
    }
    let (means, empty) = column_means(matrix)?;
    let fills: Vec<f64> =
        matrix.cells().iter().enumerate().filter(|(_, c)| c.is_missing()).map(|(i, _)| means[i % n]).collect();
    let diagnostics = ImputeDiagnostics { all_missing_columns: column_names(matrix, &empty), ..converged_now() };
    Ok(ImputedMatrix::assemble(matrix, fills, ImputeMethod::Mean, diagnostics))
}

fn converged_now() -> ImputeDiagnostics {
    ImputeDiagnostics { converged: true, ..Default::default() }
}

/// Takes missing values from a matrix produced elsewhere, matched by
/// glottocode and feature name. Observed cells of the input always win.
#[derive(Debug, Clone)]
pub struct ExternalImputer {
    pub name: String,
    filled: AggregatedMatrix,
}

impl ExternalImputer {
    pub fn new(name: impl Into<String>, filled: AggregatedMatrix) -> Self {
        ExternalImputer { name: name.into(), filled }
    }
}

impl Imputer for ExternalImputer {
    fn impute(&self, matrix: &AggregatedMatrix) -> Result<ImputedMatrix> {
        let rows: HashMap<&str, usize> =
            self.filled.languages.iter().enumerate().map(|(i, l)| (l.glottocode.as_str(), i)).collect();
        let cols: HashMap<&str, usize> =
            self.filled.features.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
        let n = matrix.n_features();
        let mut fills = Vec::new();
        for (i, cell) in matrix.cells().iter().enumerate() {
            if cell.is_known() {
                continue;
            }
            let (l, f) = (i / n, i % n);
            let language = &matrix.languages[l].glottocode;
            let feature = &matrix.features[f].name;
            let value = rows
                .get(language.as_str())
                .zip(cols.get(feature.as_str()))
                .and_then(|(&r, &c)| self.filled.get(r, c).value())
                .ok_or_else(|| Error::IncompleteExternal { language: language.clone(), feature: feature.clone() })?;
            fills.push(value);
        }
        Ok(ImputedMatrix::assemble(matrix, fills, ImputeMethod::External { name: self.name.clone() }, converged_now()))
    }

    fn label(&self) -> String {
        format!("external:{}", self.name)
    }
}
