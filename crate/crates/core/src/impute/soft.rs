use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{column_means, column_names, ImputeDiagnostics, ImputeMethod, ImputedMatrix};
use crate::aggregate::AggregatedMatrix;
use crate::error::{Error, Result};
use crate::kb::CellValue;

/// Grid multipliers (times σ₁/100) tried when λ is chosen automatically.
pub const LAMBDA_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
const VALIDATION_FRACTION: f64 = 0.1;
const MIN_OBSERVED_FOR_VALIDATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// Picked from [`LAMBDA_GRID`] on a held-out part of the observed cells.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftImputeConfig {
    pub lambda: Lambda,
    /// Defaults to `min(n_languages, n_features, 100)`.
    pub rank_cap: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the validation mask used by [`Lambda::Auto`].
    pub seed: u64,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        SoftImputeConfig { lambda: Lambda::Auto, rank_cap: None, tol: 1e-4, max_iter: 200, seed: 0 }
    }
}

impl SoftImputeConfig {
    pub fn fixed(lambda: f64) -> Self {
        SoftImputeConfig { lambda: Lambda::Fixed(lambda), ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if let Lambda::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("lambda must be a non-negative number, got {l}")));
            }
        }
        if self.rank_cap == Some(0) {
            return Err(Error::InvalidParameter("rank_cap must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Result of the raw iteration, before clamping and rounding.
#[derive(Debug, Clone)]
pub struct SoftImputeRun {
    /// Observed entries plus the final fill at missing positions.
    pub filled: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `½‖P_Ω(X − Z)‖² + λ‖Z‖_*` after each iteration.
    pub objective_trace: Vec<f64>,
}

/// Iterates soft-thresholded SVD reconstructions. `start` holds observed
/// values and the initial fill; only cells with `observed == false` change.
/// Stops when `‖Δfill‖ / ‖fill‖ < tol` or after `max_iter` iterations.
pub fn soft_impute_run(
    start: &DMatrix<f64>,
    observed: &DMatrix<bool>,
    lambda: f64,
    rank_cap: usize,
    tol: f64,
    max_iter: usize,
) -> SoftImputeRun {
    assert_eq!(start.shape(), observed.shape(), "mask shape");
    let (rows, cols) = start.shape();
    let mut y = start.clone();
    let mut trace = Vec::new();
    let mut converged = !observed.iter().any(|o| !o);
    let mut iterations = 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        let svd = y.clone().svd(true, true);
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let s = &svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let keep: Vec<(usize, f64)> =
            order.into_iter().take(rank_cap).map(|i| (i, s[i] - lambda)).filter(|(_, w)| *w > 0.0).collect();
        let nuclear: f64 = keep.iter().map(|(_, w)| w).sum();
        let z = if keep.is_empty() {
            DMatrix::zeros(rows, cols)
        } else {
            let left = DMatrix::from_fn(rows, keep.len(), |a, j| u[(a, keep[j].0)] * keep[j].1);
            let right = DMatrix::from_fn(keep.len(), cols, |j, b| vt[(keep[j].0, b)]);
            left * right
        };

        let (mut fit, mut delta, mut norm) = (0.0, 0.0, 0.0);
        for ((zv, yv), &obs) in z.iter().zip(y.iter_mut()).zip(observed.iter()) {
            if obs {
                fit += (*yv - zv) * (*yv - zv);
            } else {
                delta += (zv - *yv) * (zv - *yv);
                norm += *yv * *yv;
                *yv = *zv;
            }
        }
        trace.push(0.5 * fit + lambda * nuclear);
        converged = delta.sqrt() < tol * norm.sqrt() || delta == 0.0;
    }
    SoftImputeRun { filled: y, iterations, converged, objective_trace: trace }
}

fn dense(matrix: &AggregatedMatrix, fill: &[f64]) -> (DMatrix<f64>, DMatrix<bool>) {
    let (r, c) = (matrix.n_languages(), matrix.n_features());
    let start = DMatrix::from_fn(r, c, |l, f| matrix.get(l, f).value().unwrap_or(fill[f]));
    let observed = DMatrix::from_fn(r, c, |l, f| matrix.get(l, f).is_known());
    (start, observed)
}

fn default_rank_cap(matrix: &AggregatedMatrix) -> usize {
    matrix.n_languages().min(matrix.n_features()).clamp(1, 100)
}

/// λ from the grid with the lowest held-out squared error (smallest λ on
/// ties). Falls back to the middle of the grid when there are too few
/// observed cells to hold any out.
fn choose_lambda(matrix: &AggregatedMatrix, config: &SoftImputeConfig, start: &DMatrix<f64>) -> Result<f64> {
    let sigma1 = start.singular_values().max();
    let grid: Vec<f64> = LAMBDA_GRID.iter().map(|m| m * sigma1 / 100.0).collect();
    let observed = matrix.observed_positions();
    if observed.len() < MIN_OBSERVED_FOR_VALIDATION {
        return Ok(grid[2]);
    }
    let n_hold = ((observed.len() as f64 * VALIDATION_FRACTION) as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let held: Vec<(usize, usize)> = sample(&mut rng, observed.len(), n_hold).into_iter().map(|i| observed[i]).collect();

    let mut train = matrix.clone();
    for &(l, f) in &held {
        train.set(l, f, CellValue::Missing);
    }
    let (means, _) = column_means(&train)?;
    let (train_start, train_obs) = dense(&train, &means);
    let rank_cap = config.rank_cap.unwrap_or_else(|| default_rank_cap(matrix));

    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in &grid {
        let run = soft_impute_run(&train_start, &train_obs, lambda, rank_cap, config.tol, config.max_iter);
        let err: f64 = held
            .iter()
            .map(|&(l, f)| {
                let truth = matrix.get(l, f).value().expect("held-out cells were observed");
                (run.filled[(l, f)].clamp(0.0, 1.0) - truth).powi(2)
            })
            .sum();
        if err < best.0 {
            best = (err, lambda);
        }
    }
    Ok(best.1)
}

/// Nuclear-norm regularized low-rank completion. Missing cells start at
/// their column means.
pub fn impute_softimpute(matrix: &AggregatedMatrix, config: &SoftImputeConfig) -> Result<ImputedMatrix> {
    config.validate()?;
    let method = ImputeMethod::SoftImpute(config.clone());
    if matrix.observed_count() == matrix.cells().len() {
        let diagnostics = ImputeDiagnostics { converged: true, ..Default::default() };
        return Ok(ImputedMatrix::assemble(matrix, std::iter::empty(), method, diagnostics));
    }
    let (means, empty) = column_means(matrix)?;
    let (start, observed) = dense(matrix, &means);
    let lambda = match config.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Auto => choose_lambda(matrix, config, &start)?,
    };
    let rank_cap = config.rank_cap.unwrap_or_else(|| default_rank_cap(matrix));
    let run = soft_impute_run(&start, &observed, lambda, rank_cap, config.tol, config.max_iter);

    let nf = matrix.n_features();
    let fills: Vec<f64> = matrix
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_missing())
        .map(|(i, _)| run.filled[(i / nf, i % nf)])
        .collect();
    let diagnostics = ImputeDiagnostics {
        iterations: run.iterations,
        converged: run.converged,
        all_missing_columns: column_names(matrix, &empty),
        objective_trace: run.objective_trace,
        lambda: Some(lambda),
    };
    Ok(ImputedMatrix::assemble(matrix, fills, method, diagnostics))
}
