//! Seeded synthetic benchmarks with known ground truth.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregate::{AggregatedMatrix, AggregationMode};
use crate::kb::{CellValue, FeatureCategory, FeatureDescriptor, FeatureOrigin, LanguageRecord};

/// A fully known matrix and a copy with holes punched in it.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub truth: AggregatedMatrix,
    pub holed: AggregatedMatrix,
}

fn axes(rows: usize, cols: usize) -> (Vec<LanguageRecord>, Vec<FeatureDescriptor>) {
    let languages = (0..rows).map(|i| LanguageRecord::new(format!("synt{i:04}"))).collect();
    let cats = FeatureCategory::TYPOLOGICAL;
    let features = (0..cols)
        .map(|j| {
            let c = cats[j % cats.len()];
            FeatureDescriptor::new(format!("{}F{j:03}", c.prefix()), c, FeatureOrigin::Native).expect("valid name")
        })
        .collect();
    (languages, features)
}

fn punch(truth: &AggregatedMatrix, hole_fraction: f64, rng: &mut ChaCha8Rng) -> AggregatedMatrix {
    let n = truth.cells().len();
    let holes = (n as f64 * hole_fraction).floor() as usize;
    let mut holed = truth.clone();
    let cols = truth.n_features();
    for i in sample(rng, n, holes) {
        holed.set(i / cols, i % cols, CellValue::Missing);
    }
    holed
}

fn build(
    mode: AggregationMode,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    hole_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> SyntheticBenchmark {
    let (languages, features) = axes(rows, cols);
    let cells = values.into_iter().map(CellValue::Known).collect();
    let truth = AggregatedMatrix::from_cells(mode, languages, features, cells).expect("values in range");
    let holed = punch(&truth, hole_fraction, rng);
    SyntheticBenchmark { truth, holed }
}

/// Exactly rank-`rank` matrix with uniform factors, scaled into `[0, 1]`.
pub fn low_rank_continuous(rows: usize, cols: usize, rank: usize, hole_fraction: f64, seed: u64) -> SyntheticBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..rows * rank).map(|_| rng.random()).collect();
    let v: Vec<f64> = (0..rank * cols).map(|_| rng.random()).collect();
    let mut values: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            (0..rank).map(|k| u[r * rank + k] * v[k * cols + c]).sum()
        })
        .collect();
    // factors are non-negative, so dividing by the maximum keeps the rank
    let hi = values.iter().copied().fold(0.0, f64::max);
    if hi > 0.0 {
        for x in &mut values {
            *x /= hi;
        }
    }
    build(AggregationMode::Average, rows, cols, values, hole_fraction, &mut rng)
}

/// Binary matrix where each language copies one of `clusters` random
/// prototypes and flips each bit with probability `noise`.
pub fn clustered_binary(
    rows: usize,
    cols: usize,
    clusters: usize,
    noise: f64,
    hole_fraction: f64,
    seed: u64,
) -> SyntheticBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<bool>> = (0..clusters).map(|_| (0..cols).map(|_| rng.random_bool(0.5)).collect()).collect();
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let proto = &prototypes[r % clusters];
        for &bit in proto {
            let flip = rng.random_bool(noise);
            values.push(if bit != flip { 1.0 } else { 0.0 });
        }
    }
    build(AggregationMode::Union, rows, cols, values, hole_fraction, &mut rng)
}
