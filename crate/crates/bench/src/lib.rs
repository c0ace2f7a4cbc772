//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use typodist_core::{AggregatedMatrix, AggregationMode, CellValue, FeatureDescriptor, LanguageRecord};

/// Binary matrix of `rows` languages and `cols` features with the given
/// fraction of known cells.
pub fn sparse_binary(rows: usize, cols: usize, density: f64, seed: u64) -> AggregatedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let languages = (0..rows).map(|i| LanguageRecord::new(format!("bnch{i:04}"))).collect();
    let features = (0..cols).map(|j| FeatureDescriptor::native(format!("S_B{j:04}")).expect("valid name")).collect();
    let cells = (0..rows * cols)
        .map(|_| {
            if rng.random_bool(density) {
                CellValue::Known(if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            } else {
                CellValue::Missing
            }
        })
        .collect();
    AggregatedMatrix::from_cells(AggregationMode::Union, languages, features, cells).expect("binary cells")
}

/// Two noisy copies of a reference ranking, for the rank statistics.
pub fn rank_triplet(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let a = reference.iter().map(|r| r + rng.random_range(-0.3..0.3)).collect();
    let b = reference.iter().map(|r| r + rng.random_range(-0.5..0.5)).collect();
    (a, b, reference)
}
