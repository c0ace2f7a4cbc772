use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used when comparing permuted deltas against the observed one,
/// so permutations that reproduce the observed ranking are not lost to
/// rounding.
pub const DELTA_EPSILON: f64 = 1e-12;
/// Largest input the exhaustive permutation test will enumerate.
pub const MAX_EXACT_PAIRS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub tau: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermTestResult {
    pub observed_delta: f64,
    pub p_value: f64,
    pub iterations: usize,
    pub seed: u64,
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place and returns the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::DegenerateInput(format!("lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput("need at least 2 observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::DegenerateInput("NaN in input".into()));
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let (mut xrun, mut jrun) = (1u64, 1u64);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            xrun += 1;
            if y[a] == y[b] {
                jrun += 1;
            } else {
                joint_ties += jrun * (jrun - 1) / 2;
                jrun = 1;
            }
        } else {
            x_ties += xrun * (xrun - 1) / 2;
            joint_ties += jrun * (jrun - 1) / 2;
            xrun = 1;
            jrun = 1;
        }
    }
    x_ties += xrun * (xrun - 1) / 2;
    joint_ties += jrun * (jrun - 1) / 2;

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let y_ties = tie_pairs(&ys);

    let n0 = (n * (n - 1) / 2) as u64;
    if x_ties == n0 || y_ties == n0 {
        return Err(Error::DegenerateInput("constant input, tau is undefined".into()));
    }
    let diff = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * discordant as f64;
    let tau = diff / (((n0 - x_ties) as f64) * ((n0 - y_ties) as f64)).sqrt();
    Ok(CorrelationResult { tau: tau.clamp(-1.0, 1.0), n_pairs: n })
}

fn check_triplet(a: &[f64], b: &[f64], reference: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.len() != reference.len() {
        return Err(Error::DegenerateInput("score lists differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput("need at least 2 observations".into()));
    }
    Ok(())
}

fn delta(a: &[f64], b: &[f64], reference: &[f64]) -> Result<f64> {
    Ok((kendall_tau(a, reference)?.tau - kendall_tau(b, reference)?.tau).abs())
}

fn swapped_delta(a: &[f64], b: &[f64], reference: &[f64], swap: impl Fn(usize) -> bool) -> Result<f64> {
    let (mut pa, mut pb) = (a.to_vec(), b.to_vec());
    for i in 0..a.len() {
        if swap(i) {
            std::mem::swap(&mut pa[i], &mut pb[i]);
        }
    }
    delta(&pa, &pb, reference)
}

/// Paired permutation test on the difference of two correlations with a
/// shared reference. Each iteration swaps `a[i]` and `b[i]` independently
/// with probability 1/2 and uses its own random stream, so results do not
/// depend on thread scheduling.
pub fn perm_both_test(a: &[f64], b: &[f64], reference: &[f64], iterations: usize, seed: u64) -> Result<PermTestResult> {
    check_triplet(a, b, reference)?;
    if iterations < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 iterations, got {iterations}")));
    }
    let observed = delta(a, b, reference)?;
    let hits: Vec<bool> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let flips: Vec<bool> = (0..a.len()).map(|_| rng.random_bool(0.5)).collect();
            Ok(swapped_delta(a, b, reference, |j| flips[j])? >= observed - DELTA_EPSILON)
        })
        .collect::<Result<_>>()?;
    let extreme = hits.iter().filter(|h| **h).count();
    Ok(PermTestResult {
        observed_delta: observed,
        p_value: (1 + extreme) as f64 / (1 + iterations) as f64,
        iterations,
        seed,
    })
}

/// Exact version of [`perm_both_test`]: enumerates all 2^n swap patterns
/// and returns the fraction at least as extreme as the observed delta.
pub fn perm_both_exact(a: &[f64], b: &[f64], reference: &[f64]) -> Result<PermTestResult> {
    check_triplet(a, b, reference)?;
    if a.len() > MAX_EXACT_PAIRS {
        return Err(Error::InvalidParameter(format!("exact test limited to {MAX_EXACT_PAIRS} pairs")));
    }
    let observed = delta(a, b, reference)?;
    let patterns = 1u64 << a.len();
    let hits: Vec<bool> = (0..patterns)
        .into_par_iter()
        .map(|mask| Ok(swapped_delta(a, b, reference, |j| mask >> j & 1 == 1)? >= observed - DELTA_EPSILON))
        .collect::<Result<_>>()?;
    let extreme = hits.iter().filter(|h| **h).count();
    Ok(PermTestResult {
        observed_delta: observed,
        p_value: extreme as f64 / patterns as f64,
        iterations: patterns as usize,
        seed: 0,
    })
}
