//! Seeded synthetic dataset generators. All draws go through ChaCha8 so the
//! same seed produces bit-identical datasets on every platform.

use super::{DataError, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Standard-normal features scaled by `1/sqrt(n)`, standard-normal offsets.
pub fn gen_random_logsumexp(m: usize, n: usize, seed: u64) -> Dataset {
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let mut features = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let v: f64 = rng.sample(StandardNormal);
            features[(i, j)] = v * scale;
        }
    }
    let offsets = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    Dataset::new(features, offsets).expect("generated dataset is valid")
}

/// Number of samples in the mushrooms benchmark layout.
pub const MUSHROOMS_M: usize = 8124;

/// Per-attribute category counts of the mushrooms one-hot layout: 22
/// categorical attributes expanding to 117 columns.
pub fn mushrooms_layout() -> &'static [usize] {
    &[
        6, 4, 10, 2, 9, 2, 2, 2, 12, 2, 5, 4, 4, 9, 9, 1, 4, 3, 5, 9, 6, 7,
    ]
}

/// Categorical classification data: each sample one-hot encodes one uniformly
/// drawn category per group, rows scaled to unit norm (`1/sqrt(#groups)`).
/// Labels come from a noisy hidden linear rule, split at the median score so
/// the classes balance.
pub fn gen_onehot_logistic(m: usize, group_sizes: &[usize], seed: u64) -> Result<Dataset, DataError> {
    if m == 0 || group_sizes.is_empty() || group_sizes.contains(&0) {
        return Err(DataError::Empty);
    }
    let n: usize = group_sizes.iter().sum();
    let groups = group_sizes.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut raw = DMatrix::zeros(m, n);
    for i in 0..m {
        let mut offset = 0;
        for &size in group_sizes {
            let cat = rng.gen_range(0..size);
            raw[(i, offset + cat)] = 1.0;
            offset += size;
        }
    }

    let hidden = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut scores: Vec<f64> = (0..m)
        .map(|i| {
            let noise: f64 = rng.sample(StandardNormal);
            raw.row(i).transpose().dot(&hidden) + 0.5 * noise
        })
        .collect();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let median = sorted[m / 2];
    let labels = DVector::from_fn(m, |i, _| if scores[i] >= median { 1.0 } else { -1.0 });
    scores.clear();

    let features = raw / groups.sqrt();
    Dataset::new(features, labels)
}
