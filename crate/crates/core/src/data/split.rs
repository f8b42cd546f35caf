use rand::seq::{index, SliceRandom};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

// guards `floor(0.8 * 10)` against landing on 7.999…
const FLOOR_EPS: f64 = 1e-9;

/// Sorts by timestamp (stable on ties) and cuts at the cumulative floor
/// boundaries `floor(r0·n)` and `floor((r0+r1)·n)`; the tail goes to test.
pub fn chronological_split(data: &Dataset, ratios: (f64, f64, f64)) -> Result<Splits> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::Precondition(format!("split ratios must be positive, got {ratios:?}")));
    }
    if (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let ex = data.examples();
    order.sort_by_key(|&i| ex[i].ts);
    let b1 = ((a * n as f64) + FLOOR_EPS).floor() as usize;
    let b2 = (((a + b) * n as f64) + FLOOR_EPS).floor() as usize;
    let (b1, b2) = (b1.min(n), b2.min(n).max(b1));
    Ok(Splits {
        train: data.subset(&order[..b1]),
        val: data.subset(&order[b1..b2]),
        test: data.subset(&order[b2..]),
    })
}

/// Index batches for one epoch: a seeded permutation of `0..n` cut into
/// chunks of `batch_size`, keeping the short final chunk.
pub fn batches(n: usize, batch_size: usize, shuffle_seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    batches_for(n, batch_size, shuffle_seed, &epoch.to_string())
}

pub(crate) fn batches_for(n: usize, batch_size: usize, seed: u64, purpose: &str) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Precondition("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, purpose));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Seeded uniform sample of `floor(ratio·n)` rows, original order kept.
pub fn subsample_train(data: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Precondition(format!("subsample ratio must be in (0, 1], got {ratio}")));
    }
    let n = data.len();
    if ratio == 1.0 {
        return Ok(data.clone());
    }
    let k = ((ratio * n as f64) + FLOOR_EPS).floor() as usize;
    if k == 0 {
        return Err(Error::Data(format!("ratio {ratio} of {n} examples leaves none")));
    }
    let mut idx = index::sample(&mut rng::stream(seed, "subsample"), n, k).into_vec();
    idx.sort_unstable();
    Ok(data.subset(&idx))
}
