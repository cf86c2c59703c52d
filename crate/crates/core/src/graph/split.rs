use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

/// Disjoint train/validation/test index lists covering a dataset once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..len` cut at the ratio boundaries.
///
/// Each part gets `floor(ratio * len)` items; the leftover (at most two)
/// goes to train first, then val.
pub fn split_dataset(len: usize, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    if len == 0 {
        return Err(Error::Empty("dataset"));
    }
    let parts = [ratios.train, ratios.val, ratios.test];
    if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidParameter(format!(
            "split ratios {parts:?} must lie in [0, 1]"
        )));
    }
    let total: f64 = parts.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios sum to {total}, expected 1"
        )));
    }
    // The epsilon keeps exact products like 0.29 * 100 from flooring to 28.
    let mut sizes = parts.map(|r| (r * len as f64 + 1e-9).floor() as usize);
    let mut remainder = len - sizes.iter().sum::<usize>().min(len);
    let mut slot = 0;
    while remainder > 0 {
        sizes[slot % 2] += 1;
        remainder -= 1;
        slot += 1;
    }

    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng::substream(seed, streams::SPLIT));
    let test = order.split_off(sizes[0] + sizes[1]);
    let val = order.split_off(sizes[0]);
    Ok(DatasetSplit {
        train: order,
        val,
        test,
    })
}
