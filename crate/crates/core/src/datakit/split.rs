use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack added before flooring so `0.7 * 100` lands on 70.
const FLOOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.70, val: 0.15, test: 0.15, seed: 0 }
    }
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec { train, val, test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must be non-negative and sum to 1, got {}, {}, {}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` items; test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((self.train * n as f64) + FLOOR_EPS).floor() as usize;
        let val = (((self.val * n as f64) + FLOOR_EPS).floor() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

/// Seeded shuffle, then consecutive slices of the sizes from
/// [`SplitSpec::sizes`].
pub fn split_dataset<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    spec.validate()?;
    if items.is_empty() {
        return Err(Error::invalid("split_dataset: no items"));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (a, b, _) = spec.sizes(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..a]), pick(&order[a..a + b]), pick(&order[a + b..])))
}
