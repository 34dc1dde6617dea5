//! Seeded train / validation / test partitioning of paired embeddings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_count: usize,
    pub val_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_count: usize, val_count: usize, seed: u64) -> Self {
        Self {
            test_count,
            val_count,
            seed,
        }
    }

    /// Checks `test + val < n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.test_count.checked_add(self.val_count) {
            Some(held) if held < n => Ok(()),
            _ => Err(Error::SplitExceedsPopulation {
                test: self.test_count,
                val: self.val_count,
                n,
            }),
        }
    }
}

/// Row indices of each partition, in permutation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with a ChaCha8 stream keyed by `spec.seed`, then takes the
/// test block, the validation block, and leaves the rest for training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate(n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    perm.shuffle(&mut rng);
    let train = perm.split_off(spec.test_count + spec.val_count);
    let val = perm.split_off(spec.test_count);
    Ok(SplitIndices { train, val, test: perm })
}

#[derive(Debug, Clone)]
pub struct Split<T: Real = f64> {
    pub train: PairedEmbeddings<T>,
    pub val: PairedEmbeddings<T>,
    pub test: PairedEmbeddings<T>,
    pub indices: SplitIndices,
}

pub fn split<T: Real>(pairs: &PairedEmbeddings<T>, spec: &SplitSpec) -> Result<Split<T>> {
    let indices = split_indices(pairs.count(), spec)?;
    Ok(Split {
        train: pairs.select_rows(&indices.train),
        val: pairs.select_rows(&indices.val),
        test: pairs.select_rows(&indices.test),
        indices,
    })
}
