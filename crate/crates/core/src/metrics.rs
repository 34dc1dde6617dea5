//! Improvement scores of mapped embeddings over the originals.
//!
//! Given originals `e`, mapped `ẽ` and targets `e′` for `N` test pairs:
//!
//! * `d  = mean |e − e′|`, `d̃ = mean |ẽ − e′|`, and `dD = (d − d̃) / min(d, d̃)`
//! * `dC = mean (cos(ẽ, e′) − cos(e, e′))`
//! * `fD` is the fraction of pairs whose distance strictly decreased
//! * `fC` is the fraction of pairs whose cosine strictly increased
//!
//! Ties count as no improvement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSet, PairedEmbeddings};
use crate::error::{Error, Result};
use crate::map::LinearMap;
use crate::scalar::Real;

/// Default floor on `min(d, d̃)` below which `dD` is refused.
pub const DEFAULT_DENOMINATOR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T: Real = f64> {
    #[serde(rename = "dD")]
    pub d_d: T,
    #[serde(rename = "dC")]
    pub d_c: T,
    #[serde(rename = "fD")]
    pub f_d: T,
    #[serde(rename = "fC")]
    pub f_c: T,
    pub n: usize,
    pub d_original: T,
    pub d_mapped: T,
}

#[derive(Debug, Clone, Copy)]
struct Sample<T> {
    dist_orig: T,
    dist_mapped: T,
    cos_orig: T,
    cos_mapped: T,
}

fn check_pair<T: Real>(x: &EmbeddingSet<T>, y: &EmbeddingSet<T>) -> Result<()> {
    if x.count() != y.count() || x.dim() != y.dim() {
        return Err(Error::Shape {
            what: "embedding sets",
            expected: format!("{}x{}", x.count(), x.dim()),
            actual: format!("{}x{}", y.count(), y.dim()),
        });
    }
    Ok(())
}

fn row_distance<T: Real>(x: &EmbeddingSet<T>, y: &EmbeddingSet<T>, i: usize) -> T {
    let mut acc = T::zero();
    for j in 0..x.dim() {
        let diff = x.data()[(i, j)] - y.data()[(i, j)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Mean row-wise Euclidean distance between two equally shaped sets.
pub fn mean_distance<T: Real>(x: &EmbeddingSet<T>, y: &EmbeddingSet<T>) -> Result<T> {
    check_pair(x, y)?;
    if x.is_empty() {
        return Err(Error::EmptySet);
    }
    let per_row: Vec<T> = (0..x.count()).into_par_iter().map(|i| row_distance(x, y, i)).collect();
    let total = per_row.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(total / T::from_usize(x.count()).unwrap())
}

/// Mean row-wise squared distance.
pub fn mean_squared_distance<T: Real>(x: &EmbeddingSet<T>, y: &EmbeddingSet<T>) -> Result<T> {
    check_pair(x, y)?;
    if x.is_empty() {
        return Err(Error::EmptySet);
    }
    let total = (x.data() - y.data()).norm_squared();
    Ok(total / T::from_usize(x.count()).unwrap())
}

fn norms_and_dot<T: Real>(a: &EmbeddingSet<T>, b: &EmbeddingSet<T>, i: usize) -> (T, T, T) {
    let (mut na, mut nb, mut dot) = (T::zero(), T::zero(), T::zero());
    for j in 0..a.dim() {
        let (x, y) = (a.data()[(i, j)], b.data()[(i, j)]);
        na += x * x;
        nb += y * y;
        dot += x * y;
    }
    (na.sqrt(), nb.sqrt(), dot)
}

fn sample<T: Real>(
    original: &EmbeddingSet<T>,
    mapped: &EmbeddingSet<T>,
    target: &EmbeddingSet<T>,
    i: usize,
) -> Result<Sample<T>> {
    let (n_orig, n_tgt, dot_orig) = norms_and_dot(original, target, i);
    let (n_mapped, _, dot_mapped) = norms_and_dot(mapped, target, i);
    for (norm, set) in [(n_orig, "source"), (n_tgt, "target"), (n_mapped, "mapped source")] {
        if norm == T::zero() {
            return Err(Error::ZeroNorm { set, row: i });
        }
    }
    Ok(Sample {
        dist_orig: row_distance(original, target, i),
        dist_mapped: row_distance(mapped, target, i),
        cos_orig: dot_orig / (n_orig * n_tgt),
        cos_mapped: dot_mapped / (n_mapped * n_tgt),
    })
}

/// Scores `mapped` against `original`, both relative to `target`.
pub fn compare<T: Real>(
    original: &EmbeddingSet<T>,
    mapped: &EmbeddingSet<T>,
    target: &EmbeddingSet<T>,
    denominator_eps: T,
) -> Result<MetricsReport<T>> {
    check_pair(original, target)?;
    check_pair(mapped, target)?;
    let n = target.count();
    if n == 0 {
        return Err(Error::EmptySet);
    }

    // Parallel per-sample terms, reduced sequentially so the result does not
    // depend on the thread count.
    let samples: Vec<Result<Sample<T>>> = (0..n)
        .into_par_iter()
        .map(|i| sample(original, mapped, target, i))
        .collect();

    let zero = T::zero();
    let (mut d, mut d_mapped, mut d_c) = (zero, zero, zero);
    let (mut better_dist, mut better_cos) = (0usize, 0usize);
    for s in samples {
        let s = s?;
        d += s.dist_orig;
        d_mapped += s.dist_mapped;
        let cos_gain = s.cos_mapped - s.cos_orig;
        d_c += cos_gain;
        if s.dist_orig - s.dist_mapped > zero {
            better_dist += 1;
        }
        if cos_gain > zero {
            better_cos += 1;
        }
    }
    let nf = T::from_usize(n).unwrap();
    let (d, d_mapped) = (d / nf, d_mapped / nf);
    let denom = d.min(d_mapped);
    if denom < denominator_eps {
        return Err(Error::DegenerateDenominator {
            d: d.to_f64_lossy(),
            d_mapped: d_mapped.to_f64_lossy(),
        });
    }
    Ok(MetricsReport {
        d_d: (d - d_mapped) / denom,
        d_c: d_c / nf,
        f_d: T::from_usize(better_dist).unwrap() / nf,
        f_c: T::from_usize(better_cos).unwrap() / nf,
        n,
        d_original: d,
        d_mapped,
    })
}

/// Applies `map` to the test sources and scores the result.
pub fn evaluate<T: Real>(map: &LinearMap<T>, test: &PairedEmbeddings<T>) -> Result<MetricsReport<T>> {
    evaluate_with_eps(map, test, T::lit(DEFAULT_DENOMINATOR_EPS))
}

pub fn evaluate_with_eps<T: Real>(
    map: &LinearMap<T>,
    test: &PairedEmbeddings<T>,
    denominator_eps: T,
) -> Result<MetricsReport<T>> {
    let mapped = map.apply(test.source())?;
    compare(test.source(), &mapped, test.target(), denominator_eps)
}
