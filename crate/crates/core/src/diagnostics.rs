//! How far a fitted matrix is from "orthogonal times a scalar".
//!
//! A perfectly semantics-preserving map between two embedding spaces is an
//! orthogonal transform with uniform dilation. Deviations show up as nonzero
//! cosines between distinct columns of `A` and as unequal column norms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::LinearMap;
use crate::scalar::Real;

/// `cos(0.75 · π/2)`: column pairs closer than 75% of a right angle.
pub fn default_threshold<T: Real>() -> T {
    T::lit((0.75 * std::f64::consts::FRAC_PI_2).cos())
}

/// Aggregates of the column-pair cosines `p_jk`, `j < k`.
///
/// A one-dimensional map has no pairs; all aggregates are then zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoReport<T: Real = f64> {
    pub mean_abs_p: T,
    pub sigma_p: T,
    pub min_p: T,
    pub max_p: T,
    pub flagged_pairs: usize,
    pub threshold: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationReport<T: Real = f64> {
    pub alpha_bar: T,
    pub nstd: T,
    pub range: T,
    pub min_alpha: T,
    pub max_alpha: T,
}

/// Euclidean norm of every column.
pub fn column_norms<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    a.column_iter().map(|c| c.norm()).collect()
}

/// Matrix of column cosines `p_jk`; the diagonal is left at one.
pub fn column_cosines<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let norms = column_norms(a);
    if let Some(col) = norms.iter().position(|n| *n == T::zero()) {
        return Err(Error::ZeroColumn { col });
    }
    let gram = a.tr_mul(a);
    let d = a.ncols();
    Ok(DMatrix::from_fn(d, d, |j, k| {
        if j == k {
            T::one()
        } else {
            gram[(j, k)] / (norms[j] * norms[k])
        }
    }))
}

pub fn ortho_report<T: Real>(map: &LinearMap<T>) -> Result<OrthoReport<T>> {
    ortho_report_with_threshold(map, default_threshold())
}

pub fn ortho_report_with_threshold<T: Real>(map: &LinearMap<T>, threshold: T) -> Result<OrthoReport<T>> {
    let p = column_cosines(map.matrix())?;
    let d = p.nrows();
    let pairs = d * (d - 1) / 2;
    if pairs == 0 {
        return Ok(OrthoReport {
            mean_abs_p: T::zero(),
            sigma_p: T::zero(),
            min_p: T::zero(),
            max_p: T::zero(),
            flagged_pairs: 0,
            threshold,
        });
    }

    let upper = || {
        (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .map(|(j, k)| p[(j, k)])
    };
    let count = T::from_usize(pairs).unwrap();
    let mut sum = T::zero();
    let mut sum_abs = T::zero();
    let mut min_p = T::max_value().unwrap();
    let mut max_p = T::min_value().unwrap();
    let mut flagged_pairs = 0;
    for v in upper() {
        sum += v;
        sum_abs += v.abs();
        min_p = min_p.min(v);
        max_p = max_p.max(v);
        if v.abs() > threshold {
            flagged_pairs += 1;
        }
    }
    let mean = sum / count;
    // Two-pass population variance over the signed values.
    let var = upper().fold(T::zero(), |acc, v| acc + (v - mean) * (v - mean)) / count;

    Ok(OrthoReport {
        mean_abs_p: sum_abs / count,
        sigma_p: var.sqrt(),
        min_p,
        max_p,
        flagged_pairs,
        threshold,
    })
}

pub fn dilation_report<T: Real>(map: &LinearMap<T>) -> DilationReport<T> {
    let alpha = column_norms(map.matrix());
    let d = T::from_usize(alpha.len()).unwrap();
    let alpha_bar = alpha.iter().fold(T::zero(), |a, &b| a + b) / d;
    let var = alpha
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - alpha_bar) * (x - alpha_bar))
        / d;
    let min_alpha = alpha.iter().copied().fold(T::max_value().unwrap(), T::min);
    let max_alpha = alpha.iter().copied().fold(T::zero(), T::max);
    // A zero matrix has no meaningful normalized spread.
    let (nstd, range) = if alpha_bar > T::zero() {
        (var.sqrt() / alpha_bar, (max_alpha - min_alpha) / alpha_bar)
    } else {
        (T::zero(), T::zero())
    };
    DilationReport {
        alpha_bar,
        nstd,
        range,
        min_alpha,
        max_alpha,
    }
}
