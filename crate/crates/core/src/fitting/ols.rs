use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{squared_loss, FitResult, LOSS_SQUARED};
use crate::embedding::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::map::{LinearMap, Provenance};
use crate::scalar::Real;

const MIN_CHUNK_ROWS: usize = 1024;

/// Least-squares affine map minimizing `(1/n) Σ |A e_i + b − e′_i|²`.
///
/// The augmented matrix `[X 1 Y]` is reduced to its triangular factor by a
/// tall-skinny QR (row chunks factored independently, then merged pairwise
/// in a fixed tree), so the Gram matrix is never formed. Writing
/// `R = [[R₁₁, R₁₂], [0, R₂₂]]`, the solution is `W = R₁₁⁺ R₁₂` with the
/// pseudo-inverse taken through an SVD of `R₁₁`; singular values below
/// `σ_max · max(n, D+1) · ε` are dropped, which yields the minimum-norm
/// solution when the design is rank deficient.
pub fn fit_ols<T: Real>(train: &PairedEmbeddings<T>) -> Result<FitResult<T>> {
    let n = train.count();
    if n == 0 {
        return Err(Error::EmptyTraining);
    }
    let dim = train.dim();
    let p = dim + 1;

    let r = triangular_factor(train);
    let r11 = r.columns(0, p).into_owned();
    let r12 = r.columns(p, dim).into_owned();

    let svd = r11.svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * T::from_usize(n.max(p)).unwrap() * T::machine_eps();
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    // W = V Σ⁺ Uᵀ R₁₂, dropping negligible singular values.
    let mut projected = u.tr_mul(&r12);
    for (i, mut row) in projected.row_iter_mut().enumerate() {
        let s = svd.singular_values[i];
        if s > tol {
            row /= s;
        } else {
            row.fill(T::zero());
        }
    }
    let w = v_t.tr_mul(&projected);

    let matrix = w.rows(0, dim).transpose();
    let bias = DVector::from_iterator(dim, w.row(dim).iter().copied());
    let mut provenance = Provenance::fitter("ols", LOSS_SQUARED);
    provenance.set("rank", rank);
    provenance.set("rank_deficient", rank < p);
    if rank < p {
        log::warn!("least-squares design is rank deficient (rank {rank} of {p}); returning minimum-norm solution");
    }
    let map = LinearMap::new(matrix, bias)?.with_provenance(provenance);
    let train_loss = squared_loss(&map, train)?;
    Ok(FitResult {
        map,
        train_loss,
        val_loss: None,
        epochs_run: 0,
        converged: true,
    })
}

/// Upper-trapezoidal `R` of the QR factorization of `[X 1 Y]`.
fn triangular_factor<T: Real>(train: &PairedEmbeddings<T>) -> DMatrix<T> {
    let n = train.count();
    let dim = train.dim();
    let width = 2 * dim + 1;
    let chunk = MIN_CHUNK_ROWS.max(4 * width);
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();

    let mut factors: Vec<DMatrix<T>> = starts
        .par_iter()
        .map(|&start| {
            let rows = chunk.min(n - start);
            let mut block = DMatrix::zeros(rows, width);
            block
                .view_mut((0, 0), (rows, dim))
                .copy_from(&train.source().data().rows(start, rows));
            block.view_mut((0, dim), (rows, 1)).fill(T::one());
            block
                .view_mut((0, dim + 1), (rows, dim))
                .copy_from(&train.target().data().rows(start, rows));
            block.qr().r()
        })
        .collect();

    // Pairwise merges in a fixed tree shape, independent of thread count.
    while factors.len() > 1 {
        factors = factors
            .par_chunks(2)
            .map(|pair| match pair {
                [a, b] => stack(a, b).qr().r(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    factors.pop().expect("at least one chunk")
}

fn stack<T: Real>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}
