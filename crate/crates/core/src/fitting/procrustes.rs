use nalgebra::{DMatrix, DVector};

use super::{squared_loss, FitResult, LOSS_SQUARED};
use crate::embedding::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::map::{LinearMap, Provenance};
use crate::scalar::Real;

/// Best map of the form `α T e + b` with `T` orthogonal and `α > 0`.
///
/// Both sides are centered; with `Y_cᵀ X_c = U Σ Vᵀ` the optimum is
/// `T = U Vᵀ`, `α = tr Σ / ‖X_c‖²_F` and `b = ȳ − α T x̄`. Reflections are
/// not corrected away, so `det T` may be −1.
pub fn fit_procrustes<T: Real>(train: &PairedEmbeddings<T>) -> Result<FitResult<T>> {
    let n = train.count();
    if n < 2 {
        return Err(Error::TooFewPairs { needed: 2, got: n });
    }
    let x = train.source().data();
    let y = train.target().data();
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    let xc = center(x, &x_mean);
    let yc = center(y, &y_mean);

    let source_var = xc.norm_squared();
    if source_var == T::zero() {
        return Err(Error::DegenerateData("source embeddings have zero variance".into()));
    }

    let cross = yc.tr_mul(&xc);
    let svd = cross.svd(true, true);
    let trace = svd.singular_values.sum();
    if trace <= T::zero() {
        return Err(Error::DegenerateData(
            "zero cross-covariance between source and target".into(),
        ));
    }
    let orthogonal = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    let alpha = trace / source_var;

    let matrix = &orthogonal * alpha;
    let bias = &y_mean - &matrix * &x_mean;

    let mut provenance = Provenance::fitter("procrustes", LOSS_SQUARED);
    provenance.set("alpha", alpha.to_f64_lossy());
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

fn column_means<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::from_usize(m.nrows()).unwrap();
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn center<T: Real>(m: &DMatrix<T>, mean: &DVector<T>) -> DMatrix<T> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}
