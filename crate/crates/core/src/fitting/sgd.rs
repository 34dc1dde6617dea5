use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{distance_loss, FitConfig, FitMethod, FitResult, Optimizer, LOSS_DISTANCE};
use crate::embedding::PairedEmbeddings;
use crate::error::{Error, Result};
use crate::map::{LinearMap, Provenance};
use crate::scalar::Real;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for one parameter tensor.
struct Moments<T: Real> {
    first: DMatrix<T>,
    second: DMatrix<T>,
}

impl<T: Real> Moments<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            first: DMatrix::zeros(rows, cols),
            second: DMatrix::zeros(rows, cols),
        }
    }

    fn step(&mut self, param: &mut DMatrix<T>, grad: &DMatrix<T>, lr: T, t: i32) {
        let (b1, b2) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2));
        let one = T::one();
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);
        let eps = T::lit(ADAM_EPS);
        for ((p, &g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Gradient of the batch mean of `|A x_i + b − y_i|`.
///
/// Rows with zero residual contribute a zero subgradient.
fn distance_gradient<T: Real>(
    matrix: &DMatrix<T>,
    bias: &DVector<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let mut residual = x * matrix.transpose() - y;
    for mut row in residual.row_iter_mut() {
        row += bias.transpose();
        let norm = row.norm();
        if norm > T::zero() {
            row /= norm;
        } else {
            row.fill(T::zero());
        }
    }
    let scale = T::one() / T::from_usize(x.nrows()).unwrap();
    let grad_matrix = residual.tr_mul(x) * scale;
    let grad_bias = DMatrix::from_iterator(x.ncols(), 1, residual.row_sum().iter().map(|&v| v * scale));
    (grad_matrix, grad_bias)
}

/// Mini-batch descent on the mean Euclidean distance, starting from
/// `A = I, b = 0`.
///
/// After every epoch the validation loss is measured. An epoch that does
/// not lower the best validation loss by at least `config.tolerance` scales
/// the learning rate by `config.lr_decay`; `config.patience` such epochs in
/// a row stop training. The map with the lowest validation loss is returned.
pub fn fit_distance_sgd<T: Real>(
    train: &PairedEmbeddings<T>,
    val: &PairedEmbeddings<T>,
    config: &FitConfig,
) -> Result<FitResult<T>> {
    config.validate()?;
    if config.method != FitMethod::DistanceSgd {
        return Err(Error::InvalidConfig(format!(
            "fit_distance_sgd called with method {}",
            config.method.name()
        )));
    }
    if train.count() == 0 {
        return Err(Error::EmptyTraining);
    }
    if val.count() == 0 {
        return Err(Error::EmptyValidation);
    }
    if train.dim() != val.dim() {
        return Err(Error::Shape {
            what: "validation dimension",
            expected: train.dim().to_string(),
            actual: val.dim().to_string(),
        });
    }

    let dim = train.dim();
    let mut matrix = DMatrix::<T>::identity(dim, dim);
    let mut bias = DMatrix::<T>::zeros(dim, 1);
    let mut moments_matrix = Moments::zeros(dim, dim);
    let mut moments_bias = Moments::zeros(dim, 1);

    let mut best = LinearMap::identity(dim);
    let mut best_val = distance_loss(&best, val)?;
    let mut lr = T::lit(config.learning_rate);
    let decay = T::lit(config.lr_decay);
    let tolerance = T::lit(config.tolerance);
    let mut stall = 0;
    let mut step = 0i32;
    let mut epochs_run = 0;
    let mut converged = best_val == T::zero();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.count()).collect();
    let (xs, ys) = (train.source().data(), train.target().data());

    while !converged && epochs_run < config.max_epochs {
        epochs_run += 1;
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let x = xs.select_rows(batch);
            let y = ys.select_rows(batch);
            let bias_vec = bias.column(0).into_owned();
            let (grad_matrix, grad_bias) = distance_gradient(&matrix, &bias_vec, &x, &y);
            step = step.saturating_add(1);
            match config.optimizer {
                Optimizer::Adam => {
                    moments_matrix.step(&mut matrix, &grad_matrix, lr, step);
                    moments_bias.step(&mut bias, &grad_bias, lr, step);
                }
                Optimizer::Sgd => {
                    matrix -= grad_matrix * lr;
                    bias -= grad_bias * lr;
                }
            }
        }

        if matrix.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch: epochs_run });
        }
        let current = LinearMap::new(matrix.clone(), bias.column(0).into_owned())?;
        let val_loss = distance_loss(&current, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch: epochs_run });
        }
        log::debug!("epoch {epochs_run}: val {val_loss:e}, lr {lr:e}");

        if val_loss < best_val - tolerance {
            stall = 0;
        } else {
            stall += 1;
            lr *= decay;
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = current;
        }
        converged = stall >= config.patience || best_val == T::zero();
    }

    let mut provenance = Provenance::fitter("distance_sgd", LOSS_DISTANCE);
    provenance.set("seed", config.seed);
    provenance.set(
        "optimizer",
        serde_json::to_value(config.optimizer).expect("serializable"),
    );
    provenance.set("learning_rate", config.learning_rate);
    provenance.set("batch_size", config.batch_size);
    provenance.set("epochs_run", epochs_run);
    let map = best.with_provenance(provenance);
    let train_loss = distance_loss(&map, train)?;
    Ok(FitResult {
        map,
        train_loss,
        val_loss: Some(best_val),
        epochs_run,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingSet;

    fn pairs(dim: usize, src: &[f64], tgt: &[f64]) -> PairedEmbeddings {
        PairedEmbeddings::new(
            EmbeddingSet::from_row_slice("en", dim, src).unwrap(),
            EmbeddingSet::from_row_slice("de", dim, tgt).unwrap(),
        )
        .unwrap()
    }

    // Row-by-row batch mean distance.
    fn loss_at(m: &DMatrix<f64>, b: &DVector<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let r = x * m.transpose() - y;
        r.row_iter().map(|row| (row + b.transpose()).norm()).sum::<f64>() / x.nrows() as f64
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, -0.5, 0.3, -1.0, 0.8, 2.0, 0.1, 0.4, -0.6, 0.9, 1.1]);
        let y = DMatrix::from_row_slice(4, 3, &[0.1, 1.0, 0.0, -0.2, 0.5, 1.0, 1.5, -0.3, 0.2, 0.0, 0.0, 1.0]);
        let m = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.0, -0.2, 1.1, 0.3, 0.05, 0.0, 0.8]);
        let b = DVector::from_row_slice(&[0.1, -0.1, 0.2]);
        let (gm, gb) = distance_gradient(&m, &b, &x, &y);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let (mut plus, mut minus) = (m.clone(), m.clone());
                plus[(i, j)] += h;
                minus[(i, j)] -= h;
                let fd = (loss_at(&plus, &b, &x, &y) - loss_at(&minus, &b, &x, &y)) / (2.0 * h);
                assert!((fd - gm[(i, j)]).abs() < 1e-8, "A[{i},{j}]: {fd} vs {}", gm[(i, j)]);
            }
            let (mut plus, mut minus) = (b.clone(), b.clone());
            plus[i] += h;
            minus[i] -= h;
            let fd = (loss_at(&m, &plus, &x, &y) - loss_at(&m, &minus, &x, &y)) / (2.0 * h);
            assert!((fd - gb[(i, 0)]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_residual_has_zero_subgradient() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let (gm, gb) = distance_gradient(&DMatrix::identity(2, 2), &DVector::zeros(2), &x, &x);
        assert_eq!(gm.amax(), 0.0);
        assert_eq!(gb.amax(), 0.0);
    }

    #[test]
    fn identity_optimum_is_kept() {
        let src: Vec<f64> = (0..60).map(|i| (i as f64 * 0.31).sin()).collect();
        let p = pairs(3, &src, &src);
        let fit = fit_distance_sgd(&p, &p, &FitConfig::distance_sgd()).unwrap();
        assert!(fit.val_loss.unwrap() < 1e-6);
        assert!((fit.map.matrix() - DMatrix::identity(3, 3)).amax() < 1e-3);
        assert!(fit.converged);
    }

    #[test]
    fn single_pair_interpolation() {
        let p = pairs(2, &[1.0, 0.0], &[0.0, 1.0]);
        let config = FitConfig {
            learning_rate: 1e-2,
            max_epochs: 2000,
            patience: 20,
            ..FitConfig::distance_sgd()
        };
        let fit = fit_distance_sgd(&p, &p, &config).unwrap();
        let mapped = fit.map.apply(p.source()).unwrap();
        let gap = (mapped.data() - p.target().data()).norm();
        assert!(gap < 1e-3, "gap {gap}");
    }

    #[test]
    fn reproducible_for_seed() {
        let src: Vec<f64> = (0..200).map(|i| (i as f64 * 0.7).sin()).collect();
        let tgt: Vec<f64> = (0..200).map(|i| (i as f64 * 0.7).cos()).collect();
        let p = pairs(4, &src, &tgt);
        let config = FitConfig {
            batch_size: 8,
            max_epochs: 5,
            seed: 3,
            ..FitConfig::distance_sgd()
        };
        let a = fit_distance_sgd(&p, &p, &config).unwrap();
        let b = fit_distance_sgd(&p, &p, &config).unwrap();
        assert_eq!(a.map, b.map);
    }

    #[test]
    fn divergence_names_the_epoch() {
        let src: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() * 1e150).collect();
        let tgt: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos() * 1e150).collect();
        let p = pairs(2, &src, &tgt);
        let config = FitConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e300,
            ..FitConfig::distance_sgd()
        };
        assert!(matches!(
            fit_distance_sgd(&p, &p, &config),
            Err(Error::Diverged { epoch: 1 })
        ));
    }

    #[test]
    fn rejects_empty_validation_and_wrong_method() {
        let p = pairs(2, &[1.0, 0.0], &[0.0, 1.0]);
        let e = EmbeddingSet::<f64>::new("en", DMatrix::zeros(0, 2)).unwrap();
        let empty = PairedEmbeddings::new(e.clone(), e.with_lang("de").unwrap()).unwrap();
        assert!(matches!(
            fit_distance_sgd(&p, &empty, &FitConfig::distance_sgd()),
            Err(Error::EmptyValidation)
        ));
        assert!(matches!(
            fit_distance_sgd(&p, &p, &FitConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }
}
