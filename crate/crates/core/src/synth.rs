//! Synthetic paired embeddings with a known ground-truth map.
//!
//! Sources are i.i.d. standard Gaussian rows; targets are `α M e + b*` plus
//! isotropic Gaussian noise. The returned truth map is what the fitters are
//! checked against.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSet, PairedEmbeddings};
use crate::error::{Error, Result};
use crate::map::{LinearMap, Provenance};
use crate::scalar::Real;

/// Largest condition number of generated general matrices.
pub const MAX_CONDITION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// Haar-random orthogonal `T`.
    Orthogonal,
    /// Random matrix with condition number at most [`MAX_CONDITION`].
    GeneralLinear,
    /// `T = I` regardless of seed.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    pub shift_scale: f64,
    pub noise_sigma: f64,
    pub transform_kind: TransformKind,
    pub seed: u64,
    pub source_lang: String,
    pub target_lang: String,
}

impl SynthSpec {
    pub fn new(n: usize, dim: usize, transform_kind: TransformKind, seed: u64) -> Self {
        Self {
            n,
            dim,
            alpha: 1.0,
            shift_scale: 1.0,
            noise_sigma: 0.0,
            transform_kind,
            seed,
            source_lang: "src".into(),
            target_lang: "tgt".into(),
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn shift_scale(mut self, shift_scale: f64) -> Self {
        self.shift_scale = shift_scale;
        self
    }

    pub fn noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn langs(mut self, source: &str, target: &str) -> Self {
        self.source_lang = source.into();
        self.target_lang = target.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("synthetic n and dim must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if !(self.shift_scale >= 0.0 && self.shift_scale.is_finite()) {
            return Err(Error::InvalidConfig("shift scale must be non-negative".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled row by row so the stream order matches the row-major file layout.
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// columns of `Q` flipped to make `diag(R)` positive.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Gaussian matrix with singular values clipped from below to
/// `s_max / MAX_CONDITION`, then rescaled to unit mean squared singular value.
pub fn random_well_conditioned(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let svd = gaussian_matrix(rng, dim, dim).svd(true, true);
    let s_max = svd.singular_values.max();
    let floor = s_max / MAX_CONDITION;
    let clipped = svd.singular_values.map(|s| s.max(floor));
    let rms = (clipped.norm_squared() / dim as f64).sqrt();
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    u * DMatrix::from_diagonal(&(clipped / rms)) * v_t
}

/// Generates source/target pairs and the map that produced them.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<(PairedEmbeddings<T>, LinearMap<T>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;

    let transform = match spec.transform_kind {
        TransformKind::Orthogonal => random_orthogonal(&mut rng, dim),
        TransformKind::GeneralLinear => random_well_conditioned(&mut rng, dim),
        TransformKind::Identity => DMatrix::identity(dim, dim),
    };
    let matrix = transform * spec.alpha;
    let shift: DVector<f64> = if spec.shift_scale > 0.0 {
        DVector::from_fn(dim, |_, _| spec.shift_scale * rng.sample::<f64, _>(StandardNormal))
    } else {
        DVector::zeros(dim)
    };

    let source = gaussian_matrix(&mut rng, spec.n, dim);
    let mut target = &source * matrix.transpose();
    for mut row in target.row_iter_mut() {
        row += shift.transpose();
    }
    if spec.noise_sigma > 0.0 {
        target += gaussian_matrix(&mut rng, spec.n, dim) * spec.noise_sigma;
    }

    let cast = |m: &DMatrix<f64>| m.map(T::lit);
    let source = EmbeddingSet::new(spec.source_lang.clone(), cast(&source))?;
    let target = EmbeddingSet::new(spec.target_lang.clone(), cast(&target))?;
    let mut provenance = Provenance::fitter("synth", "none");
    provenance.training_set = Some(format!("synth:seed={}", spec.seed));
    provenance.set("synth", serde_json::to_value(spec).expect("spec serializes"));
    let truth = LinearMap::new(cast(&matrix), shift.map(T::lit))?.with_provenance(provenance);
    Ok((PairedEmbeddings::new(source, target)?, truth))
}
