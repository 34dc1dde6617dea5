//! The affine map `x ↦ A x + b` between two embedding spaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::embedding::{check_finite, EmbeddingSet};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Suffix appended to the language tag of mapped embeddings.
pub const MAPPED_SUFFIX: &str = "~mapped";

/// Free-form record describing where a map came from.
///
/// The named fields are the ones the toolkit itself writes; anything else
/// (split indices, warnings, user notes) lives in `extra`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Provenance {
    pub fn fitter(name: &str, loss: &str) -> Self {
        Self {
            fitter: Some(name.to_owned()),
            loss: Some(loss.to_owned()),
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.extra.insert(key.to_owned(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.extra.get(key)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("provenance is always serializable")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Affine map `ẽ = A e + b` with a square `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<T: Real = f64> {
    matrix: DMatrix<T>,
    bias: DVector<T>,
    pub provenance: Provenance,
}

impl<T: Real> LinearMap<T> {
    pub fn new(matrix: DMatrix<T>, bias: DVector<T>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim {
            return Err(Error::Shape {
                what: "map matrix",
                expected: "a non-empty square matrix".into(),
                actual: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        if bias.len() != dim {
            return Err(Error::Shape {
                what: "map bias",
                expected: dim.to_string(),
                actual: bias.len().to_string(),
            });
        }
        check_finite(&matrix)?;
        if let Some(i) = bias.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(Self {
            matrix,
            bias,
            provenance: Provenance::default(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), DVector::zeros(dim)).expect("identity map is valid")
    }

    /// Builds a map from a row-major `A` and a bias.
    pub fn from_row_slices(dim: usize, matrix: &[T], bias: &[T]) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Shape {
                what: "row-major map matrix",
                expected: (dim * dim).to_string(),
                actual: matrix.len().to_string(),
            });
        }
        Self::new(
            DMatrix::from_row_slice(dim, dim, matrix),
            DVector::from_column_slice(bias),
        )
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn bias(&self) -> &DVector<T> {
        &self.bias
    }

    /// Applies the map to every row of `set`.
    pub fn apply(&self, set: &EmbeddingSet<T>) -> Result<EmbeddingSet<T>> {
        if set.dim() != self.dim() {
            return Err(Error::DimMismatch {
                map_dim: self.dim(),
                set_dim: set.dim(),
            });
        }
        let data = self.apply_matrix(set.data());
        let mapped = EmbeddingSet::from_parts_unchecked(format!("{}{MAPPED_SUFFIX}", set.lang()), data);
        // A finite map of finite data can still overflow.
        check_finite(mapped.data())?;
        Ok(mapped)
    }

    /// Row-wise `X Aᵀ + 1 bᵀ` on a raw `n × D` matrix.
    pub(crate) fn apply_matrix(&self, rows: &DMatrix<T>) -> DMatrix<T> {
        let mut out = rows * self.matrix.transpose();
        for mut row in out.row_iter_mut() {
            row += self.bias.transpose();
        }
        out
    }

    pub fn cast<U: Real>(&self) -> LinearMap<U> {
        LinearMap {
            matrix: self.matrix.map(|x| U::lit(x.to_f64_lossy())),
            bias: self.bias.map(|x| U::lit(x.to_f64_lossy())),
            provenance: self.provenance.clone(),
        }
    }
}

/// Free-function form of [`LinearMap::apply`].
pub fn apply<T: Real>(map: &LinearMap<T>, set: &EmbeddingSet<T>) -> Result<EmbeddingSet<T>> {
    map.apply(set)
}
