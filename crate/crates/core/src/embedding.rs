//! Sentence-embedding matrices and translation pairs.

use nalgebra::{DMatrix, DVectorView, Dyn, MatrixView, U1};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type RowView<'a, T> = MatrixView<'a, T, U1, Dyn, U1, Dyn>;

/// An `n × D` matrix of sentence embeddings in one language.
///
/// Row `i` is the embedding of sentence `i`. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T: Real = f64> {
    lang: String,
    data: DMatrix<T>,
}

impl<T: Real> EmbeddingSet<T> {
    pub fn new(lang: impl Into<String>, data: DMatrix<T>) -> Result<Self> {
        let lang = lang.into();
        if lang.is_empty() {
            return Err(Error::EmptyLanguage);
        }
        if data.ncols() == 0 {
            return Err(Error::Shape {
                what: "embedding dimension",
                expected: "a positive dimension".into(),
                actual: "0".into(),
            });
        }
        check_finite(&data)?;
        Ok(Self { lang, data })
    }

    /// Builds a set from row-major values.
    pub fn from_row_slice(lang: impl Into<String>, dim: usize, values: &[T]) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Shape {
                what: "row-major buffer",
                expected: format!("a multiple of dim {dim}"),
                actual: values.len().to_string(),
            });
        }
        let count = values.len() / dim;
        Self::new(lang, DMatrix::from_row_slice(count, dim, values))
    }

    pub fn from_rows(lang: impl Into<String>, rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Shape {
                what: "row length",
                expected: dim.to_string(),
                actual: format!("{} at row {i}", r.len()),
            });
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(lang, dim, &flat)
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> RowView<'_, T> {
        self.data.row(i)
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, T> {
        self.data.column(j)
    }

    /// Row-major copy of the coordinates.
    pub fn to_row_major(&self) -> Vec<T> {
        self.data.transpose().as_slice().to_vec()
    }

    /// New set holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            lang: self.lang.clone(),
            data: self.data.select_rows(indices),
        }
    }

    /// Same data with a different language tag.
    pub fn with_lang(mut self, lang: impl Into<String>) -> Result<Self> {
        self.lang = lang.into();
        if self.lang.is_empty() {
            return Err(Error::EmptyLanguage);
        }
        Ok(self)
    }

    /// Scales every row to unit Euclidean length.
    ///
    /// Never applied implicitly; callers opt in.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, mut row) in data.row_iter_mut().enumerate() {
            let norm = row.norm();
            if norm == T::zero() {
                return Err(Error::ZeroNorm {
                    set: "normalize",
                    row: i,
                });
            }
            row /= norm;
        }
        Ok(Self {
            lang: self.lang.clone(),
            data,
        })
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> EmbeddingSet<U> {
        EmbeddingSet {
            lang: self.lang.clone(),
            data: self.data.map(|x| U::lit(x.to_f64_lossy())),
        }
    }

    /// Wraps already-validated data. Caller guarantees the invariants.
    pub(crate) fn from_parts_unchecked(lang: String, data: DMatrix<T>) -> Self {
        debug_assert!(!lang.is_empty() && data.ncols() > 0);
        Self { lang, data }
    }
}

pub(crate) fn check_finite<T: Real>(m: &DMatrix<T>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Source and target embeddings where row `i` of each is a translation of
/// the same sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedEmbeddings<T: Real = f64> {
    source: EmbeddingSet<T>,
    target: EmbeddingSet<T>,
}

impl<T: Real> PairedEmbeddings<T> {
    pub fn new(source: EmbeddingSet<T>, target: EmbeddingSet<T>) -> Result<Self> {
        if source.count() != target.count() {
            return Err(Error::Shape {
                what: "paired row count",
                expected: source.count().to_string(),
                actual: target.count().to_string(),
            });
        }
        if source.dim() != target.dim() {
            return Err(Error::Shape {
                what: "paired dimension",
                expected: source.dim().to_string(),
                actual: target.dim().to_string(),
            });
        }
        if source.lang() == target.lang() {
            log::warn!(
                "source and target share language tag {:?}; pairs are treated as cross-lingual anyway",
                source.lang()
            );
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &EmbeddingSet<T> {
        &self.source
    }

    pub fn target(&self) -> &EmbeddingSet<T> {
        &self.target
    }

    pub fn count(&self) -> usize {
        self.source.count()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn same_language(&self) -> bool {
        self.source.lang() == self.target.lang()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            source: self.source.select_rows(indices),
            target: self.target.select_rows(indices),
        }
    }

    pub fn into_parts(self) -> (EmbeddingSet<T>, EmbeddingSet<T>) {
        (self.source, self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = EmbeddingSet::from_row_slice("en", 2, &[1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        let err = EmbeddingSet::from_row_slice("en", 2, &[1.0, 0.0, f64::INFINITY, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn rejects_empty_lang_and_zero_dim() {
        assert!(matches!(
            EmbeddingSet::from_row_slice("", 1, &[1.0]),
            Err(Error::EmptyLanguage)
        ));
        assert!(EmbeddingSet::<f64>::new("en", DMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn empty_set_is_allowed() {
        let s = EmbeddingSet::<f64>::new("en", DMatrix::zeros(0, 4)).unwrap();
        assert_eq!(s.count(), 0);
        assert_eq!(s.dim(), 4);
    }

    #[test]
    fn row_major_layout() {
        let s = EmbeddingSet::from_row_slice("en", 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(s.count(), 2);
        assert_eq!(s.row(1)[2], 6.0);
        assert_eq!(s.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(EmbeddingSet::from_rows("en", &rows).is_err());
    }

    #[test]
    fn pairs_require_matching_shapes() {
        let a = EmbeddingSet::from_row_slice("en", 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = EmbeddingSet::from_row_slice("de", 2, &[1.0, 0.0]).unwrap();
        assert!(PairedEmbeddings::new(a.clone(), b).is_err());
        let c = EmbeddingSet::from_row_slice("de", 1, &[1.0, 0.0]).unwrap();
        assert!(PairedEmbeddings::new(a.clone(), c).is_err());
        let same = PairedEmbeddings::new(a.clone(), a).unwrap();
        assert!(same.same_language());
    }

    #[test]
    fn normalization_is_explicit() {
        let s = EmbeddingSet::from_row_slice("en", 2, &[3.0, 4.0, 0.0, 2.0]).unwrap();
        let n = s.l2_normalized().unwrap();
        assert!((n.row(0)[0] - 0.6f64).abs() < 1e-15);
        assert_eq!(s.row(0)[0], 3.0);
        let z = EmbeddingSet::from_row_slice("en", 2, &[0.0, 0.0]).unwrap();
        assert!(matches!(z.l2_normalized(), Err(Error::ZeroNorm { row: 0, .. })));
    }
}
