//! Affine maps between the sentence-embedding spaces of two languages.
//!
//! Fit `ẽ = A e + b` from translation pairs ([`fitting`]), measure how much
//! it improves cross-lingual correspondence ([`metrics`]), and audit how far
//! `A` is from a uniformly dilated orthogonal matrix ([`diagnostics`]).
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod fitting;
pub mod io;
pub mod map;
pub mod metrics;
pub mod scalar;
pub mod split;
pub mod synth;

pub use diagnostics::{dilation_report, ortho_report, ortho_report_with_threshold, DilationReport, OrthoReport};
pub use embedding::{EmbeddingSet, PairedEmbeddings};
pub use error::{Error, FormatError, Result};
pub use fitting::{fit, fit_distance_sgd, fit_ols, fit_procrustes, FitConfig, FitMethod, FitResult, Optimizer};
pub use map::{apply, LinearMap, Provenance};
pub use metrics::{compare, evaluate, mean_distance, MetricsReport};
pub use scalar::Real;
pub use split::{split, split_indices, Split, SplitIndices, SplitSpec};
pub use synth::{generate, SynthSpec, TransformKind};

pub type EmbeddingSetF32 = EmbeddingSet<f32>;
pub type EmbeddingSetF64 = EmbeddingSet<f64>;
pub type PairedEmbeddingsF32 = PairedEmbeddings<f32>;
pub type PairedEmbeddingsF64 = PairedEmbeddings<f64>;
pub type LinearMapF32 = LinearMap<f32>;
pub type LinearMapF64 = LinearMap<f64>;
pub type FitResultF64 = FitResult<f64>;
pub type MetricsReportF64 = MetricsReport<f64>;
pub type OrthoReportF64 = OrthoReport<f64>;
pub type DilationReportF64 = DilationReport<f64>;
