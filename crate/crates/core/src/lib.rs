//! Calderón–Zygmund geometry, maximal functions, atomic Hardy spaces and
//! singular integrals of the distinguished Laplacian on finite cones of a
//! weighted homogeneous tree.
//!
//! The tree of order `q + 1` carries the measure `μ({x}) = q^{ℓ(x)}`. On a
//! truncation every set measure is an exact rational, so the geometric and
//! covering inequalities are checked with zero tolerance; the spectral
//! machinery in [`operators`] works in `f64`.

pub mod error;
pub mod geometry;
pub mod hardy;
pub mod interpolation;
pub mod maximal;
pub mod measure;
pub mod operators;
pub mod random;
pub mod scalar;
pub mod tree;

pub use error::{Error, Result};
pub use geometry::{Band, CzSet, DilatedCzSet, Trapezoid};
pub use measure::{TreeFunction, WeightedMeasure};
pub use scalar::{Exact, Exponent, Scalar};
pub use tree::{Tree, TreeConfig, VertexId, Word};

/// Caps the worker pools used by sweeps and by the dense eigensolver.
///
/// Only the first call configures the global pool; later calls return an error.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    faer::set_global_parallelism(if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) });
    Ok(())
}
