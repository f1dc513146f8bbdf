//! Gaussian free fields on the hypercube `{0,1}^N` whose covariance is the
//! Green function of a long-range random walk with geometric killing.

// `ensure!` negates its condition so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod error;
pub mod field;
pub mod increments;
pub mod limits;
pub mod pointproc;
pub mod polynomials;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod walk;
pub mod wht;

pub use bits::VertexIndex;
pub use error::{Error, Result};
pub use field::{FieldSample, SpectralNoise};
pub use increments::IncrementModel;
pub use limits::{KappaSpec, LevelSetSample, MixingLaw};
pub use pointproc::{SpinMeasure, YLaw};
pub use polynomials::{HermiteEvaluator, KrawtchoukBasis};
pub use walk::{GreenSpec, TransitionMatrix};
