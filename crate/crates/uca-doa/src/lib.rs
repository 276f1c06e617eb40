//! Wideband two-dimensional direction-of-arrival estimation for uniform
//! circular arrays.
//!
//! The crate covers the array model, wideband signal synthesis, subspace
//! primitives, coherent focusing, the iterative estimator with shrinking
//! search regions and its benchmark variants, the Cramér-Rao bound, accuracy
//! and complexity metrics, and a seeded Monte-Carlo harness.

pub mod array;
pub mod crb;
mod error;
pub mod estimators;
pub mod focusing;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod rng;
pub mod signal;
pub mod spectrum;
pub mod subspace;

pub use array::{ArrayGeometry, DoA, SteeringVector};
pub use error::{Error, Result};
pub use estimators::{Estimation, Estimator, EstimatorState, Method, RipfParams};
pub use signal::{NarrowbandStack, ScenarioConfig, TimeSamples};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
