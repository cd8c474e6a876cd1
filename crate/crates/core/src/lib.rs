//! Band-limited Gaussian random fields on the sphere: simulation, exact and
//! asymptotic covariance, excursion areas and their Wiener chaos
//! decomposition, with a Monte Carlo harness for the high-frequency
//! variance law and central limit behaviour of the excursion area.

pub mod chaos;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod field_model;
pub mod rng;
pub mod specfun;
pub mod sphere_grid;
pub mod stats;

pub use error::{Error, Result};
pub use field_model::{make_spec, BandRounding, FieldSample, FieldSpec, HarmonicCoefficients, Synthesizer};
pub use sphere_grid::SphereGrid;
