//! Boolean evolutionary learning in a noisy opto-electronic reservoir.
//!
//! The crate simulates a recurrent network whose nodes are coupled through a
//! diffractive element and read out through a Boolean mirror array, trains the
//! Boolean readout by single-bit evolutionary descent under additive output
//! noise, and provides the analytics used to study how noise drives otherwise
//! identical learners apart (Hamming-distance rate model, flip probabilities,
//! inverted-path gradient probes).
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! `*F64`/`*F32` aliases below fix the precision for callers that do not care.

pub mod analytics;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod learner;
pub mod reservoir;
pub mod scalar;
pub mod seeds;
pub mod stats;
pub mod task;

pub use error::{Error, Result};
pub use learner::BooleanWeights;
pub use scalar::Real;

pub type TimeSeriesF64 = task::TimeSeries<f64>;
pub type TimeSeriesF32 = task::TimeSeries<f32>;
pub type DatasetF64 = task::Dataset<f64>;
pub type DatasetF32 = task::Dataset<f32>;
pub type ReservoirF64 = reservoir::Reservoir<f64>;
pub type ReservoirF32 = reservoir::Reservoir<f32>;
pub type StateMatrixF64 = reservoir::StateMatrix<f64>;
pub type StateMatrixF32 = reservoir::StateMatrix<f32>;
pub type SystemF64<'a> = learner::System<'a, f64>;
pub type SystemF32<'a> = learner::System<'a, f32>;
pub type LearningTraceF64 = learner::LearningTrace<f64>;
pub type LearningTraceF32 = learner::LearningTrace<f32>;


