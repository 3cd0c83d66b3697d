//! Language-branch reading comprehension with multilingual multi-teacher
//! distillation.
//!
//! The numeric core is generic over the scalar type ([`Real`]); the aliases
//! below fix it to `f64`, which is what the pipeline uses.

pub mod corpus;
pub mod distill;
pub mod error;
pub mod eval;
pub mod hashing;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Distribution64 = numerics::Distribution<f64>;
pub type SpanModel64 = model::SpanModel<f64>;
pub type SpanParams64 = model::SpanParams<f64>;
pub type ModelBundle64 = model::ModelBundle<f64>;
pub type LogitRecord64 = distill::LogitRecord<f64>;
pub type LogitStore64 = distill::LogitStore<f64>;
pub type TeacherWeights64 = distill::TeacherWeights<f64>;
pub type OptimizerState64 = train::OptimizerState<f64>;
pub type TrainOutcome64 = train::TrainOutcome<f64>;
