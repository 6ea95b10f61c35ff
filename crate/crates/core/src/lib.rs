//! Standing waves of nonlinear Schrödinger equations with deep potential
//! wells, continued from the infinite-well limit.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod continuation;
pub mod error;
pub mod field;
pub mod limit;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod profiles;
pub mod sampling;
pub mod spectral;
pub mod tridiag;
pub mod verify;

pub use error::{Error, LinalgError, Result};
pub use field::Field;
pub use mesh::{align_domain, DomainSpec, Grid, NodeKind};
pub use model::{Forms, LambdaMetric, Model, Nonlinearity, ProblemSpec};
