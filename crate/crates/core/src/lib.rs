//! Kähler metrics of constant holomorphic sectional curvature: curvature
//! checks, developing maps into the three complex space forms, monodromy,
//! and removal of compact and codimension-two singularities by holomorphic
//! extension.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod developing;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod extension;
pub mod jet;
pub mod linalg;
pub mod models;
pub mod probes;
pub mod report;

pub use error::{Error, Result};
