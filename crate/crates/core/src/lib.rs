//! Resonance geometry and normal-form toolkit for nearly-integrable Hamiltonians
//! `H(y, x) = |y|^2/2 + ε f(x)` on `R^n × T^n`.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod averaging;
pub mod cover;
pub mod error;
pub mod fourier;
pub mod genericity;
pub mod morse;
pub mod ode;
pub mod presets;
pub mod series;
pub mod standard_form;
pub mod suite;
pub mod unimodular;

pub use error::{Error, Result};
