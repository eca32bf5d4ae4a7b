//! Quasimodes concentrating on shrinking tubular neighbourhoods and the
//! `L^p` growth exponents they realise.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exponents;
pub mod flat_quasimode;
pub mod geometry;
pub mod index;
pub mod quadrature;
pub mod region_norms;
pub mod scale_predictor;
pub mod sphere_harmonics;

pub use error::{LabError, Result};
