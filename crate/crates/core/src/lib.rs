//! Quasi-static simulation of a small lizard-like robot crossing granular
//! media, with servo-load sensing, KNN depth classification and a linear
//! body-phase feedback controller.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod gait;
pub mod percept;
pub mod seed;
pub mod terra;

pub use error::{Error, Result};
