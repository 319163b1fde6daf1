// NaN-rejecting comparisons and index loops read closer to the algebra here.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod extract;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod report;

pub use error::{Error, Result};
