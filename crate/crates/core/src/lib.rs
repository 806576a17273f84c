#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod mhd;
pub mod numerics;
pub mod posterior;

pub use error::{Error, Result};
