#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod calibration;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod local_model;
pub mod par;
pub mod rng;
pub mod selector;
pub mod sim;
pub mod stats;

pub use data::Dataset;
pub use error::{Error, Result};
