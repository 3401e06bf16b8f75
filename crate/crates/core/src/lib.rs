#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod data_io;
pub mod error;
pub mod hedging;
pub mod rng;
pub mod simulator;
pub mod stylized_facts;
pub mod validation;

pub use error::{Error, Result};
