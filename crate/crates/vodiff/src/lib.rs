#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod field;
pub mod hybrid;
pub mod mlf;
pub mod modes;
pub mod oracle;
pub mod quad;
pub mod scenario;
pub mod spectral;
pub mod voops;

pub use error::{Error, Result};
