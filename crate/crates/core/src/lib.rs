// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod floquet;
pub mod orbit;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
