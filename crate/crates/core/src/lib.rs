// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod distmap;
pub mod error;
pub mod field;
pub mod geom;
pub mod grid;
pub mod integrate;
pub mod metrics;
pub mod placement;
pub mod render;

mod binio;

pub use error::{Error, Result};
