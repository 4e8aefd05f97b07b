//! Bank stability indicators, oil-price shock decomposition, panel
//! diagnostics and pooled mean group estimation of panel ARDL models.

pub mod ardl_pmg;
pub mod diagnostics;
pub mod error;
pub mod indicators;
pub mod linalg;
pub mod panel_data;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
