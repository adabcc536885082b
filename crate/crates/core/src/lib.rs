//! Variational rovibrational levels of the hydrogen molecular ions H2+, D2+ and
//! HD+ in perimetric coordinates with a Sturmian basis.

pub mod algebra;
pub mod assembly;
pub mod banded;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod refdata;
pub mod run;
pub mod sensitivity;
pub mod sturmian;
pub mod systems;

pub use error::{Error, Result};
