pub mod analysis;
pub mod cli;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod plot;
pub mod report;
pub mod shells;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};
pub use faer::{c64, Mat, MatRef};
