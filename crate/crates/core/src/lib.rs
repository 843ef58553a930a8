//! Projective compactification on coordinate charts.
//!
//! Fields are evaluated pointwise to jets (value plus exact partials up to
//! order three); connections, curvature, tractor sections and boundary
//! asymptotics are all computed from those jets.

pub mod boundary;
pub mod cli;
pub mod compactness;
pub mod connections;
pub mod error;
pub mod fields;
pub mod geodesics;
pub mod linalg;
pub mod tractor;

pub use error::{Error, Result};
