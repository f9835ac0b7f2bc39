//! Segmented switched linear models of PV+battery distribution grids,
//! magnitude-modulated probing design and residual-based contingency
//! detection.

pub mod config;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod probing;
pub mod segmentation;
pub mod ssbuild;

pub use error::{Error, Result};
