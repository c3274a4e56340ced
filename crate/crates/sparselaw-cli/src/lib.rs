//! Library side of the command-line crate: configuration parsing, file
//! formats, the results store, the sweep runner, and report emission. The
//! `sparselaw` binary is a thin dispatcher over these modules.

pub mod checkpoint;
pub mod configs;
pub mod formats;
pub mod kvconfig;
pub mod report;
pub mod store;
pub mod svgplot;
pub mod sweep;
