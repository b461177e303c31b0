//! File formats, an on-disk point-set cache, report writers and experiment
//! drivers on top of `qsw-core`; the `qsw` binary exposes them as
//! subcommands.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`text`] | point-cloud and point-set text files |
//! | [`ppm`] | PPM images and palette CSV |
//! | [`cache`] | [`DiskCache`](cache::DiskCache), a persistent point-set cache |
//! | [`report`] | CSV/JSON experiment reports |
//! | [`experiments`] | drivers for every subcommand |

pub mod cache;
pub mod error;
pub mod experiments;
pub mod ppm;
pub mod report;
pub mod text;

pub use error::{CliError, Result};
