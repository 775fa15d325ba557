//! File formats, reports and the command-line front end for `mbump-core`.

pub mod cli;
pub mod config;
pub mod io;
pub mod parallel;
pub mod report;
pub mod svg;
