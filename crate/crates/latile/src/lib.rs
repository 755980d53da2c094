//! Host side of the toolkit: wall-clock probing, JSON and CSV formats, the
//! benchmark harness and the `latile` command line.

pub mod bench;
pub mod cli;
pub mod formats;
pub mod hw;

pub use formats::ProfileDocument;
