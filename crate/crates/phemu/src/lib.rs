//! File formats, benchmarks and the command line for `phemu`.
//!
//! The schemes, the codec and the planner live in [`phemu_core`]; this crate
//! adds what needs `std`: JSON key and ciphertext files, timed benchmark
//! loops with CSV/JSON export, and the `phemu` binary.

#![warn(missing_debug_implementations, rust_2018_idioms)]

pub mod bench;
pub mod cli;
pub mod formats;

pub use phemu_core as core;
