//! Simulation of privacy-preserving mobile user profiling.
//!
//! The crate models how an analytics network derives an interest profile from
//! the apps a user installs and runs, and how running a few recommended
//! "obfuscation" apps at idle times dilutes the categories a user wants to
//! keep private. An online drift-plus-penalty controller decides how much
//! obfuscation weight to inject per slot, and the ad-traffic model accounts
//! for the bandwidth, CPU, battery and storage that obfuscation costs.
//!
//! Start with the runnable programs under `examples/`.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adsim;
pub mod catalog;
pub mod cli;
pub mod control;
pub mod error;
pub mod metrics;
pub mod obfuscation;
pub mod profiler;
pub mod rng;
pub mod usage;

pub use error::{Error, Result};
