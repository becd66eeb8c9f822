//! Recognition of heat-induced food state changes from time series of
//! vision-language prompt-pair scores.
//!
//! The pipeline turns raw image-text similarities into a degree of state
//! change per frame, ranks candidate prompt pairs by the slope of a
//! least-squares line through that degree, calibrates a threshold on the
//! smoothed degree at a human-annotated change time, and detects the change on
//! unseen sessions by threshold crossing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod model;
pub mod recognizer;
pub mod scoring;
pub mod signal;
pub mod synthgen;

pub use exec::Execution;
