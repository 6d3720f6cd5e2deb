//! Experiment plumbing: sweep specs, the Monte-Carlo engine, CSV and SVG
//! output, independent oracles and the self-check suite.

pub mod config;
pub mod oracle;
pub mod plot;
pub mod sweep;
pub mod table;
pub mod validate;
