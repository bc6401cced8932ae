//! Crater-relative Monte Carlo localization.
//!
//! Estimates a rover's absolute position inside an orbital crater map from
//! leading-edge crater detections: a synthetic sensor emits rover-frame edge
//! points, a clamped-reciprocal rim-distance score turns them into a
//! measurement likelihood, and a log-weight particle filter with
//! N_eff-triggered resampling tracks the position belief. The harness layers
//! deterministic single trials, Monte Carlo batches, and a resampler
//! comparison on top.

pub mod filter;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod qscore;
pub mod sensing;
pub mod stream;
pub mod world;
