//! EEG-based person identification.
//!
//! The pipeline removes the headset DC offset, z-scores every channel,
//! isolates the Delta pattern with a Butterworth band-pass, learns an
//! attention-weighted code with an encoder-decoder LSTM, and identifies the
//! subject from that code with gradient-boosted trees.

pub mod boost;
pub mod cli;
pub mod data;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod signal;
