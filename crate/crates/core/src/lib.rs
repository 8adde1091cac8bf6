//! Physical-layer simulator of an alignment-tolerant full-duplex free-space
//! optical bridge.
//!
//! A double-clad-fiber coupler splits the two directions by mode group: the
//! single-mode core launches the transmit beam while the large inner
//! cladding collects the received light. The crates models the optics of
//! that split (Gaussian-beam coupling under misalignment), the guided
//! component chain, the time-varying channel, and an OFDM radio waveform
//! with per-subcarrier EVM analysis, and composes them into long-term
//! campaigns, EVM-vs-power sweeps, and throughput traces.

pub mod beam;
pub mod calibrate;
pub mod campaign;
pub mod channel;
pub mod components;
pub mod config;
pub mod error;
pub mod ofdm;
pub mod report;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
