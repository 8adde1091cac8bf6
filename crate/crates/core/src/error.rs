//! Error types shared across the simulator.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A requested coupler port pair does not exist in the device topology.
    #[error("unsupported coupler path: {from} -> {to}")]
    Topology { from: String, to: String },

    /// Collimated beam would be clipped by the lens aperture; truncation is
    /// not modeled, so the configuration is rejected instead.
    #[error(
        "collimated 1/e^2 beam diameter {beam_diameter_m:.4e} m exceeds lens aperture {aperture_m:.4e} m"
    )]
    BeamTruncation {
        beam_diameter_m: f64,
        aperture_m: f64,
    },

    /// An angle fell outside the small-angle range the paraxial model covers.
    #[error("angle {angle_rad:.3e} rad outside paraxial bound {bound_rad:.3e} rad")]
    ParaxialBound { angle_rad: f64, bound_rad: f64 },

    /// A numeric input was NaN or infinite where a finite value is required.
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    /// Waveform samples contain NaN or infinity.
    #[error("corrupted waveform: non-finite samples")]
    CorruptedWaveform,

    /// Crosstalk injection was attempted with an interferer generated from
    /// the same payload seed as the signal.
    #[error("crosstalk interferer shares payload seed {0}; a decorrelated payload is required")]
    CorrelatedCrosstalk(u64),

    /// Waveform descriptor does not match the supplied configuration.
    #[error("waveform descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    /// An operation that needs samples received an empty input.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A campaign would exceed the in-memory sample cap.
    #[error(
        "campaign of {requested} samples exceeds the cap of {cap}; use the streaming generator instead"
    )]
    CampaignTooLarge { requested: u64, cap: u64 },

    /// Two traces that must come from the same campaign do not line up.
    #[error("mismatched campaigns: {0}")]
    CampaignMismatch(String),

    /// A calibration routine failed to converge on its targets.
    #[error("calibration did not converge: {0}")]
    Calibration(String),

    /// Filesystem failure with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
