//! Transfer models of the guided-optics chain: the double-clad-fiber
//! directional-split coupler, dB-domain link budgets, the transmit launch,
//! and the avalanche-photodiode receiver front end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{dbm_to_watts, ratio_to_db, ELEMENTARY_CHARGE};

/// Named ports of the bridge topology.
///
/// `SmfFeed` (sigma) and `MmfReceive` (mu) are the coupler's fiber pigtails,
/// `DcfAir` the common double-clad air interface. `DownlinkFeed` (delta) and
/// `UplinkFeed` (nu) are the transmitter attachment points, `MonitorSmf` (S)
/// and `MonitorMmf` (M) the power monitors, and `ModeFieldAdapter` (phi) the
/// adapter between the 200 um receive fiber and the OM4 trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortId {
    SmfFeed,
    MmfReceive,
    DcfAir,
    DownlinkFeed,
    UplinkFeed,
    MonitorSmf,
    MonitorMmf,
    ModeFieldAdapter,
}

impl PortId {
    pub fn label(&self) -> &'static str {
        match self {
            PortId::SmfFeed => "smf_feed",
            PortId::MmfReceive => "mmf_receive",
            PortId::DcfAir => "dcf_air",
            PortId::DownlinkFeed => "downlink_feed",
            PortId::UplinkFeed => "uplink_feed",
            PortId::MonitorSmf => "monitor_smf",
            PortId::MonitorMmf => "monitor_mmf",
            PortId::ModeFieldAdapter => "mode_field_adapter",
        }
    }
}

/// Measured transfer of the double-clad-fiber coupler.
///
/// The device splits direction by mode group: the single-mode feeder couples
/// adiabatically to the DCF core while the inner-cladding content extracts to
/// the multi-mode pigtail. Transmission is flat across the nearby wavebands,
/// so a single per-path figure at the reference wavelength suffices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcfCouplerSpec {
    /// Insertion loss of the DCF <-> SMF core path (dB).
    pub smf_insertion_db: f64,
    /// Insertion loss of the DCF inner cladding -> MMF path (dB).
    pub mmf_insertion_db: f64,
    /// Isolation of the SMF -> MMF leakage path (dB).
    pub crosstalk_db: f64,
    /// Wavelength the figures were taken at (m).
    pub reference_wavelength: f64,
    /// Free-text note on spectral flatness.
    pub flatness_note: String,
}

impl Default for DcfCouplerSpec {
    fn default() -> Self {
        Self {
            smf_insertion_db: 0.9,
            mmf_insertion_db: 1.5,
            crosstalk_db: 33.1,
            reference_wavelength: 1550e-9,
            flatness_note: "transmission flat across many wavebands".into(),
        }
    }
}

impl DcfCouplerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.smf_insertion_db >= 0.0) || !(self.mmf_insertion_db >= 0.0) {
            return Err(Error::Config("coupler insertion losses must be >= 0 dB".into()));
        }
        if !(self.crosstalk_db >= 20.0) {
            return Err(Error::Config(
                "coupler crosstalk isolation below the 20 dB sanity floor".into(),
            ));
        }
        Ok(())
    }
}

/// Loss of one pass through the coupler between two ports (dB).
///
/// Supported paths: SMF feed <-> air (reciprocal), air -> MMF receive, and
/// the SMF -> MMF isolation path. Anything else is a topology error.
pub fn coupler_transfer(spec: &DcfCouplerSpec, from: PortId, to: PortId) -> Result<f64> {
    use PortId::*;
    match (from, to) {
        (SmfFeed, DcfAir) | (DcfAir, SmfFeed) => Ok(spec.smf_insertion_db),
        (DcfAir, MmfReceive) => Ok(spec.mmf_insertion_db),
        (SmfFeed, MmfReceive) => Ok(spec.crosstalk_db),
        _ => Err(Error::Topology {
            from: from.label().into(),
            to: to.label().into(),
        }),
    }
}

/// Transmit-side description: booster output power, wavelength, and the
/// intensity-modulation depth of the linearized modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    /// Launch power at the feed port (dBm).
    pub power_dbm: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Intensity modulation index in (0, 1].
    pub modulation_index: f64,
}

impl Default for LaunchSpec {
    fn default() -> Self {
        Self {
            power_dbm: 11.0,
            wavelength: 1550e-9,
            modulation_index: 0.25,
        }
    }
}

impl LaunchSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.power_dbm.is_finite() {
            return Err(Error::NonFinite("launch power_dbm"));
        }
        if !(self.modulation_index > 0.0 && self.modulation_index <= 1.0) {
            return Err(Error::Config("modulation_index must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One element of a dB-domain budget chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainElement {
    pub name: String,
    /// Positive dB figure; `is_gain` selects sign.
    pub db: f64,
    #[serde(default)]
    pub is_gain: bool,
}

impl ChainElement {
    pub fn loss(name: impl Into<String>, db: f64) -> Self {
        Self {
            name: name.into(),
            db,
            is_gain: false,
        }
    }

    pub fn gain(name: impl Into<String>, db: f64) -> Self {
        Self {
            name: name.into(),
            db,
            is_gain: true,
        }
    }
}

/// Ordered list of losses and gains between two points of the topology.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkBudgetChain {
    pub elements: Vec<ChainElement>,
}

impl LinkBudgetChain {
    pub fn new(elements: Vec<ChainElement>) -> Self {
        Self { elements }
    }

    /// Net dB change through the chain (gains positive, losses negative).
    pub fn net_db(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| if e.is_gain { e.db } else { -e.db })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for element in &self.elements {
            if !element.db.is_finite() {
                return Err(Error::NonFinite("budget chain element"));
            }
        }
        Ok(())
    }
}

/// Received power after running a launch through a budget chain (dBm).
///
/// Exact dB arithmetic, no clipping; an empty chain is loopback.
pub fn budget_rop(launch: &LaunchSpec, chain: &LinkBudgetChain) -> Result<f64> {
    launch.validate()?;
    chain.validate()?;
    Ok(launch.power_dbm + chain.net_db())
}

/// Avalanche-photodiode receiver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApdParams {
    /// Primary responsivity (A/W).
    pub responsivity: f64,
    /// Avalanche multiplication gain.
    pub avalanche_gain: f64,
    /// Excess noise factor of the multiplication process.
    pub excess_noise_factor: f64,
    /// Input-referred thermal noise current density (A/sqrt(Hz)).
    pub thermal_noise_current_density: f64,
    /// Primary dark current (A).
    pub dark_current: f64,
    /// Received power where gain compression sets in (dBm).
    pub saturation_rop_dbm: f64,
    /// Receiver electrical bandwidth (Hz).
    pub bandwidth: f64,
    /// Curvature of the soft compression above saturation (dB per dB^2 of
    /// overdrive, applied to signal power).
    pub compression_db_per_db2: f64,
}

impl Default for ApdParams {
    fn default() -> Self {
        Self {
            responsivity: 0.9,
            avalanche_gain: 10.0,
            excess_noise_factor: 5.0,
            thermal_noise_current_density: 2e-12,
            dark_current: 1e-9,
            saturation_rop_dbm: -17.0,
            bandwidth: 400e6,
            compression_db_per_db2: 4.0,
        }
    }
}

impl ApdParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("responsivity", self.responsivity),
            ("avalanche_gain", self.avalanche_gain),
            ("excess_noise_factor", self.excess_noise_factor),
            (
                "thermal_noise_current_density",
                self.thermal_noise_current_density,
            ),
            ("dark_current", self.dark_current),
            ("bandwidth", self.bandwidth),
            ("compression_db_per_db2", self.compression_db_per_db2),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::Config(format!("APD {name} must be positive")));
            }
        }
        if !self.saturation_rop_dbm.is_finite() {
            return Err(Error::NonFinite("APD saturation_rop_dbm"));
        }
        Ok(())
    }

    /// Signal-amplitude compression factor at the given received power.
    ///
    /// Unity below the saturation threshold; above it the signal power is
    /// compressed by `k * overdrive^2` dB, a smooth third-order roll-over.
    pub fn compression_factor(&self, rop_dbm: f64) -> f64 {
        let overdrive = rop_dbm - self.saturation_rop_dbm;
        if overdrive <= 0.0 {
            return 1.0;
        }
        let power_penalty_db = self.compression_db_per_db2 * overdrive * overdrive;
        10f64.powf(-power_penalty_db / 20.0)
    }
}

/// Detection result for a mean received optical power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApdDetection {
    /// Mean signal photocurrent after avalanche gain and compression (A).
    pub signal_current: f64,
    /// Total noise current variance over the receiver bandwidth (A^2).
    pub noise_variance: f64,
    /// Whether the receiver operates at or above the saturation threshold.
    pub saturated: bool,
    /// Electrical SNR of the modulated signal over the receiver bandwidth (dB).
    pub electrical_snr_db: f64,
}

/// Detect a mean optical power with the APD front end.
///
/// Shot noise `2 q M^2 F (R P + I_dark) B` plus thermal `i_th^2 B`; the
/// modulated signal power is `(m M R P c)^2` with `c` the compression factor.
pub fn apd_detect(rop_dbm: f64, params: &ApdParams, modulation_index: f64) -> Result<ApdDetection> {
    if !rop_dbm.is_finite() {
        return Err(Error::NonFinite("rop_dbm"));
    }
    params.validate()?;
    let power_w = dbm_to_watts(rop_dbm);
    let primary = params.responsivity * power_w;
    let gain = params.avalanche_gain;
    let compression = params.compression_factor(rop_dbm);
    let signal_current = gain * primary * compression;

    let shot = 2.0
        * ELEMENTARY_CHARGE
        * gain
        * gain
        * params.excess_noise_factor
        * (primary + params.dark_current)
        * params.bandwidth;
    let thermal = params.thermal_noise_current_density.powi(2) * params.bandwidth;
    let noise_variance = shot + thermal;

    let signal_power = (modulation_index * signal_current).powi(2);
    let electrical_snr_db = ratio_to_db(signal_power / noise_variance);

    Ok(ApdDetection {
        signal_current,
        noise_variance,
        saturated: rop_dbm >= params.saturation_rop_dbm,
        electrical_snr_db,
    })
}

/// Leakage power of the co-propagating uplink at the receive port (dBm):
/// the launch routed through the coupler isolation path plus any extra
/// path loss between coupler and receiver.
pub fn crosstalk_level(
    uplink_launch: &LaunchSpec,
    spec: &DcfCouplerSpec,
    extra_path_loss_db: f64,
) -> f64 {
    uplink_launch.power_dbm - spec.crosstalk_db - extra_path_loss_db
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        assert!(
            (actual - expected).abs() <= tol,
            "{what}: expected {expected}, got {actual}"
        );
    }

    #[test]
    fn coupler_default_table() {
        let spec = DcfCouplerSpec::default();
        assert_eq!(
            coupler_transfer(&spec, PortId::SmfFeed, PortId::DcfAir).unwrap(),
            0.9
        );
        assert_eq!(
            coupler_transfer(&spec, PortId::DcfAir, PortId::SmfFeed).unwrap(),
            0.9
        );
        assert_eq!(
            coupler_transfer(&spec, PortId::DcfAir, PortId::MmfReceive).unwrap(),
            1.5
        );
        assert_eq!(
            coupler_transfer(&spec, PortId::SmfFeed, PortId::MmfReceive).unwrap(),
            33.1
        );
    }

    #[test]
    fn coupler_reciprocity() {
        let spec = DcfCouplerSpec::default();
        let forward = coupler_transfer(&spec, PortId::SmfFeed, PortId::DcfAir).unwrap();
        let reverse = coupler_transfer(&spec, PortId::DcfAir, PortId::SmfFeed).unwrap();
        assert_eq!(forward, reverse);
    }

    #[test]
    fn coupler_rejects_unknown_path() {
        let spec = DcfCouplerSpec::default();
        let err = coupler_transfer(&spec, PortId::MmfReceive, PortId::SmfFeed).unwrap_err();
        assert!(matches!(err, Error::Topology { .. }));
    }

    #[test]
    fn isolation_clears_insertion_by_30_db() {
        let spec = DcfCouplerSpec::default();
        assert!(spec.crosstalk_db - spec.mmf_insertion_db >= 30.0);
    }

    #[test]
    fn budget_empty_chain_is_loopback() {
        let launch = LaunchSpec::default();
        let rop = budget_rop(&launch, &LinkBudgetChain::default()).unwrap();
        assert_eq!(rop, 11.0);
    }

    #[test]
    fn budget_stock_chain_endpoints() {
        let launch = LaunchSpec::default();
        let start = LinkBudgetChain::new(vec![
            ChainElement::loss("fso", 9.5),
            ChainElement::loss("mode field adapter", 8.8),
            ChainElement::loss("trunk", 5.5),
        ]);
        assert_close(budget_rop(&launch, &start).unwrap(), -12.8, 1e-12, "t = 0");

        let end = LinkBudgetChain::new(vec![
            ChainElement::loss("fso", 13.6),
            ChainElement::loss("mode field adapter", 8.8),
            ChainElement::loss("trunk", 5.5),
        ]);
        assert_close(budget_rop(&launch, &end).unwrap(), -16.9, 1e-12, "t = 30 d");
    }

    #[test]
    fn budget_rejects_non_finite() {
        let launch = LaunchSpec::default();
        let chain = LinkBudgetChain::new(vec![ChainElement::loss("bad", f64::NAN)]);
        assert!(budget_rop(&launch, &chain).is_err());
    }

    #[test]
    fn apd_dark_floor_at_zero_power() {
        let params = ApdParams::default();
        let det = apd_detect(-300.0, &params, 0.25).unwrap();
        assert!(det.signal_current < 1e-30);
        let dark_shot = 2.0
            * ELEMENTARY_CHARGE
            * params.avalanche_gain.powi(2)
            * params.excess_noise_factor
            * params.dark_current
            * params.bandwidth;
        let thermal = params.thermal_noise_current_density.powi(2) * params.bandwidth;
        assert_close(
            det.noise_variance,
            dark_shot + thermal,
            1e-25,
            "dark + thermal floor",
        );
    }

    #[test]
    fn apd_saturation_flag() {
        let params = ApdParams::default();
        assert!(apd_detect(-16.0, &params, 0.25).unwrap().saturated);
        assert!(apd_detect(-17.0, &params, 0.25).unwrap().saturated);
        assert!(!apd_detect(-18.0, &params, 0.25).unwrap().saturated);
    }

    #[test]
    fn apd_snr_increases_below_saturation() {
        let params = ApdParams::default();
        let mut previous = f64::NEG_INFINITY;
        let mut rop = -35.0;
        while rop < params.saturation_rop_dbm {
            let snr = apd_detect(rop, &params, 0.25).unwrap().electrical_snr_db;
            assert!(snr > previous, "SNR not increasing at {rop} dBm");
            previous = snr;
            rop += 0.5;
        }
    }

    #[test]
    fn compression_is_smooth_at_threshold() {
        let params = ApdParams::default();
        assert_eq!(params.compression_factor(-17.0), 1.0);
        assert_eq!(params.compression_factor(-20.0), 1.0);
        let just_above = params.compression_factor(-16.99);
        assert!(just_above < 1.0 && just_above > 0.9999);
    }

    #[test]
    fn crosstalk_examples() {
        let spec = DcfCouplerSpec::default();
        let launch = LaunchSpec::default();
        assert_close(
            crosstalk_level(&launch, &spec, 0.0),
            -22.1,
            1e-12,
            "isolation leak",
        );

        // Signal at -17 dBm with 22 dB optical signal-to-crosstalk ratio.
        let signal_dbm = -17.0;
        let oscr_db = 22.0;
        assert_close(signal_dbm - oscr_db, -39.0, 1e-12, "OSCR definition");

        let mut ideal = spec.clone();
        ideal.crosstalk_db = f64::INFINITY;
        assert_eq!(crosstalk_level(&launch, &ideal, 0.0), f64::NEG_INFINITY);
    }
}
