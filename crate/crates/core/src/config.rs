//! Scenario configuration: one structured file with sections for topology,
//! pointing, weather, OFDM, receiver, and campaign control.
//!
//! Every field defaults to the built-in `paper-2023` preset, so a config
//! file only needs the values it overrides. The preset's receiver and
//! channel entries are frozen outputs of the `calibrate` routines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beam::{FiberSpec, LensSpec};
use crate::campaign::{CouplingMode, LinkTopology, TerminalSpec, ThroughputModel};
use crate::channel::{GustEvent, PointingProcess, ScintillationModel, WeatherEvent, WeatherTimeline};
use crate::components::{ApdParams, ChainElement, DcfCouplerSpec, LaunchSpec, LinkBudgetChain};
use crate::error::{Error, Result};
use crate::ofdm::{CrosstalkModel, OfdmConfig};

pub const PRESET_NAME: &str = "paper-2023";

/// Full scenario description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub topology: TopologySection,
    pub pointing: PointingSection,
    pub weather: WeatherSection,
    pub ofdm: OfdmConfig,
    pub receiver: ReceiverSection,
    pub campaign: CampaignSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologySection {
    /// Free-space span (m).
    pub span_m: f64,
    /// Collimator focal length, both terminals (m).
    pub lens_focal_length_m: f64,
    /// Collimator clear aperture (m).
    pub lens_aperture_m: f64,
    /// Booster output at the feed port (dBm).
    pub launch_power_dbm: f64,
    /// Carrier wavelength (m).
    pub wavelength_m: f64,
    pub coupler: DcfCouplerSpec,
    /// Fundamental-mode field radius of the single-mode feeder (m).
    pub smf_mode_field_radius_m: f64,
    pub receive_aperture: ReceiveAperture,
    pub coupling_mode: CouplingMode,
    /// Static air-path excess shared by both receive ports (dB).
    pub air_excess_db: f64,
    /// Additional static modal-overlap penalty of the single-mode capture
    /// (dB); frozen output of the campaign calibration.
    pub smf_overlap_penalty_db: f64,
    /// Mode-field adaptation to the OM4 trunk (dB).
    pub mode_field_adapter_db: f64,
    /// Trunk fiber to the lab (dB).
    pub trunk_db: f64,
    /// Power-monitor floor (dBm).
    pub monitor_floor_dbm: f64,
    /// Emulate the monitors' linear-power discretization.
    pub monitor_quantization: bool,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            span_m: 63.0,
            lens_focal_length_m: 0.1,
            lens_aperture_m: 50.8e-3,
            launch_power_dbm: 11.0,
            wavelength_m: 1550e-9,
            coupler: DcfCouplerSpec::default(),
            smf_mode_field_radius_m: 5.2e-6,
            receive_aperture: ReceiveAperture::DcfInnerCladding,
            coupling_mode: CouplingMode::MmfModalSplit,
            air_excess_db: 7.1,
            smf_overlap_penalty_db: 5.3121948242188,
            mode_field_adapter_db: 8.8,
            trunk_db: 5.5,
            monitor_floor_dbm: -40.0,
            monitor_quantization: true,
        }
    }
}

/// Which aperture bounds the multi-mode capture at the air interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiveAperture {
    /// 105 um inner cladding of the DCF (the air interface itself); the
    /// 200 um fiber behind it is then a lossless continuation.
    DcfInnerCladding,
    /// 200 um multi-mode fiber as the binding aperture.
    Mmf200,
}

impl ReceiveAperture {
    pub fn fiber_spec(&self) -> FiberSpec {
        match self {
            ReceiveAperture::DcfInnerCladding => FiberSpec::dcf_inner_cladding_105um(),
            ReceiveAperture::Mmf200 => FiberSpec::mmf_200um(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointingSection {
    /// Residual bias after beacon-assisted alignment (rad).
    pub static_residual_rad: f64,
    /// Fast jitter per axis (rad).
    pub jitter_sigma_rad: f64,
    /// Fixture creep (rad/day).
    pub drift_rate_rad_per_day: f64,
    pub gust_events: Vec<GustEvent>,
}

impl Default for PointingSection {
    fn default() -> Self {
        Self {
            static_residual_rad: 5.7236437173633e-5,
            jitter_sigma_rad: 12.0e-6,
            drift_rate_rad_per_day: 7.446992661080e-6,
            gust_events: vec![GustEvent {
                time: 1800.2,
                duration: 1.0,
                peak_excursion: 598e-6,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherSection {
    /// Explicit event list; when empty the default month timeline is
    /// generated from the campaign seed.
    pub events: Vec<WeatherEvent>,
    pub scintillation: ScintillationModel,
}

impl Default for WeatherSection {
    fn default() -> Self {
        Self {
            events: Vec::new(),
            scintillation: ScintillationModel {
                log_amplitude_sigma: 0.23076141357422,
                correlation_time: 300.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverSection {
    pub apd: ApdParams,
    /// Intensity modulation depth of the linearized transmitter; frozen
    /// output of the receiver calibration.
    pub modulation_index: f64,
    /// Mode-noise EVM floor of the over-the-air path (%); frozen output of
    /// the receiver calibration.
    pub fso_evm_floor_percent: f64,
    /// Guided loss between the uplink leak at the coupler and the receiver
    /// (dB).
    pub crosstalk_extra_path_db: f64,
    pub crosstalk_model: CrosstalkModel,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            apd: ApdParams {
                // Thermal density from the receiver calibration solve.
                thermal_noise_current_density: 3.3016e-11,
                ..ApdParams::default()
            },
            modulation_index: 0.17096,
            fso_evm_floor_percent: 5.633,
            crosstalk_extra_path_db: 16.9,
            crosstalk_model: CrosstalkModel::IntensityIncoherent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSection {
    pub seed: u64,
    /// Long-term campaign length (s).
    pub duration_s: f64,
    /// Long-term campaign step (s).
    pub dt_s: f64,
    /// In-memory sample cap.
    pub sample_cap: u64,
    pub sweep_start_dbm: f64,
    pub sweep_stop_dbm: f64,
    pub sweep_step_db: f64,
    /// High-resolution throughput trace length (s).
    pub throughput_duration_s: f64,
    /// Throughput trace step (s).
    pub throughput_dt_s: f64,
    /// GbE service sensitivity (dBm).
    pub service_sensitivity_dbm: f64,
    pub throughput: ThroughputModel,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            seed: 42,
            duration_s: 30.0 * 86_400.0,
            dt_s: 60.0,
            sample_cap: 20_000_000,
            sweep_start_dbm: -26.0,
            sweep_stop_dbm: -15.0,
            sweep_step_db: 0.5,
            throughput_duration_s: 3600.0,
            throughput_dt_s: 0.01,
            service_sensitivity_dbm: -24.0,
            throughput: ThroughputModel::default(),
        }
    }
}

impl ScenarioConfig {
    /// The built-in preset describing the stock hardware and its frozen
    /// calibration.
    pub fn paper_2023() -> Self {
        Self::default()
    }

    /// Parse a TOML scenario; missing fields fall back to the preset.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("scenario serialize: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        self.link_topology().validate()?;
        self.pointing_process().validate()?;
        self.weather_timeline().validate()?;
        self.weather.scintillation.validate()?;
        self.ofdm.validate()?;
        self.campaign.throughput.validate()?;
        if !(self.campaign.dt_s > 0.0) || !(self.campaign.throughput_dt_s > 0.0) {
            return Err(Error::Config("campaign steps must be positive".into()));
        }
        if self.campaign.sweep_step_db <= 0.0
            || self.campaign.sweep_stop_dbm < self.campaign.sweep_start_dbm
        {
            return Err(Error::Config("sweep grid is empty or inverted".into()));
        }
        Ok(())
    }

    pub fn launch_spec(&self) -> LaunchSpec {
        LaunchSpec {
            power_dbm: self.topology.launch_power_dbm,
            wavelength: self.topology.wavelength_m,
            modulation_index: self.receiver.modulation_index,
        }
    }

    fn terminal_spec(&self) -> TerminalSpec {
        let t = &self.topology;
        TerminalSpec {
            lens: LensSpec {
                focal_length: t.lens_focal_length_m,
                aperture_diameter: t.lens_aperture_m,
            },
            coupler: t.coupler.clone(),
            launch: self.launch_spec(),
            receiver: self.receiver.apd,
            post_chain: LinkBudgetChain::new(vec![
                ChainElement::loss("mode_field_adapter", t.mode_field_adapter_db),
                ChainElement::loss("trunk_fiber", t.trunk_db),
            ]),
            smf_monitor_chain: LinkBudgetChain::new(vec![ChainElement::loss(
                "trunk_fiber",
                t.trunk_db,
            )]),
        }
    }

    pub fn link_topology(&self) -> LinkTopology {
        let t = &self.topology;
        let mut smf = FiberSpec::smf_9um();
        smf.mode_field_radius = Some(t.smf_mode_field_radius_m);
        LinkTopology {
            span: t.span_m,
            head_terminal: self.terminal_spec(),
            tail_terminal: self.terminal_spec(),
            coupling_mode: t.coupling_mode,
            air_chain: LinkBudgetChain::new(vec![ChainElement::loss(
                "static_air_excess",
                t.air_excess_db,
            )]),
            smf_overlap_penalty_db: t.smf_overlap_penalty_db,
            smf_fiber: smf,
            receive_aperture: t.receive_aperture.fiber_spec(),
            crosstalk_extra_path_db: self.receiver.crosstalk_extra_path_db,
            fso_evm_floor_percent: self.receiver.fso_evm_floor_percent,
            monitor_floor_dbm: t.monitor_floor_dbm,
            monitor_quantization_lsb_mw: if t.monitor_quantization {
                Some(crate::units::dbm_to_mw(t.monitor_floor_dbm))
            } else {
                None
            },
        }
    }

    pub fn pointing_process(&self) -> PointingProcess {
        PointingProcess {
            static_residual: self.pointing.static_residual_rad,
            jitter_sigma: self.pointing.jitter_sigma_rad,
            drift_rate: self.pointing.drift_rate_rad_per_day,
            gust_events: self.pointing.gust_events.clone(),
        }
    }

    pub fn weather_timeline(&self) -> WeatherTimeline {
        if self.weather.events.is_empty() {
            WeatherTimeline::paper_month(self.campaign.seed)
        } else {
            WeatherTimeline {
                events: self.weather.events.clone(),
                ambient_temperature_c: Vec::new(),
            }
        }
    }

    /// Attenuator grid for the EVM sweep (dBm).
    pub fn rop_grid(&self) -> Vec<f64> {
        let c = &self.campaign;
        let n = ((c.sweep_stop_dbm - c.sweep_start_dbm) / c.sweep_step_db).round() as usize;
        (0..=n)
            .map(|i| c.sweep_start_dbm + i as f64 * c.sweep_step_db)
            .collect()
    }
}
