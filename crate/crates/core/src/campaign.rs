//! Full-bridge composition: optics, components, channel, and DSP assembled
//! into the bidirectional link, plus the long-term campaign, EVM-vs-ROP
//! sweeps, throughput surrogate, and summary statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{
    collimate, facet_misalignment, focused_na, focused_spot_radius, mmf_coupling_efficiency,
    smf_coupling_efficiency, FiberSpec, LensSpec, Misalignment, PARAXIAL_BOUND_RAD,
};
use crate::channel::{
    ChannelState, ChannelStateIter, PointingProcess, ScintillationModel, WeatherTimeline,
};
use crate::components::{
    apd_detect, coupler_transfer, crosstalk_level, ApdParams, DcfCouplerSpec, LaunchSpec,
    LinkBudgetChain, PortId,
};
use crate::error::{Error, Result};
use crate::ofdm::{
    evm, inject_crosstalk, ofdm_demodulate, ofdm_modulate, CrosstalkModel, OfdmConfig, Payload,
    Waveform,
};
use crate::rng::{streams, RandomStream};
use crate::units::{dbm_to_mw, mw_to_dbm, ratio_to_db};

/// Which receive-coupling path carries the data service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Classical single-mode capture at the air interface.
    SmfClassical,
    /// Core transmits, inner cladding receives.
    MmfModalSplit,
}

/// One terminal of the bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSpec {
    pub lens: LensSpec,
    pub coupler: DcfCouplerSpec,
    pub launch: LaunchSpec,
    pub receiver: ApdParams,
    /// Guided-path losses behind the multi-mode receive port (adapter,
    /// trunk, ...), up to the monitor/receiver.
    pub post_chain: LinkBudgetChain,
    /// Guided-path losses behind the single-mode port up to its monitor.
    pub smf_monitor_chain: LinkBudgetChain,
}

/// Static description of the full bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTopology {
    /// Free-space span between the terminals (m).
    pub span: f64,
    pub head_terminal: TerminalSpec,
    pub tail_terminal: TerminalSpec,
    pub coupling_mode: CouplingMode,
    /// Static air-path excess (collimation imperfections, residual
    /// aberrations) shared by both receive ports.
    pub air_chain: LinkBudgetChain,
    /// Additional static modal-overlap penalty on the single-mode capture;
    /// wavefront corruption costs the fundamental-mode overlap far more
    /// than it costs encircled power.
    pub smf_overlap_penalty_db: f64,
    /// Transmit/receive fiber at the single-mode side.
    pub smf_fiber: FiberSpec,
    /// Multi-mode capture aperture at the air interface.
    pub receive_aperture: FiberSpec,
    /// Guided loss between the uplink leak at the coupler and the receiver.
    pub crosstalk_extra_path_db: f64,
    /// EVM floor of the expanded-aperture path (%); mode noise from the
    /// multi-mode capture and adaptation, absent in back-to-back operation.
    pub fso_evm_floor_percent: f64,
    /// Power-monitor floor (dBm).
    pub monitor_floor_dbm: f64,
    /// Linear-power monitor LSB (mW); `None` disables quantization.
    pub monitor_quantization_lsb_mw: Option<f64>,
}

impl LinkTopology {
    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0) {
            return Err(Error::Config("span must be positive".into()));
        }
        for terminal in [&self.head_terminal, &self.tail_terminal] {
            terminal.lens.validate()?;
            terminal.coupler.validate()?;
            terminal.launch.validate()?;
            terminal.receiver.validate()?;
            terminal.post_chain.validate()?;
            terminal.smf_monitor_chain.validate()?;
        }
        self.air_chain.validate()?;
        self.smf_fiber.validate()?;
        self.receive_aperture.validate()?;
        if !self.receive_aperture.kind.is_multi_mode() {
            return Err(Error::Config("receive_aperture must be a multi-mode kind".into()));
        }
        if !(self.smf_overlap_penalty_db >= 0.0) || !(self.crosstalk_extra_path_db >= 0.0) {
            return Err(Error::Config("static penalties must be >= 0 dB".into()));
        }
        if !(self.fso_evm_floor_percent >= 0.0) {
            return Err(Error::Config("fso_evm_floor_percent must be >= 0".into()));
        }
        Ok(())
    }

    /// Optical signal-to-crosstalk ratio at the receiver, quoted at the
    /// receiver's nominal operating point (the saturation threshold). The
    /// attenuator ahead of the receiver acts on signal and leak alike, so
    /// the ratio holds across the sweep.
    pub fn oscr_db(&self) -> f64 {
        let leak = crosstalk_level(
            &self.tail_terminal.launch,
            &self.tail_terminal.coupler,
            self.crosstalk_extra_path_db,
        );
        self.tail_terminal.receiver.saturation_rop_dbm - leak
    }

    /// Precompute the static optical geometry and per-port budgets.
    pub fn geometry(&self) -> Result<LinkGeometry> {
        self.validate()?;
        let launch = &self.head_terminal.launch;
        let mode_radius = self.smf_fiber.mode_field_radius.ok_or_else(|| {
            Error::Config("single-mode fiber needs a mode_field_radius".into())
        })?;
        let beam = collimate(
            mode_radius,
            launch.wavelength,
            &self.head_terminal.lens,
            crate::units::dbm_to_watts(launch.power_dbm),
        )?;
        let at_rx = beam.propagate(self.span);
        let rx_radius = at_rx.radius();
        let rx_focal = self.tail_terminal.lens.focal_length;
        let spot_radius = focused_spot_radius(rx_radius, launch.wavelength, rx_focal);
        let cone_na = focused_na(rx_radius, rx_focal);

        let head = &self.head_terminal;
        let tail = &self.tail_terminal;
        let shared_db = head.launch.power_dbm
            - coupler_transfer(&head.coupler, PortId::SmfFeed, PortId::DcfAir)?
            + self.air_chain.net_db();
        let smf_static_db = shared_db
            - coupler_transfer(&tail.coupler, PortId::DcfAir, PortId::SmfFeed)?
            - self.smf_overlap_penalty_db
            + tail.smf_monitor_chain.net_db();
        let mmf_static_db = shared_db
            - coupler_transfer(&tail.coupler, PortId::DcfAir, PortId::MmfReceive)?
            + tail.post_chain.net_db();

        Ok(LinkGeometry {
            wavelength: launch.wavelength,
            span: self.span,
            rx_focal_length: rx_focal,
            mode_field_radius: mode_radius,
            spot_radius,
            focused_na: cone_na,
            beam_radius_at_rx: rx_radius,
            smf_static_db,
            mmf_static_db,
        })
    }
}

/// Frozen optical geometry of a topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub wavelength: f64,
    pub span: f64,
    pub rx_focal_length: f64,
    pub mode_field_radius: f64,
    /// Focused-spot radius at the receive facet (m).
    pub spot_radius: f64,
    /// NA of the focused receive cone.
    pub focused_na: f64,
    /// Collimated beam radius arriving at the receive lens (m).
    pub beam_radius_at_rx: f64,
    /// Launch-to-monitor budget of the single-mode port at perfect
    /// alignment, excluding coupling efficiency and weather (dBm).
    pub smf_static_db: f64,
    /// Same for the multi-mode port (dBm).
    pub mmf_static_db: f64,
}

impl LinkGeometry {
    /// Facet-plane misalignment produced by a radial pointing error.
    pub fn facet(&self, pointing_magnitude: f64) -> Misalignment {
        let at_lens = Misalignment {
            lateral_offset: self.span * pointing_magnitude,
            angular_error: pointing_magnitude,
        };
        facet_misalignment(at_lens, self.rx_focal_length)
    }
}

/// Raw per-port monitor powers for one channel state (dBm, unclamped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortPowers {
    pub monitor_smf_dbm: f64,
    pub monitor_mmf_dbm: f64,
    /// Geometric coupling efficiencies driving them, for paired-comparison
    /// checks.
    pub smf_efficiency: f64,
    pub mmf_efficiency: f64,
}

/// Evaluate both monitor ports under one channel state.
///
/// The single-mode and multi-mode paths are driven by the identical state:
/// same pointing sample, same weather loss, same fade factor.
pub fn instantaneous_rop(
    topology: &LinkTopology,
    geometry: &LinkGeometry,
    state: &ChannelState,
) -> Result<PortPowers> {
    let magnitude = state.pointing_magnitude();
    let (smf_eff, mmf_eff) = if magnitude >= PARAXIAL_BOUND_RAD {
        (0.0, 0.0)
    } else {
        let facet = geometry.facet(magnitude);
        let smf = smf_coupling_efficiency(
            geometry.spot_radius,
            geometry.mode_field_radius,
            facet,
            geometry.wavelength,
        );
        let mmf = mmf_coupling_efficiency(
            geometry.spot_radius,
            &topology.receive_aperture,
            facet,
            geometry.focused_na,
        )?;
        (smf, mmf)
    };

    let shared = -state.excess_loss_db + ratio_to_db(state.fade_factor);
    Ok(PortPowers {
        monitor_smf_dbm: geometry.smf_static_db + shared + ratio_to_db(smf_eff),
        monitor_mmf_dbm: geometry.mmf_static_db + shared + ratio_to_db(mmf_eff),
        smf_efficiency: smf_eff,
        mmf_efficiency: mmf_eff,
    })
}

/// Monitor-conditioned received-power time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub port: PortId,
    /// Sample times since campaign start (s).
    pub timestamps: Vec<f64>,
    /// Floor-clamped (and optionally quantized) powers (dBm).
    pub rop_dbm: Vec<f64>,
    /// Loss-of-signal flags: power fell below the monitor floor.
    pub los: Vec<bool>,
    /// Whether a weather event was active at each sample.
    pub weather_active: Vec<bool>,
    /// Sample interval (s).
    pub dt: f64,
    /// Monitor floor (dBm).
    pub floor_dbm: f64,
    /// Linear-power LSB of the monitor (mW), if quantization was applied.
    pub quantization_lsb_mw: Option<f64>,
}

impl PowerTrace {
    fn with_capacity(port: PortId, dt: f64, floor_dbm: f64, lsb: Option<f64>, n: usize) -> Self {
        Self {
            port,
            timestamps: Vec::with_capacity(n),
            rop_dbm: Vec::with_capacity(n),
            los: Vec::with_capacity(n),
            weather_active: Vec::with_capacity(n),
            dt,
            floor_dbm,
            quantization_lsb_mw: lsb,
        }
    }

    fn push(&mut self, t: f64, raw_dbm: f64, weather: bool) {
        let (value, los) = condition_monitor_sample(raw_dbm, self.floor_dbm, self.quantization_lsb_mw);
        self.timestamps.push(t);
        self.rop_dbm.push(value);
        self.los.push(los);
        self.weather_active.push(weather);
    }

    pub fn len(&self) -> usize {
        self.rop_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rop_dbm.is_empty()
    }

    /// Floor-clamped peak-to-peak spread (dB).
    pub fn peak_to_peak_db(&self) -> f64 {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in &self.rop_dbm {
            min = min.min(v);
            max = max.max(v);
        }
        if min.is_finite() {
            max - min
        } else {
            0.0
        }
    }
}

/// Apply the monitor floor and optional linear-power quantization.
fn condition_monitor_sample(raw_dbm: f64, floor_dbm: f64, lsb_mw: Option<f64>) -> (f64, bool) {
    if !raw_dbm.is_finite() {
        return (floor_dbm, true);
    }
    match lsb_mw {
        Some(lsb) => {
            let counts = (dbm_to_mw(raw_dbm) / lsb).round();
            if counts < 1.0 {
                (floor_dbm, true)
            } else {
                (mw_to_dbm(counts * lsb).max(floor_dbm), false)
            }
        }
        None => {
            if raw_dbm < floor_dbm {
                (floor_dbm, true)
            } else {
                (raw_dbm, false)
            }
        }
    }
}

/// Outcome of a long-term paired campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignTraces {
    pub smf: PowerTrace,
    pub mmf: PowerTrace,
}

/// Run the paired long-term campaign over both coupling paths.
pub fn run_month_campaign(
    topology: &LinkTopology,
    pointing: &PointingProcess,
    timeline: &WeatherTimeline,
    scintillation: &ScintillationModel,
    duration: f64,
    dt: f64,
    stream: &RandomStream,
    cap: u64,
) -> Result<CampaignTraces> {
    let geometry = topology.geometry()?;
    let iter = ChannelStateIter::new(
        pointing,
        timeline,
        scintillation,
        topology.span,
        duration,
        dt,
        stream,
    )?;
    if iter.len() > cap {
        return Err(Error::CampaignTooLarge {
            requested: iter.len(),
            cap,
        });
    }
    let n = iter.len() as usize;
    let lsb = topology.monitor_quantization_lsb_mw;
    let floor = topology.monitor_floor_dbm;
    let mut smf = PowerTrace::with_capacity(PortId::MonitorSmf, dt, floor, lsb, n);
    let mut mmf = PowerTrace::with_capacity(PortId::MonitorMmf, dt, floor, lsb, n);
    for state in iter {
        let powers = instantaneous_rop(topology, &geometry, &state)?;
        debug_assert!(
            powers.mmf_efficiency >= powers.smf_efficiency - 1e-12,
            "modal-split dominance violated at t = {}",
            state.t
        );
        smf.push(state.t, powers.monitor_smf_dbm, state.weather_active);
        mmf.push(state.t, powers.monitor_mmf_dbm, state.weather_active);
    }
    Ok(CampaignTraces { smf, mmf })
}

/// Weather filter for trace statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherFilter {
    All,
    ClearSky,
}

/// Histogram over dBm bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopHistogram {
    /// Lower edge of the first bin (dBm).
    pub origin_dbm: f64,
    /// Bin width (dB).
    pub bin_width_db: f64,
    pub counts: Vec<u64>,
}

impl RopHistogram {
    fn build(samples: &[f64], origin: f64, width: f64) -> Self {
        let mut counts = Vec::new();
        for &s in samples {
            let idx = ((s - origin) / width).floor().max(0.0) as usize;
            if idx >= counts.len() {
                counts.resize(idx + 1, 0);
            }
            counts[idx] += 1;
        }
        Self {
            origin_dbm: origin,
            bin_width_db: width,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean recomputed from bin centers (dBm).
    pub fn mean_dbm(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.origin_dbm + (i as f64 + 0.5) * self.bin_width_db) * c as f64)
            .sum::<f64>()
            / total
    }

    /// Three-sigma spread recomputed from bin centers (dB).
    pub fn three_sigma_db(&self) -> f64 {
        let total = self.total() as f64;
        let mean = self.mean_dbm();
        let var = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let center = self.origin_dbm + (i as f64 + 0.5) * self.bin_width_db;
                (center - mean) * (center - mean) * c as f64
            })
            .sum::<f64>()
            / total;
        3.0 * var.sqrt()
    }
}

/// Summary statistics of one filtered trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopStatistics {
    pub mean_dbm: f64,
    pub three_sigma_db: f64,
    pub peak_to_peak_db: f64,
    pub sample_count: usize,
    pub histogram: RopHistogram,
}

/// Statistics over a floor-clamped trace; the clear-sky filter drops
/// samples taken inside weather events.
pub fn rop_statistics(trace: &PowerTrace, filter: WeatherFilter) -> Result<RopStatistics> {
    if trace.is_empty() {
        return Err(Error::Empty("power trace"));
    }
    let samples: Vec<f64> = trace
        .rop_dbm
        .iter()
        .zip(&trace.weather_active)
        .filter(|(_, &weather)| match filter {
            WeatherFilter::All => true,
            WeatherFilter::ClearSky => !weather,
        })
        .map(|(&v, _)| v)
        .collect();
    if samples.is_empty() {
        return Err(Error::Empty("power trace after weather filter"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &samples {
        min = min.min(v);
        max = max.max(v);
    }
    Ok(RopStatistics {
        mean_dbm: mean,
        three_sigma_db: 3.0 * var.sqrt(),
        peak_to_peak_db: max - min,
        sample_count: samples.len(),
        histogram: RopHistogram::build(&samples, trace.floor_dbm - 0.25, 0.5),
    })
}

/// Floor-clamped peak-to-peak spread reduction of the multi-mode capture
/// over the single-mode capture (dB).
pub fn spread_reduction(smf: &PowerTrace, mmf: &PowerTrace) -> Result<f64> {
    if smf.len() != mmf.len() || smf.dt != mmf.dt {
        return Err(Error::CampaignMismatch(
            "traces differ in length or sample interval".into(),
        ));
    }
    if smf.timestamps != mmf.timestamps {
        return Err(Error::CampaignMismatch("traces carry different timestamps".into()));
    }
    Ok(smf.peak_to_peak_db() - mmf.peak_to_peak_db())
}

/// Transmission direction of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Unidirectional,
    Bidirectional,
}

/// Signal path of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPath {
    /// Over the air: the expanded-aperture mode-noise floor applies.
    Fso,
    /// Transmitter patched straight into the receiver.
    BackToBack,
}

/// One EVM-vs-ROP curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvmCurve {
    pub rop_dbm: Vec<f64>,
    pub evm_percent: Vec<f64>,
    pub direction: SweepDirection,
    pub path: SweepPath,
}

impl EvmCurve {
    /// First crossing of the given EVM level, linearly interpolated (dBm).
    /// Scans downward in EVM from the low-power end.
    pub fn rop_at_evm(&self, target_percent: f64) -> Option<f64> {
        for i in 1..self.rop_dbm.len() {
            let (e0, e1) = (self.evm_percent[i - 1], self.evm_percent[i]);
            if (e0 >= target_percent && e1 <= target_percent)
                || (e0 <= target_percent && e1 >= target_percent)
            {
                let w = (target_percent - e0) / (e1 - e0);
                return Some(self.rop_dbm[i - 1] + w * (self.rop_dbm[i] - self.rop_dbm[i - 1]));
            }
        }
        None
    }
}

/// Full DSP chain at one attenuator setting, returning the per-subcarrier
/// EVM report.
///
/// The attenuator sets the mean received power directly; the OFDM frame is
/// detected with the receiver's shot and thermal noise, the expanded-
/// aperture mode-noise floor on the over-the-air path, and optionally the
/// co-wavelength uplink leak.
#[allow(clippy::too_many_arguments)]
pub fn evm_report_at_rop(
    topology: &LinkTopology,
    cfg: &OfdmConfig,
    rop_dbm: f64,
    direction: SweepDirection,
    path: SweepPath,
    crosstalk_model: CrosstalkModel,
    stream: &RandomStream,
    point_index: u64,
) -> Result<crate::ofdm::EvmReport> {
    let receiver = &topology.tail_terminal.receiver;
    let launch = &topology.tail_terminal.launch;
    let detection = apd_detect(rop_dbm, receiver, launch.modulation_index)?;

    let payload = Payload::random(
        cfg,
        cfg.symbols_per_frame,
        stream.seed ^ (streams::SWEEP_PAYLOAD + point_index),
    );
    let mut wave = ofdm_modulate(&payload, cfg)?;

    if direction == SweepDirection::Bidirectional {
        let interferer_payload = Payload::random(
            cfg,
            cfg.symbols_per_frame,
            stream.seed ^ (streams::SWEEP_INTERFERER + point_index),
        );
        let interferer = ofdm_modulate(&interferer_payload, cfg)?;
        wave = inject_crosstalk(&wave, &interferer, topology.oscr_db(), crosstalk_model)?;
    }

    // Photocurrent scaling: modulated signal amplitude per unit waveform.
    let amplitude = launch.modulation_index * detection.signal_current;
    let fs = wave.sample_rate;
    let rx_sigma = (detection.noise_variance * fs / (2.0 * receiver.bandwidth)).sqrt();
    let floor_sigma = match path {
        SweepPath::Fso => {
            (topology.fso_evm_floor_percent / 100.0)
                * amplitude
                * (fs / (2.0 * cfg.bandwidth)).sqrt()
        }
        SweepPath::BackToBack => 0.0,
    };

    let noise = stream.substream(streams::SWEEP_NOISE + point_index);
    let mut samples = Vec::with_capacity(wave.samples.len());
    for (i, pair) in wave.samples.chunks(2).enumerate() {
        let (z0, z1) = noise.gaussian_pair(i as u64);
        let (f0, f1) = noise.gaussian_pair(i as u64 + (1 << 40));
        samples.push(amplitude * pair[0] + rx_sigma * z0 + floor_sigma * f0);
        if pair.len() > 1 {
            samples.push(amplitude * pair[1] + rx_sigma * z1 + floor_sigma * f1);
        }
    }
    let received = Waveform {
        samples,
        sample_rate: fs,
        descriptor: wave.descriptor,
    };
    let grid = ofdm_demodulate(&received, cfg, &payload)?;
    evm(&grid)
}

/// Frame-average EVM at one attenuator setting (%).
#[allow(clippy::too_many_arguments)]
pub fn evm_at_rop(
    topology: &LinkTopology,
    cfg: &OfdmConfig,
    rop_dbm: f64,
    direction: SweepDirection,
    path: SweepPath,
    crosstalk_model: CrosstalkModel,
    stream: &RandomStream,
    point_index: u64,
) -> Result<f64> {
    evm_report_at_rop(
        topology,
        cfg,
        rop_dbm,
        direction,
        path,
        crosstalk_model,
        stream,
        point_index,
    )
    .map(|r| r.average_percent)
}

/// Sweep EVM against received power.
///
/// Points are evaluated on independent substreams and may run in parallel;
/// results are collected in grid order, so worker count never changes the
/// outcome.
pub fn evm_vs_rop_sweep(
    topology: &LinkTopology,
    cfg: &OfdmConfig,
    rop_grid_dbm: &[f64],
    direction: SweepDirection,
    path: SweepPath,
    crosstalk_model: CrosstalkModel,
    stream: &RandomStream,
) -> Result<EvmCurve> {
    let evms: Result<Vec<f64>> = rop_grid_dbm
        .par_iter()
        .enumerate()
        .map(|(i, &rop)| {
            evm_at_rop(
                topology,
                cfg,
                rop,
                direction,
                path,
                crosstalk_model,
                stream,
                i as u64,
            )
        })
        .collect();
    Ok(EvmCurve {
        rop_dbm: rop_grid_dbm.to_vec(),
        evm_percent: evms?,
        direction,
        path,
    })
}

/// Empirical throughput mapping of the GbE service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputModel {
    /// Line-rate ceiling (Mb/s).
    pub peak_rate_mbps: f64,
    /// Lower edge of the buffer-oscillation band (Mb/s).
    pub buffer_floor_rate_mbps: f64,
}

impl Default for ThroughputModel {
    fn default() -> Self {
        Self {
            peak_rate_mbps: 952.0,
            buffer_floor_rate_mbps: 744.0,
        }
    }
}

impl ThroughputModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_floor_rate_mbps > 0.0)
            || self.buffer_floor_rate_mbps > self.peak_rate_mbps
        {
            return Err(Error::Config(
                "throughput rates must satisfy 0 < floor <= peak".into(),
            ));
        }
        Ok(())
    }
}

/// Per-second GbE transfer-rate trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputTrace {
    /// Second index since trace start.
    pub seconds: Vec<u64>,
    pub rate_mbps: Vec<f64>,
}

/// Map a sub-second ROP trace to a per-second transfer rate.
///
/// Each second delivers `peak * (fraction of sub-samples at or above the
/// service sensitivity)`; seconds fully above sensitivity dither uniformly
/// inside the buffer-oscillation band.
pub fn gbe_throughput_trace(
    rop_trace: &PowerTrace,
    model: &ThroughputModel,
    sensitivity_dbm: f64,
    stream: &RandomStream,
) -> Result<ThroughputTrace> {
    model.validate()?;
    if !(rop_trace.dt < 1.0) {
        return Err(Error::Config(format!(
            "throughput mapping needs sub-second resolution, got dt = {} s",
            rop_trace.dt
        )));
    }
    if rop_trace.is_empty() {
        return Err(Error::Empty("throughput input trace"));
    }
    let per_second = (1.0 / rop_trace.dt).round() as usize;
    let dither = stream.substream(streams::THROUGHPUT_DITHER);
    let mut seconds = Vec::new();
    let mut rates = Vec::new();
    for (second, chunk) in rop_trace.rop_dbm.chunks(per_second).enumerate() {
        let good = chunk.iter().filter(|&&v| v >= sensitivity_dbm).count();
        let fraction = good as f64 / chunk.len() as f64;
        let rate = if fraction >= 1.0 {
            let u = dither.uniform(second as u64);
            model.buffer_floor_rate_mbps
                + u * (model.peak_rate_mbps - model.buffer_floor_rate_mbps)
        } else {
            model.peak_rate_mbps * fraction
        };
        seconds.push(second as u64);
        rates.push(rate);
    }
    Ok(ThroughputTrace {
        seconds,
        rate_mbps: rates,
    })
}

/// Everything a campaign run can report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkReport {
    pub meta: ReportMeta,
    pub campaign: Option<CampaignReport>,
    pub sweep: Option<SweepReport>,
    pub subcarrier_evm: Option<SubcarrierEvmReport>,
    pub throughput: Option<ThroughputReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub preset: String,
    /// Peak-to-peak spreads count loss-of-signal samples clamped at the
    /// monitor floor.
    pub spread_definition: String,
}

impl Default for ReportMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            preset: "paper-2023".into(),
            spread_definition: "floor_clamped".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub smf_trace: PowerTrace,
    pub mmf_trace: PowerTrace,
    pub smf_all: RopStatistics,
    pub smf_clear: RopStatistics,
    pub mmf_all: RopStatistics,
    pub mmf_clear: RopStatistics,
    pub spread_reduction_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub unidirectional: EvmCurve,
    pub bidirectional: EvmCurve,
    pub back_to_back: EvmCurve,
    pub sensitivity_uni_dbm: Option<f64>,
    pub sensitivity_bidi_dbm: Option<f64>,
    pub oscr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierEvmReport {
    pub rop_dbm: f64,
    pub unidirectional_percent: Vec<f64>,
    pub bidirectional_percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub trace: ThroughputTrace,
    pub sensitivity_dbm: f64,
}

/// Run the three standard sweep curves and extract the 10% sensitivities.
pub fn run_sweep(
    topology: &LinkTopology,
    cfg: &OfdmConfig,
    rop_grid_dbm: &[f64],
    crosstalk_model: CrosstalkModel,
    stream: &RandomStream,
) -> Result<SweepReport> {
    let unidirectional = evm_vs_rop_sweep(
        topology,
        cfg,
        rop_grid_dbm,
        SweepDirection::Unidirectional,
        SweepPath::Fso,
        crosstalk_model,
        stream,
    )?;
    let bidirectional = evm_vs_rop_sweep(
        topology,
        cfg,
        rop_grid_dbm,
        SweepDirection::Bidirectional,
        SweepPath::Fso,
        crosstalk_model,
        stream,
    )?;
    let back_to_back = evm_vs_rop_sweep(
        topology,
        cfg,
        rop_grid_dbm,
        SweepDirection::Unidirectional,
        SweepPath::BackToBack,
        crosstalk_model,
        stream,
    )?;
    Ok(SweepReport {
        sensitivity_uni_dbm: unidirectional.rop_at_evm(10.0),
        sensitivity_bidi_dbm: bidirectional.rop_at_evm(10.0),
        oscr_db: topology.oscr_db(),
        unidirectional,
        bidirectional,
        back_to_back,
    })
}

/// Per-subcarrier EVM at one operating point, with and without the uplink.
pub fn run_subcarrier_report(
    topology: &LinkTopology,
    cfg: &OfdmConfig,
    rop_dbm: f64,
    crosstalk_model: CrosstalkModel,
    stream: &RandomStream,
) -> Result<SubcarrierEvmReport> {
    let uni = evm_report_at_rop(
        topology,
        cfg,
        rop_dbm,
        SweepDirection::Unidirectional,
        SweepPath::Fso,
        crosstalk_model,
        stream,
        400,
    )?;
    let bidi = evm_report_at_rop(
        topology,
        cfg,
        rop_dbm,
        SweepDirection::Bidirectional,
        SweepPath::Fso,
        crosstalk_model,
        stream,
        401,
    )?;
    Ok(SubcarrierEvmReport {
        rop_dbm,
        unidirectional_percent: uni.per_subcarrier_percent,
        bidirectional_percent: bidi.per_subcarrier_percent,
    })
}

/// High-resolution service-port trace followed by the throughput mapping.
#[allow(clippy::too_many_arguments)]
pub fn run_throughput(
    topology: &LinkTopology,
    pointing: &PointingProcess,
    timeline: &WeatherTimeline,
    scintillation: &ScintillationModel,
    duration: f64,
    dt: f64,
    model: &ThroughputModel,
    sensitivity_dbm: f64,
    stream: &RandomStream,
    cap: u64,
) -> Result<ThroughputReport> {
    let geometry = topology.geometry()?;
    let iter = ChannelStateIter::new(
        pointing,
        timeline,
        scintillation,
        topology.span,
        duration,
        dt,
        stream,
    )?;
    if iter.len() > cap {
        return Err(Error::CampaignTooLarge {
            requested: iter.len(),
            cap,
        });
    }
    let n = iter.len() as usize;
    let port = match topology.coupling_mode {
        CouplingMode::MmfModalSplit => PortId::MonitorMmf,
        CouplingMode::SmfClassical => PortId::MonitorSmf,
    };
    let mut trace = PowerTrace::with_capacity(
        port,
        dt,
        topology.monitor_floor_dbm,
        topology.monitor_quantization_lsb_mw,
        n,
    );
    for state in iter {
        let powers = instantaneous_rop(topology, &geometry, &state)?;
        let raw = match port {
            PortId::MonitorSmf => powers.monitor_smf_dbm,
            _ => powers.monitor_mmf_dbm,
        };
        trace.push(state.t, raw, state.weather_active);
    }
    Ok(ThroughputReport {
        trace: gbe_throughput_trace(&trace, model, sensitivity_dbm, stream)?,
        sensitivity_dbm,
    })
}

/// Build the campaign section of a report from paired traces.
pub fn campaign_report(traces: &CampaignTraces) -> Result<CampaignReport> {
    Ok(CampaignReport {
        spread_reduction_db: spread_reduction(&traces.smf, &traces.mmf)?,
        smf_all: rop_statistics(&traces.smf, WeatherFilter::All)?,
        smf_clear: rop_statistics(&traces.smf, WeatherFilter::ClearSky)?,
        mmf_all: rop_statistics(&traces.mmf, WeatherFilter::All)?,
        mmf_clear: rop_statistics(&traces.mmf, WeatherFilter::ClearSky)?,
        smf_trace: traces.smf.clone(),
        mmf_trace: traces.mmf.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        assert!(
            (actual - expected).abs() <= tol,
            "{what}: expected {expected}, got {actual}"
        );
    }

    fn clear_state(pointing: [f64; 2]) -> ChannelState {
        ChannelState {
            t: 0.0,
            pointing,
            excess_loss_db: 0.0,
            fade_factor: 1.0,
            weather_active: false,
        }
    }

    #[test]
    fn perfect_alignment_hits_budget() {
        let cfg = ScenarioConfig::paper_2023();
        let topology = cfg.link_topology();
        let geometry = topology.geometry().unwrap();
        let powers =
            instantaneous_rop(&topology, &geometry, &clear_state([0.0, 0.0])).unwrap();
        // Launch 11 dBm, couplers 0.9 + 1.5, air excess 7.1, adapter 8.8,
        // trunk 5.5, geometric coupling ~0 dB.
        assert_close(powers.monitor_mmf_dbm, -12.8, 0.05, "monitor M at t = 0");
    }

    #[test]
    fn fog_drops_mmf_below_minus_28() {
        let cfg = ScenarioConfig::paper_2023();
        let topology = cfg.link_topology();
        let geometry = topology.geometry().unwrap();
        let state = ChannelState {
            excess_loss_db: 6.3,
            fade_factor: 0.1,
            weather_active: true,
            ..clear_state([0.0, 0.0])
        };
        let powers = instantaneous_rop(&topology, &geometry, &state).unwrap();
        assert!(
            powers.monitor_mmf_dbm < -28.0,
            "fog + deep fade: {}",
            powers.monitor_mmf_dbm
        );
    }

    #[test]
    fn gross_misalignment_kills_smf_first() {
        let cfg = ScenarioConfig::paper_2023();
        let topology = cfg.link_topology();
        let geometry = topology.geometry().unwrap();
        let state = clear_state([200e-6, 0.0]);
        let powers = instantaneous_rop(&topology, &geometry, &state).unwrap();
        assert!(powers.monitor_smf_dbm < topology.monitor_floor_dbm);
        assert!(powers.monitor_mmf_dbm > topology.monitor_floor_dbm);
        assert!(powers.mmf_efficiency >= powers.smf_efficiency);
    }

    #[test]
    fn monitor_quantization_coarsens_toward_floor() {
        let lsb = Some(1e-4);
        let (near_floor_a, _) = condition_monitor_sample(-39.8, -40.0, lsb);
        let (near_floor_b, _) = condition_monitor_sample(-37.0, -40.0, lsb);
        // One-count steps near the floor are whole dB.
        assert_close(near_floor_a, -40.0, 1e-9, "one count");
        assert_close(near_floor_b, -36.99, 0.01, "two counts");
        let (fine, _) = condition_monitor_sample(-13.0, -40.0, lsb);
        assert!((fine - -13.0).abs() < 0.01, "fine steps well above floor");
        let (_, los) = condition_monitor_sample(-55.0, -40.0, lsb);
        assert!(los, "sub-count sample flags loss of signal");
    }

    #[test]
    fn statistics_on_constant_trace() {
        let mut trace =
            PowerTrace::with_capacity(PortId::MonitorMmf, 60.0, -40.0, None, 10);
        for i in 0..10 {
            trace.push(i as f64 * 60.0, -20.0, false);
        }
        let stats = rop_statistics(&trace, WeatherFilter::All).unwrap();
        assert_eq!(stats.three_sigma_db, 0.0);
        assert_eq!(stats.peak_to_peak_db, 0.0);
        assert_close(stats.mean_dbm, -20.0, 1e-12, "mean");
        assert_eq!(stats.histogram.total(), 10);
    }

    #[test]
    fn statistics_recover_gaussian_spread() {
        let stream = RandomStream::new(77, 5);
        let mut trace =
            PowerTrace::with_capacity(PortId::MonitorMmf, 60.0, -60.0, None, 50_000);
        for i in 0..50_000u64 {
            let z = stream.gaussian_pair(i).0;
            trace.push(i as f64, -20.0 + 2.0 * z, false);
        }
        let stats = rop_statistics(&trace, WeatherFilter::All).unwrap();
        assert_close(stats.three_sigma_db, 6.0, 0.1, "3 sigma of sigma = 2 dB");
        assert_eq!(stats.histogram.total() as usize, stats.sample_count);
        assert_close(stats.histogram.mean_dbm(), stats.mean_dbm, 0.3, "histogram mean");
        assert_close(
            stats.histogram.three_sigma_db(),
            stats.three_sigma_db,
            0.3,
            "histogram 3 sigma",
        );
    }

    #[test]
    fn spread_reduction_identities() {
        let mut a = PowerTrace::with_capacity(PortId::MonitorSmf, 60.0, -40.0, None, 4);
        let mut b = PowerTrace::with_capacity(PortId::MonitorMmf, 60.0, -40.0, None, 4);
        for i in 0..4 {
            a.push(i as f64, -20.0 - i as f64, false);
            b.push(i as f64, -20.0 - i as f64, false);
        }
        assert_eq!(spread_reduction(&a, &b).unwrap(), 0.0);

        let mut c = PowerTrace::with_capacity(PortId::MonitorMmf, 60.0, -40.0, None, 3);
        c.push(0.0, -20.0, false);
        assert!(spread_reduction(&a, &c).is_err());
    }

    #[test]
    fn smf_clamped_trace_reduction() {
        let mut smf = PowerTrace::with_capacity(PortId::MonitorSmf, 60.0, -40.0, None, 3);
        // All below floor: clamps to -40 throughout.
        for i in 0..3 {
            smf.push(i as f64, -80.0, false);
        }
        // Re-push a peak to give the SMF a range from floor to peak.
        let mut smf_peak = PowerTrace::with_capacity(PortId::MonitorSmf, 60.0, -40.0, None, 3);
        smf_peak.push(0.0, -14.0, false);
        smf_peak.push(1.0, -80.0, false);
        smf_peak.push(2.0, -80.0, false);

        let mut mmf = PowerTrace::with_capacity(PortId::MonitorMmf, 60.0, -40.0, None, 3);
        mmf.push(0.0, -13.0, false);
        mmf.push(1.0, -20.0, false);
        mmf.push(2.0, -28.0, false);

        assert!(smf.los.iter().all(|&l| l));
        let reduction = spread_reduction(&smf_peak, &mmf).unwrap();
        // SMF spans floor to -14 (26 dB), MMF spans 15 dB.
        assert_close(reduction, 26.0 - 15.0, 1e-9, "floor-clamped reduction");
    }

    #[test]
    fn throughput_requires_subsecond_resolution() {
        let mut trace = PowerTrace::with_capacity(PortId::MonitorMmf, 1.0, -40.0, None, 10);
        for i in 0..10 {
            trace.push(i as f64, -15.0, false);
        }
        let err = gbe_throughput_trace(
            &trace,
            &ThroughputModel::default(),
            -24.0,
            &RandomStream::new(1, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn throughput_band_and_outage() {
        let model = ThroughputModel::default();
        let stream = RandomStream::new(3, 0);
        let mut trace =
            PowerTrace::with_capacity(PortId::MonitorMmf, 0.01, -40.0, None, 300);
        // Second 0: all good. Second 1: half good. Second 2: all below.
        for i in 0..100 {
            trace.push(i as f64 * 0.01, -15.0, false);
        }
        for i in 0..100 {
            let v = if i % 2 == 0 { -15.0 } else { -30.0 };
            trace.push(1.0 + i as f64 * 0.01, v, false);
        }
        for i in 0..100 {
            trace.push(2.0 + i as f64 * 0.01, -30.0, false);
        }
        let out = gbe_throughput_trace(&trace, &model, -24.0, &stream).unwrap();
        assert_eq!(out.rate_mbps.len(), 3);
        assert!(out.rate_mbps[0] >= 744.0 && out.rate_mbps[0] <= 952.0);
        assert_close(out.rate_mbps[1], 476.0, 1e-9, "half outage");
        assert_eq!(out.rate_mbps[2], 0.0);
    }

    #[test]
    fn evm_curve_interpolation() {
        let curve = EvmCurve {
            rop_dbm: vec![-24.0, -23.0, -22.0],
            evm_percent: vec![12.0, 10.5, 8.0],
            direction: SweepDirection::Unidirectional,
            path: SweepPath::Fso,
        };
        let crossing = curve.rop_at_evm(10.0).unwrap();
        assert_close(crossing, -22.8, 1e-9, "interpolated 10% crossing");
    }
}
