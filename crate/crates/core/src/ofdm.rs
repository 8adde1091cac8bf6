//! OFDM radio-waveform generation, passband transport, demodulation, and
//! per-subcarrier EVM analysis.
//!
//! The waveform is a real passband signal: payload QAM symbols and comb
//! pilots occupy `subcarrier_count` bins centered on the RF carrier, a
//! cyclic prefix is prepended per symbol, and the synthesized signal is
//! normalized to unit average power before any modulation-index scaling.
//! Synchronization is idealized (known frame boundary, no carrier offset);
//! equalization is a single pilot-derived tap per subcarrier.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Constellation used on the data subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qam64,
    Qam16,
    Qpsk,
}

impl Constellation {
    pub fn order(&self) -> usize {
        match self {
            Constellation::Qam64 => 64,
            Constellation::Qam16 => 16,
            Constellation::Qpsk => 4,
        }
    }

    /// Constellation point for a symbol index, normalized so the full
    /// constellation has unit average power.
    pub fn point(&self, index: usize) -> Complex64 {
        let (side, scale) = match self {
            Constellation::Qam64 => (8, 42f64),
            Constellation::Qam16 => (4, 10f64),
            Constellation::Qpsk => (2, 2f64),
        };
        let i = (index % side) as f64;
        let q = (index / side % side) as f64;
        let level = |x: f64| 2.0 * x - (side as f64 - 1.0);
        Complex64::new(level(i), level(q)) / scale.sqrt()
    }
}

/// Pilot layout across the subcarrier grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotScheme {
    /// Every `spacing`-th subcarrier carries a known QPSK pilot in every
    /// symbol.
    Comb { spacing: usize },
}

impl Default for PilotScheme {
    fn default() -> Self {
        PilotScheme::Comb { spacing: 8 }
    }
}

/// OFDM waveform description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Number of occupied subcarriers; power of two.
    pub subcarrier_count: usize,
    pub constellation: Constellation,
    /// Occupied bandwidth (Hz); subcarrier spacing is `bandwidth / count`.
    pub bandwidth: f64,
    /// RF carrier frequency (Hz); must be a multiple of the spacing.
    pub rf_carrier: f64,
    /// Cyclic prefix length as a fraction of the core symbol, in [0, 0.5).
    pub cyclic_prefix_fraction: f64,
    pub pilot_scheme: PilotScheme,
    /// OFDM symbols per frame.
    pub symbols_per_frame: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            subcarrier_count: 128,
            constellation: Constellation::Qam64,
            bandwidth: 250e6,
            rf_carrier: 1.5e9,
            cyclic_prefix_fraction: 0.125,
            pilot_scheme: PilotScheme::default(),
            symbols_per_frame: 100,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subcarrier_count == 0 || !self.subcarrier_count.is_power_of_two() {
            return Err(Error::Config("subcarrier_count must be a power of two".into()));
        }
        if !(self.cyclic_prefix_fraction >= 0.0 && self.cyclic_prefix_fraction < 0.5) {
            return Err(Error::Config("cyclic_prefix_fraction must lie in [0, 0.5)".into()));
        }
        if !(self.bandwidth > 0.0 && self.rf_carrier > 0.0) {
            return Err(Error::Config("bandwidth and rf_carrier must be positive".into()));
        }
        if self.bandwidth >= 2.0 * self.rf_carrier {
            return Err(Error::Config(
                "bandwidth must be below twice the RF carrier for a real passband".into(),
            ));
        }
        let spacing = self.subcarrier_spacing();
        let carrier_bins = self.rf_carrier / spacing;
        if (carrier_bins - carrier_bins.round()).abs() > 1e-6 {
            return Err(Error::Config(
                "rf_carrier must be an integer multiple of the subcarrier spacing".into(),
            ));
        }
        let PilotScheme::Comb { spacing } = self.pilot_scheme;
        if spacing < 2 || spacing > self.subcarrier_count {
            return Err(Error::Config("pilot spacing must lie in [2, subcarrier_count]".into()));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::Config("symbols_per_frame must be positive".into()));
        }
        Ok(())
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.subcarrier_count as f64
    }

    /// Passband FFT size: smallest power of two giving a sample rate with
    /// margin over the passband Nyquist limit.
    pub fn fft_size(&self) -> usize {
        let needed = 2.2 * (self.rf_carrier + self.bandwidth / 2.0) / self.subcarrier_spacing();
        (needed.ceil() as usize).next_power_of_two()
    }

    pub fn sample_rate(&self) -> f64 {
        self.fft_size() as f64 * self.subcarrier_spacing()
    }

    pub fn cyclic_prefix_len(&self) -> usize {
        (self.cyclic_prefix_fraction * self.fft_size() as f64).round() as usize
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size() + self.cyclic_prefix_len()
    }

    /// FFT bin carrying subcarrier `k`.
    pub fn subcarrier_bin(&self, k: usize) -> usize {
        let carrier_bin = (self.rf_carrier / self.subcarrier_spacing()).round() as isize;
        (carrier_bin + k as isize - self.subcarrier_count as isize / 2) as usize
    }

    pub fn is_pilot(&self, k: usize) -> bool {
        let PilotScheme::Comb { spacing } = self.pilot_scheme;
        k % spacing == 0
    }

    pub fn data_subcarrier_count(&self) -> usize {
        (0..self.subcarrier_count).filter(|&k| !self.is_pilot(k)).count()
    }

    /// Stable hash of the configuration, used to bind waveforms to configs.
    pub fn config_hash(&self) -> u64 {
        let encoded = serde_json::to_string(self).expect("config serializes");
        fnv1a(encoded.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Known QPSK pilot for subcarrier `k` of symbol `sym`.
pub fn pilot_symbol(k: usize, sym: usize) -> Complex64 {
    let bits = splitmix64((k as u64) << 32 | sym as u64) & 0b11;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match bits {
        0 => Complex64::new(s, s),
        1 => Complex64::new(-s, s),
        2 => Complex64::new(-s, -s),
        _ => Complex64::new(s, -s),
    }
}

/// Payload symbols for a frame, tagged with the seed that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub seed: u64,
    /// Data-subcarrier symbols, symbol-major: `[sym * n_data + j]`.
    pub symbols: Vec<Complex64>,
}

impl Payload {
    /// Draw `n_symbols` OFDM symbols worth of random constellation points.
    pub fn random(cfg: &OfdmConfig, n_symbols: usize, seed: u64) -> Self {
        let n_data = cfg.data_subcarrier_count();
        let order = cfg.constellation.order();
        let stream = RandomStream::new(seed, 0);
        let symbols = (0..n_data * n_symbols)
            .map(|i| {
                let idx = (stream.uniform(i as u64) * order as f64) as usize % order;
                cfg.constellation.point(idx)
            })
            .collect();
        Self { seed, symbols }
    }

    pub fn n_symbols(&self, cfg: &OfdmConfig) -> usize {
        self.symbols.len() / cfg.data_subcarrier_count()
    }
}

/// Side information binding a waveform to its origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveformDescriptor {
    pub config_hash: u64,
    pub payload_seed: u64,
    pub sample_count: usize,
}

/// Real passband sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub descriptor: WaveformDescriptor,
}

impl Waveform {
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    /// Write raw little-endian f32 samples plus a JSON sidecar descriptor.
    pub fn export_raw(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut bytes = Vec::with_capacity(self.samples.len() * 4);
        for &s in &self.samples {
            bytes.extend_from_slice(&(s as f32).to_le_bytes());
        }
        file.write_all(&bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))?;

        let sidecar = path.with_extension("desc.json");
        let record = serde_json::json!({
            "sample_rate": self.sample_rate,
            "config_hash": self.descriptor.config_hash,
            "payload_seed": self.descriptor.payload_seed,
            "sample_count": self.descriptor.sample_count,
        });
        std::fs::write(&sidecar, serde_json::to_string_pretty(&record).unwrap())
            .map_err(|e| Error::io(sidecar.display().to_string(), e))?;
        Ok(())
    }

    /// Read a waveform exported by [`Waveform::export_raw`].
    pub fn import_raw(path: &Path) -> Result<Self> {
        let sidecar = path.with_extension("desc.json");
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(&sidecar)
                .map_err(|e| Error::io(sidecar.display().to_string(), e))?,
        )
        .map_err(|e| Error::DescriptorMismatch(format!("bad sidecar: {e}")))?;

        let mut file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let samples: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();

        let expected = meta["sample_count"].as_u64().unwrap_or(0) as usize;
        if samples.len() != expected {
            return Err(Error::DescriptorMismatch(format!(
                "sample count {} does not match descriptor {expected}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            sample_rate: meta["sample_rate"].as_f64().unwrap_or(0.0),
            descriptor: WaveformDescriptor {
                config_hash: meta["config_hash"].as_u64().unwrap_or(0),
                payload_seed: meta["payload_seed"].as_u64().unwrap_or(0),
                sample_count: expected,
            },
        })
    }
}

/// Synthesize the real passband waveform for a payload.
pub fn ofdm_modulate(payload: &Payload, cfg: &OfdmConfig) -> Result<Waveform> {
    cfg.validate()?;
    let n_data = cfg.data_subcarrier_count();
    if payload.symbols.is_empty() || payload.symbols.len() % n_data != 0 {
        return Err(Error::Config(format!(
            "payload length {} is not a multiple of the {} data subcarriers",
            payload.symbols.len(),
            n_data
        )));
    }
    let n_symbols = payload.symbols.len() / n_data;
    let fft_size = cfg.fft_size();
    let cp = cfg.cyclic_prefix_len();
    let amp = (2.0 / cfg.subcarrier_count as f64).sqrt();

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(fft_size);
    let mut samples = Vec::with_capacity(n_symbols * cfg.symbol_len());
    let mut spectrum = vec![Complex64::default(); fft_size];

    for sym in 0..n_symbols {
        spectrum.iter_mut().for_each(|c| *c = Complex64::default());
        let mut data_idx = 0;
        for k in 0..cfg.subcarrier_count {
            let value = if cfg.is_pilot(k) {
                pilot_symbol(k, sym)
            } else {
                let v = payload.symbols[sym * n_data + data_idx];
                data_idx += 1;
                v
            };
            spectrum[cfg.subcarrier_bin(k)] = value;
        }
        ifft.process(&mut spectrum);
        let symbol_time: Vec<f64> = spectrum.iter().map(|c| c.re * amp).collect();
        samples.extend_from_slice(&symbol_time[fft_size - cp..]);
        samples.extend_from_slice(&symbol_time);
    }

    Ok(Waveform {
        sample_rate: cfg.sample_rate(),
        descriptor: WaveformDescriptor {
            config_hash: cfg.config_hash(),
            payload_seed: payload.seed,
            sample_count: samples.len(),
        },
        samples,
    })
}

/// Received and reference symbols for every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationGrid {
    /// Equalized received symbols, `[subcarrier][symbol]`.
    pub received: Vec<Vec<Complex64>>,
    /// Transmitted reference symbols, same layout.
    pub reference: Vec<Vec<Complex64>>,
}

/// Demodulate a waveform back to a constellation grid.
///
/// Data-aided: the transmitted payload supplies the reference symbols. The
/// channel estimate is one tap per subcarrier, averaged over the frame's
/// pilots and interpolated linearly between pilot positions.
pub fn ofdm_demodulate(
    wave: &Waveform,
    cfg: &OfdmConfig,
    payload: &Payload,
) -> Result<ConstellationGrid> {
    cfg.validate()?;
    if wave.descriptor.config_hash != cfg.config_hash() {
        return Err(Error::DescriptorMismatch(
            "waveform was built for a different OFDM config".into(),
        ));
    }
    if wave.samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::CorruptedWaveform);
    }
    let n_data = cfg.data_subcarrier_count();
    let n_symbols = payload.symbols.len() / n_data;
    let sym_len = cfg.symbol_len();
    if wave.samples.len() < n_symbols * sym_len {
        return Err(Error::DescriptorMismatch(format!(
            "waveform holds {} samples, need {}",
            wave.samples.len(),
            n_symbols * sym_len
        )));
    }
    let fft_size = cfg.fft_size();
    let cp = cfg.cyclic_prefix_len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);

    let count = cfg.subcarrier_count;
    let mut raw = vec![vec![Complex64::default(); n_symbols]; count];
    let mut buffer = vec![Complex64::default(); fft_size];
    for sym in 0..n_symbols {
        let start = sym * sym_len + cp;
        for (i, slot) in buffer.iter_mut().enumerate() {
            *slot = Complex64::new(wave.samples[start + i], 0.0);
        }
        fft.process(&mut buffer);
        for (k, row) in raw.iter_mut().enumerate() {
            row[sym] = buffer[cfg.subcarrier_bin(k)];
        }
    }

    // Per-subcarrier tap from the frame's pilots.
    let pilots: Vec<usize> = (0..count).filter(|&k| cfg.is_pilot(k)).collect();
    let mut pilot_taps = Vec::with_capacity(pilots.len());
    for &k in &pilots {
        let mut acc = Complex64::default();
        for sym in 0..n_symbols {
            acc += raw[k][sym] / pilot_symbol(k, sym);
        }
        pilot_taps.push(acc / n_symbols as f64);
    }
    let tap_for = |k: usize| -> Complex64 {
        match pilots.binary_search(&k) {
            Ok(i) => pilot_taps[i],
            Err(i) => {
                if i == 0 {
                    pilot_taps[0]
                } else if i == pilots.len() {
                    pilot_taps[pilots.len() - 1]
                } else {
                    let (k0, k1) = (pilots[i - 1] as f64, pilots[i] as f64);
                    let w = (k as f64 - k0) / (k1 - k0);
                    pilot_taps[i - 1] * (1.0 - w) + pilot_taps[i] * w
                }
            }
        }
    };

    let mut received = vec![vec![Complex64::default(); n_symbols]; count];
    let mut reference = vec![vec![Complex64::default(); n_symbols]; count];
    for k in 0..count {
        let tap = tap_for(k);
        for sym in 0..n_symbols {
            received[k][sym] = raw[k][sym] / tap;
        }
    }
    let mut data_idx;
    for sym in 0..n_symbols {
        data_idx = 0;
        for (k, row) in reference.iter_mut().enumerate() {
            row[sym] = if cfg.is_pilot(k) {
                pilot_symbol(k, sym)
            } else {
                let v = payload.symbols[sym * n_data + data_idx];
                data_idx += 1;
                v
            };
        }
    }

    Ok(ConstellationGrid { received, reference })
}

/// EVM figures extracted from a constellation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvmReport {
    /// Per-subcarrier EVM (%), rms over symbols.
    pub per_subcarrier_percent: Vec<f64>,
    /// Frame EVM (%), rms across subcarriers.
    pub average_percent: f64,
}

/// RMS error-vector magnitude per subcarrier and overall (%).
pub fn evm(grid: &ConstellationGrid) -> Result<EvmReport> {
    if grid.received.is_empty() {
        return Err(Error::Empty("constellation grid"));
    }
    let mut per_subcarrier = Vec::with_capacity(grid.received.len());
    for (rx, re) in grid.received.iter().zip(&grid.reference) {
        if rx.is_empty() || rx.len() != re.len() {
            return Err(Error::Empty("subcarrier symbol list"));
        }
        let mut err_sq = 0.0;
        let mut ref_sq = 0.0;
        for (r, x) in rx.iter().zip(re) {
            err_sq += (r - x).norm_sqr();
            ref_sq += x.norm_sqr();
        }
        if ref_sq == 0.0 {
            return Err(Error::Empty("reference power on subcarrier"));
        }
        per_subcarrier.push(100.0 * (err_sq / ref_sq).sqrt());
    }
    let mean_sq =
        per_subcarrier.iter().map(|e| e * e).sum::<f64>() / per_subcarrier.len() as f64;
    Ok(EvmReport {
        average_percent: mean_sq.sqrt(),
        per_subcarrier_percent: per_subcarrier,
    })
}

/// How the co-wavelength interferer combines with the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkModel {
    /// Distinct-laser interferer adds in optical intensity; the detected
    /// crosstalk is suppressed by twice the optical ratio in dB.
    IntensityIncoherent,
    /// Pessimistic in-band beat at a configurable offset; electrical
    /// suppression equals the optical ratio.
    InbandBeat { offset_hz: f64 },
}

/// Superpose a decorrelated interferer at the given optical
/// signal-to-crosstalk ratio.
pub fn inject_crosstalk(
    signal: &Waveform,
    interferer: &Waveform,
    oscr_db: f64,
    model: CrosstalkModel,
) -> Result<Waveform> {
    if signal.descriptor.config_hash != interferer.descriptor.config_hash {
        return Err(Error::DescriptorMismatch(
            "signal and interferer use different OFDM configs".into(),
        ));
    }
    if signal.descriptor.payload_seed == interferer.descriptor.payload_seed {
        return Err(Error::CorrelatedCrosstalk(signal.descriptor.payload_seed));
    }
    if oscr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let n = signal.samples.len().min(interferer.samples.len());
    let mut samples = signal.samples[..n].to_vec();
    match model {
        CrosstalkModel::IntensityIncoherent => {
            let amp = 10f64.powf(-oscr_db / 10.0);
            for (s, x) in samples.iter_mut().zip(&interferer.samples[..n]) {
                *s += amp * x;
            }
        }
        CrosstalkModel::InbandBeat { offset_hz } => {
            let amp = 10f64.powf(-oscr_db / 20.0);
            let step = std::f64::consts::TAU * offset_hz / signal.sample_rate;
            for (i, (s, x)) in samples.iter_mut().zip(&interferer.samples[..n]).enumerate() {
                *s += amp * x * (step * i as f64).cos();
            }
        }
    }
    Ok(Waveform {
        samples,
        sample_rate: signal.sample_rate,
        descriptor: signal.descriptor,
    })
}

/// Analytic EVM of a data-aided receiver under AWGN: `100 * 10^(-snr/20)`.
pub fn evm_vs_snr_reference(snr_db_list: &[f64]) -> Vec<f64> {
    snr_db_list
        .iter()
        .map(|snr| 100.0 * 10f64.powf(-snr / 20.0))
        .collect()
}

/// Add white Gaussian noise at the given in-band electrical SNR.
///
/// The SNR is defined over the occupied bandwidth: noise density is set so
/// that the noise power falling inside `cfg.bandwidth` relates to the mean
/// waveform power by `snr_db`.
pub fn add_awgn(
    wave: &Waveform,
    cfg: &OfdmConfig,
    snr_db: f64,
    stream: &RandomStream,
) -> Waveform {
    let ps = wave.mean_power();
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma = (ps * wave.sample_rate / (2.0 * cfg.bandwidth * snr)).sqrt();
    let mut samples = wave.samples.clone();
    for (i, chunk) in samples.chunks_mut(2).enumerate() {
        let (a, b) = stream.gaussian_pair(i as u64);
        chunk[0] += sigma * a;
        if chunk.len() > 1 {
            chunk[1] += sigma * b;
        }
    }
    Waveform {
        samples,
        sample_rate: wave.sample_rate,
        descriptor: wave.descriptor,
    }
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
    fn constellations_have_unit_power() {
        for c in [Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64] {
            let power: f64 = (0..c.order()).map(|i| c.point(i).norm_sqr()).sum::<f64>()
                / c.order() as f64;
            assert_close(power, 1.0, 1e-12, "constellation power");
        }
    }

    #[test]
    fn default_config_geometry() {
        let cfg = OfdmConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.fft_size(), 2048);
        assert_close(cfg.sample_rate(), 4e9, 1e-3, "sample rate");
        assert_eq!(cfg.cyclic_prefix_len(), 256);
        assert_eq!(cfg.data_subcarrier_count(), 112);
        assert!(cfg.sample_rate() >= 2.0 * (cfg.rf_carrier + cfg.bandwidth / 2.0));
    }

    #[test]
    fn modulated_power_is_normalized() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 20, 1);
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        assert_close(wave.mean_power(), 1.0, 0.05, "mean waveform power");
    }

    #[test]
    fn all_zero_payload_has_finite_papr() {
        let cfg = OfdmConfig::default();
        let n_data = cfg.data_subcarrier_count();
        let payload = Payload {
            seed: 0,
            symbols: vec![Complex64::default(); n_data * 4],
        };
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        let peak = wave.samples.iter().fold(0.0f64, |m, s| m.max(s * s));
        let mean = wave.mean_power();
        assert!(mean > 0.0, "pilot structure carries power");
        assert!((peak / mean).is_finite());
    }

    #[test]
    fn loopback_evm_is_negligible() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 10, 7);
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        let grid = ofdm_demodulate(&wave, &cfg, &payload).unwrap();
        let report = evm(&grid).unwrap();
        assert!(
            report.average_percent < 0.1,
            "loopback EVM {}%",
            report.average_percent
        );
        for (k, e) in report.per_subcarrier_percent.iter().enumerate() {
            assert!(*e < 0.1, "subcarrier {k} EVM {e}%");
        }
    }

    #[test]
    fn awgn_matches_reference_law() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 100, 3);
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        let noisy = add_awgn(&wave, &cfg, 20.0, &RandomStream::new(5, 77));
        let grid = ofdm_demodulate(&noisy, &cfg, &payload).unwrap();
        let report = evm(&grid).unwrap();
        assert_close(report.average_percent, 10.0, 0.5, "EVM at 20 dB SNR");
    }

    #[test]
    fn flat_gain_leaves_evm_unchanged() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 20, 9);
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        let noisy = add_awgn(&wave, &cfg, 25.0, &RandomStream::new(1, 88));
        let baseline = evm(&ofdm_demodulate(&noisy, &cfg, &payload).unwrap()).unwrap();

        let mut scaled = noisy.clone();
        for s in &mut scaled.samples {
            *s *= 2.0;
        }
        let gained = evm(&ofdm_demodulate(&scaled, &cfg, &payload).unwrap()).unwrap();
        for (a, b) in baseline
            .per_subcarrier_percent
            .iter()
            .zip(&gained.per_subcarrier_percent)
        {
            assert!((a - b).abs() < 1e-9, "gain changed EVM: {a} vs {b}");
        }
    }

    #[test]
    fn occupied_band_placement() {
        let cfg = OfdmConfig::default();
        let spacing = cfg.subcarrier_spacing();
        let low = cfg.subcarrier_bin(0) as f64 * spacing;
        let high = cfg.subcarrier_bin(cfg.subcarrier_count - 1) as f64 * spacing;
        assert_close(low, 1.375e9, spacing, "lower band edge");
        assert_close(high, 1.625e9, spacing, "upper band edge");
    }

    #[test]
    fn evm_fixed_error_example() {
        // QPSK references with a constant +0.1 error on I.
        let reference: Vec<Vec<Complex64>> = (0..4)
            .map(|k| {
                (0..50)
                    .map(|sym| pilot_symbol(k, sym))
                    .collect::<Vec<_>>()
            })
            .collect();
        let received: Vec<Vec<Complex64>> = reference
            .iter()
            .map(|row| row.iter().map(|c| c + Complex64::new(0.1, 0.0)).collect())
            .collect();
        let report = evm(&ConstellationGrid { received, reference }).unwrap();
        assert_close(report.average_percent, 10.0, 1e-9, "fixed 0.1 error on I");
    }

    #[test]
    fn evm_zero_for_identical_grids() {
        let rows = vec![vec![Complex64::new(1.0, 0.0); 10]; 4];
        let report = evm(&ConstellationGrid {
            received: rows.clone(),
            reference: rows,
        })
        .unwrap();
        assert_eq!(report.average_percent, 0.0);
    }

    #[test]
    fn crosstalk_infinite_oscr_is_identity() {
        let cfg = OfdmConfig::default();
        let signal = ofdm_modulate(&Payload::random(&cfg, 5, 1), &cfg).unwrap();
        let other = ofdm_modulate(&Payload::random(&cfg, 5, 2), &cfg).unwrap();
        let out =
            inject_crosstalk(&signal, &other, f64::INFINITY, CrosstalkModel::IntensityIncoherent)
                .unwrap();
        assert_eq!(out.samples, signal.samples);
    }

    #[test]
    fn crosstalk_rejects_same_seed() {
        let cfg = OfdmConfig::default();
        let signal = ofdm_modulate(&Payload::random(&cfg, 5, 1), &cfg).unwrap();
        let err =
            inject_crosstalk(&signal, &signal, 22.0, CrosstalkModel::IntensityIncoherent)
                .unwrap_err();
        assert!(matches!(err, Error::CorrelatedCrosstalk(1)));
    }

    #[test]
    fn crosstalk_suppression_levels() {
        let cfg = OfdmConfig::default();
        let signal = ofdm_modulate(&Payload::random(&cfg, 10, 1), &cfg).unwrap();
        let other = ofdm_modulate(&Payload::random(&cfg, 10, 2), &cfg).unwrap();
        let oscr = 22.0;

        let incoherent =
            inject_crosstalk(&signal, &other, oscr, CrosstalkModel::IntensityIncoherent).unwrap();
        let delta: f64 = incoherent
            .samples
            .iter()
            .zip(&signal.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / incoherent.samples.len() as f64;
        let suppression_db = 10.0 * (signal.mean_power() / delta).log10();
        assert_close(suppression_db, 2.0 * oscr, 0.5, "incoherent suppression");
    }

    #[test]
    fn reference_curve_values() {
        let curve = evm_vs_snr_reference(&[20.0, 23.74, f64::INFINITY]);
        assert_close(curve[0], 10.0, 1e-12, "20 dB");
        assert_close(curve[1], 6.5, 0.01, "23.74 dB");
        assert_eq!(curve[2], 0.0);
    }

    #[test]
    fn demodulate_rejects_corrupt_waveform() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 2, 1);
        let mut wave = ofdm_modulate(&payload, &cfg).unwrap();
        wave.samples[17] = f64::NAN;
        let err = ofdm_demodulate(&wave, &cfg, &payload).unwrap_err();
        assert!(matches!(err, Error::CorruptedWaveform));
    }

    #[test]
    fn raw_round_trip() {
        let cfg = OfdmConfig::default();
        let payload = Payload::random(&cfg, 2, 4);
        let wave = ofdm_modulate(&payload, &cfg).unwrap();
        let dir = std::env::temp_dir().join("fsobridge_wave_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("frame.f32");
        wave.export_raw(&path).unwrap();
        let back = Waveform::import_raw(&path).unwrap();
        assert_eq!(back.descriptor, wave.descriptor);
        assert_eq!(back.samples.len(), wave.samples.len());
        for (a, b) in back.samples.iter().zip(&wave.samples) {
            assert!((a - b).abs() < 1e-6);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
