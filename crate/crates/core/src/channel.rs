//! Time-varying channel state: pointing jitter, fixture drift, wind gusts,
//! scripted weather attenuation, and log-normal power fading.
//!
//! Every sample is a deterministic function of `(seed, stream_id, step)`, so
//! campaigns regenerate bit-identically and disjoint time ranges or trials
//! can be produced on independent substreams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, RandomStream};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Default in-memory cap on generated campaign samples.
pub const DEFAULT_SAMPLE_CAP: u64 = 20_000_000;

/// A transient pointing excursion, e.g. a wind gust shaking the mount.
///
/// The excursion follows a raised-cosine pulse: zero at the window edges,
/// `peak_excursion` at the center, and at least half the peak over the
/// central half of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GustEvent {
    /// Window start (s).
    pub time: f64,
    /// Window length (s).
    pub duration: f64,
    /// Peak angular excursion at the window center (rad).
    pub peak_excursion: f64,
}

impl GustEvent {
    /// Excursion contributed at time `t` (rad).
    pub fn excursion_at(&self, t: f64) -> f64 {
        if t < self.time || t > self.time + self.duration || self.duration <= 0.0 {
            return 0.0;
        }
        let phase = (t - self.time) / self.duration;
        self.peak_excursion * 0.5 * (1.0 - (std::f64::consts::TAU * phase).cos())
    }
}

/// Stochastic pointing-error model of one terminal pair.
///
/// The error is a two-axis angle: a fixed post-alignment residual and a slow
/// fixture creep act on the first axis, gusts superpose on the same axis,
/// and fast Gaussian jitter acts on both axes independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointingProcess {
    /// Residual bias left after the initial beacon-assisted alignment (rad).
    pub static_residual: f64,
    /// Standard deviation of the fast jitter per axis (rad).
    pub jitter_sigma: f64,
    /// Monotone fixture creep (rad/day).
    pub drift_rate: f64,
    /// Transient excursions superposed additively.
    #[serde(default)]
    pub gust_events: Vec<GustEvent>,
}

impl PointingProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_sigma >= 0.0) {
            return Err(Error::Config("jitter_sigma must be >= 0".into()));
        }
        if !self.static_residual.is_finite() || !self.drift_rate.is_finite() {
            return Err(Error::NonFinite("pointing process parameter"));
        }
        Ok(())
    }

    /// Deterministic (bias + drift + gust) part of the first axis at `t`.
    pub fn deterministic_component(&self, t: f64) -> f64 {
        let drift = self.drift_rate * t / SECONDS_PER_DAY;
        let gust: f64 = self.gust_events.iter().map(|g| g.excursion_at(t)).sum();
        self.static_residual + drift + gust
    }

    /// Two-axis pointing error at time `t`, jitter addressed by `step`.
    pub fn sample(&self, t: f64, step: u64, stream: &RandomStream) -> [f64; 2] {
        let (zx, zy) = if self.jitter_sigma > 0.0 {
            stream.gaussian_pair(step)
        } else {
            (0.0, 0.0)
        };
        [
            self.deterministic_component(t) + self.jitter_sigma * zx,
            self.jitter_sigma * zy,
        ]
    }
}

/// Kind of scripted weather event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherKind {
    Rain,
    Fog,
}

/// One scripted attenuation event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherEvent {
    pub kind: WeatherKind,
    /// Event start (s).
    pub start: f64,
    /// Event length (s).
    pub duration: f64,
    /// Specific attenuation while active (dB/km).
    pub specific_attenuation: f64,
}

impl WeatherEvent {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

/// Scripted weather over a campaign.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeatherTimeline {
    pub events: Vec<WeatherEvent>,
    /// Ambient temperature annotation, `(t_s, deg_C)` pairs; not used by the
    /// channel model.
    #[serde(default)]
    pub ambient_temperature_c: Vec<(f64, f64)>,
}

impl WeatherTimeline {
    /// Default one-month timeline: 19 rain and 5 fog events placed
    /// pseudo-randomly from the seed, non-overlapping per kind.
    ///
    /// Rain events run 1-6 h at 6 dB/km, fog events 2-8 h at 100 dB/km.
    /// Events are stratified over the month so every week sees weather.
    pub fn paper_month(seed: u64) -> Self {
        let stream = RandomStream::new(seed, streams::WEATHER);
        let month = 30.0 * SECONDS_PER_DAY;
        let mut events = Vec::with_capacity(24);
        let mut draw = 0u64;
        let mut next = || {
            let u = stream.uniform(draw);
            draw += 1;
            u
        };

        let rain_slot = month / 19.0;
        for i in 0..19 {
            let duration = (1.0 + 5.0 * next()) * 3600.0;
            let latest = (rain_slot - duration).max(0.0);
            let start = i as f64 * rain_slot + next() * latest;
            events.push(WeatherEvent {
                kind: WeatherKind::Rain,
                start,
                duration,
                specific_attenuation: 6.0,
            });
        }

        let fog_slot = month / 5.0;
        for i in 0..5 {
            let duration = (2.0 + 6.0 * next()) * 3600.0;
            let latest = (fog_slot - duration).max(0.0);
            let start = i as f64 * fog_slot + next() * latest;
            events.push(WeatherEvent {
                kind: WeatherKind::Fog,
                start,
                duration,
                specific_attenuation: 100.0,
            });
        }

        Self {
            events,
            ambient_temperature_c: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for event in &self.events {
            if !(event.specific_attenuation >= 0.0) {
                return Err(Error::Config("specific_attenuation must be >= 0".into()));
            }
            if !(event.duration > 0.0) {
                return Err(Error::Config("weather event duration must be positive".into()));
            }
        }
        for kind in [WeatherKind::Rain, WeatherKind::Fog] {
            let mut spans: Vec<(f64, f64)> = self
                .events
                .iter()
                .filter(|e| e.kind == kind)
                .map(|e| (e.start, e.start + e.duration))
                .collect();
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(Error::Config(format!(
                        "overlapping {kind:?} events at t = {:.0} s",
                        pair[1].0
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn any_active(&self, t: f64) -> bool {
        self.events.iter().any(|e| e.active_at(t))
    }
}

/// Excess path attenuation from scripted weather at time `t` over `span_m`
/// meters (dB). Zero in clear sky; overlapping kinds add in dB.
pub fn atmospheric_loss(timeline: &WeatherTimeline, t: f64, span_m: f64) -> f64 {
    let span_km = span_m / 1e3;
    timeline
        .events
        .iter()
        .filter(|e| e.active_at(t))
        .map(|e| e.specific_attenuation * span_km)
        .sum()
}

/// Log-normal power-fading model with first-order autoregressive memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScintillationModel {
    /// Standard deviation of the log-amplitude (dimensionless).
    pub log_amplitude_sigma: f64,
    /// 1/e decorrelation time of the fading (s); zero means independent
    /// samples.
    pub correlation_time: f64,
}

impl ScintillationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.log_amplitude_sigma >= 0.0) {
            return Err(Error::Config("log_amplitude_sigma must be >= 0".into()));
        }
        if !(self.correlation_time >= 0.0) {
            return Err(Error::Config("correlation_time must be >= 0".into()));
        }
        Ok(())
    }

    /// Variance of the normalized power, `exp(4 sigma^2) - 1`.
    pub fn scintillation_index(&self) -> f64 {
        (4.0 * self.log_amplitude_sigma * self.log_amplitude_sigma).exp() - 1.0
    }

    pub fn sampler(&self, stream: RandomStream) -> ScintillationSampler {
        ScintillationSampler {
            model: *self,
            stream,
            state: None,
            step: 0,
        }
    }
}

/// Sequential sampler of the fading process.
///
/// Emits multiplicative power factors `exp(2 X - 2 sigma^2)` with `X` an
/// AR(1) Gaussian of standard deviation `sigma`; the `-2 sigma^2` offset
/// keeps the mean power at exactly one.
#[derive(Debug, Clone)]
pub struct ScintillationSampler {
    model: ScintillationModel,
    stream: RandomStream,
    state: Option<f64>,
    step: u64,
}

impl ScintillationSampler {
    /// Next multiplicative power factor, `dt` seconds after the previous one.
    pub fn next_factor(&mut self, dt: f64) -> f64 {
        let sigma = self.model.log_amplitude_sigma;
        if sigma == 0.0 {
            self.step += 1;
            return 1.0;
        }
        let innovation = self.stream.gaussian_pair(self.step).0;
        self.step += 1;
        let x = match self.state {
            None => sigma * innovation,
            Some(prev) => {
                let rho = if self.model.correlation_time > 0.0 {
                    (-dt / self.model.correlation_time).exp()
                } else {
                    0.0
                };
                rho * prev + sigma * (1.0 - rho * rho).sqrt() * innovation
            }
        };
        self.state = Some(x);
        (2.0 * x - 2.0 * sigma * sigma).exp()
    }
}

/// Channel state for one timestep of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Sample time since campaign start (s).
    pub t: f64,
    /// Two-axis pointing error (rad).
    pub pointing: [f64; 2],
    /// Scripted weather attenuation over the span (dB).
    pub excess_loss_db: f64,
    /// Multiplicative power fade factor (unit mean).
    pub fade_factor: f64,
    /// Whether any weather event is active at this step.
    pub weather_active: bool,
}

impl ChannelState {
    /// Radial pointing-error magnitude (rad).
    pub fn pointing_magnitude(&self) -> f64 {
        self.pointing[0].hypot(self.pointing[1])
    }
}

/// Streaming generator of per-step channel states.
pub struct ChannelStateIter<'a> {
    pointing: &'a PointingProcess,
    timeline: &'a WeatherTimeline,
    span_m: f64,
    dt: f64,
    count: u64,
    step: u64,
    pointing_stream: RandomStream,
    scintillation: ScintillationSampler,
}

impl<'a> ChannelStateIter<'a> {
    pub fn new(
        pointing: &'a PointingProcess,
        timeline: &'a WeatherTimeline,
        scintillation: &ScintillationModel,
        span_m: f64,
        duration: f64,
        dt: f64,
        stream: &RandomStream,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config("campaign dt must be positive".into()));
        }
        if duration < 0.0 {
            return Err(Error::Config("campaign duration must be >= 0".into()));
        }
        pointing.validate()?;
        timeline.validate()?;
        scintillation.validate()?;
        let count = ((duration / dt).ceil() as u64).max(1);
        Ok(Self {
            pointing,
            timeline,
            span_m,
            dt,
            count,
            step: 0,
            pointing_stream: stream.substream(streams::POINTING),
            scintillation: scintillation.sampler(stream.substream(streams::SCINTILLATION)),
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl Iterator for ChannelStateIter<'_> {
    type Item = ChannelState;

    fn next(&mut self) -> Option<ChannelState> {
        if self.step >= self.count {
            return None;
        }
        let t = self.step as f64 * self.dt;
        let state = ChannelState {
            t,
            pointing: self.pointing.sample(t, self.step, &self.pointing_stream),
            excess_loss_db: atmospheric_loss(self.timeline, t, self.span_m),
            fade_factor: self.scintillation.next_factor(self.dt),
            weather_active: self.timeline.any_active(t),
        };
        self.step += 1;
        Some(state)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.step) as usize;
        (left, Some(left))
    }
}

/// Materialize the full channel-state sequence for a campaign.
///
/// Refuses campaigns beyond `cap` samples; use [`ChannelStateIter`] directly
/// to stream longer runs.
#[allow(clippy::too_many_arguments)]
pub fn generate_campaign_inputs(
    pointing: &PointingProcess,
    timeline: &WeatherTimeline,
    scintillation: &ScintillationModel,
    span_m: f64,
    duration: f64,
    dt: f64,
    stream: &RandomStream,
    cap: u64,
) -> Result<Vec<ChannelState>> {
    let iter = ChannelStateIter::new(pointing, timeline, scintillation, span_m, duration, dt, stream)?;
    if iter.len() > cap {
        return Err(Error::CampaignTooLarge {
            requested: iter.len(),
            cap,
        });
    }
    Ok(iter.collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_pointing() -> PointingProcess {
        PointingProcess {
            static_residual: 0.0,
            jitter_sigma: 0.0,
            drift_rate: 0.0,
            gust_events: Vec::new(),
        }
    }

    #[test]
    fn degenerate_process_is_constant() {
        let proc = PointingProcess {
            static_residual: 30e-6,
            ..quiet_pointing()
        };
        let stream = RandomStream::new(1, streams::POINTING);
        for step in 0..10 {
            let p = proc.sample(step as f64 * 60.0, step, &stream);
            assert_eq!(p, [30e-6, 0.0]);
        }
    }

    #[test]
    fn jitter_sigma_recovered() {
        let proc = PointingProcess {
            jitter_sigma: 40e-6,
            ..quiet_pointing()
        };
        let stream = RandomStream::new(7, streams::POINTING);
        let n = 100_000u64;
        let mut sum_sq = 0.0;
        for step in 0..n {
            let p = proc.sample(0.0, step, &stream);
            sum_sq += p[0] * p[0] + p[1] * p[1];
        }
        let sigma = (sum_sq / (2 * n) as f64).sqrt();
        assert!(
            (sigma / 40e-6 - 1.0).abs() < 0.02,
            "sample sigma {sigma:.3e} vs configured 40e-6"
        );
    }

    #[test]
    fn gust_pulse_shape() {
        let gust = GustEvent {
            time: 100.0,
            duration: 1.0,
            peak_excursion: 1e-3,
        };
        assert_eq!(gust.excursion_at(99.9), 0.0);
        assert_eq!(gust.excursion_at(101.1), 0.0);
        assert!((gust.excursion_at(100.5) - 1e-3).abs() < 1e-15);
        assert!((gust.excursion_at(100.25) - 0.5e-3).abs() < 1e-15);
        // At least half the peak over the central half of the window.
        for frac in [0.25, 0.4, 0.5, 0.6, 0.75] {
            assert!(gust.excursion_at(100.0 + frac) >= 0.5e-3 - 1e-15);
        }
    }

    #[test]
    fn gust_window_magnitude() {
        let proc = PointingProcess {
            gust_events: vec![GustEvent {
                time: 10.0,
                duration: 1.0,
                peak_excursion: 2e-3,
            }],
            ..quiet_pointing()
        };
        let stream = RandomStream::new(1, streams::POINTING);
        let p = proc.sample(10.5, 0, &stream);
        assert!(p[0].hypot(p[1]) >= 1e-3);
    }

    #[test]
    fn drift_is_monotone() {
        let proc = PointingProcess {
            drift_rate: 9e-6,
            ..quiet_pointing()
        };
        let stream = RandomStream::new(1, streams::POINTING);
        let mut previous = -1.0;
        for step in 0..100 {
            let t = step as f64 * 3600.0;
            let magnitude = proc.sample(t, step, &stream)[0].abs();
            assert!(magnitude >= previous);
            previous = magnitude;
        }
    }

    #[test]
    fn clear_sky_is_lossless() {
        let timeline = WeatherTimeline::paper_month(42);
        // Find an instant with no active event.
        let mut t = 0.0;
        while timeline.any_active(t) {
            t += 60.0;
        }
        assert_eq!(atmospheric_loss(&timeline, t, 63.0), 0.0);
    }

    #[test]
    fn fog_loss_scales_with_span() {
        let timeline = WeatherTimeline {
            events: vec![WeatherEvent {
                kind: WeatherKind::Fog,
                start: 0.0,
                duration: 3600.0,
                specific_attenuation: 100.0,
            }],
            ambient_temperature_c: Vec::new(),
        };
        let loss = atmospheric_loss(&timeline, 10.0, 63.0);
        assert!((loss - 6.3).abs() < 1e-12, "fog over 63 m: {loss}");
    }

    #[test]
    fn overlapping_kinds_add() {
        let timeline = WeatherTimeline {
            events: vec![
                WeatherEvent {
                    kind: WeatherKind::Fog,
                    start: 0.0,
                    duration: 100.0,
                    specific_attenuation: 100.0,
                },
                WeatherEvent {
                    kind: WeatherKind::Rain,
                    start: 0.0,
                    duration: 100.0,
                    specific_attenuation: 6.0,
                },
            ],
            ambient_temperature_c: Vec::new(),
        };
        assert!(timeline.validate().is_ok());
        let loss = atmospheric_loss(&timeline, 50.0, 1000.0);
        assert!((loss - 106.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_same_kind_rejected() {
        let timeline = WeatherTimeline {
            events: vec![
                WeatherEvent {
                    kind: WeatherKind::Rain,
                    start: 0.0,
                    duration: 200.0,
                    specific_attenuation: 6.0,
                },
                WeatherEvent {
                    kind: WeatherKind::Rain,
                    start: 100.0,
                    duration: 200.0,
                    specific_attenuation: 6.0,
                },
            ],
            ambient_temperature_c: Vec::new(),
        };
        assert!(timeline.validate().is_err());
    }

    #[test]
    fn default_timeline_counts() {
        let timeline = WeatherTimeline::paper_month(42);
        assert!(timeline.validate().is_ok());
        let rain = timeline
            .events
            .iter()
            .filter(|e| e.kind == WeatherKind::Rain)
            .count();
        let fog = timeline
            .events
            .iter()
            .filter(|e| e.kind == WeatherKind::Fog)
            .count();
        assert_eq!(rain, 19);
        assert_eq!(fog, 5);
    }

    #[test]
    fn scintillation_degenerate_sigma() {
        let model = ScintillationModel {
            log_amplitude_sigma: 0.0,
            correlation_time: 300.0,
        };
        let mut sampler = model.sampler(RandomStream::new(1, streams::SCINTILLATION));
        for _ in 0..100 {
            assert_eq!(sampler.next_factor(60.0), 1.0);
        }
    }

    #[test]
    fn scintillation_unit_mean() {
        let model = ScintillationModel {
            log_amplitude_sigma: 0.2,
            correlation_time: 0.0,
        };
        let mut sampler = model.sampler(RandomStream::new(3, streams::SCINTILLATION));
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sampler.next_factor(1.0);
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean fade factor {mean}");
    }

    #[test]
    fn scintillation_index_matches_moment_identity() {
        let model = ScintillationModel {
            log_amplitude_sigma: 0.2,
            correlation_time: 0.0,
        };
        let expected = model.scintillation_index();
        assert!((expected - 0.1735).abs() < 1e-3);

        let mut sampler = model.sampler(RandomStream::new(11, streams::SCINTILLATION));
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let f = sampler.next_factor(1.0);
            sum += f;
            sum_sq += f * f;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(
            (var / expected - 1.0).abs() < 0.03,
            "scintillation index {var} vs {expected}"
        );
    }

    #[test]
    fn campaign_sample_counts() {
        let proc = quiet_pointing();
        let timeline = WeatherTimeline::default();
        let scint = ScintillationModel {
            log_amplitude_sigma: 0.0,
            correlation_time: 0.0,
        };
        let stream = RandomStream::new(1, 0);
        let single =
            generate_campaign_inputs(&proc, &timeline, &scint, 63.0, 0.0, 60.0, &stream, 1000)
                .unwrap();
        assert_eq!(single.len(), 1);

        let month = 30.0 * SECONDS_PER_DAY;
        let iter =
            ChannelStateIter::new(&proc, &timeline, &scint, 63.0, month, 60.0, &stream).unwrap();
        assert_eq!(iter.len(), 43_200);
    }

    #[test]
    fn campaign_cap_enforced() {
        let proc = quiet_pointing();
        let timeline = WeatherTimeline::default();
        let scint = ScintillationModel {
            log_amplitude_sigma: 0.0,
            correlation_time: 0.0,
        };
        let stream = RandomStream::new(1, 0);
        let err = generate_campaign_inputs(
            &proc, &timeline, &scint, 63.0, 1e6, 1.0, &stream, 100,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CampaignTooLarge { .. }));
    }

    #[test]
    fn campaign_regeneration_is_bit_identical() {
        let proc = PointingProcess {
            static_residual: 45e-6,
            jitter_sigma: 35e-6,
            drift_rate: 9e-6,
            gust_events: Vec::new(),
        };
        let timeline = WeatherTimeline::paper_month(42);
        let scint = ScintillationModel {
            log_amplitude_sigma: 0.2,
            correlation_time: 300.0,
        };
        let stream = RandomStream::new(42, 0);
        let a = generate_campaign_inputs(
            &proc, &timeline, &scint, 63.0, 86_400.0, 60.0, &stream, 10_000,
        )
        .unwrap();
        let b = generate_campaign_inputs(
            &proc, &timeline, &scint, 63.0, 86_400.0, 60.0, &stream, 10_000,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
