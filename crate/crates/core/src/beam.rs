//! Paraxial Gaussian-beam launch, propagation, and fiber-coupling efficiency.
//!
//! Models the optical chain of one free-space hop: a single-mode fiber tip
//! collimated by a lens, free-space propagation of the fundamental Gaussian
//! mode, and refocusing onto either a single-mode core (modal overlap) or a
//! large multi-mode aperture (encircled power plus an NA acceptance cone).
//! All coupling efficiencies are dimensionless power fractions in `[0, 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Largest angle the small-angle geometry accepts (rad).
pub const PARAXIAL_BOUND_RAD: f64 = 10e-3;

/// Fundamental-mode Gaussian beam state.
///
/// `waist_position` is the axial coordinate of the waist relative to the
/// beam's current reference plane; a negative value means the waist lies
/// behind the plane. [`GaussianBeam::radius`] evaluates the 1/e^2 field
/// radius at the reference plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// Vacuum wavelength (m).
    pub wavelength: f64,
    /// Waist 1/e^2 field radius (m).
    pub waist_radius: f64,
    /// Waist location along the propagation axis, relative to the current
    /// reference plane (m).
    pub waist_position: f64,
    /// Optical power carried by the beam (W).
    pub power: f64,
}

impl GaussianBeam {
    pub fn new(wavelength: f64, waist_radius: f64, waist_position: f64, power: f64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::Config("beam wavelength must be positive".into()));
        }
        if !(waist_radius > 0.0) {
            return Err(Error::Config("beam waist radius must be positive".into()));
        }
        if !(power >= 0.0) || !power.is_finite() {
            return Err(Error::Config("beam power must be finite and non-negative".into()));
        }
        Ok(Self {
            wavelength,
            waist_radius,
            waist_position,
            power,
        })
    }

    /// Rayleigh range z_R = pi w0^2 / lambda (m).
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist_radius * self.waist_radius / self.wavelength
    }

    /// Far-field divergence half-angle theta = lambda / (pi w0) (rad).
    pub fn divergence(&self) -> f64 {
        self.wavelength / (PI * self.waist_radius)
    }

    /// 1/e^2 field radius at the current reference plane (m).
    pub fn radius(&self) -> f64 {
        let z = -self.waist_position;
        let zr = self.rayleigh_range();
        self.waist_radius * (1.0 + (z / zr) * (z / zr)).sqrt()
    }

    /// Advance the reference plane by `distance` along the axis.
    ///
    /// Vacuum step: waist and power are untouched, only the plane moves.
    /// Atmospheric loss is applied elsewhere.
    pub fn propagate(&self, distance: f64) -> Self {
        Self {
            waist_position: self.waist_position - distance,
            ..*self
        }
    }
}

/// Guiding-region geometry a beam couples into or out of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    SingleMode,
    MultiMode,
    DcfCore,
    DcfInnerCladding,
}

impl FiberKind {
    pub fn is_single_mode(&self) -> bool {
        matches!(self, FiberKind::SingleMode | FiberKind::DcfCore)
    }

    pub fn is_multi_mode(&self) -> bool {
        matches!(self, FiberKind::MultiMode | FiberKind::DcfInnerCladding)
    }
}

/// Geometric description of a fiber port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub kind: FiberKind,
    /// Core (or inner-cladding) diameter (m).
    pub core_diameter: f64,
    /// Numerical aperture, sine of the acceptance half-angle.
    pub numerical_aperture: f64,
    /// Cut-off wavelength for single-mode guidance (m), when known.
    pub cutoff_wavelength: Option<f64>,
    /// Fundamental-mode 1/e^2 field radius (m); single-mode kinds only.
    pub mode_field_radius: Option<f64>,
}

impl FiberSpec {
    /// 9 um core, NA 0.12 feeder fiber of the stock coupler; mode-field
    /// radius defaults to 5.2 um at 1550 nm (override via config).
    pub fn smf_9um() -> Self {
        Self {
            kind: FiberKind::SingleMode,
            core_diameter: 9e-6,
            numerical_aperture: 0.12,
            cutoff_wavelength: Some(1250e-9),
            mode_field_radius: Some(5.2e-6),
        }
    }

    /// 200 um core, NA 0.22 step-index multi-mode receive fiber.
    pub fn mmf_200um() -> Self {
        Self {
            kind: FiberKind::MultiMode,
            core_diameter: 200e-6,
            numerical_aperture: 0.22,
            cutoff_wavelength: None,
            mode_field_radius: None,
        }
    }

    /// 105 um inner cladding of the double-clad fiber; this is the
    /// multi-mode capture aperture at the air interface.
    pub fn dcf_inner_cladding_105um() -> Self {
        Self {
            kind: FiberKind::DcfInnerCladding,
            core_diameter: 105e-6,
            numerical_aperture: 0.22,
            cutoff_wavelength: None,
            mode_field_radius: None,
        }
    }

    /// Core (or inner-cladding) radius (m).
    pub fn core_radius(&self) -> f64 {
        self.core_diameter / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.core_diameter > 0.0) {
            return Err(Error::Config("fiber core diameter must be positive".into()));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(Error::Config("fiber NA must lie in (0, 1)".into()));
        }
        if self.kind.is_single_mode() && self.mode_field_radius.is_none() {
            return Err(Error::Config(
                "single-mode fiber entries must carry a mode_field_radius".into(),
            ));
        }
        if self.kind.is_multi_mode() && self.mode_field_radius.is_some() {
            return Err(Error::Config(
                "multi-mode fiber entries must not carry a mode_field_radius".into(),
            ));
        }
        if let Some(w) = self.mode_field_radius {
            if !(w > 0.0) {
                return Err(Error::Config("mode_field_radius must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Thin-lens collimator / coupler description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    /// Focal length (m).
    pub focal_length: f64,
    /// Clear aperture diameter (m).
    pub aperture_diameter: f64,
}

impl LensSpec {
    /// 2-inch clear aperture, 100 mm focal length default collimator.
    pub fn two_inch_collimator() -> Self {
        Self {
            focal_length: 0.1,
            aperture_diameter: 50.8e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length > 0.0) {
            return Err(Error::Config("lens focal length must be positive".into()));
        }
        if !(self.aperture_diameter > 0.0) {
            return Err(Error::Config("lens aperture must be positive".into()));
        }
        Ok(())
    }
}

/// Transverse misalignment at a coupling plane.
///
/// Zero on both fields means perfect alignment. The coupling-efficiency
/// operations interpret the fields at the fiber facet plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Misalignment {
    /// Lateral offset between beam and fiber axes (m).
    pub lateral_offset: f64,
    /// Angular error between beam and fiber axes (rad).
    pub angular_error: f64,
}

impl Misalignment {
    pub fn new(lateral_offset: f64, angular_error: f64) -> Self {
        Self {
            lateral_offset,
            angular_error,
        }
    }
}

/// Collimate the mode emerging from a fiber tip sitting at the lens front
/// focal plane.
///
/// Returns a beam with waist `lambda f / (pi w0)` located at the lens plane.
/// Configurations where the collimated 1/e^2 diameter would exceed the lens
/// aperture are rejected; truncation is not modeled.
pub fn collimate(
    mode_field_radius: f64,
    wavelength: f64,
    lens: &LensSpec,
    power: f64,
) -> Result<GaussianBeam> {
    lens.validate()?;
    if !(mode_field_radius > 0.0) {
        return Err(Error::Config("mode field radius must be positive".into()));
    }
    let waist = wavelength * lens.focal_length / (PI * mode_field_radius);
    if 2.0 * waist > lens.aperture_diameter {
        return Err(Error::BeamTruncation {
            beam_diameter_m: 2.0 * waist,
            aperture_m: lens.aperture_diameter,
        });
    }
    GaussianBeam::new(wavelength, waist, 0.0, power)
}

/// Small-angle walk-off of a pointing error over a span: `span * angle`.
pub fn lateral_offset_from_angle(angular_error: f64, span: f64) -> Result<f64> {
    if angular_error.abs() >= PARAXIAL_BOUND_RAD {
        return Err(Error::ParaxialBound {
            angle_rad: angular_error,
            bound_rad: PARAXIAL_BOUND_RAD,
        });
    }
    Ok(span * angular_error)
}

/// Map a misalignment observed at the receive lens plane to the fiber facet.
///
/// The lens refocuses the collimated beam onto the facet at its back focal
/// plane: an arrival tilt `theta` lands the spot `f * theta` off axis, while
/// a lateral walk-off `d` at the lens tilts the focused cone by `d / f`.
pub fn facet_misalignment(at_lens: Misalignment, focal_length: f64) -> Misalignment {
    Misalignment {
        lateral_offset: focal_length * at_lens.angular_error,
        angular_error: at_lens.angular_error - at_lens.lateral_offset / focal_length,
    }
}

/// Focused-spot 1/e^2 radius when a collimated beam of radius `beam_radius`
/// is brought to the facet by a lens of the given focal length.
pub fn focused_spot_radius(beam_radius: f64, wavelength: f64, focal_length: f64) -> f64 {
    wavelength * focal_length / (PI * beam_radius)
}

/// Numerical aperture of the focused cone produced by a collimated beam of
/// radius `beam_radius` and a lens of the given focal length.
pub fn focused_na(beam_radius: f64, focal_length: f64) -> f64 {
    let half_angle = (beam_radius / focal_length).atan();
    half_angle.sin()
}

/// Gaussian-to-Gaussian mode overlap under lateral offset and tilt.
///
/// `eta = (2 w1 w2 / (w1^2 + w2^2))^2 * exp(-2 d^2 / (w1^2 + w2^2))
///        * exp(-2 theta^2 / (t1^2 + t2^2))`
/// with mode angular widths `t_i = lambda / (pi w_i)`. Offset and tilt taken
/// at the same plane factor exactly; the cross term is pure phase.
pub fn smf_coupling_efficiency(
    incident_waist: f64,
    fiber_mode_radius: f64,
    mis: Misalignment,
    wavelength: f64,
) -> f64 {
    let (w1, w2) = (incident_waist, fiber_mode_radius);
    debug_assert!(w1 > 0.0 && w2 > 0.0);
    let sum_sq = w1 * w1 + w2 * w2;
    let mode_match = {
        let m = 2.0 * w1 * w2 / sum_sq;
        m * m
    };
    let lateral = (-2.0 * mis.lateral_offset * mis.lateral_offset / sum_sq).exp();
    let t1 = wavelength / (PI * w1);
    let t2 = wavelength / (PI * w2);
    let ang_sum_sq = t1 * t1 + t2 * t2;
    let tilt = (-2.0 * mis.angular_error * mis.angular_error / ang_sum_sq).exp();
    (mode_match * lateral * tilt).clamp(0.0, 1.0)
}

/// Fraction of a Gaussian spot of 1/e^2 radius `spot_radius` falling inside
/// a circle of radius `aperture_radius` whose center is `offset` away from
/// the spot center.
///
/// On axis this is the closed form `1 - exp(-2 a^2 / w^2)`; off axis the
/// two-dimensional integral reduces to a single smooth integral over the
/// chord direction, evaluated adaptively.
pub fn encircled_fraction(spot_radius: f64, aperture_radius: f64, offset: f64) -> f64 {
    let w = spot_radius;
    let a = aperture_radius;
    let d = offset.abs();
    debug_assert!(w > 0.0 && a > 0.0);
    if d == 0.0 {
        return 1.0 - (-2.0 * a * a / (w * w)).exp();
    }
    // Support of the Gaussian factor, clipped to the aperture. Beyond
    // 7.5 waists the residual mass is ~1e-49, far below the quadrature
    // tolerance.
    let reach = 7.5 * w;
    if d + reach <= a {
        return 1.0;
    }
    let lo = (-a).max(d - reach);
    let hi = a.min(d + reach);
    if lo >= hi {
        return 0.0;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = (2.0 / PI).sqrt() / w;
    let integrand = |x: f64| {
        let chord = (a * a - x * x).max(0.0).sqrt();
        let g = (-2.0 * (x - d) * (x - d) / (w * w)).exp();
        norm * g * erf(sqrt2 * chord / w)
    };
    // Tanh-sinh quadrature: the chord factor has a square-root edge at
    // |x| = a, which the double-exponential node clustering absorbs.
    tanh_sinh(&integrand, lo, hi).clamp(0.0, 1.0)
}

fn tanh_sinh(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const STEP: f64 = 1.0 / 32.0;
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let half_pi = 0.5 * PI;
    let mut sum = half_pi * f(mid);
    for k in 1..=400 {
        let t = k as f64 * STEP;
        let s = half_pi * t.sinh();
        let weight = half_pi * t.cosh() / s.cosh().powi(2);
        if weight < 1e-18 {
            break;
        }
        let x = s.tanh();
        sum += weight * (f(mid + half * x) + f(mid - half * x));
    }
    sum * half * STEP
}

/// Gauss-Legendre nodes/weights by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Acceptance-cone factor for launching a focused cone into a multi-mode
/// aperture of the given NA.
///
/// Full transmission while the cone half-angle fits inside the acceptance
/// half-angle and the tilt stays within the remaining margin; beyond the
/// margin the factor rolls off linearly to zero over one cone half-angle.
pub fn na_acceptance_factor(focused_na: f64, aperture_na: f64, tilt: f64) -> f64 {
    let cone = focused_na.clamp(0.0, 1.0).asin();
    let acceptance = aperture_na.clamp(0.0, 1.0).asin();
    let margin = acceptance - cone;
    let excess = tilt.abs() - margin;
    if excess <= 0.0 {
        return 1.0;
    }
    if cone <= f64::EPSILON {
        return 0.0;
    }
    (1.0 - excess / cone).clamp(0.0, 1.0)
}

/// Coupling efficiency of a focused Gaussian spot into a multi-mode
/// aperture: encircled power inside the core circle times the NA
/// acceptance factor.
pub fn mmf_coupling_efficiency(
    incident_beam_radius: f64,
    aperture: &FiberSpec,
    mis: Misalignment,
    focused_na: f64,
) -> Result<f64> {
    if !aperture.kind.is_multi_mode() {
        return Err(Error::Config(format!(
            "multi-mode coupling requires a multi-mode aperture, got {:?}",
            aperture.kind
        )));
    }
    let geometric = encircled_fraction(
        incident_beam_radius,
        aperture.core_radius(),
        mis.lateral_offset,
    );
    let cone = na_acceptance_factor(focused_na, aperture.numerical_aperture, mis.angular_error);
    Ok((geometric * cone).clamp(0.0, 1.0))
}

/// Fundamental-mode field radius of a step-index fiber from core radius and
/// V-number (Marcuse fit): `w/a = 0.65 + 1.619 V^-1.5 + 2.879 V^-6`.
pub fn marcuse_mode_field_radius(core_radius: f64, numerical_aperture: f64, wavelength: f64) -> f64 {
    let v = 2.0 * PI * core_radius * numerical_aperture / wavelength;
    core_radius * (0.65 + 1.619 * v.powf(-1.5) + 2.879 * v.powi(-6))
}
