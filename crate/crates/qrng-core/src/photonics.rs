//! Source and homodyne-detection model.
//!
//! The optical layer is deliberately small: the source emits vacuum (input
//! bit 0) or a weak coherent pulse (input bit 1), and a balanced homodyne
//! detector turns each pulse into one real quadrature value. Everything that
//! matters downstream is the pair of conditional Gaussians and the slow
//! drift that moves them.
//!
//! Unit convention (fixed once, used everywhere): the vacuum quadrature has
//! variance 1 ("shot-noise units") and a coherent pulse of mean photon
//! number μ has quadrature mean 2·√μ·cos φ, where φ is the local-oscillator
//! phase relative to the pulse.

use crate::math::{self, RootError};
use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;

/// Operating point of the partially characterized source.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SourceConfig {
    /// Mean photon number per coherent pulse (|α|²), ≥ 0.
    pub mu: f64,
    /// Pulse repetition rate in Hz, > 0.
    pub f_rep: f64,
    /// Pulse (modulation) duration in seconds, 0 < Δt ≤ 1/f_rep.
    pub delta_t: f64,
    /// Lower bound on the optical frequency in Hz, > 0.
    pub nu_min: f64,
    /// Probability of sending input x = 1, in [0, 1].
    pub p_x1: f64,
    /// Unseeded-mode leakage power relative to the seeded mode (linear
    /// ratio; e.g. −13.47 dB ≈ 0.045). Enters only the energy monitor.
    pub background_power_ratio: f64,
}

/// Untrusted homodyne detector settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HomodyneConfig {
    /// Local-oscillator phase φ in radians.
    pub lo_phase: f64,
    /// Vacuum quadrature variance; the unit convention fixes this to 1.
    pub shot_variance: f64,
    /// Additive electronic noise variance in shot-noise units, ≥ 0.
    pub electronic_noise_variance: f64,
    /// Discrimination level τ in quadrature units.
    pub threshold: f64,
}

/// Slowly varying interferometer state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriftState {
    /// Accumulated phase error in radians.
    pub phase_offset: f64,
    /// Multiplicative visibility factor in [0, 1].
    pub polarization_loss: f64,
    /// Elapsed simulated time in seconds.
    pub time: f64,
}

/// Rates governing [`step_drift`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriftParams {
    /// Phase random-walk diffusion rate in rad²/s.
    pub phase_diffusion: f64,
    /// Time constant (s) of the exponential decay of `polarization_loss`
    /// toward `polarization_floor`; 0 disables the decay.
    pub polarization_decay_time: f64,
    /// Asymptotic visibility floor in [0, 1].
    pub polarization_floor: f64,
}

/// One real quadrature outcome in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSample {
    /// The measured value; always finite.
    pub value: f64,
}

/// A rejected configuration field, with the offending value.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// `mu` must be ≥ 0 and finite.
    MeanPhotonNumber(f64),
    /// `f_rep` must be > 0 and finite.
    RepetitionRate(f64),
    /// `delta_t` must satisfy 0 < Δt ≤ 1/f_rep.
    PulseDuration(f64),
    /// `nu_min` must be > 0 and finite.
    MinimumFrequency(f64),
    /// `p_x1` must lie in [0, 1].
    InputBias(f64),
    /// `background_power_ratio` must be ≥ 0 and finite.
    BackgroundRatio(f64),
    /// `shot_variance` must equal 1 exactly (unit convention).
    ShotVariance(f64),
    /// `electronic_noise_variance` must be ≥ 0 and finite.
    ElectronicNoise(f64),
    /// `threshold` must be finite.
    Threshold(f64),
    /// `lo_phase` must be finite.
    LoPhase(f64),
}

impl core::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConfigError::MeanPhotonNumber(v) => {
                write!(f, "mu must be a finite number >= 0, got {v}")
            }
            ConfigError::RepetitionRate(v) => {
                write!(f, "f_rep must be a finite rate > 0 Hz, got {v}")
            }
            ConfigError::PulseDuration(v) => {
                write!(f, "delta_t must satisfy 0 < delta_t <= 1/f_rep, got {v}")
            }
            ConfigError::MinimumFrequency(v) => {
                write!(f, "nu_min must be a finite frequency > 0 Hz, got {v}")
            }
            ConfigError::InputBias(v) => write!(f, "p_x1 must lie in [0, 1], got {v}"),
            ConfigError::BackgroundRatio(v) => {
                write!(f, "background_power_ratio must be finite and >= 0, got {v}")
            }
            ConfigError::ShotVariance(v) => {
                write!(f, "shot_variance must equal 1 exactly (unit convention), got {v}")
            }
            ConfigError::ElectronicNoise(v) => {
                write!(f, "electronic_noise_variance must be finite and >= 0, got {v}")
            }
            ConfigError::Threshold(v) => write!(f, "threshold must be finite, got {v}"),
            ConfigError::LoPhase(v) => write!(f, "lo_phase must be finite, got {v}"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl SourceConfig {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(ConfigError::MeanPhotonNumber(self.mu));
        }
        if !(self.f_rep.is_finite() && self.f_rep > 0.0) {
            return Err(ConfigError::RepetitionRate(self.f_rep));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0 && self.delta_t <= 1.0 / self.f_rep) {
            return Err(ConfigError::PulseDuration(self.delta_t));
        }
        if !(self.nu_min.is_finite() && self.nu_min > 0.0) {
            return Err(ConfigError::MinimumFrequency(self.nu_min));
        }
        if !(self.p_x1.is_finite() && (0.0..=1.0).contains(&self.p_x1)) {
            return Err(ConfigError::InputBias(self.p_x1));
        }
        if !(self.background_power_ratio.is_finite() && self.background_power_ratio >= 0.0) {
            return Err(ConfigError::BackgroundRatio(self.background_power_ratio));
        }
        Ok(())
    }
}

impl HomodyneConfig {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.lo_phase.is_finite() {
            return Err(ConfigError::LoPhase(self.lo_phase));
        }
        if self.shot_variance != 1.0 {
            return Err(ConfigError::ShotVariance(self.shot_variance));
        }
        if !(self.electronic_noise_variance.is_finite() && self.electronic_noise_variance >= 0.0) {
            return Err(ConfigError::ElectronicNoise(self.electronic_noise_variance));
        }
        if !self.threshold.is_finite() {
            return Err(ConfigError::Threshold(self.threshold));
        }
        Ok(())
    }

    /// Total quadrature variance seen by the detector.
    pub fn total_variance(&self) -> f64 {
        self.shot_variance + self.electronic_noise_variance
    }
}

impl DriftState {
    /// Drift-free state at t = 0.
    pub fn neutral() -> Self {
        DriftState {
            phase_offset: 0.0,
            polarization_loss: 1.0,
            time: 0.0,
        }
    }
}

impl DriftParams {
    /// Parameters that freeze the interferometer (no evolution).
    pub fn frozen() -> Self {
        DriftParams {
            phase_diffusion: 0.0,
            polarization_decay_time: 0.0,
            polarization_floor: 1.0,
        }
    }
}

/// Field amplitude leaving the source for input bit `x`.
///
/// Vacuum (`x = 0`) is exactly zero; the coherent pulse has magnitude
/// `√(μ · polarization_loss)` and carries the accumulated drift phase.
pub fn pulse_amplitude(src: &SourceConfig, x: bool, drift: &DriftState) -> Complex64 {
    if !x {
        return Complex64::new(0.0, 0.0);
    }
    let mag = libm::sqrt(src.mu * drift.polarization_loss);
    Complex64::from_polar(mag, drift.phase_offset)
}

/// Mean of the quadrature distribution for a given amplitude.
pub fn quadrature_mean(amp: Complex64, hd: &HomodyneConfig) -> f64 {
    if amp.norm_sqr() == 0.0 {
        return 0.0;
    }
    2.0 * amp.norm() * libm::cos(hd.lo_phase + amp.arg())
}

/// Draws one quadrature value: Gaussian with mean [`quadrature_mean`] and
/// variance `shot_variance + electronic_noise_variance`.
///
/// Consumes exactly two 64-bit words from `rng` regardless of inputs, so
/// streams can be advanced by a fixed amount per pulse.
pub fn sample_quadrature(
    amp: Complex64,
    hd: &HomodyneConfig,
    rng: &mut ChaCha12Rng,
) -> QuadratureSample {
    let mean = quadrature_mean(amp, hd);
    let sigma = libm::sqrt(hd.total_variance());
    QuadratureSample {
        value: mean + sigma * crate::rng::standard_normal(rng),
    }
}

/// Closed-form click probability `p(b = 1)`: upper-tail mass of the
/// quadrature Gaussian above the threshold. Serves as the independent
/// oracle for [`sample_quadrature`] + thresholding.
pub fn analytic_click_prob(amp: Complex64, hd: &HomodyneConfig) -> f64 {
    let mean = quadrature_mean(amp, hd);
    let sigma = libm::sqrt(hd.total_variance());
    math::normal_tail((hd.threshold - mean) / sigma)
}

/// Analytic conditional click probabilities `(p(1|x=0), p(1|x=1))` for the
/// current drift state.
pub fn conditional_click_probs(
    src: &SourceConfig,
    hd: &HomodyneConfig,
    drift: &DriftState,
) -> (f64, f64) {
    let p0 = analytic_click_prob(pulse_amplitude(src, false, drift), hd);
    let p1 = analytic_click_prob(pulse_amplitude(src, true, drift), hd);
    (p0, p1)
}

/// Advances the interferometer drift by `dt` seconds.
///
/// The phase performs a random walk with variance `phase_diffusion · dt`;
/// the visibility decays exponentially toward `polarization_floor`.
/// Consumes exactly two 64-bit words from `rng` regardless of parameters.
pub fn step_drift(
    drift: &DriftState,
    dt: f64,
    params: &DriftParams,
    rng: &mut ChaCha12Rng,
) -> DriftState {
    debug_assert!(dt > 0.0, "drift step must advance time");
    let kick = libm::sqrt(params.phase_diffusion * dt) * crate::rng::standard_normal(rng);
    let loss = if params.polarization_decay_time > 0.0 {
        let decay = libm::exp(-dt / params.polarization_decay_time);
        params.polarization_floor + (drift.polarization_loss - params.polarization_floor) * decay
    } else {
        drift.polarization_loss
    };
    DriftState {
        phase_offset: drift.phase_offset + kick,
        polarization_loss: loss.clamp(0.0, 1.0),
        time: drift.time + dt,
    }
}

/// Probability that adding electronic noise of standard deviation
/// `sigma_e` to a shot-noise-limited sample (mean `mean`, variance 1) moves
/// it across the threshold `tau`.
///
/// This is the operational meaning of a quoted "noise probability": the
/// chance that detector noise alone flips the discriminated bit.
fn flip_probability_one_input(mean: f64, tau: f64, sigma_e: f64) -> f64 {
    if sigma_e <= 0.0 {
        return 0.0;
    }
    let integrand = |q: f64| math::normal_pdf(q - mean) * math::normal_cdf(-libm::fabs(q - tau) / sigma_e);
    // The |q − τ| kink would slow the adaptive quadrature; split there.
    let lo = (mean - 10.0).min(tau - 10.0 * sigma_e.max(1.0));
    let hi = (mean + 10.0).max(tau + 10.0 * sigma_e.max(1.0));
    let tol = 1e-13;
    if tau <= lo || tau >= hi {
        math::integrate(integrand, lo, hi, tol)
    } else {
        math::integrate(integrand, lo, tau, tol) + math::integrate(integrand, tau, hi, tol)
    }
}

/// Input-averaged bit-flip probability caused by electronic noise at the
/// operating point `(src, lo_phase, tau)`.
pub fn flip_probability(src: &SourceConfig, lo_phase: f64, tau: f64, sigma_e: f64) -> f64 {
    let hd = HomodyneConfig {
        lo_phase,
        shot_variance: 1.0,
        electronic_noise_variance: 0.0,
        threshold: tau,
    };
    let drift = DriftState::neutral();
    let m0 = quadrature_mean(pulse_amplitude(src, false, &drift), &hd);
    let m1 = quadrature_mean(pulse_amplitude(src, true, &drift), &hd);
    (1.0 - src.p_x1) * flip_probability_one_input(m0, tau, sigma_e)
        + src.p_x1 * flip_probability_one_input(m1, tau, sigma_e)
}

/// Inverts [`flip_probability`]: finds the electronic noise **variance**
/// that produces the requested flip probability at the operating point.
///
/// The flip probability grows monotonically from 0 (no noise) toward 1/2
/// (noise dominates), so requests outside (0, 1/2) are rejected as
/// [`RootError::NoSignChange`]. A request of exactly 0 returns variance 0.
pub fn electronic_noise_variance_for_flip(
    src: &SourceConfig,
    lo_phase: f64,
    tau: f64,
    target_flip: f64,
) -> Result<f64, RootError> {
    if target_flip == 0.0 {
        return Ok(0.0);
    }
    if !(target_flip > 0.0 && target_flip < 0.5) {
        return Err(RootError::NoSignChange);
    }
    let f = |sigma_e: f64| flip_probability(src, lo_phase, tau, sigma_e) - target_flip;
    let sigma = math::bisect(f, 1e-9, 64.0, 1e-12, 0.0, 200)?;
    Ok(sigma * sigma)
}
