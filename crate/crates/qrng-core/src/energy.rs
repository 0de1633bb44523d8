//! Trusted-side energy accounting.
//!
//! The one physical assumption the certification leans on is the bound ω on
//! the mean photon number leaving the source. This module implements the
//! trusted half of that assumption: converting power-meter readings into a
//! mean-photon-number upper bound
//!
//! ```text
//! μ̄ = (p_in · η · Δt) / (h · ν_min · f_rep),
//! ```
//!
//! and continuously verifying `μ̄ ≤ ω` window by window, invalidating any
//! acquisition block that overlaps a violating window. Certified-bit
//! accounting downstream counts valid blocks only.
//!
//! η is the monitor-to-output power ratio exactly as the operator supplies
//! it; the formula is evaluated verbatim with Planck's constant at its
//! exact SI value.

use crate::acquisition::Block;
use alloc::vec::Vec;

/// Planck's constant, exact SI value (J·s).
pub const PLANCK_H: f64 = 6.62607015e-34;

/// One power-meter observation with the conversion context.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyReading {
    /// Optical power at the monitor tap (W).
    pub p_in: f64,
    /// Monitor-to-output power ratio (dimensionless).
    pub eta: f64,
    /// Modulation duration (s).
    pub delta_t: f64,
    /// Lower bound on the optical frequency (Hz).
    pub nu_min: f64,
    /// Pulse repetition rate (Hz).
    pub f_rep: f64,
}

/// A rejected energy-accounting parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyError {
    /// A reading field must be finite and > 0.
    NonPositiveField { name: &'static str, value: f64 },
    /// The bound ω must be finite and > 0.
    Omega(f64),
    /// The monitoring window length must be finite and > 0.
    WindowLength(f64),
}

impl core::fmt::Display for EnergyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EnergyError::NonPositiveField { name, value } => {
                write!(f, "energy reading field {name} must be > 0, got {value}")
            }
            EnergyError::Omega(w) => write!(f, "energy bound omega must be > 0, got {w}"),
            EnergyError::WindowLength(w) => {
                write!(f, "monitoring window length must be > 0, got {w}")
            }
        }
    }
}

impl core::error::Error for EnergyError {}

impl EnergyReading {
    /// Checks that every field is finite and strictly positive.
    pub fn validate(&self) -> Result<(), EnergyError> {
        let fields = [
            ("p_in", self.p_in),
            ("eta", self.eta),
            ("delta_t", self.delta_t),
            ("nu_min", self.nu_min),
            ("f_rep", self.f_rep),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(EnergyError::NonPositiveField { name, value });
            }
        }
        Ok(())
    }
}

/// Mean-photon-number upper bound from a power-meter reading:
/// `μ̄ = (p_in · η · Δt) / (h · ν_min · f_rep)`.
pub fn mean_photon_bound(r: &EnergyReading) -> Result<f64, EnergyError> {
    r.validate()?;
    Ok((r.p_in * r.eta * r.delta_t) / (PLANCK_H * r.nu_min * r.f_rep))
}

/// Inverse of [`mean_photon_bound`] in `p_in`: the monitor power that would
/// produce the given μ̄ with the reading's other fields. Used to simulate
/// realistic meter readings from a known source strength.
pub fn power_for_mean_photons(mu_bar: f64, r: &EnergyReading) -> f64 {
    mu_bar * PLANCK_H * r.nu_min * r.f_rep / (r.eta * r.delta_t)
}

/// The energy-monitoring record of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyLog {
    /// `(t_seconds, μ̄)` per monitoring window, in time order.
    pub series: Vec<(f64, f64)>,
    /// The bound every window is checked against.
    pub omega: f64,
    /// Start timestamps of exactly the windows with `μ̄ > ω`.
    pub violations: Vec<f64>,
}

impl EnergyLog {
    /// True iff the window starting at `t` violated the bound.
    pub fn is_violation(&self, t: f64) -> bool {
        self.violations.contains(&t)
    }
}

/// Checks per-window mean-photon estimates against ω and invalidates every
/// block overlapping a violating window.
///
/// `estimates` are `(window start time s, μ̄)` pairs; each window spans
/// `[t, t + window_seconds)`. A violation is strict: `μ̄ > ω` (the bound
/// itself is an inequality `≤ ω`, so equality is compliant). Block validity
/// only ever flips true→false, so re-running the monitor on the same data
/// is idempotent, and blocks invalidated for other reasons stay invalid.
pub fn monitor(
    estimates: &[(f64, f64)],
    window_seconds: f64,
    omega: f64,
    blocks: &mut [Block],
) -> Result<EnergyLog, EnergyError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(EnergyError::Omega(omega));
    }
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(EnergyError::WindowLength(window_seconds));
    }
    let mut violations = Vec::new();
    for &(t, mu_bar) in estimates {
        if mu_bar > omega {
            violations.push(t);
            for block in blocks.iter_mut() {
                let block_end = block.start_time + block.duration;
                let window_end = t + window_seconds;
                if t < block_end && block.start_time < window_end {
                    block.valid = false;
                }
            }
        }
    }
    Ok(EnergyLog {
        series: estimates.to_vec(),
        omega,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Tally;
    use crate::bits::PackedBits;

    fn reading(p_in: f64, eta: f64, delta_t: f64, nu_min: f64, f_rep: f64) -> EnergyReading {
        EnergyReading {
            p_in,
            eta,
            delta_t,
            nu_min,
            f_rep,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn frozen_conversion_fixtures() {
        // Hand-evaluated through the printed formula with the exact SI
        // Planck constant.
        let cases = [
            (
                reading(2.0023e-7, 1.0, 80e-9, 193.4e12, 12.5e6),
                0.009999922222783803,
            ),
            (
                reading(5.0e-7, 0.5, 80e-9, 193.4e12, 12.5e6),
                0.012485544402416974,
            ),
            (
                reading(1.2e-6, 0.25, 40e-9, 229.2e12, 25e6),
                0.003160607706056863,
            ),
        ];
        for (r, expected) in cases {
            let mu = mean_photon_bound(&r).unwrap();
            assert!(rel_close(mu, expected, 1e-12), "got {mu}, want {expected}");
        }
    }

    #[test]
    fn linear_in_power_and_eta() {
        let base = reading(2.0023e-7, 0.5, 80e-9, 193.4e12, 12.5e6);
        let mu = mean_photon_bound(&base).unwrap();
        let double_eta = reading(base.p_in, 1.0, base.delta_t, base.nu_min, base.f_rep);
        assert!(rel_close(mean_photon_bound(&double_eta).unwrap(), 2.0 * mu, 1e-15));
        let triple_p = reading(3.0 * base.p_in, base.eta, base.delta_t, base.nu_min, base.f_rep);
        assert!(rel_close(mean_photon_bound(&triple_p).unwrap(), 3.0 * mu, 1e-15));
    }

    #[test]
    fn monotone_in_each_field() {
        let base = reading(2.0e-7, 0.5, 80e-9, 193.4e12, 12.5e6);
        let mu = mean_photon_bound(&base).unwrap();
        let bump = 1.7;
        let mut up = base;
        up.p_in *= bump;
        assert!(mean_photon_bound(&up).unwrap() > mu);
        let mut up = base;
        up.eta *= bump;
        assert!(mean_photon_bound(&up).unwrap() > mu);
        let mut up = base;
        up.delta_t *= bump;
        assert!(mean_photon_bound(&up).unwrap() > mu);
        let mut down = base;
        down.nu_min *= bump;
        assert!(mean_photon_bound(&down).unwrap() < mu);
        let mut down = base;
        down.f_rep *= bump;
        assert!(mean_photon_bound(&down).unwrap() < mu);
    }

    #[test]
    fn rejects_non_positive_fields() {
        let base = reading(2.0e-7, 0.5, 80e-9, 193.4e12, 12.5e6);
        for bad in [0.0, -1.0] {
            for i in 0..5 {
                let mut r = base;
                match i {
                    0 => r.p_in = bad,
                    1 => r.eta = bad,
                    2 => r.delta_t = bad,
                    3 => r.nu_min = bad,
                    _ => r.f_rep = bad,
                }
                assert!(matches!(
                    mean_photon_bound(&r),
                    Err(EnergyError::NonPositiveField { .. })
                ));
            }
        }
    }

    #[test]
    fn power_inversion_round_trips() {
        let template = reading(1.0, 0.5, 80e-9, 193.4e12, 12.5e6);
        for mu in [1e-4, 0.01, 0.045, 1.0] {
            let p = power_for_mean_photons(mu, &template);
            let r = reading(p, template.eta, template.delta_t, template.nu_min, template.f_rep);
            let back = mean_photon_bound(&r).unwrap();
            assert!(rel_close(back, mu, 1e-12), "mu {mu} -> {back}");
        }
    }

    fn block_at(start: f64, duration: f64) -> Block {
        Block {
            inputs: PackedBits::new(),
            outputs: PackedBits::new(),
            tally: Tally::new(),
            duration,
            start_time: start,
            energy_estimate: 0.0,
            valid: true,
        }
    }

    #[test]
    fn quiet_run_has_no_violations() {
        let mut blocks = [block_at(0.0, 1.0), block_at(1.0, 1.0)];
        let estimates = [(0.0, 0.009), (1.0, 0.0104)];
        let log = monitor(&estimates, 1.0, 0.0105, &mut blocks).unwrap();
        assert!(log.violations.is_empty());
        assert!(blocks.iter().all(|b| b.valid));
        assert_eq!(log.series.len(), 2);
    }

    #[test]
    fn boundary_equality_is_compliant() {
        let mut blocks = [block_at(0.0, 1.0)];
        let log = monitor(&[(0.0, 0.012)], 1.0, 0.012, &mut blocks).unwrap();
        assert!(log.violations.is_empty());
        assert!(blocks[0].valid);
    }

    #[test]
    fn injected_violation_invalidates_exactly_the_overlapping_block() {
        let mut blocks = [block_at(0.0, 1.0), block_at(1.0, 1.0), block_at(2.0, 1.0)];
        // Window [1.2, 2.2) straddles blocks 1 and 2; block 0 is clear.
        let estimates = [(0.0, 0.01), (1.2, 0.0132)];
        let log = monitor(&estimates, 1.0, 0.012, &mut blocks).unwrap();
        assert_eq!(log.violations, alloc::vec![1.2]);
        assert!(log.is_violation(1.2));
        assert!(!log.is_violation(0.0));
        assert!(blocks[0].valid);
        assert!(!blocks[1].valid);
        assert!(!blocks[2].valid);
    }

    #[test]
    fn window_aligned_violation_touches_one_block() {
        let mut blocks = [block_at(0.0, 1.0), block_at(1.0, 1.0)];
        let log = monitor(&[(0.0, 1.1 * 0.012)], 1.0, 0.012, &mut blocks).unwrap();
        assert_eq!(log.violations.len(), 1);
        assert!(!blocks[0].valid);
        assert!(blocks[1].valid, "half-open window must not leak into the next block");
    }

    #[test]
    fn monitor_is_idempotent_and_never_revalidates() {
        let mut blocks = [block_at(0.0, 1.0), block_at(1.0, 1.0)];
        blocks[1].valid = false; // invalidated by some other check
        let estimates = [(0.0, 0.02), (1.0, 0.001)];
        let first = monitor(&estimates, 1.0, 0.012, &mut blocks).unwrap();
        let validity: Vec<bool> = blocks.iter().map(|b| b.valid).collect();
        let second = monitor(&estimates, 1.0, 0.012, &mut blocks).unwrap();
        assert_eq!(first, second);
        assert_eq!(validity, blocks.iter().map(|b| b.valid).collect::<Vec<_>>());
        assert!(!blocks[0].valid);
        assert!(!blocks[1].valid, "clean window must not flip false back to true");
    }

    #[test]
    fn rejects_bad_monitor_parameters() {
        let mut blocks = [];
        assert!(matches!(
            monitor(&[(0.0, 0.01)], 1.0, 0.0, &mut blocks),
            Err(EnergyError::Omega(_))
        ));
        assert!(matches!(
            monitor(&[(0.0, 0.01)], 0.0, 0.012, &mut blocks),
            Err(EnergyError::WindowLength(_))
        ));
    }
}
