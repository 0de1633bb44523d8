//! Finite-size conversion and entropy accounting.
//!
//! A certified per-pulse Shannon bound `h` becomes extractable randomness
//! only after finite-statistics penalties: over a block of `n` pulses the
//! worst-case smooth min-entropy is
//!
//! ```text
//! H_min = n·(h − c·√(L/n) − d·(L/n)),   L = log₂(2/ε),
//! ```
//!
//! clamped below at zero. The constants `c`, `d` come from the finite-key
//! analysis framework and are mandatory configuration — there are no hidden
//! defaults. The smoothing parameter ε′ is carried alongside ε so reports
//! document both, but the correction itself uses ε.
//!
//! The module also accounts for the randomness *consumed* by the biased
//! input choices, so a net balance `h_out − H_in(p_x1)` can be reported.

use crate::math::LN_2;

/// Inputs to the finite-size conversion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FiniteSizeParams {
    /// Block length in pulses (≥ 1).
    pub n: u64,
    /// Failure/smoothing parameter ε ∈ (0, 1).
    pub epsilon: f64,
    /// Smooth min-entropy parameter ε′ ∈ (0, 1) (documented alongside ε).
    pub epsilon_prime: f64,
    /// First-order correction constant (≥ 0, config-supplied).
    pub c: f64,
    /// Second-order correction constant (≥ 0, config-supplied).
    pub d: f64,
}

/// A rejected finite-size parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiniteSizeError {
    /// n must be ≥ 1.
    BlockLength(u64),
    /// ε must lie strictly inside (0, 1).
    Epsilon(f64),
    /// ε′ must lie strictly inside (0, 1).
    EpsilonPrime(f64),
    /// c and d must be finite and ≥ 0.
    Constant(f64),
    /// h must lie in [0, 1].
    EntropyRange(f64),
    /// p_x1 must lie strictly inside (0, 1) for input-entropy accounting.
    InputBias(f64),
}

impl core::fmt::Display for FiniteSizeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FiniteSizeError::BlockLength(n) => write!(f, "block length must be >= 1, got {n}"),
            FiniteSizeError::Epsilon(e) => write!(f, "epsilon must lie in (0, 1), got {e}"),
            FiniteSizeError::EpsilonPrime(e) => {
                write!(f, "epsilon_prime must lie in (0, 1), got {e}")
            }
            FiniteSizeError::Constant(v) => {
                write!(f, "correction constants must be finite and >= 0, got {v}")
            }
            FiniteSizeError::EntropyRange(h) => {
                write!(f, "per-pulse entropy must lie in [0, 1], got {h}")
            }
            FiniteSizeError::InputBias(p) => {
                write!(f, "p_x1 must lie strictly inside (0, 1), got {p}")
            }
        }
    }
}

impl core::error::Error for FiniteSizeError {}

impl FiniteSizeParams {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<(), FiniteSizeError> {
        if self.n < 1 {
            return Err(FiniteSizeError::BlockLength(self.n));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(FiniteSizeError::Epsilon(self.epsilon));
        }
        if !(self.epsilon_prime > 0.0 && self.epsilon_prime < 1.0) {
            return Err(FiniteSizeError::EpsilonPrime(self.epsilon_prime));
        }
        for v in [self.c, self.d] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FiniteSizeError::Constant(v));
            }
        }
        Ok(())
    }

    /// `L = log₂(2/ε)`.
    pub fn security_log(&self) -> f64 {
        libm::log(2.0 / self.epsilon) / LN_2
    }

    /// Per-pulse penalty `c·√(L/n) + d·(L/n)`.
    pub fn per_pulse_penalty(&self) -> f64 {
        let ratio = self.security_log() / self.n as f64;
        self.c * libm::sqrt(ratio) + self.d * ratio
    }
}

/// Worst-case smooth min-entropy of a block, in total bits:
/// `max(0, n·(h − c·√(L/n) − d·L/n))` with `L = log₂(2/ε)`.
pub fn finite_size_min_entropy(h: f64, fs: &FiniteSizeParams) -> Result<f64, FiniteSizeError> {
    fs.validate()?;
    if !(h.is_finite() && (0.0..=1.0).contains(&h)) {
        return Err(FiniteSizeError::EntropyRange(h));
    }
    let total = fs.n as f64 * (h - fs.per_pulse_penalty());
    Ok(total.max(0.0))
}

/// Min-entropy of the input process per pulse: `−log₂ max(p, 1−p)`.
pub fn input_min_entropy(p_x1: f64) -> Result<f64, FiniteSizeError> {
    if !(p_x1 > 0.0 && p_x1 < 1.0) {
        return Err(FiniteSizeError::InputBias(p_x1));
    }
    Ok(-libm::log(p_x1.max(1.0 - p_x1)) / LN_2)
}

/// Measure used for the input-side entropy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMeasure {
    /// `−log₂ max(p, 1−p)` — the default: the input bits are themselves
    /// drawn from a randomness supply, and min-entropy is what that supply
    /// must provide.
    #[default]
    MinEntropy,
    /// Binary Shannon entropy `H₂(p)` — sensitivity-analysis variant.
    Shannon,
}

/// Net randomness balance per pulse: `h_out − H_in(p_x1)` with the
/// min-entropy input measure.
pub fn net_entropy(p_x1: f64, h_out: f64) -> Result<f64, FiniteSizeError> {
    net_entropy_with_measure(p_x1, h_out, InputMeasure::MinEntropy)
}

/// [`net_entropy`] with an explicit input measure.
pub fn net_entropy_with_measure(
    p_x1: f64,
    h_out: f64,
    measure: InputMeasure,
) -> Result<f64, FiniteSizeError> {
    if !(p_x1 > 0.0 && p_x1 < 1.0) {
        return Err(FiniteSizeError::InputBias(p_x1));
    }
    let h_in = match measure {
        InputMeasure::MinEntropy => input_min_entropy(p_x1)?,
        InputMeasure::Shannon => crate::math::binary_entropy(p_x1),
    };
    Ok(h_out - h_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, epsilon: f64) -> FiniteSizeParams {
        FiniteSizeParams {
            n,
            epsilon,
            epsilon_prime: epsilon,
            c: 2.0,
            d: 1.0,
        }
    }

    #[test]
    fn frozen_fixture_evaluates_exactly() {
        // Hand evaluation: h = 0.05, n = 1.25e7, ε = 1e-10, c = 2, d = 1
        // gives L = log₂(2·10¹⁰) = 34.219280948873624 and total bits
        // 583601.9795464838; the per-pulse penalty is 0.003311841636281295.
        let fs = params(12_500_000, 1e-10);
        assert!((fs.security_log() - 34.219280948873624).abs() < 1e-12);
        assert!((fs.per_pulse_penalty() - 0.003311841636281295).abs() < 1e-15);
        let total = finite_size_min_entropy(0.05, &fs).unwrap();
        assert!((total - 583601.9795464838).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn zero_constants_give_exactly_nh() {
        let fs = FiniteSizeParams {
            c: 0.0,
            d: 0.0,
            ..params(1000, 1e-10)
        };
        assert_eq!(finite_size_min_entropy(0.25, &fs).unwrap(), 250.0);
    }

    #[test]
    fn converges_to_h_per_pulse() {
        let h = 0.0371100981587484;
        let mut n = 1_000u64;
        let mut prev_per_pulse = -1.0;
        while n <= 1_000_000_000_000 {
            let fs = params(n, 1e-10);
            let per_pulse = finite_size_min_entropy(h, &fs).unwrap() / n as f64;
            assert!(per_pulse >= prev_per_pulse - 1e-15, "monotone in n");
            prev_per_pulse = per_pulse;
            n *= 1000;
        }
        assert!(
            (prev_per_pulse - h).abs() < 1e-4,
            "n = 1e12 reaches h within 1e-4, got {prev_per_pulse}"
        );
    }

    #[test]
    fn result_bounded_by_nh_and_monotone_in_epsilon() {
        let h = 0.05;
        let mut prev = -1.0;
        for eps_exp in [-14, -12, -10, -8, -6, -4] {
            let fs = params(1_000_000, libm::pow(10.0, eps_exp as f64));
            let total = finite_size_min_entropy(h, &fs).unwrap();
            assert!(total <= h * 1_000_000.0);
            assert!(total >= prev, "larger epsilon must not reduce the output");
            prev = total;
        }
    }

    #[test]
    fn clamps_at_zero_for_hopeless_blocks() {
        let fs = params(100, 1e-10);
        assert_eq!(finite_size_min_entropy(0.01, &fs).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            finite_size_min_entropy(0.05, &params(0, 1e-10)),
            Err(FiniteSizeError::BlockLength(0))
        ));
        assert!(matches!(
            finite_size_min_entropy(0.05, &params(10, 0.0)),
            Err(FiniteSizeError::Epsilon(_))
        ));
        assert!(matches!(
            finite_size_min_entropy(0.05, &params(10, 1.5)),
            Err(FiniteSizeError::Epsilon(_))
        ));
        assert!(matches!(
            finite_size_min_entropy(1.5, &params(10, 1e-10)),
            Err(FiniteSizeError::EntropyRange(_))
        ));
        let mut fs = params(10, 1e-10);
        fs.c = -1.0;
        assert!(matches!(
            finite_size_min_entropy(0.5, &fs),
            Err(FiniteSizeError::Constant(_))
        ));
        let mut fs = params(10, 1e-10);
        fs.epsilon_prime = 1.0;
        assert!(matches!(
            finite_size_min_entropy(0.5, &fs),
            Err(FiniteSizeError::EpsilonPrime(_))
        ));
    }

    #[test]
    fn input_entropy_frozen_value() {
        // −log₂(0.84) at the experiment's bias
        let h_in = input_min_entropy(0.16).unwrap();
        assert!((h_in - 0.25153876699596445).abs() < 1e-15);
        // symmetric bias is maximal
        assert!((input_min_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn net_entropy_examples() {
        assert!((net_entropy(0.5, 1.0).unwrap() - 0.0).abs() < 1e-15);
        let h_in = input_min_entropy(0.16).unwrap();
        assert!((net_entropy(0.16, h_in).unwrap()).abs() < 1e-15);
        assert!((net_entropy(0.16, 0.3).unwrap() - (0.3 - 0.25153876699596445)).abs() < 1e-15);
        assert!(net_entropy(0.0, 0.5).is_err());
        assert!(net_entropy(1.0, 0.5).is_err());
    }

    #[test]
    fn shannon_variant_uses_binary_entropy() {
        let d = net_entropy_with_measure(0.16, 0.5, InputMeasure::Shannon).unwrap();
        let h2 = crate::math::binary_entropy(0.16);
        assert!((d - (0.5 - h2)).abs() < 1e-15);
    }
}
