//! The two operator loops: threshold balancing and phase feedback.
//!
//! Threshold tuning automates the manual procedure of picking the
//! discrimination level τ so the two conditionals are balanced,
//! `p(0|0) = p(1|1)`, by bisection on the balance function
//! `g(τ) = p(0|0) − p(1|1)`. Phase feedback is a scalar hill climber on the
//! certified entropy of the previous block — the only quantity the real
//! loop gets to observe per block.

use alloc::vec::Vec;

use crate::math::{self, RootError};

/// Settings for the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdTuner {
    /// Maximum allowed |p(0|0) − p(1|1)| at the returned τ.
    pub target_balance_tolerance: f64,
    /// τ search interval (finite, ordered).
    pub search_bounds: (f64, f64),
    /// Bisection iteration budget.
    pub max_iterations: u32,
}

impl ThresholdTuner {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<(), TuneError> {
        let (lo, hi) = self.search_bounds;
        if !(self.target_balance_tolerance > 0.0 && self.target_balance_tolerance.is_finite()) {
            return Err(TuneError::BadTuner);
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(TuneError::BadTuner);
        }
        Ok(())
    }
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    /// The selected discrimination level.
    pub threshold: f64,
    /// Achieved |p(0|0) − p(1|1)| (meaningless when `degenerate`).
    pub balance_residual: f64,
    /// True when the two conditional distributions are indistinguishable
    /// inside the search bounds, so no τ is better than any other.
    pub degenerate: bool,
}

/// Why a threshold search failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneError {
    /// Tuner fields violate their invariants.
    BadTuner,
    /// The balance function has no sign change inside the bounds.
    NoCrossing,
    /// The iteration budget ran out before reaching the tolerance.
    NonConvergence,
}

impl core::fmt::Display for TuneError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TuneError::BadTuner => write!(f, "tuner settings violate their invariants"),
            TuneError::NoCrossing => {
                write!(f, "balance function p(0|0) - p(1|1) has no sign change in the search bounds")
            }
            TuneError::NonConvergence => {
                write!(f, "threshold search did not reach the balance tolerance within the iteration budget")
            }
        }
    }
}

impl core::error::Error for TuneError {}

/// Finds τ with `|p(0|0) − p(1|1)| ≤ tolerance` by bisection.
///
/// `prob_model` maps τ to `(p(1|x=0), p(1|x=1))`; with the Gaussian detector
/// model both conditionals are monotone in τ, so the balance function
/// crosses zero at most once.
///
/// Degenerate case: when the model gives `p(1|0) = p(1|1)` at every probed
/// τ (e.g. μ = 0, identical conditional distributions), the inputs carry no
/// signal, *every* τ is equally balanced in the only sense that matters
/// (neither conditional is distinguishable), and the midpoint of the bounds
/// is returned with the `degenerate` flag set and the tolerance waived.
pub fn tune_threshold<F>(tuner: &ThresholdTuner, prob_model: F) -> Result<TuneResult, TuneError>
where
    F: Fn(f64) -> (f64, f64),
{
    tuner.validate()?;
    let (lo, hi) = tuner.search_bounds;

    // Probe for the degenerate (signal-free) case before bisecting.
    let mut degenerate = true;
    for k in 0..=4 {
        let tau = lo + (hi - lo) * k as f64 / 4.0;
        let (p10, p11) = prob_model(tau);
        if libm::fabs(p10 - p11) >= 1e-12 {
            degenerate = false;
            break;
        }
    }
    if degenerate {
        return Ok(TuneResult {
            threshold: 0.5 * (lo + hi),
            balance_residual: 0.0,
            degenerate: true,
        });
    }

    let balance = |tau: f64| {
        let (p10, p11) = prob_model(tau);
        (1.0 - p10) - p11
    };
    let tau = math::bisect(balance, lo, hi, 1e-15, 0.0, tuner.max_iterations).map_err(
        |e| match e {
            RootError::NoSignChange => TuneError::NoCrossing,
            _ => TuneError::NonConvergence,
        },
    )?;
    let residual = libm::fabs(balance(tau));
    if residual > tuner.target_balance_tolerance {
        return Err(TuneError::NonConvergence);
    }
    Ok(TuneResult {
        threshold: tau,
        balance_residual: residual,
        degenerate: false,
    })
}

/// Maximum number of past metric values a controller retains.
pub const CONTROLLER_HISTORY_CAP: usize = 16;

/// Scalar hill climber driving the interferometer phase actuator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseController {
    /// Current phase correction in radians (subtracted from the drift).
    pub actuator_phase: f64,
    /// Current step magnitude in radians (> 0).
    pub step_size: f64,
    /// Recent per-block metric values, oldest first, capped at
    /// [`CONTROLLER_HISTORY_CAP`].
    pub history: Vec<f64>,
    /// Current search direction, +1 or −1.
    pub direction: f64,
    /// Lower bound on `step_size` under repeated halving.
    pub step_floor: f64,
}

impl PhaseController {
    /// Controller at rest: no correction, searching in +direction.
    pub fn new(step_size: f64, step_floor: f64) -> Self {
        PhaseController {
            actuator_phase: 0.0,
            step_size,
            history: Vec::new(),
            direction: 1.0,
            step_floor,
        }
    }
}

/// One hill-climbing update from the latest per-block metric (certified
/// entropy of the block just finished).
///
/// If the metric improved on the previous one, the controller keeps walking
/// the same way; otherwise it reverses direction and halves the step (never
/// below the floor). The very first observation counts as an improvement.
/// Pure function: identical inputs give identical outputs.
pub fn phase_feedback_step(ctrl: &PhaseController, metric: f64) -> PhaseController {
    debug_assert!(metric.is_finite(), "controller metric must be finite");
    let improved = match ctrl.history.last() {
        None => true,
        Some(&prev) => metric > prev,
    };
    let (direction, step_size) = if improved {
        (ctrl.direction, ctrl.step_size)
    } else {
        (-ctrl.direction, (ctrl.step_size * 0.5).max(ctrl.step_floor))
    };
    let mut history = ctrl.history.clone();
    history.push(metric);
    if history.len() > CONTROLLER_HISTORY_CAP {
        history.remove(0);
    }
    PhaseController {
        actuator_phase: ctrl.actuator_phase + direction * step_size,
        step_size,
        history,
        direction,
        step_floor: ctrl.step_floor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_tail;

    fn gaussian_pair(mean0: f64, mean1: f64, sigma: f64) -> impl Fn(f64) -> (f64, f64) {
        move |tau: f64| (normal_tail((tau - mean0) / sigma), normal_tail((tau - mean1) / sigma))
    }

    fn tuner(lo: f64, hi: f64) -> ThresholdTuner {
        ThresholdTuner {
            target_balance_tolerance: 1e-9,
            search_bounds: (lo, hi),
            max_iterations: 200,
        }
    }

    #[test]
    fn symmetric_gaussians_balance_at_zero() {
        let r = tune_threshold(&tuner(-1.0, 1.0), gaussian_pair(-0.3, 0.3, 1.0)).unwrap();
        assert!(r.threshold.abs() < 1e-9, "tau {}", r.threshold);
        assert!(!r.degenerate);
    }

    #[test]
    fn vacuum_coherent_pair_balances_at_midpoint() {
        let r = tune_threshold(&tuner(-0.5, 0.7), gaussian_pair(0.0, 0.2, 1.0)).unwrap();
        assert!((r.threshold - 0.1).abs() < 1e-9, "tau {}", r.threshold);
        assert!(r.balance_residual <= 1e-9);
    }

    #[test]
    fn result_invariant_to_bracket_choice() {
        let model = gaussian_pair(0.0, 0.2, 1.012589);
        let a = tune_threshold(&tuner(-2.0, 2.0), &model).unwrap();
        let b = tune_threshold(&tuner(0.05, 0.3), &model).unwrap();
        assert!((a.threshold - b.threshold).abs() < 1e-8);
    }

    #[test]
    fn degenerate_model_is_flagged() {
        // identical conditionals (μ = 0): every τ equally (un)balanced
        let r = tune_threshold(&tuner(-1.0, 3.0), gaussian_pair(0.0, 0.0, 1.0)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.threshold, 1.0); // bounds midpoint
    }

    #[test]
    fn missing_crossing_is_an_error() {
        // crossing at 0.1 lies outside [1, 2]
        let e = tune_threshold(&tuner(1.0, 2.0), gaussian_pair(0.0, 0.2, 1.0)).unwrap_err();
        assert_eq!(e, TuneError::NoCrossing);
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let mut t = tuner(-1.0, 1.0);
        t.max_iterations = 2; // far too few for 1e-9 tolerance
        let e = tune_threshold(&t, gaussian_pair(0.0, 0.2, 1.0)).unwrap_err();
        assert_eq!(e, TuneError::NonConvergence);
    }

    #[test]
    fn bad_tuner_is_rejected() {
        let mut t = tuner(-1.0, 1.0);
        t.search_bounds = (2.0, 1.0);
        assert_eq!(tune_threshold(&t, gaussian_pair(0.0, 0.2, 1.0)), Err(TuneError::BadTuner));
        let mut t = tuner(-1.0, 1.0);
        t.target_balance_tolerance = 0.0;
        assert_eq!(tune_threshold(&t, gaussian_pair(0.0, 0.2, 1.0)), Err(TuneError::BadTuner));
    }

    #[test]
    fn first_observation_counts_as_improvement() {
        let c0 = PhaseController::new(0.04, 0.005);
        let c1 = phase_feedback_step(&c0, 0.03);
        assert!((c1.actuator_phase - 0.04).abs() < 1e-15);
        assert_eq!(c1.direction, 1.0);
        assert_eq!(c1.history, alloc::vec![0.03]);
    }

    #[test]
    fn worse_metric_reverses_and_halves() {
        let c0 = PhaseController::new(0.04, 0.005);
        let c1 = phase_feedback_step(&c0, 0.03);
        let c2 = phase_feedback_step(&c1, 0.02); // got worse
        assert_eq!(c2.direction, -1.0);
        assert!((c2.step_size - 0.02).abs() < 1e-15);
        assert!((c2.actuator_phase - (0.04 - 0.02)).abs() < 1e-15);
    }

    #[test]
    fn step_never_falls_below_floor() {
        let mut c = PhaseController::new(0.04, 0.005);
        // strictly decreasing metric: every step is "worse"
        for k in 0..20 {
            c = phase_feedback_step(&c, -(k as f64));
        }
        assert!(c.step_size >= 0.005 - 1e-15);
    }

    #[test]
    fn history_is_capped() {
        let mut c = PhaseController::new(0.04, 0.005);
        for k in 0..40 {
            c = phase_feedback_step(&c, k as f64 * 0.001);
        }
        assert_eq!(c.history.len(), CONTROLLER_HISTORY_CAP);
        // oldest dropped: first retained metric is step 40-16 = 24
        assert!((c.history[0] - 0.024).abs() < 1e-15);
    }

    #[test]
    fn controller_update_is_pure() {
        let mut c = PhaseController::new(0.04, 0.005);
        c = phase_feedback_step(&c, 0.031);
        c = phase_feedback_step(&c, 0.028);
        let a = phase_feedback_step(&c, 0.035);
        let b = phase_feedback_step(&c, 0.035);
        assert_eq!(a, b);
    }

    #[test]
    fn improving_metrics_keep_direction() {
        let mut c = PhaseController::new(0.04, 0.005);
        for k in 0..5 {
            c = phase_feedback_step(&c, k as f64 * 0.01);
        }
        assert_eq!(c.direction, 1.0);
        assert!((c.actuator_phase - 5.0 * 0.04).abs() < 1e-12);
    }
}
