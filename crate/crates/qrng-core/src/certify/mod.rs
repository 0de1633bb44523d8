//! Entropy certification against an untrusted measurement.
//!
//! The observed data are the two conditional click probabilities
//! `p(b=1|x)` and an energy bound ω on the states leaving the source. An
//! adversary may choose any classical variable λ with any states ρ_x^λ and
//! any two-outcome measurements M_b^λ that reproduce the observations while
//! respecting the energy bound; the certified quantity is a lower bound on
//! the conditional Shannon entropy `H(B|X,Λ)` over *all* such realizations.
//!
//! The module is split into:
//! - [`fock`]: dense complex matrices and the eigensolver,
//! - [`bound`]: the certified lower bound (reduced convex program with a
//!   verified dual witness),
//! - [`attack`]: an explicit-attack oracle providing achievable upper
//!   bounds, used to validate soundness,
//! - [`finite`]: finite-size conversion to smooth min-entropy and the
//!   input/output entropy accounting,
//! - [`curve`]: analytic sweeps of certified entropy over operating points.

pub mod fock;

mod attack;
mod bound;
mod curve;
mod finite;

pub use attack::{
    best_attack, best_attack_with_tolerance, conditional_entropy_of_realization,
    realization_predictions, AttackError, DEFAULT_MATCH_TOLERANCE,
};
pub use bound::{certify_entropy, certify_with_validation, minimal_energy_for_gap};
pub use curve::{entropy_curve, CurveConfig, CurvePoint, OmegaPolicy, SweepVariable};
pub use finite::{
    finite_size_min_entropy, input_min_entropy, net_entropy, net_entropy_with_measure,
    FiniteSizeError, FiniteSizeParams, InputMeasure,
};

use crate::acquisition::CondProbs;
use alloc::vec::Vec;
use fock::CMat;

/// Reading of the energy constraint.
///
/// The constraint couples the per-input state energies
/// `e_x = Σ_λ p(λ)·Tr[ρ_x^λ N]` to the bound ω. `Sum` constrains
/// `Σ_x e_x ≤ ω` (the expression exactly as printed); `Average` constrains
/// `Σ_x p(x)·e_x ≤ ω`. Both are supported; `Sum` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyConvention {
    /// `Σ_x e_x ≤ ω`.
    #[default]
    Sum,
    /// `Σ_x p(x)·e_x ≤ ω`.
    Average,
}

/// Everything the certifier sees: observed correlations, energy bound, and
/// input distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CertInput {
    /// Observed conditional click probabilities.
    pub probs: CondProbs,
    /// Energy bound ω (mean photon number, ≥ 0).
    pub omega: f64,
    /// Probability of input x = 1.
    pub p_x1: f64,
    /// How ω constrains the per-input energies.
    #[serde(default)]
    pub convention: EnergyConvention,
}

/// A rejected certifier input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertInputError {
    /// A conditional probability lies outside [0, 1].
    Probability(f64),
    /// ω must be finite and ≥ 0.
    Omega(f64),
    /// p_x1 must lie in [0, 1].
    InputBias(f64),
}

impl core::fmt::Display for CertInputError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CertInputError::Probability(v) => {
                write!(f, "conditional probability must lie in [0, 1], got {v}")
            }
            CertInputError::Omega(v) => write!(f, "omega must be finite and >= 0, got {v}"),
            CertInputError::InputBias(v) => write!(f, "p_x1 must lie in [0, 1], got {v}"),
        }
    }
}

impl core::error::Error for CertInputError {}

impl CertInput {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<(), CertInputError> {
        for p in [self.probs.p1_given_0, self.probs.p1_given_1] {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(CertInputError::Probability(p));
            }
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(CertInputError::Omega(self.omega));
        }
        if !(self.p_x1.is_finite() && (0.0..=1.0).contains(&self.p_x1)) {
            return Err(CertInputError::InputBias(self.p_x1));
        }
        Ok(())
    }

    /// Observed gap `Δ = |p(1|1) − p(1|0)|`.
    pub fn gap(&self) -> f64 {
        libm::fabs(self.probs.p1_given_1 - self.probs.p1_given_0)
    }

    /// Effective bound on the *sum* of per-input energies implied by ω
    /// under the configured convention (infinite when the average
    /// convention cannot constrain the sum).
    pub fn omega_effective(&self) -> f64 {
        match self.convention {
            EnergyConvention::Sum => self.omega,
            EnergyConvention::Average => {
                let m = self.p_x1.min(1.0 - self.p_x1);
                if m > 0.0 {
                    self.omega / m
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// An explicit classical-quantum strategy: a classical variable λ with
/// weights `p(λ)`, per-(x, λ) states on a truncated Fock space, and a
/// two-outcome POVM per λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// `p(λ)`, non-negative, summing to 1.
    pub weights: Vec<f64>,
    /// `states[λ] = [ρ_0^λ, ρ_1^λ]`.
    pub states: Vec<[CMat; 2]>,
    /// `povms[λ] = [M_0^λ, M_1^λ]` with `M_0 + M_1 = 1`.
    pub povms: Vec<[CMat; 2]>,
}

/// Which realization invariant failed, and by how much.
#[derive(Debug, Clone, PartialEq)]
pub enum RealizationError {
    /// Mismatched list lengths or matrix dimensions.
    Shape,
    /// A weight is negative.
    NegativeWeight { lambda: usize, weight: f64 },
    /// Weights do not sum to 1 within 1e-9.
    WeightSum { sum: f64 },
    /// A state is not Hermitian within tolerance.
    StateNotHermitian { lambda: usize, x: u8, defect: f64 },
    /// A state has trace ≠ 1 within 1e-9.
    StateTrace { lambda: usize, x: u8, trace: f64 },
    /// A state has a negative eigenvalue below −1e-9.
    StateNotPsd { lambda: usize, x: u8, min_eigenvalue: f64 },
    /// A POVM element has a negative eigenvalue below −1e-9.
    PovmNotPsd { lambda: usize, b: u8, min_eigenvalue: f64 },
    /// `M_0 + M_1` deviates from the identity by more than 1e-9.
    PovmCompleteness { lambda: usize, deviation: f64 },
}

impl core::fmt::Display for RealizationError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RealizationError::Shape => write!(f, "weights, states, and povms must agree in length and dimension"),
            RealizationError::NegativeWeight { lambda, weight } => {
                write!(f, "weight p(lambda={lambda}) = {weight} is negative")
            }
            RealizationError::WeightSum { sum } => {
                write!(f, "weights sum to {sum}, expected 1 within 1e-9")
            }
            RealizationError::StateNotHermitian { lambda, x, defect } => {
                write!(f, "state rho_{x}^({lambda}) deviates from Hermitian by {defect}")
            }
            RealizationError::StateTrace { lambda, x, trace } => {
                write!(f, "state rho_{x}^({lambda}) has trace {trace}, expected 1 within 1e-9")
            }
            RealizationError::StateNotPsd { lambda, x, min_eigenvalue } => {
                write!(f, "state rho_{x}^({lambda}) has eigenvalue {min_eigenvalue} below -1e-9")
            }
            RealizationError::PovmNotPsd { lambda, b, min_eigenvalue } => {
                write!(f, "POVM element M_{b}^({lambda}) has eigenvalue {min_eigenvalue} below -1e-9")
            }
            RealizationError::PovmCompleteness { lambda, deviation } => {
                write!(f, "M_0^({lambda}) + M_1^({lambda}) deviates from identity by {deviation}")
            }
        }
    }
}

impl core::error::Error for RealizationError {}

/// Tolerance for all realization invariants.
pub const REALIZATION_TOLERANCE: f64 = 1e-9;

impl Realization {
    /// Space dimension (0 for an empty realization).
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s[0].dim())
    }

    /// Number of λ values.
    pub fn n_atoms(&self) -> usize {
        self.weights.len()
    }

    /// Checks every invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), RealizationError> {
        let n = self.weights.len();
        if self.states.len() != n || self.povms.len() != n || n == 0 {
            return Err(RealizationError::Shape);
        }
        let dim = self.dim();
        let tol = REALIZATION_TOLERANCE;
        let mut sum = 0.0;
        for (lambda, &w) in self.weights.iter().enumerate() {
            if !(w.is_finite() && w >= -tol) {
                return Err(RealizationError::NegativeWeight { lambda, weight: w });
            }
            sum += w;
        }
        if libm::fabs(sum - 1.0) > tol {
            return Err(RealizationError::WeightSum { sum });
        }
        for lambda in 0..n {
            for x in 0..2usize {
                let rho = &self.states[lambda][x];
                if rho.dim() != dim {
                    return Err(RealizationError::Shape);
                }
                let defect = rho.hermiticity_defect();
                if defect > tol {
                    return Err(RealizationError::StateNotHermitian { lambda, x: x as u8, defect });
                }
                let tr = rho.trace().re;
                if libm::fabs(tr - 1.0) > tol {
                    return Err(RealizationError::StateTrace { lambda, x: x as u8, trace: tr });
                }
                if let Err(min) = fock::psd_check(rho, tol) {
                    return Err(RealizationError::StateNotPsd {
                        lambda,
                        x: x as u8,
                        min_eigenvalue: min,
                    });
                }
            }
            let m0 = &self.povms[lambda][0];
            let m1 = &self.povms[lambda][1];
            if m0.dim() != dim || m1.dim() != dim {
                return Err(RealizationError::Shape);
            }
            for (b, m) in [(0u8, m0), (1u8, m1)] {
                if let Err(min) = fock::psd_check(m, tol) {
                    return Err(RealizationError::PovmNotPsd { lambda, b, min_eigenvalue: min });
                }
            }
            let sum_m = m0.add(m1);
            let id = CMat::identity(dim);
            let mut dev = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    let d = (sum_m.at(i, j) - id.at(i, j)).norm();
                    if d > dev {
                        dev = d;
                    }
                }
            }
            if dev > tol {
                return Err(RealizationError::PovmCompleteness { lambda, deviation: dev });
            }
        }
        Ok(())
    }

    /// Per-input energies `e_x = Σ_λ p(λ)·Tr[ρ_x^λ N]`.
    pub fn per_input_energies(&self) -> [f64; 2] {
        let dim = self.dim();
        let n_op = CMat::number_operator(dim);
        let mut e = [0.0f64; 2];
        for (lambda, &w) in self.weights.iter().enumerate() {
            for (x, ex) in e.iter_mut().enumerate() {
                *ex += w * self.states[lambda][x].trace_product(&n_op).re;
            }
        }
        e
    }

    /// Energy under the given convention.
    pub fn energy(&self, convention: EnergyConvention, p_x1: f64) -> f64 {
        let [e0, e1] = self.per_input_energies();
        match convention {
            EnergyConvention::Sum => e0 + e1,
            EnergyConvention::Average => (1.0 - p_x1) * e0 + p_x1 * e1,
        }
    }
}

/// How the certified value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertMethod {
    /// Reduced convex program whose dual witness verified cleanly.
    ConvexProgram,
    /// Dual witness needed damping; the damped (still sound) bound is used.
    AnalyticFallback,
}

impl CertMethod {
    /// Stable string tag for reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            CertMethod::ConvexProgram => "convex-program",
            CertMethod::AnalyticFallback => "analytic-fallback",
        }
    }
}

/// Certified entropy with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CertResult {
    /// Lower bound on `H(B|X,Λ)` in bits per pulse, in [0, 1].
    pub h: f64,
    /// How the bound was obtained.
    pub method: CertMethod,
    /// `h_attack − h` from the most recent oracle validation, if one ran.
    pub attack_gap: Option<f64>,
}

/// Why certification failed.
#[derive(Debug, Clone, PartialEq)]
pub enum CertifyError {
    /// The input violates its own invariants.
    InvalidInput(CertInputError),
    /// No realization reproduces the correlations under the energy bound:
    /// producing the observed gap needs at least `required_energy`, but the
    /// convention-adjusted bound is `omega_effective`. Signals a broken or
    /// adversarial device.
    InfeasibleCorrelations {
        required_energy: f64,
        omega_effective: f64,
    },
    /// The dual witness could not be verified to tolerance even after
    /// damping; no sound nonzero bound is reported.
    NumericalFailure,
}

impl core::fmt::Display for CertifyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CertifyError::InvalidInput(e) => write!(f, "invalid certification input: {e}"),
            CertifyError::InfeasibleCorrelations {
                required_energy,
                omega_effective,
            } => write!(
                f,
                "no realization exists: the observed gap requires energy {required_energy} \
                 but the effective bound is {omega_effective}"
            ),
            CertifyError::NumericalFailure => {
                write!(f, "dual witness verification failed; no sound bound available")
            }
        }
    }
}

impl core::error::Error for CertifyError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            CertifyError::InvalidInput(e) => Some(e),
            _ => None,
        }
    }
}

impl From<CertInputError> for CertifyError {
    fn from(e: CertInputError) -> Self {
        CertifyError::InvalidInput(e)
    }
}
