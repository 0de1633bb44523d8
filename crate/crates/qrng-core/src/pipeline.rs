//! End-to-end orchestration: pulses to certified bits.
//!
//! A run is a sequence of equal-length acquisition blocks advancing one
//! shared drift state. Per block the pipeline:
//!
//! 1. balances the discrimination threshold on the instrument's own model
//!    (which assumes the phase actuator has cancelled the drift),
//! 2. simulates the pulses (acquisition streams are per-block, so results
//!    are independent of chunking and worker counts),
//! 3. estimates the conditional click probabilities and certifies the
//!    entropy bound — failures mark the block invalid and the run continues,
//! 4. applies the finite-size conversion twice: at the simulated pulse
//!    count (sizing what is actually extracted) and at the target pulse
//!    count `round(block_seconds · f_rep)` (the full-scale accounting both
//!    appear in every record),
//! 5. extracts the block's bits by seeded Toeplitz hashing, and
//! 6. feeds the certified value to the phase controller for the next block.
//!
//! After the block loop, simulated power-meter windows are checked against
//! the energy bound; any violating window invalidates the blocks it
//! overlaps, and invalid blocks contribute nothing to the certified totals
//! or the output bit stream.
//!
//! Everything here is deterministic given the master seed: every stochastic
//! element (inputs, quadratures, drift, meter noise, extractor seed,
//! oracle search) draws from its own purpose-tagged substream.

use crate::acquisition::{
    estimate_cond_probs, run_block, Block, BlockError, BlockPlan, BlockStreams, CondProbs, Tally,
};
use crate::bits::PackedBits;
use crate::certify::{
    certify_entropy, certify_with_validation, finite_size_min_entropy, CertMethod, CertifyError,
    CertInput, EnergyConvention, FiniteSizeError, FiniteSizeParams,
};
use crate::control::{
    phase_feedback_step, tune_threshold, PhaseController, ThresholdTuner, TuneError,
};
use crate::energy::{
    mean_photon_bound, monitor, power_for_mean_photons, EnergyError, EnergyLog, EnergyReading,
};
use crate::extract::{output_length, toeplitz_extract, ExtractError, ExtractorSpec};
use crate::photonics::{ConfigError, DriftParams, DriftState, HomodyneConfig, SourceConfig};
use crate::rng::{self, MasterSeed, StreamPurpose};
use alloc::vec::Vec;

/// Hill-climbing phase-feedback parameters; `None` disables the loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ControllerParams {
    /// Initial actuator step (radians, > 0).
    pub step_size: f64,
    /// Smallest step under repeated halving (> 0, ≤ step_size).
    pub step_floor: f64,
}

/// When the explicit-attack oracle cross-checks the certifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum OraclePolicy {
    /// Never.
    Off,
    /// Once per run, on the first block's statistics.
    PerRun { dim: usize, budget: u32 },
    /// On every block.
    PerBlock { dim: usize, budget: u32 },
}

/// A deliberately over-powered monitoring window (for testing the
/// energy-exclusion bookkeeping).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InjectedViolation {
    /// Which monitoring window is forced over the bound.
    pub window_index: usize,
    /// The forced level as a multiple of ω (> 1 to violate).
    pub factor: f64,
}

/// Energy-monitoring configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyMonitorConfig {
    /// Monitoring window length in seconds.
    pub window_seconds: f64,
    /// Monitor-to-output power ratio η supplied to the conversion.
    pub monitor_eta: f64,
    /// Relative 1σ meter noise on simulated power readings.
    pub meter_noise_fraction: f64,
    /// Optional forced violation.
    pub injected_violation: Option<InjectedViolation>,
}

impl Default for EnergyMonitorConfig {
    fn default() -> Self {
        EnergyMonitorConfig {
            window_seconds: 1.0,
            monitor_eta: 1.0,
            meter_noise_fraction: 0.01,
            injected_violation: None,
        }
    }
}

/// Everything a run needs besides the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Source parameters.
    pub source: SourceConfig,
    /// Detection parameters; the threshold field is a placeholder — each
    /// block re-tunes it, and the controller offsets the LO phase.
    pub homodyne: HomodyneConfig,
    /// Drift dynamics shared by all blocks.
    pub drift: DriftParams,
    /// Phase feedback; `None` runs open-loop (actuator pinned at 0).
    pub controller: Option<ControllerParams>,
    /// Energy bound ω certified by the monitor.
    pub omega: f64,
    /// Energy-constraint convention for certification.
    pub convention: EnergyConvention,
    /// Finite-size ε.
    pub epsilon: f64,
    /// Finite-size ε′ (carried through to reports).
    pub epsilon_prime: f64,
    /// Finite-size constant c (mandatory, no default).
    pub c: f64,
    /// Finite-size constant d (mandatory, no default).
    pub d: f64,
    /// Extractor failure parameter.
    pub epsilon_ext: f64,
    /// Block duration in seconds.
    pub block_seconds: f64,
    /// Total run duration in seconds (≥ block_seconds).
    pub total_seconds: f64,
    /// Simulated pulses per block; `None` simulates every pulse. Reduced
    /// counts subsample the block while the finite-size accounting still
    /// reports the target-n value.
    pub pulses_per_block: Option<usize>,
    /// Acquisition buffer size (must not affect results).
    pub chunk_size: usize,
    /// Multiplier on the drift clock only (story-time compression).
    pub time_compression: f64,
    /// Energy monitoring settings.
    pub energy: EnergyMonitorConfig,
    /// Attack-oracle cross-checking policy.
    pub oracle: OraclePolicy,
    /// Per-pulse threshold for the fraction-above bookkeeping.
    pub h_threshold: f64,
}

/// Why a run could not start (or, for block simulation, continue).
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    /// A component configuration failed its own validation.
    Config(ConfigError),
    /// A scalar field violates its documented range.
    BadField { name: &'static str, value: f64 },
    /// The finite-size template is invalid.
    FiniteSize(FiniteSizeError),
    /// The extractor parameters are invalid.
    Extract(ExtractError),
    /// The energy-monitoring parameters are invalid.
    Energy(EnergyError),
    /// Block simulation failed (should be prevented by validation).
    Block(BlockError),
    /// Threshold tuning failed outright (not a degenerate source, a
    /// search failure).
    Tune(TuneError),
}

impl core::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PipelineError::Config(e) => write!(f, "invalid component config: {e}"),
            PipelineError::BadField { name, value } => {
                write!(f, "pipeline field {name} out of range: {value}")
            }
            PipelineError::FiniteSize(e) => write!(f, "invalid finite-size parameters: {e}"),
            PipelineError::Extract(e) => write!(f, "invalid extractor parameters: {e}"),
            PipelineError::Energy(e) => write!(f, "invalid energy parameters: {e}"),
            PipelineError::Block(e) => write!(f, "block simulation failed: {e}"),
            PipelineError::Tune(e) => write!(f, "threshold tuning failed: {e}"),
        }
    }
}

impl core::error::Error for PipelineError {}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e)
    }
}

impl From<BlockError> for PipelineError {
    fn from(e: BlockError) -> Self {
        PipelineError::Block(e)
    }
}

impl From<EnergyError> for PipelineError {
    fn from(e: EnergyError) -> Self {
        PipelineError::Energy(e)
    }
}

impl PipelineConfig {
    /// Number of blocks in the run.
    pub fn n_blocks(&self) -> usize {
        let n = libm::round(self.total_seconds / self.block_seconds) as usize;
        n.max(1)
    }

    /// Full-scale pulse count per block (the accounting target).
    pub fn n_target(&self) -> u64 {
        libm::round(self.block_seconds * self.source.f_rep) as u64
    }

    /// Simulated pulse count per block.
    pub fn n_sim(&self) -> usize {
        self.pulses_per_block
            .unwrap_or_else(|| self.n_target() as usize)
    }

    /// The finite-size template at a given block length.
    pub fn finite_params(&self, n: u64) -> FiniteSizeParams {
        FiniteSizeParams {
            n: n.max(1),
            epsilon: self.epsilon,
            epsilon_prime: self.epsilon_prime,
            c: self.c,
            d: self.d,
        }
    }

    /// Checks every invariant, including cross-field constraints.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.source.validate()?;
        self.homodyne.validate()?;
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(PipelineError::BadField {
                name: "omega",
                value: self.omega,
            });
        }
        self.finite_params(1).validate().map_err(PipelineError::FiniteSize)?;
        if !(self.epsilon_ext > 0.0 && self.epsilon_ext < 1.0) {
            return Err(PipelineError::Extract(ExtractError::EpsilonExt(self.epsilon_ext)));
        }
        if !(self.block_seconds.is_finite() && self.block_seconds > 0.0) {
            return Err(PipelineError::BadField {
                name: "block_seconds",
                value: self.block_seconds,
            });
        }
        if !(self.total_seconds.is_finite() && self.total_seconds >= self.block_seconds) {
            return Err(PipelineError::BadField {
                name: "total_seconds",
                value: self.total_seconds,
            });
        }
        if self.n_target() < 1 {
            return Err(PipelineError::BadField {
                name: "block_seconds * f_rep",
                value: self.block_seconds * self.source.f_rep,
            });
        }
        if let Some(n) = self.pulses_per_block {
            if n < 1 {
                return Err(PipelineError::BadField {
                    name: "pulses_per_block",
                    value: n as f64,
                });
            }
        }
        if self.chunk_size < 1 {
            return Err(PipelineError::BadField {
                name: "chunk_size",
                value: self.chunk_size as f64,
            });
        }
        if !(self.time_compression.is_finite() && self.time_compression > 0.0) {
            return Err(PipelineError::BadField {
                name: "time_compression",
                value: self.time_compression,
            });
        }
        if let Some(ctrl) = &self.controller {
            if !(ctrl.step_size.is_finite() && ctrl.step_size > 0.0) {
                return Err(PipelineError::BadField {
                    name: "controller.step_size",
                    value: ctrl.step_size,
                });
            }
            if !(ctrl.step_floor.is_finite()
                && ctrl.step_floor > 0.0
                && ctrl.step_floor <= ctrl.step_size)
            {
                return Err(PipelineError::BadField {
                    name: "controller.step_floor",
                    value: ctrl.step_floor,
                });
            }
        }
        let e = &self.energy;
        if !(e.window_seconds.is_finite() && e.window_seconds > 0.0) {
            return Err(PipelineError::Energy(EnergyError::WindowLength(e.window_seconds)));
        }
        if !(e.monitor_eta.is_finite() && e.monitor_eta > 0.0) {
            return Err(PipelineError::BadField {
                name: "energy.monitor_eta",
                value: e.monitor_eta,
            });
        }
        if !(e.meter_noise_fraction.is_finite() && e.meter_noise_fraction >= 0.0) {
            return Err(PipelineError::BadField {
                name: "energy.meter_noise_fraction",
                value: e.meter_noise_fraction,
            });
        }
        if let Some(inj) = &e.injected_violation {
            if !(inj.factor.is_finite() && inj.factor > 0.0) {
                return Err(PipelineError::BadField {
                    name: "energy.injected_violation.factor",
                    value: inj.factor,
                });
            }
        }
        match self.oracle {
            OraclePolicy::Off => {}
            OraclePolicy::PerRun { dim, budget } | OraclePolicy::PerBlock { dim, budget } => {
                if dim < 2 {
                    return Err(PipelineError::BadField {
                        name: "oracle.dim",
                        value: dim as f64,
                    });
                }
                if budget < 1 {
                    return Err(PipelineError::BadField {
                        name: "oracle.budget",
                        value: budget as f64,
                    });
                }
            }
        }
        if !(self.h_threshold.is_finite() && self.h_threshold >= 0.0) {
            return Err(PipelineError::BadField {
                name: "h_threshold",
                value: self.h_threshold,
            });
        }
        Ok(())
    }
}

/// Everything recorded about one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    /// Block number, 0-based.
    pub index: usize,
    /// Physical start time (s).
    pub start_time: f64,
    /// Physical duration (s).
    pub duration: f64,
    /// Pulses actually simulated.
    pub n_sim: u64,
    /// Full-scale pulse count the accounting targets.
    pub n_target: u64,
    /// Raw input/output counts behind the probability estimates.
    pub tally: Tally,
    /// Estimated conditional click probabilities (`None` when an input
    /// never occurred in the block).
    pub probs: Option<CondProbs>,
    /// Certified entropy bound per pulse (0 when certification failed).
    pub h: f64,
    /// How the bound was obtained (`None` when certification failed).
    pub method: Option<CertMethod>,
    /// Certification failure, if any.
    pub cert_error: Option<CertifyError>,
    /// `h_attack − h` when the oracle ran on this block.
    pub attack_gap: Option<f64>,
    /// Finite-size min-entropy (bits) at the target pulse count.
    pub h_min_target: f64,
    /// Finite-size min-entropy (bits) at the simulated pulse count.
    pub h_min_sim: f64,
    /// Extractable bits at the target count (certified-rate accounting).
    pub m_target: usize,
    /// Extractable bits at the simulated count (what was extracted).
    pub m_sim: usize,
    /// Extracted bits (empty when `m_sim` = 0 or certification failed).
    pub bits: PackedBits,
    /// Actuator phase applied during this block.
    pub actuator_phase: f64,
    /// Input-averaged mean photon number observed in simulation.
    pub energy_estimate: f64,
    /// True iff certification succeeded and no energy violation overlaps.
    pub valid: bool,
}

/// The result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Per-block records in time order.
    pub blocks: Vec<BlockRecord>,
    /// The energy-monitoring log.
    pub energy_log: EnergyLog,
    /// Concatenated extracted bits of the valid blocks, block order.
    pub bits: PackedBits,
    /// Σ valid blocks' `m_target` — the certified total at full scale.
    pub certified_bits: u64,
    /// `certified_bits` / Σ valid blocks' duration (bits/s); 0 when no
    /// block is valid.
    pub certified_rate_bps: f64,
    /// Σ valid blocks' `m_sim` = `bits.len()`.
    pub simulated_bits: u64,
    /// Fraction of all blocks whose per-pulse target-n min-entropy exceeds
    /// `h_threshold`.
    pub fraction_above_threshold: f64,
    /// The threshold the fraction was computed against.
    pub h_threshold: f64,
    /// Number of valid blocks.
    pub n_valid_blocks: usize,
}

/// Balances the discrimination threshold on the instrument's model of
/// itself: nominal LO phase (the actuator is assumed to have cancelled the
/// drift), calibrated electronic noise, no drift.
fn tune_block_threshold(
    src: &SourceConfig,
    hd: &HomodyneConfig,
) -> Result<f64, TuneError> {
    let drift = DriftState::neutral();
    let span = 2.0 * libm::sqrt(src.mu.max(0.0)) + 1.0;
    let tuner = ThresholdTuner {
        target_balance_tolerance: 1e-9,
        search_bounds: (-span, span),
        max_iterations: 200,
    };
    let model = |tau: f64| {
        let probe = HomodyneConfig {
            threshold: tau,
            ..*hd
        };
        crate::photonics::conditional_click_probs(src, &probe, &drift)
    };
    tune_threshold(&tuner, model).map(|r| r.threshold)
}

/// Simulated power-meter estimates, one per monitoring window tiling the
/// run span. Readings carry the source's true emission (background
/// included) plus relative Gaussian meter noise, each window drawing from
/// its own substream; an injected violation forces `μ̄ = factor·ω` exactly.
fn simulate_energy_windows(
    cfg: &PipelineConfig,
    seed: &MasterSeed,
    run_span: f64,
) -> Result<Vec<(f64, f64)>, EnergyError> {
    let e = &cfg.energy;
    let template = EnergyReading {
        p_in: 1.0,
        eta: e.monitor_eta,
        delta_t: cfg.source.delta_t,
        nu_min: cfg.source.nu_min,
        f_rep: cfg.source.f_rep,
    };
    let mu_emitted = cfg.source.mu * (1.0 + cfg.source.background_power_ratio);
    let mut estimates = Vec::new();
    let mut w = 0usize;
    loop {
        let t = w as f64 * e.window_seconds;
        if t >= run_span - 1e-12 {
            break;
        }
        let injected = e
            .injected_violation
            .as_ref()
            .filter(|inj| inj.window_index == w);
        let mu_bar = if let Some(inj) = injected {
            inj.factor * cfg.omega
        } else if mu_emitted > 0.0 {
            let mut meter = rng::substream(seed, StreamPurpose::EnergyMeter, w as u64);
            let noise = rng::standard_normal(&mut meter);
            let p_true = power_for_mean_photons(mu_emitted, &template);
            let p_in = (p_true * (1.0 + e.meter_noise_fraction * noise)).max(p_true * 1e-6);
            let reading = EnergyReading { p_in, ..template };
            mean_photon_bound(&reading)?
        } else {
            0.0
        };
        estimates.push((t, mu_bar));
        w += 1;
    }
    Ok(estimates)
}

/// Runs the full pipeline. Deterministic given `seed`; chunk size and any
/// caller-side parallelism cannot affect the output.
pub fn run_pipeline(cfg: &PipelineConfig, seed: &MasterSeed) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;

    let n_blocks = cfg.n_blocks();
    let n_target = cfg.n_target();
    let n_sim = cfg.n_sim();

    // One run-level extractor seed, sliced per block (seed reuse across
    // blocks is sound for a strong extractor and is recorded by digest).
    let seed_bits = 2 * n_sim - 1;
    let mut seed_stream = rng::substream(seed, StreamPurpose::ExtractorSeed, 0);
    let seed_words: Vec<u64> = (0..seed_bits.div_ceil(64))
        .map(|_| rand_chacha::rand_core::RngCore::next_u64(&mut seed_stream))
        .collect();
    let seed_pool = PackedBits::from_words(seed_words, seed_bits);

    let mut drift_state = DriftState::neutral();
    let mut controller = cfg
        .controller
        .as_ref()
        .map(|c| PhaseController::new(c.step_size, c.step_floor));

    let mut records: Vec<BlockRecord> = Vec::with_capacity(n_blocks);
    let mut blocks: Vec<Block> = Vec::with_capacity(n_blocks);

    for index in 0..n_blocks {
        let actuator = controller.as_ref().map_or(0.0, |c| c.actuator_phase);
        let tau = tune_block_threshold(&cfg.source, &cfg.homodyne).map_err(PipelineError::Tune)?;
        let hd = HomodyneConfig {
            lo_phase: cfg.homodyne.lo_phase - actuator,
            threshold: tau,
            ..cfg.homodyne
        };
        let plan = BlockPlan {
            duration: cfg.block_seconds,
            start_time: index as f64 * cfg.block_seconds,
            pulses: cfg.pulses_per_block,
            chunk_size: cfg.chunk_size,
            drift: cfg.drift,
            time_compression: cfg.time_compression,
        };
        let mut streams = BlockStreams::for_block(seed, index as u64);
        let (mut block, next_drift) =
            run_block(&cfg.source, &hd, &drift_state, &plan, &mut streams)?;
        drift_state = next_drift;

        let probs = estimate_cond_probs(&block.tally).ok();
        let cert = match probs {
            Some(p) => {
                let input = CertInput {
                    probs: p,
                    omega: cfg.omega,
                    p_x1: cfg.source.p_x1,
                    convention: cfg.convention,
                };
                let oracle_here = match cfg.oracle {
                    OraclePolicy::Off => None,
                    OraclePolicy::PerRun { dim, budget } => (index == 0).then_some((dim, budget)),
                    OraclePolicy::PerBlock { dim, budget } => Some((dim, budget)),
                };
                match oracle_here {
                    Some((dim, budget)) => {
                        let mut oracle_rng =
                            rng::substream(seed, StreamPurpose::AttackSearch, index as u64);
                        certify_with_validation(&input, dim, budget, &mut oracle_rng)
                    }
                    None => certify_entropy(&input),
                }
            }
            None => Err(CertifyError::NumericalFailure),
        };

        let (h, method, cert_error, attack_gap) = match &cert {
            Ok(r) => (r.h, Some(r.method), None, r.attack_gap),
            Err(e) => (0.0, None, Some(e.clone()), None),
        };
        let cert_ok = cert.is_ok();
        if !cert_ok {
            block.valid = false;
        }

        let fs_eval = |n: u64| -> Result<f64, PipelineError> {
            finite_size_min_entropy(h, &cfg.finite_params(n)).map_err(PipelineError::FiniteSize)
        };
        let h_min_target = fs_eval(n_target)?;
        let h_min_sim = fs_eval(n_sim as u64)?;
        let m_target =
            output_length(h_min_target, cfg.epsilon_ext).map_err(PipelineError::Extract)?;
        let m_sim = output_length(h_min_sim, cfg.epsilon_ext).map_err(PipelineError::Extract)?;

        let bits = if cert_ok && m_sim >= 1 {
            let spec = ExtractorSpec {
                input_length: n_sim,
                output_length: m_sim,
                seed: seed_pool.slice(0, n_sim + m_sim - 1),
                epsilon_ext: cfg.epsilon_ext,
            };
            toeplitz_extract(&spec, &block.outputs, index as u64)
                .map_err(PipelineError::Extract)?
                .bits
        } else {
            PackedBits::new()
        };

        records.push(BlockRecord {
            index,
            start_time: block.start_time,
            duration: block.duration,
            n_sim: n_sim as u64,
            n_target,
            tally: block.tally,
            probs,
            h,
            method,
            cert_error,
            attack_gap,
            h_min_target,
            h_min_sim,
            m_target,
            m_sim,
            bits,
            actuator_phase: actuator,
            energy_estimate: block.energy_estimate,
            valid: block.valid,
        });
        blocks.push(block);

        if let Some(ctrl) = controller.take() {
            controller = Some(phase_feedback_step(&ctrl, h));
        }
    }

    let run_span = n_blocks as f64 * cfg.block_seconds;
    let estimates = simulate_energy_windows(cfg, seed, run_span)?;
    let energy_log = monitor(&estimates, cfg.energy.window_seconds, cfg.omega, &mut blocks)?;
    for (record, block) in records.iter_mut().zip(&blocks) {
        record.valid = record.valid && block.valid;
    }

    let mut bits = PackedBits::new();
    let mut certified_bits = 0u64;
    let mut simulated_bits = 0u64;
    let mut valid_duration = 0.0;
    let mut n_valid = 0usize;
    let mut above = 0usize;
    for record in &records {
        if record.h_min_target / record.n_target as f64 > cfg.h_threshold {
            above += 1;
        }
        if record.valid {
            bits.extend_from(&record.bits);
            certified_bits += record.m_target as u64;
            simulated_bits += record.m_sim as u64;
            valid_duration += record.duration;
            n_valid += 1;
        }
    }
    let certified_rate_bps = if valid_duration > 0.0 {
        certified_bits as f64 / valid_duration
    } else {
        0.0
    };

    Ok(RunOutput {
        blocks: records,
        energy_log,
        bits,
        certified_bits,
        certified_rate_bps,
        simulated_bits,
        fraction_above_threshold: above as f64 / n_blocks as f64,
        h_threshold: cfg.h_threshold,
        n_valid_blocks: n_valid,
    })
}
