//! TOML pipeline configuration: strict schema, explicit errors.
//!
//! Every table rejects unknown keys, so a typo is a parse error rather than
//! a silently ignored setting. Two fields are deliberately mandatory with no
//! defaults — the finite-size constants `c` and `d` — because no value can
//! be assumed on the user's behalf; omitting them is an error that names
//! them. The electronic noise is specified *either* directly as a variance
//! *or* operationally as a target bit-flip probability (calibrated at the
//! balanced threshold); supplying both, or neither, is rejected.

use anyhow::{anyhow, bail, Context, Result};
use qrng_core::certify::EnergyConvention;
use qrng_core::photonics::{
    electronic_noise_variance_for_flip, DriftParams, HomodyneConfig, SourceConfig,
};
use qrng_core::pipeline::{
    ControllerParams, EnergyMonitorConfig, InjectedViolation, OraclePolicy, PipelineConfig,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Headline operating point used wherever a table is optional.
pub const DEFAULT_SEED: u64 = 1;

/// Top-level config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Convenience RNG seed; the CLI `--seed` flag overrides it.
    pub seed: Option<u64>,
    /// Output directory; the CLI `--out-dir` flag overrides it.
    pub out_dir: Option<PathBuf>,
    pub source: SourceSection,
    pub homodyne: HomodyneSection,
    #[serde(default)]
    pub drift: DriftSection,
    /// Optional phase feedback; absent = open loop.
    pub controller: Option<ControllerSection>,
    pub certify: CertifySection,
    pub finite: FiniteSection,
    pub extract: ExtractSection,
    pub run: RunSection,
    #[serde(default)]
    pub energy: EnergySection,
    /// Optional attack-oracle cross-checking; absent = off.
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub mu: f64,
    pub f_rep: f64,
    pub delta_t: f64,
    pub nu_min: f64,
    pub p_x1: f64,
    #[serde(default)]
    pub background_power_ratio: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneSection {
    #[serde(default)]
    pub lo_phase: f64,
    /// Shot-noise units: must be 1 (the convention the whole model uses).
    #[serde(default = "default_shot_variance")]
    pub shot_variance: f64,
    /// Direct electronic-noise variance (exclusive with `flip_probability`).
    pub electronic_noise_variance: Option<f64>,
    /// Target bit-flip probability at the balanced threshold; the variance
    /// is calibrated to reproduce it (exclusive with the direct field).
    pub flip_probability: Option<f64>,
}

fn default_shot_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub phase_diffusion: f64,
    pub polarization_decay_time: f64,
    pub polarization_floor: f64,
}

impl Default for DriftSection {
    /// Slow interferometer drift at desk scale — enough to move the
    /// per-block entropy visibly over minutes without killing it.
    fn default() -> Self {
        DriftSection {
            phase_diffusion: 6.4e-5,
            polarization_decay_time: 0.0,
            polarization_floor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub step_size: f64,
    pub step_floor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub omega: f64,
    #[serde(default)]
    pub convention: EnergyConvention,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSection {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    /// Mandatory — no hidden default.
    pub c: Option<f64>,
    /// Mandatory — no hidden default.
    pub d: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub epsilon_ext: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub block_seconds: f64,
    pub total_seconds: f64,
    /// Simulated pulses per block; absent = simulate every pulse.
    pub pulses_per_block: Option<usize>,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default = "default_time_compression")]
    pub time_compression: f64,
    #[serde(default = "default_h_threshold")]
    pub h_threshold: f64,
}

fn default_chunk_size() -> usize {
    1 << 16
}

fn default_time_compression() -> f64 {
    1.0
}

fn default_h_threshold() -> f64 {
    0.04
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(default = "default_window_seconds")]
    pub window_seconds: f64,
    #[serde(default = "default_monitor_eta")]
    pub monitor_eta: f64,
    #[serde(default = "default_meter_noise")]
    pub meter_noise_fraction: f64,
    pub injected_violation: Option<InjectedSection>,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            window_seconds: default_window_seconds(),
            monitor_eta: default_monitor_eta(),
            meter_noise_fraction: default_meter_noise(),
            injected_violation: None,
        }
    }
}

fn default_window_seconds() -> f64 {
    1.0
}

fn default_monitor_eta() -> f64 {
    1.0
}

fn default_meter_noise() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedSection {
    pub window_index: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub mode: OracleMode,
    #[serde(default = "default_oracle_dim")]
    pub dim: usize,
    #[serde(default = "default_oracle_budget")]
    pub budget: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    Off,
    PerRun,
    PerBlock,
}

fn default_oracle_dim() -> usize {
    4
}

fn default_oracle_budget() -> u32 {
    64
}

/// A fully resolved configuration: the engine config plus file-level
/// conveniences (seed, output directory) and the resolved noise calibration.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// The flip probability the noise variance was calibrated to, if the
    /// config specified one (echoed in reports).
    pub flip_probability: Option<f64>,
}

/// Parses and fully validates a config file.
///
/// Unknown keys, missing mandatory fields, and invariant violations are all
/// errors before any simulation starts; messages name the offending field.
pub fn load_config(path: &Path) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let file: FileConfig = toml::from_str(&text)
        .with_context(|| format!("config parse error in {}", path.display()))?;
    resolve(&file)
}

/// Validates and lowers a parsed file into an engine configuration.
pub fn resolve(file: &FileConfig) -> Result<ResolvedConfig> {
    let source = SourceConfig {
        mu: file.source.mu,
        f_rep: file.source.f_rep,
        delta_t: file.source.delta_t,
        nu_min: file.source.nu_min,
        p_x1: file.source.p_x1,
        background_power_ratio: file.source.background_power_ratio,
    };
    source
        .validate()
        .map_err(|e| anyhow!("invalid [source]: {e}"))?;

    let noise_var = resolve_noise(&source, &file.homodyne)?;
    let homodyne = HomodyneConfig {
        lo_phase: file.homodyne.lo_phase,
        shot_variance: file.homodyne.shot_variance,
        electronic_noise_variance: noise_var,
        // Placeholder; the pipeline re-balances the threshold per block.
        threshold: 0.0,
    };
    homodyne
        .validate()
        .map_err(|e| anyhow!("invalid [homodyne]: {e}"))?;

    let c = file
        .finite
        .c
        .ok_or_else(|| anyhow!("missing mandatory field finite.c (no hidden default)"))?;
    let d = file
        .finite
        .d
        .ok_or_else(|| anyhow!("missing mandatory field finite.d (no hidden default)"))?;

    let controller = file.controller.as_ref().map(|c| ControllerParams {
        step_size: c.step_size,
        step_floor: c.step_floor,
    });

    let oracle = match &file.oracle {
        None => OraclePolicy::Off,
        Some(o) => match o.mode {
            OracleMode::Off => OraclePolicy::Off,
            OracleMode::PerRun => OraclePolicy::PerRun {
                dim: o.dim,
                budget: o.budget,
            },
            OracleMode::PerBlock => OraclePolicy::PerBlock {
                dim: o.dim,
                budget: o.budget,
            },
        },
    };

    let pipeline = PipelineConfig {
        source,
        homodyne,
        drift: DriftParams {
            phase_diffusion: file.drift.phase_diffusion,
            polarization_decay_time: file.drift.polarization_decay_time,
            polarization_floor: file.drift.polarization_floor,
        },
        controller,
        omega: file.certify.omega,
        convention: file.certify.convention,
        epsilon: file.finite.epsilon,
        epsilon_prime: file.finite.epsilon_prime,
        c,
        d,
        epsilon_ext: file.extract.epsilon_ext,
        block_seconds: file.run.block_seconds,
        total_seconds: file.run.total_seconds,
        pulses_per_block: file.run.pulses_per_block,
        chunk_size: file.run.chunk_size,
        time_compression: file.run.time_compression,
        energy: EnergyMonitorConfig {
            window_seconds: file.energy.window_seconds,
            monitor_eta: file.energy.monitor_eta,
            meter_noise_fraction: file.energy.meter_noise_fraction,
            injected_violation: file.energy.injected_violation.as_ref().map(|i| {
                InjectedViolation {
                    window_index: i.window_index,
                    factor: i.factor,
                }
            }),
        },
        oracle,
        h_threshold: file.run.h_threshold,
    };
    pipeline.validate().map_err(|e| anyhow!("invalid config: {e}"))?;

    Ok(ResolvedConfig {
        pipeline,
        seed: file.seed.unwrap_or(DEFAULT_SEED),
        out_dir: file.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        flip_probability: file.homodyne.flip_probability,
    })
}

/// Resolves the electronic-noise variance from exactly one of the two
/// exclusive noise fields. A flip-probability target is calibrated at the
/// noise-free balanced threshold of the configured source.
fn resolve_noise(source: &SourceConfig, hd: &HomodyneSection) -> Result<f64> {
    match (hd.electronic_noise_variance, hd.flip_probability) {
        (Some(var), None) => {
            if !(var.is_finite() && var >= 0.0) {
                bail!("homodyne.electronic_noise_variance must be finite and >= 0, got {var}");
            }
            Ok(var)
        }
        (None, Some(flip)) => {
            if !(0.0..0.5).contains(&flip) {
                bail!("homodyne.flip_probability must lie in [0, 0.5), got {flip}");
            }
            let tau = balanced_threshold(source)?;
            electronic_noise_variance_for_flip(source, hd.lo_phase, tau, flip).map_err(|e| {
                anyhow!("cannot calibrate homodyne.flip_probability = {flip}: {e:?}")
            })
        }
        (Some(_), Some(_)) => bail!(
            "homodyne.electronic_noise_variance and homodyne.flip_probability are exclusive; \
             set exactly one"
        ),
        (None, None) => bail!(
            "set exactly one of homodyne.electronic_noise_variance or \
             homodyne.flip_probability"
        ),
    }
}

/// Noise-free balanced threshold of a source (midpoint of the two
/// quadrature means at nominal phase).
pub(crate) fn balanced_threshold(source: &SourceConfig) -> Result<f64> {
    use qrng_core::control::{tune_threshold, ThresholdTuner};
    use qrng_core::photonics::{conditional_click_probs, DriftState};

    let drift = DriftState::neutral();
    let quiet = HomodyneConfig {
        lo_phase: 0.0,
        shot_variance: 1.0,
        electronic_noise_variance: 0.0,
        threshold: 0.0,
    };
    let span = 2.0 * source.mu.max(0.0).sqrt() + 1.0;
    let tuner = ThresholdTuner {
        target_balance_tolerance: 1e-9,
        search_bounds: (-span, span),
        max_iterations: 200,
    };
    let model = |tau: f64| {
        let probe = HomodyneConfig {
            threshold: tau,
            ..quiet
        };
        conditional_click_probs(source, &probe, &drift)
    };
    tune_threshold(&tuner, model)
        .map(|r| r.threshold)
        .map_err(|e| anyhow!("threshold balancing failed: {e}"))
}
