//! Run reports and data files: JSON for records, CSV for curves, raw bytes
//! for the extracted bits.
//!
//! Every writer here is deterministic: field order is fixed by the structs,
//! floats are printed with Rust's shortest round-trip formatting, and rows
//! follow block/sweep order. Identical runs therefore produce byte-identical
//! files, which the determinism tests rely on.

use anyhow::{Context, Result};
use qrng_core::acquisition::Tally;
use qrng_core::certify::EnergyConvention;
use qrng_core::energy::EnergyLog;
use qrng_core::pipeline::{BlockRecord, PipelineConfig, RunOutput};
use qrng_core::rng::MasterSeed;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

/// Hex SHA-256 of the 32-byte master seed — identifies the randomness of a
/// run in reports without exposing the seed material itself.
pub fn seed_digest(seed: &MasterSeed) -> String {
    let mut hasher = Sha256::new();
    hasher.update(seed);
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in out {
        use std::fmt::Write;
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// One block of the run, flattened for the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub index: usize,
    pub start_time: f64,
    pub duration: f64,
    pub n_sim: u64,
    pub n_target: u64,
    pub tally: Tally,
    pub p1_given_0: Option<f64>,
    pub p1_given_1: Option<f64>,
    pub h: f64,
    pub method: Option<&'static str>,
    pub cert_error: Option<String>,
    pub attack_gap: Option<f64>,
    pub h_min_target: f64,
    pub h_min_sim: f64,
    pub m_target: usize,
    pub m_sim: usize,
    pub actuator_phase: f64,
    pub energy_estimate: f64,
    pub valid: bool,
}

impl BlockReport {
    fn from_record(r: &BlockRecord) -> Self {
        BlockReport {
            index: r.index,
            start_time: r.start_time,
            duration: r.duration,
            n_sim: r.n_sim,
            n_target: r.n_target,
            tally: r.tally,
            p1_given_0: r.probs.map(|p| p.p1_given_0),
            p1_given_1: r.probs.map(|p| p.p1_given_1),
            h: r.h,
            method: r.method.map(|m| m.as_str()),
            cert_error: r.cert_error.as_ref().map(|e| format!("{e}")),
            attack_gap: r.attack_gap,
            h_min_target: r.h_min_target,
            h_min_sim: r.h_min_sim,
            m_target: r.m_target,
            m_sim: r.m_sim,
            actuator_phase: r.actuator_phase,
            energy_estimate: r.energy_estimate,
            valid: r.valid,
        }
    }
}

/// Echo of the settings a run was certified under.
#[derive(Debug, Clone, Serialize)]
pub struct SettingsEcho {
    pub omega: f64,
    pub convention: EnergyConvention,
    pub p_x1: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub c: f64,
    pub d: f64,
    pub epsilon_ext: f64,
    pub h_threshold: f64,
    pub block_seconds: f64,
    pub total_seconds: f64,
    /// Pulses simulated per block (None = every pulse).
    pub pulses_per_block: Option<usize>,
    /// The flip probability the noise was calibrated to, when configured
    /// that way.
    pub flip_probability: Option<f64>,
}

/// The JSON run report: per-block records plus the aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed_digest: String,
    pub settings: SettingsEcho,
    pub blocks: Vec<BlockReport>,
    pub certified_bits: u64,
    pub certified_rate_bps: f64,
    pub simulated_bits: u64,
    pub fraction_above_threshold: f64,
    pub h_threshold: f64,
    pub n_valid_blocks: usize,
    pub energy_violations: Vec<f64>,
}

/// Builds the report record from a finished run.
pub fn build_report(
    cfg: &PipelineConfig,
    seed: &MasterSeed,
    flip_probability: Option<f64>,
    out: &RunOutput,
) -> RunReport {
    RunReport {
        seed_digest: seed_digest(seed),
        settings: SettingsEcho {
            omega: cfg.omega,
            convention: cfg.convention,
            p_x1: cfg.source.p_x1,
            epsilon: cfg.epsilon,
            epsilon_prime: cfg.epsilon_prime,
            c: cfg.c,
            d: cfg.d,
            epsilon_ext: cfg.epsilon_ext,
            h_threshold: cfg.h_threshold,
            block_seconds: cfg.block_seconds,
            total_seconds: cfg.total_seconds,
            pulses_per_block: cfg.pulses_per_block,
            flip_probability,
        },
        blocks: out.blocks.iter().map(BlockReport::from_record).collect(),
        certified_bits: out.certified_bits,
        certified_rate_bps: out.certified_rate_bps,
        simulated_bits: out.simulated_bits,
        fraction_above_threshold: out.fraction_above_threshold,
        h_threshold: out.h_threshold,
        n_valid_blocks: out.n_valid_blocks,
        energy_violations: out.energy_log.violations.clone(),
    }
}

/// Writes the JSON report.
pub fn emit_report(report: &RunReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).context("serializing run report")?;
    fs::write(path, json + "\n")
        .with_context(|| format!("writing report to {}", path.display()))
}

/// Sidecar describing the bit file next to it.
#[derive(Debug, Clone, Serialize)]
pub struct BitsSidecar {
    /// Blocks (by index) whose bits are concatenated in the file, in order.
    pub block_ids: Vec<usize>,
    /// Output bits contributed by each of those blocks.
    pub m_per_block: Vec<usize>,
    /// Total bit count (the file is this many bits, zero-padded to bytes).
    pub total_bits: u64,
    pub seed_digest: String,
    pub epsilon_ext: f64,
    /// File name of the JSON run report this extraction belongs to.
    pub report: String,
}

/// Writes the packed output bits plus their JSON sidecar.
pub fn emit_bits(
    out: &RunOutput,
    seed: &MasterSeed,
    epsilon_ext: f64,
    report_name: &str,
    bits_path: &Path,
    sidecar_path: &Path,
) -> Result<()> {
    fs::write(bits_path, out.bits.to_bytes())
        .with_context(|| format!("writing bits to {}", bits_path.display()))?;
    let valid: Vec<&BlockRecord> = out.blocks.iter().filter(|b| b.valid).collect();
    let sidecar = BitsSidecar {
        block_ids: valid.iter().map(|b| b.index).collect(),
        m_per_block: valid.iter().map(|b| b.m_sim).collect(),
        total_bits: out.bits.len() as u64,
        seed_digest: seed_digest(seed),
        epsilon_ext,
        report: report_name.to_string(),
    };
    let json = serde_json::to_string_pretty(&sidecar).context("serializing bits sidecar")?;
    fs::write(sidecar_path, json + "\n")
        .with_context(|| format!("writing sidecar to {}", sidecar_path.display()))
}

/// `mu, block_seconds, h_per_pulse` rows of an entropy-vs-μ sweep.
pub fn write_fig4_csv(rows: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    let mut text = String::from("mu, block_seconds, h_per_pulse\n");
    for &(mu, secs, h) in rows {
        text.push_str(&format!("{mu}, {secs}, {h}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `t_seconds, h_per_pulse, phase_actuator` stability trace. The
/// time-compression factor is recorded as a comment header so the story
/// time scale is explicit in the data file itself.
pub fn write_fig5_csv(
    records: &[BlockRecord],
    time_compression: f64,
    path: &Path,
) -> Result<()> {
    let mut text = format!("# time_compression = {time_compression}\n");
    text.push_str("t_seconds, h_per_pulse, phase_actuator\n");
    for r in records {
        let t_story = r.start_time * time_compression;
        let h_per_pulse = if r.n_target > 0 {
            r.h_min_target / r.n_target as f64
        } else {
            0.0
        };
        text.push_str(&format!("{t_story}, {h_per_pulse}, {}\n", r.actuator_phase));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `t_seconds, mu_bar, omega, violated` energy-monitoring log.
pub fn write_fig6_csv(log: &EnergyLog, path: &Path) -> Result<()> {
    let mut text = String::from("t_seconds, mu_bar, omega, violated\n");
    for &(t, mu_bar) in &log.series {
        let violated = u8::from(log.is_violation(t));
        text.push_str(&format!("{t}, {mu_bar}, {}, {violated}\n", log.omega));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One row of the net-randomness sweep.
#[derive(Debug, Clone, Copy)]
pub struct NetRow {
    pub p_x1: f64,
    pub h_out: f64,
    pub h_min_in: f64,
    pub difference: f64,
}

/// `p_x1, h_out, h_min_in, difference` input-accounting sweep.
pub fn write_fig7_csv(rows: &[NetRow], path: &Path) -> Result<()> {
    let mut text = String::from("p_x1, h_out, h_min_in, difference\n");
    for r in rows {
        text.push_str(&format!(
            "{}, {}, {}, {}\n",
            r.p_x1, r.h_out, r.h_min_in, r.difference
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
