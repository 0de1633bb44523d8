//! `qrng` — run the simulated generator, reproduce the analysis sweeps, or
//! certify externally supplied statistics.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use qrng_cli::config::{load_config, ResolvedConfig};
use qrng_cli::experiments;
use qrng_core::acquisition::CondProbs;
use qrng_core::certify::{
    certify_entropy, certify_with_validation, CertInput, EnergyConvention,
};
use qrng_core::rng::{master_seed_from_u64, substream, StreamPurpose};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qrng",
    about = "Modulator-free self-testing quantum random number generator (software twin)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed override (defaults to the config's seed, then 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker-thread count for parallel sweeps (0 = rayon default).
    /// Cannot change any output byte.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Acquisition buffer size override. Cannot change any output byte.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Simulate every pulse instead of the config's reduced per-block count.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the end-to-end pipeline: simulate, certify, monitor, extract.
    Run(CommonOpts),
    /// Reproduce one analysis sweep: fig4, fig5-stability, fig6-energy,
    /// or fig7-net.
    Experiment {
        /// Experiment name.
        name: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Certify externally supplied statistics (no simulation).
    CertifyOnly {
        /// Conditional click probabilities as `p10,p11`.
        #[arg(long)]
        probs: String,
        /// Energy bound ω.
        #[arg(long)]
        omega: f64,
        /// Input bias p(x=1).
        #[arg(long, default_value_t = 0.16)]
        p_x1: f64,
        /// Energy-constraint convention: sum | average.
        #[arg(long, default_value = "sum")]
        convention: String,
        /// Also run the explicit-attack oracle at this truncation dimension.
        #[arg(long)]
        d_t: Option<usize>,
        /// Oracle random restarts.
        #[arg(long, default_value_t = 64)]
        budget: u32,
        /// Seed for the oracle's random restarts.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => {
            let cfg = resolved(&common)?;
            let out = experiments::run_headline(&cfg, &cfg.out_dir)?;
            emit(&format!(
                "certified {} bits over {} valid blocks ({:.1} kbps); \
                 fraction above h = {}: {:.3}; outputs in {}",
                out.certified_bits,
                out.n_valid_blocks,
                out.certified_rate_bps / 1e3,
                out.h_threshold,
                out.fraction_above_threshold,
                cfg.out_dir.display()
            ));
            Ok(())
        }
        Command::Experiment { name, common } => {
            let cfg = resolved(&common)?;
            experiments::run_experiment(&name, &cfg, &cfg.out_dir)?;
            emit(&format!("{name} written to {}", cfg.out_dir.display()));
            Ok(())
        }
        Command::CertifyOnly {
            probs,
            omega,
            p_x1,
            convention,
            d_t,
            budget,
            seed,
        } => certify_only(&probs, omega, p_x1, &convention, d_t, budget, seed),
    }
}

/// Loads the config and applies the CLI overrides.
fn resolved(common: &CommonOpts) -> Result<ResolvedConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(chunk) = common.chunk_size {
        cfg.pipeline.chunk_size = chunk;
    }
    if common.full_scale {
        cfg.pipeline.pulses_per_block = None;
    }
    if common.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    Ok(cfg)
}

/// Offline certification of supplied statistics; prints the report record
/// as one JSON object on stdout.
fn certify_only(
    probs: &str,
    omega: f64,
    p_x1: f64,
    convention: &str,
    d_t: Option<usize>,
    budget: u32,
    seed: u64,
) -> Result<()> {
    let (p10, p11) = parse_probs(probs)?;
    let convention = match convention {
        "sum" => EnergyConvention::Sum,
        "average" => EnergyConvention::Average,
        other => return Err(anyhow!("unknown convention {other:?}; use sum or average")),
    };
    let input = CertInput {
        probs: CondProbs::analytic(p10, p11),
        omega,
        p_x1,
        convention,
    };
    let result = match d_t {
        Some(dim) => {
            let mut rng = substream(
                &master_seed_from_u64(seed),
                StreamPurpose::AttackSearch,
                0,
            );
            certify_with_validation(&input, dim, budget, &mut rng)
        }
        None => certify_entropy(&input),
    };

    let record = match &result {
        Ok(r) => serde_json::json!({
            "probs": { "p1_given_0": p10, "p1_given_1": p11 },
            "omega": omega,
            "p_x1": p_x1,
            "convention": convention,
            "h": r.h,
            "method": r.method.as_str(),
            "attack_gap": r.attack_gap,
            "d_t": d_t,
        }),
        Err(e) => serde_json::json!({
            "probs": { "p1_given_0": p10, "p1_given_1": p11 },
            "omega": omega,
            "p_x1": p_x1,
            "convention": convention,
            "error": format!("{e}"),
        }),
    };
    emit(&serde_json::to_string_pretty(&record)?);
    if result.is_err() {
        std::process::exit(2);
    }
    Ok(())
}

/// Prints one line to stdout, exiting quietly if the reading end of a pipe
/// has already closed (e.g. `qrng ... | head`).
fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").and_then(|()| out.flush()).is_err() {
        std::process::exit(0);
    }
}

/// Parses `p10,p11`.
fn parse_probs(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(anyhow!("--probs expects two comma-separated numbers, got {text:?}"));
    }
    let p10: f64 = parts[0]
        .parse()
        .with_context(|| format!("bad p(1|0) value {:?}", parts[0]))?;
    let p11: f64 = parts[1]
        .parse()
        .with_context(|| format!("bad p(1|1) value {:?}", parts[1]))?;
    Ok((p10, p11))
}
