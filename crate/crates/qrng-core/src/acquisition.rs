//! Input generation, discrimination, and block statistics.
//!
//! A block is the unit of acquisition: a timed run of pulses, each turned
//! into a (input, output) bit pair, with the four conditional counts
//! `n[b][x]` tallied on the fly. The simulation path is
//! `gen_input → pulse_amplitude → sample_quadrature → discriminate`,
//! with the interferometer drift stepped once per pulse.

use alloc::vec::Vec;

use crate::bits::PackedBits;
use crate::photonics::{
    self, ConfigError, DriftParams, DriftState, HomodyneConfig, QuadratureSample, SourceConfig,
};
use crate::rng::{self, MasterSeed, StreamPurpose};
use rand_chacha::ChaCha12Rng;

/// Default number of pulses buffered per processing chunk.
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

/// Joint counts `n[b][x]` over a stream of pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct Tally {
    /// `counts[b][x]` = number of pulses with output `b` and input `x`.
    pub counts: [[u64; 2]; 2],
    /// Total pulses; always equals the sum of the four counts.
    pub n_total: u64,
}

impl Tally {
    /// Empty tally.
    pub fn new() -> Self {
        Self::default()
    }

    /// Pulses with input `x` (either output).
    pub fn n_input(&self, x: bool) -> u64 {
        let xi = usize::from(x);
        self.counts[0][xi] + self.counts[1][xi]
    }

    /// Component-wise sum of two tallies.
    pub fn merge(&self, other: &Tally) -> Tally {
        let mut out = *self;
        for b in 0..2 {
            for x in 0..2 {
                out.counts[b][x] += other.counts[b][x];
            }
        }
        out.n_total += other.n_total;
        out
    }
}

/// Records one pulse: increments `n[b][x]` and the total.
pub fn accumulate(mut tally: Tally, x: bool, b: bool) -> Tally {
    tally.counts[usize::from(b)][usize::from(x)] += 1;
    tally.n_total += 1;
    tally
}

/// Estimated conditional click probabilities with their sample sizes.
///
/// `n0 + n1 ≥ 1` holds for every empirically estimated instance; instances
/// built from an analytic model carry `n0 = n1 = 0` to signal "not counted".
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CondProbs {
    /// p(b=1 | x=0).
    pub p1_given_0: f64,
    /// p(b=1 | x=1).
    pub p1_given_1: f64,
    /// Pulses with input 0 behind the estimate.
    pub n0: u64,
    /// Pulses with input 1 behind the estimate.
    pub n1: u64,
}

impl CondProbs {
    /// Wraps model-derived probabilities (no counting behind them).
    pub fn analytic(p1_given_0: f64, p1_given_1: f64) -> Self {
        CondProbs {
            p1_given_0,
            p1_given_1,
            n0: 0,
            n1: 0,
        }
    }
}

/// An input column of the tally was empty, so its conditional probability
/// is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputNeverSent {
    /// The input value that never occurred.
    pub x: u8,
}

impl core::fmt::Display for InputNeverSent {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "cannot estimate p(b|x={}): no pulses with that input were recorded",
            self.x
        )
    }
}

impl core::error::Error for InputNeverSent {}

/// Empirical conditional probabilities `p(1|x) = n[1][x] / (n[0][x] + n[1][x])`.
pub fn estimate_cond_probs(tally: &Tally) -> Result<CondProbs, InputNeverSent> {
    let n0 = tally.n_input(false);
    let n1 = tally.n_input(true);
    if n0 == 0 {
        return Err(InputNeverSent { x: 0 });
    }
    if n1 == 0 {
        return Err(InputNeverSent { x: 1 });
    }
    Ok(CondProbs {
        p1_given_0: tally.counts[1][0] as f64 / n0 as f64,
        p1_given_1: tally.counts[1][1] as f64 / n1 as f64,
        n0,
        n1,
    })
}

/// Draws one protocol input: 1 with probability `p_x1`.
///
/// Consumes exactly one 64-bit word from `rng`.
pub fn gen_input(rng: &mut ChaCha12Rng, p_x1: f64) -> bool {
    rng::bernoulli(rng, p_x1)
}

/// Thresholds a quadrature sample into an output bit.
///
/// Strictly greater maps to 1; a value exactly at the threshold maps to 0
/// (fixed tie convention — ties are measure-zero for the continuous model,
/// the convention just makes tests exact).
pub fn discriminate(sample: QuadratureSample, threshold: f64) -> bool {
    sample.value > threshold
}

/// One timed acquisition unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Protocol inputs x₁..x_n in pulse order.
    pub inputs: PackedBits,
    /// Detector outputs b₁..b_n in pulse order.
    pub outputs: PackedBits,
    /// Joint counts over the block.
    pub tally: Tally,
    /// Physical duration in seconds.
    pub duration: f64,
    /// Physical start time in seconds.
    pub start_time: f64,
    /// Input-averaged mean photon number per pulse over the block:
    /// μ · (empirical frequency of x = 1).
    pub energy_estimate: f64,
    /// Starts true; energy monitoring may flip it to false, never back.
    pub valid: bool,
}

impl Block {
    /// Recomputes the tally from the stored bit sequences (consistency check).
    pub fn recompute_tally(&self) -> Tally {
        let mut t = Tally::new();
        for i in 0..self.inputs.len() {
            t = accumulate(t, self.inputs.get(i), self.outputs.get(i));
        }
        t
    }

    /// Debug dump: 2 bits per pulse, input in the lower bit, pulses packed
    /// LSB-first within each byte (so byte 0 holds pulses 0–3).
    pub fn pulse_dump(&self) -> Vec<u8> {
        let mut bits = PackedBits::with_capacity(2 * self.inputs.len());
        for i in 0..self.inputs.len() {
            bits.push(self.inputs.get(i));
            bits.push(self.outputs.get(i));
        }
        bits.to_bytes()
    }
}

/// Independent random streams feeding one block simulation.
///
/// Keeping the three consumers on separate streams makes per-pulse word
/// consumption fixed per stream, which is what guarantees chunk-size
/// invariance and reproducibility.
pub struct BlockStreams {
    /// Protocol input bits (1 word per pulse).
    pub input: ChaCha12Rng,
    /// Quadrature sampling (2 words per pulse).
    pub measurement: ChaCha12Rng,
    /// Drift stepping (2 words per pulse).
    pub drift: ChaCha12Rng,
}

impl BlockStreams {
    /// Streams for block number `index` of a run.
    pub fn for_block(seed: &MasterSeed, index: u64) -> Self {
        BlockStreams {
            input: rng::substream(seed, StreamPurpose::InputBits, index),
            measurement: rng::substream(seed, StreamPurpose::Measurement, index),
            drift: rng::substream(seed, StreamPurpose::Drift, index),
        }
    }
}

/// Everything [`run_block`] needs besides the physics configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPlan {
    /// Physical block duration in seconds (> 0).
    pub duration: f64,
    /// Physical start time recorded on the block.
    pub start_time: f64,
    /// Number of pulses to simulate. `None` means the full count
    /// `round(duration · f_rep)`; `Some(n)` subsamples the block to `n`
    /// evenly spaced pulses (drift still advances by the real inter-pulse
    /// interval, so slow dynamics are preserved).
    pub pulses: Option<usize>,
    /// Buffer size for chunked processing; must not affect results.
    pub chunk_size: usize,
    /// Drift dynamics for the block.
    pub drift: DriftParams,
    /// Multiplier applied to the drift clock only (story-time compression
    /// for long stability runs); 1 means real time.
    pub time_compression: f64,
}

impl BlockPlan {
    /// Full-scale plan: every pulse simulated, default chunking, no drift.
    pub fn full(duration: f64) -> Self {
        BlockPlan {
            duration,
            start_time: 0.0,
            pulses: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            drift: DriftParams::frozen(),
            time_compression: 1.0,
        }
    }

    /// Number of pulses this plan simulates for the given source.
    pub fn pulse_count(&self, src: &SourceConfig) -> usize {
        match self.pulses {
            Some(n) => n,
            None => libm::round(self.duration * src.f_rep) as usize,
        }
    }
}

/// A rejected block request.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockError {
    /// Source or detector configuration failed validation.
    Config(ConfigError),
    /// Duration must be positive and finite.
    Duration(f64),
    /// The plan resolves to zero pulses.
    EmptyBlock,
}

impl core::fmt::Display for BlockError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BlockError::Config(e) => write!(f, "invalid configuration: {e}"),
            BlockError::Duration(v) => write!(f, "block duration must be > 0, got {v}"),
            BlockError::EmptyBlock => write!(f, "block plan resolves to zero pulses"),
        }
    }
}

impl core::error::Error for BlockError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            BlockError::Config(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ConfigError> for BlockError {
    fn from(e: ConfigError) -> Self {
        BlockError::Config(e)
    }
}

/// Simulates one acquisition block and returns it with the drift state it
/// left behind.
///
/// Pulses are processed in chunks of `plan.chunk_size` purely as a buffering
/// strategy: each random stream is consumed in strict pulse order with a
/// fixed word count per pulse, so the chunk size provably cannot change any
/// output. Drift advances once per pulse by
/// `duration / n · time_compression` seconds.
pub fn run_block(
    src: &SourceConfig,
    hd: &HomodyneConfig,
    drift0: &DriftState,
    plan: &BlockPlan,
    streams: &mut BlockStreams,
) -> Result<(Block, DriftState), BlockError> {
    src.validate()?;
    hd.validate()?;
    if !(plan.duration.is_finite() && plan.duration > 0.0) {
        return Err(BlockError::Duration(plan.duration));
    }
    let n = plan.pulse_count(src);
    if n == 0 {
        return Err(BlockError::EmptyBlock);
    }
    let chunk = plan.chunk_size.max(1);
    let dt_drift = plan.duration / n as f64 * plan.time_compression;

    let mut inputs = PackedBits::with_capacity(n);
    let mut outputs = PackedBits::with_capacity(n);
    let mut tally = Tally::new();
    let mut drift = *drift0;

    let mut x_buf: Vec<bool> = Vec::with_capacity(chunk.min(n));
    let mut q_buf: Vec<f64> = Vec::with_capacity(chunk.min(n));

    let mut done = 0usize;
    while done < n {
        let k = chunk.min(n - done);
        x_buf.clear();
        for _ in 0..k {
            x_buf.push(gen_input(&mut streams.input, src.p_x1));
        }
        q_buf.clear();
        for &x in &x_buf {
            let amp = photonics::pulse_amplitude(src, x, &drift);
            q_buf.push(photonics::sample_quadrature(amp, hd, &mut streams.measurement).value);
            drift = photonics::step_drift(&drift, dt_drift, &plan.drift, &mut streams.drift);
        }
        for (&x, &q) in x_buf.iter().zip(&q_buf) {
            let b = discriminate(QuadratureSample { value: q }, hd.threshold);
            tally = accumulate(tally, x, b);
            inputs.push(x);
            outputs.push(b);
        }
        done += k;
    }

    let freq_x1 = tally.n_input(true) as f64 / n as f64;
    let block = Block {
        inputs,
        outputs,
        tally,
        duration: plan.duration,
        start_time: plan.start_time,
        energy_estimate: src.mu * freq_x1,
        valid: true,
    };
    Ok((block, drift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_seed_from_u64;

    fn test_source(p_x1: f64) -> SourceConfig {
        SourceConfig {
            mu: 0.01,
            f_rep: 12.5e6,
            delta_t: 80e-9,
            nu_min: 193.4e12,
            p_x1,
            background_power_ratio: 0.045,
        }
    }

    fn test_homodyne() -> HomodyneConfig {
        HomodyneConfig {
            lo_phase: 0.0,
            shot_variance: 1.0,
            electronic_noise_variance: 0.025337723174975135,
            threshold: 0.1,
        }
    }

    fn desk_plan(pulses: usize) -> BlockPlan {
        BlockPlan {
            pulses: Some(pulses),
            ..BlockPlan::full(1.0)
        }
    }

    #[test]
    fn input_generation_edge_probabilities() {
        let seed = master_seed_from_u64(3);
        let mut rng = rng::substream(&seed, StreamPurpose::InputBits, 0);
        for _ in 0..100 {
            assert!(!gen_input(&mut rng, 0.0));
            assert!(gen_input(&mut rng, 1.0));
        }
    }

    #[test]
    fn input_frequency_matches_bias() {
        let seed = master_seed_from_u64(4);
        let mut rng = rng::substream(&seed, StreamPurpose::InputBits, 1);
        let n = 1_000_000;
        let ones = (0..n).filter(|_| gen_input(&mut rng, 0.16)).count();
        let freq = ones as f64 / n as f64;
        let sigma = (0.16_f64 * 0.84 / n as f64).sqrt();
        assert!((freq - 0.16).abs() < 4.0 * sigma, "freq {freq}");
    }

    #[test]
    fn discrimination_tie_convention() {
        assert!(!discriminate(QuadratureSample { value: 0.1 }, 0.1));
        assert!(discriminate(QuadratureSample { value: 1.1 }, 0.1));
        assert!(!discriminate(QuadratureSample { value: 0.0999 }, 0.1));
    }

    #[test]
    fn accumulate_counts_once() {
        let t = accumulate(Tally::new(), true, true);
        assert_eq!(t.counts[1][1], 1);
        assert_eq!(t.n_total, 1);
        assert_eq!(t.counts[0][0] + t.counts[0][1] + t.counts[1][0], 0);
    }

    #[test]
    fn tally_merge_equals_fold() {
        let pulses = [(false, true), (true, true), (false, false), (true, false), (true, true)];
        let whole = pulses
            .iter()
            .fold(Tally::new(), |t, &(x, b)| accumulate(t, x, b));
        let left = pulses[..2]
            .iter()
            .fold(Tally::new(), |t, &(x, b)| accumulate(t, x, b));
        let right = pulses[2..]
            .iter()
            .fold(Tally::new(), |t, &(x, b)| accumulate(t, x, b));
        assert_eq!(whole, left.merge(&right));
        assert_eq!(whole.n_total, 5);
    }

    #[test]
    fn estimator_ratio_and_errors() {
        let mut t = Tally::new();
        t.counts[1][1] = 80;
        t.counts[0][1] = 20;
        t.counts[0][0] = 10;
        t.n_total = 110;
        let p = estimate_cond_probs(&t).unwrap();
        assert_eq!(p.p1_given_1, 0.8);
        assert_eq!(p.p1_given_0, 0.0);
        assert_eq!((p.n0, p.n1), (10, 100));

        let mut empty0 = Tally::new();
        empty0.counts[1][1] = 5;
        empty0.n_total = 5;
        assert_eq!(estimate_cond_probs(&empty0), Err(InputNeverSent { x: 0 }));
        let mut empty1 = Tally::new();
        empty1.counts[0][0] = 5;
        empty1.n_total = 5;
        assert_eq!(estimate_cond_probs(&empty1), Err(InputNeverSent { x: 1 }));
    }

    #[test]
    fn block_statistics_match_analytic_oracle() {
        let src = test_source(0.16);
        let hd = test_homodyne();
        let seed = master_seed_from_u64(21);
        let mut streams = BlockStreams::for_block(&seed, 0);
        let n = 1_000_000;
        let (block, _) = run_block(&src, &hd, &DriftState::neutral(), &desk_plan(n), &mut streams).unwrap();
        let est = estimate_cond_probs(&block.tally).unwrap();
        let (a0, a1) = photonics::conditional_click_probs(&src, &hd, &DriftState::neutral());
        let err0 = 4.0 * (a0 * (1.0 - a0) / est.n0 as f64).sqrt();
        let err1 = 4.0 * (a1 * (1.0 - a1) / est.n1 as f64).sqrt();
        assert!((est.p1_given_0 - a0).abs() < err0, "p(1|0) {} vs {a0}", est.p1_given_0);
        assert!((est.p1_given_1 - a1).abs() < err1, "p(1|1) {} vs {a1}", est.p1_given_1);
    }

    #[test]
    fn blocks_are_deterministic_and_chunk_invariant() {
        let src = test_source(0.16);
        let hd = test_homodyne();
        let seed = master_seed_from_u64(33);
        let drift = DriftParams {
            phase_diffusion: 1e-3,
            polarization_decay_time: 100.0,
            polarization_floor: 0.9,
        };
        let run = |chunk: usize| {
            let mut streams = BlockStreams::for_block(&seed, 7);
            let plan = BlockPlan {
                chunk_size: chunk,
                drift,
                ..desk_plan(10_000)
            };
            run_block(&src, &hd, &DriftState::neutral(), &plan, &mut streams).unwrap()
        };
        let (b1, d1) = run(DEFAULT_CHUNK_SIZE);
        let (b2, d2) = run(7);
        let (b3, d3) = run(10_000);
        assert_eq!(b1, b2);
        assert_eq!(b1, b3);
        assert_eq!(d1, d2);
        assert_eq!(d1, d3);
    }

    #[test]
    fn block_invariants_hold() {
        let src = test_source(0.16);
        let hd = test_homodyne();
        let seed = master_seed_from_u64(8);
        let mut streams = BlockStreams::for_block(&seed, 0);
        let (block, drift) =
            run_block(&src, &hd, &DriftState::neutral(), &desk_plan(50_000), &mut streams).unwrap();
        assert_eq!(block.inputs.len(), 50_000);
        assert_eq!(block.outputs.len(), 50_000);
        assert_eq!(block.tally.n_total, 50_000);
        assert_eq!(block.recompute_tally(), block.tally);
        assert!(block.valid);
        let freq = block.tally.n_input(true) as f64 / 50_000.0;
        assert!((block.energy_estimate - src.mu * freq).abs() < 1e-15);
        // drift advanced by the physical duration (compression = 1)
        assert!((drift.time - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_scale_block_length_follows_repetition_rate() {
        let src = test_source(0.16);
        assert_eq!(BlockPlan::full(1.0).pulse_count(&src), 12_500_000);
        assert_eq!(BlockPlan::full(10.0).pulse_count(&src), 125_000_000);
        let mut slow = src;
        slow.f_rep = 1000.0;
        assert_eq!(BlockPlan::full(2.5).pulse_count(&slow), 2500);
    }

    #[test]
    fn vacuum_only_block_has_empty_input_one_column() {
        let src = test_source(0.0);
        let hd = test_homodyne();
        let seed = master_seed_from_u64(2);
        let mut streams = BlockStreams::for_block(&seed, 0);
        let (block, _) =
            run_block(&src, &hd, &DriftState::neutral(), &desk_plan(1000), &mut streams).unwrap();
        assert_eq!(block.tally.n_input(true), 0);
        assert_eq!(estimate_cond_probs(&block.tally), Err(InputNeverSent { x: 1 }));
        assert_eq!(block.energy_estimate, 0.0);
    }

    #[test]
    fn run_block_rejects_bad_requests() {
        let src = test_source(0.16);
        let hd = test_homodyne();
        let seed = master_seed_from_u64(2);
        let mut streams = BlockStreams::for_block(&seed, 0);
        let mut bad_src = src;
        bad_src.mu = f64::NAN;
        assert!(matches!(
            run_block(&bad_src, &hd, &DriftState::neutral(), &desk_plan(10), &mut streams),
            Err(BlockError::Config(_))
        ));
        let mut plan = desk_plan(10);
        plan.duration = -1.0;
        assert!(matches!(
            run_block(&src, &hd, &DriftState::neutral(), &plan, &mut streams),
            Err(BlockError::Duration(_))
        ));
        assert!(matches!(
            run_block(&src, &hd, &DriftState::neutral(), &desk_plan(0), &mut streams),
            Err(BlockError::EmptyBlock)
        ));
    }

    #[test]
    fn pulse_dump_packs_input_in_lower_bit() {
        // pulses: (x=1,b=0), (x=0,b=1), (x=1,b=1), (x=0,b=0)
        // bit stream: 1,0, 0,1, 1,1, 0,0 → byte 0b0011_1001? — check LSB-first:
        // bits 0..7 = 1,0,0,1,1,1,0,0 → value 1 + 8 + 16 + 32 = 57
        let mut inputs = PackedBits::new();
        let mut outputs = PackedBits::new();
        let mut tally = Tally::new();
        for (x, b) in [(true, false), (false, true), (true, true), (false, false)] {
            inputs.push(x);
            outputs.push(b);
            tally = accumulate(tally, x, b);
        }
        let block = Block {
            inputs,
            outputs,
            tally,
            duration: 1.0,
            start_time: 0.0,
            energy_estimate: 0.0,
            valid: true,
        };
        assert_eq!(block.pulse_dump(), alloc::vec![57u8]);
    }
}
