//! Monte Carlo decoding over the BSC and the two calibration procedures
//! (threshold `N0` selection and residual-weight `M` estimation).
//!
//! Every frame (or trial) draws from its own ChaCha stream keyed by
//! `(seed, index)`, so results do not depend on how work is split across
//! threads. Frames are processed in fixed-size batches, and a run stops at the
//! first batch, in index order, that brings the error count to the target.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::TannerGraph;
use crate::decoder::{Decoder, DecoderConfig, ErrorPattern};
use crate::error::{Error, Result};
use crate::estimation::Estimator;

const BATCH_FRAMES: u64 = 256;
const BATCHES_PER_ROUND: u64 = 32;
const Z_95: f64 = 1.959_963_984_540_054;

/// Simulated FERs outside this band are not used for calibration.
pub const CALIBRATION_FER_RANGE: (f64, f64) = (0.005, 0.2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    pub workers: usize,
}

impl SimConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        SimConfig {
            epsilon,
            min_frame_errors: 100,
            max_frames: 100_000_000,
            seed,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Epsilon(self.epsilon));
        }
        if self.min_frame_errors == 0 || self.max_frames == 0 {
            return Err(Error::Precondition(
                "min_frame_errors and max_frames must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightBin {
    pub frames: u64,
    pub failures: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub epsilon: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub ber: f64,
    pub fer_ci_low: f64,
    pub fer_ci_high: f64,
    /// input weight -> (frames, failures)
    pub weight_histogram: BTreeMap<usize, WeightBin>,
    /// Set when the frame cap ended the run before the error target.
    pub note: Option<String>,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniformly random `w`-subset of `0..n`.
pub fn uniform_weight_pattern<R: Rng + ?Sized>(
    n: usize,
    w: usize,
    rng: &mut R,
) -> Result<ErrorPattern> {
    if w > n {
        return Err(Error::Pattern(format!("weight {w} exceeds n = {n}")));
    }
    let mut positions = rand::seq::index::sample(rng, n, w).into_vec();
    positions.sort_unstable();
    Ok(ErrorPattern::from_sorted(positions))
}

/// BSC output for one frame: each position flipped independently.
fn channel_pattern(rng: &mut ChaCha8Rng, n: usize, threshold: u64) -> ErrorPattern {
    let positions = (0..n).filter(|_| rng.next_u64() < threshold).collect();
    ErrorPattern::from_sorted(positions)
}

#[derive(Default)]
struct BatchTally {
    frames: u64,
    frame_errors: u64,
    bit_errors: u64,
    histogram: BTreeMap<usize, WeightBin>,
}

pub fn simulate(g: &TannerGraph, cfg: &DecoderConfig, sim: &SimConfig) -> Result<SimResult> {
    sim.validate()?;
    cfg.validate(g)?;
    let n = g.n();
    let threshold = (sim.epsilon * 2f64.powi(64)) as u64;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sim.workers.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;

    let mut total = BatchTally::default();
    let mut next_batch = 0u64;
    let batches = sim.max_frames.div_ceil(BATCH_FRAMES);
    'rounds: while next_batch < batches {
        let round_end = (next_batch + BATCHES_PER_ROUND).min(batches);
        let tallies: Vec<BatchTally> = pool.install(|| {
            (next_batch..round_end)
                .into_par_iter()
                .map_init(
                    || Decoder::new(g, cfg.clone()).expect("validated config"),
                    |decoder, b| {
                        let start = b * BATCH_FRAMES;
                        let end = (start + BATCH_FRAMES).min(sim.max_frames);
                        let mut t = BatchTally::default();
                        for frame in start..end {
                            let mut rng = stream_rng(sim.seed, frame);
                            let pattern = channel_pattern(&mut rng, n, threshold);
                            let out = decoder.decode_outcome(&pattern);
                            t.frames += 1;
                            let bin = t.histogram.entry(pattern.weight()).or_default();
                            bin.frames += 1;
                            if !out.success {
                                t.frame_errors += 1;
                                t.bit_errors += out.final_error_weight as u64;
                                bin.failures += 1;
                            }
                        }
                        t
                    },
                )
                .collect()
        });
        for t in tallies {
            total.frames += t.frames;
            total.frame_errors += t.frame_errors;
            total.bit_errors += t.bit_errors;
            for (w, bin) in t.histogram {
                let e = total.histogram.entry(w).or_default();
                e.frames += bin.frames;
                e.failures += bin.failures;
            }
            if total.frame_errors >= sim.min_frame_errors {
                break 'rounds;
            }
        }
        next_batch = round_end;
    }

    let fer = total.frame_errors as f64 / total.frames as f64;
    let ber = total.bit_errors as f64 / (total.frames as f64 * n as f64);
    let (lo, hi) = wilson_interval(total.frame_errors, total.frames);
    let note = (total.frame_errors < sim.min_frame_errors).then(|| {
        if total.frame_errors == 0 {
            format!(
                "no frame errors in {} frames; FER < {:.3e} at 95% confidence",
                total.frames,
                3.0 / total.frames as f64
            )
        } else {
            format!(
                "frame cap reached with {} of {} requested errors",
                total.frame_errors, sim.min_frame_errors
            )
        }
    });
    Ok(SimResult {
        epsilon: sim.epsilon,
        frames: total.frames,
        frame_errors: total.frame_errors,
        bit_errors: total.bit_errors,
        fer,
        ber,
        fer_ci_low: lo,
        fer_ci_high: hi,
        weight_histogram: total.histogram,
        note,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub n0: usize,
    pub trials: u64,
    /// Mean residual weight over all trials (successes count as zero).
    pub m_avg: f64,
    /// Mean residual weight over failing trials only.
    pub m_failures_only: Option<f64>,
    pub failures: u64,
}

/// Which average of the weight-`N0` residual errors feeds the BER estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MAveraging {
    /// Residual errors per failing pattern.
    #[default]
    Failures,
    /// Residual errors per pattern, successes counting as zero.
    AllTrials,
}

impl MEstimate {
    /// Falls back to the all-trials mean (zero) when nothing failed.
    pub fn value(&self, mode: MAveraging) -> f64 {
        match mode {
            MAveraging::Failures => self.m_failures_only.unwrap_or(self.m_avg),
            MAveraging::AllTrials => self.m_avg,
        }
    }
}

/// Decodes `trials` uniformly random weight-`n0` patterns.
pub fn estimate_m(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    n0: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<MEstimate> {
    cfg.validate(g)?;
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    if n0 > g.n() {
        return Err(Error::Precondition(format!(
            "N0 = {n0} exceeds n = {}",
            g.n()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let batches = trials.div_ceil(BATCH_FRAMES);
    let (residual, failures) = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .map_init(
                || Decoder::new(g, cfg.clone()).expect("validated config"),
                |decoder, b| {
                    let mut residual = 0u64;
                    let mut failures = 0u64;
                    for t in b * BATCH_FRAMES..((b + 1) * BATCH_FRAMES).min(trials) {
                        let mut rng = stream_rng(seed, t);
                        let p = uniform_weight_pattern(g.n(), n0, &mut rng).expect("n0 <= n");
                        let out = decoder.decode_outcome(&p);
                        if !out.success {
                            failures += 1;
                            residual += out.final_error_weight as u64;
                        }
                    }
                    (residual, failures)
                },
            )
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    Ok(MEstimate {
        n0,
        trials,
        m_avg: residual as f64 / trials as f64,
        m_failures_only: (failures > 0).then(|| residual as f64 / failures as f64),
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct N0Choice {
    pub n0: usize,
    /// (N, sum over points of |log10 FER_U(N) - log10 FER_sim|)
    pub objective: Vec<(usize, f64)>,
    /// Points that fell inside the calibration band.
    pub used_points: Vec<(f64, f64)>,
}

/// Picks the `N` in `J+1..=n` whose `FER_U(N)` is closest to the simulated
/// FERs in log10 distance; ties go to the smaller `N`.
pub fn choose_n0(est: &Estimator, n: usize, j: usize, points: &[(f64, f64)]) -> Result<N0Choice> {
    let (lo, hi) = CALIBRATION_FER_RANGE;
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, fer)| (lo..=hi).contains(&fer))
        .collect();
    if used.is_empty() {
        return Err(Error::Calibration(format!(
            "no simulated FER inside [{lo}, {hi}]; choose crossover probabilities with FER around 0.01-0.1"
        )));
    }
    if j >= n {
        return Err(Error::Calibration(format!(
            "J = {j} leaves no candidate N <= n = {n}"
        )));
    }
    let profiles: Vec<Vec<f64>> = used
        .iter()
        .map(|&(eps, _)| est.fer_upper_profile(eps))
        .collect::<Result<_>>()?;
    let mut objective = Vec::with_capacity(n - j);
    let mut best: Option<(usize, f64)> = None;
    for cap in j + 1..=n {
        let value: f64 = used
            .iter()
            .zip(&profiles)
            .map(|(&(_, fer), prof)| (prof[cap - j].log10() - fer.log10()).abs())
            .sum();
        objective.push((cap, value));
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((cap, value));
        }
    }
    Ok(N0Choice {
        n0: best.expect("at least one candidate").0,
        objective,
        used_points: used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n0: usize,
    pub objective: Vec<(usize, f64)>,
    pub points: Vec<SimResult>,
}

/// Simulates at each ε, then selects `N0` against the simulated FERs.
pub fn calibrate_n0(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    j: usize,
    e_j_count: u64,
    eps_points: &[f64],
    per_point: &SimConfig,
) -> Result<CalibrationReport> {
    let est = Estimator::new(g.n(), j, e_j_count)?;
    let mut points = Vec::with_capacity(eps_points.len());
    for &eps in eps_points {
        let sim = SimConfig {
            epsilon: eps,
            ..per_point.clone()
        };
        points.push(simulate(g, cfg, &sim)?);
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.epsilon, p.fer)).collect();
    let choice = choose_n0(&est, g.n(), j, &pairs)?;
    Ok(CalibrationReport {
        n0: choice.n0,
        objective: choice.objective,
        points,
    })
}
