//! Exhaustive search for the smallest weight `J` at which the decoder fails,
//! and the number `|E_J|` of failing weight-`J` patterns.
//!
//! Weights are scanned in increasing order; each weight is split into
//! contiguous colex rank ranges decoded in parallel. The weight at which the
//! first failure appears is always completed. Progress can be persisted in a
//! small JSON checkpoint and resumed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::TannerGraph;
use crate::combin::{binomial, next_colex, pattern_from_rank};
use crate::decoder::{Decoder, DecoderConfig, ErrorPattern};
use crate::error::{Error, Result};
use crate::failure::{classify, FailureKind};

pub const DEFAULT_CHECKPOINT_INTERVAL: u64 = 10_000_000;
pub const DEFAULT_STORE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationResult {
    /// Smallest weight with a failure; `None` if none up to `max_weight`.
    pub j_min: Option<usize>,
    pub e_j_count: u64,
    pub tested_per_weight: BTreeMap<usize, u64>,
    pub failures_by_class: BTreeMap<FailureKind, u64>,
    /// Weight-J failures in colex order, up to the storage cap.
    pub failing_patterns: Vec<ErrorPattern>,
    pub failing_patterns_truncated: bool,
    pub total_decodes: u64,
    pub max_weight: usize,
}

/// Counters accumulated so far.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialCounts {
    pub tested_per_weight: BTreeMap<usize, u64>,
    /// Failures at the current weight (all lower weights had none).
    pub failures: u64,
    pub failures_by_class: BTreeMap<FailureKind, u64>,
    pub failing_patterns: Vec<ErrorPattern>,
    pub failing_patterns_truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub code_hash: String,
    pub decoder: DecoderConfig,
    pub max_weight: usize,
    pub weight: usize,
    /// Colex rank of the next untested pattern of `weight`.
    pub next_rank: u64,
    pub partial_counts: PartialCounts,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = tmp_path(path);
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

#[derive(Clone, Debug)]
pub struct EnumerationOptions {
    pub max_weight: usize,
    pub workers: usize,
    pub checkpoint_interval: u64,
    pub checkpoint_path: Option<PathBuf>,
    pub store_cap: usize,
    /// Stop (with a checkpoint) after testing this many patterns in this run.
    pub stop_after: Option<u64>,
}

impl EnumerationOptions {
    pub fn new(max_weight: usize, workers: usize) -> Self {
        EnumerationOptions {
            max_weight,
            workers: workers.max(1),
            checkpoint_interval: DEFAULT_CHECKPOINT_INTERVAL,
            checkpoint_path: None,
            store_cap: DEFAULT_STORE_CAP,
            stop_after: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnumerationOutcome {
    Complete(EnumerationResult),
    Interrupted(Checkpoint),
}

#[derive(Default)]
struct ChunkTally {
    tested: u64,
    failures: u64,
    by_class: BTreeMap<FailureKind, u64>,
    patterns: Vec<ErrorPattern>,
}

pub struct Enumerator<'g> {
    graph: &'g TannerGraph,
    cfg: DecoderConfig,
    code_hash: String,
}

impl<'g> Enumerator<'g> {
    pub fn new(
        graph: &'g TannerGraph,
        cfg: DecoderConfig,
        code_hash: impl Into<String>,
    ) -> Result<Self> {
        cfg.validate(graph)?;
        Ok(Enumerator {
            graph,
            cfg,
            code_hash: code_hash.into(),
        })
    }

    pub fn run(
        &self,
        opts: &EnumerationOptions,
        resume: Option<Checkpoint>,
    ) -> Result<EnumerationOutcome> {
        if opts.max_weight == 0 {
            return Err(Error::Precondition("max_weight must be at least 1".into()));
        }
        let n = self.graph.n();
        let max_weight = opts.max_weight.min(n);
        let (mut weight, mut next_rank, mut counts) = match resume {
            Some(ck) => {
                self.check_compatible(&ck)?;
                (ck.weight, ck.next_rank, ck.partial_counts)
            }
            None => (1, 0, PartialCounts::default()),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        let interval = opts.checkpoint_interval.max(1);
        let mut budget = opts.stop_after;

        while weight <= max_weight {
            let total = u64::try_from(binomial(n, weight))
                .map_err(|_| Error::Precondition(format!("C({n}, {weight}) exceeds 64 bits")))?;
            while next_rank < total {
                if budget == Some(0) {
                    let ck = self.checkpoint(max_weight, weight, next_rank, &counts);
                    if let Some(path) = &opts.checkpoint_path {
                        ck.save(path)?;
                    }
                    return Ok(EnumerationOutcome::Interrupted(ck));
                }
                let mut end = total.min(next_rank.saturating_add(interval));
                if let Some(b) = budget {
                    end = end.min(next_rank + b);
                }
                let tally = pool.install(|| self.scan(weight, next_rank, end, opts.workers));
                merge(&mut counts, weight, tally, opts.store_cap);
                if let Some(b) = budget.as_mut() {
                    *b -= end - next_rank;
                }
                next_rank = end;
                debug!(
                    "weight {weight}: {next_rank}/{total} tested, {} failures",
                    counts.failures
                );
                if let Some(path) = &opts.checkpoint_path {
                    self.checkpoint(max_weight, weight, next_rank, &counts)
                        .save(path)?;
                }
            }
            info!(
                "weight {weight}: {} patterns, {} failures",
                counts.tested_per_weight.get(&weight).copied().unwrap_or(0),
                counts.failures
            );
            if counts.failures > 0 {
                return Ok(EnumerationOutcome::Complete(self.finish(
                    Some(weight),
                    counts,
                    max_weight,
                )));
            }
            weight += 1;
            next_rank = 0;
        }
        Ok(EnumerationOutcome::Complete(
            self.finish(None, counts, max_weight),
        ))
    }

    fn check_compatible(&self, ck: &Checkpoint) -> Result<()> {
        if ck.code_hash != self.code_hash {
            return Err(Error::Mismatch(format!(
                "checkpoint is for code {} but this code is {}",
                ck.code_hash, self.code_hash
            )));
        }
        if ck.decoder != self.cfg {
            return Err(Error::Mismatch(
                "checkpoint was written with a different decoder configuration".into(),
            ));
        }
        Ok(())
    }

    fn checkpoint(
        &self,
        max_weight: usize,
        weight: usize,
        next_rank: u64,
        counts: &PartialCounts,
    ) -> Checkpoint {
        Checkpoint {
            code_hash: self.code_hash.clone(),
            decoder: self.cfg.clone(),
            max_weight,
            weight,
            next_rank,
            partial_counts: counts.clone(),
        }
    }

    fn finish(
        &self,
        j_min: Option<usize>,
        counts: PartialCounts,
        max_weight: usize,
    ) -> EnumerationResult {
        let total_decodes = counts.tested_per_weight.values().sum();
        EnumerationResult {
            j_min,
            e_j_count: counts.failures,
            tested_per_weight: counts.tested_per_weight,
            failures_by_class: counts.failures_by_class,
            failing_patterns: counts.failing_patterns,
            failing_patterns_truncated: counts.failing_patterns_truncated,
            total_decodes,
            max_weight,
        }
    }

    /// Decodes ranks `[start, end)` of `weight`, split into ordered chunks.
    fn scan(&self, weight: usize, start: u64, end: u64, workers: usize) -> Vec<ChunkTally> {
        let len = end - start;
        let pieces = (workers as u64 * 8).clamp(1, len.max(1));
        let step = len.div_ceil(pieces).max(1);
        let ranges: Vec<(u64, u64)> = (start..end)
            .step_by(step as usize)
            .map(|a| (a, (a + step).min(end)))
            .collect();
        ranges
            .into_par_iter()
            .map(|(a, b)| self.scan_range(weight, a, b))
            .collect()
    }

    fn scan_range(&self, weight: usize, start: u64, end: u64) -> ChunkTally {
        let n = self.graph.n();
        let mut decoder = Decoder::new(self.graph, self.cfg.clone()).expect("validated config");
        let mut tally = ChunkTally::default();
        let first = pattern_from_rank(n, weight, u128::from(start)).expect("rank within range");
        let mut positions = first.positions().to_vec();
        for _ in start..end {
            let pattern = ErrorPattern::from_sorted(positions.clone());
            let outcome = decoder.decode_outcome(&pattern);
            tally.tested += 1;
            if !outcome.success {
                let trace = decoder.decode(&pattern);
                let class = classify(&trace).expect("failed trace");
                tally.failures += 1;
                *tally.by_class.entry(class.kind).or_default() += 1;
                tally.patterns.push(pattern);
            }
            next_colex(&mut positions, n);
        }
        tally
    }
}

fn merge(counts: &mut PartialCounts, weight: usize, tallies: Vec<ChunkTally>, cap: usize) {
    for t in tallies {
        *counts.tested_per_weight.entry(weight).or_default() += t.tested;
        counts.failures += t.failures;
        for (k, v) in t.by_class {
            *counts.failures_by_class.entry(k).or_default() += v;
        }
        for p in t.patterns {
            if counts.failing_patterns.len() < cap {
                counts.failing_patterns.push(p);
            } else {
                counts.failing_patterns_truncated = true;
            }
        }
    }
}

/// Runs the full search without checkpointing.
pub fn find_j(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    max_weight: usize,
    workers: usize,
) -> Result<EnumerationResult> {
    let enumerator = Enumerator::new(g, cfg.clone(), "")?;
    match enumerator.run(&EnumerationOptions::new(max_weight, workers), None)? {
        EnumerationOutcome::Complete(r) => Ok(r),
        EnumerationOutcome::Interrupted(_) => unreachable!("no stop budget was set"),
    }
}
