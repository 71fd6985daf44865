//! Failure taxonomy for decoding traces and the structural trapping-set
//! condition for majority-based decoders.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::code::TannerGraph;
use crate::decoder::{DecodeTrace, Decoder, DecoderConfig, ErrorPattern};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Fixed,
    Oscillatory,
    RandomLike,
}

impl FailureKind {
    pub const ALL: [FailureKind; 3] = [
        FailureKind::Fixed,
        FailureKind::Oscillatory,
        FailureKind::RandomLike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Fixed => "fixed",
            FailureKind::Oscillatory => "oscillatory",
            FailureKind::RandomLike => "random_like",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureClass {
    pub kind: FailureKind,
    /// `None` for random-like failures.
    pub period: Option<usize>,
    /// Iterations before the periodic regime starts; `None` for random-like.
    pub transition_length: Option<usize>,
    /// Union of the error sets over one period. For random-like failures,
    /// the union over the whole trace.
    pub steady_state_support: Vec<usize>,
    pub initial_weight: usize,
    pub final_error_weight: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrappingSetReport {
    pub set: ErrorPattern,
    /// Checks with odd degree in the subgraph induced by `set`.
    pub odd_checks: Vec<usize>,
    pub condition_holds: bool,
    /// Node exceeding its bound by the largest margin (lowest index on ties).
    pub max_violating_node: Option<usize>,
}

/// Classifies a failed trace as fixed, oscillatory or random-like.
///
/// With message fingerprints the first repeated decoder state pins the
/// period exactly; hand-built traces fall back to repeated error sets,
/// checked against the rest of the recorded horizon.
pub fn classify(trace: &DecodeTrace) -> Result<FailureClass> {
    if trace.success {
        return Err(Error::Precondition(
            "classify called on a successful trace".into(),
        ));
    }
    let sets = &trace.error_sets;
    if sets.is_empty() {
        return Err(Error::Precondition("trace has no iterations".into()));
    }
    let initial_weight = trace.initial_weight();
    let final_error_weight = trace.final_error_weight;

    let cycle = if trace.state_hashes.len() == sets.len() {
        first_state_repeat(&trace.state_hashes)
    } else {
        first_verified_set_repeat(sets)
    };

    let Some((start, span)) = cycle else {
        if trace.syndrome_satisfied {
            // Halted on a nonzero codeword: the output is final.
            let last = sets.len() - 1;
            return Ok(FailureClass {
                kind: FailureKind::Fixed,
                period: Some(1),
                transition_length: Some(last),
                steady_state_support: sets[last].positions().to_vec(),
                initial_weight,
                final_error_weight,
            });
        }
        let support: BTreeSet<usize> = sets
            .iter()
            .flat_map(|s| s.positions().iter().copied())
            .collect();
        return Ok(FailureClass {
            kind: FailureKind::RandomLike,
            period: None,
            transition_length: None,
            steady_state_support: support.into_iter().collect(),
            initial_weight,
            final_error_weight,
        });
    };

    // sets[start..] is periodic with period `span`; `at` extends it past
    // the recorded horizon.
    let at = |l: usize| -> &ErrorPattern {
        if l < start + span {
            &sets[l]
        } else {
            &sets[start + (l - start) % span]
        }
    };
    let period = (1..=span)
        .filter(|p| span % p == 0)
        .find(|&p| (start..start + span).all(|l| at(l) == at(l + p)))
        .unwrap_or(span);
    let mut transition = start;
    while transition > 0 && sets[transition - 1] == *at(transition - 1 + period) {
        transition -= 1;
    }
    let support: BTreeSet<usize> = (transition..transition + period)
        .flat_map(|l| at(l).positions().iter().copied())
        .collect();
    Ok(FailureClass {
        kind: if period == 1 {
            FailureKind::Fixed
        } else {
            FailureKind::Oscillatory
        },
        period: Some(period),
        transition_length: Some(transition),
        steady_state_support: support.into_iter().collect(),
        initial_weight,
        final_error_weight,
    })
}

fn first_state_repeat(hashes: &[u64]) -> Option<(usize, usize)> {
    let mut seen: HashMap<u64, usize> = HashMap::with_capacity(hashes.len());
    for (k, h) in hashes.iter().enumerate() {
        if let Some(&i) = seen.get(h) {
            return Some((i, k - i));
        }
        seen.insert(*h, k);
    }
    None
}

fn first_verified_set_repeat(sets: &[ErrorPattern]) -> Option<(usize, usize)> {
    let mut last_seen: HashMap<&ErrorPattern, usize> = HashMap::with_capacity(sets.len());
    for (k, s) in sets.iter().enumerate() {
        if let Some(&i) = last_seen.get(s) {
            let span = k - i;
            if (i..sets.len() - span).all(|l| sets[l] == sets[l + span]) {
                return Some((i, span));
            }
        }
        last_seen.insert(s, k);
    }
    None
}

/// Odd-degree checks of the induced subgraph of `s`, and whether every
/// variable node has at most `ceil(d_j/2) + ω_j - 1` neighbours among them.
pub fn check_trapping_condition(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    s: &ErrorPattern,
) -> Result<TrappingSetReport> {
    cfg.validate(g)?;
    if s.positions().last().is_some_and(|&j| j >= g.n()) {
        return Err(Error::Pattern("set exceeds block length".into()));
    }
    let mut odd = vec![false; g.m()];
    for &j in s.positions() {
        for &c in g.var_neighbors(j) {
            odd[c] ^= true;
        }
    }
    let odd_checks: Vec<usize> = (0..g.m()).filter(|&c| odd[c]).collect();

    let mut worst: Option<(usize, usize)> = None;
    for j in 0..g.n() {
        let hits = g.var_neighbors(j).iter().filter(|&&c| odd[c]).count();
        let bound = cfg.threshold(g, j) - 1;
        if hits > bound {
            let excess = hits - bound;
            if worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((j, excess));
            }
        }
    }
    Ok(TrappingSetReport {
        set: s.clone(),
        odd_checks,
        condition_holds: worst.is_none(),
        max_violating_node: worst.map(|(j, _)| j),
    })
}

/// Decodes `s` and confirms the output error set equals `s` at every
/// iteration. Only defined for sets that satisfy the structural condition.
pub fn certify_trapping_set(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    s: &ErrorPattern,
) -> Result<bool> {
    let report = check_trapping_condition(g, cfg, s)?;
    if !report.condition_holds {
        return Err(Error::Precondition(
            "certification requires the trapping-set condition to hold".into(),
        ));
    }
    let trace = Decoder::new(g, cfg.clone())?.decode(s);
    Ok(trace.error_sets.iter().all(|e| e == s))
}
