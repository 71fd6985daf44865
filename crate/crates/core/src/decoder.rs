//! Majority-based hard-decision message passing (MB^ω), with Gallager A as
//! the maximum-order member of the family.
//!
//! Messages are stored as bits, one per directed edge: `1` stands for `-1`
//! and `0` for `+1`, so the check-node product of `±1` values becomes XOR.
//! All analysis assumes the all-one (`+1`) codeword is transmitted, so the
//! channel bit of node `j` is `1` exactly when `j` is in the initial error
//! pattern.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::code::TannerGraph;
use crate::error::{Error, Result};

/// Default iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Sorted set of variable positions in error.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorPattern(Vec<usize>);

impl ErrorPattern {
    pub fn empty() -> Self {
        ErrorPattern(Vec::new())
    }

    /// Sorts and checks for duplicates and range.
    pub fn new(mut positions: Vec<usize>, n: usize) -> Result<Self> {
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Pattern("duplicate position".into()));
        }
        if let Some(&last) = positions.last() {
            if last >= n {
                return Err(Error::Pattern(format!(
                    "position {last} out of range (n = {n})"
                )));
            }
        }
        Ok(ErrorPattern(positions))
    }

    /// Caller guarantees `positions` is strictly increasing.
    pub(crate) fn from_sorted(positions: Vec<usize>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        ErrorPattern(positions)
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Dense 0/1 indicator of length `n`.
    pub fn to_bits(&self, n: usize) -> Vec<u8> {
        let mut bits = vec![0u8; n];
        for &j in &self.0 {
            bits[j] = 1;
        }
        bits
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        ErrorPattern(
            bits.iter()
                .enumerate()
                .filter(|(_, &b)| b != 0)
                .map(|(j, _)| j)
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Gallager A: every node at its maximum order.
    Ga,
    /// Majority-based with explicit per-node orders.
    Mb,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub algorithm: Algorithm,
    /// Order ω_j of each variable node.
    pub orders: Vec<usize>,
    pub max_iterations: usize,
    /// Stop as soon as the hard decisions satisfy every check.
    pub early_stop: bool,
}

/// Largest admissible order for a degree-`d` node: `d - 1 - ceil(d/2)`.
pub fn max_order(d: usize) -> usize {
    (d - 1).saturating_sub(d.div_ceil(2))
}

impl DecoderConfig {
    /// Gallager A preset.
    pub fn gallager_a(g: &TannerGraph) -> Self {
        DecoderConfig {
            algorithm: Algorithm::Ga,
            orders: g.var_degrees().into_iter().map(max_order).collect(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            early_stop: true,
        }
    }

    /// The same order at every node.
    pub fn mb(g: &TannerGraph, omega: usize) -> Result<Self> {
        Self::mb_per_node(g, vec![omega; g.n()])
    }

    pub fn mb_per_node(g: &TannerGraph, orders: Vec<usize>) -> Result<Self> {
        let cfg = DecoderConfig {
            algorithm: Algorithm::Mb,
            orders,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            early_stop: true,
        };
        cfg.validate(g)?;
        Ok(cfg)
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_early_stop(mut self, early_stop: bool) -> Self {
        self.early_stop = early_stop;
        self
    }

    pub fn validate(&self, g: &TannerGraph) -> Result<()> {
        if self.orders.len() != g.n() {
            return Err(Error::Config(format!(
                "{} orders given for {} variable nodes",
                self.orders.len(),
                g.n()
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        for (j, &w) in self.orders.iter().enumerate() {
            let d = g.var_degree(j);
            if w > max_order(d) {
                return Err(Error::Config(format!(
                    "order {w} at node {j} exceeds the maximum {} for degree {d}",
                    max_order(d)
                )));
            }
        }
        Ok(())
    }

    /// Flip threshold `ceil(d_j/2) + ω_j` of node `j`.
    pub fn threshold(&self, g: &TannerGraph, j: usize) -> usize {
        g.var_degree(j).div_ceil(2) + self.orders[j]
    }
}

/// Per-iteration record of one decoding run.
///
/// Index `l` of `error_sets` is the hard-decision error set after
/// iteration `l`; iteration 0 is the channel decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub success: bool,
    pub iterations_run: usize,
    pub error_sets: Vec<ErrorPattern>,
    pub final_error_weight: usize,
    /// The decoder halted on a zero syndrome.
    #[serde(default)]
    pub syndrome_satisfied: bool,
    /// Fingerprint of the variable-to-check messages and hard decisions of
    /// each iteration. Empty for hand-built traces.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_hashes: Vec<u64>,
    /// Iteration cap the trace was produced under.
    #[serde(default)]
    pub max_iterations: usize,
}

impl DecodeTrace {
    /// A trace assembled from error sets alone (no message fingerprints).
    pub fn from_error_sets(error_sets: Vec<ErrorPattern>, max_iterations: usize) -> Self {
        let success = error_sets.iter().any(ErrorPattern::is_empty);
        DecodeTrace {
            success,
            iterations_run: error_sets.len(),
            final_error_weight: error_sets.last().map_or(0, ErrorPattern::weight),
            error_sets,
            syndrome_satisfied: success,
            state_hashes: Vec::new(),
            max_iterations,
        }
    }

    pub fn initial_weight(&self) -> usize {
        self.error_sets.first().map_or(0, ErrorPattern::weight)
    }
}

/// Cheap summary used by the enumeration and simulation loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub success: bool,
    pub iterations_run: usize,
    pub final_error_weight: usize,
}

/// True iff every check sees an even number of positions from `errors`.
pub fn check_syndrome(g: &TannerGraph, errors: &ErrorPattern) -> bool {
    let mut parity = vec![false; g.m()];
    for &j in errors.positions() {
        for &c in g.var_neighbors(j) {
            parity[c] ^= true;
        }
    }
    parity.iter().all(|&p| !p)
}

/// Decoder bound to one graph and configuration, owning scratch buffers.
///
/// One instance per worker; the graph itself is shared.
pub struct Decoder<'g> {
    graph: &'g TannerGraph,
    cfg: DecoderConfig,
    var_start: Vec<usize>,
    /// Check index of each edge (edges are numbered variable-major).
    edge_chk: Vec<usize>,
    chk_start: Vec<usize>,
    /// Edge ids grouped by check.
    chk_edges: Vec<usize>,
    thresholds: Vec<usize>,
    channel: Vec<u8>,
    v2c: Vec<u8>,
    c2v: Vec<u8>,
    decision: Vec<u8>,
    parity: Vec<u8>,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g TannerGraph, cfg: DecoderConfig) -> Result<Self> {
        cfg.validate(graph)?;
        let n = graph.n();
        let m = graph.m();
        let mut var_start = Vec::with_capacity(n + 1);
        let mut edge_chk = Vec::with_capacity(graph.edge_count());
        var_start.push(0);
        for j in 0..n {
            edge_chk.extend_from_slice(graph.var_neighbors(j));
            var_start.push(edge_chk.len());
        }
        let mut per_chk: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (e, &c) in edge_chk.iter().enumerate() {
            per_chk[c].push(e);
        }
        let mut chk_start = Vec::with_capacity(m + 1);
        let mut chk_edges = Vec::with_capacity(edge_chk.len());
        chk_start.push(0);
        for edges in per_chk {
            chk_edges.extend(edges);
            chk_start.push(chk_edges.len());
        }
        let thresholds = (0..n).map(|j| cfg.threshold(graph, j)).collect();
        let e = edge_chk.len();
        Ok(Decoder {
            graph,
            cfg,
            var_start,
            edge_chk,
            chk_start,
            chk_edges,
            thresholds,
            channel: vec![0; n],
            v2c: vec![0; e],
            c2v: vec![0; e],
            decision: vec![0; n],
            parity: vec![0; m],
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &'g TannerGraph {
        self.graph
    }

    /// Full trace for an initial error pattern under all-one transmission.
    pub fn decode(&mut self, initial: &ErrorPattern) -> DecodeTrace {
        let received = initial.to_bits(self.graph.n());
        let zero = vec![0u8; self.graph.n()];
        self.decode_against(&received, &zero)
    }

    /// Full trace for an arbitrary received word, with error sets reported
    /// relative to `codeword`.
    pub fn decode_against(&mut self, received: &[u8], codeword: &[u8]) -> DecodeTrace {
        let max_iterations = self.cfg.max_iterations;
        let mut error_sets = Vec::new();
        let mut state_hashes = Vec::new();
        let mut success = false;
        let mut syndrome_ok = false;
        self.run(received, |dec, syn_ok, _changed| {
            let errors: Vec<usize> = dec
                .decision
                .iter()
                .zip(codeword)
                .enumerate()
                .filter(|(_, (&d, &c))| d != c)
                .map(|(j, _)| j)
                .collect();
            let empty = errors.is_empty();
            error_sets.push(ErrorPattern::from_sorted(errors));
            state_hashes.push(dec.fingerprint());
            syndrome_ok = syn_ok;
            if empty && syn_ok {
                success = true;
            }
            !(dec.cfg.early_stop && syn_ok)
        });
        DecodeTrace {
            success,
            iterations_run: error_sets.len(),
            final_error_weight: error_sets.last().map_or(0, ErrorPattern::weight),
            error_sets,
            syndrome_satisfied: syndrome_ok,
            state_hashes,
            max_iterations,
        }
    }

    /// Success flag and residual weight only. Stops early once the messages
    /// reach a fixed point, since nothing can change afterwards.
    pub fn decode_outcome(&mut self, initial: &ErrorPattern) -> DecodeOutcome {
        self.channel.iter_mut().for_each(|b| *b = 0);
        for &j in initial.positions() {
            self.channel[j] = 1;
        }
        let received = std::mem::take(&mut self.channel);
        let mut iterations_run = 0;
        let mut success = false;
        let mut weight = 0;
        self.run(&received, |dec, syn_ok, changed| {
            iterations_run += 1;
            weight = dec.decision.iter().filter(|&&d| d != 0).count();
            if weight == 0 && syn_ok {
                success = true;
            }
            let stop = (dec.cfg.early_stop && syn_ok) || (iterations_run > 1 && !changed);
            !stop
        });
        self.channel = received;
        DecodeOutcome {
            success,
            iterations_run,
            final_error_weight: weight,
        }
    }

    /// Runs iterations 0..=max_iterations, calling `observe` after each with
    /// (decoder, syndrome satisfied, any variable message changed). Stops
    /// when `observe` returns false.
    fn run<F>(&mut self, received: &[u8], mut observe: F)
    where
        F: FnMut(&Self, bool, bool) -> bool,
    {
        let n = self.graph.n();
        debug_assert_eq!(received.len(), n);
        // Iteration 0: checks idle, variables forward the channel value.
        for (j, &r) in received.iter().enumerate() {
            self.decision[j] = r;
            for e in self.var_start[j]..self.var_start[j + 1] {
                self.v2c[e] = r;
            }
        }
        let syn = self.decision_syndrome_ok();
        if !observe(self, syn, true) {
            return;
        }
        for _ in 1..=self.cfg.max_iterations {
            // Check update: XOR of the extrinsic incoming messages.
            for c in 0..self.graph.m() {
                let edges = &self.chk_edges[self.chk_start[c]..self.chk_start[c + 1]];
                let total = edges.iter().fold(0u8, |acc, &e| acc ^ self.v2c[e]);
                for &e in edges {
                    self.c2v[e] = total ^ self.v2c[e];
                }
            }
            // Variable update.
            let mut changed = false;
            for (j, &r) in received.iter().enumerate() {
                let t = self.thresholds[j];
                let range = self.var_start[j]..self.var_start[j + 1];
                let disagree = self.c2v[range.clone()].iter().filter(|&&m| m != r).count();
                self.decision[j] = r ^ u8::from(disagree >= t);
                for e in range {
                    let extrinsic = disagree - usize::from(self.c2v[e] != r);
                    let out = r ^ u8::from(extrinsic >= t);
                    changed |= out != self.v2c[e];
                    self.v2c[e] = out;
                }
            }
            let syn = self.decision_syndrome_ok();
            if !observe(self, syn, changed) {
                return;
            }
        }
    }

    fn decision_syndrome_ok(&mut self) -> bool {
        self.parity.iter_mut().for_each(|p| *p = 0);
        for (j, &d) in self.decision.iter().enumerate() {
            if d != 0 {
                for e in self.var_start[j]..self.var_start[j + 1] {
                    self.parity[self.edge_chk[e]] ^= 1;
                }
            }
        }
        self.parity.iter().all(|&p| p == 0)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for chunk in self.v2c.chunks(64).chain(self.decision.chunks(64)) {
            let word = chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
            word.hash(&mut h);
        }
        h.finish()
    }
}

/// Convenience wrapper: decode one pattern with a fresh decoder.
pub fn decode(g: &TannerGraph, cfg: &DecoderConfig, initial: &ErrorPattern) -> Result<DecodeTrace> {
    Ok(Decoder::new(g, cfg.clone())?.decode(initial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::random_regular;

    /// Node 0 has degree 4; each of its checks also hangs off a private
    /// degree-1 helper variable (1..=4).
    fn star4() -> TannerGraph {
        TannerGraph::from_var_adj(
            4,
            vec![vec![0, 1, 2, 3], vec![0], vec![1], vec![2], vec![3]],
        )
        .unwrap()
    }

    #[test]
    fn orders_and_thresholds() {
        assert_eq!(max_order(3), 0);
        assert_eq!(max_order(4), 1);
        assert_eq!(max_order(5), 1);
        assert_eq!(max_order(6), 2);
        assert_eq!(max_order(1), 0);
        let g = star4();
        let ga = DecoderConfig::gallager_a(&g);
        assert_eq!(ga.orders, vec![1, 0, 0, 0, 0]);
        assert_eq!(ga.threshold(&g, 0), 3);
        assert!(DecoderConfig::mb(&g, 1).is_err());
    }

    #[test]
    fn empty_input_succeeds_at_iteration_zero() {
        let g = random_regular(60, 3, 6, true, 1).unwrap();
        let trace = decode(&g, &DecoderConfig::gallager_a(&g), &ErrorPattern::empty()).unwrap();
        assert!(trace.success);
        assert_eq!(trace.iterations_run, 1);
        assert_eq!(trace.error_sets, vec![ErrorPattern::empty()]);
        assert_eq!(trace.final_error_weight, 0);
    }

    #[test]
    fn degree4_order1_flip_threshold() {
        // Node 0 (d=4, ω=1) needs 3 disagreeing extrinsic messages. A helper
        // in error makes its check report -m0 to node 0.
        let g = star4();
        let cfg = DecoderConfig::gallager_a(&g)
            .with_max_iterations(1)
            .with_early_stop(false);
        let mut dec = Decoder::new(&g, cfg).unwrap();

        // Two wrong helpers: at most 2 extrinsic disagreements -> never flips.
        let t = dec.decode(&ErrorPattern::new(vec![1, 2], 5).unwrap());
        assert!(!t.error_sets[1].contains(0));
        assert_eq!(dec.v2c[..4], [0, 0, 0, 0]);

        // Three wrong helpers: the edge toward check 3 sees 3 extrinsic -m0.
        let t = dec.decode(&ErrorPattern::new(vec![1, 2, 3], 5).unwrap());
        assert_eq!(dec.v2c[..4], [0, 0, 0, 1]);
        // Decision uses all four messages: 3 >= 3 -> flipped.
        assert!(t.error_sets[1].contains(0));
    }

    #[test]
    fn syndrome() {
        let g = star4();
        assert!(check_syndrome(&g, &ErrorPattern::empty()));
        assert!(!check_syndrome(&g, &ErrorPattern::new(vec![1], 5).unwrap()));
        // Node 0 plus all its helpers hits every check twice.
        assert!(check_syndrome(
            &g,
            &ErrorPattern::new(vec![0, 1, 2, 3, 4], 5).unwrap()
        ));
    }

    #[test]
    fn outcome_agrees_with_trace() {
        let g = random_regular(48, 3, 6, true, 5).unwrap();
        let cfg = DecoderConfig::gallager_a(&g);
        let mut dec = Decoder::new(&g, cfg).unwrap();
        for a in 0..12 {
            for b in (a + 1)..24 {
                let p = ErrorPattern::new(vec![a, b, (a * 7 + b * 3) % 48], 48);
                let Ok(p) = p else { continue };
                let t = dec.decode(&p);
                let o = dec.decode_outcome(&p);
                assert_eq!(t.success, o.success);
                if t.success {
                    assert_eq!(t.iterations_run, o.iterations_run);
                }
                assert_eq!(t.final_error_weight, o.final_error_weight);
            }
        }
    }

    #[test]
    fn deterministic() {
        let g = random_regular(60, 3, 6, true, 9).unwrap();
        let cfg = DecoderConfig::gallager_a(&g);
        let p = ErrorPattern::new(vec![0, 5, 17, 33, 41, 59], 60).unwrap();
        assert_eq!(decode(&g, &cfg, &p).unwrap(), decode(&g, &cfg, &p).unwrap());
    }

    #[test]
    fn pattern_validation() {
        assert!(ErrorPattern::new(vec![3, 1, 3], 5).is_err());
        assert!(ErrorPattern::new(vec![5], 5).is_err());
        let p = ErrorPattern::new(vec![4, 0, 2], 5).unwrap();
        assert_eq!(p.positions(), &[0, 2, 4]);
        assert_eq!(ErrorPattern::from_bits(&p.to_bits(5)), p);
    }
}
