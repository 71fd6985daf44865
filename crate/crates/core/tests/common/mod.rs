#![allow(dead_code)]

use std::collections::BTreeMap;

use ldpc_floor::decoder::Decoder;
use ldpc_floor::failure::{classify, FailureKind};
use ldpc_floor::{DecoderConfig, ErrorPattern, TannerGraph};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Reference search: decode every pattern of weight <= max_weight, one mask
/// at a time, with a fresh decoder per pattern.
pub fn naive_oracle(
    g: &TannerGraph,
    cfg: &DecoderConfig,
    max_weight: usize,
) -> (Option<usize>, u64, BTreeMap<FailureKind, u64>) {
    let n = g.n();
    assert!(n <= 24);
    let mut by_weight: BTreeMap<usize, (u64, BTreeMap<FailureKind, u64>)> = BTreeMap::new();
    for mask in 0u32..(1 << n) {
        let w = mask.count_ones() as usize;
        if w == 0 || w > max_weight {
            continue;
        }
        let bits: Vec<u8> = (0..n).map(|j| (mask >> j & 1) as u8).collect();
        let pattern = ErrorPattern::from_bits(&bits);
        let trace = Decoder::new(g, cfg.clone()).unwrap().decode(&pattern);
        if !trace.success {
            let kind = classify(&trace).unwrap().kind;
            let entry = by_weight.entry(w).or_default();
            entry.0 += 1;
            *entry.1.entry(kind).or_default() += 1;
        }
    }
    match by_weight.into_iter().next() {
        Some((w, (count, classes))) => (Some(w), count, classes),
        None => (None, 0, BTreeMap::new()),
    }
}

/// Hamming (15, 11): column j of H is the binary expansion of j + 1.
pub fn hamming15() -> TannerGraph {
    let var_adj = (1..=15usize)
        .map(|x| (0..4).filter(|b| x >> b & 1 == 1).collect())
        .collect();
    TannerGraph::from_var_adj(4, var_adj).unwrap()
}

/// Degree-3 graph in which variables 3, 17 and 42 form a 6-cycle through
/// checks 0, 1, 2, and each sends its third edge to its own private check
/// (3, 4, 5). All other variables use checks 6..36 only.
pub fn six_cycle_graph() -> TannerGraph {
    let n = 50;
    let mut var_adj: Vec<Vec<usize>> = Vec::with_capacity(n);
    for v in 0..n {
        let checks = match v {
            3 => vec![0, 2, 3],
            17 => vec![0, 1, 4],
            42 => vec![1, 2, 5],
            _ => vec![6 + v % 10, 16 + (v / 10 + v) % 10, 26 + (v / 3) % 10],
        };
        var_adj.push(checks);
    }
    TannerGraph::from_var_adj(36, var_adj).unwrap()
}

/// A nonzero codeword found by Gaussian elimination over GF(2), if any.
pub fn nonzero_codeword(g: &TannerGraph) -> Option<Vec<u8>> {
    let (n, m) = (g.n(), g.m());
    let mut rows: Vec<Vec<u8>> = (0..m)
        .map(|c| {
            let mut r = vec![0u8; n];
            for &v in g.chk_neighbors(c) {
                r[v] = 1;
            }
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..m).find(|&i| rows[i][col] == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..m {
            if i != r && rows[i][col] == 1 {
                let pivot = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == m {
            break;
        }
    }
    let free = (0..n).find(|c| !pivots.contains(c))?;
    let mut word = vec![0u8; n];
    word[free] = 1;
    for (i, &pc) in pivots.iter().enumerate() {
        word[pc] = rows[i][free];
    }
    Some(word)
}

/// Random graph: every variable picks its degree from `degrees` and
/// distinct checks uniformly; checks left empty get one extra edge.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, m: usize, degrees: &[usize]) -> TannerGraph {
    let mut var_adj: Vec<Vec<usize>> = Vec::with_capacity(n);
    let all: Vec<usize> = (0..m).collect();
    for _ in 0..n {
        let d = *degrees.choose(rng).unwrap();
        let mut checks: Vec<usize> = all.choose_multiple(rng, d.min(m)).copied().collect();
        checks.sort_unstable();
        var_adj.push(checks);
    }
    let mut used = vec![false; m];
    for checks in &var_adj {
        for &c in checks {
            used[c] = true;
        }
    }
    for c in (0..m).filter(|&c| !used[c]) {
        let v = rng.random_range(0..n);
        var_adj[v].push(c);
    }
    TannerGraph::from_var_adj(m, var_adj).unwrap()
}

/// Random per-node orders, each within its admissible range.
pub fn random_orders<R: Rng>(rng: &mut R, g: &TannerGraph) -> Vec<usize> {
    g.var_degrees()
        .into_iter()
        .map(|d| rng.random_range(0..=ldpc_floor::decoder::max_order(d)))
        .collect()
}
