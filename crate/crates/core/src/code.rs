//! Tanner graph representation of an LDPC code and the alist file format.
//!
//! Nodes are 0-based in memory. The alist format uses 1-based indices and
//! optional zero padding up to the declared maximum degree.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Bipartite graph between `n` variable nodes and `m` check nodes.
///
/// Immutable once built; adjacency lists keep the order in which they were
/// supplied (alist order for loaded codes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    m: usize,
    var_adj: Vec<Vec<usize>>,
    chk_adj: Vec<Vec<usize>>,
}

/// Edge-perspective degree distribution pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    /// degree -> fraction of edges attached to variable nodes of that degree
    pub lambda_coeffs: BTreeMap<usize, f64>,
    /// degree -> fraction of edges attached to check nodes of that degree
    pub rho_coeffs: BTreeMap<usize, f64>,
}

impl TannerGraph {
    /// Builds a graph from per-variable check lists. The check-side lists are
    /// derived in variable order.
    pub fn from_var_adj(m: usize, var_adj: Vec<Vec<usize>>) -> Result<Self> {
        let n = var_adj.len();
        let mut chk_adj = vec![Vec::new(); m];
        for (j, checks) in var_adj.iter().enumerate() {
            for &c in checks {
                if c >= m {
                    return Err(Error::Graph(format!(
                        "variable {j} references check {c} but m = {m}"
                    )));
                }
                chk_adj[c].push(j);
            }
        }
        Self::from_parts(n, m, var_adj, chk_adj)
    }

    /// Builds a graph from a list of `(variable, check)` edges.
    pub fn from_edges(n: usize, m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut var_adj = vec![Vec::new(); n];
        for &(v, c) in edges {
            if v >= n {
                return Err(Error::Graph(format!(
                    "edge variable {v} out of range (n = {n})"
                )));
            }
            var_adj[v].push(c);
        }
        Self::from_var_adj(m, var_adj)
    }

    fn from_parts(
        n: usize,
        m: usize,
        var_adj: Vec<Vec<usize>>,
        chk_adj: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Graph(
                "graph needs at least one variable and one check".into(),
            ));
        }
        for (j, checks) in var_adj.iter().enumerate() {
            if checks.is_empty() {
                return Err(Error::Graph(format!("variable {j} has degree 0")));
            }
            let mut sorted = checks.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!("duplicate edge at variable {j}")));
            }
        }
        for (c, vars) in chk_adj.iter().enumerate() {
            if vars.is_empty() {
                return Err(Error::Graph(format!("check {c} has degree 0")));
            }
        }
        Ok(TannerGraph {
            n,
            m,
            var_adj,
            chk_adj,
        })
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of check nodes.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn var_adj(&self) -> &[Vec<usize>] {
        &self.var_adj
    }

    pub fn chk_adj(&self) -> &[Vec<usize>] {
        &self.chk_adj
    }

    pub fn var_neighbors(&self, j: usize) -> &[usize] {
        &self.var_adj[j]
    }

    pub fn chk_neighbors(&self, c: usize) -> &[usize] {
        &self.chk_adj[c]
    }

    pub fn var_degree(&self, j: usize) -> usize {
        self.var_adj[j].len()
    }

    pub fn var_degrees(&self) -> Vec<usize> {
        self.var_adj.iter().map(Vec::len).collect()
    }

    pub fn chk_degrees(&self) -> Vec<usize> {
        self.chk_adj.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    /// Adjacency compared as sets, ignoring list order.
    pub fn same_adjacency(&self, other: &TannerGraph) -> bool {
        fn sorted(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
            adj.iter()
                .map(|l| {
                    let mut l = l.clone();
                    l.sort_unstable();
                    l
                })
                .collect()
        }
        self.n == other.n
            && self.m == other.m
            && sorted(&self.var_adj) == sorted(&other.var_adj)
            && sorted(&self.chk_adj) == sorted(&other.chk_adj)
    }

    /// Edge-perspective (λ, ρ).
    pub fn degree_distributions(&self) -> DegreeDistribution {
        let edges = self.edge_count() as f64;
        let tally = |adj: &[Vec<usize>]| {
            let mut per_degree: BTreeMap<usize, usize> = BTreeMap::new();
            for l in adj {
                *per_degree.entry(l.len()).or_default() += l.len();
            }
            per_degree
                .into_iter()
                .map(|(d, e)| (d, e as f64 / edges))
                .collect::<BTreeMap<_, _>>()
        };
        DegreeDistribution {
            lambda_coeffs: tally(&self.var_adj),
            rho_coeffs: tally(&self.chk_adj),
        }
    }

    /// True iff two distinct variable nodes share at least two checks.
    pub fn has_4cycles(&self) -> bool {
        let mut seen_from = vec![usize::MAX; self.n];
        for j in 0..self.n {
            for &c in &self.var_adj[j] {
                for &v in &self.chk_adj[c] {
                    if v == j {
                        continue;
                    }
                    if seen_from[v] == j {
                        return true;
                    }
                    seen_from[v] = j;
                }
            }
        }
        false
    }

    /// Serializes to alist, zero-padding each list to the maximum degree.
    pub fn to_alist(&self) -> String {
        let vdeg = self.var_degrees();
        let cdeg = self.chk_degrees();
        let max_v = vdeg.iter().copied().max().unwrap_or(0);
        let max_c = cdeg.iter().copied().max().unwrap_or(0);
        let join = |xs: &mut dyn Iterator<Item = usize>| {
            xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };

        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.m);
        let _ = writeln!(out, "{max_v} {max_c}");
        let _ = writeln!(out, "{}", join(&mut vdeg.iter().copied()));
        let _ = writeln!(out, "{}", join(&mut cdeg.iter().copied()));
        for (adj, width) in [(&self.var_adj, max_v), (&self.chk_adj, max_c)] {
            for list in adj.iter() {
                let padded = list
                    .iter()
                    .map(|&x| x + 1)
                    .chain(std::iter::repeat_n(0, width - list.len()));
                let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
            }
        }
        out
    }
}

/// Hex SHA-256 of the alist text, used to tie artifacts to a code.
pub fn code_hash(alist_text: &str) -> String {
    hex::encode(Sha256::digest(alist_text.as_bytes()))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line as (1-based line number, integers).
    fn next_record(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        for (idx, raw) in self.inner.by_ref() {
            let line = idx + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() {
                continue;
            }
            let values = raw
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| {
                        Error::alist(line, format!("not a non-negative integer: {tok:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((line, values));
        }
        Err(Error::alist(
            0,
            format!("unexpected end of input while reading {what}"),
        ))
    }
}

/// Parses alist text into a validated graph.
pub fn load_alist(text: &str) -> Result<TannerGraph> {
    let mut lines = Lines::new(text);

    let (line, header) = lines.next_record("header")?;
    let [n, m] = header[..] else {
        return Err(Error::alist(line, "header must be `n m`"));
    };
    if n == 0 || m == 0 {
        return Err(Error::alist(line, "n and m must be positive"));
    }

    let (line, maxes) = lines.next_record("maximum degrees")?;
    let [max_v, max_c] = maxes[..] else {
        return Err(Error::alist(
            line,
            "second line must be `max_var_degree max_chk_degree`",
        ));
    };

    let (line, vdeg) = lines.next_record("variable degrees")?;
    if vdeg.len() != n {
        return Err(Error::alist(
            line,
            format!("expected {n} variable degrees, found {}", vdeg.len()),
        ));
    }
    if let Some(&d) = vdeg.iter().find(|&&d| d == 0 || d > max_v) {
        return Err(Error::alist(
            line,
            format!("variable degree {d} outside [1, {max_v}]"),
        ));
    }
    let (line, cdeg) = lines.next_record("check degrees")?;
    if cdeg.len() != m {
        return Err(Error::alist(
            line,
            format!("expected {m} check degrees, found {}", cdeg.len()),
        ));
    }
    if let Some(&d) = cdeg.iter().find(|&&d| d == 0 || d > max_c) {
        return Err(Error::alist(
            line,
            format!("check degree {d} outside [1, {max_c}]"),
        ));
    }

    let mut read_lists = |count: usize, degrees: &[usize], max: usize, range: usize, side: &str| {
        let mut lists = Vec::with_capacity(count);
        let mut line_nos = Vec::with_capacity(count);
        for (k, &deg) in degrees.iter().enumerate() {
            let (line, values) = lines.next_record(side)?;
            if values.len() < deg {
                return Err(Error::alist(
                    line,
                    format!(
                        "{side} {} declares degree {deg} but lists {} entries",
                        k + 1,
                        values.len()
                    ),
                ));
            }
            if values.len() > max.max(deg) {
                return Err(Error::alist(
                    line,
                    format!("{side} {} has more entries than the maximum degree", k + 1),
                ));
            }
            let (used, padding) = values.split_at(deg);
            if padding.iter().any(|&x| x != 0) {
                return Err(Error::alist(
                    line,
                    format!(
                        "{side} {} has nonzero entries beyond declared degree {deg}",
                        k + 1
                    ),
                ));
            }
            let mut list = Vec::with_capacity(deg);
            for &x in used {
                if x == 0 || x > range {
                    return Err(Error::alist(
                        line,
                        format!("index {x} out of range [1, {range}]"),
                    ));
                }
                if list.contains(&(x - 1)) {
                    return Err(Error::alist(line, format!("duplicate edge to {x}")));
                }
                list.push(x - 1);
            }
            lists.push(list);
            line_nos.push(line);
        }
        Ok((lists, line_nos))
    };

    let (var_adj, _) = read_lists(n, &vdeg, max_v, m, "variable")?;
    let (chk_adj, chk_lines) = read_lists(m, &cdeg, max_c, n, "check")?;

    // The check-side lists must describe the same edge set.
    let mut expected: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, checks) in var_adj.iter().enumerate() {
        for &c in checks {
            expected[c].push(j);
        }
    }
    for c in 0..m {
        let mut listed = chk_adj[c].clone();
        listed.sort_unstable();
        if listed != expected[c] {
            return Err(Error::alist(
                chk_lines[c],
                format!(
                    "check {} adjacency disagrees with the variable lists",
                    c + 1
                ),
            ));
        }
    }

    TannerGraph::from_parts(n, m, var_adj, chk_adj)
}

/// Random `(dv, dc)`-regular graph on `n` variables, optionally rejecting
/// 4-cycles. Sockets are filled greedily with restarts on dead ends.
pub fn random_regular(
    n: usize,
    dv: usize,
    dc: usize,
    avoid_4cycles: bool,
    seed: u64,
) -> Result<TannerGraph> {
    if dv == 0 || dc == 0 || !(n * dv).is_multiple_of(dc) {
        return Err(Error::Graph(format!(
            "n*dv = {} is not divisible by dc = {dc}",
            n * dv
        )));
    }
    let m = n * dv / dc;
    if dv > m {
        return Err(Error::Graph(format!(
            "dv = {dv} exceeds the number of checks {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const ATTEMPTS: usize = 1000;
    for _ in 0..ATTEMPTS {
        if let Some(var_adj) = try_regular(n, m, dv, dc, avoid_4cycles, &mut rng) {
            return TannerGraph::from_var_adj(m, var_adj);
        }
    }
    Err(Error::Graph(format!(
        "no ({dv},{dc}) graph with n = {n} found after {ATTEMPTS} attempts"
    )))
}

fn try_regular(
    n: usize,
    m: usize,
    dv: usize,
    dc: usize,
    avoid_4cycles: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Vec<usize>>> {
    let mut free = vec![dc; m];
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(dv); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(dc); m];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut blocked = vec![false; m];

    for &j in &order {
        for _ in 0..dv {
            // Checks that would close a 4-cycle: anything sharing a variable
            // with a check already chosen for j.
            blocked.iter_mut().for_each(|b| *b = false);
            for &c in &var_adj[j] {
                blocked[c] = true;
                if avoid_4cycles {
                    for &v in &chk_adj[c] {
                        for &c2 in &var_adj[v] {
                            blocked[c2] = true;
                        }
                    }
                }
            }
            // Prefer the emptiest checks so sockets run out evenly.
            let best = (0..m)
                .filter(|&c| free[c] > 0 && !blocked[c])
                .map(|c| free[c])
                .max()?;
            let candidates: Vec<usize> =
                (0..m).filter(|&c| free[c] == best && !blocked[c]).collect();
            let c = candidates[rng.random_range(0..candidates.len())];
            free[c] -= 1;
            var_adj[j].push(c);
            chk_adj[c].push(j);
        }
    }
    Some(var_adj)
}
