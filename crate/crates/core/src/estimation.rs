//! Closed-form FER/BER estimates from the smallest uncorrectable weight.
//!
//! Given the block length `n`, the smallest failing weight `J`, the number
//! `|E_J|` of weight-`J` failures, a threshold `N0` and the average residual
//! weight `M` at `N0`, the estimates are sums of terms
//!
//! ```text
//!     a_i = |E_J| C(n-J, i-J) ε^i (1-ε)^(n-i)        (J <= i <= n)
//!     p_i = C(n, i) ε^i (1-ε)^(n-i)                  (0 <= i <= n)
//! ```
//!
//! with `FER_L(N) = sum_{J..=N} a_i`, `FER_U(N) = FER_L(N) + sum_{i>N} p_i`.
//! Every term is evaluated in the log domain and summed after shifting by the
//! largest exponent, so block lengths in the thousands neither overflow the
//! binomials nor underflow the powers.

use serde::{Deserialize, Serialize};

use crate::combin::{binomial, binomial_sum};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorInput {
    pub n: usize,
    pub j: usize,
    pub e_j_count: u64,
    pub n0: usize,
    pub m_avg: f64,
}

impl EstimatorInput {
    pub fn validate(&self) -> Result<()> {
        let EstimatorInput {
            n,
            j,
            e_j_count,
            n0,
            m_avg,
        } = *self;
        if !(1 <= j && j <= n0 && n0 <= n) {
            return Err(Error::Estimator(format!(
                "need 1 <= J <= N0 <= n, got J={j}, N0={n0}, n={n}"
            )));
        }
        if e_j_count == 0 || u128::from(e_j_count) > binomial(n, j) {
            return Err(Error::Estimator(format!(
                "|E_J| = {e_j_count} outside [1, C({n},{j})]"
            )));
        }
        if !(0.0..=n as f64).contains(&m_avg) {
            return Err(Error::Estimator(format!("M = {m_avg} outside [0, {n}]")));
        }
        Ok(())
    }
}

/// One row of an estimate curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub fer_lower: f64,
    pub fer_upper: f64,
    pub ber: f64,
    pub p_j: f64,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum exp(l)` over the given log terms, shifted by their maximum.
fn sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut acc = CompensatedSum::default();
    for &l in logs {
        acc.add((l - max).exp());
    }
    acc.value() * max.exp()
}

/// `ln C(n, k)`, accurate to a few ulps.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let rest = (n - k) as f64;
    let mut acc = CompensatedSum::default();
    for t in 1..=k {
        acc.add((rest / t as f64).ln_1p());
    }
    acc.value()
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Epsilon(eps));
    }
    Ok(())
}

/// Log-binomial tables for one `(n, J, |E_J|)` triple; reusable across ε.
#[derive(Clone, Debug)]
pub struct Estimator {
    n: usize,
    j: usize,
    /// ln C(n, i), i = 0..=n
    ln_c_n: Vec<f64>,
    /// ln(|E_J| C(n-J, i-J)), i = J..=n, stored at index i - J
    ln_a_coeff: Vec<f64>,
}

/// Per-ε log terms.
struct Terms {
    /// ln p_i, i = 0..=n
    ln_p: Vec<f64>,
    /// ln a_i at index i - J
    ln_a: Vec<f64>,
}

impl Estimator {
    pub fn new(n: usize, j: usize, e_j_count: u64) -> Result<Self> {
        if j == 0 || j > n {
            return Err(Error::Estimator(format!(
                "need 1 <= J <= n, got J={j}, n={n}"
            )));
        }
        let ln_c_n: Vec<f64> = (0..=n).map(|i| ln_choose(n, i)).collect();
        let ln_e = (e_j_count as f64).ln();
        let ln_a_coeff = (j..=n).map(|i| ln_e + ln_choose(n - j, i - j)).collect();
        Ok(Estimator {
            n,
            j,
            ln_c_n,
            ln_a_coeff,
        })
    }

    pub fn for_input(inp: &EstimatorInput) -> Result<Self> {
        inp.validate()?;
        Self::new(inp.n, inp.j, inp.e_j_count)
    }

    fn terms(&self, eps: f64) -> Terms {
        let ln_eps = eps.ln();
        let ln_q = (-eps).ln_1p();
        let ln_pow = |i: usize| i as f64 * ln_eps + (self.n - i) as f64 * ln_q;
        Terms {
            ln_p: (0..=self.n).map(|i| self.ln_c_n[i] + ln_pow(i)).collect(),
            ln_a: (self.j..=self.n)
                .map(|i| self.ln_a_coeff[i - self.j] + ln_pow(i))
                .collect(),
        }
    }

    fn check_cap(&self, n_cap: usize) -> Result<()> {
        if n_cap < self.j || n_cap > self.n {
            return Err(Error::Estimator(format!(
                "N = {n_cap} outside [J, n] = [{}, {}]",
                self.j, self.n
            )));
        }
        Ok(())
    }

    /// `P(J) = |E_J| ε^J (1-ε)^(n-J)`.
    pub fn p_j(&self, eps: f64) -> Result<f64> {
        check_epsilon(eps)?;
        if eps == 0.0 {
            return Ok(0.0);
        }
        Ok(self.terms(eps).ln_a[0].exp())
    }

    pub fn fer_lower(&self, n_cap: usize, eps: f64) -> Result<f64> {
        check_epsilon(eps)?;
        self.check_cap(n_cap)?;
        if eps == 0.0 {
            return Ok(0.0);
        }
        let t = self.terms(eps);
        Ok(sum_exp(&t.ln_a[..=n_cap - self.j]))
    }

    pub fn fer_upper(&self, n_cap: usize, eps: f64) -> Result<f64> {
        check_epsilon(eps)?;
        self.check_cap(n_cap)?;
        if eps == 0.0 {
            return Ok(0.0);
        }
        let t = self.terms(eps);
        let mut logs = t.ln_a[..=n_cap - self.j].to_vec();
        logs.extend_from_slice(&t.ln_p[n_cap + 1..]);
        Ok(sum_exp(&logs))
    }

    /// `FER_U(N)` for every `N` in `J..=n`, indexed by `N - J`.
    pub fn fer_upper_profile(&self, eps: f64) -> Result<Vec<f64>> {
        check_epsilon(eps)?;
        let len = self.n - self.j + 1;
        if eps == 0.0 {
            return Ok(vec![0.0; len]);
        }
        let t = self.terms(eps);
        let shift = t
            .ln_a
            .iter()
            .chain(&t.ln_p)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        // prefix[k] = sum a_{J..=J+k}; suffix[i] = sum p_{i..=n}
        let mut prefix = Vec::with_capacity(len);
        let mut acc = CompensatedSum::default();
        for &l in &t.ln_a {
            acc.add((l - shift).exp());
            prefix.push(acc.value());
        }
        let mut suffix = vec![0.0; self.n + 2];
        let mut acc = CompensatedSum::default();
        for i in (0..=self.n).rev() {
            acc.add((t.ln_p[i] - shift).exp());
            suffix[i] = acc.value();
        }
        let scale = shift.exp();
        Ok((0..len)
            .map(|k| (prefix[k] + suffix[self.j + k + 1]) * scale)
            .collect())
    }

    /// BER estimate: weights `J..N0-1` leave `J` residual errors, weights
    /// `N0..=n` leave `M` on average.
    pub fn ber(&self, n0: usize, m_avg: f64, eps: f64) -> Result<f64> {
        check_epsilon(eps)?;
        self.check_cap(n0)?;
        if eps == 0.0 {
            return Ok(0.0);
        }
        let t = self.terms(eps);
        let below = sum_exp(&t.ln_a[..n0 - self.j]);
        let mut above_logs = vec![t.ln_a[n0 - self.j]];
        above_logs.extend_from_slice(&t.ln_p[n0 + 1..]);
        let above = sum_exp(&above_logs);
        let n = self.n as f64;
        Ok(self.j as f64 / n * below + m_avg / n * above)
    }
}

/// `P[weight > N]` for a Binomial(n, ε) input weight, summed directly.
pub fn binomial_upper_tail(n: usize, n_cap: usize, eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if n_cap >= n {
        return Ok(0.0);
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let ln_eps = eps.ln();
    let ln_q = (-eps).ln_1p();
    let logs: Vec<f64> = (n_cap + 1..=n)
        .map(|i| ln_choose(n, i) + i as f64 * ln_eps + (n - i) as f64 * ln_q)
        .collect();
    Ok(sum_exp(&logs))
}

pub fn fer_lower(inp: &EstimatorInput, n_cap: usize, eps: f64) -> Result<f64> {
    Estimator::for_input(inp)?.fer_lower(n_cap, eps)
}

pub fn fer_upper(inp: &EstimatorInput, n_cap: usize, eps: f64) -> Result<f64> {
    Estimator::for_input(inp)?.fer_upper(n_cap, eps)
}

pub fn ber_estimate(inp: &EstimatorInput, eps: f64) -> Result<f64> {
    Estimator::for_input(inp)?.ber(inp.n0, inp.m_avg, eps)
}

/// A row of the estimate CSV for cap `n_cap`. Values are clamped to
/// `[0, 1]`, since the truncated superset count can overshoot at large ε.
pub fn rate_point(
    est: &Estimator,
    inp: &EstimatorInput,
    n_cap: usize,
    eps: f64,
) -> Result<RatePoint> {
    Ok(RatePoint {
        epsilon: eps,
        fer_lower: est.fer_lower(n_cap, eps)?.min(1.0),
        fer_upper: est.fer_upper(n_cap, eps)?.min(1.0),
        ber: est.ber(inp.n0, inp.m_avg, eps)?.min(1.0),
        p_j: est.p_j(eps)?.min(1.0),
    })
}

/// Both approximations of the number of weight-`i` patterns containing at
/// least one weight-`J` failure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupersetCount {
    /// `|E_J| C(n-J, i-J)`, used by the FER estimates.
    pub truncated: f64,
    /// `C(n,i) [1 - (1 - |E_J|/C(n,J))^C(i,J)]`
    pub untruncated: f64,
}

fn ln_one_minus_q(n: usize, j: usize, e_j_count: u64) -> (f64, f64) {
    let ln_q = (e_j_count as f64).ln() - ln_choose(n, j);
    let q = ln_q.exp();
    (ln_q, (-q).ln_1p())
}

pub fn s_prime_count(n: usize, j: usize, e_j_count: u64, i: usize) -> Result<SupersetCount> {
    if i <= j || i > n {
        return Err(Error::Estimator(format!(
            "need J < i <= n, got J={j}, i={i}, n={n}"
        )));
    }
    if e_j_count == 0 {
        return Ok(SupersetCount {
            truncated: 0.0,
            untruncated: 0.0,
        });
    }
    let truncated = ((e_j_count as f64).ln() + ln_choose(n - j, i - j)).exp();
    let (_, ln_1mq) = ln_one_minus_q(n, j, e_j_count);
    let trials = binomial(i, j) as f64;
    // 1 - (1-q)^k = -expm1(k ln(1-q))
    let hit = -(trials * ln_1mq).exp_m1();
    let untruncated = (ln_choose(n, i) + hit.ln()).exp();
    Ok(SupersetCount {
        truncated,
        untruncated,
    })
}

/// `C(n,i) C(i,J) (1-q)^(C(i,J)-1) q` with `q = |E_J|/C(n,J)`: patterns with
/// exactly one weight-`J` failure inside.
pub fn s_double_prime_count(n: usize, j: usize, e_j_count: u64, i: usize) -> Result<f64> {
    if i <= j || i > n {
        return Err(Error::Estimator(format!(
            "need J < i <= n, got J={j}, i={i}, n={n}"
        )));
    }
    if e_j_count == 0 {
        return Ok(0.0);
    }
    let (ln_q, ln_1mq) = ln_one_minus_q(n, j, e_j_count);
    let trials = binomial(i, j) as f64;
    Ok((ln_choose(n, i) + ln_choose(i, j) + (trials - 1.0) * ln_1mq + ln_q).exp())
}

/// Monte Carlo cost over enumeration cost: `m / (p * sum_{i=1}^{J} C(n,i))`.
pub fn complexity_ratio(n: usize, j: usize, p: f64, m: f64) -> f64 {
    m / (p * binomial_sum(n, 1, j) as f64)
}

/// FER below which enumeration is cheaper than one Monte Carlo point.
pub fn break_even_fer(n: usize, j: usize, m: f64) -> f64 {
    m / binomial_sum(n, 1, j) as f64
}

/// Log-spaced grid `start..=stop` with `points` values.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    for e in [start, stop] {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Epsilon(e));
        }
    }
    if points == 0 {
        return Err(Error::Estimator("grid needs at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.log10(), stop.log10());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            if k + 1 == points {
                stop
            } else {
                10f64.powf(a + step * k as f64)
            }
        })
        .collect())
}
