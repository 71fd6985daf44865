//! Exact binomials and colexicographic ranking of fixed-weight subsets.
//!
//! In colex order a subset `c_1 < c_2 < ... < c_k` has rank
//! `sum_i C(c_i, i)`, so contiguous rank ranges split the search space into
//! deterministic chunks.

use crate::decoder::ErrorPattern;
use crate::error::{Error, Result};

/// `C(n, k)` as an exact integer; saturates at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by i + 1; cancel the common factor first
        // so the intermediate product stays small.
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        match (acc / g).checked_mul(num / (den / g)) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `sum_{i=lo}^{hi} C(n, i)`.
pub fn binomial_sum(n: usize, lo: usize, hi: usize) -> u128 {
    (lo..=hi)
        .map(|i| binomial(n, i))
        .fold(0u128, u128::saturating_add)
}

/// Colex rank of a sorted subset.
pub fn rank_of(pattern: &ErrorPattern) -> u128 {
    pattern
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c, i + 1))
        .sum()
}

/// The `rank`-th `weight`-subset of `0..n` in colex order.
pub fn pattern_from_rank(n: usize, weight: usize, rank: u128) -> Result<ErrorPattern> {
    if weight > n || rank >= binomial(n, weight) {
        return Err(Error::RankOutOfRange { n, weight, rank });
    }
    let mut positions = vec![0usize; weight];
    let mut r = rank;
    let mut hi = n;
    for i in (1..=weight).rev() {
        // Largest c < hi with C(c, i) <= r.
        let (mut lo, mut top) = (i - 1, hi - 1);
        while lo < top {
            let mid = (lo + top).div_ceil(2);
            if binomial(mid, i) <= r {
                lo = mid;
            } else {
                top = mid - 1;
            }
        }
        positions[i - 1] = lo;
        r -= binomial(lo, i);
        hi = lo;
    }
    Ok(ErrorPattern::from_sorted(positions))
}

/// Advances a sorted subset to its colex successor within `0..n`.
/// Returns false when `positions` was the last subset.
pub fn next_colex(positions: &mut [usize], n: usize) -> bool {
    let k = positions.len();
    for i in 0..k {
        let limit = if i + 1 < k { positions[i + 1] } else { n };
        if positions[i] + 1 < limit {
            positions[i] += 1;
            for (j, p) in positions.iter_mut().enumerate().take(i) {
                *p = j;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All k-subsets of 0..n sorted by colex order, by brute force.
    fn colex_oracle(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut all: Vec<Vec<usize>> = (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|&j| m >> j & 1 == 1).collect())
            .collect();
        all.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
        all
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(200, 3), 1_313_400);
        assert_eq!(binomial(1008, 3), 170_191_056);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(100, 50), 100_891_344_545_564_193_334_812_497_256);
        assert_eq!(binomial_sum(200, 1, 3), 1_333_500);
    }

    #[test]
    fn colex_small_cases() {
        let order = colex_oracle(5, 2);
        assert_eq!(order.len(), 10);
        assert_eq!(pattern_from_rank(5, 2, 0).unwrap().positions(), &[0, 1]);
        assert_eq!(pattern_from_rank(5, 2, 9).unwrap().positions(), &[3, 4]);
        for (r, s) in order.iter().enumerate() {
            assert_eq!(
                pattern_from_rank(5, 2, r as u128).unwrap().positions(),
                &s[..]
            );
        }
        assert!(matches!(
            pattern_from_rank(5, 2, 10),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn rank_round_trip_8_3() {
        for r in 0..binomial(8, 3) {
            assert_eq!(rank_of(&pattern_from_rank(8, 3, r).unwrap()), r);
        }
    }

    #[test]
    fn successor_walks_oracle_order() {
        for (n, k) in [(6, 0), (6, 1), (7, 3), (9, 4), (5, 5)] {
            let order = colex_oracle(n, k);
            let mut cur: Vec<usize> = (0..k).collect();
            for (idx, s) in order.iter().enumerate() {
                assert_eq!(&cur, s);
                assert_eq!(next_colex(&mut cur, n), idx + 1 < order.len());
            }
        }
    }

    proptest! {
        #[test]
        fn unrank_then_rank(n in 1usize..300, k in 0usize..6, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let total = binomial(n, k);
            let r = (seed as u128) % total;
            let p = pattern_from_rank(n, k, r).unwrap();
            prop_assert_eq!(p.weight(), k);
            prop_assert!(p.positions().iter().all(|&x| x < n));
            prop_assert_eq!(rank_of(&p), r);
        }
    }
}
