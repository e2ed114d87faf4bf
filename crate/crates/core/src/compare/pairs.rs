use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// The `k`-th pair (i < j) in row-major order over the upper triangle.
pub fn pair_at(n: usize, k: u64) -> (usize, usize) {
    let mut i = 0usize;
    let mut k = k;
    loop {
        let row = (n - i - 1) as u64;
        if k < row {
            return (i, i + 1 + k as usize);
        }
        k -= row;
        i += 1;
    }
}

/// Every unordered pair of `n` items already sorted in canonical order.
pub fn enumerate_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(n) as usize);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// All pairs when they fit under `cap`; otherwise a seeded uniform sample
/// of `cap` distinct pairs, returned in enumeration order.
pub fn sample_pairs(n: usize, cap: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let total = pair_count(n);
    match cap {
        Some(cap) if (cap as u64) < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks: Vec<u64> = rand::seq::index::sample(&mut rng, total as usize, cap)
                .into_iter()
                .map(|k| k as u64)
                .collect();
            picks.sort_unstable();
            picks.into_iter().map(|k| pair_at(n, k)).collect()
        }
        _ => enumerate_pairs(n),
    }
}

/// Seeded sample of `count` distinct `arity`-subsets of `0..pool`, each
/// sorted, returned in sorted order.
pub fn sample_combos(pool: usize, arity: usize, count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if arity == 0 || arity > pool {
        return Err(Error::Validation(format!("arity {arity} does not fit a pool of {pool}")));
    }
    let total = binomial(pool as u64, arity as u64);
    if (count as u128) > total {
        return Err(Error::Validation(format!(
            "{count} combinations requested but only {total} exist for C({pool}, {arity})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    if total <= 4 * count as u128 || total <= 100_000 {
        // Small space: sample ranks directly.
        let ranks = rand::seq::index::sample(&mut rng, total as usize, count);
        for r in ranks {
            seen.insert(unrank_combo(pool, arity, r as u128));
        }
    } else {
        while seen.len() < count {
            let mut c: Vec<usize> = rand::seq::index::sample(&mut rng, pool, arity).into_vec();
            c.sort_unstable();
            seen.insert(c);
        }
    }
    Ok(seen.into_iter().collect())
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Lexicographic unranking of k-subsets of 0..n.
fn unrank_combo(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut x = 0usize;
    for remaining in (1..=k).rev() {
        loop {
            let c = binomial((n - x - 1) as u64, (remaining - 1) as u64);
            if rank < c {
                out.push(x);
                x += 1;
                break;
            }
            rank -= c;
            x += 1;
        }
    }
    out
}
