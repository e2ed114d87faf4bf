//! Average-linkage agglomerative clustering over cosine distance.
//!
//! Pairwise distances are quantized to multiples of 2^-30 and linkage sums
//! are kept as integers, so every comparison between average linkages is
//! exact. That makes the merge order (and thus the partition) independent of
//! summation order.

use std::cmp::Ordering;

use crate::providers::{cosine_distance, Embedding, ProviderError};

pub const DISTANCE_SCALE: f64 = (1u64 << 30) as f64;

pub fn quantize(distance: f64) -> u64 {
    (distance.clamp(0.0, 2.0) * DISTANCE_SCALE).round() as u64
}

/// Sum of member-pair distances between two clusters and the number of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linkage {
    pub sum: u64,
    pub pairs: u64,
}

impl Linkage {
    pub fn cmp_avg(&self, other: &Linkage) -> Ordering {
        (self.sum as u128 * other.pairs as u128).cmp(&(other.sum as u128 * self.pairs as u128))
    }

    pub fn below(&self, threshold_q: u64) -> bool {
        (self.sum as u128) < threshold_q as u128 * self.pairs as u128
    }

    pub fn value(&self) -> f64 {
        self.sum as f64 / self.pairs as f64 / DISTANCE_SCALE
    }
}

/// Upper-triangle storage without the diagonal.
pub struct Condensed {
    n: usize,
    data: Vec<u64>,
}

impl Condensed {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> u64) -> Self {
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_embeddings(vectors: &[Embedding]) -> Result<Self, ProviderError> {
        if let Some(v) = vectors.first() {
            if let Some(w) = vectors.iter().find(|w| w.dim() != v.dim()) {
                return Err(ProviderError::Dimension(v.dim(), w.dim()));
            }
        }
        Ok(Self::from_fn(vectors.len(), |i, j| {
            quantize(cosine_distance(&vectors[i], &vectors[j]).expect("dimensions checked"))
        }))
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[self.idx(i, j)]
    }

    fn add(&mut self, i: usize, j: usize, v: u64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Clusters as sorted member index lists, ordered by smallest member.
///
/// A pair is merged only while its average linkage is strictly below the
/// threshold. Among equal linkages the pair whose smallest members sort
/// first wins; with inputs sorted by phrase this is the lexicographic rule.
pub fn cluster_condensed(mut dist: Condensed, threshold: f64) -> Vec<Vec<usize>> {
    let n = dist.len();
    let tq = quantize(threshold);
    let mut size = vec![1u64; n];
    let mut active = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn: Vec<Option<usize>> = vec![None; n];

    // Slot `r` always holds the cluster whose smallest member is `r`, so the
    // tie-break on pair keys reduces to comparing slot indices.
    let link = |dist: &Condensed, size: &[u64], a: usize, b: usize| Linkage {
        sum: dist.get(a, b),
        pairs: size[a] * size[b],
    };
    let better = |la: Linkage, ka: (usize, usize), lb: Linkage, kb: (usize, usize)| {
        la.cmp_avg(&lb).then(ka.cmp(&kb)) == Ordering::Less
    };
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let scan = |dist: &Condensed, size: &[u64], active: &[bool], r: usize| -> Option<usize> {
        let mut best: Option<(usize, Linkage)> = None;
        for s in (0..n).filter(|&s| s != r && active[s]) {
            let l = link(dist, size, r, s);
            match best {
                Some((bs, bl)) if !better(l, key(r, s), bl, key(r, bs)) => {}
                _ => best = Some((s, l)),
            }
        }
        best.map(|(s, _)| s)
    };

    for r in 0..n {
        nn[r] = scan(&dist, &size, &active, r);
    }

    loop {
        let mut best: Option<(usize, usize, Linkage)> = None;
        for r in (0..n).filter(|&r| active[r]) {
            let Some(s) = nn[r] else { continue };
            let l = link(&dist, &size, r, s);
            match best {
                Some((br, bs, bl)) if !better(l, key(r, s), bl, key(br, bs)) => {}
                _ => best = Some((r, s, l)),
            }
        }
        let Some((r, s, l)) = best else { break };
        if !l.below(tq) {
            break;
        }
        let (a, b) = key(r, s);
        for t in (0..n).filter(|&t| active[t] && t != a && t != b) {
            let v = dist.get(b, t);
            dist.add(a, t, v);
        }
        active[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        nn[b] = None;
        nn[a] = scan(&dist, &size, &active, a);
        for t in (0..n).filter(|&t| active[t] && t != a) {
            match nn[t] {
                Some(x) if x == a || x == b => nn[t] = scan(&dist, &size, &active, t),
                Some(x) => {
                    if better(link(&dist, &size, t, a), key(t, a), link(&dist, &size, t, x), key(t, x)) {
                        nn[t] = Some(a);
                    }
                }
                None => nn[t] = Some(a),
            }
        }
    }

    let mut out: Vec<Vec<usize>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    for m in &mut out {
        m.sort_unstable();
    }
    out.sort();
    out
}

pub fn cluster_embeddings(vectors: &[Embedding], threshold: f64) -> Result<Vec<Vec<usize>>, ProviderError> {
    Ok(cluster_condensed(Condensed::from_embeddings(vectors)?, threshold))
}
