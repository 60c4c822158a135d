//! Meet-in-the-middle search.
//!
//! Rows `0..h` form half A and rows `h..n` half B, with `h = floor(n/2)`.
//! All B half-sums are bucketed in a grid whose cells are slightly wider
//! than the query box, so every query touches at most two cells per axis.
//! Each A half-sum probes the cells overlapping `B∞(z − a, ε)`; every
//! candidate there is tested and, if close, re-summed exactly. When nothing
//! hits, a kd-tree over the B half-sums gives the exact minimum error.
//!
//! Among several hits the lexicographically least index list wins. A-lists
//! form a tree (children of `a` append one larger A index), and the hits
//! below a node come in lex order as: `a` alone, each child's subtree by
//! increasing index, then `a` with a nonempty B part. Walking that Euler tour
//! and stopping at the first hitting event gives the least hit, usually after
//! a handful of probes when hits are dense.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampler::SampleMatrix;

use super::kdtree::KdTree;
use super::{canonical_error, finish, validate_query, Engine, SearchResult, CANDIDATE_SLACK};

pub const MIM_MAX_ROWS: usize = 44;
/// 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

const CELL_CLAMP: f64 = (1u64 << 62) as f64;

/// `true` when the sorted index list of `a` precedes that of `b`.
pub(crate) fn lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let x = diff.trailing_zeros();
    let above = if x == 63 { 0 } else { !((2u64 << x) - 1) };
    if a >> x & 1 == 1 {
        b & above != 0
    } else {
        a & above == 0
    }
}

fn half_sums(m: &SampleMatrix, offset: usize, count: usize) -> Vec<f64> {
    let d = m.d();
    let size = 1usize << count;
    let mut sums = vec![0.0; size * d];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let prev = mask & (mask - 1);
        let row = m.row(offset + low);
        for j in 0..d {
            sums[mask * d + j] = sums[prev * d + j] + row[j];
        }
    }
    sums
}

fn cell(x: f64, width: f64) -> i64 {
    (x / width).floor().clamp(-CELL_CLAMP, CELL_CLAMP) as i64
}

/// Precomputed half-sum tables for one matrix, tolerance and cardinality,
/// reusable across many targets.
pub struct MimIndex<'a> {
    m: &'a SampleMatrix,
    epsilon: f64,
    cardinality: Option<usize>,
    h: usize,
    d: usize,
    a_sums: Vec<f64>,
    b_sums: Vec<f64>,
    width: f64,
    /// Sorted `(popcount, cell_0, …, cell_{d-1})` keys, one per B half-sum.
    keys: Vec<i64>,
    /// B masks in key order.
    order: Vec<u32>,
    /// One tree per B popcount when a cardinality is set, else one tree.
    trees: Vec<KdTree>,
}

impl<'a> MimIndex<'a> {
    /// Bytes the tables for an `n × d` matrix will occupy.
    pub fn memory_estimate(n: usize, d: usize) -> u64 {
        let h = n / 2;
        let na = 1u64 << h;
        let nb = 1u64 << (n - h);
        8 * d as u64 * (na + nb) + nb * (8 * (d as u64 + 1) + 4 + 4)
    }

    pub fn new(m: &'a SampleMatrix, epsilon: f64, cardinality: Option<usize>, memory_budget: u64) -> Result<Self> {
        let n = m.n();
        if n > MIM_MAX_ROWS {
            return Err(Error::TooManyRows {
                engine: "meet_in_middle",
                n,
                limit: MIM_MAX_ROWS,
                hint: "",
            });
        }
        validate_query(m, &vec![0.0; m.d()], epsilon, cardinality)?;
        let estimate = Self::memory_estimate(n, m.d());
        if estimate > memory_budget {
            return Err(Error::MemoryBudget {
                estimate,
                budget: memory_budget,
            });
        }
        let d = m.d();
        let h = n / 2;
        let nb = n - h;
        let a_sums = half_sums(m, 0, h);
        let b_sums = half_sums(m, h, nb);
        let width = 2.0 * (epsilon + CANDIDATE_SLACK);
        let kl = d + 1;
        let size_b = 1usize << nb;

        let key_of = |b: usize, out: &mut Vec<i64>| {
            out.push(if cardinality.is_some() {
                b.count_ones() as i64
            } else {
                0
            });
            for j in 0..d {
                out.push(cell(b_sums[b * d + j], width));
            }
        };
        let mut raw = Vec::with_capacity(size_b * kl);
        for b in 0..size_b {
            key_of(b, &mut raw);
        }
        let mut order: Vec<u32> = (0..size_b as u32).collect();
        order.par_sort_unstable_by(|&x, &y| {
            let kx = &raw[x as usize * kl..(x as usize + 1) * kl];
            let ky = &raw[y as usize * kl..(y as usize + 1) * kl];
            kx.cmp(ky).then(x.cmp(&y))
        });
        let mut keys = Vec::with_capacity(size_b * kl);
        for &b in &order {
            keys.extend_from_slice(&raw[b as usize * kl..(b as usize + 1) * kl]);
        }
        drop(raw);

        let trees = match cardinality {
            None => vec![KdTree::build(&b_sums, d, (0..size_b as u32).collect())],
            Some(_) => (0..=nb)
                .map(|k| {
                    let idx = (0..size_b as u32).filter(|b| b.count_ones() as usize == k).collect();
                    KdTree::build(&b_sums, d, idx)
                })
                .collect(),
        };
        Ok(MimIndex {
            m,
            epsilon,
            cardinality,
            h,
            d,
            a_sums,
            b_sums,
            width,
            keys,
            order,
            trees,
        })
    }

    fn key_at(&self, pos: usize) -> &[i64] {
        let kl = self.d + 1;
        &self.keys[pos * kl..(pos + 1) * kl]
    }

    /// Positions whose key equals `key`.
    fn range_of(&self, key: &[i64]) -> std::ops::Range<usize> {
        let len = self.order.len();
        let lower = partition(len, |p| self.key_at(p) < key);
        let upper = lower + partition(len - lower, |p| self.key_at(lower + p) <= key);
        lower..upper
    }

    /// Popcount the B half must have for A mask `a`, or `None` if no
    /// completion exists.
    fn b_popcount(&self, a: usize) -> Option<usize> {
        match self.cardinality {
            None => Some(0),
            Some(t) => {
                let ka = a.count_ones() as usize;
                let nb = self.m.n() - self.h;
                (ka <= t && t - ka <= nb).then(|| t - ka)
            }
        }
    }

    /// Lex-least hit `a ∪ b` with a nonempty B part of popcount `pop`.
    fn probe(&self, a: usize, z: &[f64], pop: usize) -> Option<u64> {
        let d = self.d;
        let eps = self.epsilon;
        let q: Vec<f64> = (0..d).map(|j| z[j] - self.a_sums[a * d + j]).collect();
        let lo: Vec<i64> = q.iter().map(|&x| cell(x - eps - CANDIDATE_SLACK, self.width)).collect();
        let hi: Vec<i64> = q.iter().map(|&x| cell(x + eps + CANDIDATE_SLACK, self.width)).collect();
        let mut key = Vec::with_capacity(d + 1);
        key.push(pop as i64);
        key.extend_from_slice(&lo);
        let mut best: Option<u64> = None;
        loop {
            for pos in self.range_of(&key) {
                let b = self.order[pos] as usize;
                if b == 0 {
                    continue;
                }
                let bs = &self.b_sums[b * d..(b + 1) * d];
                let err = q.iter().zip(bs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                if err <= eps + CANDIDATE_SLACK {
                    let mask = a as u64 | (b as u64) << self.h;
                    if best.is_none_or(|cur| lex_less(mask, cur)) && canonical_error(self.m, z, mask) <= eps {
                        best = Some(mask);
                    }
                }
            }
            // Odometer over the probed cells.
            let mut axis = 0;
            loop {
                if axis == d {
                    return best;
                }
                if key[axis + 1] < hi[axis] {
                    key[axis + 1] += 1;
                    break;
                }
                key[axis + 1] = lo[axis];
                axis += 1;
            }
        }
    }

    fn nearest(&self, a: usize, z: &[f64], pop: usize) -> Option<(f64, u64)> {
        let d = self.d;
        let q: Vec<f64> = (0..d).map(|j| z[j] - self.a_sums[a * d + j]).collect();
        let tree = &self.trees[if self.cardinality.is_some() { pop } else { 0 }];
        tree.nearest(&self.b_sums, &q)
            .map(|(dist, b)| (dist, a as u64 | (b as u64) << self.h))
    }

    /// `a` alone, when it is a valid hit.
    fn alone(&self, a: usize, z: &[f64]) -> Option<u64> {
        if self.cardinality.is_some_and(|t| a.count_ones() as usize != t) {
            return None;
        }
        let d = self.d;
        let sums = &self.a_sums[a * d..(a + 1) * d];
        let err = z.iter().zip(sums).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        (err <= self.epsilon + CANDIDATE_SLACK && canonical_error(self.m, z, a as u64) <= self.epsilon)
            .then_some(a as u64)
    }

    fn event(&self, i: u64, z: &[f64]) -> Option<u64> {
        match tour_event(self.h, i) {
            Event::Alone(a) => self.alone(a, z),
            Event::WithB(a) => match self.b_popcount(a) {
                Some(pop) if pop > 0 || self.cardinality.is_none() => self.probe(a, z, pop),
                _ => None,
            },
        }
    }

    /// Searches for a subset within `ε` of `z`.
    ///
    /// `candidates_examined` counts tour events up to the hit, plus one
    /// nearest-neighbour query per A half-sum when nothing hits.
    pub fn query(&self, z: &[f64]) -> Result<SearchResult> {
        let start = Instant::now();
        validate_query(self.m, z, self.epsilon, self.cardinality)?;
        let events = 2usize << self.h;
        let hit = (0..events)
            .into_par_iter()
            .with_min_len(64)
            .filter_map(|i| self.event(i as u64, z).map(|mask| (i, mask)))
            .find_first(|_| true);
        if let Some((i, mask)) = hit {
            return Ok(finish(self.m, z, mask, true, Engine::MeetInMiddle, i as u64 + 1, start));
        }
        let na = self.a_sums.len() / self.d;
        let closest = (0..na)
            .into_par_iter()
            .with_min_len(64)
            .filter_map(|a| self.b_popcount(a).and_then(|pop| self.nearest(a, z, pop)))
            .reduce_with(|x, y| {
                if y.0 < x.0 || (y.0 == x.0 && lex_less(y.1, x.1)) {
                    y
                } else {
                    x
                }
            });
        let (_, mask) = closest.expect("every cardinality up to n has a completion");
        Ok(finish(
            self.m,
            z,
            mask,
            false,
            Engine::MeetInMiddle,
            (events + na) as u64,
            start,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Event {
    /// The A-list on its own.
    Alone(usize),
    /// The A-list with a nonempty B part.
    WithB(usize),
}

/// The `i`-th event of the Euler tour over A-lists of `{0, …, h−1}`.
///
/// A node whose largest index is `s − 1` owns `2^(h−s+1)` events: `Alone`
/// first, then the subtrees of children `s, s+1, …`, then `WithB`.
fn tour_event(h: usize, mut i: u64) -> Event {
    let mut a = 0usize;
    let mut s = 0usize;
    'node: loop {
        if i == 0 {
            return Event::Alone(a);
        }
        if i == (2u64 << (h - s)) - 1 {
            return Event::WithB(a);
        }
        i -= 1;
        let mut k = s;
        while k < h {
            let size = 1u64 << (h - k);
            if i < size {
                a |= 1 << k;
                s = k + 1;
                continue 'node;
            }
            i -= size;
            k += 1;
        }
        unreachable!("event index out of range");
    }
}

fn partition(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Meet-in-the-middle search with the default memory budget.
pub fn meet_in_middle(m: &SampleMatrix, z: &[f64], epsilon: f64, cardinality: Option<usize>) -> Result<SearchResult> {
    meet_in_middle_with_budget(m, z, epsilon, cardinality, DEFAULT_MEMORY_BUDGET)
}

pub fn meet_in_middle_with_budget(
    m: &SampleMatrix,
    z: &[f64],
    epsilon: f64,
    cardinality: Option<usize>,
    memory_budget: u64,
) -> Result<SearchResult> {
    validate_query(m, z, epsilon, cardinality)?;
    let start = Instant::now();
    let index = MimIndex::new(m, epsilon, cardinality, memory_budget)?;
    let mut r = index.query(z)?;
    r.stats.wall_time = start.elapsed();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_standard_normal, DistributionTag};
    use crate::search::{enumerate_exhaustive, mask_indices};

    #[test]
    fn lex_order_on_masks() {
        let sets = [
            0u64,
            0b1,
            0b11,
            0b111,
            0b101,
            0b10,
            0b110,
            0b100,
            1 << 63,
            0b1 | 1 << 63,
        ];
        for &a in &sets {
            for &b in &sets {
                let expect = mask_indices(a) < mask_indices(b);
                assert_eq!(lex_less(a, b), expect, "{a:b} vs {b:b}");
            }
        }
    }

    #[test]
    fn agrees_with_exhaustive() {
        for seed in 0..80u64 {
            let n = 1 + (seed % 18) as usize;
            let d = 1 + (seed % 3) as usize;
            let m = sample_standard_normal(n, d, seed + 100).unwrap();
            let z: Vec<f64> = (0..d).map(|j| ((seed * 3 + j as u64) % 9) as f64 / 4.0 - 1.0).collect();
            for eps in [1e-300, 0.02, 0.2] {
                for t in [None, Some(n / 3), Some(n)] {
                    let a = enumerate_exhaustive(&m, &z, eps, t).unwrap();
                    let b = meet_in_middle(&m, &z, eps, t).unwrap();
                    assert_eq!(a.found, b.found, "seed {seed} eps {eps} t {t:?}");
                    if !a.found {
                        assert!((a.error - b.error).abs() <= 1e-12, "{} vs {}", a.error, b.error);
                    } else {
                        assert!(b.error <= eps);
                    }
                    if let Some(t) = t {
                        assert_eq!(b.subset.len(), t);
                    }
                }
            }
        }
    }

    #[test]
    fn tour_visits_events_in_lex_order() {
        let h = 4;
        let nb = 2;
        let events: Vec<Event> = (0..2u64 << h).map(|i| tour_event(h, i)).collect();
        let members = |e: Event| -> Vec<u64> {
            match e {
                Event::Alone(a) => vec![a as u64],
                Event::WithB(a) => (1..1u64 << nb).map(|b| a as u64 | b << h).collect(),
            }
        };
        let mut seen = std::collections::HashSet::new();
        for w in events.windows(2) {
            let last = members(w[0])
                .into_iter()
                .reduce(|x, y| if lex_less(x, y) { y } else { x })
                .unwrap();
            for y in members(w[1]) {
                assert!(lex_less(last, y), "{:?} then {:?}", w[0], w[1]);
            }
        }
        for e in events {
            assert!(seen.insert(e));
        }
        assert_eq!(seen.len(), 2 << h);
    }

    #[test]
    fn dense_hits_give_brute_force_least() {
        for seed in 0..30u64 {
            let n = 6 + (seed % 9) as usize;
            let d = 1 + (seed % 2) as usize;
            let m = sample_standard_normal(n, d, seed + 500).unwrap();
            let z = vec![0.1; d];
            for (eps, t) in [(0.6, None), (0.3, None), (0.6, Some(n / 2))] {
                let want = (0..1u64 << n)
                    .filter(|&x| t.is_none_or(|t| x.count_ones() as usize == t))
                    .filter(|&x| canonical_error(&m, &z, x) <= eps)
                    .reduce(|x, y| if lex_less(y, x) { y } else { x });
                let r = meet_in_middle(&m, &z, eps, t).unwrap();
                assert_eq!(r.found, want.is_some());
                if let Some(w) = want {
                    assert_eq!(r.subset, mask_indices(w), "seed {seed} eps {eps}");
                }
            }
        }
    }

    #[test]
    fn lexicographically_least_hit() {
        let m = SampleMatrix::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![0.0]],
            0,
            DistributionTag::Imported,
        )
        .unwrap();
        let r = meet_in_middle(&m, &[3.0], 0.1, None).unwrap();
        assert!(r.found);
        assert_eq!(r.subset, vec![0, 1]);
    }

    #[test]
    fn full_subset_target() {
        let m = sample_standard_normal(22, 2, 8).unwrap();
        let all: Vec<usize> = (0..22).collect();
        let z = m.subset_sum(&all);
        let r = meet_in_middle(&m, &z, 1e-12, Some(22)).unwrap();
        assert!(r.found);
        assert_eq!(r.subset, all);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let m = sample_standard_normal(24, 2, 3).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| meet_in_middle(&m, &[0.4, -0.3], 0.3, None).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn guard_and_budget() {
        let m = sample_standard_normal(45, 1, 0).unwrap();
        assert!(matches!(
            meet_in_middle(&m, &[0.0], 0.1, None),
            Err(Error::TooManyRows { .. })
        ));
        let m = sample_standard_normal(20, 1, 0).unwrap();
        match meet_in_middle_with_budget(&m, &[0.0], 0.1, None, 1000) {
            Err(Error::MemoryBudget { estimate, budget }) => {
                assert_eq!(budget, 1000);
                assert_eq!(estimate, MimIndex::memory_estimate(20, 1));
            }
            other => panic!("{other:?}"),
        }
    }
}
