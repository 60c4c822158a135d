//! Families of equal-size subsets of `{0, .., n-1}` with small pairwise
//! intersections, built by uniform sampling with full restarts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::params::{derive_seed, snapped_floor};
use crate::sampler::rng_from_seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    /// Full sampling rounds, including the successful one.
    pub attempts: usize,
    /// Pairs that broke the cap (or were duplicates), summed over all rounds.
    pub rejected_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFamily {
    n: usize,
    member_size: usize,
    subsets: Vec<Vec<usize>>,
    certified_max_intersection: usize,
    build_stats: BuildStats,
}

impl SubsetFamily {
    /// Wraps hand-built subsets. Nothing beyond sortedness is enforced here;
    /// use [`validate_family`] to check the family invariants.
    pub fn from_subsets(n: usize, mut subsets: Vec<Vec<usize>>, cap: usize) -> Self {
        for s in &mut subsets {
            s.sort_unstable();
        }
        let member_size = subsets.first().map_or(0, Vec::len);
        Self {
            n,
            member_size,
            subsets,
            certified_max_intersection: cap,
            build_stats: BuildStats::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn member_size(&self) -> usize {
        self.member_size
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn certified_max_intersection(&self) -> usize {
        self.certified_max_intersection
    }

    pub fn build_stats(&self) -> BuildStats {
        self.build_stats
    }

    pub fn log2_size(&self) -> f64 {
        (self.subsets.len() as f64).log2()
    }
}

/// Size of the intersection of two sorted index lists.
pub fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}

/// Uniform `m`-subset of `0..n` by partial Fisher–Yates, returned sorted.
fn uniform_subset<R: Rng>(rng: &mut R, pool: &mut [usize], m: usize) -> Vec<usize> {
    let n = pool.len();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut s = pool[..m].to_vec();
    s.sort_unstable();
    s
}

fn count_violations(subsets: &[Vec<usize>], cap: usize) -> u64 {
    let mut bad = 0;
    for (i, s) in subsets.iter().enumerate() {
        for t in &subsets[i + 1..] {
            if s == t || intersection_size(s, t) > cap {
                bad += 1;
            }
        }
    }
    bad
}

/// Builds `requested_size` subsets of size `floor(αn)` whose pairwise
/// intersections are at most `floor(2α²n)`.
///
/// Each round draws every member uniformly and independently; if any pair
/// violates the cap the whole round is discarded and the next one uses the
/// seed `derive_seed(seed, round)`.
pub fn build_family(
    n: usize,
    alpha: f64,
    requested_size: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<SubsetFamily> {
    if requested_size == 0 {
        return Err(ParamError::new("requested_size", "must be at least 1").into());
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ParamError::new("alpha", format!("{alpha} is not in (0, 1/2)")).into());
    }
    if max_attempts == 0 {
        return Err(ParamError::new("max_attempts", "must be at least 1").into());
    }
    let m = snapped_floor(alpha * n as f64);
    if m == 0 {
        return Err(ParamError::new("alpha", "floor(alpha * n) is zero").into());
    }
    let cap = snapped_floor(2.0 * alpha * alpha * n as f64);

    let mut pool: Vec<usize> = (0..n).collect();
    let mut rejected_total = 0u64;
    let mut best: Option<(u64, Vec<Vec<usize>>)> = None;
    for attempt in 0..max_attempts {
        let mut rng = rng_from_seed(derive_seed(seed, attempt as u64));
        let subsets: Vec<Vec<usize>> = (0..requested_size)
            .map(|_| uniform_subset(&mut rng, &mut pool, m))
            .collect();
        let bad = count_violations(&subsets, cap);
        rejected_total += bad;
        if bad == 0 {
            return Ok(SubsetFamily {
                n,
                member_size: m,
                subsets,
                certified_max_intersection: cap,
                build_stats: BuildStats {
                    attempts: attempt + 1,
                    rejected_pairs: rejected_total,
                },
            });
        }
        if best.as_ref().is_none_or(|(b, _)| bad < *b) {
            best = Some((bad, subsets));
        }
    }
    let (_, subsets) = best.expect("at least one attempt ran");
    Err(Error::CapUnachievable {
        requested: requested_size,
        cap,
        attempts: max_attempts,
        rejected_pairs: rejected_total,
        best: Box::new(SubsetFamily {
            n,
            member_size: m,
            subsets,
            certified_max_intersection: cap,
            build_stats: BuildStats {
                attempts: max_attempts,
                rejected_pairs: rejected_total,
            },
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub ok: bool,
    pub max_intersection_found: usize,
    /// First pair (by index into the family) that exceeds the cap or repeats.
    pub offending_pair: Option<(usize, usize)>,
    /// First member with the wrong size, an out-of-range index or unsorted entries.
    pub malformed_member: Option<usize>,
}

/// Recomputes every pairwise intersection by brute force.
pub fn validate_family(f: &SubsetFamily) -> FamilyReport {
    let malformed_member = f.subsets.iter().position(|s| {
        s.len() != f.member_size || s.windows(2).any(|w| w[0] >= w[1]) || s.last().is_some_and(|&x| x >= f.n)
    });
    let mut max_found = 0;
    let mut offending = None;
    for (i, s) in f.subsets.iter().enumerate() {
        for (j, t) in f.subsets.iter().enumerate().skip(i + 1) {
            let k = intersection_size(s, t);
            max_found = max_found.max(k);
            if offending.is_none() && (k > f.certified_max_intersection || s == t) {
                offending = Some((i, j));
            }
        }
    }
    FamilyReport {
        ok: malformed_member.is_none() && offending.is_none(),
        max_intersection_found: max_found,
        offending_pair: offending,
        malformed_member,
    }
}

/// Two uniformly random `floor(αn)`-subsets with `|S ∩ T| = k` exactly.
pub fn pair_with_intersection(n: usize, alpha: f64, k: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ParamError::new("alpha", format!("{alpha} is not in (0, 1/2)")).into());
    }
    let m = snapped_floor(alpha * n as f64);
    if k > m || 2 * m - k > n {
        return Err(ParamError::new(
            "k",
            format!("intersection {k} infeasible for two {m}-subsets of {n} elements"),
        )
        .into());
    }
    let mut pool: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    let total = 2 * m - k;
    for i in 0..total {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let shared = &pool[..k];
    let mut s: Vec<usize> = shared.iter().chain(&pool[k..m]).copied().collect();
    let mut t: Vec<usize> = shared.iter().chain(&pool[m..total]).copied().collect();
    s.sort_unstable();
    t.sort_unstable();
    Ok((s, t))
}
