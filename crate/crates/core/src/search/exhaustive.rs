//! Gray-code enumeration over all subsets, and revolving-door enumeration
//! over subsets of a fixed size. Each step changes the running sum by one
//! row (or one row in, one row out), and the sum is rebuilt from scratch
//! every 2^16 steps to bound floating-point drift.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::params::linf_unchecked;
use crate::sampler::SampleMatrix;

use super::{canonical_error, finish, validate_query, Engine, SearchResult, CANDIDATE_SLACK};

pub const EXHAUSTIVE_MAX_ROWS: usize = 30;
const REANCHOR_EVERY: u64 = 1 << 16;

struct Walker<'a> {
    m: &'a SampleMatrix,
    z: &'a [f64],
    epsilon: f64,
    mask: u64,
    sum: Vec<f64>,
    best_err: f64,
    best_mask: u64,
    examined: u64,
    steps: u64,
    trace: Option<Vec<u64>>,
}

impl<'a> Walker<'a> {
    fn new(m: &'a SampleMatrix, z: &'a [f64], epsilon: f64, mask: u64) -> Self {
        let mut w = Walker {
            m,
            z,
            epsilon,
            mask,
            sum: vec![0.0; m.d()],
            best_err: f64::INFINITY,
            best_mask: mask,
            examined: 0,
            steps: 0,
            trace: None,
        };
        w.reanchor();
        w
    }

    fn reanchor(&mut self) {
        self.sum = self.m.subset_sum(&super::mask_indices(self.mask));
    }

    /// Moves to `next`, updating the running sum by the changed rows.
    fn move_to(&mut self, next: u64) {
        let mut diff = self.mask ^ next;
        while diff != 0 {
            let i = diff.trailing_zeros() as usize;
            diff &= diff - 1;
            let sign = if next >> i & 1 == 1 { 1.0 } else { -1.0 };
            for (s, x) in self.sum.iter_mut().zip(self.m.row(i)) {
                *s += sign * x;
            }
        }
        self.mask = next;
        self.steps += 1;
        if self.steps.is_multiple_of(REANCHOR_EVERY) {
            self.reanchor();
        }
    }

    /// Tests the current subset; true on an exact hit.
    fn visit(&mut self) -> bool {
        self.examined += 1;
        if let Some(t) = &mut self.trace {
            t.push(self.mask);
        }
        let err = linf_unchecked(self.z, &self.sum);
        if err < self.best_err {
            self.best_err = err;
            self.best_mask = self.mask;
        }
        err <= self.epsilon + CANDIDATE_SLACK && canonical_error(self.m, self.z, self.mask) <= self.epsilon
    }
}

fn gray(w: &mut Walker, n: usize) -> bool {
    if w.visit() {
        return true;
    }
    for i in 1u64..(1u64 << n) {
        let bit = i.trailing_zeros();
        w.move_to(w.mask ^ (1u64 << bit));
        if w.visit() {
            return true;
        }
    }
    false
}

fn combo_mask(c: &[usize], t: usize) -> u64 {
    c[1..=t].iter().fold(0u64, |m, &i| m | 1u64 << i)
}

/// Revolving-door order over `t`-subsets of `0..n`: consecutive subsets
/// differ by one element in and one element out.
fn revolving_door(w: &mut Walker, n: usize, t: usize) -> bool {
    if t == 0 || t == n {
        return w.visit();
    }
    if t == 1 {
        for i in 0..n {
            w.move_to(1u64 << i);
            if w.visit() {
                return true;
            }
        }
        return false;
    }
    // c[1..=t] holds the current combination (c_t > … > c_1), c[t+1] = n.
    let mut c: Vec<usize> = (0..=t + 1).map(|j| j.saturating_sub(1)).collect();
    c[t + 1] = n;
    w.move_to(combo_mask(&c, t));
    loop {
        if w.visit() {
            return true;
        }
        let mut j;
        let mut try_increase;
        if t % 2 == 1 {
            if c[1] + 1 < c[2] {
                c[1] += 1;
                w.move_to(combo_mask(&c, t));
                continue;
            }
            j = 2;
            try_increase = false;
        } else {
            if c[1] > 0 {
                c[1] -= 1;
                w.move_to(combo_mask(&c, t));
                continue;
            }
            j = 2;
            try_increase = true;
        }
        let moved = loop {
            if !try_increase {
                // c[j] = c[j-1] + 1 here.
                if c[j] >= j {
                    c[j] = c[j - 1];
                    c[j - 1] = j - 2;
                    break true;
                }
                j += 1;
                try_increase = true;
            } else {
                // c[j-1] = j - 2 here.
                if c[j] + 1 < c[j + 1] {
                    c[j - 1] = c[j];
                    c[j] += 1;
                    break true;
                }
                j += 1;
                if j > t {
                    break false;
                }
                try_increase = false;
            }
        };
        if !moved {
            return false;
        }
        w.move_to(combo_mask(&c, t));
    }
}

/// Examines every subset (or every subset of size `cardinality`) and returns
/// the first one within `ε` of `z`. If none qualifies, the minimum-error
/// subset is returned with `found = false`. The empty subset is included
/// unless a cardinality is given.
pub fn enumerate_exhaustive(
    m: &SampleMatrix,
    z: &[f64],
    epsilon: f64,
    cardinality: Option<usize>,
) -> Result<SearchResult> {
    let start = Instant::now();
    if m.n() > EXHAUSTIVE_MAX_ROWS {
        return Err(Error::TooManyRows {
            engine: "exhaustive",
            n: m.n(),
            limit: EXHAUSTIVE_MAX_ROWS,
            hint: "; use meet_in_middle",
        });
    }
    validate_query(m, z, epsilon, cardinality)?;
    let n = m.n();
    let start_mask = match cardinality {
        Some(t) if t == n => (1u64 << n) - 1,
        _ => 0,
    };
    let mut w = Walker::new(m, z, epsilon, start_mask);
    let found = match cardinality {
        None => gray(&mut w, n),
        Some(t) => revolving_door(&mut w, n, t),
    };
    let mask = if found { w.mask } else { w.best_mask };
    Ok(finish(m, z, mask, found, Engine::Exhaustive, w.examined, start))
}
