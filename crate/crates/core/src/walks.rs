//! Branching walk whose reachable set after `t` steps is the set of subset
//! sums of the first `t` increments.
//!
//! In exact mode (`dedup_cell = 0`) the frontier is that set. With a positive
//! cell width, points are bucketed by `floor(p / cell)` per coordinate and
//! only one representative per bucket survives: the origin in its own
//! bucket, the lexicographically least point elsewhere. Every exact point
//! then stays within `t · dedup_cell` of some representative.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::params::linf_unchecked;
use crate::sampler::{sample_standard_normal, SampleMatrix};

pub const DEFAULT_FRONTIER_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkFrontier {
    t: usize,
    d: usize,
    dedup_cell: f64,
    /// Row-major points in lexicographic order.
    points: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

impl WalkFrontier {
    /// The frontier at `t = 0`: just the origin.
    pub fn new(d: usize, dedup_cell: f64) -> Result<Self, ParamError> {
        if d == 0 {
            return Err(ParamError::new("d", "must be at least 1"));
        }
        if !(dedup_cell >= 0.0 && dedup_cell.is_finite()) {
            return Err(ParamError::new("dedup_cell", "must be finite and non-negative"));
        }
        Ok(Self {
            t: 0,
            d,
            dedup_cell,
            points: vec![0.0; d],
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dedup_cell(&self) -> f64 {
        self.dedup_cell
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn contains_origin(&self) -> bool {
        self.points().any(|p| p.iter().all(|&x| x == 0.0))
    }

    /// Smallest ∞-distance from the frontier to `target`.
    pub fn min_distance(&self, target: &[f64]) -> f64 {
        self.points()
            .map(|p| linf_unchecked(p, target))
            .fold(f64::INFINITY, f64::min)
    }

    /// Branches every point into "stay" and "move by `x`", then deduplicates.
    /// Fails with the new frontier attached if it exceeds `budget` points.
    pub fn step(&self, x: &[f64], budget: usize) -> Result<WalkFrontier> {
        let d = self.d;
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let mut all: Vec<Vec<f64>> = Vec::with_capacity(2 * self.len());
        for p in self.points() {
            all.push(p.to_vec());
            all.push(p.iter().zip(x).map(|(a, b)| a + b).collect());
        }
        let kept = if self.dedup_cell == 0.0 {
            all.par_sort_unstable_by(|a, b| lex_cmp(a, b));
            all.dedup();
            all
        } else {
            self.dedup(all)
        };
        let next = WalkFrontier {
            t: self.t + 1,
            d,
            dedup_cell: self.dedup_cell,
            points: kept.concat(),
        };
        if next.len() > budget {
            return Err(Error::FrontierBudget {
                size: next.len(),
                budget,
                frontier: Box::new(next),
            });
        }
        Ok(next)
    }

    fn dedup(&self, pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let cell = self.dedup_cell;
        let mut keyed: Vec<(Vec<i64>, bool, Vec<f64>)> = pts
            .into_par_iter()
            .map(|p| {
                let key = p.iter().map(|v| (v / cell).floor() as i64).collect();
                let origin = p.iter().all(|&v| v == 0.0);
                (key, !origin, p)
            })
            .collect();
        // Within a cell the origin sorts first, then points lexicographically.
        keyed.par_sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(lex_cmp(&a.2, &b.2)));
        keyed.dedup_by(|later, first| later.0 == first.0);
        let mut kept: Vec<Vec<f64>> = keyed.into_iter().map(|(_, _, p)| p).collect();
        kept.par_sort_unstable_by(|a, b| lex_cmp(a, b));
        kept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub frontier_size: usize,
    /// Minimum ∞-distance to each target, in target order.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub d: usize,
    pub seed: u64,
    pub dedup_cell: f64,
    pub targets: Vec<Vec<f64>>,
    /// Rows for `t = 0..=steps`.
    pub rows: Vec<TrajectoryRow>,
}

/// Walks with the rows of `increments` as steps and records, after each
/// step, the frontier size and the distance to each target.
pub fn run_walk_on(
    increments: &SampleMatrix,
    dedup_cell: f64,
    targets: &[Vec<f64>],
    budget: usize,
) -> Result<(Trajectory, WalkFrontier)> {
    let d = increments.d();
    if let Some(t) = targets.iter().find(|t| t.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: t.len(),
        });
    }
    let mut f = WalkFrontier::new(d, dedup_cell)?;
    let record = |f: &WalkFrontier| TrajectoryRow {
        t: f.t(),
        frontier_size: f.len(),
        distances: targets.iter().map(|z| f.min_distance(z)).collect(),
    };
    let mut rows = vec![record(&f)];
    for x in increments.rows() {
        f = f.step(x, budget)?;
        rows.push(record(&f));
    }
    Ok((
        Trajectory {
            d,
            seed: increments.seed(),
            dedup_cell,
            targets: targets.to_vec(),
            rows,
        },
        f,
    ))
}

/// [`run_walk_on`] with `N(0, I_d)` increments drawn from `seed`.
pub fn run_walk(
    d: usize,
    steps: usize,
    seed: u64,
    dedup_cell: f64,
    targets: &[Vec<f64>],
    budget: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        // The sampler rejects empty matrices, so build the t = 0 row here.
        let f = WalkFrontier::new(d, dedup_cell)?;
        return Ok(Trajectory {
            d,
            seed,
            dedup_cell,
            targets: targets.to_vec(),
            rows: vec![TrajectoryRow {
                t: 0,
                frontier_size: 1,
                distances: targets.iter().map(|z| f.min_distance(z)).collect(),
            }],
        });
    }
    let inc = sample_standard_normal(steps, d, seed)?;
    run_walk_on(&inc, dedup_cell, targets, budget).map(|(t, _)| t)
}

/// Columns `t, frontier_size, dist_target_1, …`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "frontier_size".to_string()];
    header.extend((1..=traj.targets.len()).map(|i| format!("dist_target_{i}")));
    wr.write_record(&header)?;
    for r in &traj.rows {
        let mut rec = vec![r.t.to_string(), r.frontier_size.to_string()];
        rec.extend(r.distances.iter().map(|x| x.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::DistributionTag;

    fn brute_sums(inc: &SampleMatrix, t: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0u64..1 << t)
            .map(|mask| {
                let idx: Vec<usize> = (0..t).filter(|i| mask >> i & 1 == 1).collect();
                inc.subset_sum(&idx)
            })
            .collect();
        out.sort_by(|a, b| lex_cmp(a, b));
        out.dedup();
        out
    }

    #[test]
    fn first_steps() {
        let f = WalkFrontier::new(2, 0.0).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.contains_origin());
        let f = f.step(&[0.3, -1.0], 10).unwrap();
        let pts: Vec<&[f64]> = f.points().collect();
        assert_eq!(pts, vec![&[0.0, 0.0][..], &[0.3, -1.0][..]]);
        let f = f.step(&[0.1, 0.2], 10).unwrap().step(&[-0.7, 0.05], 10).unwrap();
        assert_eq!(f.len(), 8);
        assert_eq!(f.t(), 3);
    }

    #[test]
    fn exact_frontier_is_prefix_subset_sums() {
        // The walk accumulates sums in a different order than the oracle, so
        // compare up to rounding.
        let inc = sample_standard_normal(12, 2, 77).unwrap();
        let (_, f) = run_walk_on(&inc, 0.0, &[], DEFAULT_FRONTIER_BUDGET).unwrap();
        let expect = brute_sums(&inc, 12);
        assert_eq!(f.len(), expect.len());
        let mut got: Vec<Vec<f64>> = f.points().map(<[f64]>::to_vec).collect();
        got.sort_by(|a, b| lex_cmp(a, b));
        for (g, e) in got.iter().zip(&expect) {
            assert!(linf_unchecked(g, e) < 1e-12);
        }
    }

    #[test]
    fn integer_steps_collapse_exactly() {
        let inc = SampleMatrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0]], 0, DistributionTag::Imported).unwrap();
        let (_, f) = run_walk_on(&inc, 0.0, &[], 100).unwrap();
        let pts: Vec<f64> = f.points().map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn origin_target_stays_at_zero() {
        for cell in [0.0, 0.3] {
            let tr = run_walk(2, 10, 5, cell, &[vec![0.0, 0.0]], DEFAULT_FRONTIER_BUDGET).unwrap();
            assert!(tr.rows.iter().all(|r| r.distances[0] == 0.0));
        }
    }

    #[test]
    fn exact_distances_nonincreasing() {
        let tr = run_walk(1, 14, 9, 0.0, &[vec![0.5], vec![-2.0]], DEFAULT_FRONTIER_BUDGET).unwrap();
        for w in tr.rows.windows(2) {
            for k in 0..2 {
                assert!(w[1].distances[k] <= w[0].distances[k]);
            }
        }
        assert_eq!(tr.rows.len(), 15);
        assert!(tr.rows.iter().all(|r| r.frontier_size <= 1 << r.t));
    }

    #[test]
    fn dedup_error_bound() {
        let inc = sample_standard_normal(12, 2, 4).unwrap();
        let cell = 0.05;
        let exact = run_walk_on(&inc, 0.0, &[], DEFAULT_FRONTIER_BUDGET).unwrap().1;
        let coarse = run_walk_on(&inc, cell, &[], DEFAULT_FRONTIER_BUDGET).unwrap().1;
        assert!(coarse.len() < exact.len());
        assert!(coarse.contains_origin());
        for p in exact.points() {
            assert!(coarse.min_distance(p) <= 12.0 * cell + 1e-12);
        }
    }

    #[test]
    fn budget_error_carries_frontier() {
        let inc = sample_standard_normal(6, 1, 1).unwrap();
        match run_walk_on(&inc, 0.0, &[], 16) {
            Err(Error::FrontierBudget { size, budget, frontier }) => {
                assert_eq!((size, budget), (32, 16));
                assert_eq!(frontier.t(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let tr = run_walk(1, 3, 0, 0.0, &[vec![0.5]], 100).unwrap();
        let mut buf = vec![];
        write_trajectory_csv(&tr, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,frontier_size,dist_target_1\n0,1,0.5\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
