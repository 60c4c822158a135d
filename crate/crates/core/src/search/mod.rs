//! Exact subset-sum search in the ∞-norm.
//!
//! Two engines share one result type: [`enumerate_exhaustive`] walks every
//! subset in Gray-code order with a running sum, [`meet_in_middle`] splits the
//! rows in halves and matches half-sums through a grid hash. Whatever engine
//! runs, the reported `achieved` vector and `error` are recomputed from
//! scratch by summing the selected rows in index order, so results from
//! different engines are directly comparable.

mod coverage;
mod exhaustive;
mod kdtree;
mod mim;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::family::SubsetFamily;
use crate::params::linf_unchecked;
use crate::sampler::SampleMatrix;

pub use coverage::{cover_grid, grid_centers, write_coverage_csv, CoverageOptions, CoverageReport, PointOutcome};
pub use exhaustive::{enumerate_exhaustive, EXHAUSTIVE_MAX_ROWS};
pub use mim::{meet_in_middle, meet_in_middle_with_budget, MimIndex, DEFAULT_MEMORY_BUDGET, MIM_MAX_ROWS};

/// Candidates whose running-sum error is within this much of `ε` are
/// re-summed exactly before deciding. Running-sum drift is many orders of
/// magnitude below it.
pub(crate) const CANDIDATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Exhaustive,
    MeetInMiddle,
}

impl Engine {
    /// Largest row count the engine accepts.
    pub fn max_rows(self) -> usize {
        match self {
            Engine::Exhaustive => EXHAUSTIVE_MAX_ROWS,
            Engine::MeetInMiddle => MIM_MAX_ROWS,
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, ParamError> {
        match s {
            "exhaustive" => Ok(Engine::Exhaustive),
            "meet_in_middle" | "mim" => Ok(Engine::MeetInMiddle),
            other => Err(ParamError::new("engine", format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub candidates_examined: u64,
    /// Not serialised, so that JSON output is a pure function of the inputs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for SearchStats {
    fn eq(&self, other: &Self) -> bool {
        self.candidates_examined == other.candidates_examined
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub found: bool,
    /// Sorted 0-based row indices. When nothing was found this is the
    /// minimum-error subset.
    pub subset: Vec<usize>,
    pub achieved: Vec<f64>,
    pub error: f64,
    pub engine: Engine,
    pub stats: SearchStats,
}

pub(crate) fn mask_indices(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Exact error of the subset encoded by `mask`.
pub(crate) fn canonical_error(m: &SampleMatrix, z: &[f64], mask: u64) -> f64 {
    linf_unchecked(z, &m.subset_sum(&mask_indices(mask)))
}

pub(crate) fn validate_query(m: &SampleMatrix, z: &[f64], epsilon: f64, cardinality: Option<usize>) -> Result<()> {
    if z.len() != m.d() {
        return Err(Error::DimensionMismatch {
            expected: m.d(),
            actual: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(ParamError::new("z", "entries must be finite").into());
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(ParamError::new("epsilon", format!("{epsilon} must be finite and non-negative")).into());
    }
    if let Some(t) = cardinality {
        if t > m.n() {
            return Err(ParamError::new("cardinality", format!("{t} exceeds n = {}", m.n())).into());
        }
    }
    Ok(())
}

pub(crate) fn finish(
    m: &SampleMatrix,
    z: &[f64],
    mask: u64,
    found: bool,
    engine: Engine,
    examined: u64,
    start: Instant,
) -> SearchResult {
    let subset = mask_indices(mask);
    let achieved = m.subset_sum(&subset);
    let error = linf_unchecked(z, &achieved);
    SearchResult {
        found,
        subset,
        achieved,
        error,
        engine,
        stats: SearchStats {
            candidates_examined: examined,
            wall_time: start.elapsed(),
        },
    }
}

/// Runs the named engine.
pub fn search(
    engine: Engine,
    m: &SampleMatrix,
    z: &[f64],
    epsilon: f64,
    cardinality: Option<usize>,
) -> Result<SearchResult> {
    match engine {
        Engine::Exhaustive => enumerate_exhaustive(m, z, epsilon, cardinality),
        Engine::MeetInMiddle => meet_in_middle(m, z, epsilon, cardinality),
    }
}

/// Number of family members whose sum lies in `B∞(z, ε)`.
pub fn count_hits(m: &SampleMatrix, fam: &SubsetFamily, z: &[f64], epsilon: f64) -> Result<usize> {
    if fam.n() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            actual: fam.n(),
        });
    }
    validate_query(m, z, epsilon, None)?;
    Ok(fam
        .subsets()
        .iter()
        .filter(|s| linf_unchecked(z, &m.subset_sum(s)) <= epsilon)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::build_family;
    use crate::sampler::{sample_standard_normal, DistributionTag};

    #[test]
    fn count_hits_empty_and_self() {
        let m = sample_standard_normal(12, 2, 4).unwrap();
        let empty = SubsetFamily::from_subsets(12, vec![], 0);
        assert_eq!(count_hits(&m, &empty, &[0.0, 0.0], 1.0).unwrap(), 0);
        let singles = SubsetFamily::from_subsets(12, (0..12).map(|i| vec![i]).collect(), 0);
        for j in 0..12 {
            assert!(count_hits(&m, &singles, m.row(j), 1e-6).unwrap() >= 1);
        }
    }

    #[test]
    fn count_hits_matches_direct_test_and_is_monotone() {
        for seed in 0..20 {
            let m = sample_standard_normal(60, 2, seed).unwrap();
            let fam = build_family(60, 0.1, 8, seed, 1000).unwrap();
            let z = [0.3, -0.2];
            let mut prev = 0;
            for k in 0..30 {
                let eps = 0.1 * k as f64;
                let c = count_hits(&m, &fam, &z, eps).unwrap();
                let direct = fam
                    .subsets()
                    .iter()
                    .filter(|s| {
                        let mut acc = [0.0; 2];
                        for &i in s.iter() {
                            acc[0] += m.row(i)[0];
                            acc[1] += m.row(i)[1];
                        }
                        (acc[0] - z[0]).abs().max((acc[1] - z[1]).abs()) <= eps
                    })
                    .count();
                assert_eq!(c, direct);
                assert!(c >= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn count_hits_rejects_mismatched_family() {
        let m = SampleMatrix::from_rows(&[vec![1.0], vec![2.0]], 0, DistributionTag::Imported).unwrap();
        let fam = SubsetFamily::from_subsets(3, vec![vec![0]], 0);
        assert!(count_hits(&m, &fam, &[0.0], 0.1).is_err());
    }

    #[test]
    fn mask_round_trip() {
        assert_eq!(mask_indices(0), Vec::<usize>::new());
        assert_eq!(mask_indices(0b1011), vec![0, 1, 3]);
        assert_eq!(mask_indices(1 << 43), vec![43]);
    }
}
