use serde::{Deserialize, Serialize};

use crate::bounds::TheoremConstants;
use crate::error::{ParamError, Result};
use crate::params::{derive_seed, ProblemParams};
use crate::search::CoverageOptions;

use super::estimators::{estimate_coverage_prob, estimate_single_subset_prob};
use super::stats::TrialSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Epsilon,
    Alpha,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SweepExperiment {
    Coverage {
        #[serde(default)]
        options: CoverageOptions,
    },
    /// Single-subset hit frequency at `subset_size = floor(αn)`; the target
    /// defaults to the origin.
    SingleSubset {
        #[serde(default)]
        z: Option<Vec<f64>>,
    },
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize, ParamError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        let field = if axis == SweepAxis::N { "grid (n)" } else { "grid (d)" };
        Err(ParamError::new(field, format!("{v} is not a positive integer")))
    }
}

fn apply(base: &ProblemParams, axis: SweepAxis, v: f64) -> Result<ProblemParams, ParamError> {
    match axis {
        SweepAxis::N => base.with_n(as_count(axis, v)?),
        SweepAxis::D => base.with_d(as_count(axis, v)?),
        SweepAxis::Epsilon => base.with_epsilon(v),
        SweepAxis::Alpha => base.with_alpha(v),
    }
}

/// Runs the experiment at every grid value in ascending order. Grid point
/// `i` (after sorting) uses the seed `derive_seed(seed, i)`.
pub fn sweep(
    axis: SweepAxis,
    grid: &[f64],
    base: &ProblemParams,
    experiment: &SweepExperiment,
    trials: u64,
    seed: u64,
) -> Result<Vec<TrialSummary>> {
    if grid.is_empty() {
        return Err(ParamError::new("grid", "must not be empty").into());
    }
    let mut values = grid.to_vec();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ParamError::new("grid", "values must be finite").into());
    }
    values.sort_by(f64::total_cmp);
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = apply(base, axis, v)?;
            let s = derive_seed(seed, i as u64);
            match experiment {
                SweepExperiment::Coverage { options } => {
                    estimate_coverage_prob(&p, options, TheoremConstants::default(), trials, s)
                }
                SweepExperiment::SingleSubset { z } => {
                    let z = z.clone().unwrap_or_else(|| vec![0.0; p.d()]);
                    estimate_single_subset_prob(p.d(), p.subset_size(), p.epsilon(), &z, trials, s)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ProblemParams {
        ProblemParams::new(1, 8, 0.25, 0.25).unwrap()
    }

    #[test]
    fn singleton_grid_equals_direct_call() {
        let exp = SweepExperiment::SingleSubset { z: None };
        let s = sweep(SweepAxis::N, &[40.0], &base(), &exp, 2000, 9).unwrap();
        let direct = estimate_single_subset_prob(1, 10, 0.25, &[0.0], 2000, derive_seed(9, 0)).unwrap();
        assert_eq!(s, vec![direct]);
    }

    #[test]
    fn output_sorted_and_deterministic() {
        let exp = SweepExperiment::Coverage {
            options: CoverageOptions::default(),
        };
        let a = sweep(SweepAxis::N, &[16.0, 4.0, 8.0], &base(), &exp, 40, 2).unwrap();
        let ns: Vec<usize> = a.iter().map(|s| s.params.unwrap().n()).collect();
        assert_eq!(ns, vec![4, 8, 16]);
        assert_eq!(a, sweep(SweepAxis::N, &[4.0, 8.0, 16.0], &base(), &exp, 40, 2).unwrap());
    }

    #[test]
    fn bad_grids() {
        let exp = SweepExperiment::SingleSubset { z: None };
        assert!(sweep(SweepAxis::N, &[], &base(), &exp, 1000, 0).is_err());
        assert!(sweep(SweepAxis::D, &[1.5], &base(), &exp, 1000, 0).is_err());
        assert!(sweep(SweepAxis::Epsilon, &[1.5], &base(), &exp, 1000, 0).is_err());
    }
}
