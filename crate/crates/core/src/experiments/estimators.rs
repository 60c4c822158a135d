//! Plain Monte Carlo estimators for the quantities the bounds module
//! controls.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bounds::{
    failure_prob, log_cube_prob_bounds, log_expectation_bounds, log_joint_lower, log_joint_upper, log_variance_upper,
    required_n_full, HypothesisStatus, Scale, TheoremConstants,
};
use crate::error::{Error, ParamError, Result};
use crate::family::{validate_family, SubsetFamily};
use crate::params::{derive_seed, ProblemParams};
use crate::sampler::sample_standard_normal;
use crate::search::{cover_grid, CoverageOptions};

use super::stats::{chunked, frequency_stderr, summarize, Bracket, Estimate, ExperimentKind, TrialSummary};

pub const MIN_TRIALS: u64 = 1000;

fn check_trials(trials: u64) -> Result<(), ParamError> {
    if trials < MIN_TRIALS {
        return Err(ParamError::new("trials", format!("{trials} is below {MIN_TRIALS}")));
    }
    Ok(())
}

fn check_target(z: &[f64], d: usize, epsilon: f64) -> Result<()> {
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: z.len(),
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ParamError::new("epsilon", "must be positive and finite").into());
    }
    Ok(())
}

fn in_unit_cube(z: &[f64]) -> HypothesisStatus {
    let worst = z.iter().map(|v| 1.0 - v.abs()).fold(f64::INFINITY, f64::min);
    HypothesisStatus {
        satisfied: worst >= 0.0,
        margin: worst,
        failed_conditions: if worst >= 0.0 {
            vec![]
        } else {
            vec!["z in [-1,1]^d".into()]
        },
    }
}

fn target_extras(z: &[f64]) -> BTreeMap<String, f64> {
    z.iter().enumerate().map(|(j, &v)| (format!("z{j}"), v)).collect()
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Frequency with which `N(0, subset_size · I_d)` lands in `B∞(z, ε)`,
/// compared with the cube-probability bounds at `σ² = subset_size`.
pub fn estimate_single_subset_prob(
    d: usize,
    subset_size: usize,
    epsilon: f64,
    z: &[f64],
    trials: u64,
    seed: u64,
) -> Result<TrialSummary> {
    check_trials(trials)?;
    check_target(z, d, epsilon)?;
    if subset_size == 0 {
        return Err(ParamError::new("subset_size", "must be at least 1").into());
    }
    let sigma = (subset_size as f64).sqrt();
    let hits: u64 = chunked(trials, seed, |rng, k| {
        let mut h = 0;
        for _ in 0..k {
            // Draw every coordinate so each trial consumes a fixed amount of the stream.
            let mut inside = true;
            for &c in z {
                inside &= (sigma * normal(rng) - c).abs() <= epsilon;
            }
            h += inside as u64;
        }
        h
    })
    .into_iter()
    .sum();
    let p = hits as f64 / trials as f64;
    let (lo, hi) = log_cube_prob_bounds(d, subset_size as f64, epsilon);
    let mut extras = target_extras(z);
    extras.insert("d".into(), d as f64);
    extras.insert("subset_size".into(), subset_size as f64);
    extras.insert("epsilon".into(), epsilon);
    Ok(summarize(
        Estimate {
            kind: ExperimentKind::SingleSubset,
            params: None,
            extras,
            seed,
            trials,
            estimate: p,
            stderr: frequency_stderr(p, trials),
        },
        Bracket {
            lower: Some(lo),
            upper: Some(hi),
            scale: Scale::Log2,
            hypotheses: in_unit_cube(z),
        },
    ))
}

/// Counts, per trial, how many family members hit `B∞(z, ε)` on a fresh
/// standard normal matrix. Returns the histogram of the count.
fn hit_histogram(p: &ProblemParams, family: &SubsetFamily, z: &[f64], trials: u64, seed: u64) -> Vec<u64> {
    let (n, d, eps) = (p.n(), p.d(), p.epsilon());
    let chunks = chunked(trials, seed, |rng, k| {
        let mut hist = vec![0u64; family.len() + 1];
        let mut x = vec![0.0; n * d];
        let mut acc = vec![0.0; d];
        for _ in 0..k {
            for v in x.iter_mut() {
                *v = normal(rng);
            }
            let mut y = 0;
            for s in family.subsets() {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for &i in s {
                    for (a, v) in acc.iter_mut().zip(&x[i * d..(i + 1) * d]) {
                        *a += v;
                    }
                }
                y += acc.iter().zip(z).all(|(a, c)| (a - c).abs() <= eps) as usize;
            }
            hist[y] += 1;
        }
        hist
    });
    let mut total = vec![0u64; family.len() + 1];
    for h in chunks {
        for (t, v) in total.iter_mut().zip(h) {
            *t += v;
        }
    }
    total
}

/// Sample mean and variance of the hit count `Y` over a family, compared
/// with the expectation sandwich and the variance upper bound.
pub fn estimate_moments(
    params: &ProblemParams,
    family: &SubsetFamily,
    z: &[f64],
    trials: u64,
    seed: u64,
) -> Result<(TrialSummary, TrialSummary)> {
    check_trials(trials)?;
    check_target(z, params.d(), params.epsilon())?;
    if family.n() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            actual: family.n(),
        });
    }
    if family.is_empty() {
        return Err(ParamError::new("family", "must not be empty").into());
    }
    let report = validate_family(family);
    let hist = hit_histogram(params, family, z, trials, seed);
    let nf = trials as f64;
    let mean = hist.iter().enumerate().map(|(y, &c)| y as f64 * c as f64).sum::<f64>() / nf;
    let central = |k: i32| {
        hist.iter()
            .enumerate()
            .map(|(y, &c)| (y as f64 - mean).powi(k) * c as f64)
            .sum::<f64>()
            / nf
    };
    let m2 = central(2);
    let m4 = central(4);
    let var = m2 * nf / (nf - 1.0);

    let log2_c = family.log2_size();
    let (lo, hi) = log_expectation_bounds(params, log2_c);
    let mut extras = target_extras(z);
    extras.insert("family_size".into(), family.len() as f64);
    let mean_summary = summarize(
        Estimate {
            kind: ExperimentKind::MomentsMean,
            params: Some(*params),
            extras: extras.clone(),
            seed,
            trials,
            estimate: mean,
            stderr: (var / nf).sqrt(),
        },
        Bracket {
            lower: Some(lo),
            upper: Some(hi),
            scale: Scale::Log2,
            hypotheses: in_unit_cube(z),
        },
    );

    let bound = log_variance_upper(params, log2_c);
    let mut hyps = bound.hypotheses;
    let z_ok = in_unit_cube(z);
    if !z_ok.satisfied {
        hyps.satisfied = false;
        hyps.failed_conditions.extend(z_ok.failed_conditions);
    }
    if !report.ok || report.max_intersection_found > params.intersection_cap() {
        hyps.satisfied = false;
        hyps.failed_conditions
            .push("family intersections <= floor(2 alpha^2 n)".into());
    }
    let var_summary = summarize(
        Estimate {
            kind: ExperimentKind::MomentsVariance,
            params: Some(*params),
            extras,
            seed,
            trials,
            estimate: var,
            stderr: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        },
        Bracket {
            lower: None,
            upper: Some(bound.log2),
            scale: Scale::Log2,
            hypotheses: hyps,
        },
    );
    Ok((mean_summary, var_summary))
}

/// Sample covariance of the hit indicators of two subsets; the reference
/// value is 0, which is exact for disjoint subsets.
pub fn estimate_covariance(
    params: &ProblemParams,
    s: &[usize],
    t: &[usize],
    z: &[f64],
    trials: u64,
    seed: u64,
) -> Result<TrialSummary> {
    check_trials(trials)?;
    check_target(z, params.d(), params.epsilon())?;
    if s.iter().chain(t).any(|&i| i >= params.n()) {
        return Err(ParamError::new("subset", "index out of range").into());
    }
    let fam = SubsetFamily::from_subsets(params.n(), vec![s.to_vec(), t.to_vec()], usize::MAX);
    let (n, d, eps) = (params.n(), params.d(), params.epsilon());
    let cells = chunked(trials, seed, |rng, k| {
        let mut c = [0u64; 4];
        let mut x = vec![0.0; n * d];
        for _ in 0..k {
            for v in x.iter_mut() {
                *v = normal(rng);
            }
            let hit = |sub: &[usize]| {
                (0..d).all(|j| {
                    let sum: f64 = sub.iter().map(|&i| x[i * d + j]).sum();
                    (sum - z[j]).abs() <= eps
                })
            };
            let a = hit(&fam.subsets()[0]) as usize;
            let b = hit(&fam.subsets()[1]) as usize;
            c[2 * a + b] += 1;
        }
        c
    });
    let mut c = [0u64; 4];
    for ch in cells {
        for k in 0..4 {
            c[k] += ch[k];
        }
    }
    let nf = trials as f64;
    let ps = (c[2] + c[3]) as f64 / nf;
    let pt = (c[1] + c[3]) as f64 / nf;
    let cov = c[3] as f64 / nf - ps * pt;
    // Variance of the per-trial product (Y_S − p_S)(Y_T − p_T).
    let mut second = 0.0;
    for (k, &cnt) in c.iter().enumerate() {
        let ys = (k >> 1) as f64;
        let yt = (k & 1) as f64;
        let prod = (ys - ps) * (yt - pt);
        second += prod * prod * cnt as f64;
    }
    let var_prod = (second / nf - cov * cov).max(0.0);
    let mut extras = target_extras(z);
    extras.insert(
        "overlap".into(),
        crate::family::intersection_size(&fam.subsets()[0], &fam.subsets()[1]) as f64,
    );
    Ok(summarize(
        Estimate {
            kind: ExperimentKind::Covariance,
            params: Some(*params),
            extras,
            seed,
            trials,
            estimate: cov,
            stderr: (var_prod / nf).sqrt(),
        },
        Bracket::unconditional(Some(0.0), Some(0.0), Scale::Linear),
    ))
}

/// Frequency with which two `floor(αn)`-subsets sharing `intersection`
/// elements both hit `B∞(z, ε)`. Trials draw the shared part
/// `B ~ N(0, k I)` and the private parts `A, C ~ N(0, (m − k) I)` directly.
///
/// The upper bound applies when `intersection <= floor(2α²n)`, the lower
/// bound when `intersection >= ceil(α²n/2)`; a bound whose hypotheses fail
/// is dropped, and if none is left the verdict is `hypotheses_unmet`.
pub fn estimate_joint_prob(
    params: &ProblemParams,
    intersection: usize,
    z: &[f64],
    trials: u64,
    seed: u64,
) -> Result<TrialSummary> {
    check_trials(trials)?;
    check_target(z, params.d(), params.epsilon())?;
    let m = params.subset_size();
    if intersection > m || 2 * m - intersection > params.n() {
        return Err(ParamError::new(
            "intersection",
            format!(
                "{intersection} infeasible for two {m}-subsets of {} elements",
                params.n()
            ),
        )
        .into());
    }
    let eps = params.epsilon();
    let sa = ((m - intersection) as f64).sqrt();
    let sb = (intersection as f64).sqrt();
    let hits: u64 = chunked(trials, seed, |rng, k| {
        let mut h = 0;
        for _ in 0..k {
            let mut both = true;
            for &c in z {
                let b = sb * normal(rng);
                let a = sa * normal(rng);
                let cc = sa * normal(rng);
                both &= (a + b - c).abs() <= eps && (cc + b - c).abs() <= eps;
            }
            h += both as u64;
        }
        h
    })
    .into_iter()
    .sum();
    let p = hits as f64 / trials as f64;

    let z_ok = in_unit_cube(z);
    let mut failed = z_ok.failed_conditions.clone();
    let mut margin = z_ok.margin;
    let mut upper = None;
    let mut lower = None;
    let mut applicable = false;
    if intersection <= params.intersection_cap() {
        applicable = true;
        let u = log_joint_upper(params);
        margin = margin.min(u.hypotheses.margin);
        if u.hypotheses.satisfied {
            upper = Some(u.log2);
        } else {
            failed.extend(u.hypotheses.failed_conditions.iter().map(|c| format!("upper: {c}")));
        }
    }
    if intersection >= params.tight_intersection() {
        applicable = true;
        let l = log_joint_lower(params, None);
        margin = margin.min(l.hypotheses.margin);
        if l.hypotheses.satisfied {
            lower = Some(l.log2);
        } else {
            failed.extend(l.hypotheses.failed_conditions.iter().map(|c| format!("lower: {c}")));
        }
    }
    if !applicable {
        failed.push("intersection outside both bound regimes".into());
    }
    let satisfied = z_ok.satisfied && (upper.is_some() || lower.is_some());
    let mut extras = target_extras(z);
    extras.insert("intersection".into(), intersection as f64);
    extras.insert("sigma_a2".into(), (m - intersection) as f64);
    extras.insert("sigma_b2".into(), intersection as f64);
    Ok(summarize(
        Estimate {
            kind: ExperimentKind::Joint,
            params: Some(*params),
            extras,
            seed,
            trials,
            estimate: p,
            stderr: frequency_stderr(p, trials),
        },
        Bracket {
            lower,
            upper,
            scale: Scale::Log2,
            hypotheses: HypothesisStatus {
                satisfied,
                margin,
                failed_conditions: failed,
            },
        },
    ))
}

/// Frequency of full ε-grid coverage over fresh standard normal matrices.
/// Trial `i` uses the matrix seeded by `derive_seed(seed, i)`.
///
/// A lower bound `1 − 2^{failure_prob}` is attached only when `n` reaches
/// the theorem's sample size for the given constants.
pub fn estimate_coverage_prob(
    params: &ProblemParams,
    opts: &CoverageOptions,
    constants: TheoremConstants,
    trials: u64,
    seed: u64,
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(ParamError::new("trials", "must be at least 1").into());
    }
    use rayon::prelude::*;
    let successes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let m = sample_standard_normal(params.n(), params.d(), derive_seed(seed, i))?;
            let mut o = opts.clone();
            o.stop_at_first_uncovered = true;
            Ok(cover_grid(&m, params.epsilon(), &o)?.fully_covered())
        })
        .collect::<Result<_>>()?;
    let k = successes.iter().filter(|&&s| s).count();
    let p = k as f64 / trials as f64;
    let (d, a, eps) = (params.d(), params.alpha(), params.epsilon());
    let need = required_n_full(d, a, eps, constants.sample);
    let hypotheses = if (params.n() as u64) >= need && opts.range_halfwidth <= 1.0 {
        HypothesisStatus {
            satisfied: true,
            margin: params.n() as f64 - need as f64,
            failed_conditions: vec![],
        }
    } else {
        HypothesisStatus {
            satisfied: false,
            margin: params.n() as f64 - need as f64,
            failed_conditions: vec![format!("n >= {need}")],
        }
    };
    let lower = hypotheses
        .satisfied
        .then(|| 1.0 - failure_prob(params.n() as u64, d, a, eps, constants.probability).exp2());
    let mut extras = BTreeMap::new();
    extras.insert("range_halfwidth".into(), opts.range_halfwidth);
    if let Some(r) = opts.max_rows {
        extras.insert("max_rows".into(), r as f64);
    }
    if let Some(t) = opts.cardinality {
        extras.insert("cardinality".into(), t as f64);
    }
    Ok(summarize(
        Estimate {
            kind: ExperimentKind::Coverage,
            params: Some(*params),
            extras,
            seed,
            trials,
            estimate: p,
            stderr: frequency_stderr(p, trials),
        },
        Bracket {
            lower,
            upper: None,
            scale: Scale::Linear,
            hypotheses,
        },
    ))
}
