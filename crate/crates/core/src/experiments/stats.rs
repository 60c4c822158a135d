use std::collections::BTreeMap;
use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{HypothesisStatus, Scale};
use crate::error::Result;
use crate::params::{derive_seed, ProblemParams};
use crate::sampler::rng_from_seed;

/// Confidence intervals are `estimate ± CI_MULTIPLIER · stderr`.
pub const CI_MULTIPLIER: f64 = 4.0;

/// Trials per random stream. Chunk `c` draws from `derive_seed(seed, c)`,
/// so results do not depend on the number of worker threads.
pub(crate) const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleSubset,
    MomentsMean,
    MomentsVariance,
    Covariance,
    Joint,
    Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Within,
    AboveUpper,
    BelowLower,
    HypothesesUnmet,
}

impl Verdict {
    pub fn is_violation(self) -> bool {
        matches!(self, Verdict::AboveUpper | Verdict::BelowLower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub experiment: ExperimentKind,
    pub params: Option<ProblemParams>,
    /// Experiment-specific inputs such as the target or intersection size.
    pub extras: BTreeMap<String, f64>,
    pub seed: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_halfwidth: f64,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub bound_scale: Scale,
    pub hypotheses: HypothesisStatus,
    pub verdict: Verdict,
}

impl TrialSummary {
    pub fn linear_bounds(&self) -> (Option<f64>, Option<f64>) {
        let conv = |v: Option<f64>| match self.bound_scale {
            Scale::Log2 => v.map(f64::exp2),
            Scale::Linear => v,
        };
        (conv(self.bound_lower), conv(self.bound_upper))
    }
}

pub(crate) struct Bracket {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub scale: Scale,
    pub hypotheses: HypothesisStatus,
}

impl Bracket {
    pub fn unconditional(lower: Option<f64>, upper: Option<f64>, scale: Scale) -> Self {
        Self {
            lower,
            upper,
            scale,
            hypotheses: HypothesisStatus {
                satisfied: true,
                margin: f64::INFINITY,
                failed_conditions: vec![],
            },
        }
    }
}

pub(crate) struct Estimate {
    pub kind: ExperimentKind,
    pub params: Option<ProblemParams>,
    pub extras: BTreeMap<String, f64>,
    pub seed: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Compares the confidence interval, never the point estimate, with the
/// bounds.
pub(crate) fn summarize(e: Estimate, b: Bracket) -> TrialSummary {
    let ci = CI_MULTIPLIER * e.stderr;
    let lin = |v: Option<f64>| match b.scale {
        Scale::Log2 => v.map(f64::exp2),
        Scale::Linear => v,
    };
    let verdict = if !b.hypotheses.satisfied {
        Verdict::HypothesesUnmet
    } else if lin(b.upper).is_some_and(|u| e.estimate - ci > u) {
        Verdict::AboveUpper
    } else if lin(b.lower).is_some_and(|l| e.estimate + ci < l) {
        Verdict::BelowLower
    } else {
        Verdict::Within
    };
    TrialSummary {
        experiment: e.kind,
        params: e.params,
        extras: e.extras,
        seed: e.seed,
        trials: e.trials,
        estimate: e.estimate,
        stderr: e.stderr,
        ci_halfwidth: ci,
        bound_lower: b.lower,
        bound_upper: b.upper,
        bound_scale: b.scale,
        hypotheses: b.hypotheses,
        verdict,
    }
}

/// `√(p̂(1 − p̂)/N)`.
pub fn frequency_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs `f(rng, count)` over chunks of trials in parallel and returns the
/// per-chunk results in chunk order.
pub(crate) fn chunked<T, F>(trials: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, c));
            f(&mut rng, CHUNK.min(trials - c * CHUNK))
        })
        .collect()
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One row per summary with fixed columns; extras are `key=value` pairs
/// joined by `;`.
pub fn write_summaries_csv<W: Write>(rows: &[TrialSummary], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "experiment",
        "d",
        "n",
        "epsilon",
        "alpha",
        "extras",
        "seed",
        "trials",
        "estimate",
        "stderr",
        "ci_halfwidth",
        "bound_lower",
        "bound_upper",
        "bound_scale",
        "hypotheses_satisfied",
        "verdict",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let p = r.params.as_ref();
        let extras = r
            .extras
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        wr.write_record([
            tag(&r.experiment),
            p.map_or(String::new(), |p| p.d().to_string()),
            p.map_or(String::new(), |p| p.n().to_string()),
            p.map_or(String::new(), |p| p.epsilon().to_string()),
            p.map_or(String::new(), |p| p.alpha().to_string()),
            extras,
            r.seed.to_string(),
            r.trials.to_string(),
            r.estimate.to_string(),
            r.stderr.to_string(),
            r.ci_halfwidth.to_string(),
            opt(r.bound_lower),
            opt(r.bound_upper),
            tag(&r.bound_scale),
            r.hypotheses.satisfied.to_string(),
            tag(&r.verdict),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(estimate: f64, stderr: f64) -> Estimate {
        Estimate {
            kind: ExperimentKind::SingleSubset,
            params: None,
            extras: BTreeMap::new(),
            seed: 0,
            trials: 100,
            estimate,
            stderr,
        }
    }

    #[test]
    fn verdict_uses_interval_overlap() {
        let b = || Bracket::unconditional(Some(0.2), Some(0.3), Scale::Linear);
        assert_eq!(summarize(est(0.25, 0.01), b()).verdict, Verdict::Within);
        assert_eq!(summarize(est(0.33, 0.01), b()).verdict, Verdict::Within);
        assert_eq!(summarize(est(0.35, 0.01), b()).verdict, Verdict::AboveUpper);
        assert_eq!(summarize(est(0.15, 0.01), b()).verdict, Verdict::BelowLower);
        let log = Bracket::unconditional(Some(-3.0), Some(-2.0), Scale::Log2);
        let s = summarize(est(0.2, 0.001), log);
        assert_eq!(s.verdict, Verdict::Within);
        assert_eq!(s.linear_bounds(), (Some(0.125), Some(0.25)));
        assert!((s.ci_halfwidth - 0.004).abs() < 1e-15);
    }

    #[test]
    fn unmet_hypotheses_override() {
        let mut b = Bracket::unconditional(Some(0.9), None, Scale::Linear);
        b.hypotheses.satisfied = false;
        assert_eq!(summarize(est(0.1, 0.0), b).verdict, Verdict::HypothesesUnmet);
    }

    #[test]
    fn chunks_are_thread_independent() {
        use rand::Rng;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    chunked(10_000, 9, |rng, k| {
                        (0..k).map(|_| rng.random::<u32>() as u64).sum::<u64>()
                    })
                })
        };
        let a = run(1);
        assert_eq!(a.len(), 3);
        assert_eq!(a, run(3));
    }

    #[test]
    fn frequency_stderr_formula() {
        assert!((frequency_stderr(0.5, 100) - 0.05).abs() < 1e-15);
        assert_eq!(frequency_stderr(0.0, 100), 0.0);
    }
}
