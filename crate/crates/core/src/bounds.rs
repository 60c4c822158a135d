//! Closed-form bounds on hit probabilities, moments of the hit count, sample
//! sizes and failure probabilities, all evaluated in log₂ space.
//!
//! Throughout, the subset size that enters a Gaussian variance is the integer
//! `m = floor(αn)` actually used by the experiments; `α` itself appears only
//! in the correction factors such as `(1 - 4α²)`.
//!
//! Hypothesis violations never abort an evaluation: the value is computed
//! anyway and the returned [`HypothesisStatus`] records what failed.

use std::collections::BTreeMap;
use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::params::{snapped_floor, ProblemParams};

/// Relative slack for hypothesis comparisons such as `n >= 81 / (α(1-2α))`,
/// which sit exactly on the boundary at the reference parameters.
const HYP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HypothesisStatus {
    pub satisfied: bool,
    /// Smallest `lhs - rhs` over the conditions; negative when one failed.
    pub margin: f64,
    pub failed_conditions: Vec<String>,
}

#[derive(Default)]
struct Conditions {
    margin: Option<f64>,
    failed: Vec<String>,
}

impl Conditions {
    /// Records `lhs >= rhs`.
    fn at_least(mut self, name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = lhs - rhs;
        self.margin = Some(self.margin.map_or(slack, |m| m.min(slack)));
        if slack < -HYP_TOL * rhs.abs().max(1.0) {
            self.failed.push(name.to_string());
        }
        self
    }

    fn at_most(self, name: &str, lhs: f64, rhs: f64) -> Self {
        self.at_least(name, rhs, lhs)
    }

    fn finish(self) -> HypothesisStatus {
        HypothesisStatus {
            satisfied: self.failed.is_empty(),
            margin: self.margin.unwrap_or(f64::INFINITY),
            failed_conditions: self.failed,
        }
    }
}

/// A log₂ value with the hypotheses it was derived under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub log2: f64,
    pub hypotheses: HypothesisStatus,
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() * LOG2_E
}

/// `log₂(2^a + 2^b)`.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log2_1p((lo - hi).exp2())
}

/// Bounds on `P[X ∈ B∞(z, ε)]` for `X ~ N(0, σ² I_d)` and any `z ∈ [-1, 1]^d`:
///
/// ```text
/// upper = d·log₂(2ε) − (d/2)·log₂(2πσ²)
/// lower = upper − (2d/σ²)·log₂e
/// ```
///
/// Requires `sigma2 > 0` and `0 < epsilon < 1`.
pub fn log_cube_prob_bounds(d: usize, sigma2: f64, epsilon: f64) -> (f64, f64) {
    let d = d as f64;
    let upper = d * (2.0 * epsilon).log2() - 0.5 * d * (2.0 * PI * sigma2).log2();
    let lower = upper - 2.0 * d / sigma2 * LOG2_E;
    (lower, upper)
}

/// Bounds on `E[Y]` for a family of `2^log2_family_size` subsets of size `m`.
pub fn log_expectation_bounds(p: &ProblemParams, log2_family_size: f64) -> (f64, f64) {
    let (lo, hi) = log_cube_prob_bounds(p.d(), p.subset_size() as f64, p.epsilon());
    (lo + log2_family_size, hi + log2_family_size)
}

fn lemma4_conditions(p: &ProblemParams) -> Conditions {
    let a = p.alpha();
    Conditions::default().at_most("alpha <= 1/6", a, 1.0 / 6.0).at_least(
        "n >= 81/(alpha(1-2alpha))",
        p.n() as f64,
        81.0 / (a * (1.0 - 2.0 * a)),
    )
}

/// Upper bound on `P[Y_S = 1, Y_T = 1]` when `|S ∩ T| = floor(2α²n)`:
/// `2d·log₂(2ε) − d·log₂(2πm) − (d/2)·log₂(1 − 4α²)`.
pub fn log_joint_upper(p: &ProblemParams) -> BoundValue {
    let d = p.d() as f64;
    let m = p.subset_size() as f64;
    let a = p.alpha();
    let log2 = 2.0 * d * (2.0 * p.epsilon()).log2() - d * (2.0 * PI * m).log2() - 0.5 * d * log2_1p(-4.0 * a * a);
    BoundValue {
        log2,
        hypotheses: lemma4_conditions(p).finish(),
    }
}

/// Lower bound on `P[Y_S = 1, Y_T = 1]` when `|S ∩ T| >= ceil(α²n/2)`:
/// `2d·log₂(2ε) − d·log₂(2πm) − (d/2)·log₂(1 − α²/4) − (3d·h²/m)·log₂e`.
///
/// `h` is the half-width of the target box; `None` means the unit cube.
/// Half-widths below 1 are treated as 1 since the `h²` form is only valid
/// once the target can leave the unit cube.
pub fn log_joint_lower(p: &ProblemParams, range_halfwidth: Option<f64>) -> BoundValue {
    let d = p.d() as f64;
    let m = p.subset_size() as f64;
    let a = p.alpha();
    let h = range_halfwidth.unwrap_or(1.0).max(1.0);
    let log2 = 2.0 * d * (2.0 * p.epsilon()).log2()
        - d * (2.0 * PI * m).log2()
        - 0.5 * d * log2_1p(-a * a / 4.0)
        - 3.0 * d * h * h / m * LOG2_E;
    let hypotheses = Conditions::default()
        .at_least("n >= 10/(alpha(2-alpha))", p.n() as f64, 10.0 / (a * (2.0 - a)))
        .finish();
    BoundValue { log2, hypotheses }
}

/// Upper bound on `Var[Y]`:
///
/// ```text
/// (2ε)^{2d} |C|(|C|−1) / (2πm)^d · [(1−4α²)^{−d/2} − e^{−4d/m}] + (2ε)^d |C| / (2πm)^{d/2}
/// ```
///
/// The cross term counts ordered pairs `S ≠ T`, so it vanishes for `|C| = 1`.
/// The bracket is evaluated as `e^b · expm1(a − b)` to survive `α → 0`.
pub fn log_variance_upper(p: &ProblemParams, log2_family_size: f64) -> BoundValue {
    let d = p.d() as f64;
    let m = p.subset_size() as f64;
    let a = p.alpha();
    let eps = p.epsilon();
    let single = d * (2.0 * eps).log2() - 0.5 * d * (2.0 * PI * m).log2();

    let ln_first = -0.5 * d * (-4.0 * a * a).ln_1p();
    let ln_second = -4.0 * d / m;
    let gap = (ln_first - ln_second).exp_m1();
    let mut conds = lemma4_conditions(p);
    let log2_bracket = if gap > 0.0 {
        (ln_second + gap.ln()) * LOG2_E
    } else {
        conds.failed.push("variance bracket is not positive".into());
        f64::NEG_INFINITY
    };
    // log₂(|C|(|C|−1)) = 2L + log₂(1 − 2^−L)
    let log2_pairs = if log2_family_size <= 0.0 {
        f64::NEG_INFINITY
    } else {
        2.0 * log2_family_size + log2_1p(-(-log2_family_size).exp2())
    };
    let cross = 2.0 * single + log2_pairs + log2_bracket;
    let diag = single + log2_family_size;
    BoundValue {
        log2: log2_add(cross, diag),
        hypotheses: conds.finish(),
    }
}

/// `144·(d/α²)·(log₂(1/ε) + log₂d + log₂(1/α))`, the sample size after which
/// a single target is hit with probability at least 1/3.
pub fn required_n_single(d: usize, alpha: f64, epsilon: f64) -> f64 {
    let d = d as f64;
    144.0 * d / (alpha * alpha) * (-epsilon.log2() + d.log2() - alpha.log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCheck {
    /// All hypotheses hold, so `P[Y >= 1] >= 1/3` is guaranteed.
    pub guaranteed: bool,
    pub hypotheses: HypothesisStatus,
    pub required_n: f64,
    /// `α²n/6`, the family size exponent the check demands.
    pub required_log2_family_size: f64,
}

/// Checks the hypotheses under which a low-intersection family of the given
/// size hits a fixed target with probability at least 1/3. The pairwise
/// intersection cap is assumed to hold for the family.
pub fn chebyshev_check(p: &ProblemParams, log2_family_size: f64) -> ChebyshevCheck {
    let a = p.alpha();
    let d = p.d() as f64;
    let n = p.n() as f64;
    let required_n = required_n_single(p.d(), a, p.epsilon());
    let required_log2 = a * a * n / 6.0;
    let hypotheses = Conditions::default()
        .at_most("alpha <= 1/6", a, 1.0 / 6.0)
        .at_most("alpha <= 1/(6 sqrt d)", a, 1.0 / (6.0 * d.sqrt()))
        .at_least("log2|C| >= alpha^2 n/6", log2_family_size, required_log2)
        .at_least("n >= 144 d/alpha^2 (log 1/eps + log d + log 1/alpha)", n, required_n)
        .finish();
    ChebyshevCheck {
        guaranteed: hypotheses.satisfied,
        hypotheses,
        required_n,
        required_log2_family_size: required_log2,
    }
}

/// The two constants of the coverage theorems: one scales the sample-size
/// requirement, the other the exponent of the failure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub sample: f64,
    pub probability: f64,
}

impl TheoremConstants {
    /// `144 / log₂(3/2)` for both roles (unit-cube targets).
    pub fn unit_cube() -> Self {
        let c = 144.0 / 1.5f64.log2();
        Self {
            sample: c,
            probability: c,
        }
    }

    /// `C = 17·144` and `δ = 288 / log₂(3/2)` (λ√n-range targets).
    pub fn generalized() -> Self {
        Self {
            sample: 17.0 * 144.0,
            probability: 288.0 / 1.5f64.log2(),
        }
    }
}

impl Default for TheoremConstants {
    fn default() -> Self {
        Self::unit_cube()
    }
}

fn log_sum_term(d: usize, alpha: f64, epsilon: f64) -> f64 {
    -epsilon.log2() + (d as f64).log2() - alpha.log2()
}

/// `ceil(C·(d²/α²)·log₂(1/ε)·(log₂(1/ε) + log₂d + log₂(1/α)))`.
pub fn required_n_full(d: usize, alpha: f64, epsilon: f64, c_const: f64) -> u64 {
    let df = d as f64;
    let bound = c_const * df * df / (alpha * alpha) * (-epsilon.log2()) * log_sum_term(d, alpha, epsilon);
    bound.ceil().max(0.0) as u64
}

/// log₂ of the probability that coverage fails:
/// `−(n / (C·(d/α²)·(log₂(1/ε) + log₂d + log₂(1/α))) − d·log₂(1/ε))`.
///
/// Positive values mean the bound is vacuous at this `n`.
pub fn failure_prob(n: u64, d: usize, alpha: f64, epsilon: f64, c_const: f64) -> f64 {
    let df = d as f64;
    let denom = c_const * df / (alpha * alpha) * log_sum_term(d, alpha, epsilon);
    -(n as f64 / denom - df * (-epsilon.log2()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainRequirement {
    /// `1/(6√d)`.
    pub alpha: f64,
    pub n: u64,
    /// `floor(n/(6√d))`.
    pub subset_size: u64,
    /// `C·36·d³`, the coefficient of `log₂(1/ε)·(…)`.
    pub leading_factor: f64,
}

/// Sample size for the main coverage statement, i.e. [`required_n_full`] at
/// `α = 1/(6√d)`.
pub fn required_n_main(d: usize, epsilon: f64, c_const: f64) -> MainRequirement {
    let df = d as f64;
    let alpha = 1.0 / (6.0 * df.sqrt());
    let n = required_n_full(d, alpha, epsilon, c_const);
    MainRequirement {
        alpha,
        n,
        subset_size: (n as f64 * alpha).floor() as u64,
        leading_factor: c_const * 36.0 * df * df * df,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedRange {
    /// `½·√(α/(17d))`.
    pub lambda: f64,
    /// `σ·λ·√n_eff`.
    pub halfwidth: f64,
    /// `subset_size · v`.
    pub center_shift: Vec<f64>,
    /// `n` for Gaussian samples, `p·n/2` for containment samples.
    pub effective_n: f64,
    pub subset_size: usize,
    pub hypotheses: HypothesisStatus,
}

fn generalized_range_at(d: usize, alpha: f64, effective_n: f64, sigma: f64, v: Option<&[f64]>) -> GeneralizedRange {
    let df = d as f64;
    let lambda = 0.5 * (alpha / (17.0 * df)).sqrt();
    let subset_size = snapped_floor(alpha * effective_n);
    let center_shift = match v {
        Some(v) => v.iter().map(|x| subset_size as f64 * x).collect(),
        None => vec![0.0; d],
    };
    let hypotheses = Conditions::default()
        .at_most("alpha <= 1/(6 sqrt d)", alpha, 1.0 / (6.0 * df.sqrt()))
        .finish();
    GeneralizedRange {
        lambda,
        halfwidth: sigma * lambda * effective_n.sqrt(),
        center_shift,
        effective_n,
        subset_size,
        hypotheses,
    }
}

/// Target box `[−σλ√n, σλ√n]^d + m·v` reachable from `N(v, σ² I)` samples.
pub fn generalized_range(p: &ProblemParams, sigma: f64, v: Option<&[f64]>) -> GeneralizedRange {
    generalized_range_at(p.d(), p.alpha(), p.n() as f64, sigma, v)
}

/// As [`generalized_range`] for samples that contain `N(v, σ² I)` with
/// probability `p_contain`: only about `p·n/2` rows are usable.
pub fn generalized_range_containment(
    p: &ProblemParams,
    sigma: f64,
    v: Option<&[f64]>,
    p_contain: f64,
) -> GeneralizedRange {
    generalized_range_at(p.d(), p.alpha(), p_contain * p.n() as f64 / 2.0, sigma, v)
}

/// `2ε(n + 1)`: error after replacing every sample by its quantised value.
pub fn discrete_error_bound(n: usize, epsilon: f64) -> f64 {
    2.0 * epsilon * (n as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Log2,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub value: f64,
    pub scale: Scale,
}

impl BoundEntry {
    fn log2(value: f64) -> Self {
        Self {
            value,
            scale: Scale::Log2,
        }
    }

    fn linear(value: f64) -> Self {
        Self {
            value,
            scale: Scale::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub params: ProblemParams,
    pub log2_family_size: f64,
    pub constants: TheoremConstants,
    pub entries: BTreeMap<String, BoundEntry>,
    pub hypothesis_flags: BTreeMap<String, HypothesisStatus>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|e| e.value)
    }
}

/// Every bound for one parameter tuple.
pub fn bound_report(p: &ProblemParams, log2_family_size: f64, constants: TheoremConstants) -> BoundReport {
    let mut e = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let m = p.subset_size() as f64;

    let (lo, hi) = log_cube_prob_bounds(p.d(), m, p.epsilon());
    e.insert("cube_prob_lower".into(), BoundEntry::log2(lo));
    e.insert("cube_prob_upper".into(), BoundEntry::log2(hi));
    let (lo, hi) = log_expectation_bounds(p, log2_family_size);
    e.insert("expectation_lower".into(), BoundEntry::log2(lo));
    e.insert("expectation_upper".into(), BoundEntry::log2(hi));

    let ju = log_joint_upper(p);
    e.insert("joint_upper".into(), BoundEntry::log2(ju.log2));
    flags.insert("joint_upper".into(), ju.hypotheses);
    let jl = log_joint_lower(p, None);
    e.insert("joint_lower".into(), BoundEntry::log2(jl.log2));
    flags.insert("joint_lower".into(), jl.hypotheses);
    let var = log_variance_upper(p, log2_family_size);
    e.insert("variance_upper".into(), BoundEntry::log2(var.log2));
    flags.insert("variance_upper".into(), var.hypotheses);

    let cheb = chebyshev_check(p, log2_family_size);
    e.insert("required_n_single".into(), BoundEntry::linear(cheb.required_n.ceil()));
    flags.insert("chebyshev".into(), cheb.hypotheses);

    e.insert(
        "required_n_full".into(),
        BoundEntry::linear(required_n_full(p.d(), p.alpha(), p.epsilon(), constants.sample) as f64),
    );
    e.insert(
        "failure_prob".into(),
        BoundEntry::log2(failure_prob(
            p.n() as u64,
            p.d(),
            p.alpha(),
            p.epsilon(),
            constants.probability,
        )),
    );
    let main = required_n_main(p.d(), p.epsilon(), constants.sample);
    e.insert("required_n_main".into(), BoundEntry::linear(main.n as f64));
    e.insert("main_subset_size".into(), BoundEntry::linear(main.subset_size as f64));

    let g = generalized_range(p, 1.0, None);
    e.insert("lambda".into(), BoundEntry::linear(g.lambda));
    e.insert("generalized_halfwidth".into(), BoundEntry::linear(g.halfwidth));
    flags.insert("generalized_range".into(), g.hypotheses);

    e.insert(
        "discrete_error_bound".into(),
        BoundEntry::linear(discrete_error_bound(p.n(), p.epsilon())),
    );
    BoundReport {
        params: *p,
        log2_family_size,
        constants,
        entries: e,
        hypothesis_flags: flags,
    }
}
