//! Numerical spot checks of the auxiliary inequalities behind the variance
//! and tightness bounds.
//!
//! Each check draws parameters inside the inequality's hypotheses, evaluates
//! both sides (by quadrature where an integral is involved) and records the
//! relative slack `(rhs − lhs) / |rhs|`. A draw is a violation when that
//! slack is below `−1e-9`.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ParamError, Result};
use crate::params::derive_seed;
use crate::sampler::rng_from_seed;

use super::quadrature::{integrate, normal_interval_prob};

/// Relative slack below which a draw counts as a violation.
pub const CLAIM_TOLERANCE: f64 = 1e-9;
const QUAD_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimId {
    /// `e^{4d/(αn)} (1 − 4α²)^{−d/2} ≤ 9/8`.
    #[serde(rename = "A2_ub_cov_term")]
    A2UbCovTerm,
    /// `4 e^{4d/(αn)} 2^{−α²n/6} (παn/(2ε²))^{d/2} ≤ ε`.
    #[serde(rename = "A3_ub_var_term")]
    A3UbVarTerm,
    /// `H(z) ≤ H(0)` for `H(z) = ∫ φ_B(x) P[A ∈ (z − x − ε, z − x + ε)]² dx`.
    #[serde(rename = "A4_int_ub_max")]
    A4IntUbMax,
    /// Square of `∫_{−ε}^{ε} e^{−c(x+s)²} ds` against the lifted trapezoid.
    #[serde(rename = "A5_int_ub_convex")]
    A5IntUbConvex,
    /// Square of `∫_{x−ε}^{x+ε} e^{−cy²} dy` against the endpoint product.
    #[serde(rename = "A6_lb_exp_int")]
    A6LbExpInt,
}

impl ClaimId {
    pub const ALL: [ClaimId; 5] = [
        ClaimId::A2UbCovTerm,
        ClaimId::A3UbVarTerm,
        ClaimId::A4IntUbMax,
        ClaimId::A5IntUbConvex,
        ClaimId::A6LbExpInt,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheckReport {
    pub claim_id: ClaimId,
    pub draws: u64,
    pub violations: u64,
    /// Smallest relative slack seen; negative means the inequality failed.
    pub worst_margin: f64,
    /// Observed `[min, max]` of every drawn parameter.
    pub parameter_ranges: BTreeMap<String, [f64; 2]>,
}

struct Draw {
    margin: f64,
    params: Vec<(&'static str, f64)>,
}

/// `(rhs − lhs)/|rhs|` from `log(lhs) − log(rhs)` in natural log.
fn margin_from_log_gap(gap: f64) -> f64 {
    -gap.exp_m1()
}

fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / rhs.abs()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Uniform on `(0, hi]`.
fn open_uniform(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

fn draw_a2(rng: &mut ChaCha8Rng) -> Draw {
    let d = rng.random_range(1..=16) as f64;
    let alpha = open_uniform(rng, 1.0 / (6.0 * d.sqrt()));
    let n_min = (68.0 * d / alpha).ceil();
    // A quarter of the draws sit exactly on the smallest admissible n.
    let n = if rng.random::<f64>() < 0.25 {
        n_min
    } else {
        (n_min * log_uniform(rng, 1.0, 100.0)).ceil()
    };
    let log_lhs = 4.0 * d / (alpha * n) - 0.5 * d * (-4.0 * alpha * alpha).ln_1p();
    Draw {
        margin: margin_from_log_gap(log_lhs - (9.0f64 / 8.0).ln()),
        params: vec![("d", d), ("alpha", alpha), ("n", n)],
    }
}

fn draw_a3(rng: &mut ChaCha8Rng) -> Draw {
    let d = rng.random_range(1..=16) as f64;
    let alpha = open_uniform(rng, 1.0 / 6.0);
    let eps = log_uniform(rng, 1e-6, 1.0).min(1.0 - 1e-12);
    let n_min = (144.0 * d / (alpha * alpha) * (-eps.log2() + d.log2() - alpha.log2())).ceil();
    let n = if rng.random::<f64>() < 0.25 {
        n_min
    } else {
        (n_min * log_uniform(rng, 1.0, 10.0)).ceil()
    };
    let an = alpha * n;
    let log_lhs =
        4.0f64.ln() + 4.0 * d / an - alpha * alpha * n / 6.0 * LN_2 + 0.5 * d * (PI * an / (2.0 * eps * eps)).ln();
    Draw {
        margin: margin_from_log_gap(log_lhs - eps.ln()),
        params: vec![("d", d), ("alpha", alpha), ("epsilon", eps), ("n", n)],
    }
}

fn h_integral(z: f64, sa: f64, sb: f64, eps: f64, panels: usize) -> f64 {
    let phi_b = |x: f64| (-x * x / (2.0 * sb * sb)).exp() / ((2.0 * PI).sqrt() * sb);
    let f = |x: f64| {
        let p = normal_interval_prob(z - x - eps, z - x + eps, sa);
        phi_b(x) * p * p
    };
    // Outside this window either φ_B or the interval mass is below e^{-50}
    // of its peak. Panels are no wider than the narrower scale, so the
    // first pass cannot step over the bump.
    let lo = (z - eps - 12.0 * sa).max(-10.0 * sb);
    let hi = (z + eps + 12.0 * sa).min(10.0 * sb);
    if lo >= hi {
        return 0.0;
    }
    let scale = sa.min(sb).min(eps);
    let panels = panels.max(((hi - lo) / scale).ceil().min(512.0) as usize);
    integrate(f, lo, hi, panels, QUAD_REL_TOL, 0.0)
}

fn draw_a4(rng: &mut ChaCha8Rng, panels: usize) -> Draw {
    let sa = log_uniform(rng, 0.1, 30.0);
    let sb = log_uniform(rng, 0.1, 30.0);
    let eps = open_uniform(rng, 1.0);
    let h0 = h_integral(0.0, sa, sb, eps, panels);
    let reach = 3.0 * (sa + sb) + eps;
    let mut worst = f64::INFINITY;
    let mut zmax = 0.0f64;
    for k in 1..=8 {
        // Geometric grid reaching far into the tails, plus one random point.
        let z = if k == 8 {
            rng.random::<f64>() * reach
        } else {
            reach * 2f64.powi(k - 7)
        };
        zmax = zmax.max(z);
        worst = worst.min(relative_margin(h_integral(z, sa, sb, eps, panels), h0));
    }
    Draw {
        margin: worst,
        params: vec![("sigma_a", sa), ("sigma_b", sb), ("epsilon", eps), ("z_max", zmax)],
    }
}

fn draw_a5(rng: &mut ChaCha8Rng, panels: usize) -> Draw {
    let c = open_uniform(rng, 1.0 / 162.0);
    let eps = open_uniform(rng, 1.0);
    let x = (2.0 * rng.random::<f64>() - 1.0) * (60.0 / c).sqrt();
    // Scale both sides by e^{c·x_min²}, x_min the closest point of [x−ε, x+ε]
    // to 0, so neither side underflows.
    let near = if x.abs() <= eps { 0.0 } else { x.abs() - eps };
    let shift = c * near * near;
    let lhs = integrate(
        |s| (shift - c * (x + s) * (x + s)).exp(),
        -eps,
        eps,
        panels,
        QUAD_REL_TOL,
        0.0,
    );
    let avg = 0.5 * ((shift - c * (x + eps).powi(2)).exp() + (shift - c * (x - eps).powi(2)).exp());
    let rhs = integrate(|_| avg * (c * eps * eps).exp(), -eps, eps, panels, QUAD_REL_TOL, 0.0);
    Draw {
        margin: relative_margin(lhs * lhs, rhs * rhs),
        params: vec![("c", c), ("epsilon", eps), ("x", x)],
    }
}

fn draw_a6(rng: &mut ChaCha8Rng, panels: usize) -> Draw {
    let c = open_uniform(rng, 0.1);
    let eps = open_uniform(rng, 1.0);
    let x = (2.0 * rng.random::<f64>() - 1.0) * (60.0 / c).sqrt();
    let near = if x.abs() <= eps { 0.0 } else { x.abs() - eps };
    let shift = c * near * near;
    let lhs = integrate(
        |y| (shift - c * y * y).exp(),
        x - eps,
        x + eps,
        panels,
        QUAD_REL_TOL,
        0.0,
    );
    let left = integrate(
        |_| (shift - c * (x - eps).powi(2)).exp(),
        x - eps,
        x + eps,
        panels,
        QUAD_REL_TOL,
        0.0,
    );
    let right = integrate(
        |_| (shift - c * (x + eps).powi(2)).exp(),
        x - eps,
        x + eps,
        panels,
        QUAD_REL_TOL,
        0.0,
    );
    // lhs² ≥ left · right
    Draw {
        margin: relative_margin(left * right, lhs * lhs),
        params: vec![("c", c), ("epsilon", eps), ("x", x)],
    }
}

/// Checks one inequality on `draws` random parameter tuples.
pub fn check_claim(claim: ClaimId, draws: u64, seed: u64, quadrature_points: usize) -> Result<ClaimCheckReport> {
    if draws == 0 {
        return Err(ParamError::new("draws", "must be at least 1").into());
    }
    let panels = quadrature_points.max(1);
    let stream = derive_seed(seed, claim as u64);
    let results: Vec<Draw> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(stream, i));
            match claim {
                ClaimId::A2UbCovTerm => draw_a2(&mut rng),
                ClaimId::A3UbVarTerm => draw_a3(&mut rng),
                ClaimId::A4IntUbMax => draw_a4(&mut rng, panels),
                ClaimId::A5IntUbConvex => draw_a5(&mut rng, panels),
                ClaimId::A6LbExpInt => draw_a6(&mut rng, panels),
            }
        })
        .collect();
    let mut ranges: BTreeMap<String, [f64; 2]> = BTreeMap::new();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for r in &results {
        worst = worst.min(r.margin);
        if r.margin < -CLAIM_TOLERANCE || r.margin.is_nan() {
            violations += 1;
        }
        for &(k, v) in &r.params {
            let e = ranges.entry(k.to_string()).or_insert([v, v]);
            e[0] = e[0].min(v);
            e[1] = e[1].max(v);
        }
    }
    Ok(ClaimCheckReport {
        claim_id: claim,
        draws,
        violations,
        worst_margin: worst,
        parameter_ranges: ranges,
    })
}

/// Runs every check; claim `k` draws from the stream `derive_seed(seed, k)`.
pub fn verify_appendix_claims(draws: u64, seed: u64, quadrature_points: usize) -> Result<Vec<ClaimCheckReport>> {
    ClaimId::ALL
        .iter()
        .map(|&c| check_claim(c, draws, seed, quadrature_points))
        .collect()
}
