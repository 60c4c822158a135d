//! Shared problem parameters, seed derivation and ∞-norm helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};

/// Floor that forgives representation error: `0.1 * 30.0` is
/// `3.0000000000000004` and `0.29 * 100.0` is `28.999999999999996`; both
/// should land on the integer the caller meant.
pub(crate) fn snapped_floor(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.floor().max(0.0) as usize
    }
}

pub(crate) fn snapped_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// `(d, n, ε, α)` with the derived subset size and intersection cap.
///
/// The derived integers are recomputed on every access from the four
/// stored inputs, so they can never go stale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    d: usize,
    n: usize,
    epsilon: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    d: usize,
    n: usize,
    epsilon: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = ParamError;

    fn try_from(r: RawParams) -> std::result::Result<Self, ParamError> {
        ProblemParams::new(r.d, r.n, r.epsilon, r.alpha)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams {
            d: p.d,
            n: p.n,
            epsilon: p.epsilon,
            alpha: p.alpha,
        }
    }
}

impl ProblemParams {
    pub fn new(d: usize, n: usize, epsilon: f64, alpha: f64) -> Result<Self, ParamError> {
        if d == 0 {
            return Err(ParamError::new("d", "dimension must be positive"));
        }
        if n == 0 {
            return Err(ParamError::new("n", "sample count must be positive"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ParamError::new("epsilon", format!("{epsilon} is not in (0, 1)")));
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(ParamError::new("alpha", format!("{alpha} is not in (0, 1/2)")));
        }
        if snapped_floor(alpha * n as f64) == 0 {
            return Err(ParamError::new(
                "alpha",
                format!("floor(alpha * n) = floor({alpha} * {n}) is zero"),
            ));
        }
        Ok(Self { d, n, epsilon, alpha })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `floor(α·n)`.
    pub fn subset_size(&self) -> usize {
        snapped_floor(self.alpha * self.n as f64)
    }

    /// `floor(2α²·n)`.
    pub fn intersection_cap(&self) -> usize {
        snapped_floor(2.0 * self.alpha * self.alpha * self.n as f64)
    }

    /// `ceil(α²·n / 2)`, the intersection size of the tightness regime.
    pub fn tight_intersection(&self) -> usize {
        snapped_ceil(self.alpha * self.alpha * self.n as f64 / 2.0)
    }

    pub fn with_n(&self, n: usize) -> Result<Self, ParamError> {
        Self::new(self.d, n, self.epsilon, self.alpha)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, ParamError> {
        Self::new(self.d, self.n, epsilon, self.alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ParamError> {
        Self::new(self.d, self.n, self.epsilon, alpha)
    }

    pub fn with_d(&self, d: usize) -> Result<Self, ParamError> {
        Self::new(d, self.n, self.epsilon, self.alpha)
    }
}

/// Range a target is declared to live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DeclaredRange {
    UnitCube,
    /// `[-h, h]^d + center`; the center is the `αn·v` shift of the affine case.
    LambdaRange {
        halfwidth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    z: Vec<f64>,
    declared_range: DeclaredRange,
}

impl Target {
    pub fn new(z: Vec<f64>, declared_range: DeclaredRange) -> Result<Self, ParamError> {
        if z.is_empty() {
            return Err(ParamError::new("z", "target must have at least one coordinate"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(ParamError::new("z", "target coordinates must be finite"));
        }
        match &declared_range {
            DeclaredRange::UnitCube => {
                if let Some(v) = z.iter().find(|v| v.abs() > 1.0) {
                    return Err(ParamError::new("z", format!("coordinate {v} outside [-1, 1]")));
                }
            }
            DeclaredRange::LambdaRange { halfwidth, center } => {
                if halfwidth.is_nan() || *halfwidth <= 0.0 {
                    return Err(ParamError::new("halfwidth", "must be positive"));
                }
                if let Some(c) = center {
                    if c.len() != z.len() {
                        return Err(ParamError::new("center", "length differs from z"));
                    }
                }
                for (i, v) in z.iter().enumerate() {
                    let shift = center.as_ref().map_or(0.0, |c| c[i]);
                    if (v - shift).abs() > *halfwidth {
                        return Err(ParamError::new(
                            "z",
                            format!("coordinate {v} outside [-{halfwidth}, {halfwidth}] + {shift}"),
                        ));
                    }
                }
            }
        }
        Ok(Self { z, declared_range })
    }

    pub fn unit_cube(z: Vec<f64>) -> Result<Self, ParamError> {
        Self::new(z, DeclaredRange::UnitCube)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn declared_range(&self) -> &DeclaredRange {
        &self.declared_range
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `stream_id` of `master`.
///
/// Every step (odd multiply, add, SplitMix finaliser, xor) is a bijection on
/// `u64`, so for a fixed master distinct streams always get distinct seeds.
pub fn derive_seed(master: u64, stream_id: u64) -> u64 {
    let s = mix64(stream_id.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA));
    mix64(master ^ s)
}

/// `max_i |a_i - b_i|`.
pub fn linf_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(linf_unchecked(a, b))
}

#[inline]
pub(crate) fn linf_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn derive_seed_is_deterministic_and_separates_streams() {
        let m = 0xdead_beef;
        assert_eq!(derive_seed(m, 0), derive_seed(m, 0));
        assert_ne!(derive_seed(m, 0), derive_seed(m, 1));
    }

    #[test]
    fn derive_seed_distinct_over_ten_thousand_streams() {
        for m in [0u64, 1, 42, u64::MAX] {
            let seen: HashSet<u64> = (0..10_000).map(|i| derive_seed(m, i)).collect();
            assert_eq!(seen.len(), 10_000);
        }
    }

    #[test]
    fn linf_examples() {
        assert_eq!(linf_distance(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert_eq!(linf_distance(&[0.0, 0.0], &[0.3, -0.5]).unwrap(), 0.5);
        assert!(matches!(
            linf_distance(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn params_reject_each_invariant() {
        assert_eq!(ProblemParams::new(0, 10, 0.1, 0.1).unwrap_err().field, "d");
        assert_eq!(ProblemParams::new(1, 0, 0.1, 0.1).unwrap_err().field, "n");
        assert_eq!(ProblemParams::new(1, 10, 0.0, 0.1).unwrap_err().field, "epsilon");
        assert_eq!(ProblemParams::new(1, 10, 1.0, 0.1).unwrap_err().field, "epsilon");
        assert_eq!(ProblemParams::new(1, 10, 0.5, 0.5).unwrap_err().field, "alpha");
        assert_eq!(ProblemParams::new(1, 10, 0.5, 0.0).unwrap_err().field, "alpha");
        // floor(0.05 * 10) = 0
        assert_eq!(ProblemParams::new(1, 10, 0.5, 0.05).unwrap_err().field, "alpha");
        assert!(ProblemParams::new(1, 10, 0.5, 0.1).is_ok());
    }

    #[test]
    fn derived_integers() {
        let p = ProblemParams::new(1, 729, 0.5, 1.0 / 6.0).unwrap();
        assert_eq!(p.subset_size(), 121);
        assert_eq!(p.intersection_cap(), 40);
        let p = ProblemParams::new(1, 600, 0.5, 0.1).unwrap();
        assert_eq!(p.subset_size(), 60);
        assert_eq!(p.intersection_cap(), 12);
        let p = ProblemParams::new(1, 33, 0.3, 1.0 / 6.0).unwrap();
        assert_eq!(p.tight_intersection(), 1);
        let p = ProblemParams::new(1, 100, 0.3, 0.29).unwrap();
        assert_eq!(p.subset_size(), 29);
    }

    #[test]
    fn params_serde_rejects_unknown_and_invalid() {
        let ok: ProblemParams = serde_json::from_str(r#"{"d":1,"n":10,"epsilon":0.5,"alpha":0.1}"#).unwrap();
        assert_eq!(ok.subset_size(), 1);
        assert!(serde_json::from_str::<ProblemParams>(r#"{"d":1,"n":10,"epsilon":0.5,"alpha":0.1,"beta":1}"#).is_err());
        assert!(serde_json::from_str::<ProblemParams>(r#"{"d":1,"n":10,"epsilon":1.5,"alpha":0.1}"#).is_err());
    }

    #[test]
    fn target_range_checks() {
        assert!(Target::unit_cube(vec![1.0, -1.0]).is_ok());
        assert!(Target::unit_cube(vec![1.01]).is_err());
        let r = DeclaredRange::LambdaRange {
            halfwidth: 2.0,
            center: Some(vec![10.0]),
        };
        assert!(Target::new(vec![11.5], r.clone()).is_ok());
        assert!(Target::new(vec![7.5], r).is_err());
    }

    proptest! {
        #[test]
        fn subset_size_brackets_alpha_n(n in 1usize..100_000, alpha in 0.001f64..0.4999) {
            if let Ok(p) = ProblemParams::new(1, n, 0.5, alpha) {
                let an = alpha * n as f64;
                let m = p.subset_size() as f64;
                prop_assert!(m <= an + 1e-9 * an.max(1.0));
                prop_assert!(an < m + 1.0);
                let cap = p.intersection_cap() as f64;
                let c = 2.0 * alpha * alpha * n as f64;
                prop_assert!(cap <= c + 1e-9 * c.max(1.0) && c < cap + 1.0);
            }
        }

        #[test]
        fn linf_sandwiched_by_euclidean(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..12)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let inf = linf_distance(&a, &b).unwrap();
            let eu = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let d = a.len() as f64;
            prop_assert!(inf <= eu * (1.0 + 1e-12));
            prop_assert!(eu <= d.sqrt() * inf * (1.0 + 1e-12));
        }
    }
}
