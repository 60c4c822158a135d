//! Seeded generators for the random inputs of every experiment, plus binary
//! truncation and the on-disk matrix formats.
//!
//! Every generator is a pure function of `(shape, parameters, seed)`. The
//! underlying stream is ChaCha8 with `rand_distr`'s ziggurat normal sampler;
//! changing either changes every downstream number, so both are pinned.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::params::derive_seed;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outlier {
    /// Uniform on `[-halfwidth, halfwidth]^d`.
    UniformBox {
        halfwidth: f64,
    },
    PointMass {
        point: Vec<f64>,
    },
    /// Independent Cauchy coordinates with the given scale.
    HeavyTail {
        scale: f64,
    },
}

/// Mixture that draws `N(inner_mean, inner_sigma² I)` with probability `p`
/// and an outlier otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentSpec {
    pub p: f64,
    pub inner_mean: Vec<f64>,
    pub inner_sigma: f64,
    pub outlier: Outlier,
}

impl ContainmentSpec {
    pub fn validate(&self, d: usize) -> Result<(), ParamError> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(ParamError::new("p", format!("{} is not in (0, 1]", self.p)));
        }
        if self.inner_mean.len() != d {
            return Err(ParamError::new("inner_mean", "length differs from d"));
        }
        if self.inner_mean.iter().any(|v| !v.is_finite()) {
            return Err(ParamError::new("inner_mean", "entries must be finite"));
        }
        if !(self.inner_sigma > 0.0 && self.inner_sigma.is_finite()) {
            return Err(ParamError::new("inner_sigma", "must be positive and finite"));
        }
        match &self.outlier {
            Outlier::UniformBox { halfwidth } if !(halfwidth.is_finite() && *halfwidth > 0.0) => {
                Err(ParamError::new("outlier.halfwidth", "must be positive and finite"))
            }
            Outlier::PointMass { point } if point.len() != d => {
                Err(ParamError::new("outlier.point", "length differs from d"))
            }
            Outlier::PointMass { point } if point.iter().any(|v| !v.is_finite()) => {
                Err(ParamError::new("outlier.point", "entries must be finite"))
            }
            Outlier::HeavyTail { scale } if !(scale.is_finite() && *scale > 0.0) => {
                Err(ParamError::new("outlier.scale", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DistributionTag {
    StandardNormal,
    AffineNormal {
        mean: Vec<f64>,
        sigma: f64,
    },
    Containment {
        spec: ContainmentSpec,
    },
    Quantized {
        source: Box<DistributionTag>,
        delta: f64,
    },
    /// Read from a file that carries no provenance (CSV).
    Imported,
}

/// An `n × d` sample stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    seed: u64,
    tag: DistributionTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inner_mask: Option<Vec<bool>>,
}

impl SampleMatrix {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64, tag: DistributionTag) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || d == 0 {
            return Err(ParamError::new("rows", "matrix must be non-empty").into());
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self::from_flat(rows.len(), d, values, seed, tag))
    }

    pub(crate) fn from_flat(n: usize, d: usize, values: Vec<f64>, seed: u64, tag: DistributionTag) -> Self {
        debug_assert_eq!(values.len(), n * d);
        Self {
            n,
            d,
            values,
            seed,
            tag,
            inner_mask: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tag(&self) -> &DistributionTag {
        &self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// For containment samples: which rows came from the inner Gaussian.
    pub fn inner_mask(&self) -> Option<&[bool]> {
        self.inner_mask.as_deref()
    }

    /// First `k` rows, keeping provenance.
    pub fn prefix(&self, k: usize) -> SampleMatrix {
        let k = k.min(self.n);
        SampleMatrix {
            n: k,
            d: self.d,
            values: self.values[..k * self.d].to_vec(),
            seed: self.seed,
            tag: self.tag.clone(),
            inner_mask: self.inner_mask.as_ref().map(|m| m[..k].to_vec()),
        }
    }

    /// Sum of the given rows, accumulated in the order given.
    pub fn subset_sum(&self, subset: &[usize]) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for &i in subset {
            for (a, x) in acc.iter_mut().zip(self.row(i)) {
                *a += x;
            }
        }
        acc
    }
}

fn check_shape(n: usize, d: usize) -> Result<(), ParamError> {
    if n == 0 {
        return Err(ParamError::new("n", "must be at least 1"));
    }
    if d == 0 {
        return Err(ParamError::new("d", "must be at least 1"));
    }
    Ok(())
}

/// I.i.d. `N(0, 1)` entries.
pub fn sample_standard_normal(n: usize, d: usize, seed: u64) -> Result<SampleMatrix> {
    check_shape(n, d)?;
    let mut rng = rng_from_seed(seed);
    let values: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(SampleMatrix::from_flat(
        n,
        d,
        values,
        seed,
        DistributionTag::StandardNormal,
    ))
}

/// `v + σ·G` where `G` is the standard-normal draw for the same seed.
pub fn sample_affine_normal(n: usize, d: usize, mean: &[f64], sigma: f64, seed: u64) -> Result<SampleMatrix> {
    check_shape(n, d)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ParamError::new("sigma", format!("{sigma} must be positive and finite")).into());
    }
    if mean.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: mean.len(),
        });
    }
    let mut m = sample_standard_normal(n, d, seed)?;
    for row in m.values.chunks_exact_mut(d) {
        for (x, v) in row.iter_mut().zip(mean) {
            *x = v + sigma * *x;
        }
    }
    m.tag = DistributionTag::AffineNormal {
        mean: mean.to_vec(),
        sigma,
    };
    Ok(m)
}

/// Row-wise mixture of an affine Gaussian and an outlier law.
///
/// Inner rows consume the Gaussian stream of `seed` in row order, so with
/// `p = 1` the result equals [`sample_affine_normal`] for the same seed.
/// Row selection and outlier draws use separate derived streams.
pub fn sample_containment(n: usize, d: usize, spec: &ContainmentSpec, seed: u64) -> Result<SampleMatrix> {
    check_shape(n, d)?;
    spec.validate(d)?;
    let mut gauss = rng_from_seed(seed);
    let mut coin = rng_from_seed(derive_seed(seed, 1));
    let mut other = rng_from_seed(derive_seed(seed, 2));
    let mut values = Vec::with_capacity(n * d);
    let mut mask = Vec::with_capacity(n);
    for _ in 0..n {
        let inner = coin.random::<f64>() < spec.p;
        mask.push(inner);
        if inner {
            for v in &spec.inner_mean {
                let g: f64 = gauss.sample(StandardNormal);
                values.push(v + spec.inner_sigma * g);
            }
        } else {
            match &spec.outlier {
                Outlier::UniformBox { halfwidth } => {
                    for _ in 0..d {
                        values.push(other.random_range(-*halfwidth..=*halfwidth));
                    }
                }
                Outlier::PointMass { point } => values.extend_from_slice(point),
                Outlier::HeavyTail { scale } => {
                    let c = Cauchy::new(0.0, *scale).expect("validated scale");
                    for _ in 0..d {
                        values.push(c.sample(&mut other));
                    }
                }
            }
        }
    }
    let mut m = SampleMatrix::from_flat(n, d, values, seed, DistributionTag::Containment { spec: spec.clone() });
    m.inner_mask = Some(mask);
    Ok(m)
}

/// Number of fractional binary digits kept for a quantisation radius `delta`:
/// the smallest `b` with `2^-b <= delta`.
pub fn quantization_bits(delta: f64) -> Result<u32, ParamError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ParamError::new("delta", format!("{delta} is not in (0, 1)")));
    }
    let mut b = 0u32;
    let mut step = 1.0f64;
    while step > delta {
        step *= 0.5;
        b += 1;
    }
    Ok(b)
}

/// Truncates every entry toward zero at `b = quantization_bits(delta)` binary
/// places; each entry moves by strictly less than `2^-b <= delta`.
pub fn quantize(m: &SampleMatrix, delta: f64) -> Result<SampleMatrix> {
    let b = quantization_bits(delta)?;
    let scale = (b as f64).exp2();
    let values = m.values.iter().map(|x| (x * scale).trunc() / scale).collect();
    let mut q = SampleMatrix::from_flat(
        m.n,
        m.d,
        values,
        m.seed,
        DistributionTag::Quantized {
            source: Box::new(m.tag.clone()),
            delta,
        },
    );
    q.inner_mask = m.inner_mask.clone();
    Ok(q)
}

const MAGIC: &[u8; 8] = b"RSSMAT01";

/// Binary layout, all integers little-endian:
///
/// ```text
/// magic "RSSMAT01" | n: u64 | d: u64 | seed: u64 | tag_len: u32 | tag (JSON, UTF-8)
/// | n*d f64 row-major
/// ```
pub fn write_binary<W: Write>(m: &SampleMatrix, mut w: W) -> Result<()> {
    let tag = serde_json::to_vec(&m.tag)?;
    w.write_all(MAGIC)?;
    w.write_all(&(m.n as u64).to_le_bytes())?;
    w.write_all(&(m.d as u64).to_le_bytes())?;
    w.write_all(&m.seed.to_le_bytes())?;
    w.write_all(&(tag.len() as u32).to_le_bytes())?;
    w.write_all(&tag)?;
    for v in &m.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<SampleMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an RSSMAT01 file".into()));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let n = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let mut lenbuf = [0u8; 4];
    r.read_exact(&mut lenbuf)?;
    let mut tag = vec![0u8; u32::from_le_bytes(lenbuf) as usize];
    r.read_exact(&mut tag)?;
    let tag: DistributionTag = serde_json::from_slice(&tag)?;
    if n == 0 || d == 0 {
        return Err(Error::Format(format!("empty shape {n}x{d}")));
    }
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let mut values = Vec::with_capacity(count);
    let mut fbuf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut fbuf)?;
        values.push(f64::from_le_bytes(fbuf));
    }
    Ok(SampleMatrix::from_flat(n, d, values, seed, tag))
}

/// CSV with a `x0,x1,...` header and one row per sample vector.
pub fn write_csv<W: Write>(m: &SampleMatrix, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record((0..m.d).map(|j| format!("x{j}")))?;
    for row in m.rows() {
        wr.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the CSV form. Provenance is not stored in CSV, so the result is
/// tagged [`DistributionTag::Imported`] with seed 0.
pub fn read_csv<R: Read>(r: R) -> Result<SampleMatrix> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    SampleMatrix::from_rows(&rows, 0, DistributionTag::Imported)
}
