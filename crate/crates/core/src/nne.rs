//! Random gene tensors and the networks they assemble.
//!
//! A gene bank holds `n` Gaussian tensors of shape `ℓ × d × d`; a genotype
//! `x ∈ {0,1}^n` selects genes, and the network weights are the entrywise
//! sum of the selected tensors. Approximating a target network's tensor
//! entrywise is then a subset-sum problem in dimension `D = ℓ·d·d`: each
//! gene, flattened row-major over `(layer, row, column)`, is one row of the
//! sample matrix.

use serde::{Deserialize, Serialize};

use crate::bounds::required_n_main;
use crate::error::{Error, ParamError, Result};
use crate::sampler::{sample_standard_normal, SampleMatrix};
use crate::search::{search, Engine, SearchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetTensor {
    l: usize,
    d: usize,
    /// Row-major over `(layer, row, column)`.
    entries: Vec<f64>,
}

impl NetTensor {
    pub fn new(l: usize, d: usize, entries: Vec<f64>) -> Result<Self, ParamError> {
        if l == 0 || d == 0 {
            return Err(ParamError::new("shape", "l and d must be at least 1"));
        }
        if entries.len() != l * d * d {
            return Err(ParamError::new(
                "entries",
                format!(
                    "expected {} entries for shape {l}x{d}x{d}, got {}",
                    l * d * d,
                    entries.len()
                ),
            ));
        }
        Ok(Self { l, d, entries })
    }

    pub fn zeros(l: usize, d: usize) -> Result<Self, ParamError> {
        Self::new(l, d, vec![0.0; l * d * d])
    }

    /// Stacks `ℓ` square weight matrices given row by row.
    pub fn from_layers(layers: &[Vec<Vec<f64>>]) -> Result<Self, ParamError> {
        let l = layers.len();
        let d = layers.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(l * d * d);
        for w in layers {
            if w.len() != d || w.iter().any(|r| r.len() != d) {
                return Err(ParamError::new("layers", "every layer must be a d x d matrix"));
            }
            for r in w {
                entries.extend_from_slice(r);
            }
        }
        Self::new(l, d, entries)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, layer: usize, row: usize, col: usize) -> f64 {
        self.entries[(layer * self.d + row) * self.d + col]
    }

    /// Weight matrix of layer `m`, row-major.
    pub fn layer(&self, m: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.entries[m * dd..(m + 1) * dd]
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest entrywise difference.
    pub fn max_entry_error(&self, other: &NetTensor) -> Result<f64> {
        self.check_shape(other)?;
        Ok(crate::params::linf_unchecked(&self.entries, &other.entries))
    }

    fn check_shape(&self, other: &NetTensor) -> Result<()> {
        if (self.l, self.d) != (other.l, other.d) {
            return Err(ParamError::new("tensor", "shapes differ").into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneBank {
    n: usize,
    l: usize,
    d: usize,
    seed: u64,
    /// One flattened gene per row.
    genes: SampleMatrix,
}

impl GeneBank {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The flattened bank as an `n × ℓd²` sample matrix.
    pub fn as_matrix(&self) -> &SampleMatrix {
        &self.genes
    }

    pub fn gene(&self, i: usize) -> NetTensor {
        NetTensor {
            l: self.l,
            d: self.d,
            entries: self.genes.row(i).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genotype {
    pub bits: Vec<bool>,
}

impl Genotype {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_indices(n: usize, active: &[usize]) -> Result<Self, ParamError> {
        let mut bits = vec![false; n];
        for &i in active {
            *bits
                .get_mut(i)
                .ok_or_else(|| ParamError::new("genotype", format!("index {i} out of range")))? = true;
        }
        Ok(Self { bits })
    }

    pub fn active(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `n` genes with i.i.d. `N(0, 1)` entries. Gene `i` is row `i` of
/// `sample_standard_normal(n, ℓd², seed)`.
pub fn sample_genes(n: usize, l: usize, d: usize, seed: u64) -> Result<GeneBank> {
    if n == 0 || l == 0 || d == 0 {
        return Err(ParamError::new("shape", "n, l and d must be at least 1").into());
    }
    Ok(GeneBank {
        n,
        l,
        d,
        seed,
        genes: sample_standard_normal(n, l * d * d, seed)?,
    })
}

/// Entrywise sum of the active genes, accumulated in index order.
pub fn genotype_tensor(bank: &GeneBank, x: &Genotype) -> Result<NetTensor> {
    if x.bits.len() != bank.n {
        return Err(Error::DimensionMismatch {
            expected: bank.n,
            actual: x.bits.len(),
        });
    }
    Ok(NetTensor {
        l: bank.l,
        d: bank.d,
        entries: bank.genes.subset_sum(&x.active()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenotypeSearch {
    /// Some genotype approximates the target within `2ε` in every entry.
    pub found: bool,
    /// The approximating genotype, or the best one seen.
    pub genotype: Genotype,
    pub max_entry_error: f64,
    /// Whether every target entry lies in `(-1, 1)`, the range the
    /// universality statement covers. Searches run either way.
    pub target_in_range: bool,
    pub search: SearchResult,
}

/// Flattens bank and target and runs the engine with tolerance `2ε`.
pub fn find_genotype(bank: &GeneBank, target: &NetTensor, epsilon: f64, engine: Engine) -> Result<GenotypeSearch> {
    if (target.l, target.d) != (bank.l, bank.d) {
        return Err(ParamError::new("target", "shape differs from the gene bank").into());
    }
    let r = search(engine, &bank.genes, &target.entries, 2.0 * epsilon, None)?;
    Ok(GenotypeSearch {
        found: r.found,
        genotype: Genotype::from_indices(bank.n, &r.subset)?,
        max_entry_error: r.error,
        target_in_range: target.max_abs_entry() < 1.0,
        search: r,
    })
}

/// Genes needed for universality at width `d` and depth `ℓ`: the main
/// sample-size requirement at dimension `D = ℓ·d·d`.
pub fn required_genes(l: usize, d: usize, epsilon: f64, c_const: f64) -> u64 {
    required_n_main(l * d * d, epsilon, c_const).n
}

fn matvec(w: &[f64], d: usize, y: &[f64]) -> Vec<f64> {
    (0..d).map(|r| (0..d).map(|c| w[r * d + c] * y[c]).sum()).collect()
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// `W_ℓ σ(W_{ℓ−1} … σ(W_1 y))` with ReLU `σ` between layers only.
pub fn forward(net: &NetTensor, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != net.d {
        return Err(Error::DimensionMismatch {
            expected: net.d,
            actual: y.len(),
        });
    }
    let mut h = y.to_vec();
    for m in 0..net.l {
        h = matvec(net.layer(m), net.d, &h);
        if m + 1 < net.l {
            relu(&mut h);
        }
    }
    Ok(h)
}

/// Upper bound on `‖f(y) − g(y)‖∞` for target `f` and approximation `g`.
///
/// With `h_m` the target's activations, `E_m = W_m − W'_m` and `e_m` the
/// bound after `m` layers, `e_{m+1} = ‖E_m‖·‖h_m‖∞ + ‖W'_m‖·e_m`, where `‖·‖`
/// is the ∞-operator norm (largest absolute row sum). ReLU is 1-Lipschitz,
/// so it does not enlarge the bound.
pub fn output_deviation_bound(target: &NetTensor, approx: &NetTensor, y: &[f64]) -> Result<f64> {
    target.check_shape(approx)?;
    if y.len() != target.d {
        return Err(Error::DimensionMismatch {
            expected: target.d,
            actual: y.len(),
        });
    }
    let d = target.d;
    let op_norm = |w: &[f64]| {
        (0..d)
            .map(|r| w[r * d..(r + 1) * d].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut h = y.to_vec();
    let mut e = 0.0;
    for m in 0..target.l {
        let w = target.layer(m);
        let wa = approx.layer(m);
        let diff: Vec<f64> = w.iter().zip(wa).map(|(a, b)| a - b).collect();
        let h_norm = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        e = op_norm(&diff) * h_norm + op_norm(wa) * e;
        h = matvec(w, d, &h);
        if m + 1 < target.l {
            relu(&mut h);
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::TheoremConstants;

    #[test]
    fn bank_moments_and_determinism() {
        let b = sample_genes(10_000, 2, 5, 1).unwrap();
        let v = b.as_matrix().values();
        assert_eq!(v.len(), 500_000);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt());
        // Var of the sample variance of a standard normal is 2/n.
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert_eq!(b, sample_genes(10_000, 2, 5, 1).unwrap());
    }

    #[test]
    fn flatten_round_trip() {
        let b = sample_genes(3, 2, 3, 4).unwrap();
        let g = b.gene(1);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(g.get(i, j, k), b.as_matrix().row(1)[(i * 3 + j) * 3 + k]);
                }
            }
        }
        let layers: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|i| (0..3).map(|j| (0..3).map(|k| g.get(i, j, k)).collect()).collect())
            .collect();
        assert_eq!(NetTensor::from_layers(&layers).unwrap(), g);
    }

    #[test]
    fn genotype_sums() {
        let b = sample_genes(6, 1, 2, 2).unwrap();
        assert_eq!(
            genotype_tensor(&b, &Genotype::zeros(6)).unwrap(),
            NetTensor::zeros(1, 2).unwrap()
        );
        let e3 = Genotype::from_indices(6, &[3]).unwrap();
        assert_eq!(genotype_tensor(&b, &e3).unwrap(), b.gene(3));
        let x = Genotype::from_indices(6, &[0, 2, 5]).unwrap();
        let t = genotype_tensor(&b, &x).unwrap();
        assert_eq!(t.entries(), b.as_matrix().subset_sum(&[0, 2, 5]).as_slice());
        assert!(genotype_tensor(&b, &Genotype::zeros(5)).is_err());
    }

    #[test]
    fn exact_member_and_zero_targets() {
        let b = sample_genes(12, 1, 2, 3).unwrap();
        let r = find_genotype(&b, &b.gene(0), 0.01, Engine::MeetInMiddle).unwrap();
        assert!(r.found);
        assert_eq!(r.max_entry_error, 0.0);
        assert_eq!(r.genotype.active(), vec![0]);
        let z = find_genotype(&b, &NetTensor::zeros(1, 2).unwrap(), 0.01, Engine::Exhaustive).unwrap();
        assert!(z.found && z.genotype.active().is_empty());
        assert_eq!(z.max_entry_error, 0.0);
        assert!(z.target_in_range);
    }

    #[test]
    fn search_error_is_recomputed_error() {
        for seed in 0..20 {
            let b = sample_genes(16, 1, 2, seed).unwrap();
            let target = NetTensor::new(1, 2, vec![0.5, -0.3, 0.1, 0.8]).unwrap();
            let r = find_genotype(&b, &target, 0.3, Engine::MeetInMiddle).unwrap();
            let t = genotype_tensor(&b, &r.genotype).unwrap();
            assert_eq!(t.max_entry_error(&target).unwrap(), r.max_entry_error);
            if r.found {
                assert!(r.max_entry_error <= 0.6);
            }
        }
    }

    #[test]
    fn required_genes_scaling() {
        let c = TheoremConstants::default().sample;
        assert_eq!(required_genes(1, 1, 0.1, c), required_n_main(1, 0.1, c).n);
        // D = 2 → 4 doubles D; the leading factor grows eightfold.
        let a = required_n_main(2, 0.1, c).leading_factor;
        let b = required_n_main(4, 0.1, c).leading_factor;
        assert!((b / a - 8.0).abs() < 1e-12);
        for (l, d) in [(1, 1), (1, 2), (2, 2), (3, 3)] {
            for eps in [0.5, 0.1, 1e-3] {
                let dim = (l * d * d) as f64;
                assert!(required_genes(l, d, eps, c) as f64 >= dim * (1.0 / eps).log2());
            }
        }
    }

    #[test]
    fn forward_examples() {
        let id1 = NetTensor::from_layers(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        assert_eq!(forward(&id1, &[0.5, -2.0]).unwrap(), vec![0.5, -2.0]);
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let id2 = NetTensor::from_layers(&[eye.clone(), eye]).unwrap();
        assert_eq!(forward(&id2, &[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn relu_is_one_lipschitz() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (mut ru, mut rv) = (u.clone(), v.clone());
            relu(&mut ru);
            relu(&mut rv);
            assert!(crate::params::linf_unchecked(&ru, &rv) <= crate::params::linf_unchecked(&u, &v));
        }
    }

    #[test]
    fn deviation_bound_holds() {
        for seed in 0..30 {
            let b = sample_genes(14, 3, 2, seed).unwrap();
            let target = NetTensor::new(3, 2, b.gene(0).entries().iter().map(|v| v.tanh() * 0.9).collect()).unwrap();
            let r = find_genotype(&b, &target, 0.5, Engine::MeetInMiddle).unwrap();
            let approx = genotype_tensor(&b, &r.genotype).unwrap();
            for y in [[1.0, -0.5], [0.3, 0.7], [-1.0, -1.0]] {
                let f = forward(&target, &y).unwrap();
                let g = forward(&approx, &y).unwrap();
                let bound = output_deviation_bound(&target, &approx, &y).unwrap();
                assert!(crate::params::linf_unchecked(&f, &g) <= bound * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
