//! k-ary recombination: offspring are linear images `sum_i U_i y_i` of `k`
//! parents drawn uniformly with replacement, with random coefficient
//! matrices `(U_1..U_k)` drawn fresh and independently for every offspring.

use rand::Rng;

use crate::error::{Error, Result};
use crate::population::{Individual, Population};
use crate::rng::{RandomStream, StreamRng};

/// Dense row-major `d x d` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl CoeffMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(
                "coefficient matrix must be square and nonempty".into(),
            ));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "coefficient matrix has non-finite entries".into(),
            ));
        }
        Ok(CoeffMatrix { dim, data })
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        CoeffMatrix { dim, data }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &e) in entries.iter().enumerate() {
            data[i * dim + i] = e;
        }
        CoeffMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                self.data[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }
}

/// Law of the random coefficient matrices `(U_1..U_k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RecombinationLaw {
    /// Arity 2, `U_1 = U_2 = I/2` deterministically: offspring is the mean
    /// of its two parents.
    Mean,
    /// Arity 2, `U_1 = Diag(s_1..s_d)` with i.i.d. fair Bernoulli
    /// `s_j in {0,1}` and `U_2 = I - U_1`: each coordinate is copied from
    /// one of the two parents with probability 1/2.
    Uniform,
    /// Fixed matrices supplied by configuration; arity is the list length.
    Deterministic { matrices: Vec<CoeffMatrix> },
}

impl RecombinationLaw {
    pub fn deterministic(matrices: Vec<CoeffMatrix>) -> Result<Self> {
        if matrices.len() < 2 {
            return Err(Error::InvalidArgument(
                "recombination arity must be at least 2".into(),
            ));
        }
        let dim = matrices[0].dim();
        if matrices.iter().any(|m| m.dim() != dim) {
            return Err(Error::InvalidArgument(
                "coefficient matrices must share one dimension".into(),
            ));
        }
        Ok(RecombinationLaw::Deterministic { matrices })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RecombinationLaw::Mean => "mean",
            RecombinationLaw::Uniform => "uniform",
            RecombinationLaw::Deterministic { .. } => "deterministic",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            RecombinationLaw::Mean | RecombinationLaw::Uniform => 2,
            RecombinationLaw::Deterministic { matrices } => matrices.len(),
        }
    }

    /// Draws one tuple `(U_1..U_k)` in dimension `dim`.
    pub fn sample_coefficients(&self, dim: usize, rng: &mut StreamRng) -> Result<Vec<CoeffMatrix>> {
        match self {
            RecombinationLaw::Mean => Ok(vec![
                CoeffMatrix::scaled_identity(dim, 0.5),
                CoeffMatrix::scaled_identity(dim, 0.5),
            ]),
            RecombinationLaw::Uniform => {
                let mask: Vec<f64> = (0..dim)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
                    .collect();
                let complement: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
                Ok(vec![
                    CoeffMatrix::diagonal(&mask),
                    CoeffMatrix::diagonal(&complement),
                ])
            }
            RecombinationLaw::Deterministic { matrices } => {
                if matrices[0].dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: matrices[0].dim(),
                    });
                }
                Ok(matrices.clone())
            }
        }
    }
}

/// Draws `count` groups of `k` parent indices, each uniform on the
/// population with replacement, and returns the `count * k` parents in
/// group order. Group `j` draws from `stream.derive(j)`.
pub fn sample_parents(
    pop: &Population,
    k: usize,
    count: usize,
    stream: &RandomStream,
) -> Vec<Individual> {
    let n = pop.size();
    let mut parents = Vec::with_capacity(count * k);
    for group in 0..count {
        let mut rng = stream.derive(group as u64).rng();
        for _ in 0..k {
            let index = rng.random_range(0..n);
            parents.push(pop.individuals()[index].clone());
        }
    }
    parents
}

/// Combines `law.arity()` parents into one offspring: samples `(U_1..U_k)`
/// once and returns `sum_i U_i y_i`.
pub fn combine_offspring(
    parents: &[Individual],
    law: &RecombinationLaw,
    stream: &RandomStream,
) -> Result<Individual> {
    if parents.len() != law.arity() {
        return Err(Error::InvalidArgument(format!(
            "expected {} parents, got {}",
            law.arity(),
            parents.len()
        )));
    }
    let dim = parents[0].dim();
    if parents.iter().any(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: parents.iter().map(|p| p.dim()).find(|&d| d != dim).unwrap(),
        });
    }
    let mut rng = stream.rng();
    let coefficients = law.sample_coefficients(dim, &mut rng)?;
    let mut coords = vec![0.0; dim];
    for (matrix, parent) in coefficients.iter().zip(parents) {
        for (acc, term) in coords.iter_mut().zip(matrix.mul_vec(parent.coords())) {
            *acc += term;
        }
    }
    Individual::new(coords)
}

/// Produces `pop.size()` offspring, each by an independent parent draw plus
/// combination; the generation index advances by one.
pub fn recombine(
    pop: &Population,
    law: &RecombinationLaw,
    stream: &RandomStream,
) -> Result<Population> {
    let individuals = recombine_individuals(pop, law, stream)?;
    Population::new(individuals, pop.generation() + 1)
}

pub(crate) fn recombine_individuals(
    pop: &Population,
    law: &RecombinationLaw,
    stream: &RandomStream,
) -> Result<Vec<Individual>> {
    (0..pop.size())
        .map(|slot| {
            let slot_stream = stream.derive(slot as u64);
            let parents = sample_parents(pop, law.arity(), 1, &slot_stream.derive(0));
            combine_offspring(&parents, law, &slot_stream.derive(1))
        })
        .collect()
}

/// Probability that `k * i` parents drawn uniformly with replacement from a
/// pool of `m` are pairwise distinct:
/// `m (m-1) ... (m - k*i + 1) / m^(k*i)`, and 0 once `k * i > m`.
pub fn distinct_parent_probability(m: u64, k: u64, i: u64) -> f64 {
    assert!(m >= 1 && k * i >= 1);
    let draws = k * i;
    if draws > m {
        return 0.0;
    }
    let mut p = 1.0f64;
    for j in 0..draws {
        p *= (m - j) as f64 / m as f64;
    }
    p
}
