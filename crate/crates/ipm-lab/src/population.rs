//! Individuals and ordered populations.

use crate::error::{Error, Result};

/// A point in the solution space `R^d`. Coordinates are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    coords: Vec<f64>,
}

impl Individual {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument(
                "individual must have at least one coordinate".into(),
            ));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::numerical(
                "Individual::new",
                format!("non-finite coordinate {bad}"),
            ));
        }
        Ok(Individual { coords })
    }

    /// One-dimensional individual. Panics on non-finite input; the scalar
    /// constructor is only used with values we already control.
    pub fn scalar(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite coordinate {x}");
        Individual { coords: vec![x] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The single coordinate of a 1-D individual.
    pub fn as_scalar(&self) -> f64 {
        debug_assert_eq!(self.coords.len(), 1);
        self.coords[0]
    }
}

/// An ordered array of individuals at a given generation. Index `i`
/// identifies the i-th individual; order is significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    individuals: Vec<Individual>,
    generation: u32,
}

impl Population {
    pub fn new(individuals: Vec<Individual>, generation: u32) -> Result<Self> {
        if individuals.is_empty() {
            return Err(Error::InvalidArgument("population must be nonempty".into()));
        }
        let dim = individuals[0].dim();
        if let Some(other) = individuals.iter().find(|ind| ind.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: other.dim(),
            });
        }
        Ok(Population {
            individuals,
            generation,
        })
    }

    /// 1-D population from raw scalars.
    pub fn from_scalars(values: &[f64], generation: u32) -> Result<Self> {
        let individuals = values
            .iter()
            .map(|&v| Individual::new(vec![v]))
            .collect::<Result<Vec<_>>>()?;
        Population::new(individuals, generation)
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn size(&self) -> usize {
        self.individuals.len()
    }

    pub fn dim(&self) -> usize {
        self.individuals[0].dim()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Same individuals, re-labelled generation.
    pub fn with_generation(&self, generation: u32) -> Self {
        Population {
            individuals: self.individuals.clone(),
            generation,
        }
    }

    /// First `m` individuals, same generation index.
    pub fn project(&self, m: usize) -> Result<Population> {
        if m == 0 || m > self.size() {
            return Err(Error::InvalidArgument(format!(
                "projection size {m} outside 1..={}",
                self.size()
            )));
        }
        Ok(Population {
            individuals: self.individuals[..m].to_vec(),
            generation: self.generation,
        })
    }

    /// Coordinates of a 1-D population.
    pub fn scalars(&self) -> Vec<f64> {
        debug_assert_eq!(self.dim(), 1);
        self.individuals.iter().map(|ind| ind.as_scalar()).collect()
    }
}
