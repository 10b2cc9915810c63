//! Named initial laws for populations and model states.

use rand_distr::{Distribution, Normal};

use rand::Rng;

use crate::counterexample::{sample_exchangeable_mixture, ExchangeableMixtureSpec};
use crate::error::{Error, Result};
use crate::ipm::grid::MarginalDensityGrid;
use crate::population::{Individual, Population};
use crate::rng::RandomStream;

/// Initial law of the population at generation zero.
///
/// `Gaussian` and `Uniform` fill the population with i.i.d. individuals;
/// `Mixture` draws one latent component per population and is exchangeable
/// but not independent (unless it collapses to a single component).
#[derive(Debug, Clone, PartialEq)]
pub enum InitLaw {
    Gaussian { mean: Vec<f64>, sd: f64 },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    Mixture(ExchangeableMixtureSpec),
}

impl InitLaw {
    pub fn gaussian(mean: Vec<f64>, sd: f64) -> Result<Self> {
        if mean.is_empty() || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("invalid gaussian mean".into()));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sd must be positive, got {sd}"
            )));
        }
        Ok(InitLaw::Gaussian { mean, sd })
    }

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidArgument(
                "uniform bounds must be nonempty and of equal length".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidArgument(format!(
                    "uniform bounds must satisfy lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(InitLaw::Uniform { lo, hi })
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitLaw::Gaussian { .. } => "gaussian",
            InitLaw::Uniform { .. } => "uniform",
            InitLaw::Mixture(_) => "mixture",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitLaw::Gaussian { mean, .. } => mean.len(),
            InitLaw::Uniform { lo, .. } => lo.len(),
            InitLaw::Mixture(_) => 1,
        }
    }

    /// Are the individuals of a sampled population i.i.d.?
    pub fn is_iid(&self) -> bool {
        match self {
            InitLaw::Gaussian { .. } | InitLaw::Uniform { .. } => true,
            InitLaw::Mixture(spec) => spec.is_effectively_iid(),
        }
    }

    /// Draws one individual from the single-slot marginal law.
    fn sample_individual(&self, rng: &mut impl Rng) -> Individual {
        match self {
            InitLaw::Gaussian { mean, sd } => {
                let normal = Normal::new(0.0, *sd).expect("validated sd");
                Individual::new(mean.iter().map(|m| m + normal.sample(rng)).collect())
                    .expect("finite gaussian draw")
            }
            InitLaw::Uniform { lo, hi } => Individual::new(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| rng.random_range(l..h))
                    .collect(),
            )
            .expect("finite uniform draw"),
            InitLaw::Mixture(_) => unreachable!("mixtures sample whole populations"),
        }
    }

    /// Draws a generation-zero population of size `n`.
    pub fn sample_population(&self, n: usize, stream: &RandomStream) -> Result<Population> {
        if n == 0 {
            return Err(Error::InvalidArgument("population size must be >= 1".into()));
        }
        match self {
            InitLaw::Mixture(spec) => {
                let sized = ExchangeableMixtureSpec {
                    n,
                    ..spec.clone()
                };
                sample_exchangeable_mixture(&sized, stream)
            }
            _ => {
                let mut rng = stream.rng();
                let individuals = (0..n).map(|_| self.sample_individual(&mut rng)).collect();
                Population::new(individuals, 0)
            }
        }
    }

    /// Single-slot marginal density at a scalar point (1-D laws only).
    pub fn marginal_density1(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: self.dim(),
            });
        }
        Ok(match self {
            InitLaw::Gaussian { mean, sd } => {
                let z = (x - mean[0]) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            InitLaw::Uniform { lo, hi } => {
                if x >= lo[0] && x <= hi[0] {
                    1.0 / (hi[0] - lo[0])
                } else {
                    0.0
                }
            }
            InitLaw::Mixture(spec) => spec.marginal_density(x),
        })
    }

    /// The marginal law projected onto a density grid.
    pub fn marginal_grid(&self, lo: f64, hi: f64, bins: usize) -> Result<MarginalDensityGrid> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: self.dim(),
            });
        }
        MarginalDensityGrid::from_fn(lo, hi, bins, |x| {
            self.marginal_density1(x).expect("dimension checked")
        })
    }
}
