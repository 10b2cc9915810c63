//! Particle-pool representation of the infinite-population marginal law.
//!
//! The pool holds i.i.d. samples of the marginal; one model step generates
//! every output particle independently from the input pool, so outputs are
//! i.i.d. given the pool. That reading is exact when the supplied pool is
//! itself i.i.d.; the step is defined for any pool, but its model meaning
//! only holds for i.i.d. pools.

use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::ops::{combine_offspring, OperatorDescriptor};
use crate::population::Individual;
use crate::rng::RandomStream;

/// Default floor on pool sizes used for diagnostics; configs validate
/// against it so model noise stays well below finite-population effects.
pub const DEFAULT_PARTICLE_FLOOR: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Vec<Individual>,
    generation: u32,
}

impl ParticleEnsemble {
    pub fn new(particles: Vec<Individual>, generation: u32) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument("empty particle pool".into()));
        }
        let dim = particles[0].dim();
        if particles.iter().any(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: particles.iter().map(|p| p.dim()).find(|&d| d != dim).unwrap(),
            });
        }
        Ok(ParticleEnsemble {
            particles,
            generation,
        })
    }

    pub fn from_scalars(values: &[f64], generation: u32) -> Result<Self> {
        let particles = values
            .iter()
            .map(|&v| Individual::new(vec![v]))
            .collect::<Result<Vec<_>>>()?;
        ParticleEnsemble::new(particles, generation)
    }

    pub fn particles(&self) -> &[Individual] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn with_generation(mut self, generation: u32) -> Self {
        self.generation = generation;
        self
    }

    /// Coordinates of a 1-D pool.
    pub fn scalars(&self) -> Vec<f64> {
        debug_assert_eq!(self.dim(), 1);
        self.particles.iter().map(|p| p.as_scalar()).collect()
    }
}

/// One infinite-population step in particle form. Every output particle is
/// generated independently (slot `i` from `stream.derive(i)`):
///
/// * mutation — perturb a freshly resampled particle from the pool;
/// * recombination — draw `k` parents uniformly from the pool and combine;
/// * selection — resample one particle with self-normalized fitness weights,
///   the finite-pool surrogate of exact reweighting.
///
/// The generation index advances by one.
pub fn particle_ipm_step(
    ens: &ParticleEnsemble,
    op: &OperatorDescriptor,
    obj: &Objective,
    stream: &RandomStream,
) -> Result<ParticleEnsemble> {
    let pool = ens.particles();
    let count = pool.len();
    let particles: Vec<Individual> = match op {
        OperatorDescriptor::Mutation(kernel) => (0..count)
            .map(|i| {
                let mut rng = stream.derive(i as u64).rng();
                let parent = &pool[rng.random_range(0..count)];
                let coords = kernel.sample(parent.coords(), &mut rng);
                Individual::new(coords).map_err(|_| {
                    Error::numerical(
                        "particle_ipm_step",
                        format!("kernel produced non-finite coordinates at slot {i}"),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?,
        OperatorDescriptor::Recombination(law) => (0..count)
            .map(|i| {
                let slot = stream.derive(i as u64);
                let mut rng = slot.derive(0).rng();
                let parents: Vec<Individual> = (0..law.arity())
                    .map(|_| pool[rng.random_range(0..count)].clone())
                    .collect();
                combine_offspring(&parents, law, &slot.derive(1))
            })
            .collect::<Result<Vec<_>>>()?,
        OperatorDescriptor::Selection => {
            let mut cumulative = Vec::with_capacity(count);
            let mut acc = 0.0f64;
            for p in pool {
                if !obj.domain().contains(p.coords()) {
                    return Err(Error::OutOfDomain {
                        index: cumulative.len(),
                        point: p.coords().to_vec(),
                    });
                }
                acc += obj.eval(p.coords());
                cumulative.push(acc);
            }
            if !(acc.is_finite() && acc > 1e-300) {
                return Err(Error::numerical(
                    "particle_ipm_step",
                    format!("total fitness weight {acc} is degenerate"),
                ));
            }
            (0..count)
                .map(|i| {
                    let mut rng = stream.derive(i as u64).rng();
                    let u: f64 = rng.random::<f64>() * acc;
                    let index = cumulative.partition_point(|&c| c <= u).min(count - 1);
                    pool[index].clone()
                })
                .collect()
        }
    };
    ParticleEnsemble::new(particles, ens.generation() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MutationKernel;
    use crate::objective::{DomainBox, ObjectiveKind};
    use crate::ops::RecombinationLaw;
    use crate::stats::{ks_statistic, mean, variance};
    use rand_distr::Distribution;

    fn normal_pool(n: usize, seed: u64) -> ParticleEnsemble {
        let mut rng = RandomStream::from_seed(seed).rng();
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        ParticleEnsemble::from_scalars(&values, 0).unwrap()
    }

    fn constant_objective() -> Objective {
        Objective::new(
            ObjectiveKind::Constant { value: 1.0 },
            1.0,
            1.0,
            DomainBox::interval(-20.0, 20.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_mutation_is_a_bootstrap_resample() {
        let ens = normal_pool(10_000, 1);
        let out = particle_ipm_step(
            &ens,
            &OperatorDescriptor::Mutation(MutationKernel::ZeroNoise),
            &constant_objective(),
            &RandomStream::from_seed(2),
        )
        .unwrap();
        let ks = ks_statistic(&ens.scalars(), &out.scalars());
        assert!(ks < 0.02, "ks = {ks}");
        assert_eq!(out.generation(), 1);
    }

    #[test]
    fn mean_crossover_halves_the_variance_of_a_standard_normal_pool() {
        let ens = normal_pool(100_000, 3);
        let out = particle_ipm_step(
            &ens,
            &OperatorDescriptor::Recombination(RecombinationLaw::Mean),
            &constant_objective(),
            &RandomStream::from_seed(4),
        )
        .unwrap();
        let var = variance(&out.scalars());
        assert!((var - 0.5).abs() / 0.5 < 0.03, "var = {var}");
    }

    #[test]
    fn constant_fitness_selection_preserves_moments() {
        let ens = normal_pool(100_000, 5);
        let out = particle_ipm_step(
            &ens,
            &OperatorDescriptor::Selection,
            &constant_objective(),
            &RandomStream::from_seed(6),
        )
        .unwrap();
        let m_in = mean(&ens.scalars());
        let m_out = mean(&out.scalars());
        let v_in = variance(&ens.scalars());
        let v_out = variance(&out.scalars());
        assert!((m_in - m_out).abs() < 0.02, "means {m_in} vs {m_out}");
        assert!((v_in - v_out).abs() / v_in < 0.02, "vars {v_in} vs {v_out}");
    }

    /// Outputs are i.i.d. by construction; adjacent slots must stay
    /// uncorrelated. Regression guard against accidental state sharing.
    #[test]
    fn output_slots_are_pairwise_uncorrelated() {
        let ens = normal_pool(100_000, 7);
        let out = particle_ipm_step(
            &ens,
            &OperatorDescriptor::Mutation(MutationKernel::gaussian(0.5).unwrap()),
            &constant_objective(),
            &RandomStream::from_seed(8),
        )
        .unwrap();
        let values = out.scalars();
        let even: Vec<f64> = values.iter().step_by(2).copied().collect();
        let odd: Vec<f64> = values.iter().skip(1).step_by(2).copied().collect();
        let r = crate::stats::pearson_correlation(&even, &odd).unwrap();
        assert!(r.abs() < 0.02, "r = {r}");
    }
}
