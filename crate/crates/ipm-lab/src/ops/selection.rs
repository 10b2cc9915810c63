//! Proportionate (fitness-proportional) selection.

use crate::error::{Error, Result};
use crate::objective::{evaluate_fitness, Objective};
use crate::population::{Individual, Population};
use crate::rng::RandomStream;

use rand::Rng;

/// Selection probabilities `g(x_j) / sum_l g(x_l)`, in population order.
pub fn selection_distribution(pop: &Population, obj: &Objective) -> Result<Vec<f64>> {
    let fitness = evaluate_fitness(pop, obj)?;
    normalize(&fitness)
}

fn normalize(fitness: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = fitness.iter().sum();
    if !(total.is_finite() && total > 1e-300) {
        return Err(Error::numerical(
            "selection_distribution",
            format!("total fitness {total} is degenerate"),
        ));
    }
    Ok(fitness.iter().map(|g| g / total).collect())
}

/// Draws `pop.size()` individuals conditionally i.i.d. with probabilities
/// proportional to fitness. The generation index is unchanged: this is the
/// intermediate population of a generation step.
///
/// Sampling is inverse-CDF on the cumulative fitness vector with a tie-free
/// comparison (first cumulative value strictly above the uniform draw), so
/// results are reproducible across platforms. Fitness is evaluated once and
/// reused for every slot.
pub fn proportionate_selection(
    pop: &Population,
    obj: &Objective,
    stream: &RandomStream,
) -> Result<Population> {
    let individuals = select_individuals(pop, obj, stream)?;
    Population::new(individuals, pop.generation())
}

pub(crate) fn select_individuals(
    pop: &Population,
    obj: &Objective,
    stream: &RandomStream,
) -> Result<Vec<Individual>> {
    let fitness = evaluate_fitness(pop, obj)?;
    let mut cumulative = Vec::with_capacity(fitness.len());
    let mut acc = 0.0f64;
    for g in &fitness {
        acc += g;
        cumulative.push(acc);
    }
    let total = acc;
    if !(total.is_finite() && total > 1e-300) {
        return Err(Error::numerical(
            "proportionate_selection",
            format!("total fitness {total} is degenerate"),
        ));
    }
    Ok((0..pop.size())
        .map(|slot| {
            let mut rng = stream.derive(slot as u64).rng();
            let u: f64 = rng.random::<f64>() * total;
            let index = cumulative.partition_point(|&c| c <= u).min(pop.size() - 1);
            pop.individuals()[index].clone()
        })
        .collect())
}
