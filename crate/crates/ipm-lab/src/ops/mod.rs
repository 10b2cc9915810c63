//! Finite-population operators of the simple evolutionary algorithm:
//! proportionate selection, mutation and k-ary recombination, plus operator
//! stacking.
//!
//! Every operator generates the output individuals conditionally i.i.d.
//! given its input population, drawing slot `i` from the derived stream
//! `stream.derive(i)`; output laws are therefore permutation-equivariant and
//! independent of evaluation order.

mod recombination;
mod selection;

pub use recombination::{
    combine_offspring, distinct_parent_probability, recombine, sample_parents, CoeffMatrix,
    RecombinationLaw,
};
pub use selection::{proportionate_selection, selection_distribution};

use crate::error::{Error, Result};
use crate::kernel::MutationKernel;
use crate::objective::Objective;
use crate::population::{Individual, Population};
use crate::rng::RandomStream;

/// One step of an operator pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorDescriptor {
    /// Proportionate selection under the experiment objective.
    Selection,
    Mutation(MutationKernel),
    Recombination(RecombinationLaw),
}

impl OperatorDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorDescriptor::Selection => "selection",
            OperatorDescriptor::Mutation(_) => "mutation",
            OperatorDescriptor::Recombination(_) => "recombination",
        }
    }
}

/// A nonempty, ordered operator pipeline. One application of the whole stack
/// advances the generation index by one; intermediate populations keep the
/// pre-increment index.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorStack {
    ops: Vec<OperatorDescriptor>,
}

impl OperatorStack {
    pub fn new(ops: Vec<OperatorDescriptor>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidArgument("operator stack is empty".into()));
        }
        Ok(OperatorStack { ops })
    }

    /// The canonical simple-EA pipeline: selection then mutation.
    pub fn simple_ea(kernel: MutationKernel) -> Self {
        OperatorStack {
            ops: vec![
                OperatorDescriptor::Selection,
                OperatorDescriptor::Mutation(kernel),
            ],
        }
    }

    pub fn ops(&self) -> &[OperatorDescriptor] {
        &self.ops
    }

    pub fn has_recombination(&self) -> bool {
        self.ops
            .iter()
            .any(|op| matches!(op, OperatorDescriptor::Recombination(_)))
    }
}

/// Perturbs every individual with the kernel; slot `i` draws from
/// `stream.derive(i)`. Generation index advances by one.
pub fn mutate(pop: &Population, kernel: &MutationKernel, stream: &RandomStream) -> Result<Population> {
    let individuals = mutate_individuals(pop.individuals(), kernel, stream)?;
    Population::new(individuals, pop.generation() + 1)
}

pub(crate) fn mutate_individuals(
    individuals: &[Individual],
    kernel: &MutationKernel,
    stream: &RandomStream,
) -> Result<Vec<Individual>> {
    individuals
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            let mut rng = stream.derive(i as u64).rng();
            let coords = kernel.sample(ind.coords(), &mut rng);
            Individual::new(coords).map_err(|_| {
                Error::numerical(
                    "mutate",
                    format!("kernel produced non-finite coordinates at slot {i}"),
                )
            })
        })
        .collect()
}

/// One full simple-EA generation: proportionate selection, then mutation.
/// Equivalent to applying [`OperatorStack::simple_ea`] with the same stream.
pub fn simple_ea_step(
    pop: &Population,
    obj: &Objective,
    kernel: &MutationKernel,
    stream: &RandomStream,
) -> Result<Population> {
    apply_stack(pop, &OperatorStack::simple_ea(kernel.clone()), obj, stream)
}

/// Applies the stack descriptors left to right, deriving one child stream per
/// descriptor. The generation index advances by one per full application.
pub fn apply_stack(
    pop: &Population,
    stack: &OperatorStack,
    obj: &Objective,
    stream: &RandomStream,
) -> Result<Population> {
    let mut current: Vec<Individual> = pop.individuals().to_vec();
    for (index, op) in stack.ops().iter().enumerate() {
        let child = stream.derive(index as u64);
        current = match op {
            OperatorDescriptor::Selection => {
                let intermediate = Population::new(current, pop.generation())?;
                selection::select_individuals(&intermediate, obj, &child)?
            }
            OperatorDescriptor::Mutation(kernel) => {
                mutate_individuals(&current, kernel, &child)?
            }
            OperatorDescriptor::Recombination(law) => {
                let intermediate = Population::new(current, pop.generation())?;
                recombination::recombine_individuals(&intermediate, law, &child)?
            }
        };
    }
    Population::new(current, pop.generation() + 1)
}
