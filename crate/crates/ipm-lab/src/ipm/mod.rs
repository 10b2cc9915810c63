//! Infinite-population model engines.
//!
//! The model evolves the marginal law of a single individual under the
//! i.i.d. assumption. Two representations are available:
//!
//! * [`grid::MarginalDensityGrid`] — a 1-D midpoint-quadrature grid, exact
//!   enough for oracle comparisons, limited to selection and mutation;
//! * [`particle::ParticleEnsemble`] — an i.i.d. sample pool, valid in any
//!   dimension and for recombination, at Monte Carlo accuracy.

pub mod grid;
pub mod particle;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::ops::{OperatorDescriptor, OperatorStack};
use crate::rng::RandomStream;

use grid::MarginalDensityGrid;
use particle::ParticleEnsemble;

/// One infinite-population state, in either representation.
#[derive(Debug, Clone)]
pub enum IpmState {
    Grid(MarginalDensityGrid),
    Particles(ParticleEnsemble),
}

impl IpmState {
    pub fn generation(&self) -> u32 {
        match self {
            IpmState::Grid(g) => g.generation(),
            IpmState::Particles(p) => p.generation(),
        }
    }

    pub fn as_grid(&self) -> Option<&MarginalDensityGrid> {
        match self {
            IpmState::Grid(g) => Some(g),
            IpmState::Particles(_) => None,
        }
    }

    pub fn as_particles(&self) -> Option<&ParticleEnsemble> {
        match self {
            IpmState::Grid(_) => None,
            IpmState::Particles(p) => Some(p),
        }
    }
}

/// States `0..=steps` of the model, plus per-step boundary-leak mass for the
/// grid representation (empty for the particle representation).
#[derive(Debug, Clone)]
pub struct IpmTrajectory {
    pub states: Vec<IpmState>,
    pub step_leaks: Vec<f64>,
}

impl IpmTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &IpmState {
        &self.states[k]
    }
}

/// Checks that the representation can express every stack element. The grid
/// engine has no density form for recombination and refuses such stacks.
pub fn validate_stack_representation(initial: &IpmState, stack: &OperatorStack) -> Result<()> {
    if matches!(initial, IpmState::Grid(_)) && stack.has_recombination() {
        return Err(Error::InvalidArgument(
            "grid representation cannot express recombination; use particles".into(),
        ));
    }
    Ok(())
}

/// Iterates the model: `trajectory[0] = initial`, and `trajectory[k+1]` is
/// one full stack application to `trajectory[k]`. The generation index
/// advances by one per stack application. The stream is consumed only by the
/// particle representation (one derived stream per step and descriptor).
pub fn iterate_ipm(
    initial: IpmState,
    stack: &OperatorStack,
    obj: &Objective,
    steps: usize,
    stream: &RandomStream,
) -> Result<IpmTrajectory> {
    validate_stack_representation(&initial, stack)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut step_leaks = Vec::new();
    states.push(initial);
    for k in 0..steps {
        let step_stream = stream.derive(k as u64);
        let next = match states.last().expect("nonempty") {
            IpmState::Grid(g) => {
                let (next, leak) = grid_stack_step(g, stack, obj)?;
                step_leaks.push(leak);
                IpmState::Grid(next)
            }
            IpmState::Particles(p) => {
                let mut current = p.clone();
                for (index, op) in stack.ops().iter().enumerate() {
                    current = particle::particle_ipm_step(
                        &current,
                        op,
                        obj,
                        &step_stream.derive(index as u64),
                    )?;
                }
                IpmState::Particles(current.with_generation(p.generation() + 1))
            }
        };
        states.push(next);
    }
    Ok(IpmTrajectory { states, step_leaks })
}

/// One full stack application on the grid; returns the accumulated
/// boundary-leak mass of the step.
fn grid_stack_step(
    grid: &MarginalDensityGrid,
    stack: &OperatorStack,
    obj: &Objective,
) -> Result<(MarginalDensityGrid, f64)> {
    let mut current = grid.clone();
    let mut leak_total = 0.0;
    for op in stack.ops() {
        let (next, info) = match op {
            OperatorDescriptor::Selection => grid::grid_selection_step(&current, obj)?,
            OperatorDescriptor::Mutation(kernel) => grid::grid_mutation_step(&current, kernel)?,
            OperatorDescriptor::Recombination(_) => {
                return Err(Error::InvalidArgument(
                    "grid representation cannot express recombination".into(),
                ))
            }
        };
        leak_total += info.leak_mass;
        current = next;
    }
    Ok((current.into_generation(grid.generation() + 1), leak_total))
}
