//! Statistical machinery comparing finite-population laws against
//! infinite-population predictions.
//!
//! Marginal laws are always estimated from one fixed slot across independent
//! replicate runs, never by pooling the individuals of a single population:
//! within-population dependence would bias every distance estimate, while
//! exchangeability makes the slot choice irrelevant (and that is itself
//! tested). Convergence in distribution is probed through computable
//! surrogates — Kolmogorov-Smirnov and histogram total variation on slot
//! marginals, plus cross-slot correlation — rather than an exact metric on
//! laws; each report names the surrogate it used.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::init::InitLaw;
use crate::ipm::grid::sample_from_grid;
use crate::ipm::{IpmState, IpmTrajectory};
use crate::kernel::MutationKernel;
use crate::objective::{evaluate_fitness, Objective};
use crate::ops::{apply_stack, OperatorStack};
use crate::population::{Individual, Population};
use crate::rng::RandomStream;
use crate::stats::{
    covariance_with_ci, ks_same_law_threshold, ks_statistic, mean, pearson_correlation,
    tv_histogram_distance, MeanCi, Z_95,
};

/// Distance estimators used as surrogates for convergence in distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceMetric {
    Ks,
    TvHist,
    Energy,
}

impl DistanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::Ks => "ks",
            DistanceMetric::TvHist => "tv_hist",
            DistanceMetric::Energy => "energy",
        }
    }
}

/// One distance measurement between a finite-population slot marginal and a
/// model state.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub metric: DistanceMetric,
    pub value: f64,
    pub sample_sizes: (usize, usize),
    pub generation: u32,
    pub population_size: usize,
}

impl DistanceReport {
    pub fn new(
        metric: DistanceMetric,
        value: f64,
        sample_sizes: (usize, usize),
        generation: u32,
        population_size: usize,
    ) -> Result<Self> {
        let bounded = match metric {
            DistanceMetric::Ks | DistanceMetric::TvHist => value <= 1.0 + 1e-12,
            DistanceMetric::Energy => true,
        };
        if !(value >= 0.0 && bounded && value.is_finite()) {
            return Err(Error::numerical(
                "DistanceReport",
                format!("{} value {value} outside its range", metric.name()),
            ));
        }
        Ok(DistanceReport {
            metric,
            value,
            sample_sizes,
            generation,
            population_size,
        })
    }
}

/// Quantity carried by one convergence-curve row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMetric {
    Distance(DistanceMetric),
    /// Cross-replicate covariance of the first two slots' fitness.
    FitnessCov,
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::Distance(metric) => metric.name(),
            SweepMetric::FitnessCov => "fitness_cov",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "ks" => Some(SweepMetric::Distance(DistanceMetric::Ks)),
            "tv_hist" => Some(SweepMetric::Distance(DistanceMetric::TvHist)),
            "energy" => Some(SweepMetric::Distance(DistanceMetric::Energy)),
            "fitness_cov" => Some(SweepMetric::FitnessCov),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub generation: u32,
    pub population_size: usize,
    pub replicates: usize,
    pub metric: SweepMetric,
    pub value: f64,
    pub ci_half_width: f64,
    pub seed: u64,
}

/// Distance-versus-population-size view of a sweep, keyed uniquely by
/// `(generation, population size, metric)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceCurve {
    rows: Vec<CurveRow>,
}

impl ConvergenceCurve {
    pub fn from_rows(rows: Vec<CurveRow>) -> Result<Self> {
        let mut keys = std::collections::HashSet::new();
        for row in &rows {
            if !keys.insert((row.generation, row.population_size, row.metric)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate curve key ({}, {}, {})",
                    row.generation,
                    row.population_size,
                    row.metric.name()
                )));
            }
        }
        Ok(ConvergenceCurve { rows })
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn get(&self, generation: u32, size: usize, metric: SweepMetric) -> Option<&CurveRow> {
        self.rows.iter().find(|row| {
            row.generation == generation && row.population_size == size && row.metric == metric
        })
    }
}

/// Average fitness of a population; always within the declared bounds.
pub fn mean_fitness(pop: &Population, obj: &Objective) -> Result<f64> {
    let fitness = evaluate_fitness(pop, obj)?;
    Ok(mean(&fitness))
}

/// Covariance estimate across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub estimate: f64,
    pub ci_half_width: f64,
    pub replicates: usize,
}

/// Sample covariance, across replicate populations, between the fitness of
/// the first and second individuals, with a normal-approximation interval.
pub fn pairwise_fitness_covariance(
    replicated_pops: &[Population],
    obj: &Objective,
) -> Result<CovarianceEstimate> {
    if replicated_pops.len() < 30 {
        return Err(Error::InvalidArgument(format!(
            "need at least 30 replicates, got {}",
            replicated_pops.len()
        )));
    }
    let mut first = Vec::with_capacity(replicated_pops.len());
    let mut second = Vec::with_capacity(replicated_pops.len());
    for pop in replicated_pops {
        if pop.size() < 2 {
            return Err(Error::InvalidArgument(
                "pairwise covariance needs populations of size >= 2".into(),
            ));
        }
        let fitness = evaluate_fitness(&pop.project(2)?, obj)?;
        first.push(fitness[0]);
        second.push(fitness[1]);
    }
    let MeanCi {
        mean: estimate,
        half_width,
    } = covariance_with_ci(&first, &second);
    Ok(CovarianceEstimate {
        estimate,
        ci_half_width: half_width,
        replicates: replicated_pops.len(),
    })
}

/// One individual per replicate at a fixed slot — the unbiased estimate of
/// the single-individual marginal law.
pub fn marginal_samples_of_slot(
    replicated_pops: &[Population],
    slot: usize,
) -> Result<Vec<Individual>> {
    replicated_pops
        .iter()
        .map(|pop| {
            pop.individuals().get(slot).cloned().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "slot {slot} out of range for population of {}",
                    pop.size()
                ))
            })
        })
        .collect()
}

/// Scalar variant for 1-D populations.
pub fn marginal_scalars_of_slot(replicated_pops: &[Population], slot: usize) -> Result<Vec<f64>> {
    Ok(marginal_samples_of_slot(replicated_pops, slot)?
        .iter()
        .map(|ind| ind.as_scalar())
        .collect())
}

/// Monte Carlo density estimates with pointwise 95% half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub xs: Vec<f64>,
    pub estimates: Vec<f64>,
    pub ci_half_widths: Vec<f64>,
}

/// Exact next-generation marginal density of the selection+mutation step,
/// estimated by Monte Carlo without any independence assumption:
///
/// for each `x`, averages `g(X^0) f_w(x|X^0) / ((1/N) sum_l g(X^l))` over
/// `replicates` populations drawn from `init`. This is the finite-`N`
/// marginal itself — the object the grid transition only approximates.
pub fn exact_next_marginal_mc(
    init: &InitLaw,
    obj: &Objective,
    kernel: &MutationKernel,
    xs: &[f64],
    pop_size: usize,
    replicates: usize,
    stream: &RandomStream,
) -> Result<MarginalEstimate> {
    if init.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: init.dim(),
        });
    }
    if replicates < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 replicates for a stable estimate, got {replicates}"
        )));
    }
    if kernel.is_degenerate() {
        return Err(Error::InvalidArgument(
            "the zero-noise kernel has no density to evaluate".into(),
        ));
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }

    let accumulators: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, Vec<f64>)> {
            let pop = init.sample_population(pop_size, &stream.derive(r as u64))?;
            let fitness = evaluate_fitness(&pop, obj)?;
            let eta = mean(&fitness);
            let focal = pop.individuals()[0].as_scalar();
            let weight = fitness[0] / eta;
            let mut sums = vec![0.0f64; xs.len()];
            let mut squares = vec![0.0f64; xs.len()];
            for (i, &x) in xs.iter().enumerate() {
                let term = weight * kernel.density1(x, focal).expect("non-degenerate");
                sums[i] = term;
                squares[i] = term * term;
            }
            Ok((sums, squares))
        })
        .collect::<Result<Vec<_>>>()?;

    let r = replicates as f64;
    let mut estimates = vec![0.0f64; xs.len()];
    let mut squares = vec![0.0f64; xs.len()];
    for (sums, sqs) in &accumulators {
        for i in 0..xs.len() {
            estimates[i] += sums[i];
            squares[i] += sqs[i];
        }
    }
    let ci_half_widths = estimates
        .iter()
        .zip(&squares)
        .map(|(&s, &sq)| {
            let m = s / r;
            let var = (sq / r - m * m).max(0.0) * r / (r - 1.0);
            Z_95 * (var / r).sqrt()
        })
        .collect();
    estimates.iter_mut().for_each(|e| *e /= r);
    Ok(MarginalEstimate {
        xs: xs.to_vec(),
        estimates,
        ci_half_widths,
    })
}

/// Sweep request: one finite-EA family against one model trajectory.
#[derive(Debug, Clone)]
pub struct SweepSpec<'a> {
    pub stack: &'a OperatorStack,
    pub objective: &'a Objective,
    pub init: &'a InitLaw,
    pub generations: usize,
    pub sizes: &'a [usize],
    pub replicates: usize,
    pub ipm: &'a IpmTrajectory,
    /// Comparison sample count drawn from grid model states.
    pub ipm_samples: usize,
    /// Interior bin count for the histogram total-variation estimate.
    pub tv_bins: usize,
}

/// Expected same-law histogram TV between sample sets of sizes `n` and `m`,
/// from per-bin binomial fluctuations of the pooled cell probabilities.
fn tv_same_law_scale(pooled: &[f64], n: usize, m: usize, lo: f64, hi: f64, bins: usize) -> f64 {
    let mut counts = vec![0.0f64; bins + 2];
    for &x in pooled {
        let cell = if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        };
        counts[cell] += 1.0;
    }
    let total: f64 = pooled.len() as f64;
    let rate = 1.0 / n as f64 + 1.0 / m as f64;
    0.5 * counts
        .iter()
        .map(|&c| {
            let p = c / total;
            (2.0 / std::f64::consts::PI * p * (1.0 - p) * rate).sqrt()
        })
        .sum::<f64>()
}

/// Runs `replicates` independent finite-EA trajectories per population size,
/// collects the slot-0 marginal at every generation, and measures KS and
/// histogram-TV distances against the model state of the same generation.
/// Cross-slot fitness covariance is recorded alongside (sizes >= 2).
///
/// Replicates run in parallel; every replicate draws from its own derived
/// stream, so results are independent of thread count.
pub fn convergence_sweep(spec: &SweepSpec, stream: &RandomStream) -> Result<ConvergenceCurve> {
    if spec.ipm.len() < spec.generations + 1 {
        return Err(Error::InvalidArgument(format!(
            "model trajectory has {} states, sweep needs {}",
            spec.ipm.len(),
            spec.generations + 1
        )));
    }
    if spec.init.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: spec.init.dim(),
        });
    }
    let seed = stream.seed();

    // Comparison samples from the model trajectory, one set per generation.
    let ipm_stream = stream.derive(0);
    let ipm_samples: Vec<Vec<f64>> = (0..=spec.generations)
        .map(|k| -> Result<Vec<f64>> {
            match spec.ipm.state(k) {
                IpmState::Grid(grid) => Ok(sample_from_grid(
                    grid,
                    spec.ipm_samples,
                    &ipm_stream.derive(k as u64),
                )?
                .scalars()),
                IpmState::Particles(p) => Ok(p.scalars()),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (size_index, &size) in spec.sizes.iter().enumerate() {
        let size_stream = stream.derive(1 + size_index as u64);

        // per replicate: slot-0 coordinate and (g(slot0), g(slot1)) per generation
        type ReplicateTrace = (Vec<f64>, Vec<(f64, f64)>);
        let traces: Vec<ReplicateTrace> = (0..spec.replicates)
            .into_par_iter()
            .map(|r| -> Result<ReplicateTrace> {
                let rep_stream = size_stream.derive(r as u64);
                let mut pop = spec.init.sample_population(size, &rep_stream.derive(0))?;
                let mut slot0 = Vec::with_capacity(spec.generations + 1);
                let mut fitness_pairs = Vec::with_capacity(spec.generations + 1);
                for k in 0..=spec.generations {
                    if k > 0 {
                        pop = apply_stack(
                            &pop,
                            spec.stack,
                            spec.objective,
                            &rep_stream.derive(k as u64),
                        )?;
                    }
                    slot0.push(pop.individuals()[0].as_scalar());
                    if size >= 2 {
                        let head = evaluate_fitness(&pop.project(2)?, spec.objective)?;
                        fitness_pairs.push((head[0], head[1]));
                    }
                }
                Ok((slot0, fitness_pairs))
            })
            .collect::<Result<Vec<_>>>()?;

        for k in 0..=spec.generations {
            let finite: Vec<f64> = traces.iter().map(|(slot0, _)| slot0[k]).collect();
            let reference = &ipm_samples[k];
            let generation = k as u32;

            let ks = ks_statistic(&finite, reference);
            rows.push(CurveRow {
                generation,
                population_size: size,
                replicates: spec.replicates,
                metric: SweepMetric::Distance(DistanceMetric::Ks),
                value: ks,
                ci_half_width: ks_same_law_threshold(finite.len(), reference.len(), 0.05),
                seed,
            });

            let (lo, hi) = match spec.ipm.state(k) {
                IpmState::Grid(grid) => (grid.lo(), grid.hi()),
                IpmState::Particles(_) => {
                    let lo = reference.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi + 1e-9)
                }
            };
            let tv = tv_histogram_distance(&finite, reference, lo, hi, spec.tv_bins);
            let pooled: Vec<f64> = finite.iter().chain(reference.iter()).cloned().collect();
            rows.push(CurveRow {
                generation,
                population_size: size,
                replicates: spec.replicates,
                metric: SweepMetric::Distance(DistanceMetric::TvHist),
                value: tv,
                ci_half_width: tv_same_law_scale(
                    &pooled,
                    finite.len(),
                    reference.len(),
                    lo,
                    hi,
                    spec.tv_bins,
                ),
                seed,
            });

            if size >= 2 {
                let first: Vec<f64> = traces.iter().map(|(_, pairs)| pairs[k].0).collect();
                let second: Vec<f64> = traces.iter().map(|(_, pairs)| pairs[k].1).collect();
                let cov = covariance_with_ci(&first, &second);
                rows.push(CurveRow {
                    generation,
                    population_size: size,
                    replicates: spec.replicates,
                    metric: SweepMetric::FitnessCov,
                    value: cov.mean,
                    ci_half_width: cov.half_width,
                    seed,
                });
            }
        }
    }
    ConvergenceCurve::from_rows(rows)
}

/// Pairwise slot-marginal KS values and the largest cross-slot correlation
/// among the first `m` slots — the finite-projection test of the i.i.d.
/// limit hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    pub slots: usize,
    /// `slot_ks[i][j]` for `i < j`; empty when `m = 1`.
    pub slot_ks: Vec<Vec<f64>>,
    pub max_ks: f64,
    /// Largest absolute cross-slot correlation over slot pairs and
    /// coordinates; `None` when `m = 1` or every marginal is degenerate.
    pub max_abs_correlation: Option<f64>,
}

pub fn projection_joint_check(
    replicated_pops: &[Population],
    m: usize,
) -> Result<ProjectionReport> {
    if replicated_pops.len() < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 replicates, got {}",
            replicated_pops.len()
        )));
    }
    // pairwise statistics on up to 4 slots are the joint-law budget; larger
    // projections add quadratic cost without sharpening the verdict
    if m > 4 {
        return Err(Error::InvalidArgument(format!(
            "projection size {m} exceeds the 4-slot budget"
        )));
    }
    let min_size = replicated_pops.iter().map(|p| p.size()).min().unwrap_or(0);
    if m == 0 || m > min_size {
        return Err(Error::InvalidArgument(format!(
            "projection size {m} outside 1..={min_size}"
        )));
    }
    let dim = replicated_pops[0].dim();
    // per (slot, coordinate): samples across replicates
    let samples: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|slot| {
            (0..dim)
                .map(|c| {
                    replicated_pops
                        .iter()
                        .map(|p| p.individuals()[slot].coords()[c])
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut slot_ks = vec![vec![0.0f64; m]; m];
    let mut max_ks = 0.0f64;
    let mut max_corr: Option<f64> = None;
    for i in 0..m {
        for j in (i + 1)..m {
            let ks = (0..dim)
                .map(|c| ks_statistic(&samples[i][c], &samples[j][c]))
                .fold(0.0f64, f64::max);
            slot_ks[i][j] = ks;
            slot_ks[j][i] = ks;
            max_ks = max_ks.max(ks);
            for (ci, cj) in samples[i].iter().zip(&samples[j]) {
                if let Some(r) = pearson_correlation(ci, cj) {
                    let r = r.abs();
                    max_corr = Some(max_corr.map_or(r, |m| m.max(r)));
                }
            }
        }
    }
    Ok(ProjectionReport {
        slots: m,
        slot_ks,
        max_ks,
        max_abs_correlation: max_corr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipm::iterate_ipm;
    use crate::objective::{DomainBox, ObjectiveKind};
    use crate::ops::OperatorDescriptor;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn bump_objective(domain: (f64, f64)) -> Objective {
        Objective::new(
            ObjectiveKind::GaussianBump {
                amplitude: 1.0,
                center: vec![0.0],
                width: 1.0,
                floor: 0.1,
            },
            0.1,
            1.1,
            DomainBox::interval(domain.0, domain.1).unwrap(),
        )
        .unwrap()
    }

    fn constant_objective(domain: (f64, f64)) -> Objective {
        Objective::new(
            ObjectiveKind::Constant { value: 2.0 },
            2.0,
            2.0,
            DomainBox::interval(domain.0, domain.1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mean_fitness_trivial_values() {
        let pop = Population::from_scalars(&[0.3, -0.7], 0).unwrap();
        let obj = constant_objective((-5.0, 5.0));
        assert_eq!(mean_fitness(&pop, &obj).unwrap(), 2.0);

        let linear = Objective::new(
            ObjectiveKind::Linear {
                intercept: 0.0,
                slope: vec![1.0],
            },
            0.5,
            4.0,
            DomainBox::interval(0.0, 5.0).unwrap(),
        )
        .unwrap();
        let pop = Population::from_scalars(&[1.0, 3.0], 0).unwrap();
        assert_eq!(mean_fitness(&pop, &linear).unwrap(), 2.0);
    }

    #[test]
    fn mean_fitness_stays_within_declared_bounds() {
        let obj = bump_objective((-3.0, 3.0));
        let master = RandomStream::from_seed(1);
        let init = InitLaw::uniform(vec![-2.0], vec![2.0]).unwrap();
        for r in 0..50 {
            let pop = init.sample_population(16, &master.derive(r)).unwrap();
            let eta = mean_fitness(&pop, &obj).unwrap();
            assert!(eta >= obj.g_min() && eta <= obj.g_max());
        }
    }

    #[test]
    fn iid_populations_have_null_fitness_covariance() {
        let obj = bump_objective((-4.0, 4.0));
        let init = InitLaw::gaussian(vec![0.0], 1.0).unwrap();
        let master = RandomStream::from_seed(2);
        let pops: Vec<Population> = (0..4000)
            .map(|r| init.sample_population(4, &master.derive(r)).unwrap())
            .collect();
        let cov = pairwise_fitness_covariance(&pops, &obj).unwrap();
        assert!(
            cov.estimate.abs() <= cov.ci_half_width * 1.5,
            "estimate {} vs half width {}",
            cov.estimate,
            cov.ci_half_width
        );
    }

    /// Populations of identical individuals drawn from a nondegenerate law:
    /// the slot covariance is the full fitness variance.
    #[test]
    fn perfectly_coupled_populations_recover_fitness_variance() {
        let obj = bump_objective((-4.0, 4.0));
        let master = RandomStream::from_seed(3);
        let mut fitness_values = Vec::new();
        let pops: Vec<Population> = (0..4000)
            .map(|r| {
                let mut rng = master.derive(r).rng();
                let x: f64 = rng.random_range(-1.5..1.5);
                fitness_values.push(obj.eval(&[x]));
                Population::from_scalars(&[x; 3], 0).unwrap()
            })
            .collect();
        let cov = pairwise_fitness_covariance(&pops, &obj).unwrap();
        let var = crate::stats::variance(&fitness_values);
        assert!(cov.estimate > 0.0);
        assert!(
            (cov.estimate - var).abs() < 4.0 * cov.ci_half_width,
            "cov {} vs var {}",
            cov.estimate,
            var
        );
    }

    #[test]
    fn deterministic_replicates_have_zero_covariance_and_zero_width() {
        let obj = constant_objective((-5.0, 5.0));
        let pops: Vec<Population> = (0..100)
            .map(|_| Population::from_scalars(&[0.5, -0.5], 0).unwrap())
            .collect();
        let cov = pairwise_fitness_covariance(&pops, &obj).unwrap();
        assert_eq!(cov.estimate, 0.0);
        assert_eq!(cov.ci_half_width, 0.0);
    }

    #[test]
    fn slot_sampling_counts_and_errors() {
        let pops: Vec<Population> = (0..100)
            .map(|i| Population::from_scalars(&[i as f64, -1.0], 0).unwrap())
            .collect();
        let slot0 = marginal_scalars_of_slot(&pops, 0).unwrap();
        assert_eq!(slot0.len(), 100);
        assert_eq!(slot0[3], 3.0);
        let slot1 = marginal_scalars_of_slot(&pops, 1).unwrap();
        assert!(slot1.iter().all(|&v| v == -1.0));
        assert!(marginal_samples_of_slot(&pops, 2).is_err());
    }

    #[test]
    fn slot_marginals_agree_for_exchangeable_populations() {
        let init = InitLaw::uniform(vec![-1.0], vec![1.0]).unwrap();
        let master = RandomStream::from_seed(4);
        let pops: Vec<Population> = (0..10_000)
            .map(|r| init.sample_population(3, &master.derive(r)).unwrap())
            .collect();
        let slot0 = marginal_scalars_of_slot(&pops, 0).unwrap();
        let slot1 = marginal_scalars_of_slot(&pops, 1).unwrap();
        let ks = ks_statistic(&slot0, &slot1);
        assert!(ks < 0.05, "ks = {ks}");
    }

    /// Constant fitness cancels the weight: the estimate at x reduces to
    /// E[f_w(x|Y)] for Y from the init marginal.
    #[test]
    fn exact_marginal_reduces_to_kernel_average_under_constant_fitness() {
        let obj = constant_objective((-6.0, 6.0));
        let init = InitLaw::uniform(vec![-1.0], vec![1.0]).unwrap();
        let kernel = MutationKernel::gaussian(0.5).unwrap();
        let xs = [0.0, 0.8];
        let est = exact_next_marginal_mc(
            &init,
            &obj,
            &kernel,
            &xs,
            32,
            20_000,
            &RandomStream::from_seed(5),
        )
        .unwrap();
        // E[f_w(x|Y)] by quadrature over the uniform marginal
        for (i, &x) in xs.iter().enumerate() {
            let bins = 20_000;
            let width = 2.0 / bins as f64;
            let expected: f64 = (0..bins)
                .map(|j| {
                    let y = -1.0 + (j as f64 + 0.5) * width;
                    0.5 * kernel.density1(x, y).unwrap() * width
                })
                .sum();
            assert!(
                (est.estimates[i] - expected).abs() < 3.0 * est.ci_half_widths[i],
                "x = {x}: estimate {} vs expected {expected}",
                est.estimates[i]
            );
        }
    }

    #[test]
    fn exact_marginal_rejects_bad_arguments() {
        let obj = constant_objective((-6.0, 6.0));
        let init = InitLaw::uniform(vec![-1.0], vec![1.0]).unwrap();
        let stream = RandomStream::from_seed(6);
        assert!(exact_next_marginal_mc(
            &init,
            &obj,
            &MutationKernel::ZeroNoise,
            &[0.0],
            8,
            2000,
            &stream
        )
        .is_err());
        assert!(exact_next_marginal_mc(
            &init,
            &obj,
            &MutationKernel::gaussian(0.5).unwrap(),
            &[0.0],
            8,
            10,
            &stream
        )
        .is_err());
    }

    /// Mutation preserves i.i.d. exactly at any finite population size, so
    /// sweep distances stay at the same-law level for every size, and a
    /// zero-generation sweep is same-law by construction.
    #[test]
    fn mutation_only_sweep_is_flat_in_population_size() {
        let obj = constant_objective((-10.0, 10.0));
        let kernel = MutationKernel::gaussian(0.5).unwrap();
        let stack =
            OperatorStack::new(vec![OperatorDescriptor::Mutation(kernel.clone())]).unwrap();
        let init = InitLaw::gaussian(vec![0.0], 1.0).unwrap();
        let generations = 2;
        let master = RandomStream::from_seed(7);
        let ipm = iterate_ipm(
            IpmState::Grid(init.marginal_grid(-10.0, 10.0, 1024).unwrap()),
            &stack,
            &obj,
            generations,
            &master.derive(0),
        )
        .unwrap();
        let sizes = [2usize, 16];
        let spec = SweepSpec {
            stack: &stack,
            objective: &obj,
            init: &init,
            generations,
            sizes: &sizes,
            replicates: 800,
            ipm: &ipm,
            ipm_samples: 40_000,
            tv_bins: 48,
        };
        let curve = convergence_sweep(&spec, &master.derive(1)).unwrap();
        // (sizes) x (generations+1) rows per metric, plus covariance rows
        let ks_rows: Vec<_> = curve
            .rows()
            .iter()
            .filter(|r| r.metric == SweepMetric::Distance(DistanceMetric::Ks))
            .collect();
        assert_eq!(ks_rows.len(), sizes.len() * (generations + 1));
        for row in &ks_rows {
            assert!(
                row.value < 1.3 * row.ci_half_width,
                "gen {} size {}: ks {} vs null scale {}",
                row.generation,
                row.population_size,
                row.value,
                row.ci_half_width
            );
        }
        // k = 0 rows are same-law for both metrics by construction.
        for row in curve.rows().iter().filter(|r| r.generation == 0) {
            if let SweepMetric::Distance(_) = row.metric {
                assert!(row.value < 1.3 * row.ci_half_width.max(0.02));
            }
        }
    }

    #[test]
    fn projection_check_flags_coupling_and_passes_iid() {
        let master = RandomStream::from_seed(8);
        let init = InitLaw::gaussian(vec![0.0], 1.0).unwrap();
        let iid: Vec<Population> = (0..10_000)
            .map(|r| init.sample_population(4, &master.derive(r)).unwrap())
            .collect();
        let report = projection_joint_check(&iid, 4).unwrap();
        assert!(report.max_abs_correlation.unwrap() < 0.05);
        assert!(report.max_ks < 0.03, "max ks = {}", report.max_ks);

        let coupled: Vec<Population> = (0..10_000)
            .map(|r| {
                let mut rng = master.derive(100_000 + r).rng();
                let x: f64 = rng.random_range(-1.0..1.0);
                Population::from_scalars(&[x; 4], 0).unwrap()
            })
            .collect();
        let report = projection_joint_check(&coupled, 4).unwrap();
        assert_relative_eq!(report.max_abs_correlation.unwrap(), 1.0, epsilon = 1e-9);

        let degenerate = projection_joint_check(&iid, 1).unwrap();
        assert!(degenerate.max_abs_correlation.is_none());
        assert_eq!(degenerate.max_ks, 0.0);
    }
}
