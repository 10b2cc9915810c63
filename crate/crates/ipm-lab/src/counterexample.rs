//! Executable demonstrations that exchangeability alone does not support the
//! marginal transition equation.
//!
//! Two demos:
//!
//! 1. A bounded exchangeable sequence `y_l = z_l + y` whose running average
//!    converges to the random variable `y` — and is therefore *dependent* on
//!    it, with correlation approaching 1.
//! 2. An exchangeable-but-not-independent population (a latent Gaussian
//!    location mixture) for which the exact next-generation marginal,
//!    `E[xi(x) / eta]`, measurably disagrees with the ratio-of-expectations
//!    prediction produced by the density-grid transition.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::diagnostics::{exact_next_marginal_mc, MarginalEstimate};
use crate::error::{Error, Result};
use crate::init::InitLaw;
use crate::ipm::grid::{grid_selection_mutation_step, MarginalDensityGrid};
use crate::kernel::MutationKernel;
use crate::objective::{evaluate_fitness, Objective};
use crate::population::Population;
use crate::rng::RandomStream;
use crate::stats::{correlation_ci, covariance_with_ci, mean, pearson_correlation, variance};

/// Construction recipe for the dependence demo: `y` uniform on
/// `[y_lo, y_hi]`, `z_l` i.i.d. uniform on `[-z_half_width, z_half_width]`,
/// and `y_l = z_l + y` for `l = 1..n`.
///
/// The constraints keep every `y_l` inside `[g_min, g_max]`:
/// `|z| <= (g_max - g_min)/4` and `y` supported on
/// `[(g_max + 3 g_min)/4, (3 g_max + g_min)/4]` with mean
/// `(g_max + g_min)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnCounterexampleSpec {
    pub g_min: f64,
    pub g_max: f64,
    pub z_half_width: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub n: usize,
}

impl LlnCounterexampleSpec {
    /// Default laws: `z` uniform on `+-(g_max - g_min)/8`, `y` uniform on
    /// the full allowed interval.
    pub fn with_defaults(g_min: f64, g_max: f64, n: usize) -> Result<Self> {
        let spread = g_max - g_min;
        LlnCounterexampleSpec::new(
            g_min,
            g_max,
            spread / 8.0,
            (g_max + 3.0 * g_min) / 4.0,
            (3.0 * g_max + g_min) / 4.0,
            n,
        )
    }

    pub fn new(
        g_min: f64,
        g_max: f64,
        z_half_width: f64,
        y_lo: f64,
        y_hi: f64,
        n: usize,
    ) -> Result<Self> {
        if !(g_min.is_finite() && g_max.is_finite()) || g_min <= 0.0 || g_max <= g_min {
            return Err(Error::InvalidArgument(format!(
                "need 0 < g_min < g_max, got [{g_min}, {g_max}]"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample length must be >= 1".into()));
        }
        let spread = g_max - g_min;
        if !(0.0..=spread / 4.0).contains(&z_half_width) {
            return Err(Error::InvalidArgument(format!(
                "z bound {z_half_width} exceeds (g_max - g_min)/4 = {}",
                spread / 4.0
            )));
        }
        let allowed_lo = (g_max + 3.0 * g_min) / 4.0;
        let allowed_hi = (3.0 * g_max + g_min) / 4.0;
        if y_lo < allowed_lo - 1e-12 || y_hi > allowed_hi + 1e-12 || y_lo > y_hi {
            return Err(Error::InvalidArgument(format!(
                "y support [{y_lo}, {y_hi}] must lie in [{allowed_lo}, {allowed_hi}]"
            )));
        }
        // uniform law: mean is the midpoint, which must be (g_max + g_min)/2
        let mean_y = (y_lo + y_hi) / 2.0;
        let required = (g_max + g_min) / 2.0;
        if (mean_y - required).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "y mean {mean_y} must equal (g_max + g_min)/2 = {required}"
            )));
        }
        Ok(LlnCounterexampleSpec {
            g_min,
            g_max,
            z_half_width,
            y_lo,
            y_hi,
            n,
        })
    }
}

/// One replicate of the dependence demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlnRecord {
    /// The latent variable drawn once per replicate.
    pub y: f64,
    /// `(1/n) sum_l (y + z_l)`.
    pub mean_n: f64,
}

/// Draws `replicates` independent records. Every `y_l = z_l + y` lies in
/// `[g_min, g_max]` by construction.
pub fn sample_lln_counterexample(
    spec: &LlnCounterexampleSpec,
    replicates: usize,
    stream: &RandomStream,
) -> Vec<LlnRecord> {
    (0..replicates)
        .map(|r| {
            let mut rng = stream.derive(r as u64).rng();
            let y = if spec.y_lo < spec.y_hi {
                rng.random_range(spec.y_lo..spec.y_hi)
            } else {
                spec.y_lo
            };
            let mut acc = 0.0f64;
            for _ in 0..spec.n {
                let z = if spec.z_half_width > 0.0 {
                    rng.random_range(-spec.z_half_width..spec.z_half_width)
                } else {
                    0.0
                };
                acc += y + z;
            }
            LlnRecord {
                y,
                mean_n: acc / spec.n as f64,
            }
        })
        .collect()
}

/// Correlation between the latent `y` and the sample mean, with a 95%
/// Fisher-z interval. The independence claim is refuted when the interval
/// excludes zero; a degenerate marginal yields `None` (non-refutation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceReport {
    pub correlation: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub replicates: usize,
    pub mean_of_means: f64,
}

impl DependenceReport {
    pub fn refutes_independence(&self) -> bool {
        matches!(self.ci, Some((lo, hi)) if lo > 0.0 || hi < 0.0)
    }
}

pub fn dependence_statistic(records: &[LlnRecord]) -> DependenceReport {
    let ys: Vec<f64> = records.iter().map(|r| r.y).collect();
    let means: Vec<f64> = records.iter().map(|r| r.mean_n).collect();
    let correlation = pearson_correlation(&ys, &means);
    let ci = correlation.map(|r| correlation_ci(r, records.len()));
    DependenceReport {
        correlation,
        ci,
        replicates: records.len(),
        mean_of_means: mean(&means),
    }
}

/// A concrete exchangeable-but-not-i.i.d. family: draw one latent component
/// by weight, then fill the population with i.i.d. normals at that center.
/// With two or more effective components the slots are dependent while the
/// joint law stays permutation invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeableMixtureSpec {
    pub component_centers: Vec<f64>,
    pub component_weights: Vec<f64>,
    pub within_sd: f64,
    pub n: usize,
}

impl ExchangeableMixtureSpec {
    pub fn new(
        component_centers: Vec<f64>,
        component_weights: Vec<f64>,
        within_sd: f64,
        n: usize,
    ) -> Result<Self> {
        if component_centers.len() < 2 {
            return Err(Error::InvalidArgument(
                "mixture needs at least two components".into(),
            ));
        }
        if component_centers.len() != component_weights.len() {
            return Err(Error::InvalidArgument(
                "component centers and weights must have equal length".into(),
            ));
        }
        if component_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("negative mixture weight".into()));
        }
        let total: f64 = component_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if !(within_sd.is_finite() && within_sd > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "within-component sd must be positive, got {within_sd}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("population size must be >= 1".into()));
        }
        Ok(ExchangeableMixtureSpec {
            component_centers,
            component_weights,
            within_sd,
            n,
        })
    }

    /// Collapses to one effective component (i.i.d. population)?
    pub fn is_effectively_iid(&self) -> bool {
        self.component_weights.iter().filter(|&&w| w > 0.0).count() <= 1
    }

    /// Marginal density of a single slot: the weighted normal mixture.
    pub fn marginal_density(&self, x: f64) -> f64 {
        let sd = self.within_sd;
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        self.component_centers
            .iter()
            .zip(&self.component_weights)
            .map(|(&c, &w)| {
                let z = (x - c) / sd;
                w * norm * (-0.5 * z * z).exp()
            })
            .sum()
    }

    pub(crate) fn sample_component(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (index, &w) in self.component_weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return index;
            }
        }
        self.component_weights.len() - 1
    }
}

/// Draws one population: a latent component, then `n` i.i.d. normals at its
/// center.
pub fn sample_exchangeable_mixture(
    spec: &ExchangeableMixtureSpec,
    stream: &RandomStream,
) -> Result<Population> {
    let mut rng = stream.rng();
    let component = spec.sample_component(&mut rng);
    let center = spec.component_centers[component];
    let normal = Normal::new(center, spec.within_sd).expect("validated sd");
    let values: Vec<f64> = (0..spec.n).map(|_| normal.sample(&mut rng)).collect();
    Population::from_scalars(&values, 0)
}

/// Pointwise comparison of the exact next marginal against the grid
/// transition prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub x: f64,
    pub exact_estimate: f64,
    pub eq_prediction: f64,
    pub gap: f64,
    pub ci_half_width: f64,
}

/// Variance of the mean fitness at sample length `n`, next to the cross-slot
/// fitness covariance it converges to.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaVarianceRow {
    pub n: usize,
    pub var_eta: f64,
    pub cov_estimate: f64,
    pub cov_ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGapReport {
    pub rows: Vec<GapRow>,
    pub eta_rows: Vec<EtaVarianceRow>,
}

impl TransitionGapReport {
    /// Number of evaluation points where the gap exceeds `factor` times the
    /// Monte Carlo half-width.
    pub fn points_exceeding(&self, factor: f64) -> usize {
        self.rows
            .iter()
            .filter(|row| row.gap.abs() > factor * row.ci_half_width)
            .count()
    }
}

/// Sampling plan for [`transition_gap_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapDemoPlan {
    /// Evaluation points for the marginal comparison.
    pub xs: Vec<f64>,
    pub pop_size: usize,
    pub replicates: usize,
    /// Sample lengths for the mean-fitness variance comparison (may be
    /// empty to skip it).
    pub eta_sizes: Vec<usize>,
    /// Bin count of the prediction grid over the objective's domain box.
    pub grid_bins: usize,
}

/// Runs the transition-gap demo on a mixture initial law.
///
/// The exact marginal of the next generation is estimated by Monte Carlo
/// over `plan.replicates` populations of size `plan.pop_size`; the
/// prediction applies the selection+mutation grid transition to the
/// mixture's marginal density. For every `x` the gap carries the Monte
/// Carlo 95% half-width.
pub fn transition_gap_demo(
    spec: &ExchangeableMixtureSpec,
    obj: &Objective,
    kernel: &MutationKernel,
    plan: &GapDemoPlan,
    stream: &RandomStream,
) -> Result<TransitionGapReport> {
    let xs = &plan.xs;
    let replicates = plan.replicates;
    let init = InitLaw::Mixture(ExchangeableMixtureSpec {
        n: plan.pop_size,
        ..spec.clone()
    });
    let exact: MarginalEstimate = exact_next_marginal_mc(
        &init,
        obj,
        kernel,
        xs,
        plan.pop_size,
        replicates,
        &stream.derive(0),
    )?;

    let lo = obj.domain().lo()[0];
    let hi = obj.domain().hi()[0];
    let grid = MarginalDensityGrid::from_fn(lo, hi, plan.grid_bins, |x| spec.marginal_density(x))?;
    let (predicted, _) = grid_selection_mutation_step(&grid, obj, kernel)?;
    let prediction_at = |x: f64| -> Result<f64> {
        predicted
            .bin_of(x)
            .map(|bin| predicted.values()[bin])
            .ok_or_else(|| {
                Error::InvalidArgument(format!("evaluation point {x} outside the domain box"))
            })
    };

    let rows = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let eq_prediction = prediction_at(x)?;
            Ok(GapRow {
                x,
                exact_estimate: exact.estimates[i],
                eq_prediction,
                gap: exact.estimates[i] - eq_prediction,
                ci_half_width: exact.ci_half_widths[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let eta_stream = stream.derive(1);
    let eta_rows = plan
        .eta_sizes
        .iter()
        .enumerate()
        .map(|(size_index, &n)| {
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "eta variance needs sample length >= 2".into(),
                ));
            }
            let size_stream = eta_stream.derive(size_index as u64);
            let sized = ExchangeableMixtureSpec {
                n,
                ..spec.clone()
            };
            let mut etas = Vec::with_capacity(replicates);
            let mut first = Vec::with_capacity(replicates);
            let mut second = Vec::with_capacity(replicates);
            for r in 0..replicates {
                let pop = sample_exchangeable_mixture(&sized, &size_stream.derive(r as u64))?;
                let fitness = evaluate_fitness(&pop, obj)?;
                etas.push(fitness.iter().sum::<f64>() / n as f64);
                first.push(fitness[0]);
                second.push(fitness[1]);
            }
            let cov = covariance_with_ci(&first, &second);
            Ok(EtaVarianceRow {
                n,
                var_eta: variance(&etas),
                cov_estimate: cov.mean,
                cov_ci_half_width: cov.half_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TransitionGapReport { rows, eta_rows })
}
