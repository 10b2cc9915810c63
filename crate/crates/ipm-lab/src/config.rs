//! Experiment configuration: a TOML key-value tree parsed into a validated
//! [`ExperimentConfig`].
//!
//! Unknown keys are errors, the master seed is mandatory (there is no
//! wall-clock default), and every referenced objective/kernel/recombination
//! name must exist in the built-in registries. The config hash is computed
//! from the parsed representation, so it is stable under key reordering in
//! the file; the output directory is excluded from the hash because it does
//! not affect results.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counterexample::{ExchangeableMixtureSpec, LlnCounterexampleSpec};
use crate::error::{Error, Result};
use crate::init::InitLaw;
use crate::ipm::particle::DEFAULT_PARTICLE_FLOOR;
use crate::kernel::MutationKernel;
use crate::objective::{DomainBox, Objective, ObjectiveKind};
use crate::ops::{CoeffMatrix, OperatorDescriptor, OperatorStack, RecombinationLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Ipm,
    Compare,
    Counterexample,
    Sweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Ipm => "ipm",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveSection {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<Vec<f64>>,
    g_min: f64,
    g_max: f64,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    /// Declared sup bound `M`; must dominate the analytic sup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sup_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecombinationSection {
    name: String,
    /// `deterministic` only: `k` row-major matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackSection {
    ops: Vec<String>,
}

impl Default for StackSection {
    fn default() -> Self {
        StackSection {
            ops: vec!["selection".into(), "mutation".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitSection {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    within_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    generations: usize,
    sizes: Vec<usize>,
    replicates: usize,
    particles: usize,
    grid_bins: usize,
    tv_bins: usize,
    ipm_samples: usize,
    representation: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            generations: 1,
            sizes: vec![16],
            replicates: 1000,
            particles: 100_000,
            grid_bins: 1024,
            tv_bins: 64,
            ipm_samples: 100_000,
            representation: "grid".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct CompareSection {
    generation: Option<usize>,
    size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CounterexampleSection {
    lln_g_min: f64,
    lln_g_max: f64,
    lln_n: usize,
    lln_replicates: usize,
    gap_pop_size: usize,
    gap_replicates: usize,
    eval_points: usize,
    eta_sizes: Vec<usize>,
    mixture_centers: Vec<f64>,
    mixture_weights: Vec<f64>,
    mixture_within_sd: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            lln_g_min: 1.0,
            lln_g_max: 2.0,
            lln_n: 1000,
            lln_replicates: 10_000,
            gap_pop_size: 256,
            gap_replicates: 4000,
            eval_points: 25,
            eta_sizes: vec![32, 128, 512],
            mixture_centers: vec![-1.0, 1.0],
            mixture_weights: vec![0.5, 0.5],
            mixture_within_sd: 0.2,
        }
    }
}

/// Distance thresholds calibrated against the same-law null at the
/// configured replicate counts. They live in the config so recalibrating a
/// sweep never requires a code change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub same_law_ks: f64,
    pub slot_ks: f64,
    pub correlation: f64,
    pub sweep_final_ks: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            same_law_ks: 0.03,
            slot_ks: 0.02,
            correlation: 0.02,
            sweep_final_ks: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    seed: u64,
    #[serde(default = "default_dimension")]
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<String>,
    objective: ObjectiveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recombination: Option<RecombinationSection>,
    #[serde(default)]
    stack: StackSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<InitSection>,
    #[serde(default)]
    run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compare: Option<CompareSection>,
    #[serde(default)]
    counterexample: CounterexampleSection,
    #[serde(default)]
    thresholds: Thresholds,
}

fn default_dimension() -> usize {
    1
}

fn require<T: Clone>(value: &Option<T>, key: &str, name: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::config(key, format!("required for `{name}`")))
}

fn forbid<T>(value: &Option<T>, key: &str, name: &str) -> Result<()> {
    if value.is_some() {
        return Err(Error::config(key, format!("not a `{name}` parameter")));
    }
    Ok(())
}

/// A parsed, fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    raw: RawConfig,
}

/// Parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parses and validates a config from TOML text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::config("<config>", e.to_string().trim().to_string()))?;
    let config = ExperimentConfig { raw };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.raw.kind
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    pub fn dimension(&self) -> usize {
        self.raw.dimension
    }

    pub fn output_dir(&self) -> Option<&str> {
        self.raw.output_dir.as_deref()
    }

    pub fn generations(&self) -> usize {
        self.raw.run.generations
    }

    pub fn sizes(&self) -> &[usize] {
        &self.raw.run.sizes
    }

    pub fn replicates(&self) -> usize {
        self.raw.run.replicates
    }

    pub fn particles(&self) -> usize {
        self.raw.run.particles
    }

    pub fn grid_bins(&self) -> usize {
        self.raw.run.grid_bins
    }

    pub fn tv_bins(&self) -> usize {
        self.raw.run.tv_bins
    }

    pub fn ipm_samples(&self) -> usize {
        self.raw.run.ipm_samples
    }

    pub fn uses_grid_representation(&self) -> bool {
        self.raw.run.representation == "grid"
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.raw.thresholds
    }

    pub fn compare_generation(&self) -> usize {
        self.raw
            .compare
            .as_ref()
            .and_then(|c| c.generation)
            .unwrap_or(self.raw.run.generations)
    }

    pub fn compare_size(&self) -> usize {
        self.raw
            .compare
            .as_ref()
            .and_then(|c| c.size)
            .unwrap_or_else(|| *self.raw.run.sizes.last().expect("validated nonempty"))
    }

    /// Override the master seed (CLI `--seed-override`). Returns a new
    /// validated config with a different hash.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut raw = self.raw.clone();
        raw.seed = seed;
        ExperimentConfig { raw }
    }

    pub fn with_output_dir(&self, dir: &str) -> Self {
        let mut raw = self.raw.clone();
        raw.output_dir = Some(dir.to_string());
        ExperimentConfig { raw }
    }

    /// SHA-256 of the canonical (parsed) representation, excluding the
    /// output directory. Stable under key reordering in the source file.
    pub fn hash(&self) -> String {
        let mut canonical = self.raw.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The effective configuration (defaults filled in) as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(&self.raw).expect("config serializes")
    }

    pub fn build_objective(&self) -> Result<Objective> {
        let section = &self.raw.objective;
        let kind = match section.name.as_str() {
            "constant" => {
                forbid(&section.amplitude, "objective.amplitude", "constant")?;
                forbid(&section.center, "objective.center", "constant")?;
                forbid(&section.width, "objective.width", "constant")?;
                forbid(&section.floor, "objective.floor", "constant")?;
                forbid(&section.intercept, "objective.intercept", "constant")?;
                forbid(&section.slope, "objective.slope", "constant")?;
                ObjectiveKind::Constant {
                    value: require(&section.value, "objective.value", "constant")?,
                }
            }
            "gaussian_bump" => {
                forbid(&section.value, "objective.value", "gaussian_bump")?;
                forbid(&section.intercept, "objective.intercept", "gaussian_bump")?;
                forbid(&section.slope, "objective.slope", "gaussian_bump")?;
                ObjectiveKind::GaussianBump {
                    amplitude: require(&section.amplitude, "objective.amplitude", "gaussian_bump")?,
                    center: require(&section.center, "objective.center", "gaussian_bump")?,
                    width: require(&section.width, "objective.width", "gaussian_bump")?,
                    floor: require(&section.floor, "objective.floor", "gaussian_bump")?,
                }
            }
            "rastrigin_floor" => {
                forbid(&section.value, "objective.value", "rastrigin_floor")?;
                forbid(&section.amplitude, "objective.amplitude", "rastrigin_floor")?;
                forbid(&section.center, "objective.center", "rastrigin_floor")?;
                forbid(&section.width, "objective.width", "rastrigin_floor")?;
                forbid(&section.intercept, "objective.intercept", "rastrigin_floor")?;
                forbid(&section.slope, "objective.slope", "rastrigin_floor")?;
                ObjectiveKind::RastriginFloor {
                    floor: require(&section.floor, "objective.floor", "rastrigin_floor")?,
                }
            }
            "linear" => {
                forbid(&section.value, "objective.value", "linear")?;
                forbid(&section.amplitude, "objective.amplitude", "linear")?;
                forbid(&section.center, "objective.center", "linear")?;
                forbid(&section.width, "objective.width", "linear")?;
                forbid(&section.floor, "objective.floor", "linear")?;
                ObjectiveKind::Linear {
                    intercept: require(&section.intercept, "objective.intercept", "linear")?,
                    slope: require(&section.slope, "objective.slope", "linear")?,
                }
            }
            other => {
                return Err(Error::config(
                    "objective.name",
                    format!("unknown objective `{other}`"),
                ))
            }
        };
        let domain = DomainBox::new(section.domain_lo.clone(), section.domain_hi.clone())
            .map_err(|e| Error::config("objective.domain_lo", e.to_string()))?;
        if domain.dim() != self.raw.dimension {
            return Err(Error::config(
                "objective.domain_lo",
                format!(
                    "domain box dimension {} does not match experiment dimension {}",
                    domain.dim(),
                    self.raw.dimension
                ),
            ));
        }
        Objective::new(kind, section.g_min, section.g_max, domain)
            .map_err(|e| Error::config("objective", e.to_string()))
    }

    pub fn build_kernel(&self) -> Result<MutationKernel> {
        let section = self
            .raw
            .kernel
            .as_ref()
            .ok_or_else(|| Error::config("kernel", "section required by the stack"))?;
        let kernel = match section.name.as_str() {
            "gaussian" => {
                forbid(&section.half_width, "kernel.half_width", "gaussian")?;
                MutationKernel::gaussian(require(&section.sigma, "kernel.sigma", "gaussian")?)
                    .map_err(|e| Error::config("kernel.sigma", e.to_string()))?
            }
            "uniform_box" => {
                forbid(&section.sigma, "kernel.sigma", "uniform_box")?;
                MutationKernel::uniform_box(require(
                    &section.half_width,
                    "kernel.half_width",
                    "uniform_box",
                )?)
                .map_err(|e| Error::config("kernel.half_width", e.to_string()))?
            }
            "zero_noise" => {
                forbid(&section.sigma, "kernel.sigma", "zero_noise")?;
                forbid(&section.half_width, "kernel.half_width", "zero_noise")?;
                MutationKernel::ZeroNoise
            }
            other => {
                return Err(Error::config(
                    "kernel.name",
                    format!("unknown kernel `{other}`"),
                ))
            }
        };
        if let Some(declared) = section.sup_bound {
            match kernel.sup_bound(self.raw.dimension) {
                Some(analytic) if declared >= analytic - 1e-12 => {}
                Some(analytic) => {
                    return Err(Error::config(
                        "kernel.sup_bound",
                        format!("declared bound {declared} is below the analytic sup {analytic}"),
                    ))
                }
                None => {
                    return Err(Error::config(
                        "kernel.sup_bound",
                        "the zero-noise kernel has no finite density bound",
                    ))
                }
            }
        }
        Ok(kernel)
    }

    pub fn build_recombination(&self) -> Result<RecombinationLaw> {
        let section = self
            .raw
            .recombination
            .as_ref()
            .ok_or_else(|| Error::config("recombination", "section required by the stack"))?;
        match section.name.as_str() {
            "mean" => {
                forbid(&section.matrices, "recombination.matrices", "mean")?;
                Ok(RecombinationLaw::Mean)
            }
            "uniform" => {
                forbid(&section.matrices, "recombination.matrices", "uniform")?;
                Ok(RecombinationLaw::Uniform)
            }
            "deterministic" => {
                let matrices = require(
                    &section.matrices,
                    "recombination.matrices",
                    "deterministic",
                )?;
                let matrices = matrices
                    .into_iter()
                    .map(CoeffMatrix::from_rows)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::config("recombination.matrices", e.to_string()))?;
                if matrices.iter().any(|m| m.dim() != self.raw.dimension) {
                    return Err(Error::config(
                        "recombination.matrices",
                        format!("matrices must be {0}x{0}", self.raw.dimension),
                    ));
                }
                RecombinationLaw::deterministic(matrices)
                    .map_err(|e| Error::config("recombination.matrices", e.to_string()))
            }
            other => Err(Error::config(
                "recombination.name",
                format!("unknown recombination `{other}`"),
            )),
        }
    }

    pub fn build_stack(&self) -> Result<OperatorStack> {
        let mut ops = Vec::with_capacity(self.raw.stack.ops.len());
        for name in &self.raw.stack.ops {
            let op = match name.as_str() {
                "selection" => OperatorDescriptor::Selection,
                "mutation" => OperatorDescriptor::Mutation(self.build_kernel()?),
                "recombination" => OperatorDescriptor::Recombination(self.build_recombination()?),
                other => {
                    return Err(Error::config(
                        "stack.ops",
                        format!("unknown operator `{other}`"),
                    ))
                }
            };
            ops.push(op);
        }
        OperatorStack::new(ops).map_err(|e| Error::config("stack.ops", e.to_string()))
    }

    pub fn build_init(&self) -> Result<InitLaw> {
        let section = self
            .raw
            .init
            .as_ref()
            .ok_or_else(|| Error::config("init", "section required by this experiment kind"))?;
        let law = match section.name.as_str() {
            "gaussian" => {
                forbid(&section.lo, "init.lo", "gaussian")?;
                forbid(&section.hi, "init.hi", "gaussian")?;
                forbid(&section.centers, "init.centers", "gaussian")?;
                forbid(&section.weights, "init.weights", "gaussian")?;
                forbid(&section.within_sd, "init.within_sd", "gaussian")?;
                InitLaw::gaussian(
                    require(&section.mean, "init.mean", "gaussian")?,
                    require(&section.sd, "init.sd", "gaussian")?,
                )
                .map_err(|e| Error::config("init", e.to_string()))?
            }
            "uniform" => {
                forbid(&section.mean, "init.mean", "uniform")?;
                forbid(&section.sd, "init.sd", "uniform")?;
                forbid(&section.centers, "init.centers", "uniform")?;
                forbid(&section.weights, "init.weights", "uniform")?;
                forbid(&section.within_sd, "init.within_sd", "uniform")?;
                InitLaw::uniform(
                    require(&section.lo, "init.lo", "uniform")?,
                    require(&section.hi, "init.hi", "uniform")?,
                )
                .map_err(|e| Error::config("init", e.to_string()))?
            }
            "mixture" => {
                forbid(&section.mean, "init.mean", "mixture")?;
                forbid(&section.sd, "init.sd", "mixture")?;
                forbid(&section.lo, "init.lo", "mixture")?;
                forbid(&section.hi, "init.hi", "mixture")?;
                let spec = ExchangeableMixtureSpec::new(
                    require(&section.centers, "init.centers", "mixture")?,
                    require(&section.weights, "init.weights", "mixture")?,
                    require(&section.within_sd, "init.within_sd", "mixture")?,
                    1,
                )
                .map_err(|e| Error::config("init", e.to_string()))?;
                InitLaw::Mixture(spec)
            }
            other => {
                return Err(Error::config(
                    "init.name",
                    format!("unknown init law `{other}`"),
                ))
            }
        };
        if law.dim() != self.raw.dimension {
            return Err(Error::config(
                "init",
                format!(
                    "init law dimension {} does not match experiment dimension {}",
                    law.dim(),
                    self.raw.dimension
                ),
            ));
        }
        Ok(law)
    }

    pub fn build_lln_spec(&self) -> Result<LlnCounterexampleSpec> {
        let section = &self.raw.counterexample;
        LlnCounterexampleSpec::with_defaults(section.lln_g_min, section.lln_g_max, section.lln_n)
            .map_err(|e| Error::config("counterexample", e.to_string()))
    }

    pub fn build_mixture_spec(&self) -> Result<ExchangeableMixtureSpec> {
        let section = &self.raw.counterexample;
        ExchangeableMixtureSpec::new(
            section.mixture_centers.clone(),
            section.mixture_weights.clone(),
            section.mixture_within_sd,
            section.gap_pop_size,
        )
        .map_err(|e| Error::config("counterexample", e.to_string()))
    }

    pub fn lln_replicates(&self) -> usize {
        self.raw.counterexample.lln_replicates
    }

    pub fn gap_pop_size(&self) -> usize {
        self.raw.counterexample.gap_pop_size
    }

    pub fn gap_replicates(&self) -> usize {
        self.raw.counterexample.gap_replicates
    }

    pub fn eval_points(&self) -> usize {
        self.raw.counterexample.eval_points
    }

    pub fn eta_sizes(&self) -> &[usize] {
        &self.raw.counterexample.eta_sizes
    }

    fn validate(&self) -> Result<()> {
        let raw = &self.raw;
        if raw.dimension == 0 {
            return Err(Error::config("dimension", "must be >= 1"));
        }
        if raw.run.sizes.is_empty() {
            return Err(Error::config("run.sizes", "must be nonempty"));
        }
        if raw.run.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "run.sizes",
                "sizes must be strictly ascending",
            ));
        }
        if raw.run.sizes.contains(&0) {
            return Err(Error::config("run.sizes", "sizes must be >= 1"));
        }
        if raw.run.grid_bins < 2 {
            return Err(Error::config("run.grid_bins", "must be >= 2"));
        }
        if raw.run.tv_bins < 2 {
            return Err(Error::config("run.tv_bins", "must be >= 2"));
        }
        if raw.run.representation != "grid" && raw.run.representation != "particle" {
            return Err(Error::config(
                "run.representation",
                format!("must be `grid` or `particle`, got `{}`", raw.run.representation),
            ));
        }

        // every referenced registry name must resolve
        self.build_objective()?;
        let stack = self.build_stack()?;

        match raw.kind {
            ExperimentKind::Counterexample => {
                self.build_lln_spec()?;
                self.build_mixture_spec()?;
                self.build_kernel()?;
                if raw.dimension != 1 {
                    return Err(Error::config(
                        "dimension",
                        "counterexample experiments are one-dimensional",
                    ));
                }
                if raw.counterexample.eval_points == 0 {
                    return Err(Error::config("counterexample.eval_points", "must be >= 1"));
                }
                if raw.counterexample.eta_sizes.iter().any(|&n| n < 2) {
                    return Err(Error::config("counterexample.eta_sizes", "sizes must be >= 2"));
                }
                if raw.counterexample.gap_replicates < 1000 {
                    return Err(Error::config(
                        "counterexample.gap_replicates",
                        "need at least 1000 replicates",
                    ));
                }
            }
            ExperimentKind::Simulate => {
                self.build_init()?;
            }
            ExperimentKind::Ipm => {
                self.build_init()?;
                if self.uses_grid_representation() {
                    if raw.dimension != 1 {
                        return Err(Error::config(
                            "run.representation",
                            "the grid representation is one-dimensional",
                        ));
                    }
                    crate::ipm::validate_stack_representation(
                        &crate::ipm::IpmState::Grid(
                            self.build_init()?
                                .marginal_grid(
                                    raw.objective.domain_lo[0],
                                    raw.objective.domain_hi[0],
                                    raw.run.grid_bins,
                                )
                                .map_err(|e| Error::config("run.grid_bins", e.to_string()))?,
                        ),
                        &stack,
                    )
                    .map_err(|e| Error::config("stack.ops", e.to_string()))?;
                } else if raw.run.particles < DEFAULT_PARTICLE_FLOOR {
                    return Err(Error::config(
                        "run.particles",
                        format!("need at least {DEFAULT_PARTICLE_FLOOR} particles"),
                    ));
                }
            }
            ExperimentKind::Compare | ExperimentKind::Sweep => {
                self.build_init()?;
                if raw.dimension != 1 {
                    return Err(Error::config(
                        "dimension",
                        "slot-marginal comparisons are one-dimensional",
                    ));
                }
                if self.uses_grid_representation() && stack.has_recombination() {
                    return Err(Error::config(
                        "stack.ops",
                        "grid-backed comparisons cannot include recombination; \
                         set run.representation = \"particle\"",
                    ));
                }
                // model-side sampling noise must stay well below finite-
                // population effects
                let largest = *raw.run.sizes.last().expect("validated nonempty");
                let floor = DEFAULT_PARTICLE_FLOOR.max(10 * largest);
                if raw.run.ipm_samples < floor {
                    return Err(Error::config(
                        "run.ipm_samples",
                        format!(
                            "need at least {floor} comparison samples (10x the largest size)"
                        ),
                    ));
                }
                if !self.uses_grid_representation() && raw.run.particles < floor {
                    return Err(Error::config(
                        "run.particles",
                        format!("need at least {floor} particles (10x the largest size)"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "ipm"
seed = 7

[objective]
name = "constant"
value = 1.0
g_min = 1.0
g_max = 1.0
domain_lo = [-4.0]
domain_hi = [4.0]

[kernel]
name = "gaussian"
sigma = 0.5

[stack]
ops = ["mutation"]

[init]
name = "gaussian"
mean = [0.0]
sd = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = parse_config_str(MINIMAL).unwrap();
        assert_eq!(config.kind(), ExperimentKind::Ipm);
        assert_eq!(config.seed(), 7);
        assert_eq!(config.grid_bins(), 1024);
        assert_eq!(config.sizes(), &[16]);
        let echoed = config.echo();
        assert!(echoed.contains("grid_bins = 1024"), "{echoed}");
        assert!(echoed.contains("same_law_ks"));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = MINIMAL.replace("[init]", "unknown_key = 3\n[init]");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown_key"), "{err}");
    }

    #[test]
    fn unknown_kernel_name_is_an_error_naming_the_key() {
        let bad = MINIMAL.replace("name = \"gaussian\"\nsigma = 0.5", "name = \"cauchy\"");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("kernel.name"), "{err}");
        assert!(err.to_string().contains("cauchy"), "{err}");
    }

    #[test]
    fn missing_seed_is_an_error() {
        let bad = MINIMAL.replace("seed = 7\n", "");
        assert!(parse_config_str(&bad).is_err());
    }

    #[test]
    fn misplaced_parameter_is_rejected() {
        let bad = MINIMAL.replace("sigma = 0.5", "sigma = 0.5\nhalf_width = 1.0");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("kernel.half_width"), "{err}");
    }

    #[test]
    fn hash_is_stable_under_key_reordering() {
        let reordered = MINIMAL
            .replace("kind = \"ipm\"\nseed = 7", "seed = 7\nkind = \"ipm\"")
            .replace("mean = [0.0]\nsd = 1.0", "sd = 1.0\nmean = [0.0]");
        let a = parse_config_str(MINIMAL).unwrap();
        let b = parse_config_str(&reordered).unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn hash_tracks_semantic_changes_but_not_output_dir() {
        let a = parse_config_str(MINIMAL).unwrap();
        let b = parse_config_str(&MINIMAL.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.with_output_dir("elsewhere").hash());
        assert_ne!(a.hash(), a.with_seed(9).hash());
    }

    #[test]
    fn sizes_must_ascend() {
        let bad = format!("{MINIMAL}\n[run]\nsizes = [8, 8]\n");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("run.sizes"), "{err}");
    }

    #[test]
    fn malformed_domain_bounds_are_an_error() {
        let bad = MINIMAL.replace("domain_hi = [4.0]", "domain_hi = [-5.0]");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("objective"), "{err}");
    }

    #[test]
    fn declared_sup_bound_must_dominate_the_analytic_sup() {
        let ok = MINIMAL.replace("sigma = 0.5", "sigma = 0.5\nsup_bound = 0.8");
        assert!(parse_config_str(&ok).is_ok());
        let bad = MINIMAL.replace("sigma = 0.5", "sigma = 0.5\nsup_bound = 0.5");
        let err = parse_config_str(&bad).unwrap_err();
        assert!(err.to_string().contains("sup_bound"), "{err}");
    }

    #[test]
    fn sweep_configs_reject_recombination_only_on_the_grid() {
        let sweep = MINIMAL
            .replace("kind = \"ipm\"", "kind = \"sweep\"")
            .replace(
                "ops = [\"mutation\"]",
                "ops = [\"recombination\", \"mutation\"]",
            )
            + "\n[recombination]\nname = \"mean\"\n";
        let err = parse_config_str(&sweep).unwrap_err();
        assert!(err.to_string().contains("stack.ops"), "{err}");

        let particle_backed =
            sweep + "[run]\nrepresentation = \"particle\"\nparticles = 100000\n";
        assert!(parse_config_str(&particle_backed).is_ok());
    }
}
