//! Bounded objective functions with certified bounds.
//!
//! Objectives are a fixed registry of named built-ins selected by config, not
//! runtime-loaded code. The declared bounds `g_min`, `g_max` are hypotheses:
//! [`validate_objective`] spot-checks them on uniform probes instead of
//! deriving them symbolically.

use rand::Rng;

use crate::error::{Error, Result};
use crate::population::Population;
use crate::rng::RandomStream;

/// Axis-aligned box used for grid truncation and probe sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidArgument(format!(
                "domain box bounds must be nonempty and of equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l >= h {
                return Err(Error::InvalidArgument(format!(
                    "domain box coordinate {i} must satisfy lo < hi with finite bounds, got [{l}, {h}]"
                )));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    /// 1-D box.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        DomainBox::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h)
    }

    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| rng.random_range(l..h))
            .collect()
    }
}

/// The registry of built-in objective shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    /// `g(x) = value`.
    Constant { value: f64 },
    /// `g(x) = amplitude * exp(-|x - center|^2 / (2 width^2)) + floor`.
    GaussianBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
        floor: f64,
    },
    /// `g(x) = floor + sum_i [x_i^2 + 10 (1 - cos 2 pi x_i)]`.
    RastriginFloor { floor: f64 },
    /// `g(x) = intercept + slope . x`.
    Linear { intercept: f64, slope: Vec<f64> },
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Constant { .. } => "constant",
            ObjectiveKind::GaussianBump { .. } => "gaussian_bump",
            ObjectiveKind::RastriginFloor { .. } => "rastrigin_floor",
            ObjectiveKind::Linear { .. } => "linear",
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ObjectiveKind::Constant { value } => *value,
            ObjectiveKind::GaussianBump {
                amplitude,
                center,
                width,
                floor,
            } => {
                let sq: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                amplitude * (-sq / (2.0 * width * width)).exp() + floor
            }
            ObjectiveKind::RastriginFloor { floor } => {
                floor
                    + x.iter()
                        .map(|&xi| {
                            xi * xi + 10.0 * (1.0 - (2.0 * std::f64::consts::PI * xi).cos())
                        })
                        .sum::<f64>()
            }
            ObjectiveKind::Linear { intercept, slope } => {
                intercept + x.iter().zip(slope).map(|(xi, si)| xi * si).sum::<f64>()
            }
        }
    }
}

/// A fitness function `g` together with its declared bounds and domain box.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    g_min: f64,
    g_max: f64,
    domain: DomainBox,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, g_min: f64, g_max: f64, domain: DomainBox) -> Result<Self> {
        if !(g_min.is_finite() && g_max.is_finite()) || g_min <= 0.0 || g_max < g_min {
            return Err(Error::InvalidArgument(format!(
                "objective bounds must satisfy 0 < g_min <= g_max < inf, got [{g_min}, {g_max}]"
            )));
        }
        let param_dim = match &kind {
            ObjectiveKind::GaussianBump { center, .. } => Some(center.len()),
            ObjectiveKind::Linear { slope, .. } => Some(slope.len()),
            _ => None,
        };
        if let Some(dim) = param_dim {
            if dim != domain.dim() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dim(),
                    actual: dim,
                });
            }
        }
        Ok(Objective {
            kind,
            g_min,
            g_max,
            domain,
        })
    }

    /// Raw fitness value; no domain or bound check.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.kind.eval(x)
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }
}

/// Outcome of spot-validating declared objective bounds.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub pass: bool,
    pub probes: usize,
    pub violations: usize,
    /// Probe with the largest excursion outside `[g_min, g_max]`, if any:
    /// `(point, value, distance_outside)`.
    pub worst: Option<(Vec<f64>, f64, f64)>,
}

/// Samples `probe_count` uniform points in the domain box and checks
/// `g_min <= g(x) <= g_max` at each. Non-finite fitness is a hard error
/// naming the offending point; bound violations are collected in the report.
pub fn validate_objective(
    obj: &Objective,
    probe_count: usize,
    stream: &RandomStream,
) -> Result<ValidationReport> {
    if probe_count == 0 {
        return Err(Error::InvalidArgument("probe_count must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut violations = 0usize;
    let mut worst: Option<(Vec<f64>, f64, f64)> = None;
    for _ in 0..probe_count {
        let point = obj.domain().sample_uniform(&mut rng);
        let value = obj.eval(&point);
        if !value.is_finite() {
            return Err(Error::numerical(
                "validate_objective",
                format!("g({point:?}) is not finite"),
            ));
        }
        let excess = (obj.g_min() - value).max(value - obj.g_max());
        if excess > 0.0 {
            violations += 1;
            if worst.as_ref().is_none_or(|(_, _, w)| excess > *w) {
                worst = Some((point, value, excess));
            }
        }
    }
    Ok(ValidationReport {
        pass: violations == 0,
        probes: probe_count,
        violations,
        worst,
    })
}

/// Fitness of every individual, order preserved. Errors name the first
/// individual outside the domain box.
pub fn evaluate_fitness(pop: &Population, obj: &Objective) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(pop.size());
    for (index, ind) in pop.individuals().iter().enumerate() {
        if !obj.domain().contains(ind.coords()) {
            return Err(Error::OutOfDomain {
                index,
                point: ind.coords().to_vec(),
            });
        }
        values.push(obj.eval(ind.coords()));
    }
    Ok(values)
}
