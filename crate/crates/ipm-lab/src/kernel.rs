//! Mutation kernels: conditional densities `f_w(x|y)` with matching samplers.
//!
//! Like objectives, kernels come from a fixed named registry. Each kernel
//! offers the conditional density, a sampler that agrees with it, and the
//! analytic sup bound `M` of the density (`None` for the degenerate
//! zero-noise kernel, whose "density" is a point mass).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq)]
pub enum MutationKernel {
    /// Additive isotropic Gaussian noise `N(0, sigma^2 I)`.
    Gaussian { sigma: f64 },
    /// Additive noise uniform on `[-half_width, half_width]` per coordinate.
    UniformBox { half_width: f64 },
    /// Point mass at the parent: mutation is the identity map.
    ZeroNoise,
}

impl MutationKernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian kernel sigma must be positive, got {sigma}"
            )));
        }
        Ok(MutationKernel::Gaussian { sigma })
    }

    pub fn uniform_box(half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "uniform kernel half_width must be positive, got {half_width}"
            )));
        }
        Ok(MutationKernel::UniformBox { half_width })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MutationKernel::Gaussian { .. } => "gaussian",
            MutationKernel::UniformBox { .. } => "uniform_box",
            MutationKernel::ZeroNoise => "zero_noise",
        }
    }

    /// True for the point-mass kernel, which has no density function.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, MutationKernel::ZeroNoise)
    }

    /// Conditional density `f_w(x|y)` in dimension `x.len()`, or `None` for
    /// the zero-noise kernel.
    pub fn density(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        debug_assert_eq!(x.len(), y.len());
        match self {
            MutationKernel::Gaussian { sigma } => {
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let mut value = 1.0;
                for (xi, yi) in x.iter().zip(y) {
                    let z = (xi - yi) / sigma;
                    value *= norm * (-0.5 * z * z).exp();
                }
                Some(value)
            }
            MutationKernel::UniformBox { half_width } => {
                let inside = x
                    .iter()
                    .zip(y)
                    .all(|(xi, yi)| (xi - yi).abs() <= *half_width);
                Some(if inside {
                    (2.0 * half_width).powi(-(x.len() as i32))
                } else {
                    0.0
                })
            }
            MutationKernel::ZeroNoise => None,
        }
    }

    /// 1-D density shortcut.
    pub fn density1(&self, x: f64, y: f64) -> Option<f64> {
        self.density(&[x], &[y])
    }

    /// Analytic sup of the density in dimension `dim`; `None` means
    /// unbounded (zero-noise).
    pub fn sup_bound(&self, dim: usize) -> Option<f64> {
        match self {
            MutationKernel::Gaussian { sigma } => {
                Some((sigma * (2.0 * std::f64::consts::PI).sqrt()).powi(-(dim as i32)))
            }
            MutationKernel::UniformBox { half_width } => {
                Some((2.0 * half_width).powi(-(dim as i32)))
            }
            MutationKernel::ZeroNoise => None,
        }
    }

    /// Draw `x ~ f_w(.|y)`.
    pub fn sample(&self, y: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        match self {
            MutationKernel::Gaussian { sigma } => {
                let noise = Normal::new(0.0, *sigma).expect("validated sigma");
                y.iter().map(|yi| yi + noise.sample(rng)).collect()
            }
            MutationKernel::UniformBox { half_width } => y
                .iter()
                .map(|yi| yi + rng.random_range(-half_width..*half_width))
                .collect(),
            MutationKernel::ZeroNoise => y.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use crate::stats::ks_statistic_vs_cdf;

    #[test]
    fn gaussian_density_integrates_to_one_on_grid() {
        let kernel = MutationKernel::gaussian(0.5).unwrap();
        let (lo, hi, bins) = (-6.0, 6.0, 4096);
        let width = (hi - lo) / bins as f64;
        let mass: f64 = (0..bins)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * width;
                kernel.density1(x, 0.3).unwrap() * width
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-8, "mass = {mass}");
    }

    #[test]
    fn densities_respect_sup_bound() {
        for kernel in [
            MutationKernel::gaussian(0.7).unwrap(),
            MutationKernel::uniform_box(0.4).unwrap(),
        ] {
            let sup = kernel.sup_bound(1).unwrap();
            let mut rng = RandomStream::from_seed(5).rng();
            for _ in 0..1000 {
                let x: f64 = rng.random_range(-2.0..2.0);
                let y: f64 = rng.random_range(-2.0..2.0);
                let d = kernel.density1(x, y).unwrap();
                assert!(d >= 0.0 && d <= sup + 1e-12);
            }
        }
    }

    /// Sampler/density agreement: the empirical CDF of draws must match the
    /// CDF obtained by integrating the density.
    #[test]
    fn sampler_matches_density_cdf() {
        for kernel in [
            MutationKernel::gaussian(0.5).unwrap(),
            MutationKernel::uniform_box(0.8).unwrap(),
        ] {
            let y = 0.25;
            let mut rng = RandomStream::from_seed(6).rng();
            let samples: Vec<f64> = (0..100_000)
                .map(|_| kernel.sample(&[y], &mut rng)[0])
                .collect();

            // CDF by quadrature of the density on a fine grid.
            let (lo, hi, bins) = (-4.0, 4.0, 8192);
            let width = (hi - lo) / bins as f64;
            let mut cum = Vec::with_capacity(bins);
            let mut acc = 0.0;
            for i in 0..bins {
                let x = lo + (i as f64 + 0.5) * width;
                acc += kernel.density1(x, y).unwrap() * width;
                cum.push(acc.min(1.0));
            }
            let cdf = |x: f64| -> f64 {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    cum[(((x - lo) / width) as usize).min(bins - 1)]
                }
            };
            let ks = ks_statistic_vs_cdf(&samples, cdf);
            assert!(ks < 0.01, "{}: ks = {ks}", kernel.name());
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let kernel = MutationKernel::ZeroNoise;
        let mut rng = RandomStream::from_seed(7).rng();
        assert_eq!(kernel.sample(&[1.5, -2.0], &mut rng), vec![1.5, -2.0]);
        assert!(kernel.density1(0.0, 0.0).is_none());
        assert!(kernel.sup_bound(1).is_none());
    }
}
