//! Distance estimators and small-sample statistics shared by the diagnostic
//! machinery: two-sample Kolmogorov-Smirnov, histogram total variation,
//! energy distance, and moment estimates with normal-approximation
//! confidence intervals.

use crate::ipm::grid::MarginalDensityGrid;

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    v
}

/// Exact two-sample Kolmogorov-Smirnov statistic: `sup |F_a - F_b|` over the
/// pooled sample points. Both sample sets must be nonempty.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample set");
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut max_diff = 0.0f64;
    while i < a.len() || j < b.len() {
        // advance both CDFs through the next pooled value together,
        // consuming ties in one step
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let diff = i as f64 / na - j as f64 / nb;
        max_diff = max_diff.max(diff.abs());
    }
    max_diff
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_statistic_vs_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty(), "empty sample set");
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut max_diff = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        max_diff = max_diff.max((f - i as f64 / n).abs());
        max_diff = max_diff.max(((i + 1) as f64 / n - f).abs());
    }
    max_diff
}

/// Asymptotic two-sample same-law KS quantile `c(alpha) * sqrt((n+m)/(n*m))`.
/// Two same-law sample sets exceed this value with probability ~= `alpha`.
pub fn ks_same_law_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2); c(0.05) = 1.3581, c(0.01) = 1.6276.
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    // cells: 0 = below lo, 1..=bins = interior, bins+1 = above hi
    if x < lo {
        0
    } else if x >= hi {
        bins + 1
    } else {
        1 + (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
    }
}

fn histogram_probs(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0f64; bins + 2];
    for &x in samples {
        counts[bin_index(x, lo, hi, bins)] += 1.0;
    }
    let total = samples.len() as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

/// Histogram total variation distance between two sample sets:
/// `1/2 sum |p_a(cell) - p_b(cell)|` over `bins` interior cells plus two
/// sentinel cells holding out-of-range mass.
pub fn tv_histogram_distance(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    assert!(bins >= 2, "need at least two bins");
    assert!(!a.is_empty() && !b.is_empty(), "empty sample set");
    let pa = histogram_probs(a, lo, hi, bins);
    let pb = histogram_probs(b, lo, hi, bins);
    // rounding in the count normalization can overshoot the exact value by
    // an ulp; the distance itself is bounded by 1
    (0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

/// Histogram total variation distance between samples and a density grid,
/// using the grid's own binning. The grid carries no out-of-range mass, so
/// sample mass outside `[lo, hi)` counts fully toward the distance.
pub fn tv_samples_vs_grid(samples: &[f64], grid: &MarginalDensityGrid) -> f64 {
    assert!(!samples.is_empty(), "empty sample set");
    let bins = grid.bins();
    let pa = histogram_probs(samples, grid.lo(), grid.hi(), bins);
    let width = grid.bin_width();
    let mut dist = pa[0] + pa[bins + 1];
    for (i, &v) in grid.values().iter().enumerate() {
        dist += (pa[i + 1] - v * width).abs();
    }
    (0.5 * dist).min(1.0)
}

/// Energy distance between two sample sets:
/// `2 E|X-Y| - E|X-X'| - E|Y-Y'|`, computed exactly in O((n+m) log (n+m)).
pub fn energy_distance(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample set");
    let a = sorted(a);
    let b = sorted(b);
    (2.0 * mean_abs_cross(&a, &b) - mean_abs_within(&a) - mean_abs_within(&b)).max(0.0)
}

/// `E|X - X'|` for sorted samples, via the order-statistics identity
/// `sum over ordered pairs = 2 sum_i (2i + 1 - n) x_(i)`.
fn mean_abs_within(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 0.0;
    }
    let sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * i as f64 + 1.0 - n as f64) * x)
        .sum();
    2.0 * sum / (n as f64 * n as f64)
}

/// `E|X - Y|` for independent sorted samples, by merging.
fn mean_abs_cross(a: &[f64], b: &[f64]) -> f64 {
    // sum over pairs |a_i - b_j| = sum over merged order using prefix sums
    let (mut i, mut j) = (0usize, 0usize);
    let mut sum = 0.0f64;
    let mut seen_a = 0.0f64;
    let mut sum_a = 0.0f64;
    let mut seen_b = 0.0f64;
    let mut sum_b = 0.0f64;
    while i < a.len() || j < b.len() {
        let take_a = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x <= y,
            (Some(_), None) => true,
            _ => false,
        };
        if take_a {
            let x = a[i];
            sum += seen_b * x - sum_b;
            seen_a += 1.0;
            sum_a += x;
            i += 1;
        } else {
            let y = b[j];
            sum += seen_a * y - sum_a;
            seen_b += 1.0;
            sum_b += y;
            j += 1;
        }
    }
    sum / (a.len() as f64 * b.len() as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() as f64 - 1.0)
}

/// Pearson correlation; `None` when either marginal is degenerate.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let vx = variance(xs);
    let vy = variance(ys);
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some(covariance(xs, ys) / (vx * vy).sqrt())
}

/// z-quantile used for all 95% normal-approximation intervals.
pub const Z_95: f64 = 1.959963984540054;

/// Mean with a 95% normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

pub fn mean_with_ci(values: &[f64]) -> MeanCi {
    let m = mean(values);
    let se = (variance(values) / values.len() as f64).sqrt();
    MeanCi {
        mean: m,
        half_width: Z_95 * se,
    }
}

/// Covariance with a moment-based 95% half-width: the standard error of the
/// mean of the centered products.
pub fn covariance_with_ci(xs: &[f64], ys: &[f64]) -> MeanCi {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let products: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let se = (variance(&products) / products.len() as f64).sqrt();
    MeanCi {
        mean: covariance(xs, ys),
        half_width: Z_95 * se,
    }
}

/// 95% Fisher-z confidence interval for a Pearson correlation.
pub fn correlation_ci(r: f64, n: usize) -> (f64, f64) {
    assert!(n > 3, "need more than 3 observations");
    let z = r.clamp(-0.999_999_9, 0.999_999_9).atanh();
    let se = 1.0 / ((n as f64) - 3.0).sqrt();
    ((z - Z_95 * se).tanh(), (z + Z_95 * se).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.3, -1.2, 5.0, 2.2];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_supports_is_one() {
        let a = [0.0; 10];
        let b = [1.0; 7];
        assert_eq!(ks_statistic(&a, &b), 1.0);
    }

    #[test]
    fn ks_hand_enumerated_step_functions() {
        // F_a and F_b differ the most on [2, 3): F_a = 1/2, F_b = 0.
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [3.0, 4.0, 5.0, 6.0];
        assert_relative_eq!(ks_statistic(&a, &b), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ks_one_sample_matches_two_sample_on_large_reference() {
        let mut rng = crate::rng::RandomStream::from_seed(8).rng();
        let a: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let d_exact = ks_statistic_vs_cdf(&a, |x| x.clamp(0.0, 1.0));
        // Against a dense uniform grid reference the two-sample value
        // converges to the one-sample value.
        let b: Vec<f64> = (0..200_000).map(|i| (i as f64 + 0.5) / 200_000.0).collect();
        let d_two = ks_statistic(&a, &b);
        assert!((d_exact - d_two).abs() < 5e-3);
    }

    #[test]
    fn tv_identical_and_disjoint() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [5.0, 6.0, 7.0, 8.0];
        assert_eq!(tv_histogram_distance(&a, &a, 0.0, 1.0, 8), 0.0);
        assert_eq!(tv_histogram_distance(&a, &b, 0.0, 1.0, 8), 1.0);
    }

    #[test]
    fn tv_same_law_null_is_small() {
        let mut rng = crate::rng::RandomStream::from_seed(9).rng();
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..100_000)
            .map(|_| rand_distr::Distribution::sample(&normal, &mut rng))
            .collect();
        let b: Vec<f64> = (0..100_000)
            .map(|_| rand_distr::Distribution::sample(&normal, &mut rng))
            .collect();
        let tv = tv_histogram_distance(&a, &b, -4.0, 4.0, 64);
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn energy_distance_zero_for_same_law_and_positive_for_shifted() {
        let mut rng = crate::rng::RandomStream::from_seed(10).rng();
        let a: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!(energy_distance(&a, &b) < 5e-3);
        let d = energy_distance(&a, &shifted);
        // E|X-Y| = 1 for U[0,1] vs U[1,2]; within-terms are 1/3 each.
        assert_relative_eq!(d, 2.0 - 2.0 / 3.0, epsilon = 0.02);
    }

    #[test]
    fn correlation_detects_degenerate_input() {
        let xs = [1.0, 1.0, 1.0, 1.0];
        let ys = [0.0, 1.0, 2.0, 3.0];
        assert!(pearson_correlation(&xs, &ys).is_none());
        assert_relative_eq!(
            pearson_correlation(&ys, &ys).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn same_law_threshold_matches_quoted_constants() {
        // c(0.01) = 1.6276: two size-R sets exceed 1.6276 * sqrt(2/R) w.p. ~1%.
        let t = ks_same_law_threshold(2000, 2000, 0.01);
        assert_relative_eq!(t, 1.6276 * (2.0f64 / 2000.0).sqrt(), epsilon = 1e-4);
    }

    proptest! {
        #[test]
        fn ks_is_symmetric_and_bounded(
            a in proptest::collection::vec(-50.0f64..50.0, 1..60),
            b in proptest::collection::vec(-50.0f64..50.0, 1..60),
        ) {
            let d1 = ks_statistic(&a, &b);
            let d2 = ks_statistic(&b, &a);
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn tv_is_symmetric_and_bounded(
            a in proptest::collection::vec(-5.0f64..5.0, 1..60),
            b in proptest::collection::vec(-5.0f64..5.0, 1..60),
        ) {
            let d1 = tv_histogram_distance(&a, &b, -4.0, 4.0, 16);
            let d2 = tv_histogram_distance(&b, &a, -4.0, 4.0, 16);
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn energy_within_term_matches_naive(
            a in proptest::collection::vec(-5.0f64..5.0, 2..30),
        ) {
            let mut asorted = a.clone();
            asorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let fast = mean_abs_within(&asorted);
            let naive = a
                .iter()
                .map(|x| a.iter().map(|y| (x - y).abs()).sum::<f64>())
                .sum::<f64>()
                / (a.len() * a.len()) as f64;
            prop_assert!((fast - naive).abs() < 1e-9);
        }

        #[test]
        fn energy_cross_term_matches_naive(
            a in proptest::collection::vec(-5.0f64..5.0, 1..30),
            b in proptest::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            let mut asorted = a.clone();
            asorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut bsorted = b.clone();
            bsorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let fast = mean_abs_cross(&asorted, &bsorted);
            let naive = a
                .iter()
                .map(|x| b.iter().map(|y| (x - y).abs()).sum::<f64>())
                .sum::<f64>()
                / (a.len() * b.len()) as f64;
            prop_assert!((fast - naive).abs() < 1e-9);
        }
    }
}
