//! Small statistics helpers shared by analytics and experiments.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pearson correlation coefficient.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::Sizing("correlation needs at least two samples".into()));
    }
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa <= T::zero() || sbb <= T::zero() {
        return Err(Error::UndefinedCorrelation);
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit<T> {
    pub intercept: T,
    pub slope: T,
    pub r_squared: T,
}

pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Sizing("linear fit needs at least two points".into()));
    }
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
    }
    if sxx <= T::zero() {
        return Err(Error::InvalidData("linear fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: T = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    Ok(LinearFit { intercept, slope, r_squared: r_squared_from(sse, syy) })
}

/// `1 - SSE/SST`, with a constant target counting as perfectly explained only
/// when the residual is zero as well.
pub fn r_squared_from<T: Real>(sse: T, sst: T) -> T {
    if sst > T::zero() {
        T::one() - sse / sst
    } else if sse <= T::epsilon() {
        T::one()
    } else {
        T::zero()
    }
}

pub fn r_squared<T: Real>(observed: &[T], predicted: &[T]) -> T {
    let n = T::from_usize_lossy(observed.len().max(1));
    let m = observed.iter().copied().sum::<T>() / n;
    let sst = observed.iter().map(|&o| (o - m) * (o - m)).sum();
    let sse = observed.iter().zip(predicted).map(|(&o, &p)| (o - p) * (o - p)).sum();
    r_squared_from(sse, sst)
}

/// Sample mean and (n-1) standard deviation.
pub fn sample_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample bimodality coefficient `(g1^2 + 1) / (g2 + 3 (n-1)^2 / ((n-2)(n-3)))`
/// with bias-corrected skewness and excess kurtosis. Values below 5/9 are
/// consistent with a unimodal distribution.
pub fn bimodality_coefficient(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return None;
    }
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let skew = g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0);
    let kurt = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0);
    Some((skew * skew + 1.0) / (kurt + 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0))))
}

pub const UNIMODAL_BC_THRESHOLD: f64 = 5.0 / 9.0;

/// Wilson score interval for a binomial proportion at `z` standard scores.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// Numerical Recipes erfc (Chebyshev fit), relative error < 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pearson_extremes() {
        let a = [1.0, 2.0, 4.0, 3.0];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(pearson(&a, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::UndefinedCorrelation)));
        assert!(matches!(pearson(&a, &[1.0; 3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn linear_fit_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_relative_eq!(normal_cdf(1.959_963_985), 0.975, epsilon = 1e-6);
        assert_relative_eq!(normal_cdf(-1.0), 0.158_655_254, epsilon = 1e-6);
    }

    #[test]
    fn bimodality_separates_one_and_two_bumps() {
        // triangular: sum of two low-discrepancy uniforms
        let uni: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.618_034).fract() + ((i as f64) * 0.414_214).fract()).collect();
        let bi: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { -5.0 } else { 5.0 } + ((i as f64) * 0.37).sin() * 0.1).collect();
        assert!(bimodality_coefficient(&bi).unwrap() > UNIMODAL_BC_THRESHOLD);
        assert!(bimodality_coefficient(&uni).unwrap() < UNIMODAL_BC_THRESHOLD);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.2 && hi < 0.4);
    }
}
