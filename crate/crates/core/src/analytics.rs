//! Quantitative models of noisy Boolean learning.
//!
//! Two minimizers that probe the same mirror in the same epoch diverge only
//! when noise makes their rewards disagree. If `C` is the probability that
//! noise inverts a reward, the two rewards differ with probability
//! `C~ = 2C(1 - C)` and the expected Hamming distance obeys
//! `H(k+1) = H(k) + C~ (1 - 2 rho(k))`, where `rho` is the probability that the
//! probed mirror already differs. Markovian selection gives `rho = H(k)/N`;
//! greedy selection sweeps the mirrors in blocks of `N` epochs, freezing `rho`
//! at its block-start value.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{BooleanWeights, SelectionMode, System};
use crate::reservoir::{normalized_error, NoiseKey};
use crate::scalar::{mean_std, Real};
use crate::seeds::rng_from_seed;
use crate::stats::{bimodality_coefficient, linear_fit, pearson, r_squared, sample_mean_std, wilson_interval};

pub fn hamming(a: &BooleanWeights, b: &BooleanWeights) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    Ok(a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModelParams {
    pub c: f64,
    pub c_tilde: f64,
    pub n: usize,
    pub mode: SelectionMode,
}

impl RateModelParams {
    pub fn from_c(c: f64, n: usize, mode: SelectionMode) -> Result<Self> {
        if !(0.0..=0.5).contains(&c) {
            return Err(Error::Config(format!("flip probability C = {c} outside [0, 0.5]")));
        }
        Ok(Self { c, c_tilde: 2.0 * c * (1.0 - c), n, mode })
    }

    /// Inverts `C~ = 2C(1 - C)` on the branch `C` in `[0, 0.5]`.
    pub fn from_c_tilde(c_tilde: f64, n: usize, mode: SelectionMode) -> Result<Self> {
        if !(0.0..=0.5).contains(&c_tilde) {
            return Err(Error::Config(format!("C~ = {c_tilde} outside [0, 0.5]")));
        }
        let c = 0.5 * (1.0 - (1.0 - 2.0 * c_tilde).max(0.0).sqrt());
        Ok(Self { c, c_tilde, n, mode })
    }
}

/// `H(k)` on the epoch grid `k = 1, 2, ...`; `values[0]` is `H(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingTrace {
    pub values: Vec<f64>,
    pub n: usize,
}

impl HammingTrace {
    pub fn from_counts(counts: &[usize], n: usize) -> Self {
        Self { values: counts.iter().map(|&h| h as f64).collect(), n }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn epochs(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.values.len()
    }

    /// Pointwise mean over traces of equal length and size.
    pub fn average(traces: &[HammingTrace]) -> Result<HammingTrace> {
        let first = traces.first().ok_or_else(|| Error::Sizing("no Hamming traces to average".into()))?;
        let mut values = vec![0.0; first.len()];
        for t in traces {
            if t.len() != first.len() {
                return Err(Error::Dimension { expected: first.len(), got: t.len() });
            }
            if t.n != first.n {
                return Err(Error::Dimension { expected: first.n, got: t.n });
            }
            for (v, h) in values.iter_mut().zip(&t.values) {
                *v += h;
            }
        }
        let m = traces.len() as f64;
        values.iter_mut().for_each(|v| *v /= m);
        Ok(HammingTrace { values, n: first.n })
    }
}

/// Expected `H(k)` for `k = 1..=epochs`, starting from `h1`.
pub fn predict_hamming(params: &RateModelParams, h1: f64, epochs: usize) -> HammingTrace {
    let n = params.n as f64;
    let mut values = Vec::with_capacity(epochs);
    let mut h = h1;
    let mut anchor = h1;
    for k in 1..=epochs {
        values.push(h);
        // Greedy blocks span k in [aN + 1, (a + 1)N].
        if params.mode == SelectionMode::Greedy && (k - 1) % params.n.max(1) == 0 {
            anchor = h;
        }
        let rho = match params.mode {
            SelectionMode::Markovian => h / n,
            SelectionMode::Greedy => anchor / n,
        };
        h += params.c_tilde * (1.0 - 2.0 * rho);
    }
    HammingTrace { values, n: params.n }
}

/// Closed form of the Markovian recursion:
/// `H(k) = N/2 + (H(1) - N/2) (1 - 2C~/N)^(k-1)`.
pub fn markovian_closed_form(c_tilde: f64, n: usize, h1: f64, k: usize) -> f64 {
    let half = n as f64 / 2.0;
    half + (h1 - half) * (1.0 - 2.0 * c_tilde / n as f64).powi(k as i32 - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModelFit {
    pub params: RateModelParams,
    pub h1: f64,
    pub r_squared: f64,
    pub sse: f64,
    pub warnings: Vec<String>,
}

impl RateModelFit {
    pub fn predicted(&self, epochs: usize) -> HammingTrace {
        predict_hamming(&self.params, self.h1, epochs)
    }
}

/// Least-squares `C~` in `[0, 0.5]` for the averaged trace, seeded at the
/// observed `H(1)`.
pub fn fit_rate_model(observed: &[HammingTrace], mode: SelectionMode) -> Result<RateModelFit> {
    let avg = HammingTrace::average(observed)?;
    if avg.len() < 2 {
        return Err(Error::Sizing("rate-model fit needs at least two epochs".into()));
    }
    let h1 = avg.values[0];
    let n = avg.n;
    let epochs = avg.len();
    let sse = |ct: f64| -> f64 {
        let p = RateModelParams { c: 0.0, c_tilde: ct, n, mode };
        predict_hamming(&p, h1, epochs).values.iter().zip(&avg.values).map(|(a, b)| (a - b).powi(2)).sum()
    };
    // Coarse scan, then golden-section refinement inside the best bracket.
    let grid = 500;
    let step = 0.5 / grid as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=grid {
        let v = sse(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best_i + 1) as f64 * step).min(0.5);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (sse(a), sse(b));
    while hi - lo > 1e-12 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = sse(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = sse(b);
        }
    }
    let mut c_tilde = 0.5 * (lo + hi);
    let mut best_sse = sse(c_tilde);
    for edge in [0.0, 0.5] {
        let v = sse(edge);
        if v < best_sse {
            best_sse = v;
            c_tilde = edge;
        }
    }
    let params = RateModelParams::from_c_tilde(c_tilde, n, mode)?;
    let predicted = predict_hamming(&params, h1, epochs);
    let r2 = r_squared(&avg.values, &predicted.values);
    let mut warnings = Vec::new();
    if avg.values.iter().all(|&h| h == h1) {
        warnings.push("observed Hamming trace is constant".to_string());
    }
    if c_tilde >= 0.5 - 1e-9 {
        warnings.push("fitted C~ sits at its upper bound 0.5".to_string());
    }
    for w in &warnings {
        log::warn!("rate-model fit: {w}");
    }
    Ok(RateModelFit { params, h1, r_squared: r2, sse: best_sse, warnings })
}

/// Linear fits of the averaged trace inside consecutive blocks of `block` epochs.
pub fn block_linear_fits(trace: &HammingTrace, block: usize, blocks: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(blocks);
    for a in 0..blocks {
        let start = a * block;
        let end = ((a + 1) * block + 1).min(trace.len());
        if end <= start + 1 {
            return Err(Error::Sizing(format!("trace too short for block {a}")));
        }
        let x: Vec<f64> = (start..end).map(|i| i as f64).collect();
        let fit = linear_fit(&x, &trace.values[start..end])?;
        out.push((fit.slope, fit.r_squared));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipEstimate {
    /// Fraction of noisy rewards disagreeing with the noise-free reward.
    pub probability: f64,
    pub reps: usize,
    /// Noise-free `Delta eps` of the flip.
    pub systematic_delta: f64,
    /// Sample std of the noisy `Delta eps`.
    pub delta_std: f64,
    pub reference_reward: bool,
}

impl FlipEstimate {
    pub fn standard_error(&self) -> f64 {
        (self.probability * (1.0 - self.probability) / self.reps as f64).sqrt()
    }
}

/// Evaluates flipping mirror `l` of `weights` `reps` times with fresh noise,
/// both configurations measured anew each time, and counts rewards that
/// disagree with the noise-free one.
pub fn estimate_flip_probability<T: Real>(
    system: &System<'_, T>,
    weights: &BooleanWeights,
    l: usize,
    reps: usize,
    noise_seed: u64,
) -> Result<FlipEstimate> {
    if reps < 100 {
        return Err(Error::Config("flip-probability estimation needs reps >= 100".into()));
    }
    let deltas = noisy_flip_deltas(system, weights, l, reps, noise_seed)?;
    let mut eval = system.evaluator(noise_seed);
    let sums = eval.sums(weights)?;
    let mut flipped = sums.clone();
    eval.apply_flip(&mut flipped, l, weights.get(l));
    let systematic = (eval.clean_error(&flipped) - eval.clean_error(&sums)).as_f64();
    let reference = systematic < 0.0;
    let disagree = deltas.iter().filter(|&&d| (d < 0.0) != reference).count();
    let (_, delta_std) = sample_mean_std(&deltas);
    Ok(FlipEstimate {
        probability: disagree as f64 / reps as f64,
        reps,
        systematic_delta: systematic,
        delta_std,
        reference_reward: reference,
    })
}

/// `reps` noisy measurements of `eps(w with l flipped) - eps(w)`.
pub fn noisy_flip_deltas<T: Real>(
    system: &System<'_, T>,
    weights: &BooleanWeights,
    l: usize,
    reps: usize,
    noise_seed: u64,
) -> Result<Vec<f64>> {
    if l >= weights.len() {
        return Err(Error::Index { index: l, len: weights.len() });
    }
    let mut eval = system.evaluator(noise_seed);
    let sums = eval.sums(weights)?;
    let mut flipped = sums.clone();
    eval.apply_flip(&mut flipped, l, weights.get(l));
    Ok((0..reps as u64)
        .map(|j| (eval.error(&flipped, NoiseKey::new(j, 0)) - eval.error(&sums, NoiseKey::new(j, 1))).as_f64())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// RMS derivative of the error along random unit-variance output perturbations.
    pub eps_dot: f64,
    /// Std of the raw-output change caused by a random single-bit flip.
    pub sigma_l: f64,
    pub sigma_n: f64,
    pub eps_dot_sigma_n: f64,
    /// Noise-free error of the probed configuration.
    pub eps_at_k: f64,
    pub k: u64,
    /// Finite-difference step used, in raw-output units.
    pub step: f64,
}

/// Error sensitivity `eps_dot` to output perturbations and the learning-induced
/// output spread `sigma_l` at configuration `weights` (epoch `k`).
///
/// `eps_dot` is the RMS over `reps` random Gaussian perturbation patterns of the
/// central-difference derivative `(eps(y + d p) - eps(y - d p)) / 2d`, with `d`
/// equal to `rel_step` times the std of the noise-free output `y`.
pub fn noise_sensitivity<T: Real>(
    system: &System<'_, T>,
    weights: &BooleanWeights,
    k: u64,
    reps: usize,
    rel_step: f64,
    seed: u64,
) -> Result<SensitivityReport> {
    if reps < 100 {
        return Err(Error::Config("noise sensitivity needs reps >= 100".into()));
    }
    let eval = system.evaluator(seed);
    let sums = eval.sums(weights)?;
    let y: Vec<T> = sums.iter().map(|&s| s * s).collect();
    let eps = normalized_error(&y, system.target).as_f64();
    let (_, ystd) = mean_std(&y);
    let step = rel_step * ystd.as_f64();
    if !(step > 0.0) {
        return Err(Error::DegenerateOutput);
    }
    let mut rng = rng_from_seed(seed);
    let (mut plus, mut minus) = (y.clone(), y.clone());
    let mut sq = 0.0;
    for _ in 0..reps {
        for ((p, m), &v) in plus.iter_mut().zip(minus.iter_mut()).zip(&y) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = v + T::lit(step * z);
            *m = v - T::lit(step * z);
        }
        let d = (normalized_error(&plus, system.target) - normalized_error(&minus, system.target)).as_f64() / (2.0 * step);
        sq += d * d;
    }
    let eps_dot = (sq / reps as f64).sqrt();

    let mut dy = Vec::with_capacity(reps * y.len());
    let mut flipped = sums.clone();
    for _ in 0..reps {
        let l = rng.random_range(0..weights.len());
        eval.flipped_sums_into(&sums, l, weights.get(l), &mut flipped);
        dy.extend(flipped.iter().zip(&sums).map(|(&a, &b)| (a * a - b * b).as_f64()));
    }
    let (_, sigma_l) = mean_std(&dy);
    Ok(SensitivityReport {
        eps_dot,
        sigma_l,
        sigma_n: system.sigma_out,
        eps_dot_sigma_n: eps_dot * system.sigma_out,
        eps_at_k: eps,
        k,
        step,
    })
}

/// Std of one noisy error evaluation of `weights`, from `reps` repetitions.
pub fn evaluation_noise_std<T: Real>(
    system: &System<'_, T>,
    weights: &BooleanWeights,
    reps: usize,
    noise_seed: u64,
) -> Result<f64> {
    let mut eval = system.evaluator(noise_seed);
    let sums = eval.sums(weights)?;
    let values: Vec<f64> = (0..reps as u64).map(|j| eval.error(&sums, NoiseKey::new(j, 0)).as_f64()).collect();
    Ok(sample_mean_std(&values).1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub eps0: f64,
    pub rate: f64,
    /// Coefficient of determination of the log-linear regression.
    pub r_squared: f64,
    pub points: usize,
    pub warnings: Vec<String>,
}

/// Fits `eps(k) = eps0 exp(-rate k)` by least squares on `ln eps(k)`, with
/// `k` the sequence index.
pub fn fit_exponential(trace: &[f64]) -> Result<ExponentialFit> {
    let mut warnings = Vec::new();
    let (x, y): (Vec<f64>, Vec<f64>) =
        trace.iter().enumerate().filter(|(_, &e)| e > 0.0 && e.is_finite()).map(|(k, &e)| (k as f64, e.ln())).unzip();
    if x.len() < trace.len() {
        let w = format!("{} nonpositive values excluded from the fit", trace.len() - x.len());
        log::warn!("exponential fit: {w}");
        warnings.push(w);
    }
    let fit = linear_fit(&x, &y)?;
    Ok(ExponentialFit { eps0: fit.intercept.exp(), rate: -fit.slope, r_squared: fit.r_squared, points: x.len(), warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaStats {
    /// Pairwise distances in `(0,1), (0,2), ..., (1,2), ...` order.
    pub distances: Vec<usize>,
    pub mean: f64,
    pub std: f64,
    pub cv: f64,
    /// Pairwise Pearson correlations of the bit vectors; pairs where either
    /// vector is constant are skipped.
    pub bit_correlations: Vec<f64>,
    pub mean_abs_correlation: f64,
    pub bimodality: Option<f64>,
}

pub fn pairwise_minima_stats(minima: &[BooleanWeights]) -> Result<MinimaStats> {
    if minima.len() < 2 {
        return Err(Error::Sizing("pairwise statistics need at least two minima".into()));
    }
    let reals: Vec<Vec<f64>> = minima.iter().map(|m| m.as_reals()).collect();
    let mut distances = Vec::new();
    let mut bit_correlations = Vec::new();
    for i in 0..minima.len() {
        for j in i + 1..minima.len() {
            distances.push(hamming(&minima[i], &minima[j])?);
            match pearson(&reals[i], &reals[j]) {
                Ok(r) => bit_correlations.push(r),
                Err(Error::UndefinedCorrelation) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let d: Vec<f64> = distances.iter().map(|&h| h as f64).collect();
    let (mean, std) = sample_mean_std(&d);
    let mean_abs_correlation = if bit_correlations.is_empty() {
        f64::NAN
    } else {
        bit_correlations.iter().map(|r| r.abs()).sum::<f64>() / bit_correlations.len() as f64
    };
    Ok(MinimaStats {
        mean,
        std,
        cv: if mean > 0.0 { std / mean } else { f64::NAN },
        bimodality: bimodality_coefficient(&d),
        distances,
        bit_correlations,
        mean_abs_correlation,
    })
}

/// Equal-width histogram `(bin lower edge, count)` over `[lo, hi)`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
    let width = (hi - lo) / bins.max(1) as f64;
    let mut counts = vec![0usize; bins.max(1)];
    for &v in values {
        if v >= lo && v <= hi {
            let b = (((v - lo) / width) as usize).min(counts.len() - 1);
            counts[b] += 1;
        }
    }
    counts.into_iter().enumerate().map(|(b, c)| (lo + b as f64 * width, c)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionCategory {
    BelowNoise,
    PotentiallyIndependent,
    Dependent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    pub grad_a: f64,
    pub grad_b: f64,
    pub category: DimensionCategory,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryFraction {
    pub count: usize,
    pub fraction: f64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionClassification {
    pub probes: Vec<GradientProbe>,
    pub noise_scale: f64,
}

impl DimensionClassification {
    pub fn count(&self, category: DimensionCategory) -> usize {
        self.probes.iter().filter(|p| p.category == category).count()
    }

    pub fn fraction(&self, category: DimensionCategory) -> CategoryFraction {
        let count = self.count(category);
        let total = self.probes.len();
        let (ci_low, ci_high) = wilson_interval(count, total, 1.96);
        CategoryFraction { count, fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 }, ci_low, ci_high }
    }
}

/// Below noise inside the circle of diameter `noise_scale` around the origin,
/// potentially independent inside the band `|grad_a - grad_b| <= noise_scale`,
/// dependent otherwise.
pub fn classify_gradient_pairs(probes: &[(f64, f64)], noise_scale: f64) -> Result<DimensionClassification> {
    if !(noise_scale > 0.0) {
        return Err(Error::Config("noise_scale must be positive".into()));
    }
    let probes = probes
        .iter()
        .map(|&(a, b)| {
            let category = if a.hypot(b) <= noise_scale / 2.0 {
                DimensionCategory::BelowNoise
            } else if (a - b).abs() <= noise_scale {
                DimensionCategory::PotentiallyIndependent
            } else {
                DimensionCategory::Dependent
            };
            GradientProbe { grad_a: a, grad_b: b, category }
        })
        .collect();
    Ok(DimensionClassification { probes, noise_scale })
}

/// Random ordering of `positions`.
pub fn shuffled(positions: &[usize], seed: u64) -> Vec<usize> {
    let mut order = positions.to_vec();
    order.shuffle(&mut rng_from_seed(seed));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hamming_examples() {
        let a = BooleanWeights::random(50, 1);
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        let c = BooleanWeights::from_bits(a.bits().iter().map(|b| !b).collect());
        assert_eq!(hamming(&a, &c).unwrap(), 50);
        assert!(matches!(hamming(&a, &BooleanWeights::zeros(3)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn random_pairs_average_half_length() {
        let n = 961;
        let total: usize = (0..1000u64)
            .map(|i| hamming(&BooleanWeights::random(n, 2 * i), &BooleanWeights::random(n, 2 * i + 1)).unwrap())
            .sum();
        let mean = total as f64 / 1000.0;
        // Binomial(961, 1/2) mean 480.5, std of the mean 15.5/sqrt(1000).
        assert!((mean - 480.5).abs() < 4.0 * 15.5 / 1000f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn c_tilde_round_trip() {
        for c in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let p = RateModelParams::from_c(c, 10, SelectionMode::Markovian).unwrap();
            let q = RateModelParams::from_c_tilde(p.c_tilde, 10, SelectionMode::Markovian).unwrap();
            assert_abs_diff_eq!(q.c, c, epsilon = 1e-7);
        }
        assert!(RateModelParams::from_c(0.6, 10, SelectionMode::Greedy).is_err());
    }

    #[test]
    fn zero_c_tilde_is_constant() {
        for mode in [SelectionMode::Markovian, SelectionMode::Greedy] {
            let p = RateModelParams::from_c_tilde(0.0, 64, mode).unwrap();
            assert!(predict_hamming(&p, 7.0, 300).values.iter().all(|&h| h == 7.0));
        }
    }

    #[test]
    fn greedy_first_block_has_slope_c_tilde() {
        let n = 50;
        let p = RateModelParams::from_c_tilde(0.3, n, SelectionMode::Greedy).unwrap();
        let t = predict_hamming(&p, 0.0, 3 * n + 1);
        for k in 1..=n {
            assert_abs_diff_eq!(t.values[k] - t.values[k - 1], 0.3, epsilon = 1e-12);
        }
        // Second block slope frozen at C~(1 - 2H(N+1)/N).
        let anchor = t.values[n];
        let slope = 0.3 * (1.0 - 2.0 * anchor / n as f64);
        for k in n + 1..2 * n {
            assert_abs_diff_eq!(t.values[k] - t.values[k - 1], slope, epsilon = 1e-12);
        }
        let fits = block_linear_fits(&t, n, 2).unwrap();
        assert!(fits[1].0 < fits[0].0);
        assert!(fits.iter().all(|f| f.1 > 0.999_999));
    }

    #[test]
    fn markovian_recursion_matches_closed_form() {
        let n = 256;
        for (ct, h1) in [(0.3, 0.0), (0.05, 40.0), (0.5, 256.0)] {
            let p = RateModelParams::from_c_tilde(ct, n, SelectionMode::Markovian).unwrap();
            let t = predict_hamming(&p, h1, 10 * n);
            for (i, &h) in t.values.iter().enumerate() {
                assert!((h - markovian_closed_form(ct, n, h1, i + 1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fit_recovers_generating_c_tilde() {
        for mode in [SelectionMode::Markovian, SelectionMode::Greedy] {
            let p = RateModelParams::from_c_tilde(0.3, 100, mode).unwrap();
            let t = predict_hamming(&p, 0.0, 600);
            let fit = fit_rate_model(&[t], mode).unwrap();
            assert!((fit.params.c_tilde - 0.3).abs() < 1e-6, "{mode:?}: {}", fit.params.c_tilde);
            assert!(fit.r_squared > 0.999_999);
        }
    }

    #[test]
    fn constant_trace_fits_zero_rate() {
        let t = HammingTrace { values: vec![0.0; 200], n: 64 };
        let fit = fit_rate_model(&[t], SelectionMode::Markovian).unwrap();
        assert!(fit.params.c_tilde < 1e-9);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn exponential_fit_recovers_parameters() {
        let trace: Vec<f64> = (0..500).map(|k| 0.5 * (-0.01 * k as f64).exp()).collect();
        let fit = fit_exponential(&trace).unwrap();
        assert_abs_diff_eq!(fit.eps0, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.rate, 0.01, epsilon = 1e-6);
        let flat = fit_exponential(&[0.2; 50]).unwrap();
        assert_abs_diff_eq!(flat.rate, 0.0, epsilon = 1e-12);
        let partial = fit_exponential(&[0.3, 0.0, 0.1, 0.05]).unwrap();
        assert_eq!(partial.points, 3);
        assert_eq!(partial.warnings.len(), 1);
    }

    #[test]
    fn minima_stats_counts_pairs() {
        let minima: Vec<_> = (0..20).map(|i| BooleanWeights::random(128, i)).collect();
        let s = pairwise_minima_stats(&minima).unwrap();
        assert_eq!(s.distances.len(), 190);
        assert_eq!(s.bit_correlations.len(), 190);
        let mut dup = minima.clone();
        dup.push(minima[3].clone());
        assert!(pairwise_minima_stats(&dup).unwrap().distances.contains(&0));
    }

    #[test]
    fn classification_examples() {
        let c = classify_gradient_pairs(&[(0.0, 0.0), (5.0, 5.0), (5.0, -5.0), (-5.0, -5.2)], 1.0).unwrap();
        let cats: Vec<_> = c.probes.iter().map(|p| p.category).collect();
        assert_eq!(
            cats,
            [
                DimensionCategory::BelowNoise,
                DimensionCategory::PotentiallyIndependent,
                DimensionCategory::Dependent,
                DimensionCategory::PotentiallyIndependent
            ]
        );
        let f = c.fraction(DimensionCategory::PotentiallyIndependent);
        assert_eq!(f.count, 2);
        assert!(f.ci_low < 0.5 && f.ci_high > 0.5);
        assert!(classify_gradient_pairs(&[], 0.0).is_err());
    }

    #[test]
    fn histogram_bins_everything_in_range() {
        let h = histogram(&[0.0, 0.5, 0.99, 1.0, 2.0], 0.0, 1.0, 2);
        assert_eq!(h, vec![(0.0, 1), (0.5, 3)]);
    }

    proptest! {
        #[test]
        fn half_is_a_fixed_point(half in 1usize..200, ct in 0.0f64..=0.5, greedy in any::<bool>()) {
            let n = 2 * half;
            let mode = if greedy { SelectionMode::Greedy } else { SelectionMode::Markovian };
            let p = RateModelParams::from_c_tilde(ct, n, mode).unwrap();
            let t = predict_hamming(&p, half as f64, 5 * n);
            prop_assert!(t.values.iter().all(|&h| h == half as f64));
        }

        #[test]
        fn markovian_approach_is_monotone(n in 2usize..300, ct in 1e-3f64..=0.5, frac in 0.0f64..=1.0) {
            let p = RateModelParams::from_c_tilde(ct, n, SelectionMode::Markovian).unwrap();
            let t = predict_hamming(&p, frac * n as f64, 4 * n);
            let half = n as f64 / 2.0;
            for w in t.values.windows(2) {
                prop_assert!((w[1] - half).abs() <= (w[0] - half).abs() + 1e-12);
            }
        }

        #[test]
        fn mirror_symmetry(n in 2usize..300, ct in 0.0f64..=0.5, h1 in 0usize..300, greedy in any::<bool>()) {
            let h1 = (h1 % (n + 1)) as f64;
            let mode = if greedy { SelectionMode::Greedy } else { SelectionMode::Markovian };
            let p = RateModelParams::from_c_tilde(ct, n, mode).unwrap();
            let a = predict_hamming(&p, h1, 3 * n);
            let b = predict_hamming(&p, n as f64 - h1, 3 * n);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x + y - n as f64).abs() < 1e-9);
            }
        }
    }
}
