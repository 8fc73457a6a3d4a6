//! Opto-electronic recurrent network: diffractive coupling, cos² node
//! nonlinearity, and the Boolean-weighted noisy readout.
//!
//! Node `i` carries a real field `E_i = E0_i cos(phi_i)` with intensity
//! `alpha |E0_i|^2 cos^2(phi_i)`. The camera sees `alpha |sum_j W_ij E_j|^2`
//! through a complex sparse coupling `W`, and the next phase is
//! `phi_i = beta * cam_i + gamma * win_i * u + theta_i`. The detector receives
//! `x~_i = E0_i - E_i` from every node whose mirror is set, so the raw output
//! is `(sum_i w_i x~_i)^2` plus additive Gaussian noise.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learner::BooleanWeights;
use crate::scalar::{mean_std, Real};
use crate::seeds::{derived_rng, noise_stream_seed, rng_from_seed};
use crate::task::{Dataset, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReservoirParams {
    /// The network has `grid_side^2` nodes.
    pub grid_side: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta0: f64,
    pub delta_theta: f64,
    pub theta_jitter_std: f64,
    /// Gaussian illumination waist in pixels; `None` uses `0.75 * grid_side`,
    /// an infinite waist gives uniform illumination.
    pub beam_waist: Option<f64>,
    pub injection_density: f64,
    /// Injection magnitudes are uniform in `[injection_min, 1]`.
    pub injection_min: f64,
    pub kernel_radius: usize,
    pub seed: u64,
}

impl Default for ReservoirParams {
    fn default() -> Self {
        Self {
            grid_side: 31,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.6,
            theta0: std::f64::consts::FRAC_PI_8,
            delta_theta: std::f64::consts::FRAC_PI_2,
            theta_jitter_std: 1.5,
            beam_waist: None,
            injection_density: 1.0,
            injection_min: 0.0,
            kernel_radius: 2,
            seed: 1,
        }
    }
}

impl ReservoirParams {
    pub fn with_grid_side(grid_side: usize) -> Self {
        Self { grid_side, ..Self::default() }
    }

    pub fn nodes(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::Config("grid_side must be >= 2".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if !(self.theta_jitter_std >= 0.0) {
            return Err(Error::Config("theta_jitter_std must be >= 0".into()));
        }
        if !(self.injection_density > 0.0 && self.injection_density <= 1.0) {
            return Err(Error::Config("injection_density must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.injection_min) {
            return Err(Error::Config("injection_min must lie in [0, 1]".into()));
        }
        if let Some(w) = self.beam_waist {
            if !(w > 0.0) {
                return Err(Error::Config("beam_waist must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn waist(&self) -> f64 {
        self.beam_waist.unwrap_or(0.75 * self.grid_side as f64)
    }

    /// Illumination amplitudes `E0_i`, peak 1 at the grid centre.
    pub fn illumination<T: Real>(&self) -> Vec<T> {
        let side = self.grid_side;
        let centre = (side as f64 - 1.0) / 2.0;
        let waist = self.waist();
        (0..side * side)
            .map(|i| {
                let (r, c) = ((i / side) as f64 - centre, (i % side) as f64 - centre);
                let rho2 = r * r + c * c;
                T::lit(if waist.is_infinite() { 1.0 } else { (-rho2 / (waist * waist)).exp() })
            })
            .collect()
    }

    /// Offset phases: a random half of the nodes at `theta0`, the rest at
    /// `theta0 + delta_theta`, each with Gaussian jitter.
    pub fn offsets<T: Real>(&self) -> Vec<T> {
        let n = self.nodes();
        let mut rng = derived_rng(self.seed, "theta", 0);
        let mut shifted = vec![false; n];
        for s in shifted.iter_mut().take(n / 2) {
            *s = true;
        }
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            shifted.swap(i, j);
        }
        shifted
            .into_iter()
            .map(|s| {
                let jitter: f64 = rng.sample(StandardNormal);
                let base = if s { self.theta0 + self.delta_theta } else { self.theta0 };
                T::lit(base + self.theta_jitter_std * jitter)
            })
            .collect()
    }
}

/// Sparse complex coupling in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix<T> {
    pub n: usize,
    pub kernel_radius: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex<T>>,
}

impl<T: Real> CouplingMatrix<T> {
    /// Builds from per-row `(column, value)` lists; columns are sorted.
    pub fn from_rows(n: usize, kernel_radius: usize, rows: Vec<Vec<(usize, Complex<T>)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::Dimension { expected: n, got: rows.len() });
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(j, _)| *j);
            for (j, v) in row {
                if j >= n {
                    return Err(Error::Index { index: j, len: n });
                }
                cols.push(j);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n, kernel_radius, row_ptr, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| vec![(i, Complex::new(T::one(), T::zero()))]).collect();
        Self::from_rows(n, 0, rows).expect("identity rows are in range")
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let mut dense = vec![vec![Complex::new(T::zero(), T::zero()); self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }

    fn scale(&mut self, factor: T) {
        for v in &mut self.values {
            *v = *v * factor;
        }
    }
}

/// Grid-local coupling: node `i` couples to every node within Chebyshev
/// distance `kernel_radius`, with half-Gaussian magnitudes and uniform phases,
/// scaled so that the incoherent camera power matches the mean node intensity.
pub fn build_coupling<T: Real>(params: &ReservoirParams, kernel_radius: usize) -> Result<CouplingMatrix<T>> {
    params.validate()?;
    let side = params.grid_side;
    let n = side * side;
    let radius = kernel_radius as isize;
    let mut rng = derived_rng(params.seed, "coupling", kernel_radius as u64);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let (r, c) = ((i / side) as isize, (i % side) as isize);
        let mut row = Vec::new();
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= side as isize || cc >= side as isize {
                    continue;
                }
                let magnitude = rng.sample::<f64, _>(StandardNormal).abs();
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                row.push(((rr as usize) * side + cc as usize, Complex::from_polar(T::lit(magnitude), T::lit(phase))));
            }
        }
        rows.push(row);
    }
    let mut coupling = CouplingMatrix::from_rows(n, kernel_radius, rows)?;

    let e0 = params.illumination::<T>();
    let mean_node = e0.iter().map(|&e| e * e).sum::<T>();
    let mean_cam: T = (0..n).map(|i| coupling.row(i).map(|(j, w)| w.norm_sqr() * e0[j] * e0[j]).sum::<T>()).sum();
    if mean_cam > T::zero() {
        coupling.scale((mean_node / mean_cam).sqrt());
    }
    Ok(coupling)
}

/// Sparse random input mask.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionWeights<T> {
    pub weights: Vec<T>,
}

impl<T: Real> InjectionWeights<T> {
    /// Exactly `round(density * n)` (at least one) nonzero entries, uniform in
    /// `(injection_min, 1]`. A single sign keeps the drive coherent across nodes, so the
    /// offset populations rather than the mask provide both response slopes.
    pub fn build(params: &ReservoirParams) -> Self {
        let n = params.nodes();
        let active = ((params.injection_density * n as f64).round() as usize).clamp(1, n);
        let mut rng = derived_rng(params.seed, "injection", 0);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let mut weights = vec![T::zero(); n];
        for &i in &idx[..active] {
            let v = 1.0 - rng.random::<f64>();
            weights[i] = T::lit(params.injection_min + (1.0 - params.injection_min) * v);
        }
        Self { weights }
    }

    pub fn nonzero_fraction(&self) -> f64 {
        self.weights.iter().filter(|w| **w != T::zero()).count() as f64 / self.weights.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState<T> {
    pub fields: Vec<T>,
    pub intensities: Vec<T>,
    pub n: usize,
}

impl<T: Real> NetworkState<T> {
    pub fn zero(nodes: usize) -> Self {
        Self { fields: vec![T::zero(); nodes], intensities: vec![T::zero(); nodes], n: 0 }
    }
}

/// `alpha |sum_j W_ij E_j|^2` for every node.
pub fn camera_intensity<T: Real>(state: &NetworkState<T>, coupling: &CouplingMatrix<T>, alpha: T) -> Vec<T> {
    let mut out = vec![T::zero(); coupling.n];
    camera_intensity_into(&state.fields, coupling, alpha, &mut out);
    out
}

fn camera_intensity_into<T: Real>(fields: &[T], coupling: &CouplingMatrix<T>, alpha: T, out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, w) in coupling.row(i) {
            acc = acc + w * fields[j];
        }
        *o = alpha * acc.norm_sqr();
    }
}

/// Fully built network: illumination, offsets, coupling and input mask.
#[derive(Clone, Debug)]
pub struct Reservoir<T> {
    pub params: ReservoirParams,
    pub e0: Vec<T>,
    pub theta: Vec<T>,
    pub coupling: CouplingMatrix<T>,
    pub injection: InjectionWeights<T>,
}

impl<T: Real> Reservoir<T> {
    pub fn new(params: ReservoirParams) -> Result<Self> {
        params.validate()?;
        let coupling = build_coupling(&params, params.kernel_radius)?;
        Ok(Self {
            e0: params.illumination(),
            theta: params.offsets(),
            injection: InjectionWeights::build(&params),
            coupling,
            params,
        })
    }

    pub fn nodes(&self) -> usize {
        self.e0.len()
    }

    pub fn zero_state(&self) -> NetworkState<T> {
        NetworkState::zero(self.nodes())
    }

    /// One update driven by input `u_next`.
    pub fn step(&self, state: &NetworkState<T>, u_next: T) -> NetworkState<T> {
        let mut next = NetworkState::zero(self.nodes());
        let mut cam = vec![T::zero(); self.nodes()];
        self.step_into(state, u_next, &mut cam, &mut next);
        next
    }

    fn step_into(&self, state: &NetworkState<T>, u_next: T, cam: &mut [T], next: &mut NetworkState<T>) {
        let p = &self.params;
        let (alpha, beta, gamma) = (T::lit(p.alpha), T::lit(p.beta), T::lit(p.gamma));
        camera_intensity_into(&state.fields, &self.coupling, alpha, cam);
        for i in 0..self.nodes() {
            let phi = beta * cam[i] + gamma * self.injection.weights[i] * u_next + self.theta[i];
            let field = self.e0[i] * phi.cos();
            next.fields[i] = field;
            next.intensities[i] = alpha * field * field;
        }
        next.n = state.n + 1;
    }

    /// Drives the network from a zero field through one dataset window and
    /// collects the detector fields of every post-washout step.
    pub fn run(&self, dataset: &Dataset<T>, window: Window) -> StateMatrix<T> {
        let input = dataset.input(window);
        let rows = input.len().saturating_sub(dataset.washout);
        let nodes = self.nodes();
        let mut data = vec![T::zero(); rows * nodes];
        let mut state = self.zero_state();
        let mut next = self.zero_state();
        let mut cam = vec![T::zero(); nodes];
        for (step, &u) in input.iter().enumerate() {
            self.step_into(&state, u, &mut cam, &mut next);
            std::mem::swap(&mut state, &mut next);
            if step >= dataset.washout {
                let row = step - dataset.washout;
                for i in 0..nodes {
                    data[i * rows + row] = self.e0[i] - state.fields[i];
                }
            }
        }
        StateMatrix { rows, cols: nodes, data }
    }

    /// Largest state change after `steps` autonomous updates from a seeded
    /// random state; small values indicate a stable steady state.
    pub fn autonomous_residual(&self, steps: usize, seed: u64) -> T {
        let mut rng = rng_from_seed(seed);
        let mut state = self.zero_state();
        for (f, &e) in state.fields.iter_mut().zip(&self.e0) {
            *f = e * T::lit(2.0 * rng.random::<f64>() - 1.0);
        }
        let mut prev = state.clone();
        for _ in 0..steps {
            prev = state;
            state = self.step(&prev, T::zero());
        }
        state.fields.iter().zip(&prev.fields).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max)
    }
}

/// Autonomous stability of the network over a range of feedback gains.
pub fn stability_scan<T: Real>(params: &ReservoirParams, betas: &[f64], steps: usize) -> Result<Vec<(f64, f64)>> {
    betas
        .iter()
        .map(|&beta| {
            let reservoir = Reservoir::<T>::new(ReservoirParams { beta, ..params.clone() })?;
            Ok((beta, reservoir.autonomous_residual(steps, params.seed).as_f64()))
        })
        .collect()
}

/// Detector fields `x~_i(n)`, stored column-major so one node's time course is
/// contiguous. Never modified once built.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> StateMatrix<T> {
    pub fn from_columns(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite state entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn column(&self, node: usize) -> &[T] {
        &self.data[node * self.rows..(node + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, row: usize, node: usize) -> T {
        self.data[node * self.rows + row]
    }

    pub fn as_column_major(&self) -> &[T] {
        &self.data
    }

    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.cols as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.as_f64().to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_out: f64,
    pub noise_seed: u64,
}

impl NoiseParams {
    pub fn silent() -> Self {
        Self { sigma_out: 0.0, noise_seed: 0 }
    }
}

/// Identifies one readout evaluation. Each key owns an independent noise
/// stream; `slot` separates several evaluations within one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub epoch: u64,
    pub slot: u32,
}

impl NoiseKey {
    pub const fn new(epoch: u64, slot: u32) -> Self {
        Self { epoch, slot }
    }
}

/// Adds `N(0, sigma_out^2)` noise keyed by `(noise_seed, key)` to `y`.
pub fn add_noise<T: Real>(y: &mut [T], noise: &NoiseParams, key: NoiseKey) {
    if noise.sigma_out == 0.0 {
        return;
    }
    let mut rng = rng_from_seed(noise_stream_seed(noise.noise_seed, key.epoch, key.slot));
    let sigma = noise.sigma_out;
    for v in y.iter_mut() {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *v = *v + T::lit(sigma * xi);
    }
}

/// Inner sums `s(n) = sum_i w_i x~_i(n)`.
pub fn weighted_sums<T: Real>(states: &StateMatrix<T>, weights: &BooleanWeights) -> Result<Vec<T>> {
    if weights.len() != states.cols() {
        return Err(Error::Dimension { expected: states.cols(), got: weights.len() });
    }
    let mut sums = vec![T::zero(); states.rows()];
    for node in weights.ones() {
        for (s, &x) in sums.iter_mut().zip(states.column(node)) {
            *s = *s + x;
        }
    }
    Ok(sums)
}

/// Raw output `y(n) = s(n)^2 + xi(n)` for the evaluation `epoch`.
pub fn readout<T: Real>(
    states: &StateMatrix<T>,
    weights: &BooleanWeights,
    noise: &NoiseParams,
    epoch: u64,
) -> Result<Vec<T>> {
    readout_keyed(states, weights, noise, NoiseKey::new(epoch, 0))
}

pub fn readout_keyed<T: Real>(
    states: &StateMatrix<T>,
    weights: &BooleanWeights,
    noise: &NoiseParams,
    key: NoiseKey,
) -> Result<Vec<T>> {
    let mut y: Vec<T> = weighted_sums(states, weights)?.into_iter().map(|s| s * s).collect();
    add_noise(&mut y, noise, key);
    Ok(y)
}

/// Zero-mean, unit-variance output over the evaluation window.
pub fn normalize_output<T: Real>(y: &[T]) -> Result<Vec<T>> {
    let (mean, std) = mean_std(y);
    if !(std > T::zero()) || !std.is_finite() || std <= T::lit(1e-12) * mean.abs() {
        return Err(Error::DegenerateOutput);
    }
    Ok(y.iter().map(|&v| (v - mean) / std).collect())
}

/// Error reported for a zero-variance output.
pub const DEGENERATE_OUTPUT_ERROR: f64 = 1.0;

/// Incremental error evaluator over a fixed state matrix and target.
///
/// Holds the inner sums of one configuration; a single-bit flip changes every
/// sum by `+-x~_l(n)`, so a proposal costs `O(rows)` instead of
/// `O(rows * ones)`.
#[derive(Clone, Debug)]
pub struct ReadoutEvaluator<'a, T> {
    states: &'a StateMatrix<T>,
    target: &'a [T],
    noise: NoiseParams,
    scratch: Vec<T>,
}

impl<'a, T: Real> ReadoutEvaluator<'a, T> {
    pub fn new(states: &'a StateMatrix<T>, target: &'a [T], noise: NoiseParams) -> Result<Self> {
        if target.len() != states.rows() {
            return Err(Error::Dimension { expected: states.rows(), got: target.len() });
        }
        Ok(Self { states, target, noise, scratch: vec![T::zero(); states.rows()] })
    }

    pub fn states(&self) -> &StateMatrix<T> {
        self.states
    }

    pub fn noise(&self) -> &NoiseParams {
        &self.noise
    }

    pub fn sums(&self, weights: &BooleanWeights) -> Result<Vec<T>> {
        weighted_sums(self.states, weights)
    }

    /// Sums after flipping node `l` of a configuration whose bit was `was_set`.
    pub fn flipped_sums_into(&self, sums: &[T], l: usize, was_set: bool, out: &mut [T]) {
        let column = self.states.column(l);
        if was_set {
            for ((o, &s), &x) in out.iter_mut().zip(sums).zip(column) {
                *o = s - x;
            }
        } else {
            for ((o, &s), &x) in out.iter_mut().zip(sums).zip(column) {
                *o = s + x;
            }
        }
    }

    pub fn apply_flip(&self, sums: &mut [T], l: usize, was_set: bool) {
        let column = self.states.column(l);
        for (s, &x) in sums.iter_mut().zip(column) {
            *s = if was_set { *s - x } else { *s + x };
        }
    }

    /// Error of the configuration with inner sums `sums`, noise drawn for `key`.
    pub fn error(&mut self, sums: &[T], key: NoiseKey) -> T {
        for (y, &s) in self.scratch.iter_mut().zip(sums) {
            *y = s * s;
        }
        add_noise(&mut self.scratch, &self.noise, key);
        normalized_error(&self.scratch, self.target)
    }

    /// Noise-free error of the configuration with inner sums `sums`.
    pub fn clean_error(&mut self, sums: &[T]) -> T {
        for (y, &s) in self.scratch.iter_mut().zip(sums) {
            *y = s * s;
        }
        normalized_error(&self.scratch, self.target)
    }

    /// Error of an explicit raw output sequence.
    pub fn error_of_output(&self, y: &[T]) -> T {
        normalized_error(y, self.target)
    }
}

/// Normalized mean square error of raw output `y` against `target`; a
/// degenerate output scores [`DEGENERATE_OUTPUT_ERROR`].
pub fn normalized_error<T: Real>(y: &[T], target: &[T]) -> T {
    let (mean, std) = mean_std(y);
    if !(std > T::zero()) || !std.is_finite() || std <= T::lit(1e-12) * mean.abs() {
        return T::lit(DEGENERATE_OUTPUT_ERROR);
    }
    let inv = T::one() / std;
    let n = T::from_usize_lossy(y.len());
    y.iter()
        .zip(target)
        .map(|(&v, &t)| {
            let d = t - (v - mean) * inv;
            d * d
        })
        .sum::<T>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{generate_mackey_glass, make_dataset, normalize, MackeyGlassParams};
    use approx::assert_relative_eq;

    fn small_params() -> ReservoirParams {
        ReservoirParams { grid_side: 3, seed: 9, ..Default::default() }
    }

    #[test]
    fn coupling_radius_zero_is_diagonal() {
        let c = build_coupling::<f64>(&ReservoirParams::with_grid_side(5), 0).unwrap();
        for i in 0..25 {
            let row: Vec<_> = c.row(i).collect();
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].0, i);
        }
    }

    #[test]
    fn coupling_neighbourhood_counts() {
        let c = build_coupling::<f64>(&ReservoirParams::with_grid_side(5), 1).unwrap();
        assert_eq!(c.row_nnz(2 * 5 + 2), 9);
        assert_eq!(c.row_nnz(0), 4);
        assert_eq!(c.row_nnz(2), 6);
        let c2 = build_coupling::<f64>(&ReservoirParams::with_grid_side(7), 2).unwrap();
        assert_eq!(c2.row_nnz(3 * 7 + 3), 25);
        for i in 0..49 {
            for (j, _) in c2.row(i) {
                let (ri, ci, rj, cj) = (i / 7, i % 7, j / 7, j % 7);
                assert!(ri.abs_diff(rj).max(ci.abs_diff(cj)) <= 2);
            }
        }
    }

    #[test]
    fn coupling_is_seeded() {
        let p = ReservoirParams::with_grid_side(6);
        assert_eq!(build_coupling::<f64>(&p, 2).unwrap(), build_coupling::<f64>(&p, 2).unwrap());
        let q = ReservoirParams { seed: 2, ..p.clone() };
        assert_ne!(build_coupling::<f64>(&p, 2).unwrap(), build_coupling::<f64>(&q, 2).unwrap());
    }

    #[test]
    fn camera_zero_fields() {
        let c = build_coupling::<f64>(&small_params(), 1).unwrap();
        let state = NetworkState::zero(9);
        assert!(camera_intensity(&state, &c, 1.3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn camera_identity_coupling() {
        let c = CouplingMatrix::<f64>::identity(4);
        let state = NetworkState { fields: vec![0.5, -1.0, 2.0, 0.0], intensities: vec![0.0; 4], n: 0 };
        let cam = camera_intensity(&state, &c, 2.0);
        assert_eq!(cam, vec![0.5, 2.0, 8.0, 0.0]);
    }

    #[test]
    fn camera_matches_dense_oracle() {
        let c = build_coupling::<f64>(&small_params(), 1).unwrap();
        let mut rng = rng_from_seed(4);
        let fields: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let state = NetworkState { fields: fields.clone(), intensities: vec![0.0; 9], n: 0 };
        let cam = camera_intensity(&state, &c, 0.7);
        let dense = c.to_dense();
        for i in 0..9 {
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..9 {
                re += dense[i][j].re * fields[j];
                im += dense[i][j].im * fields[j];
            }
            assert_relative_eq!(cam[i], 0.7 * (re * re + im * im), epsilon = 1e-12);
        }
    }

    #[test]
    fn step_without_feedback_or_input_sits_at_offsets() {
        let p = ReservoirParams { beta: 0.0, gamma: 0.0, ..small_params() };
        let r = Reservoir::<f64>::new(p).unwrap();
        let mut s = r.zero_state();
        for n in 0..5 {
            s = r.step(&s, n as f64);
            for i in 0..9 {
                let expect = r.e0[i] * r.e0[i] * r.theta[i].cos().powi(2);
                assert_relative_eq!(s.intensities[i], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn step_input_at_quarter_period_darkens() {
        let p = ReservoirParams {
            beta: 0.0,
            gamma: 1.0,
            theta0: 0.0,
            delta_theta: 0.0,
            theta_jitter_std: 0.0,
            ..small_params()
        };
        let mut r = Reservoir::<f64>::new(p).unwrap();
        r.injection.weights = vec![1.0; 9];
        let s = r.step(&r.zero_state(), std::f64::consts::FRAC_PI_2);
        assert!(s.intensities.iter().all(|v| v.abs() < 1e-30));
        assert_eq!(s.n, 1);
    }

    #[test]
    fn intensities_stay_in_range() {
        let r = Reservoir::<f64>::new(ReservoirParams::with_grid_side(6)).unwrap();
        let mut rng = rng_from_seed(8);
        let mut s = r.zero_state();
        for _ in 0..10_000 {
            s = r.step(&s, rng.sample(StandardNormal));
            for i in 0..36 {
                assert!(s.intensities[i] >= 0.0 && s.intensities[i] <= r.e0[i] * r.e0[i] + 1e-15);
                assert_relative_eq!(s.intensities[i], s.fields[i] * s.fields[i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn injection_density_fraction() {
        let p = ReservoirParams { injection_density: 0.25, ..ReservoirParams::with_grid_side(8) };
        let w = InjectionWeights::<f64>::build(&p);
        assert_relative_eq!(w.nonzero_fraction(), 0.25);
    }

    #[test]
    fn default_network_is_autonomously_stable() {
        let r = Reservoir::<f64>::new(ReservoirParams::with_grid_side(16)).unwrap();
        assert!(r.autonomous_residual(400, 3) < 1e-6);
    }

    fn dataset() -> Dataset<f64> {
        let s = normalize(&generate_mackey_glass::<f64>(&MackeyGlassParams::default(), 600, 1).unwrap()).unwrap();
        make_dataset(&s, 30, 200, 300).unwrap()
    }

    #[test]
    fn run_shapes_and_determinism() {
        let d = dataset();
        let r = Reservoir::<f64>::new(ReservoirParams::with_grid_side(5)).unwrap();
        let m = r.run(&d, Window::Train);
        assert_eq!((m.rows(), m.cols()), (170, 25));
        assert_eq!(r.run(&d, Window::Test).rows(), 270);
        assert_eq!(m, r.run(&d, Window::Train));
        // x~ = E0 - E lies in [0, 2 E0]
        for i in 0..25 {
            assert!(m.column(i).iter().all(|&x| x >= -1e-15 && x <= 2.0 * r.e0[i] + 1e-15));
        }
    }

    #[test]
    fn readout_trivial_cases() {
        let d = dataset();
        let r = Reservoir::<f64>::new(ReservoirParams::with_grid_side(4)).unwrap();
        let m = r.run(&d, Window::Train);
        let zero = BooleanWeights::zeros(16);
        assert!(readout(&m, &zero, &NoiseParams::silent(), 0).unwrap().iter().all(|v| *v == 0.0));
        let mut one = BooleanWeights::zeros(16);
        one.set(5, true);
        let y = readout(&m, &one, &NoiseParams::silent(), 3).unwrap();
        for (n, v) in y.iter().enumerate() {
            assert_eq!(*v, m.get(n, 5) * m.get(n, 5));
        }
        assert!(matches!(readout(&m, &BooleanWeights::zeros(3), &NoiseParams::silent(), 0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn readout_noise_is_fresh_per_epoch() {
        let m = StateMatrix::from_columns(10_000, 1, vec![0.5f64; 10_000]).unwrap();
        let w = BooleanWeights::ones_vec(1);
        let noise = NoiseParams { sigma_out: 0.3, noise_seed: 5 };
        let a = readout(&m, &w, &noise, 1).unwrap();
        let b = readout(&m, &w, &noise, 2).unwrap();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let (mean, std) = mean_std(&diff);
        // difference of two independent N(0, s^2) draws: std s*sqrt(2), SE of std ~ 0.7%
        assert!(mean.abs() < 4.0 * 0.3 * 2f64.sqrt() / 100.0);
        assert_relative_eq!(std, 0.3 * 2f64.sqrt(), max_relative = 0.03);
        assert_eq!(a, readout(&m, &w, &noise, 1).unwrap());
    }

    #[test]
    fn normalize_output_cases() {
        let target = vec![-1.5, 0.2, 0.9, 0.4];
        let tn = normalize_output(&target).unwrap();
        assert_eq!(normalize_output(&tn.iter().map(|t| 3.0 * t + 7.0).collect::<Vec<_>>()).unwrap().len(), 4);
        for (a, b) in normalize_output(&tn.iter().map(|t| 3.0 * t + 7.0).collect::<Vec<_>>()).unwrap().iter().zip(&tn) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        assert_relative_eq!(normalized_error(&tn, &tn), 0.0, epsilon = 1e-24);
        assert!(matches!(normalize_output(&[2.0, 2.0, 2.0]), Err(Error::DegenerateOutput)));
        assert_eq!(normalized_error(&[2.0, 2.0, 2.0], &[1.0, 0.0, -1.0]), DEGENERATE_OUTPUT_ERROR);
    }

    #[test]
    fn incremental_flip_matches_full() {
        let d = dataset();
        let r = Reservoir::<f64>::new(ReservoirParams::with_grid_side(5)).unwrap();
        let m = r.run(&d, Window::Train);
        let target = d.error_target(Window::Train);
        let mut eval = ReadoutEvaluator::new(&m, target, NoiseParams::silent()).unwrap();
        let mut w = BooleanWeights::random(25, 1);
        let mut sums = eval.sums(&w).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..500 {
            let l = rng.random_range(0..25);
            eval.apply_flip(&mut sums, l, w.get(l));
            w.flip(l);
            let full = eval.sums(&w).unwrap();
            for (a, b) in sums.iter().zip(&full) {
                assert_relative_eq!(*a, *b, max_relative = 1e-12, epsilon = 1e-12);
            }
            let e_inc = eval.clean_error(&sums);
            let e_full = normalized_error(&readout(&m, &w, &NoiseParams::silent(), 0).unwrap(), target);
            assert_relative_eq!(e_inc, e_full, max_relative = 1e-10, epsilon = 1e-14);
        }
    }
}
