//! Mackey-Glass one-step-ahead prediction task.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean_std, Real};
use crate::seeds::rng_from_seed;

/// Parameters of `dx/dt = b x(t-tau) / (1 + x(t-tau)^n) - g x(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MackeyGlassParams {
    pub feedback_strength: f64,
    pub decay: f64,
    pub exponent: f64,
    pub delay: f64,
    pub dt: f64,
    /// Integrator steps per emitted sample.
    pub subsample: usize,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self { feedback_strength: 0.2, decay: 0.1, exponent: 10.0, delay: 17.0, dt: 0.1, subsample: 30 }
    }
}

impl MackeyGlassParams {
    pub fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("mackey-glass dt must be positive".into()));
        }
        if !(self.delay > 0.0) || !self.delay.is_finite() {
            return Err(Error::Config("mackey-glass delay must be positive".into()));
        }
        if self.subsample == 0 {
            return Err(Error::Config("mackey-glass subsample must be >= 1".into()));
        }
        let ratio = self.delay / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Config(format!(
                "delay/dt = {ratio} is not a positive integer; the history buffer needs grid alignment"
            )));
        }
        Ok(steps as usize)
    }

    /// Nonzero fixed point `x*` with `x*^n = feedback/decay - 1`.
    pub fn equilibrium(&self) -> f64 {
        (self.feedback_strength / self.decay - 1.0).powf(1.0 / self.exponent)
    }

    /// Integrator steps discarded before the first emitted sample (10 delays).
    pub fn transient_steps(&self) -> usize {
        (10.0 * self.delay / self.dt).round() as usize
    }
}

/// Largest Lyapunov exponent of the default sequence, in inverse samples, as
/// reported for the hardware experiment. Metadata only.
pub const REPORTED_LYAPUNOV_PER_SAMPLE: f64 = 3e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub values: Vec<T>,
    /// Time between successive samples.
    pub dt_effective: f64,
}

impl<T: Real> TimeSeries<T> {
    pub fn new(values: Vec<T>, dt_effective: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Generation("empty series".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Generation("non-finite sample".into()));
        }
        Ok(Self { values, dt_effective })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Delay-differential integrator state: fixed-step RK4 over a ring buffer of
/// the last `delay/dt + 1` grid values, half-step delayed values by linear
/// interpolation.
struct DelayIntegrator<T> {
    beta: T,
    gamma: T,
    exponent: T,
    dt: T,
    history: Vec<T>,
    head: usize,
    lag: usize,
}

impl<T: Real> DelayIntegrator<T> {
    fn new(params: &MackeyGlassParams, lag: usize, history: Vec<T>) -> Self {
        debug_assert_eq!(history.len(), lag + 1);
        Self {
            beta: T::lit(params.feedback_strength),
            gamma: T::lit(params.decay),
            exponent: T::lit(params.exponent),
            dt: T::lit(params.dt),
            head: lag,
            history,
            lag,
        }
    }

    #[inline]
    fn rhs(&self, x: T, delayed: T) -> T {
        self.beta * delayed / (T::one() + delayed.abs().powf(self.exponent)) - self.gamma * x
    }

    #[inline]
    fn at(&self, back: usize) -> T {
        let len = self.history.len();
        self.history[(self.head + len - back) % len]
    }

    /// Advances one step of `dt`; returns the new value.
    fn step(&mut self) -> T {
        let half = T::lit(0.5);
        let x = self.at(0);
        let d0 = self.at(self.lag);
        let d1 = self.at(self.lag - 1);
        let dm = half * (d0 + d1);
        let h = self.dt;
        let k1 = self.rhs(x, d0);
        let k2 = self.rhs(x + half * h * k1, dm);
        let k3 = self.rhs(x + half * h * k2, dm);
        let k4 = self.rhs(x + h * k3, d1);
        let next = x + h / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        self.head = (self.head + 1) % self.history.len();
        self.history[self.head] = next;
        next
    }
}

/// Integrates from an explicit history of `delay/dt + 1` grid values (oldest
/// first), discards the transient, then emits `length` subsampled values.
pub fn generate_mackey_glass_from_history<T: Real>(
    params: &MackeyGlassParams,
    history: &[T],
    length: usize,
) -> Result<TimeSeries<T>> {
    let lag = params.validate()?;
    if length == 0 {
        return Err(Error::Generation("length must be positive".into()));
    }
    if history.len() != lag + 1 {
        return Err(Error::Dimension { expected: lag + 1, got: history.len() });
    }
    let mut integrator = DelayIntegrator::new(params, lag, history.to_vec());
    for _ in 0..params.transient_steps() {
        integrator.step();
    }
    let mut values = Vec::with_capacity(length);
    while values.len() < length {
        let mut x = T::zero();
        for _ in 0..params.subsample {
            x = integrator.step();
        }
        if !x.is_finite() {
            return Err(Error::Generation(format!("integrator overflow at sample {}", values.len())));
        }
        values.push(x);
    }
    TimeSeries::new(values, params.dt * params.subsample as f64)
}

/// Seeded history: constant 1.2 plus a uniform perturbation of amplitude 0.05.
pub fn seeded_history<T: Real>(params: &MackeyGlassParams, seed: u64) -> Result<Vec<T>> {
    let lag = params.validate()?;
    let mut rng = rng_from_seed(seed);
    Ok((0..=lag).map(|_| T::lit(1.2 + 0.05 * (2.0 * rng.random::<f64>() - 1.0))).collect())
}

pub fn generate_mackey_glass<T: Real>(params: &MackeyGlassParams, length: usize, seed: u64) -> Result<TimeSeries<T>> {
    let history = seeded_history(params, seed)?;
    generate_mackey_glass_from_history(params, &history, length)
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
pub fn normalize<T: Real>(series: &TimeSeries<T>) -> Result<TimeSeries<T>> {
    let (mean, std) = mean_std(&series.values);
    if !(std > T::zero()) || std <= T::epsilon() * mean.abs() {
        return Err(Error::DegenerateSeries);
    }
    let values = series.values.iter().map(|&v| (v - mean) / std).collect();
    Ok(TimeSeries { values, dt_effective: series.dt_effective })
}

/// Train/test split of a normalized series for one-step-ahead prediction.
///
/// `u[i]` drives the network at step `i` and `target[i] = series[i + 1]`.
/// Training occupies `0..train_len`, testing `train_len..train_len + test_len`.
/// Each window is simulated from a fresh network state, so its first
/// `washout` steps are dropped before errors are computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub u: Vec<T>,
    pub target: Vec<T>,
    pub washout: usize,
    pub train_len: usize,
    pub test_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Train,
    Test,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Train => "train",
            Window::Test => "test",
        }
    }
}

pub fn make_dataset<T: Real>(
    series: &TimeSeries<T>,
    washout: usize,
    train_len: usize,
    test_len: usize,
) -> Result<Dataset<T>> {
    let needed = train_len + test_len + 1;
    if series.len() < needed {
        return Err(Error::Sizing(format!(
            "series of length {} is too short for {train_len} train + {test_len} test points plus the target shift",
            series.len()
        )));
    }
    if washout > train_len {
        return Err(Error::Sizing(format!("washout {washout} exceeds the training window {train_len}")));
    }
    let total = train_len + test_len;
    Ok(Dataset {
        u: series.values[..total].to_vec(),
        target: series.values[1..=total].to_vec(),
        washout,
        train_len,
        test_len,
    })
}

impl<T: Real> Dataset<T> {
    pub fn window(&self, window: Window) -> std::ops::Range<usize> {
        match window {
            Window::Train => 0..self.train_len,
            Window::Test => self.train_len..self.train_len + self.test_len,
        }
    }

    pub fn input(&self, window: Window) -> &[T] {
        &self.u[self.window(window)]
    }

    /// Targets of the steps that enter the error (washout removed).
    pub fn error_target(&self, window: Window) -> &[T] {
        let range = self.window(window);
        let start = (range.start + self.washout).min(range.end);
        &self.target[start..range.end]
    }

    /// Number of steps entering the training error.
    pub fn usable_train_steps(&self) -> usize {
        self.train_len - self.washout
    }
}

/// Series parameters and window sizes of one prediction task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub mackey_glass: MackeyGlassParams,
    pub washout: usize,
    pub train_len: usize,
    pub test_len: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self { mackey_glass: MackeyGlassParams::default(), washout: 30, train_len: 200, test_len: 9000 }
    }
}

impl TaskConfig {
    /// Generates exactly as many samples as the split needs, normalizes them
    /// as a whole and splits.
    pub fn build<T: Real>(&self, seed: u64) -> Result<(TimeSeries<T>, Dataset<T>)> {
        let series = normalize(&generate_mackey_glass::<T>(&self.mackey_glass, self.train_len + self.test_len + 1, seed)?)?;
        let dataset = make_dataset(&series, self.washout, self.train_len, self.test_len)?;
        Ok((series, dataset))
    }
}
