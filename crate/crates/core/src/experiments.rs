//! End-to-end experiments: ensemble learning, master-slave divergence,
//! separated starts and inverted-path gradient probes.
//!
//! Every experiment returns its raw material (traces, Hamming counts, minima,
//! path errors) together with a [`Summary`] computed from that material alone,
//! so a run directory can be re-analysed without re-simulating.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    block_linear_fits, classify_gradient_pairs, evaluation_noise_std, fit_exponential, fit_rate_model, hamming,
    pairwise_minima_stats, shuffled, CategoryFraction, DimensionCategory, DimensionClassification, ExponentialFit,
    HammingTrace, MinimaStats, RateModelFit,
};
use crate::error::{Error, Result};
use crate::learner::{
    BooleanWeights, DeltaCompare, InitialWeights, LearningTrace, Minimizer, MinimizerConfig, SelectionMode, System,
};
use crate::reservoir::{weighted_sums, NoiseKey, Reservoir, ReservoirParams, StateMatrix};
use crate::scalar::{mean_std, Real};
use crate::seeds::derive_seed;
use crate::stats::{linear_fit, pearson, sample_mean_std};
use crate::task::{Dataset, TaskConfig, Window};

/// A built network with its dataset and the detector fields of both windows.
#[derive(Clone, Debug)]
pub struct Simulation<T> {
    pub task: TaskConfig,
    pub series_seed: u64,
    pub reservoir: Reservoir<T>,
    pub dataset: Dataset<T>,
    pub train: StateMatrix<T>,
    pub test: StateMatrix<T>,
}

impl<T: Real> Simulation<T> {
    pub fn build(task: &TaskConfig, series_seed: u64, params: ReservoirParams) -> Result<Self> {
        let (_, dataset) = task.build::<T>(series_seed)?;
        let reservoir = Reservoir::new(params)?;
        let train = reservoir.run(&dataset, Window::Train);
        let test = reservoir.run(&dataset, Window::Test);
        Ok(Self { task: *task, series_seed, reservoir, dataset, train, test })
    }

    /// Reuses previously simulated state matrices.
    pub fn with_states(
        task: &TaskConfig,
        series_seed: u64,
        params: ReservoirParams,
        train: StateMatrix<T>,
        test: StateMatrix<T>,
    ) -> Result<Self> {
        let (_, dataset) = task.build::<T>(series_seed)?;
        let reservoir = Reservoir::new(params)?;
        let n = reservoir.nodes();
        for (m, w) in [(&train, Window::Train), (&test, Window::Test)] {
            let rows = dataset.error_target(w).len();
            if m.rows() != rows {
                return Err(Error::Dimension { expected: rows, got: m.rows() });
            }
            if m.cols() != n {
                return Err(Error::Dimension { expected: n, got: m.cols() });
            }
        }
        Ok(Self { task: *task, series_seed, reservoir, dataset, train, test })
    }

    pub fn nodes(&self) -> usize {
        self.reservoir.nodes()
    }

    pub fn train_system(&self, sigma_out: f64) -> Result<System<'_, T>> {
        System::new(&self.train, self.dataset.error_target(Window::Train), sigma_out)
    }

    pub fn test_system(&self, sigma_out: f64) -> Result<System<'_, T>> {
        System::new(&self.test, self.dataset.error_target(Window::Test), sigma_out)
    }

    /// Std of the noise-free raw training output of `weights`.
    pub fn output_std(&self, weights: &BooleanWeights) -> Result<f64> {
        let y: Vec<T> = weighted_sums(&self.train, weights)?.into_iter().map(|s| s * s).collect();
        Ok(mean_std(&y).1.as_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ensemble,
    MasterSlave,
    SeparatedPair,
    InvertedPaths,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] =
        [ExperimentKind::Ensemble, ExperimentKind::MasterSlave, ExperimentKind::SeparatedPair, ExperimentKind::InvertedPaths];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::MasterSlave => "master-slave",
            ExperimentKind::SeparatedPair => "separated-pair",
            ExperimentKind::InvertedPaths => "inverted-paths",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// Fully resolved settings of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Ensemble size.
    pub minimizers: usize,
    /// Slaves following each master.
    pub slaves: usize,
    /// Independent repetitions of master-slave and separated-pair protocols.
    pub runs: usize,
    /// Ensemble members share one initial configuration.
    pub shared_initial: bool,
    /// Ensemble members share one selector stream.
    pub shared_selector: bool,
    /// Initial separation of a separated pair.
    pub h1: usize,
    pub epochs: usize,
    pub mode: SelectionMode,
    pub compare: DeltaCompare,
    /// Absolute output noise std.
    pub sigma_out: f64,
    pub master_seed: u64,
    /// Repetitions used to estimate evaluation noise.
    pub probe_reps: usize,
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, nodes: usize, sigma_out: f64, master_seed: u64) -> Self {
        Self {
            kind,
            minimizers: 20,
            slaves: 2,
            runs: 10,
            shared_initial: true,
            shared_selector: false,
            h1: 100.min(nodes),
            epochs: 4 * nodes,
            mode: SelectionMode::Greedy,
            compare: DeltaCompare::Remeasure,
            sigma_out,
            master_seed,
            probe_reps: 200,
            parallel: true,
        }
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.minimizers == 0 {
            return Err(Error::Config("experiment needs at least one minimizer".into()));
        }
        if self.kind == ExperimentKind::MasterSlave && self.slaves == 0 {
            return Err(Error::Config("master-slave needs at least one slave".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("experiment needs at least one run".into()));
        }
        if self.h1 > nodes || (self.kind == ExperimentKind::SeparatedPair && self.h1 == 0) {
            return Err(Error::Config(format!("h1 = {} must lie in (0, {nodes}]", self.h1)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch budget must be >= 1".into()));
        }
        if !(self.sigma_out >= 0.0) {
            return Err(Error::Config("sigma_out must be >= 0".into()));
        }
        Ok(())
    }

    pub fn seed(&self, stream: &str, index: u64) -> u64 {
        derive_seed(self.master_seed, stream, index)
    }

    fn minimizer(&self, index: u64, initial: BooleanWeights) -> MinimizerConfig {
        let selector = if self.shared_selector { 0 } else { index };
        MinimizerConfig {
            epochs: self.epochs,
            mode: self.mode,
            selector_seed: self.seed("selector", selector),
            noise_seed: self.seed("noise", index),
            initial: InitialWeights::Given(initial),
            compare: self.compare,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTrace<T> {
    pub label: String,
    pub trace: LearningTrace<T>,
}

/// `H(k)` between two minimizers of one run, `counts[0]` being `H(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairHamming {
    pub run: usize,
    pub a: String,
    pub b: String,
    pub counts: Vec<usize>,
}

impl PairHamming {
    /// Pair label without the run, e.g. `master-slave1`.
    pub fn kind(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimumRecord {
    pub label: String,
    #[serde(with = "bitstring")]
    pub weights: BooleanWeights,
    /// Noise-free training error of the final weights.
    pub train_error: f64,
    /// Noise-free test error of the final weights.
    pub test_error: f64,
    pub eps_min: f64,
    pub k_min: u64,
}

mod bitstring {
    use crate::learner::BooleanWeights;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &BooleanWeights, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&w.to_bitstring())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BooleanWeights, D::Error> {
        BooleanWeights::parse_bitstring(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Errors measured along both inverted paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    /// Mirror flipped at each step.
    pub order: Vec<usize>,
    /// `eps_a[0]` at `M_a`, `eps_a[j]` after `j` flips towards `M_b`.
    pub eps_a: Vec<f64>,
    pub eps_b: Vec<f64>,
    pub endpoints_exact: bool,
    /// One standard deviation of the noise on a gradient difference.
    pub noise_scale: f64,
}

impl PathRecord {
    /// Per-dimension gradients oriented so that a separable landscape gives
    /// `grad_a == grad_b`: path a flips mirror `l` from its `M_a` value to its
    /// `M_b` value, path b the other way round, so the sign of b is reversed.
    pub fn gradients(&self) -> Vec<(f64, f64)> {
        (1..self.eps_a.len())
            .map(|j| (self.eps_a[j] - self.eps_a[j - 1], self.eps_b[j - 1] - self.eps_b[j]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<T> {
    pub config: ExperimentConfig,
    pub nodes: usize,
    pub traces: Vec<NamedTrace<T>>,
    pub hamming: Vec<PairHamming>,
    pub minima: Vec<MinimumRecord>,
    pub paths: Option<PathRecord>,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub nodes: usize,
    pub epochs: usize,
    pub learning: Option<LearningSummary>,
    pub divergence: Option<DivergenceSummary>,
    pub inverted_paths: Option<PathSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    pub minimizers: usize,
    /// Mean accepted-configuration error at `k = 0..=K`.
    pub mean_error: Vec<f64>,
    pub exponential: ExponentialFit,
    pub k_min_mean: f64,
    pub k_min_std: f64,
    pub eps_min_mean: f64,
    /// `max(eps_min) / min(eps_min)` across minimizers.
    pub eps_min_spread: f64,
    pub train_error_mean: f64,
    pub test_error_mean: f64,
    /// `|test - train| / train` of the mean noise-free errors.
    pub generalization_gap: f64,
    pub minima: Option<MinimaStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSlope {
    pub pair: String,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub mode: SelectionMode,
    pub pairs: usize,
    /// Mean `H(k)` over all pairs and runs, `k = 1..=K+1`.
    pub mean_hamming: Vec<f64>,
    pub fit: RateModelFit,
    pub predicted: Vec<f64>,
    /// `H(K+1) / (N/2)`.
    pub final_over_half: f64,
    /// Largest `|observed - predicted| / predicted` over epochs with `predicted >= 1`.
    pub max_relative_deviation: f64,
    /// Slope of each pair type over the first `N/2` epochs, averaged over runs.
    pub early_slopes: Vec<PairSlope>,
    /// `(slope, R^2)` of the first blocks of `N` epochs.
    pub block_fits: Vec<(f64, f64)>,
    /// Mean Pearson correlation between the accepted-error traces of the
    /// first minimizer of each run and the others; `None` if undefined.
    pub error_correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub differing: usize,
    pub endpoints_exact: bool,
    pub noise_scale: f64,
    pub below_noise: CategoryFraction,
    pub potentially_independent: CategoryFraction,
    pub dependent: CategoryFraction,
    pub classification: DimensionClassification,
}

pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(a, b)
}

fn initial_weights(config: &ExperimentConfig, nodes: usize, index: u64) -> BooleanWeights {
    BooleanWeights::random(nodes, config.seed("initial", index))
}

fn minimum_record<T: Real>(sim: &Simulation<T>, label: String, trace: &LearningTrace<T>) -> Result<MinimumRecord> {
    Ok(MinimumRecord {
        label,
        weights: trace.final_weights.clone(),
        train_error: sim.train_system(0.0)?.clean_error(&trace.final_weights)?.as_f64(),
        test_error: sim.test_system(0.0)?.clean_error(&trace.final_weights)?.as_f64(),
        eps_min: trace.eps_min.as_f64(),
        k_min: trace.k_min,
    })
}

fn map_maybe_parallel<I, R, F>(parallel: bool, items: Vec<I>, f: F) -> Result<Vec<R>>
where
    I: Send,
    R: Send,
    F: Fn(I) -> Result<R> + Sync + Send,
{
    if parallel {
        items.into_par_iter().map(f).collect()
    } else {
        items.into_iter().map(f).collect()
    }
}

/// `M` independent minimizers, from one shared or from individual initial
/// configurations.
pub fn run_ensemble<T: Real>(sim: &Simulation<T>, config: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    let n = sim.nodes();
    config.validate(n)?;
    let system = sim.train_system(config.sigma_out)?;
    let shared = initial_weights(config, n, 0);
    let indices: Vec<u64> = (0..config.minimizers as u64).collect();
    let results = map_maybe_parallel(config.parallel, indices, |i| {
        let initial = if config.shared_initial { shared.clone() } else { initial_weights(config, n, i) };
        let mut minimizer = Minimizer::new(&system, config.minimizer(i, initial.clone()))?;
        let mut distance = 0usize;
        for _ in 0..config.epochs {
            let l = minimizer.select()?;
            let accepted = minimizer.step(l)?.r;
            if accepted {
                distance = if minimizer.weights().get(l) != initial.get(l) { distance + 1 } else { distance - 1 };
            }
            minimizer.annotate_last(distance);
        }
        let trace = minimizer.finish();
        let label = format!("m{i:02}");
        let minimum = minimum_record(sim, label.clone(), &trace)?;
        Ok((NamedTrace { label, trace }, minimum))
    })?;
    let (traces, minima): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    finish_report(config, n, traces, Vec::new(), minima, None)
}

/// Master and slaves advance in lockstep; every epoch the master's selection
/// is probed by all of them, each with its own noise and reward.
fn lockstep_group<T: Real>(
    system: &System<'_, T>,
    config: &ExperimentConfig,
    run: usize,
    initials: Vec<BooleanWeights>,
    labels: &[String],
) -> Result<(Vec<NamedTrace<T>>, Vec<PairHamming>)> {
    let base = (run * initials.len()) as u64;
    let mut group = initials
        .iter()
        .enumerate()
        .map(|(j, w)| Minimizer::new(system, config.minimizer(base + j as u64, w.clone())))
        .collect::<Result<Vec<_>>>()?;
    let m = group.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let mut dist: Vec<usize> =
        pairs.iter().map(|&(a, b)| hamming(&initials[a], &initials[b])).collect::<Result<_>>()?;
    let mut counts: Vec<Vec<usize>> = dist.iter().map(|&d| vec![d]).collect();
    let mut before = vec![false; m];
    for _ in 0..config.epochs {
        let l = group[0].select()?;
        for (j, minimizer) in group.iter_mut().enumerate() {
            before[j] = minimizer.weights().get(l);
            minimizer.step(l)?;
        }
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let was = before[a] != before[b];
            let now = group[a].weights().get(l) != group[b].weights().get(l);
            dist[p] = dist[p] + usize::from(now) - usize::from(was);
            counts[p].push(dist[p]);
        }
        for j in 1..m {
            let d = dist[pairs.iter().position(|&pair| pair == (0, j)).expect("pair exists")];
            group[j].annotate_last(d);
        }
    }
    let traces = group
        .into_iter()
        .zip(labels)
        .map(|(g, label)| NamedTrace { label: format!("r{run:02}-{label}"), trace: g.finish() })
        .collect();
    let hamming = pairs
        .iter()
        .zip(counts)
        .map(|(&(a, b), counts)| PairHamming { run, a: labels[a].clone(), b: labels[b].clone(), counts })
        .collect();
    Ok((traces, hamming))
}

fn group_labels(slaves: usize) -> Vec<String> {
    std::iter::once("master".to_string()).chain((1..=slaves).map(|s| format!("slave{s}"))).collect()
}

/// Master-slave protocol from identical starts, repeated `runs` times.
pub fn run_master_slave<T: Real>(sim: &Simulation<T>, config: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    let n = sim.nodes();
    config.validate(n)?;
    let system = sim.train_system(config.sigma_out)?;
    let labels = group_labels(config.slaves);
    let runs: Vec<usize> = (0..config.runs).collect();
    let results = map_maybe_parallel(config.parallel, runs, |run| {
        let start = initial_weights(config, n, run as u64);
        lockstep_group(&system, config, run, vec![start; config.slaves + 1], &labels)
    })?;
    collect_groups(sim, config, n, results)
}

/// Two minimizers starting exactly `h1` apart, repeated `runs` times.
pub fn run_separated_pair<T: Real>(sim: &Simulation<T>, config: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    let n = sim.nodes();
    config.validate(n)?;
    let system = sim.train_system(config.sigma_out)?;
    let labels = group_labels(1);
    let runs: Vec<usize> = (0..config.runs).collect();
    let results = map_maybe_parallel(config.parallel, runs, |run| {
        let a = initial_weights(config, n, run as u64);
        let mut b = a.clone();
        let all: Vec<usize> = (0..n).collect();
        for &i in &shuffled(&all, config.seed("separation", run as u64))[..config.h1] {
            b.flip(i);
        }
        lockstep_group(&system, config, run, vec![a, b], &labels)
    })?;
    collect_groups(sim, config, n, results)
}

fn collect_groups<T: Real>(
    sim: &Simulation<T>,
    config: &ExperimentConfig,
    n: usize,
    results: Vec<(Vec<NamedTrace<T>>, Vec<PairHamming>)>,
) -> Result<ExperimentReport<T>> {
    let mut traces = Vec::new();
    let mut pairs = Vec::new();
    for (t, h) in results {
        traces.extend(t);
        pairs.extend(h);
    }
    let minima = traces.iter().map(|t| minimum_record(sim, t.label.clone(), &t.trace)).collect::<Result<Vec<_>>>()?;
    finish_report(config, n, traces, pairs, minima, None)
}

/// Converges two minimizers from independent starts, then walks both inverted
/// paths between their minima, applying every flip unconditionally.
pub fn run_inverted_paths<T: Real>(sim: &Simulation<T>, config: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    let n = sim.nodes();
    config.validate(n)?;
    let system = sim.train_system(config.sigma_out)?;
    let results = map_maybe_parallel(config.parallel, vec![0u64, 1], |i| {
        let mut minimizer = Minimizer::new(&system, config.minimizer(i, initial_weights(config, n, i)))?;
        for _ in 0..config.epochs {
            let l = minimizer.select()?;
            minimizer.step(l)?;
        }
        let trace = minimizer.finish();
        let label = if i == 0 { "a" } else { "b" }.to_string();
        let minimum = minimum_record(sim, label.clone(), &trace)?;
        Ok((NamedTrace { label, trace }, minimum))
    })?;
    let (traces, minima): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let (ma, mb) = (&minima[0].weights, &minima[1].weights);
    let differing = ma.differing(mb)?;
    if differing.is_empty() {
        return Err(Error::DegenerateExperiment("both minimizers converged to the same configuration".into()));
    }
    let order = shuffled(&differing, config.seed("path-order", 0));
    let walk = |start: &BooleanWeights, stream: u64| -> Result<(Vec<f64>, BooleanWeights)> {
        let mut eval = system.evaluator(config.seed("path-noise", stream));
        let mut w = start.clone();
        let mut sums = eval.sums(&w)?;
        let mut eps = vec![eval.error(&sums, NoiseKey::new(0, 0)).as_f64()];
        for (j, &l) in order.iter().enumerate() {
            eval.apply_flip(&mut sums, l, w.get(l));
            w.flip(l);
            eps.push(eval.error(&sums, NoiseKey::new(j as u64 + 1, 0)).as_f64());
        }
        Ok((eps, w))
    };
    let (eps_a, end_a) = walk(ma, 0)?;
    let (eps_b, end_b) = walk(mb, 1)?;
    // A gradient difference combines four independent evaluations.
    let noise_scale = 2.0 * evaluation_noise_std(&system, ma, config.probe_reps, config.seed("probe-noise", 0))?;
    let paths = PathRecord {
        order,
        eps_a,
        eps_b,
        endpoints_exact: &end_a == mb && &end_b == ma,
        noise_scale,
    };
    finish_report(config, n, traces, Vec::new(), minima, Some(paths))
}

pub fn run_experiment<T: Real>(sim: &Simulation<T>, config: &ExperimentConfig) -> Result<ExperimentReport<T>> {
    match config.kind {
        ExperimentKind::Ensemble => run_ensemble(sim, config),
        ExperimentKind::MasterSlave => run_master_slave(sim, config),
        ExperimentKind::SeparatedPair => run_separated_pair(sim, config),
        ExperimentKind::InvertedPaths => run_inverted_paths(sim, config),
    }
}

fn finish_report<T: Real>(
    config: &ExperimentConfig,
    nodes: usize,
    traces: Vec<NamedTrace<T>>,
    hamming: Vec<PairHamming>,
    minima: Vec<MinimumRecord>,
    paths: Option<PathRecord>,
) -> Result<ExperimentReport<T>> {
    let summary = summarize(config, nodes, &traces, &hamming, &minima, paths.as_ref())?;
    Ok(ExperimentReport { config: config.clone(), nodes, traces, hamming, minima, paths, summary })
}

/// Analytics of an experiment's raw material.
pub fn summarize<T: Real>(
    config: &ExperimentConfig,
    nodes: usize,
    traces: &[NamedTrace<T>],
    hamming: &[PairHamming],
    minima: &[MinimumRecord],
    paths: Option<&PathRecord>,
) -> Result<Summary> {
    let learning = if traces.is_empty() { None } else { Some(learning_summary(config, traces, minima)?) };
    let divergence = if hamming.is_empty() { None } else { Some(divergence_summary(config, nodes, traces, hamming)?) };
    let inverted_paths = paths.map(path_summary).transpose()?;
    Ok(Summary { kind: config.kind, nodes, epochs: config.epochs, learning, divergence, inverted_paths })
}

fn learning_summary<T: Real>(
    config: &ExperimentConfig,
    traces: &[NamedTrace<T>],
    minima: &[MinimumRecord],
) -> Result<LearningSummary> {
    let len = traces[0].trace.epochs() + 1;
    let mut mean_error = vec![0.0; len];
    for t in traces {
        let acc = t.trace.accepted_errors();
        if acc.len() != len {
            return Err(Error::Dimension { expected: len, got: acc.len() });
        }
        for (m, e) in mean_error.iter_mut().zip(acc) {
            *m += e.as_f64();
        }
    }
    let m = traces.len() as f64;
    mean_error.iter_mut().for_each(|v| *v /= m);
    let k_min: Vec<f64> = traces.iter().map(|t| t.trace.k_min as f64).collect();
    let eps_min: Vec<f64> = traces.iter().map(|t| t.trace.eps_min.as_f64()).collect();
    let (k_min_mean, k_min_std) = sample_mean_std(&k_min);
    let (eps_min_mean, _) = sample_mean_std(&eps_min);
    let hi = eps_min.iter().copied().fold(f64::MIN, f64::max);
    let lo = eps_min.iter().copied().fold(f64::MAX, f64::min);
    let train: Vec<f64> = minima.iter().map(|r| r.train_error).collect();
    let test: Vec<f64> = minima.iter().map(|r| r.test_error).collect();
    let (train_error_mean, _) = sample_mean_std(&train);
    let (test_error_mean, _) = sample_mean_std(&test);
    let minima_stats = if config.kind == ExperimentKind::Ensemble && minima.len() >= 2 {
        Some(pairwise_minima_stats(&minima.iter().map(|r| r.weights.clone()).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(LearningSummary {
        minimizers: traces.len(),
        exponential: fit_exponential(&mean_error)?,
        mean_error,
        k_min_mean,
        k_min_std,
        eps_min_mean,
        eps_min_spread: hi / lo,
        train_error_mean,
        test_error_mean,
        generalization_gap: (test_error_mean - train_error_mean).abs() / train_error_mean,
        minima: minima_stats,
    })
}

fn divergence_summary<T: Real>(
    config: &ExperimentConfig,
    nodes: usize,
    traces: &[NamedTrace<T>],
    pairs: &[PairHamming],
) -> Result<DivergenceSummary> {
    let observed: Vec<HammingTrace> = pairs.iter().map(|p| HammingTrace::from_counts(&p.counts, nodes)).collect();
    let fit = fit_rate_model(&observed, config.mode)?;
    let mean = HammingTrace::average(&observed)?;
    let predicted = fit.predicted(mean.len());
    let max_relative_deviation = mean
        .values
        .iter()
        .zip(&predicted.values)
        .filter(|(_, &p)| p >= 1.0)
        .map(|(&o, &p)| (o - p).abs() / p)
        .fold(0.0, f64::max);

    let window = (nodes / 2).max(2).min(mean.len());
    let mut kinds: Vec<String> = pairs.iter().map(|p| p.kind()).collect();
    kinds.dedup();
    kinds.sort();
    kinds.dedup();
    let x: Vec<f64> = (0..window).map(|k| k as f64).collect();
    let early_slopes = kinds
        .into_iter()
        .map(|kind| {
            let same: Vec<HammingTrace> =
                pairs.iter().zip(&observed).filter(|(p, _)| p.kind() == kind).map(|(_, t)| t.clone()).collect();
            let avg = HammingTrace::average(&same)?;
            Ok(PairSlope { pair: kind, slope: linear_fit(&x, &avg.values[..window])?.slope })
        })
        .collect::<Result<Vec<_>>>()?;

    let blocks = ((mean.len() - 1) / nodes).min(4);
    let block_fits = if blocks >= 1 { block_linear_fits(&mean, nodes, blocks)? } else { Vec::new() };

    let group = if config.kind == ExperimentKind::SeparatedPair { 2 } else { config.slaves + 1 };
    let mut correlations = Vec::new();
    for chunk in traces.chunks(group) {
        let first: Vec<f64> = chunk[0].trace.accepted_errors().iter().map(|e| e.as_f64()).collect();
        for other in &chunk[1..] {
            let e: Vec<f64> = other.trace.accepted_errors().iter().map(|e| e.as_f64()).collect();
            if let Ok(r) = pearson(&first, &e) {
                correlations.push(r);
            }
        }
    }
    let error_correlation =
        if correlations.is_empty() { None } else { Some(correlations.iter().sum::<f64>() / correlations.len() as f64) };

    Ok(DivergenceSummary {
        mode: config.mode,
        pairs: pairs.len(),
        final_over_half: mean.values.last().copied().unwrap_or(0.0) / (nodes as f64 / 2.0),
        mean_hamming: mean.values,
        predicted: predicted.values,
        fit,
        max_relative_deviation,
        early_slopes,
        block_fits,
        error_correlation,
    })
}

fn path_summary(paths: &PathRecord) -> Result<PathSummary> {
    let classification = classify_gradient_pairs(&paths.gradients(), paths.noise_scale.max(f64::MIN_POSITIVE))?;
    Ok(PathSummary {
        differing: paths.order.len(),
        endpoints_exact: paths.endpoints_exact,
        noise_scale: paths.noise_scale,
        below_noise: classification.fraction(DimensionCategory::BelowNoise),
        potentially_independent: classification.fraction(DimensionCategory::PotentiallyIndependent),
        dependent: classification.fraction(DimensionCategory::Dependent),
        classification,
    })
}
