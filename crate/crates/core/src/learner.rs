//! Boolean evolutionary descent over the readout mirror configuration.
//!
//! One epoch selects a mirror, inverts it, evaluates the noisy error of the
//! proposal, rewards strict improvements and keeps or reverts the flip.
//! Selection is either memoryless (Markovian) or biased against recently
//! probed mirrors (greedy).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{NoiseKey, NoiseParams, ReadoutEvaluator, StateMatrix};
use crate::scalar::Real;
use crate::seeds::rng_from_seed;

/// Boolean readout configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BooleanWeights {
    bits: Vec<bool>,
}

impl BooleanWeights {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones_vec(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    /// Independent Bernoulli(1/2) bits.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        Self { bits: (0..n).map(|_| rng.random::<bool>()).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Positions where `self` and `other` differ.
    pub fn differing(&self, other: &Self) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(Error::Dimension { expected: self.len(), got: other.len() });
        }
        Ok((0..self.len()).filter(|&i| self.bits[i] != other.bits[i]).collect())
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn parse_bitstring(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidData(format!("invalid weight character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }

    pub fn as_reals<T: Real>(&self) -> Vec<T> {
        self.bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
    }
}

/// Logical inversion of mirror `l`.
pub fn mutate(weights: &BooleanWeights, l: usize) -> Result<BooleanWeights> {
    if l >= weights.len() {
        return Err(Error::Index { index: l, len: weights.len() });
    }
    let mut out = weights.clone();
    out.flip(l);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Markovian,
    Greedy,
}

impl SelectionMode {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMode::Markovian => "markovian",
            SelectionMode::Greedy => "greedy",
        }
    }
}

/// `l(k) = argmax(rand(N) * bias)`.
#[derive(Clone, Debug)]
pub struct SelectorState<T> {
    mode: SelectionMode,
    bias: Vec<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> SelectorState<T> {
    /// Markovian bias is all ones; greedy bias starts uniformly random.
    pub fn new(mode: SelectionMode, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let bias = match mode {
            SelectionMode::Markovian => vec![T::one(); n],
            SelectionMode::Greedy => (0..n).map(|_| T::lit(rng.random::<f64>())).collect(),
        };
        Self { mode, bias, rng }
    }

    pub fn with_bias(mode: SelectionMode, bias: Vec<T>, seed: u64) -> Self {
        Self { mode, bias, rng: rng_from_seed(seed) }
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    /// Draws the next index. Ties go to the lowest index; entries with zero
    /// bias are never chosen.
    pub fn select(&mut self) -> Result<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, &b) in self.bias.iter().enumerate() {
            // (0, 1] so that a positive bias always yields a positive score
            let draw = T::lit(1.0 - self.rng.random::<f64>());
            let score = draw * b;
            if score > T::zero() && best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        best.map(|(i, _)| i).ok_or(Error::Selection)
    }

    /// Greedy: every entry gains `1/N`, then entry `l` resets to zero.
    /// Markovian: no-op.
    pub fn update_bias(&mut self, l: usize) {
        if self.mode == SelectionMode::Markovian {
            return;
        }
        let step = T::one() / T::from_usize_lossy(self.bias.len());
        for b in &mut self.bias {
            *b = *b + step;
        }
        self.bias[l] = T::zero();
    }
}

/// Mean square error over the post-washout window.
pub fn evaluate_error<T: Real>(y_norm: &[T], target: &[T]) -> Result<T> {
    if y_norm.len() != target.len() {
        return Err(Error::Dimension { expected: target.len(), got: y_norm.len() });
    }
    if target.is_empty() {
        return Err(Error::Sizing("empty evaluation window".into()));
    }
    let sum: T = y_norm.iter().zip(target).map(|(&y, &t)| (t - y) * (t - y)).sum();
    Ok(sum / T::from_usize_lossy(target.len()))
}

/// Strict improvement earns the reward.
pub fn reward<T: Real>(delta_eps: T) -> bool {
    delta_eps < T::zero()
}

pub fn apply_reward(current: &BooleanWeights, proposed: &BooleanWeights, r: bool) -> BooleanWeights {
    if r {
        proposed.clone()
    } else {
        current.clone()
    }
}

/// What the proposal's error is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaCompare {
    /// The error recorded when the current configuration was accepted.
    Stored,
    /// A fresh noisy evaluation of the current configuration every epoch.
    Remeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialWeights {
    Given(#[serde(with = "bitstring")] BooleanWeights),
    Random { seed: u64 },
}

mod bitstring {
    use super::BooleanWeights;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &BooleanWeights, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&w.to_bitstring())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BooleanWeights, D::Error> {
        let s = String::deserialize(d)?;
        BooleanWeights::parse_bitstring(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerConfig {
    pub epochs: usize,
    pub mode: SelectionMode,
    pub selector_seed: u64,
    pub noise_seed: u64,
    pub initial: InitialWeights,
    pub compare: DeltaCompare,
}

impl MinimizerConfig {
    /// `K = 4N`, greedy, stored comparison.
    pub fn new(n: usize, selector_seed: u64, noise_seed: u64, initial: InitialWeights) -> Self {
        Self {
            epochs: 4 * n,
            mode: SelectionMode::Greedy,
            selector_seed,
            noise_seed,
            initial,
            compare: DeltaCompare::Stored,
        }
    }
}

/// What a minimizer learns from: fixed detector fields, the matching targets
/// and the output noise level.
#[derive(Clone, Copy, Debug)]
pub struct System<'a, T> {
    pub states: &'a StateMatrix<T>,
    pub target: &'a [T],
    pub sigma_out: f64,
}

impl<'a, T: Real> System<'a, T> {
    pub fn new(states: &'a StateMatrix<T>, target: &'a [T], sigma_out: f64) -> Result<Self> {
        if target.len() != states.rows() {
            return Err(Error::Dimension { expected: states.rows(), got: target.len() });
        }
        if !(sigma_out >= 0.0) {
            return Err(Error::Config("sigma_out must be >= 0".into()));
        }
        Ok(Self { states, target, sigma_out })
    }

    pub fn nodes(&self) -> usize {
        self.states.cols()
    }

    pub fn evaluator(&self, noise_seed: u64) -> ReadoutEvaluator<'a, T> {
        ReadoutEvaluator::new(self.states, self.target, NoiseParams { sigma_out: self.sigma_out, noise_seed })
            .expect("System checks target length")
    }

    /// Noise-free error of `weights`.
    pub fn clean_error(&self, weights: &BooleanWeights) -> Result<T> {
        let mut eval = self.evaluator(0);
        let sums = eval.sums(weights)?;
        Ok(eval.clean_error(&sums))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord<T> {
    pub k: u64,
    pub l: usize,
    /// Measured error of the proposal.
    pub eps: T,
    pub r: bool,
    /// Error attributed to the accepted configuration after this epoch.
    pub eps_acc: T,
    pub eps_min: T,
    pub k_min: u64,
    pub hamming_to_ref: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace<T> {
    pub mode: SelectionMode,
    pub compare: DeltaCompare,
    pub selector_seed: u64,
    pub noise_seed: u64,
    #[serde(with = "bitstring")]
    pub initial_weights: BooleanWeights,
    /// Error of the initial configuration, evaluated before the first mutation.
    pub eps0: T,
    pub records: Vec<EpochRecord<T>>,
    pub eps_min: T,
    pub k_min: u64,
    #[serde(with = "bitstring")]
    pub final_weights: BooleanWeights,
}

impl<T: Real> LearningTrace<T> {
    pub fn epochs(&self) -> usize {
        self.records.len()
    }

    pub fn selections(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.l).collect()
    }

    /// `eps0` followed by the accepted-configuration error of every epoch.
    pub fn accepted_errors(&self) -> Vec<T> {
        std::iter::once(self.eps0).chain(self.records.iter().map(|r| r.eps_acc)).collect()
    }

    /// Replays accepted flips up to and including epoch `k` (0 = initial).
    pub fn weights_at(&self, k: u64) -> BooleanWeights {
        let mut w = self.initial_weights.clone();
        for rec in self.records.iter().take_while(|r| r.k <= k) {
            if rec.r {
                w.flip(rec.l);
            }
        }
        w
    }
}

/// One minimizer advanced epoch by epoch. Master-slave protocols drive several
/// of these in lockstep, feeding every one the master's selection.
pub struct Minimizer<'a, T> {
    eval: ReadoutEvaluator<'a, T>,
    selector: SelectorState<T>,
    config: MinimizerConfig,
    initial: BooleanWeights,
    weights: BooleanWeights,
    sums: Vec<T>,
    proposal: Vec<T>,
    eps0: T,
    eps_current: T,
    eps_min: T,
    k_min: u64,
    records: Vec<EpochRecord<T>>,
}

impl<'a, T: Real> Minimizer<'a, T> {
    pub fn new(system: &System<'a, T>, config: MinimizerConfig) -> Result<Self> {
        if config.epochs == 0 {
            return Err(Error::Config("epoch budget K must be >= 1".into()));
        }
        let n = system.nodes();
        let initial = match &config.initial {
            InitialWeights::Given(w) => w.clone(),
            InitialWeights::Random { seed } => BooleanWeights::random(n, *seed),
        };
        if initial.len() != n {
            return Err(Error::Dimension { expected: n, got: initial.len() });
        }
        let mut eval = system.evaluator(config.noise_seed);
        let sums = eval.sums(&initial)?;
        let eps0 = eval.error(&sums, NoiseKey::new(0, 0));
        Ok(Self {
            selector: SelectorState::new(config.mode, n, config.selector_seed),
            proposal: vec![T::zero(); sums.len()],
            weights: initial.clone(),
            initial,
            sums,
            eps0,
            eps_current: eps0,
            eps_min: eps0,
            k_min: 0,
            records: Vec::with_capacity(config.epochs),
            config,
            eval,
        })
    }

    pub fn epoch(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn is_done(&self) -> bool {
        self.records.len() >= self.config.epochs
    }

    pub fn weights(&self) -> &BooleanWeights {
        &self.weights
    }

    pub fn current_error(&self) -> T {
        self.eps_current
    }

    /// Draws this minimizer's own next selection and advances its bias.
    pub fn select(&mut self) -> Result<usize> {
        let l = self.selector.select()?;
        self.selector.update_bias(l);
        Ok(l)
    }

    /// Runs one epoch probing mirror `l`.
    pub fn step(&mut self, l: usize) -> Result<&EpochRecord<T>> {
        let n = self.weights.len();
        if l >= n {
            return Err(Error::Index { index: l, len: n });
        }
        let k = self.epoch() + 1;
        let was_set = self.weights.get(l);
        self.eval.flipped_sums_into(&self.sums, l, was_set, &mut self.proposal);
        let eps = self.eval.error(&self.proposal, NoiseKey::new(k, 0));
        let baseline = match self.config.compare {
            DeltaCompare::Stored => self.eps_current,
            DeltaCompare::Remeasure => self.eval.error(&self.sums, NoiseKey::new(k, 1)),
        };
        let r = reward(eps - baseline);
        if r {
            self.weights.flip(l);
            std::mem::swap(&mut self.sums, &mut self.proposal);
            self.eps_current = eps;
        } else {
            self.eps_current = baseline;
        }
        if self.eps_current < self.eps_min {
            self.eps_min = self.eps_current;
            self.k_min = k;
        }
        self.records.push(EpochRecord {
            k,
            l,
            eps,
            r,
            eps_acc: self.eps_current,
            eps_min: self.eps_min,
            k_min: self.k_min,
            hamming_to_ref: None,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    /// Records the Hamming distance to a reference on the latest epoch.
    pub fn annotate_last(&mut self, distance: usize) {
        if let Some(rec) = self.records.last_mut() {
            rec.hamming_to_ref = Some(distance);
        }
    }

    pub fn finish(self) -> LearningTrace<T> {
        LearningTrace {
            mode: self.config.mode,
            compare: self.config.compare,
            selector_seed: self.config.selector_seed,
            noise_seed: self.config.noise_seed,
            initial_weights: self.initial,
            eps0: self.eps0,
            records: self.records,
            eps_min: self.eps_min,
            k_min: self.k_min,
            final_weights: self.weights,
        }
    }
}

/// Runs `config.epochs` epochs. With `mutation_override` the selector is
/// bypassed and epoch `k` probes `mutation_override[k - 1]`.
pub fn run_minimizer<T: Real>(
    system: &System<'_, T>,
    config: &MinimizerConfig,
    mutation_override: Option<&[usize]>,
) -> Result<LearningTrace<T>> {
    if let Some(seq) = mutation_override {
        if seq.len() < config.epochs {
            return Err(Error::Sizing(format!(
                "mutation override has {} entries for {} epochs",
                seq.len(),
                config.epochs
            )));
        }
    }
    let mut minimizer = Minimizer::new(system, config.clone())?;
    for k in 0..config.epochs {
        let l = match mutation_override {
            Some(seq) => seq[k],
            None => minimizer.select()?,
        };
        minimizer.step(l)?;
    }
    Ok(minimizer.finish())
}
