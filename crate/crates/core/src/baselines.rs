//! Short-term baselines: logistic regression retrained on a fresh sample at
//! every step, optionally penalized for the equal-opportunity gap of its
//! predictions, with the population evolving under each step's policy.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution as _, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{cumulative_series, MetricContext, MetricSnapshot};
use crate::model::{GenerativeModel, Group, GroupDistributions, Policy};
use crate::simulate::{CumulativeMetrics, Trajectory};

/// Samples drawn per step unless configured otherwise.
pub const DEFAULT_SAMPLE_SIZE: usize = 5000;
pub const DEFAULT_EPOCHS: usize = 2000;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub x: usize,
    pub s: Group,
    pub y: u8,
}

/// Labelled individuals drawn from a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub states: usize,
    pub records: Vec<Sample>,
}

impl SampleSet {
    pub fn new(states: usize, records: Vec<Sample>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.x >= states || r.s > 1 || r.y > 1 {
                return Err(Error::InvariantViolation {
                    path: format!("records[{i}]"),
                    message: format!("{r:?} outside {states} states"),
                });
            }
        }
        Ok(SampleSet { states, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts indexed `[s][x][y]`.
    fn counts(&self) -> [Vec<[f64; 2]>; 2] {
        let mut c = [vec![[0.0; 2]; self.states], vec![[0.0; 2]; self.states]];
        for r in &self.records {
            c[r.s][r.x][r.y as usize] += 1.0;
        }
        c
    }
}

pub(crate) fn sample_with<R: Rng>(
    model: &GenerativeModel<f64>,
    mu: &GroupDistributions<f64>,
    m: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let ell = model.labels()?;
    let n = model.n();
    for d in mu {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: d.len() });
        }
    }
    let pick = |d: &crate::markov::Distribution<f64>| {
        WeightedIndex::new(d.as_slice()).map_err(|e| Error::NumericalFailure(e.to_string()))
    };
    let picks = [pick(&mu[0])?, pick(&mu[1])?];
    let gamma0 = model.gamma.get(0);
    let records = (0..m)
        .map(|_| {
            let s = usize::from(rng.random::<f64>() >= gamma0);
            let x = picks[s].sample(rng);
            let y = u8::from(rng.random::<f64>() < ell.positive(s)[x]);
            Sample { x, s, y }
        })
        .collect();
    Ok(SampleSet { states: n, records })
}

/// `m` i.i.d. draws `s ~ gamma`, `x ~ mu(.|s)`, `y ~ ell(.|x, s)`.
pub fn sample_population(
    model: &GenerativeModel<f64>,
    mu: &GroupDistributions<f64>,
    m: usize,
    seed: u64,
) -> Result<SampleSet> {
    sample_with(model, mu, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic model over one-hot state, raw group indicator and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPolicy {
    /// `states` one-hot weights, then the group weight, then the bias.
    pub weights: Vec<f64>,
}

impl LogisticPolicy {
    pub fn zeros(states: usize) -> Self {
        LogisticPolicy { weights: vec![0.0; states + 2] }
    }

    pub fn states(&self) -> usize {
        self.weights.len() - 2
    }

    pub fn group_weight(&self) -> f64 {
        self.weights[self.states()]
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.states() + 1]
    }

    pub fn logit(&self, x: usize, s: Group) -> f64 {
        self.weights[x] + self.group_weight() * s as f64 + self.bias()
    }

    pub fn probability(&self, x: usize, s: Group) -> f64 {
        sigmoid(self.logit(x, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionMode {
    /// Approve when the predicted probability is at least 0.5.
    #[default]
    Threshold,
    /// Approve with the predicted probability.
    Probabilistic,
}

/// Decision policy of a fitted model. In threshold mode a prediction of
/// exactly 0.5 approves.
pub fn policy_from_logistic(lp: &LogisticPolicy, mode: ConversionMode) -> Policy<f64> {
    let n = lp.states();
    let row = |s| {
        (0..n)
            .map(|x| {
                let p = lp.probability(x, s);
                match mode {
                    ConversionMode::Threshold => f64::from(u8::from(p >= 0.5)),
                    ConversionMode::Probabilistic => p,
                }
            })
            .collect()
    };
    Policy::new([row(0), row(1)]).expect("sigmoid output is a probability")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Weight of the squared soft equal-opportunity gap.
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { lambda: 0.0, epochs: DEFAULT_EPOCHS, learning_rate: DEFAULT_LEARNING_RATE }
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {} must be non-negative", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingOutcome {
    pub model: LogisticPolicy,
    /// Loss before training and after every epoch; never increases.
    pub losses: Vec<f64>,
    /// Step size at the end; below the configured rate if a step had to be
    /// retried.
    pub final_learning_rate: f64,
    /// The gap penalty was dropped because a group had no positive label.
    pub penalty_skipped: bool,
}

/// Loss and gradient on the aggregated data. The batch has at most `2n`
/// distinct feature vectors, so every record with the same `(x, s, y)` is
/// folded into one weighted term.
struct Objective<'a> {
    counts: &'a [Vec<[f64; 2]>; 2],
    total: f64,
    positives: [f64; 2],
    lambda: f64,
    n: usize,
}

impl Objective<'_> {
    fn loss_and_grad(&self, lp: &LogisticPolicy) -> (f64, Vec<f64>) {
        let n = self.n;
        let mut grad = vec![0.0; n + 2];
        let mut loss = 0.0;
        let mut dz = [vec![0.0; n], vec![0.0; n]];
        let mut mean_pos = [0.0; 2];
        let mut p_cache = [vec![0.0; n], vec![0.0; n]];
        for s in 0..2 {
            for x in 0..n {
                let [c0, c1] = self.counts[s][x];
                if c0 + c1 == 0.0 {
                    continue;
                }
                let z = lp.logit(x, s);
                let p = sigmoid(z);
                p_cache[s][x] = p;
                // -log(p) = softplus(-z), -log(1-p) = softplus(z)
                loss += (c1 * softplus(-z) + c0 * softplus(z)) / self.total;
                dz[s][x] += ((c0 + c1) * p - c1) / self.total;
                if self.lambda > 0.0 {
                    mean_pos[s] += c1 * p / self.positives[s];
                }
            }
        }
        if self.lambda > 0.0 {
            let gap = mean_pos[0] - mean_pos[1];
            loss += self.lambda * gap * gap;
            for s in 0..2 {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                for x in 0..n {
                    let c1 = self.counts[s][x][1];
                    let p = p_cache[s][x];
                    dz[s][x] += 2.0 * self.lambda * gap * sign * c1 * p * (1.0 - p) / self.positives[s];
                }
            }
        }
        for s in 0..2 {
            for x in 0..n {
                let g = dz[s][x];
                grad[x] += g;
                grad[n] += g * s as f64;
                grad[n + 1] += g;
            }
        }
        (loss, grad)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn train_with<R: Rng>(data: &SampleSet, cfg: &TrainingConfig, rng: &mut R) -> Result<TrainingOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.states;
    let counts = data.counts();
    let positives = [0, 1].map(|s: usize| counts[s].iter().map(|c| c[1]).sum::<f64>());
    let mut lambda = cfg.lambda;
    let mut penalty_skipped = false;
    if lambda > 0.0 {
        if let Some(group) = (0..2).find(|s| positives[*s] == 0.0) {
            log::warn!("{}", Error::EmptyQualifiedGroup { group });
            lambda = 0.0;
            penalty_skipped = true;
        }
    }
    let objective = Objective { counts: &counts, total: data.len() as f64, positives, lambda, n };

    let dim = n + 2;
    let bound = 1.0 / (dim as f64).sqrt();
    let init = Uniform::new_inclusive(-bound, bound).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let mut lp = LogisticPolicy { weights: (0..dim).map(|_| init.sample(rng)).collect() };

    let mut lr = cfg.learning_rate;
    let (mut loss, mut grad) = objective.loss_and_grad(&lp);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    losses.push(loss);
    let mut warned = false;
    for _ in 0..cfg.epochs {
        loop {
            let trial = LogisticPolicy { weights: lp.weights.iter().zip(&grad).map(|(w, g)| w - lr * g).collect() };
            let (l, g) = objective.loss_and_grad(&trial);
            if l <= loss || lr < 1e-12 {
                lp = trial;
                loss = l;
                grad = g;
                break;
            }
            if !warned {
                log::warn!("training loss rose at learning rate {lr}; halving");
                warned = true;
            }
            lr *= 0.5;
        }
        losses.push(loss);
    }
    Ok(TrainingOutcome { model: lp, losses, final_learning_rate: lr, penalty_skipped })
}

/// Full-batch gradient descent on mean binary cross-entropy plus
/// `lambda * gap^2`, where `gap` is the difference between groups of the mean
/// predicted probability over positively labelled records. `lambda = 0` gives
/// the plain profit-seeking classifier.
pub fn train_short_term(data: &SampleSet, cfg: &TrainingConfig, seed: u64) -> Result<TrainingOutcome> {
    train_with(data, cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainingConfig {
    pub horizon: usize,
    pub samples_per_step: usize,
    pub training: TrainingConfig,
    pub mode: ConversionMode,
    /// Cost of a positive decision used for the utility series.
    pub cost: f64,
}

impl Default for RetrainingConfig {
    fn default() -> Self {
        RetrainingConfig {
            horizon: 100,
            samples_per_step: DEFAULT_SAMPLE_SIZE,
            training: TrainingConfig::default(),
            mode: ConversionMode::Threshold,
            cost: 0.8,
        }
    }
}

/// One seed of the retraining loop: the trajectory (metrics at step `t` use
/// the policy trained at `t`) and those policies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrainingRun {
    pub seed: u64,
    pub trajectory: Trajectory<f64>,
    pub policies: Vec<Policy<f64>>,
}

fn retrain_one(
    model: &GenerativeModel<f64>,
    mu0: &GroupDistributions<f64>,
    cfg: &RetrainingConfig,
    seed: u64,
) -> Result<RetrainingRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::with_capacity(cfg.horizon + 1);
    let mut metrics: Vec<MetricSnapshot<f64>> = Vec::with_capacity(cfg.horizon + 1);
    let mut policies = Vec::with_capacity(cfg.horizon + 1);
    let mut mu = mu0.clone();
    for t in 0..=cfg.horizon {
        let data = sample_with(model, &mu, cfg.samples_per_step, &mut rng)?;
        let fit = train_with(&data, &cfg.training, &mut rng)?;
        let policy = policy_from_logistic(&fit.model, cfg.mode);
        metrics.push(MetricContext::new(model, &policy, &mu, cfg.cost)?.snapshot()?);
        let next = if t < cfg.horizon {
            let k = model.kernels(&policy)?;
            Some([k[0].evolve(&mu[0])?, k[1].evolve(&mu[1])?])
        } else {
            None
        };
        steps.push(std::mem::replace(&mut mu, next.unwrap_or_else(|| mu0.clone())));
        policies.push(policy);
    }
    let series = |f: fn(&MetricSnapshot<f64>) -> f64| cumulative_series(&metrics.iter().map(f).collect::<Vec<_>>());
    let cumulative = CumulativeMetrics {
        utility: series(|m| m.utility),
        inequity: series(|m| m.inequity),
        eop: series(|m| m.eop),
    };
    Ok(RetrainingRun { seed, trajectory: Trajectory { steps, metrics, cumulative }, policies })
}

/// Retrains a classifier at every step for each seed. Seeds run in parallel;
/// each seed's run is sequential and reproducible on its own.
pub fn run_retraining_loop(
    model: &GenerativeModel<f64>,
    mu0: &GroupDistributions<f64>,
    cfg: &RetrainingConfig,
    seeds: &[u64],
) -> Result<Vec<RetrainingRun>> {
    if cfg.horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if cfg.samples_per_step == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.cost) {
        return Err(Error::InvalidArgument(format!("cost {} outside [0, 1]", cfg.cost)));
    }
    cfg.training.validate()?;
    model.labels()?;
    seeds.par_iter().map(|s| retrain_one(model, mu0, cfg, *s)).collect()
}
