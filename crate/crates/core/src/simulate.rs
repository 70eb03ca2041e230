//! Exact evolution of group-conditional distributions under a fixed policy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{total_variation, Distribution, TransitionKernel};
use crate::metrics::{cumulative_series, MetricContext, MetricSnapshot};
use crate::model::{GenerativeModel, GroupDistributions, Policy};
use crate::scalar::Scalar;

/// Horizon used by the reports.
pub const DEFAULT_HORIZON: usize = 200;
/// Step-to-step TV below which a trajectory counts as settled.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-9;

/// Running sums of the per-step series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeMetrics<T> {
    pub utility: Vec<T>,
    pub inequity: Vec<T>,
    pub eop: Vec<T>,
}

/// Distributions at `t = 0..=T` with metrics at every step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub steps: Vec<GroupDistributions<T>>,
    pub metrics: Vec<MetricSnapshot<T>>,
    pub cumulative: CumulativeMetrics<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Number of transitions `T`.
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn last(&self) -> &GroupDistributions<T> {
        self.steps.last().expect("trajectory holds t = 0")
    }

    pub fn convergence_step(&self, tol: T) -> Option<usize> {
        detect_convergence(&self.steps, tol)
    }
}

fn check_starts<T: Scalar>(model: &GenerativeModel<T>, mu0: &GroupDistributions<T>) -> Result<()> {
    for m in mu0 {
        if m.len() != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), found: m.len() });
        }
    }
    Ok(())
}

fn run<T: Scalar>(
    kernels: &[TransitionKernel<T>; 2],
    mu0: &GroupDistributions<T>,
    horizon: usize,
) -> Result<Vec<GroupDistributions<T>>> {
    let mut steps = Vec::with_capacity(horizon + 1);
    steps.push(mu0.clone());
    for t in 0..horizon {
        let cur = &steps[t];
        let next = [kernels[0].evolve(&cur[0])?, kernels[1].evolve(&cur[1])?];
        steps.push(next);
    }
    Ok(steps)
}

/// `mu_0, ..., mu_T` per group, for either model variant.
pub fn evolve_distributions<T: Scalar>(
    model: &GenerativeModel<T>,
    policy: &Policy<T>,
    mu0: &GroupDistributions<T>,
    horizon: usize,
) -> Result<Vec<GroupDistributions<T>>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    check_starts(model, mu0)?;
    let kernels = model.kernels(policy)?;
    run(&kernels, mu0, horizon)
}

/// Evolves `mu0` for `horizon` steps and scores every step at cost `cost`.
pub fn simulate<T: Scalar>(
    model: &GenerativeModel<T>,
    policy: &Policy<T>,
    mu0: &GroupDistributions<T>,
    horizon: usize,
    cost: T,
) -> Result<Trajectory<T>> {
    model.labels()?;
    let steps = evolve_distributions(model, policy, mu0, horizon)?;
    let metrics = steps
        .iter()
        .map(|mu| MetricContext::new(model, policy, mu, cost)?.snapshot())
        .collect::<Result<Vec<_>>>()?;
    let series = |f: fn(&MetricSnapshot<T>) -> T| cumulative_series(&metrics.iter().map(f).collect::<Vec<_>>());
    let cumulative = CumulativeMetrics {
        utility: series(|m| m.utility),
        inequity: series(|m| m.inequity),
        eop: series(|m| m.eop),
    };
    Ok(Trajectory { steps, metrics, cumulative })
}

fn step_distance<T: Scalar>(a: &GroupDistributions<T>, b: &GroupDistributions<T>) -> T {
    let d0 = total_variation(&a[0], &b[0]).expect("same state space");
    let d1 = total_variation(&a[1], &b[1]).expect("same state space");
    d0.max(d1)
}

/// Smallest `t` from which every recorded step moves by at most `tol` in TV
/// (worst group), or `None` if the last recorded step still moves more.
pub fn detect_convergence<T: Scalar>(steps: &[GroupDistributions<T>], tol: T) -> Option<usize> {
    if steps.len() < 2 {
        return (!steps.is_empty()).then_some(0);
    }
    let mut first = None;
    for t in (0..steps.len() - 1).rev() {
        if step_distance(&steps[t], &steps[t + 1]) <= tol {
            first = Some(t);
        } else {
            break;
        }
    }
    first
}

/// `count` random start pairs, each group's distribution drawn uniformly from
/// the simplex (normalized i.i.d. unit exponentials).
pub fn random_initial_distributions<T: Scalar>(
    seed: u64,
    count: usize,
    n: usize,
) -> Result<Vec<GroupDistributions<T>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    if n < 2 {
        return Err(Error::TooFewStates { min: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        Distribution::normalized(raw.iter().map(|v| T::lit(v / total)).collect())
    };
    (0..count).map(|_| Ok([draw()?, draw()?])).collect()
}

/// Outcome of evolving several starts under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStartReport<T> {
    /// Stationary pair of the policy's kernels, if both are certified.
    pub stationary: Option<GroupDistributions<T>>,
    /// Per start, the step found by [`detect_convergence`].
    pub convergence_steps: Vec<Option<usize>>,
    pub final_states: Vec<GroupDistributions<T>>,
    /// Largest TV between any two final states (worst group).
    pub max_pairwise_tv: T,
    /// Largest TV between a final state and the stationary pair.
    pub max_tv_to_stationary: Option<T>,
    /// Every start settled, all finals agree within `tol` and match the
    /// stationary pair within `tol`.
    pub converged: bool,
}

/// Evolves every start (in parallel, deterministic order) and checks that
/// they share one limit.
pub fn multi_start_convergence<T: Scalar>(
    model: &GenerativeModel<T>,
    policy: &Policy<T>,
    starts: &[GroupDistributions<T>],
    horizon: usize,
    tol: T,
) -> Result<MultiStartReport<T>> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let kernels = model.kernels(policy)?;
    for s in starts {
        check_starts(model, s)?;
    }
    let runs = starts
        .par_iter()
        .map(|mu0| run(&kernels, mu0, horizon))
        .collect::<Result<Vec<_>>>()?;
    let convergence_steps: Vec<Option<usize>> = runs.iter().map(|r| detect_convergence(r, tol)).collect();
    let final_states: Vec<GroupDistributions<T>> =
        runs.into_iter().map(|mut r| r.pop().expect("horizon >= 1")).collect();

    let mut max_pairwise_tv = T::zero();
    for (i, a) in final_states.iter().enumerate() {
        for b in &final_states[i + 1..] {
            max_pairwise_tv = max_pairwise_tv.max(step_distance(a, b));
        }
    }
    let stationary = match (kernels[0].stationary_distribution(), kernels[1].stationary_distribution()) {
        (Ok(a), Ok(b)) => Some([a, b]),
        (Err(Error::NotConvergent), _) | (_, Err(Error::NotConvergent)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let max_tv_to_stationary = stationary
        .as_ref()
        .map(|st| final_states.iter().map(|f| step_distance(f, st)).fold(T::zero(), T::max));
    let converged = convergence_steps.iter().all(Option::is_some)
        && max_pairwise_tv <= tol
        && max_tv_to_stationary.is_some_and(|d| d <= tol);
    Ok(MultiStartReport {
        stationary,
        convergence_steps,
        final_states,
        max_pairwise_tv,
        max_tv_to_stationary,
        converged,
    })
}
