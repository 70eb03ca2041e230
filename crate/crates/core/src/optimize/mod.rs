//! Policies optimal at their own stationary point.
//!
//! A candidate policy induces one kernel per group; the long-term objective and
//! constraints are scored at those kernels' stationary distributions. The map
//! from policy to stationary point is implicit, so gradients are taken by
//! finite differences and the problem is solved by SQP with optional random
//! restarts.

mod qp;
mod sqp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricContext, MetricSnapshot};
use crate::model::{GenerativeModel, GroupDistributions, Policy};
use sqp::{Nlp, SqpOptions};

/// Iterates stay this far inside `[0, 1]` so every kernel stays strictly positive.
pub const POLICY_MARGIN: f64 = 1e-9;

/// Residual reported for a group whose kernel fails a convergence certificate.
pub const CERTIFICATE_FAILURE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MaxUtility,
    MaxQualification,
    /// Same quantity as [`Objective::MaxQualification`], stated as minimizing
    /// `-sum_s Q(s) gamma(s)`.
    MinDefault,
    MinEop,
    MaxAverageScore,
    MinMinimaxRisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// `|TPR(0) - TPR(1)| <= threshold`
    Eop,
    /// `|P(D=1|0) - P(D=1|1)| <= threshold`
    Dp,
    /// `|Q(0) - Q(1)| <= threshold`
    Inequity,
    /// `|mu(x|0) - mu(x|1)| <= threshold` for every state.
    FeatureGap,
    /// `utility >= threshold`
    UtilityFloor,
    /// Approval probability non-decreasing in the state, per group.
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub kind: ConstraintKind,
    #[serde(default)]
    pub threshold: f64,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, threshold: f64) -> Self {
        Constraint { kind, threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub fd_step: f64,
    /// Starting policy; `None` means every entry 0.5.
    pub warm_start: Option<Policy<f64>>,
    pub feasibility_tol: f64,
    /// Total number of starts, the first from the warm start.
    pub restarts: usize,
    /// Seed for the random restart points.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            fd_step: 1.49e-10,
            warm_start: None,
            feasibility_tol: 1e-8,
            restarts: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("iteration and restart counts must be at least 1".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return Err(Error::InvalidArgument(format!("fd_step {} must be in (0, 0.1)", self.fd_step)));
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::InvalidArgument("feasibility_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSpec {
    pub objective: Objective,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    pub cost: f64,
    #[serde(default = "default_true")]
    pub enforce_convergence: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_true() -> bool {
    true
}

impl OptimizationSpec {
    pub fn new(objective: Objective, cost: f64) -> Self {
        OptimizationSpec {
            objective,
            constraints: Vec::new(),
            cost,
            enforce_convergence: true,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_constraint(mut self, kind: ConstraintKind, threshold: f64) -> Self {
        self.constraints.push(Constraint::new(kind, threshold));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cost) {
            return Err(Error::InvalidArgument(format!("cost {} outside [0, 1]", self.cost)));
        }
        for c in &self.constraints {
            let needs_nonneg = !matches!(c.kind, ConstraintKind::UtilityFloor | ConstraintKind::Monotone);
            if !c.threshold.is_finite() || (needs_nonneg && c.threshold < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "threshold {} invalid for {:?}",
                    c.threshold, c.kind
                )));
            }
        }
        self.solver.validate()
    }
}

/// Utility maximization under an equal-opportunity bound.
pub fn preset_utilmax_eop(cost: f64, epsilon: f64) -> OptimizationSpec {
    OptimizationSpec::new(Objective::MaxUtility, cost).with_constraint(ConstraintKind::Eop, epsilon)
}

/// Qualification maximization subject to non-negative utility.
pub fn preset_maxqual(cost: f64) -> OptimizationSpec {
    OptimizationSpec::new(Objective::MaxQualification, cost).with_constraint(ConstraintKind::UtilityFloor, 0.0)
}

/// Per group: `(irreducible, aperiodic)`.
pub type CertificateStatus = [(bool, bool); 2];

/// Objective, constraint residuals and stationary point of one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// Value minimized by the solver (e.g. negative utility).
    pub objective: f64,
    /// One entry per constraint state (several for feature gaps and
    /// monotonicity), then one per group for the certificates when enforced.
    /// Non-negative means satisfied.
    pub residuals: Vec<f64>,
    pub certificates: CertificateStatus,
    /// `None` when a certificate failed.
    pub stationary: Option<GroupDistributions<f64>>,
    pub metrics: Option<MetricSnapshot<f64>>,
}

impl Evaluation {
    pub fn certified(&self) -> bool {
        self.certificates.iter().all(|(i, a)| *i && *a)
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_policy(policy: &Policy<f64>, model: &GenerativeModel<f64>) -> Result<()> {
    model.labels()?;
    if policy.states() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), found: policy.states() });
    }
    Ok(())
}

/// Stationary distributions of both groups, or `None` if a kernel fails its
/// certificates.
fn stationary_pair(
    model: &GenerativeModel<f64>,
    policy: &Policy<f64>,
) -> Result<(CertificateStatus, Option<GroupDistributions<f64>>)> {
    let kernels = model.kernels(policy)?;
    let certs = [
        (kernels[0].check_irreducible(), kernels[0].check_aperiodic()),
        (kernels[1].check_irreducible(), kernels[1].check_aperiodic()),
    ];
    if certs.iter().any(|(i, a)| !(*i && *a)) {
        return Ok((certs, None));
    }
    let mu = [kernels[0].stationary_distribution()?, kernels[1].stationary_distribution()?];
    Ok((certs, Some(mu)))
}

/// Smooth pieces of the problem at one stationary point: every entry of
/// `smooth` must be `>= 0` (or `= 0` where [`equality_mask`] says so), and `residuals` merges paired entries of absolute
/// value constraints into `threshold - |gap|`.
struct Scored {
    objective: f64,
    smooth: Vec<f64>,
    residuals: Vec<f64>,
    risks: [f64; 2],
    eop_gap: f64,
    metrics: MetricSnapshot<f64>,
}

fn score(spec: &OptimizationSpec, ctx: &MetricContext<'_, f64>) -> Result<Scored> {
    let mut smooth = Vec::new();
    let mut residuals = Vec::new();
    fn two_sided(gap: f64, eps: f64, smooth: &mut Vec<f64>, residuals: &mut Vec<f64>) {
        if eps == 0.0 {
            // Handed to the solver as the equality `gap = 0`.
            smooth.push(gap);
        } else {
            smooth.push(eps - gap);
            smooth.push(eps + gap);
        }
        residuals.push(eps - gap.abs());
    }
    for c in &spec.constraints {
        let eps = c.threshold;
        match c.kind {
            ConstraintKind::Eop => two_sided(ctx.eop_gap()?, eps, &mut smooth, &mut residuals),
            ConstraintKind::Dp => two_sided(ctx.dp_gap()?, eps, &mut smooth, &mut residuals),
            ConstraintKind::Inequity => two_sided(ctx.qualification_gap()?, eps, &mut smooth, &mut residuals),
            ConstraintKind::FeatureGap => {
                for gap in ctx.feature_gaps() {
                    two_sided(gap, eps, &mut smooth, &mut residuals);
                }
            }
            ConstraintKind::UtilityFloor => {
                let r = ctx.utility()? - eps;
                smooth.push(r);
                residuals.push(r);
            }
            ConstraintKind::Monotone => {
                for s in 0..2 {
                    for w in ctx.policy.approve(s).windows(2) {
                        smooth.push(w[1] - w[0]);
                        residuals.push(w[1] - w[0]);
                    }
                }
            }
        }
    }
    let objective = match spec.objective {
        Objective::MaxUtility => -ctx.utility()?,
        Objective::MaxQualification | Objective::MinDefault => -ctx.total_qualification()?,
        Objective::MinEop => ctx.eop_unfairness()?,
        Objective::MaxAverageScore => -ctx.average_score(),
        Objective::MinMinimaxRisk => ctx.minimax_risk()?,
    };
    let risks = [1.0 - ctx.group_qualification(0)?, 1.0 - ctx.group_qualification(1)?];
    let eop_gap = if spec.objective == Objective::MinEop { ctx.eop_gap()? } else { 0.0 };
    Ok(Scored { objective, smooth, residuals, risks, eop_gap, metrics: ctx.snapshot()? })
}

/// Scores `policy` against `spec` at its stationary point.
pub fn evaluate(
    policy: &Policy<f64>,
    spec: &OptimizationSpec,
    model: &GenerativeModel<f64>,
) -> Result<Evaluation> {
    spec.validate()?;
    check_policy(policy, model)?;
    let (certs, mu) = stationary_pair(model, policy)?;
    let cert_residuals = certs.iter().map(|(i, a)| if *i && *a { 0.0 } else { CERTIFICATE_FAILURE });
    let Some(mu) = mu else {
        // Nothing can be scored without a unique stationary point.
        let count = residual_count(spec, model.n());
        let mut residuals = vec![CERTIFICATE_FAILURE; count];
        residuals.extend(cert_residuals);
        return Ok(Evaluation {
            objective: f64::INFINITY,
            residuals,
            certificates: certs,
            stationary: None,
            metrics: None,
        });
    };
    let ctx = MetricContext::new(model, policy, &mu, spec.cost)?;
    let scored = score(spec, &ctx)?;
    let mut residuals = scored.residuals;
    if spec.enforce_convergence {
        residuals.extend(cert_residuals);
    }
    Ok(Evaluation {
        objective: scored.objective,
        residuals,
        certificates: certs,
        stationary: Some(mu),
        metrics: Some(scored.metrics),
    })
}

/// Marks the entries of `Scored::smooth` that are equalities: absolute value
/// constraints with a zero threshold.
fn equality_mask(spec: &OptimizationSpec, n: usize) -> Vec<bool> {
    let mut mask = Vec::new();
    for c in &spec.constraints {
        let pair = |mask: &mut Vec<bool>| {
            if c.threshold == 0.0 {
                mask.push(true);
            } else {
                mask.extend([false, false]);
            }
        };
        match c.kind {
            ConstraintKind::Eop | ConstraintKind::Dp | ConstraintKind::Inequity => pair(&mut mask),
            ConstraintKind::FeatureGap => (0..n).for_each(|_| pair(&mut mask)),
            ConstraintKind::UtilityFloor => mask.push(false),
            ConstraintKind::Monotone => mask.extend(std::iter::repeat_n(false, 2 * (n - 1))),
        }
    }
    mask
}

fn residual_count(spec: &OptimizationSpec, n: usize) -> usize {
    spec.constraints
        .iter()
        .map(|c| match c.kind {
            ConstraintKind::FeatureGap => n,
            ConstraintKind::Monotone => 2 * (n - 1),
            _ => 1,
        })
        .sum()
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub policy: Policy<f64>,
    pub feasible: bool,
    pub objective_value: f64,
    pub constraint_residuals: Vec<f64>,
    pub iterations: usize,
    pub certificate_status: CertificateStatus,
    pub fd_step: f64,
    pub starts: usize,
    pub stationary: Option<GroupDistributions<f64>>,
    pub metrics: Option<MetricSnapshot<f64>>,
}

/// The solver's view: policy entries plus, for the non-smooth objectives, an
/// epigraph variable bounding them from above.
struct PolicyProblem<'a> {
    spec: &'a OptimizationSpec,
    model: &'a GenerativeModel<f64>,
    width: usize,
    epigraph: bool,
}

impl PolicyProblem<'_> {
    fn policy(&self, x: &[f64]) -> Policy<f64> {
        Policy::from_flat(&x[..2 * self.width]).expect("solver keeps entries in the box")
    }
}

impl Nlp for PolicyProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.width + usize::from(self.epigraph)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![POLICY_MARGIN; 2 * self.width];
        let mut hi = vec![1.0 - POLICY_MARGIN; 2 * self.width];
        if self.epigraph {
            lo.push(0.0);
            hi.push(1.0);
        }
        (lo, hi)
    }

    fn equalities(&self) -> Vec<bool> {
        equality_mask(self.spec, self.width)
    }

    fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let policy = self.policy(x);
        let (_, mu) = stationary_pair(self.model, &policy).ok()?;
        let mu = mu?;
        let ctx = MetricContext::new(self.model, &policy, &mu, self.spec.cost).ok()?;
        let scored = score(self.spec, &ctx).ok()?;
        let mut c = scored.smooth;
        if !self.epigraph {
            return Some((scored.objective, c));
        }
        let tau = x[2 * self.width];
        match self.spec.objective {
            Objective::MinEop => {
                c.push(tau - scored.eop_gap);
                c.push(tau + scored.eop_gap);
            }
            _ => {
                c.push(tau - scored.risks[0]);
                c.push(tau - scored.risks[1]);
            }
        }
        Some((tau, c))
    }
}

/// Searches for the best feasible policy. Infeasibility is reported through
/// `feasible`, not as an error.
pub fn solve(spec: &OptimizationSpec, model: &GenerativeModel<f64>) -> Result<SolveReport> {
    spec.validate()?;
    model.labels()?;
    let width = model.n();
    let cfg = &spec.solver;
    let epigraph = matches!(spec.objective, Objective::MinEop | Objective::MinMinimaxRisk);
    let problem = PolicyProblem { spec, model, width, epigraph };
    let opts = SqpOptions {
        max_iterations: cfg.max_iterations,
        fd_step: cfg.fd_step,
        feasibility_tol: cfg.feasibility_tol,
    };

    let warm = match &cfg.warm_start {
        Some(p) => {
            check_policy(p, model)?;
            p.to_flat()
        }
        None => vec![0.5; 2 * width],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<sqp::SqpOutcome> = None;
    let mut iterations = 0;
    for start in 0..cfg.restarts {
        let mut x0 = if start == 0 {
            warm.clone()
        } else {
            (0..2 * width).map(|_| rng.random_range(POLICY_MARGIN..1.0 - POLICY_MARGIN)).collect()
        };
        if epigraph {
            // Start the bound at the value it has to cover.
            let p = Policy::from_flat(&x0)?;
            let e = evaluate(&p, spec, model)?;
            let start_tau = match spec.objective {
                Objective::MinEop => e.metrics.map_or(1.0, |m| m.eop),
                _ => e.objective.min(1.0),
            };
            x0.push(start_tau.clamp(0.0, 1.0));
        }
        let out = sqp::minimize(&problem, &x0, opts);
        log::debug!(
            "start {start}: objective {:.12e}, violation {:.3e}, {} iterations",
            out.objective,
            out.violation,
            out.iterations
        );
        iterations += out.iterations;
        best = Some(match best {
            None => out,
            Some(b) => sqp::better(b, out, cfg.feasibility_tol),
        });
    }
    let best = best.expect("at least one start");
    let x = if best.evaluated { best.x } else { warm };
    let policy = Policy::from_flat(&x[..2 * width])?;
    let eval = evaluate(&policy, spec, model)?;
    let feasible = eval.certified() && eval.min_residual() >= -cfg.feasibility_tol;
    Ok(SolveReport {
        policy,
        feasible,
        objective_value: eval.objective,
        constraint_residuals: eval.residuals,
        iterations,
        certificate_status: eval.certificates,
        fd_step: cfg.fd_step,
        starts: cfg.restarts,
        stationary: eval.stationary,
        metrics: eval.metrics,
    })
}
