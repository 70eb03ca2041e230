//! Profit, distributional and predictive-fairness quantities evaluated at a
//! pair of group-conditional feature distributions.
//!
//! Every quantity works for any distribution pair, so the same code scores a
//! stationary point and each step of a trajectory.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GenerativeModel, Group, GroupDistributions, Policy, GROUPS};
use crate::scalar::Scalar;

/// Conditional denominators at or below this are treated as empty groups.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Everything a metric needs: model, policy, distribution pair and the cost of
/// a positive decision.
#[derive(Debug, Clone, Copy)]
pub struct MetricContext<'a, T> {
    pub model: &'a GenerativeModel<T>,
    pub policy: &'a Policy<T>,
    pub mu: &'a GroupDistributions<T>,
    pub cost: T,
}

impl<'a, T: Scalar> MetricContext<'a, T> {
    pub fn new(
        model: &'a GenerativeModel<T>,
        policy: &'a Policy<T>,
        mu: &'a GroupDistributions<T>,
        cost: T,
    ) -> Result<Self> {
        if !(cost >= T::zero() && cost <= T::one()) {
            return Err(Error::InvalidArgument(format!("cost {cost} outside [0, 1]")));
        }
        let n = model.n();
        for m in mu {
            if m.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.len() });
            }
        }
        Ok(MetricContext { model, policy, mu, cost })
    }

    fn approve(&self, s: Group) -> Result<&'a [T]> {
        let a = self.policy.approve(s);
        if a.len() != self.model.n() {
            return Err(Error::DimensionMismatch { expected: self.model.n(), found: a.len() });
        }
        Ok(a)
    }

    /// Expected profit: `sum_{x,s} pi(1|x,s) (ell(1|x,s) - c) mu(x|s) gamma(s)`.
    pub fn utility(&self) -> Result<T> {
        let ell = self.model.labels()?;
        let mut u = T::zero();
        for s in GROUPS {
            let a = self.approve(s)?;
            let per_group: T = (0..self.model.n())
                .map(|x| a[x] * (ell.positive(s)[x] - self.cost) * self.mu[s][x])
                .sum();
            u = u + per_group * self.model.gamma.get(s);
        }
        Ok(u)
    }

    /// Share of group `s` with a positive label.
    pub fn group_qualification(&self, s: Group) -> Result<T> {
        let ell = self.model.labels()?;
        Ok(unit(self.mu[s].expect(ell.positive(s))))
    }

    /// Population-weighted qualification `sum_s Q(s) gamma(s)`.
    pub fn total_qualification(&self) -> Result<T> {
        Ok(self.group_qualification(0)? * self.model.gamma.get(0)
            + self.group_qualification(1)? * self.model.gamma.get(1))
    }

    /// `Q(0) - Q(1)`.
    pub fn qualification_gap(&self) -> Result<T> {
        Ok(self.group_qualification(0)? - self.group_qualification(1)?)
    }

    /// `|Q(0) - Q(1)|`.
    pub fn inequity(&self) -> Result<T> {
        Ok(self.qualification_gap()?.abs())
    }

    /// Mean score with bin `x` valued `(x + 1) / n`, weighted by group share.
    pub fn average_score(&self) -> T {
        let n = self.mu[0].len();
        let weights: Vec<T> = (0..n).map(|x| T::lit((x + 1) as f64 / n as f64)).collect();
        GROUPS
            .iter()
            .map(|&s| self.mu[s].expect(&weights) * self.model.gamma.get(s))
            .sum()
    }

    /// `P(D = 1 | Y = 1, S = s)`.
    pub fn true_positive_rate(&self, s: Group) -> Result<T> {
        let ell = self.model.labels()?;
        let a = self.approve(s)?;
        let (mut num, mut den) = (T::zero(), T::zero());
        for x in 0..self.model.n() {
            let q = ell.positive(s)[x] * self.mu[s][x];
            num = num + a[x] * q;
            den = den + q;
        }
        if !(den > T::lit(DEGENERATE_DENOMINATOR)) {
            return Err(Error::DegenerateGroup { group: s, denominator: den.as_f64() });
        }
        Ok(unit(num / den))
    }

    /// `TPR(0) - TPR(1)`.
    pub fn eop_gap(&self) -> Result<T> {
        Ok(self.true_positive_rate(0)? - self.true_positive_rate(1)?)
    }

    /// Equal-opportunity unfairness `|TPR(0) - TPR(1)|`.
    pub fn eop_unfairness(&self) -> Result<T> {
        Ok(self.eop_gap()?.abs())
    }

    /// `P(D = 1 | S = s)`.
    pub fn loan_rate(&self, s: Group) -> Result<T> {
        // Same variant requirement as the label-based metrics: the policy is
        // indexed by the state the distributions live on.
        self.model.labels()?;
        Ok(unit(self.mu[s].expect(self.approve(s)?)))
    }

    /// `P(D=1|S=0) - P(D=1|S=1)`.
    pub fn dp_gap(&self) -> Result<T> {
        Ok(self.loan_rate(0)? - self.loan_rate(1)?)
    }

    /// Demographic-parity unfairness.
    pub fn dp_unfairness(&self) -> Result<T> {
        Ok(self.dp_gap()?.abs())
    }

    /// Largest group default risk `max_s (1 - Q(s))`.
    pub fn minimax_risk(&self) -> Result<T> {
        let r0 = T::one() - self.group_qualification(0)?;
        let r1 = T::one() - self.group_qualification(1)?;
        Ok(r0.max(r1))
    }

    /// Per group `(P(D=1|s), P(Y=1|s))`.
    pub fn loan_and_payback_rates(&self) -> Result<[(T, T); 2]> {
        Ok([
            (self.loan_rate(0)?, self.group_qualification(0)?),
            (self.loan_rate(1)?, self.group_qualification(1)?),
        ])
    }

    /// `mu(x|0) - mu(x|1)` for every state.
    pub fn feature_gaps(&self) -> Vec<T> {
        self.mu[0].iter().zip(self.mu[1].iter()).map(|(a, b)| *a - *b).collect()
    }

    /// All per-step quantities in one pass.
    pub fn snapshot(&self) -> Result<MetricSnapshot<T>> {
        let rates = self.loan_and_payback_rates()?;
        Ok(MetricSnapshot {
            utility: self.utility()?,
            eop: self.eop_unfairness()?,
            dp: self.dp_unfairness()?,
            inequity: self.inequity()?,
            qualification: [rates[0].1, rates[1].1],
            loan: [rates[0].0, rates[1].0],
            payback: [rates[0].1, rates[1].1],
        })
    }
}

/// Rounding can push a probability a few ulps outside `[0, 1]`.
fn unit<T: Scalar>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

/// Metric values at one distribution pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSnapshot<T> {
    pub utility: T,
    pub eop: T,
    pub dp: T,
    pub inequity: T,
    pub qualification: [T; 2],
    pub loan: [T; 2],
    pub payback: [T; 2],
}

/// Running sums.
pub fn cumulative_series<T: Scalar>(values: &[T]) -> Vec<T> {
    values
        .iter()
        .scan(T::zero(), |acc, v| {
            *acc = *acc + *v;
            Some(*acc)
        })
        .collect()
}
