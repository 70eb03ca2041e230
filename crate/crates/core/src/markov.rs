//! Finite-state Markov chain primitives.
//!
//! Kernels are row-stochastic throughout: entry `(z, w)` is the probability of
//! moving from state `z` to state `w` in one step, and distributions are row
//! vectors evolved as `mu K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scalar::Scalar;

/// Number of discrete feature states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct StateSpace(usize);

impl StateSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewStates { min: 2, got: n });
        }
        Ok(StateSpace(n))
    }

    pub fn size(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for StateSpace {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        StateSpace::new(n)
    }
}

impl From<StateSpace> for usize {
    fn from(s: StateSpace) -> usize {
        s.0
    }
}

/// Probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates non-negativity and unit mass.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        validate_probability_vector(&probs)?;
        Ok(Distribution { probs })
    }

    /// Divides by the total mass. Fails on negative entries or zero mass.
    pub fn normalized(mut probs: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
            return Err(Error::NegativeEntry { row: 0, col: i, value: v.as_f64() });
        }
        let total: T = probs.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::SumViolation { sum: total.as_f64() });
        }
        probs.iter_mut().for_each(|p| *p = *p / total);
        Distribution::new(probs)
    }

    pub fn uniform(n: usize) -> Self {
        let p = T::one() / T::lit(n as f64);
        Distribution { probs: vec![p; n] }
    }

    /// All mass on `state`.
    pub fn point(n: usize, state: usize) -> Self {
        let mut probs = vec![T::zero(); n];
        probs[state] = T::one();
        Distribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.probs.iter()
    }

    /// Expectation of a per-state quantity.
    pub fn expect(&self, values: &[T]) -> T {
        self.probs.iter().zip(values).map(|(p, v)| *p * *v).sum()
    }
}

impl<T> std::ops::Index<usize> for Distribution<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.probs[i]
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Distribution<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<T>::deserialize(d)?;
        Distribution::new(probs).map_err(serde::de::Error::custom)
    }
}

fn validate_probability_vector<T: Scalar>(probs: &[T]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    for (i, p) in probs.iter().enumerate() {
        if !(*p >= T::zero()) {
            return Err(Error::NegativeEntry { row: 0, col: i, value: p.as_f64() });
        }
    }
    let sum: T = probs.iter().copied().sum();
    if !((sum - T::one()).abs() <= T::stochastic_tol()) {
        return Err(Error::SumViolation { sum: sum.as_f64() });
    }
    Ok(())
}

/// Checks that `rows` is a square row-stochastic matrix.
pub fn validate_kernel<T: Scalar>(rows: &[Vec<T>]) -> Result<()> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    for (z, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare { rows: n, row: z, len: row.len() });
        }
        for (w, v) in row.iter().enumerate() {
            if !(*v >= T::zero()) {
                return Err(Error::NegativeEntry { row: z, col: w, value: v.as_f64() });
            }
        }
        let sum: T = row.iter().copied().sum();
        if !((sum - T::one()).abs() <= T::stochastic_tol()) {
            return Err(Error::RowSumViolation { row: z, sum: sum.as_f64() });
        }
    }
    Ok(())
}

/// Row-stochastic `n x n` transition matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        validate_kernel(&rows)?;
        let n = rows.len();
        Ok(TransitionKernel { n, data: rows.into_iter().flatten().collect() })
    }

    /// Divides each row by its sum before validating. Used for tables printed
    /// with truncated decimals.
    pub fn renormalized(rows: Vec<Vec<T>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(z, row)| {
                let sum: T = row.iter().copied().sum();
                if !(sum > T::zero()) {
                    return Err(Error::RowSumViolation { row: z, sum: sum.as_f64() });
                }
                Ok(row.into_iter().map(|v| v / sum).collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        TransitionKernel::new(rows)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        (0..n).for_each(|i| data[i * n + i] = T::one());
        TransitionKernel { n, data }
    }

    /// Builds from a flat buffer that is already known to be stochastic up to
    /// rounding; still validated.
    pub(crate) fn from_flat(n: usize, data: Vec<T>) -> Result<Self> {
        debug_assert_eq!(data.len(), n * n);
        let rows: Vec<Vec<T>> = data.chunks(n).map(|r| r.to_vec()).collect();
        TransitionKernel::new(rows)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> T {
        self.data[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[T] {
        &self.data[from * self.n..(from + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Swaps rows and columns. Only valid as a kernel if the input was
    /// doubly stochastic, so the result is returned as raw rows.
    pub fn transposed_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|c| (0..self.n).map(|r| self.get(r, c)).collect()).collect()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found });
        }
        Ok(())
    }

    /// One step of the chain: returns `mu K`.
    pub fn evolve(&self, mu: &Distribution<T>) -> Result<Distribution<T>> {
        self.check_dim(mu.len())?;
        Ok(Distribution { probs: self.left_mul(mu.as_slice()) })
    }

    fn left_mul(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        for (z, &p) in v.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (w, o) in out.iter_mut().enumerate() {
                *o = *o + p * self.data[z * n + w];
            }
        }
        out
    }

    /// Matrix product `self * other` (first `self`, then `other`).
    pub fn compose(&self, other: &TransitionKernel<T>) -> Result<TransitionKernel<T>> {
        self.check_dim(other.n)?;
        Ok(TransitionKernel { n: self.n, data: self.mul_raw(&other.data) })
    }

    fn mul_raw(&self, rhs: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] = out[i * n + j] + a * rhs[k * n + j];
                }
            }
        }
        out
    }

    /// `K^t` by repeated squaring, `t >= 1`.
    pub fn power(&self, t: u64) -> Result<TransitionKernel<T>> {
        if t == 0 {
            return Err(Error::InvalidArgument("kernel power requires t >= 1".into()));
        }
        let mut result: Option<TransitionKernel<T>> = None;
        let mut base = self.clone();
        let mut e = t;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.compose(&base)?,
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.compose(&base)?;
        }
        Ok(result.expect("t >= 1"))
    }

    /// Sufficient irreducibility certificate: every entry of `K + K^2 + ... + K^n`
    /// is strictly positive.
    pub fn check_irreducible(&self) -> bool {
        let mut acc = self.data.clone();
        let mut p = self.data.clone();
        for _ in 1..self.n {
            p = self.mul_raw_left(&p);
            acc.iter_mut().zip(&p).for_each(|(a, v)| *a = *a + *v);
        }
        acc.iter().all(|v| *v > T::positivity_tol())
    }

    // p * self
    fn mul_raw_left(&self, p: &[T]) -> Vec<T> {
        let tmp = TransitionKernel { n: self.n, data: p.to_vec() };
        tmp.mul_raw(&self.data)
    }

    /// Sufficient aperiodicity certificate: strictly positive diagonal.
    pub fn check_aperiodic(&self) -> bool {
        (0..self.n).all(|z| self.get(z, z) > T::positivity_tol())
    }

    /// Both certificates of the convergence theorem.
    pub fn certifies_convergence(&self) -> bool {
        self.check_aperiodic() && self.check_irreducible()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.data.iter().all(|v| *v > T::positivity_tol())
    }

    /// Unique stationary distribution of a certified kernel.
    ///
    /// Solves the balance equations `mu (K - I) = 0` with one equation
    /// replaced by `sum(mu) = 1`.
    pub fn stationary_distribution(&self) -> Result<Distribution<T>> {
        if !self.certifies_convergence() {
            return Err(Error::NotConvergent);
        }
        let n = self.n;
        // Row w of the system: sum_z mu_z (K(z,w) - [z==w]) = 0.
        let mut a = vec![T::zero(); n * n];
        for w in 0..n {
            for z in 0..n {
                let delta = if z == w { T::one() } else { T::zero() };
                a[w * n + z] = self.get(z, w) - delta;
            }
        }
        let mut b = vec![T::zero(); n];
        for z in 0..n {
            a[(n - 1) * n + z] = T::one();
        }
        b[n - 1] = T::one();
        let mu = solve_dense(&a, &b, T::epsilon())
            .ok_or_else(|| Error::NumericalFailure("singular balance system".into()))?;
        let cleaned: Vec<T> = mu.into_iter().map(|v| v.max(T::zero())).collect();
        let total: T = cleaned.iter().copied().sum();
        let mu: Vec<T> = cleaned.into_iter().map(|v| v / total).collect();
        let residual = self.stationary_residual(&mu);
        if !(residual <= T::stationary_tol()) {
            return Err(Error::NumericalFailure(format!(
                "stationary residual {} above tolerance",
                residual
            )));
        }
        Distribution::new(mu)
    }

    /// `||mu K - mu||_1`.
    pub fn stationary_residual(&self, mu: &[T]) -> T {
        self.left_mul(mu).iter().zip(mu).map(|(a, b)| (*a - *b).abs()).sum()
    }
}

impl<T: Scalar + Serialize> Serialize for TransitionKernel<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.data.chunks(self.n))
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for TransitionKernel<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        TransitionKernel::new(rows).map_err(serde::de::Error::custom)
    }
}

/// Total variation distance `0.5 * sum |p - q|`.
pub fn total_variation<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    let s: T = p.iter().zip(q.iter()).map(|(a, b)| (*a - *b).abs()).sum();
    Ok(s * T::lit(0.5))
}
