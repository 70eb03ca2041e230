//! Generative models of a population under a decision policy, and the
//! per-group transition kernels they induce.

mod file;
mod presets;

pub use file::{bundled_synthetic, bundled_synthetic_json, load_model, parse_model, DynamicsSource, LoadedModel, ModelFile};
pub use presets::{printed_matrix, DynamicsPreset, PrintedKey};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{Distribution, StateSpace, TransitionKernel};
use crate::scalar::Scalar;

/// Sensitive group index, `0` or `1`.
pub type Group = usize;

pub const GROUPS: [Group; 2] = [0, 1];

/// One distribution per sensitive group.
pub type GroupDistributions<T> = [Distribution<T>; 2];

fn check_unit<T: Scalar>(v: T, path: impl FnOnce() -> String) -> Result<()> {
    if !(v >= T::zero() && v <= T::one()) {
        return Err(Error::InvariantViolation {
            path: path(),
            message: format!("{v} is not a probability"),
        });
    }
    Ok(())
}

/// Population share of each sensitive group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Scalar + Serialize"))]
pub struct GroupPrior<T>([T; 2]);

impl<T: Scalar> GroupPrior<T> {
    pub fn new(gamma: [T; 2]) -> Result<Self> {
        for (s, g) in gamma.iter().enumerate() {
            check_unit(*g, || format!("gamma[{s}]"))?;
        }
        let sum = gamma[0] + gamma[1];
        if !((sum - T::one()).abs() <= T::stochastic_tol()) {
            return Err(Error::InvariantViolation {
                path: "gamma".into(),
                message: format!("sums to {sum}"),
            });
        }
        Ok(GroupPrior(gamma))
    }

    pub fn get(&self, s: Group) -> T {
        self.0[s]
    }
}

impl<T: Scalar> TryFrom<[T; 2]> for GroupPrior<T> {
    type Error = Error;
    fn try_from(g: [T; 2]) -> Result<Self> {
        GroupPrior::new(g)
    }
}

impl<T: Scalar> From<GroupPrior<T>> for [T; 2] {
    fn from(g: GroupPrior<T>) -> [T; 2] {
        g.0
    }
}

/// Per-group table of values in `[0, 1]`, indexed `[s][x]`.
fn check_table<T: Scalar>(name: &str, table: &[Vec<T>; 2]) -> Result<()> {
    for (s, row) in table.iter().enumerate() {
        for (x, v) in row.iter().enumerate() {
            check_unit(*v, || format!("{name}[{s}][{x}]"))?;
        }
    }
    if table[0].len() != table[1].len() {
        return Err(Error::DimensionMismatch { expected: table[0].len(), found: table[1].len() });
    }
    Ok(())
}

/// `P(Y = 1 | X = x, S = s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution<T> {
    positive: [Vec<T>; 2],
}

impl<T: Scalar> LabelDistribution<T> {
    pub fn new(positive: [Vec<T>; 2]) -> Result<Self> {
        check_table("ell", &positive)?;
        Ok(LabelDistribution { positive })
    }

    pub fn constant(n: usize, p: T) -> Self {
        LabelDistribution { positive: [vec![p; n], vec![p; n]] }
    }

    pub fn states(&self) -> usize {
        self.positive[0].len()
    }

    /// `P(Y = y | x, s)`.
    #[inline]
    pub fn prob(&self, y: u8, x: usize, s: Group) -> T {
        let p = self.positive[s][x];
        if y == 1 {
            p
        } else {
            T::one() - p
        }
    }

    pub fn positive(&self, s: Group) -> &[T] {
        &self.positive[s]
    }
}

/// `f(x | y, s)` of the qualification-state model: for each group and
/// qualification a distribution over the observable feature alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDistribution<T> {
    table: [[Distribution<T>; 2]; 2],
}

impl<T: Scalar> FeatureDistribution<T> {
    pub fn new(table: [[Distribution<T>; 2]; 2]) -> Result<Self> {
        let a = table[0][0].len();
        for row in &table {
            for d in row {
                if d.len() != a {
                    return Err(Error::DimensionMismatch { expected: a, found: d.len() });
                }
            }
        }
        Ok(FeatureDistribution { table })
    }

    pub fn alphabet(&self) -> usize {
        self.table[0][0].len()
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, s: Group) -> T {
        self.table[s][y][x]
    }
}

/// Decision policy `P(D = 1 | X = x, S = s)`, indexed `[s][x]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy<T> {
    approve: [Vec<T>; 2],
}

impl<T: Scalar> Policy<T> {
    pub fn new(approve: [Vec<T>; 2]) -> Result<Self> {
        check_table("pi", &approve)?;
        Ok(Policy { approve })
    }

    pub fn constant(n: usize, p: T) -> Self {
        Policy { approve: [vec![p; n], vec![p; n]] }
    }

    /// Layout is group-major: `[pi(.|0), pi(.|1)]`.
    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) || flat.is_empty() {
            return Err(Error::InvalidArgument(format!("policy vector of length {}", flat.len())));
        }
        let n = flat.len() / 2;
        Policy::new([flat[..n].to_vec(), flat[n..].to_vec()])
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.approve.iter().flatten().copied().collect()
    }

    pub fn states(&self) -> usize {
        self.approve[0].len()
    }

    /// `P(D = d | x, s)`.
    #[inline]
    pub fn prob(&self, d: u8, x: usize, s: Group) -> T {
        let p = self.approve[s][x];
        if d == 1 {
            p
        } else {
            T::one() - p
        }
    }

    pub fn approve(&self, s: Group) -> &[T] {
        &self.approve[s]
    }

    pub fn clamped(&self, lo: T, hi: T) -> Self {
        let c = |v: &Vec<T>| v.iter().map(|p| p.max(lo).min(hi)).collect();
        Policy { approve: [c(&self.approve[0]), c(&self.approve[1])] }
    }

    /// Swaps the two groups' rows.
    pub fn swapped(&self) -> Self {
        Policy { approve: [self.approve[1].clone(), self.approve[0].clone()] }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Policy<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw<T> {
            approve: [Vec<T>; 2],
        }
        let raw = Raw::<T>::deserialize(d)?;
        Policy::new(raw.approve).map_err(serde::de::Error::custom)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for LabelDistribution<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = <[Vec<T>; 2]>::deserialize(d)?;
        LabelDistribution::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Transition matrices `T_sdy` with entry `(x, k) = g(k | x, d, y, s)`.
///
/// For the qualification-state model the row index is the qualification and
/// the `y` slot is unused: both `y` entries hold the same matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Dynamics<T> {
    matrices: [[[TransitionKernel<T>; 2]; 2]; 2],
}

impl<T: Scalar> Dynamics<T> {
    /// Indexed `[s][d][y]`.
    pub fn new(matrices: [[[TransitionKernel<T>; 2]; 2]; 2]) -> Result<Self> {
        let n = matrices[0][0][0].size();
        for m in matrices.iter().flatten().flatten() {
            if m.size() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.size() });
            }
        }
        Ok(Dynamics { matrices })
    }

    /// Same matrix for every `(s, d, y)`.
    pub fn uniform(m: TransitionKernel<T>) -> Self {
        let pair = [m.clone(), m];
        let dy = [pair.clone(), pair];
        Dynamics { matrices: [dy.clone(), dy] }
    }

    /// Dynamics that depend on group and decision only, `[s][d]`.
    pub fn decision_only(m: [[TransitionKernel<T>; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = m;
        Dynamics::new([[[a.clone(), a], [b.clone(), b]], [[c.clone(), c], [d.clone(), d]]])
    }

    pub fn states(&self) -> usize {
        self.matrices[0][0][0].size()
    }

    pub fn get(&self, s: Group, d: u8, y: u8) -> &TransitionKernel<T> {
        &self.matrices[s][d as usize][y as usize]
    }

    pub fn all_strictly_positive(&self) -> bool {
        self.matrices.iter().flatten().flatten().all(|m| m.is_strictly_positive())
    }
}

/// Which generative structure the model encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Features drive labels, decisions change features.
    FeatureState,
    /// Hidden qualifications emit features, decisions change qualifications.
    QualificationState,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FeatureState => "feature-state",
            Variant::QualificationState => "qualification-state",
        }
    }
}

/// The per-individual emission table of the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub enum Emission<T> {
    Labels(LabelDistribution<T>),
    Features(FeatureDistribution<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct GenerativeModel<T> {
    pub states: StateSpace,
    pub gamma: GroupPrior<T>,
    pub emission: Emission<T>,
    pub dynamics: Dynamics<T>,
}

impl<T: Scalar> GenerativeModel<T> {
    /// Feature-state model: `X -> Y`, dynamics over `X`.
    pub fn feature_state(
        gamma: GroupPrior<T>,
        ell: LabelDistribution<T>,
        dynamics: Dynamics<T>,
    ) -> Result<Self> {
        let states = StateSpace::new(ell.states())?;
        if dynamics.states() != states.size() {
            return Err(Error::DimensionMismatch { expected: states.size(), found: dynamics.states() });
        }
        Ok(GenerativeModel { states, gamma, emission: Emission::Labels(ell), dynamics })
    }

    /// Qualification-state model: `Y -> X`, dynamics over binary `Y`.
    pub fn qualification_state(
        gamma: GroupPrior<T>,
        features: FeatureDistribution<T>,
        dynamics: Dynamics<T>,
    ) -> Result<Self> {
        if dynamics.states() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: dynamics.states() });
        }
        Ok(GenerativeModel {
            states: StateSpace::new(2)?,
            gamma,
            emission: Emission::Features(features),
            dynamics,
        })
    }

    pub fn variant(&self) -> Variant {
        match self.emission {
            Emission::Labels(_) => Variant::FeatureState,
            Emission::Features(_) => Variant::QualificationState,
        }
    }

    pub fn n(&self) -> usize {
        self.states.size()
    }

    pub fn labels(&self) -> Result<&LabelDistribution<T>> {
        match &self.emission {
            Emission::Labels(l) => Ok(l),
            Emission::Features(_) => Err(Error::WrongVariant(Variant::QualificationState.name())),
        }
    }

    pub fn features(&self) -> Result<&FeatureDistribution<T>> {
        match &self.emission {
            Emission::Features(f) => Ok(f),
            Emission::Labels(_) => Err(Error::WrongVariant(Variant::FeatureState.name())),
        }
    }

    /// Number of policy entries per group: feature states, or the feature
    /// alphabet of the qualification model.
    pub fn policy_width(&self) -> usize {
        match &self.emission {
            Emission::Labels(l) => l.states(),
            Emission::Features(f) => f.alphabet(),
        }
    }

    /// Same model with a different label table.
    pub fn with_labels(&self, ell: LabelDistribution<T>) -> Result<Self> {
        GenerativeModel::feature_state(self.gamma, ell, self.dynamics.clone())
    }

    /// Kernel of group `s` under `policy`:
    /// `K(x, k) = sum_{d,y} g(k | x, d, y, s) pi(d | x, s) ell(y | x, s)`.
    pub fn group_kernel(&self, policy: &Policy<T>, s: Group) -> Result<TransitionKernel<T>> {
        let ell = self.labels()?;
        let n = self.n();
        if policy.states() != n {
            return Err(Error::DimensionMismatch { expected: n, found: policy.states() });
        }
        let mut data = vec![T::zero(); n * n];
        for x in 0..n {
            for d in 0..2u8 {
                for y in 0..2u8 {
                    let w = policy.prob(d, x, s) * ell.prob(y, x, s);
                    let row = self.dynamics.get(s, d, y).row(x);
                    for (k, g) in row.iter().enumerate() {
                        data[x * n + k] = data[x * n + k] + *g * w;
                    }
                }
            }
        }
        TransitionKernel::from_flat(n, data)
    }

    /// Kernel over qualifications of group `s`:
    /// `K(y, k) = sum_{x,d} g(k | y, d, s) pi(d | x, s) f(x | y, s)`.
    pub fn group_kernel_qualification(
        &self,
        policy: &Policy<T>,
        s: Group,
    ) -> Result<TransitionKernel<T>> {
        let f = self.features()?;
        let a = f.alphabet();
        if policy.states() != a {
            return Err(Error::DimensionMismatch { expected: a, found: policy.states() });
        }
        let mut data = vec![T::zero(); 4];
        for y in 0..2usize {
            for d in 0..2u8 {
                // Probability of decision d given qualification y.
                let pd: T = (0..a).map(|x| policy.prob(d, x, s) * f.prob(x, y, s)).sum();
                let row = self.dynamics.get(s, d, 0).row(y);
                for (k, g) in row.iter().enumerate() {
                    data[y * 2 + k] = data[y * 2 + k] + *g * pd;
                }
            }
        }
        TransitionKernel::from_flat(2, data)
    }

    /// Kernel for whichever variant the model is.
    pub fn kernel(&self, policy: &Policy<T>, s: Group) -> Result<TransitionKernel<T>> {
        match self.variant() {
            Variant::FeatureState => self.group_kernel(policy, s),
            Variant::QualificationState => self.group_kernel_qualification(policy, s),
        }
    }

    pub fn kernels(&self, policy: &Policy<T>) -> Result<[TransitionKernel<T>; 2]> {
        Ok([self.kernel(policy, 0)?, self.kernel(policy, 1)?])
    }

    /// Model with the two groups' tables exchanged.
    pub fn swapped_groups(&self) -> Result<Self> {
        let gamma = GroupPrior::new([self.gamma.get(1), self.gamma.get(0)])?;
        let m = &self.dynamics.matrices;
        let dynamics = Dynamics::new([m[1].clone(), m[0].clone()])?;
        match &self.emission {
            Emission::Labels(l) => GenerativeModel::feature_state(
                gamma,
                LabelDistribution::new([l.positive[1].clone(), l.positive[0].clone()])?,
                dynamics,
            ),
            Emission::Features(f) => GenerativeModel::qualification_state(
                gamma,
                FeatureDistribution::new([f.table[1].clone(), f.table[0].clone()])?,
                dynamics,
            ),
        }
    }
}
