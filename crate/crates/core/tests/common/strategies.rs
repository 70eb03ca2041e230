use ltfair::markov::Distribution;
use ltfair::model::{Dynamics, GenerativeModel, GroupDistributions, GroupPrior, LabelDistribution, Policy};
use ltfair::TransitionKernel;
use proptest::prelude::*;

use super::oracles::RawModel;

/// Row-stochastic rows; roughly `sparsity` of the entries are zero.
pub fn stochastic_rows(n: usize, sparsity: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), n * n).prop_map(move |cells| {
        (0..n)
            .map(|x| {
                let mut row: Vec<f64> =
                    (0..n).map(|k| cells[x * n + k]).map(|(w, z)| if z < sparsity { 0.0 } else { w }).collect();
                let total: f64 = row.iter().sum();
                if total <= 1e-6 {
                    row = vec![0.0; n];
                    row[(x + 1) % n] = 1.0;
                    return row;
                }
                row.iter().map(|v| v / total).collect()
            })
            .collect()
    })
}

pub fn kernel(n: std::ops::RangeInclusive<usize>, sparsity: f64) -> impl Strategy<Value = TransitionKernel<f64>> {
    n.prop_flat_map(move |n| stochastic_rows(n, sparsity))
        .prop_map(|rows| TransitionKernel::renormalized(rows).expect("rows are stochastic"))
}

pub fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        if total <= 1e-9 {
            vec![1.0 / w.len() as f64; w.len()]
        } else {
            w.iter().map(|v| v / total).collect()
        }
    })
}

pub fn dist(v: &[f64]) -> Distribution<f64> {
    Distribution::normalized(v.to_vec()).expect("valid distribution")
}

pub fn pair(mu: &[Vec<f64>; 2]) -> GroupDistributions<f64> {
    [dist(&mu[0]), dist(&mu[1])]
}

pub fn probabilities(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = [Vec<f64>; 2]> {
    (prop::collection::vec(lo..hi, n), prop::collection::vec(lo..hi, n)).prop_map(|(a, b)| [a, b])
}

pub fn raw_model(n: usize) -> impl Strategy<Value = RawModel> {
    let g = prop::collection::vec(stochastic_rows(n, 0.0), 8);
    (0.05..0.95f64, probabilities(n, 0.02, 0.98), g).prop_map(move |(gamma0, ell, g)| {
        let mut it = g.into_iter();
        let mut next = || it.next().expect("eight tables");
        let g = [[[next(), next()], [next(), next()]], [[next(), next()], [next(), next()]]];
        RawModel { n, gamma0, ell, g }
    })
}

impl RawModel {
    pub fn model(&self) -> GenerativeModel<f64> {
        let k = |rows: &Vec<Vec<f64>>| TransitionKernel::renormalized(rows.clone()).expect("stochastic");
        let g = &self.g;
        let dynamics = Dynamics::new([
            [[k(&g[0][0][0]), k(&g[0][0][1])], [k(&g[0][1][0]), k(&g[0][1][1])]],
            [[k(&g[1][0][0]), k(&g[1][0][1])], [k(&g[1][1][0]), k(&g[1][1][1])]],
        ])
        .expect("square tables");
        GenerativeModel::feature_state(
            GroupPrior::new([self.gamma0, 1.0 - self.gamma0]).expect("prior"),
            LabelDistribution::new(self.ell.clone()).expect("labels"),
            dynamics,
        )
        .expect("consistent model")
    }
}

/// A toy model over 2 to 4 states with a policy and a distribution pair.
pub fn toy() -> impl Strategy<Value = (RawModel, [Vec<f64>; 2], [Vec<f64>; 2])> {
    (2usize..=4).prop_flat_map(|n| (raw_model(n), probabilities(n, 0.0, 1.0), distribution(n), distribution(n)))
        .prop_map(|(m, pi, a, b)| (m, pi, [a, b]))
}

pub fn policy(pi: &[Vec<f64>; 2]) -> Policy<f64> {
    Policy::new(pi.clone()).expect("entries in [0, 1]")
}
