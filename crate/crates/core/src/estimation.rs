//! Estimating labels and dynamics from two-step temporal data in which the
//! label is only seen for approved individuals, and measuring how policies
//! solved on such estimates behave on the true model.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::TransitionKernel;
use crate::metrics::MetricSnapshot;
use crate::model::{Dynamics, GenerativeModel, Group, GroupDistributions, GroupPrior, LabelDistribution, Policy};
use crate::optimize::{evaluate, solve, OptimizationSpec, SolveReport};

/// Cells observed fewer times than this get add-one smoothing.
pub const SUPPORT_FLOOR: f64 = 5.0;

const CHUNK: usize = 4096;

/// Decision rules used only to collect data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ProbeKind {
    /// Approve everyone with probability 0.5.
    Random,
    /// 0.1 on states 0..=2, above that 0.3 for group 0 and 0.9 for group 1.
    Bias,
    /// Approve states `>= theta` outright.
    Threshold { theta: usize },
    /// Skip estimation and solve on the true model.
    TrueModel,
}

impl ProbeKind {
    pub fn name(self) -> String {
        match self {
            ProbeKind::Random => "random".into(),
            ProbeKind::Bias => "bias".into(),
            ProbeKind::Threshold { theta } => format!("threshold-{theta}"),
            ProbeKind::TrueModel => "true-model".into(),
        }
    }
}

/// The probe's approval table over `n` states. The true-model shortcut has
/// no table and yields `None`.
pub fn probe_policy(kind: ProbeKind, n: usize) -> Option<Policy<f64>> {
    let row = |s: Group| -> Vec<f64> {
        (0..n)
            .map(|x| match kind {
                ProbeKind::Random => 0.5,
                ProbeKind::Bias if x <= 2 => 0.1,
                ProbeKind::Bias => [0.3, 0.9][s],
                ProbeKind::Threshold { theta } => f64::from(u8::from(x >= theta)),
                ProbeKind::TrueModel => unreachable!(),
            })
            .collect()
    };
    match kind {
        ProbeKind::TrueModel => None,
        _ => Some(Policy::new([row(0), row(1)]).expect("probe entries are probabilities")),
    }
}

/// One individual seen at two consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSample {
    pub x0: usize,
    pub s: Group,
    pub d0: u8,
    /// Present iff `d0 == 1`.
    pub y0: Option<u8>,
    pub x1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDataset {
    pub states: usize,
    pub samples: Vec<TemporalSample>,
}

impl TemporalDataset {
    pub fn new(states: usize, samples: Vec<TemporalSample>) -> Result<Self> {
        for (i, r) in samples.iter().enumerate() {
            let bad = |message: String| Error::InvariantViolation { path: format!("samples[{i}]"), message };
            if r.x0 >= states || r.x1 >= states || r.s > 1 || r.d0 > 1 {
                return Err(bad(format!("{r:?} outside {states} states")));
            }
            match (r.d0, r.y0) {
                (1, Some(y)) if y <= 1 => {}
                (0, None) => {}
                _ => return Err(bad(format!("label {:?} with decision {}", r.y0, r.d0))),
            }
        }
        Ok(TemporalDataset { states, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples whose label is observed.
    pub fn observed_fraction(&self) -> f64 {
        let seen = self.samples.iter().filter(|r| r.d0 == 1).count();
        seen as f64 / self.len().max(1) as f64
    }

    /// CSV with header `x0,s,d0,y0,x1`; masked labels are empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.samples {
            out.serialize(r).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, states: usize) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let headers = input.headers().map_err(csv_error)?;
        if headers != vec!["x0", "s", "d0", "y0", "x1"] {
            return Err(Error::Schema(format!("unexpected header {headers:?}")));
        }
        let samples = input.deserialize().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_error)?;
        TemporalDataset::new(states, samples)
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => Error::Schema(format!("{other:?}")),
    }
}

fn draw_chunk<R: Rng>(
    model: &GenerativeModel<f64>,
    picks: &[WeightedIndex<f64>; 2],
    probe: &Policy<f64>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<TemporalSample>> {
    let ell = model.labels()?;
    let gamma0 = model.gamma.get(0);
    let n = model.n();
    (0..count)
        .map(|_| {
            let s = usize::from(rng.random::<f64>() >= gamma0);
            let x0 = picks[s].sample(rng);
            let d0 = u8::from(rng.random::<f64>() < probe.approve(s)[x0]);
            let y = u8::from(rng.random::<f64>() < ell.positive(s)[x0]);
            let row = model.dynamics.get(s, d0, y).row(x0);
            let x1 = WeightedIndex::new(row).map_err(|e| Error::NumericalFailure(e.to_string()))?.sample(rng);
            debug_assert!(x1 < n);
            Ok(TemporalSample { x0, s, d0, y0: (d0 == 1).then_some(y), x1 })
        })
        .collect()
}

/// `m` draws of `s ~ gamma`, `x0 ~ mu0(.|s)`, `d0 ~ probe`, `y0 ~ ell`,
/// `x1 ~ g(.|x0, d0, y0, s)`, with `y0` hidden where `d0 = 0`. Chunks are
/// drawn in parallel from per-chunk streams of one seed, so the result does
/// not depend on the thread count.
pub fn generate_temporal_dataset(
    model: &GenerativeModel<f64>,
    mu0: &GroupDistributions<f64>,
    probe: &Policy<f64>,
    m: usize,
    seed: u64,
) -> Result<TemporalDataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    model.labels()?;
    let n = model.n();
    if probe.states() != n {
        return Err(Error::DimensionMismatch { expected: n, found: probe.states() });
    }
    for d in mu0 {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: d.len() });
        }
    }
    let pick = |d: &crate::markov::Distribution<f64>| {
        WeightedIndex::new(d.as_slice()).map_err(|e| Error::NumericalFailure(e.to_string()))
    };
    let picks = [pick(&mu0[0])?, pick(&mu0[1])?];
    let chunks: Vec<Vec<TemporalSample>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            draw_chunk(model, &picks, probe, CHUNK.min(m - c * CHUNK), &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(TemporalDataset { states: n, samples: chunks.concat() })
}

/// Observation weight behind one estimated cell, and whether it was smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSupport {
    pub count: f64,
    pub smoothed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedModel {
    pub gamma_hat: GroupPrior<f64>,
    pub ell_hat: LabelDistribution<f64>,
    pub g_hat: Dynamics<f64>,
    /// Observed labels per cell, `[s][x]`.
    pub label_support: [Vec<CellSupport>; 2],
    /// Transition weight per row, `[s][d][y][x]`. Rejected rows carry
    /// fractional weight split by the estimated label probability.
    pub transition_support: [[[Vec<CellSupport>; 2]; 2]; 2],
}

impl EstimatedModel {
    pub fn model(&self) -> Result<GenerativeModel<f64>> {
        GenerativeModel::feature_state(self.gamma_hat, self.ell_hat.clone(), self.g_hat.clone())
    }

    pub fn smoothed_cells(&self) -> usize {
        let labels = self.label_support.iter().flatten();
        let rows = self.transition_support.iter().flatten().flatten().flatten();
        labels.chain(rows).filter(|c| c.smoothed).count()
    }
}

/// Frequencies with add-one smoothing when the total is below the floor.
fn smoothed(counts: &[f64]) -> (Vec<f64>, CellSupport) {
    let total: f64 = counts.iter().sum();
    let smooth = total < SUPPORT_FLOOR;
    let extra = if smooth { 1.0 } else { 0.0 };
    let denom = total + extra * counts.len() as f64;
    let probs = counts.iter().map(|c| (c + extra) / denom).collect();
    (probs, CellSupport { count: total, smoothed: smooth })
}

/// Empirical label rates from approved samples and transition frequencies per
/// `(s, d, y, x)` row. A rejected sample's label is unknown, so its transition
/// counts toward both label rows, weighted by the estimated label rate.
/// Labels on rejected samples are never read.
pub fn estimate_distributions(data: &TemporalDataset) -> Result<EstimatedModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.states;
    let mut groups = [0.0; 2];
    let mut labels = [vec![[0.0f64; 2]; n], vec![[0.0f64; 2]; n]];
    for (i, r) in data.samples.iter().enumerate() {
        if r.x0 >= n || r.x1 >= n || r.s > 1 || r.d0 > 1 {
            return Err(Error::InvariantViolation {
                path: format!("samples[{i}]"),
                message: format!("{r:?} outside {n} states"),
            });
        }
        groups[r.s] += 1.0;
        if r.d0 == 1 {
            match r.y0 {
                Some(y @ 0..=1) => labels[r.s][r.x0][y as usize] += 1.0,
                _ => {
                    return Err(Error::InvariantViolation {
                        path: format!("samples[{i}].y0"),
                        message: "approved sample without a binary label".into(),
                    })
                }
            }
        }
    }

    let mut ell = [vec![0.0; n], vec![0.0; n]];
    let mut label_support = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for s in 0..2 {
        for x in 0..n {
            let (p, support) = smoothed(&labels[s][x]);
            ell[s][x] = p[1];
            label_support[s].push(support);
        }
    }

    // counts[s][d][y][x][k]
    let mut counts = vec![vec![vec![vec![vec![0.0; n]; n]; 2]; 2]; 2];
    for r in &data.samples {
        if r.d0 == 1 {
            let y = r.y0.expect("checked above") as usize;
            counts[r.s][1][y][r.x0][r.x1] += 1.0;
        } else {
            let p = ell[r.s][r.x0];
            counts[r.s][0][1][r.x0][r.x1] += p;
            counts[r.s][0][0][r.x0][r.x1] += 1.0 - p;
        }
    }
    let mut support = std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| Vec::new())));
    let mut kernel = |s: usize, d: usize, y: usize| -> Result<TransitionKernel<f64>> {
        let rows = (0..n)
            .map(|x| {
                let (p, c) = smoothed(&counts[s][d][y][x]);
                support[s][d][y].push(c);
                p
            })
            .collect();
        TransitionKernel::renormalized(rows)
    };
    let mut matrices = Vec::with_capacity(8);
    for s in 0..2 {
        for d in 0..2 {
            for y in 0..2 {
                matrices.push(kernel(s, d, y)?);
            }
        }
    }
    let mut it = matrices.into_iter();
    let mut next = || it.next().expect("eight matrices");
    let g_hat = Dynamics::new(std::array::from_fn(|_| std::array::from_fn(|_| [next(), next()])))?;

    let total = groups[0] + groups[1];
    Ok(EstimatedModel {
        gamma_hat: GroupPrior::new([groups[0] / total, groups[1] / total])?,
        ell_hat: LabelDistribution::new(ell)?,
        g_hat,
        label_support,
        transition_support: support,
    })
}

/// One probe's outcome: the policy solved on its estimate, scored on the true
/// model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub probe: String,
    pub policy: Policy<f64>,
    /// Feasibility as judged on the model the policy was solved on.
    pub feasible_on_estimate: bool,
    /// Feasibility on the true model.
    pub feasible_on_truth: bool,
    pub true_metrics: Option<MetricSnapshot<f64>>,
    pub observed_fraction: Option<f64>,
    pub smoothed_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub samples: usize,
    pub seed: u64,
    /// Solved directly on the true model.
    pub reference: SensitivityRow,
    pub rows: Vec<SensitivityRow>,
}

fn score_on_truth(
    probe: String,
    report: &SolveReport,
    spec: &OptimizationSpec,
    truth: &GenerativeModel<f64>,
) -> Result<SensitivityRow> {
    let e = evaluate(&report.policy, spec, truth)?;
    Ok(SensitivityRow {
        probe,
        policy: report.policy.clone(),
        feasible_on_estimate: report.feasible,
        feasible_on_truth: e.certified() && e.min_residual() >= -spec.solver.feasibility_tol,
        true_metrics: e.metrics,
        observed_fraction: None,
        smoothed_cells: None,
    })
}

/// For each probe: generate `m` samples, estimate, solve `spec` on the
/// estimate and score the policy on `truth`.
pub fn end_to_end_sensitivity(
    truth: &GenerativeModel<f64>,
    mu0: &GroupDistributions<f64>,
    probes: &[ProbeKind],
    spec: &OptimizationSpec,
    m: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    let direct = solve(spec, truth)?;
    let reference = score_on_truth("reference".into(), &direct, spec, truth)?;
    let rows = probes
        .iter()
        .map(|&kind| {
            let Some(probe) = probe_policy(kind, truth.n()) else {
                return score_on_truth(kind.name(), &direct, spec, truth);
            };
            let data = generate_temporal_dataset(truth, mu0, &probe, m, seed)?;
            let est = estimate_distributions(&data)?;
            let report = solve(spec, &est.model()?)?;
            log::info!(
                "probe {}: {} smoothed cells, feasible on estimate {}",
                kind.name(),
                est.smoothed_cells(),
                report.feasible
            );
            let mut row = score_on_truth(kind.name(), &report, spec, truth)?;
            row.observed_fraction = Some(data.observed_fraction());
            row.smoothed_cells = Some(est.smoothed_cells());
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(SensitivityReport { samples: m, seed, reference, rows })
}
