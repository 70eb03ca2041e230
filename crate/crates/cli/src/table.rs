//! The flat trajectory CSV: one row per `(t, s, state)`, with that step's
//! metrics repeated across its rows.

use std::io::{Read, Write};

use ltfair::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

pub const HEADER: [&str; 20] = [
    "t",
    "s",
    "state",
    "mu",
    "utility",
    "eop",
    "dp",
    "inequity",
    "q0",
    "q1",
    "loan0",
    "loan1",
    "payback0",
    "payback1",
    "cum_utility",
    "cum_inequity",
    "cum_eop",
    "policy_kind",
    "seed",
    "lambda",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub s: usize,
    pub state: usize,
    pub mu: f64,
    pub utility: f64,
    pub eop: f64,
    pub dp: f64,
    pub inequity: f64,
    pub q0: f64,
    pub q1: f64,
    pub loan0: f64,
    pub loan1: f64,
    pub payback0: f64,
    pub payback1: f64,
    pub cum_utility: f64,
    pub cum_inequity: f64,
    pub cum_eop: f64,
    pub policy_kind: String,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
}

/// Which policy produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label<'a> {
    pub policy_kind: &'a str,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
}

pub fn rows(trajectory: &Trajectory<f64>, label: Label<'_>) -> Vec<TrajectoryRow> {
    let mut out = Vec::new();
    for (t, (mu, m)) in trajectory.steps.iter().zip(&trajectory.metrics).enumerate() {
        for (s, dist) in mu.iter().enumerate() {
            for (state, p) in dist.iter().enumerate() {
                out.push(TrajectoryRow {
                    t,
                    s,
                    state,
                    mu: *p,
                    utility: m.utility,
                    eop: m.eop,
                    dp: m.dp,
                    inequity: m.inequity,
                    q0: m.qualification[0],
                    q1: m.qualification[1],
                    loan0: m.loan[0],
                    loan1: m.loan[1],
                    payback0: m.payback[0],
                    payback1: m.payback[1],
                    cum_utility: trajectory.cumulative.utility[t],
                    cum_inequity: trajectory.cumulative.inequity[t],
                    cum_eop: trajectory.cumulative.eop[t],
                    policy_kind: label.policy_kind.to_string(),
                    seed: label.seed,
                    lambda: label.lambda,
                });
            }
        }
    }
    out
}

pub fn write<W: Write>(w: W, rows: &[TrajectoryRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(HEADER)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read<R: Read>(r: R) -> CliResult<Vec<TrajectoryRow>> {
    let mut input = csv::Reader::from_reader(r);
    Ok(input.deserialize().collect::<Result<_, _>>()?)
}
