//! Bundled credit-score dynamics over four score bins.
//!
//! The tables below are kept exactly as published, which is column-stochastic
//! (column = current bin, row = next bin) with five-decimal truncation. Loading
//! transposes to row-stochastic and renormalizes every row.
//!
//! One-sided tables are labelled `T_sdy`. The two-sided tables (`recourse`,
//! `discouraged`) are published with pairs like `T_000 = T_001` that differ only
//! in the last index while both groups share the same dynamics, so their labels
//! are read as `T_yds`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Dynamics;
use crate::error::{Error, Result};
use crate::markov::TransitionKernel;
use crate::scalar::Scalar;

type Printed = [[f64; 4]; 4];

const E: f64 = 0.03333;

/// Decisions of 0: nothing changes.
const STAY: Printed = [[0.9, E, E, E], [E, 0.9, E, E], [E, E, 0.9, E], [E, E, E, 0.9]];
/// Default after approval: fall to the lowest bin.
const FALL: Printed = [[0.9, 0.9, 0.9, 0.9], [E, E, E, E], [E, E, E, E], [E, E, E, E]];

const fn climb(stay: f64, up: f64) -> Printed {
    [[stay, E, E, E], [up, stay, E, E], [E, up, stay, E], [E, E, up, 0.9]]
}

const CLIMB_SLOW: Printed = climb(0.53333, 0.4);
const CLIMB_MEDIUM: Printed = climb(0.33333, 0.6);
// Bottom-left entry is printed as 0.033335.
const CLIMB_FAST: Printed =
    [[0.13333, E, E, E], [0.8, 0.13333, E, E], [E, 0.8, 0.13333, E], [0.033335, E, 0.8, 0.9]];
const RECOURSE_UNQUALIFIED: Printed = climb(0.7, 0.23333);
const RECOURSE_QUALIFIED: Printed = climb(0.5, 0.43333);
const DISCOURAGED_UNQUALIFIED: Printed = [
    [0.9, 0.63333, 0.13333, E],
    [E, 0.3, 0.53333, 0.23333],
    [E, E, 0.3, 0.43333],
    [E, E, E, 0.3],
];
const DISCOURAGED_QUALIFIED: Printed = [
    [0.9, 0.43333, 0.13333, E],
    [E, 0.5, 0.33333, 0.23333],
    [E, E, 0.5, 0.23333],
    [E, E, E, 0.5],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsPreset {
    OneSidedGeneral,
    OneSidedSlow,
    OneSidedMedium,
    OneSidedFast,
    Recourse,
    Discouraged,
}

impl DynamicsPreset {
    pub const ALL: [DynamicsPreset; 6] = [
        DynamicsPreset::OneSidedGeneral,
        DynamicsPreset::OneSidedSlow,
        DynamicsPreset::OneSidedMedium,
        DynamicsPreset::OneSidedFast,
        DynamicsPreset::Recourse,
        DynamicsPreset::Discouraged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DynamicsPreset::OneSidedGeneral => "one-sided-general",
            DynamicsPreset::OneSidedSlow => "one-sided-slow",
            DynamicsPreset::OneSidedMedium => "one-sided-medium",
            DynamicsPreset::OneSidedFast => "one-sided-fast",
            DynamicsPreset::Recourse => "recourse",
            DynamicsPreset::Discouraged => "discouraged",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            DynamicsPreset::OneSidedGeneral => {
                "only approvals move scores; repayment climbs at a group-dependent rate"
            }
            DynamicsPreset::OneSidedSlow => "only approvals move scores; slow climb on repayment",
            DynamicsPreset::OneSidedMedium => "only approvals move scores; medium climb on repayment",
            DynamicsPreset::OneSidedFast => "only approvals move scores; fast climb on repayment",
            DynamicsPreset::Recourse => "rejected applicants improve their scores",
            DynamicsPreset::Discouraged => "rejected applicants' scores decline",
        }
    }

    /// Printed table for each `(s, d, y)` slot.
    fn slots(self) -> [[[&'static Printed; 2]; 2]; 2] {
        use DynamicsPreset::*;
        match self {
            OneSidedGeneral => [
                [[&STAY, &STAY], [&FALL, &CLIMB_MEDIUM]],
                [[&STAY, &STAY], [&FALL, &CLIMB_SLOW]],
            ],
            OneSidedSlow | OneSidedMedium | OneSidedFast => {
                let climb = match self {
                    OneSidedSlow => &CLIMB_SLOW,
                    OneSidedMedium => &CLIMB_MEDIUM,
                    _ => &CLIMB_FAST,
                };
                let g = [[&STAY, &STAY], [&FALL, climb]];
                [g, g]
            }
            Recourse => {
                let g = [[&RECOURSE_UNQUALIFIED, &RECOURSE_QUALIFIED], [&FALL, &CLIMB_MEDIUM]];
                [g, g]
            }
            Discouraged => {
                let g =
                    [[&DISCOURAGED_UNQUALIFIED, &DISCOURAGED_QUALIFIED], [&FALL, &CLIMB_MEDIUM]];
                [g, g]
            }
        }
    }

    /// Row-stochastic dynamics: printed tables transposed and renormalized.
    pub fn dynamics<T: Scalar>(self) -> Dynamics<T> {
        let slots = self.slots();
        let load = |p: &Printed| {
            let rows = (0..4).map(|x| (0..4).map(|k| T::lit(p[k][x])).collect()).collect();
            TransitionKernel::renormalized(rows).expect("bundled table is stochastic")
        };
        let group = |s: usize| {
            [
                [load(slots[s][0][0]), load(slots[s][0][1])],
                [load(slots[s][1][0]), load(slots[s][1][1])],
            ]
        };
        Dynamics::new([group(0), group(1)]).expect("bundled tables are 4x4")
    }
}

impl fmt::Display for DynamicsPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DynamicsPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DynamicsPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Slot of a table as labelled in the published listing, e.g. `"T_010"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrintedKey {
    pub s: usize,
    pub d: u8,
    pub y: u8,
}

impl PrintedKey {
    /// Decodes a three-digit label using the preset's subscript order.
    pub fn parse(preset: DynamicsPreset, label: &str) -> Result<Self> {
        let digits: Vec<u8> = label
            .trim_start_matches("T_")
            .bytes()
            .map(|b| b.wrapping_sub(b'0'))
            .collect();
        if digits.len() != 3 || digits.iter().any(|d| *d > 1) {
            return Err(Error::Schema(format!("bad matrix label `{label}`")));
        }
        let (a, b, c) = (digits[0], digits[1], digits[2]);
        Ok(match preset {
            DynamicsPreset::Recourse | DynamicsPreset::Discouraged => {
                PrintedKey { s: c as usize, d: b, y: a }
            }
            _ => PrintedKey { s: a as usize, d: b, y: c },
        })
    }
}

/// The published (column-stochastic, unnormalized) table under `label`.
pub fn printed_matrix(preset: DynamicsPreset, label: &str) -> Result<[[f64; 4]; 4]> {
    let key = PrintedKey::parse(preset, label)?;
    Ok(*preset.slots()[key.s][key.d as usize][key.y as usize])
}
