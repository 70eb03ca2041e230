//! JSON model files.
//!
//! ```json
//! {
//!   "n": 4,
//!   "groups": 2,
//!   "gamma": [0.25, 0.75],
//!   "mu0": [[...n...], [...n...]],
//!   "ell": [[...n...], [...n...]],
//!   "dynamics": { "preset": "one-sided-general" },
//!   "variant": "feature-state"
//! }
//! ```
//!
//! `dynamics` is either `{"preset": name}` or the eight row-stochastic matrices
//! keyed `T_000` .. `T_111` (subscripts `s`, `d`, `y`). The qualification-state
//! variant replaces `ell` by `features` (`[s][y][x]`, each a distribution over
//! the feature alphabet), uses `n = 2`, and keys its matrices `T_00` .. `T_11`
//! (subscripts `s`, `d`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    DynamicsPreset, Dynamics, FeatureDistribution, GenerativeModel, GroupDistributions,
    GroupPrior, LabelDistribution, Variant,
};
use crate::error::{Error, Result};
use crate::markov::{Distribution, TransitionKernel};

const SYNTHETIC: &str = include_str!("../../data/synthetic_model.json");

fn two() -> usize {
    2
}

fn feature_state() -> Variant {
    Variant::FeatureState
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    #[serde(default = "two")]
    pub groups: usize,
    pub gamma: Vec<f64>,
    pub mu0: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<Vec<f64>>>>,
    pub dynamics: DynamicsSource,
    #[serde(default = "feature_state")]
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DynamicsSource {
    Preset { preset: String },
    Explicit(BTreeMap<String, Vec<Vec<f64>>>),
}

/// A validated model together with its initial group distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: GenerativeModel<f64>,
    pub mu0: GroupDistributions<f64>,
}

fn violation(path: impl Into<String>, e: Error) -> Error {
    match e {
        Error::InvariantViolation { path: inner, message } => {
            Error::InvariantViolation { path: format!("{}.{inner}", path.into()), message }
        }
        other => Error::InvariantViolation { path: path.into(), message: other.to_string() },
    }
}

fn pair<T: Clone>(path: &str, v: &[T]) -> Result<[T; 2]> {
    match v {
        [a, b] => Ok([a.clone(), b.clone()]),
        _ => Err(Error::InvariantViolation {
            path: path.into(),
            message: format!("expected 2 groups, found {}", v.len()),
        }),
    }
}

fn rows_of_len(path: &str, rows: &[Vec<f64>], n: usize) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::InvariantViolation {
                path: format!("{path}[{i}]"),
                message: format!("expected {n} entries, found {}", r.len()),
            });
        }
    }
    Ok(())
}

impl ModelFile {
    pub fn into_model(self) -> Result<LoadedModel> {
        if self.groups != 2 {
            return Err(Error::InvariantViolation {
                path: "groups".into(),
                message: "only binary sensitive attributes are supported".into(),
            });
        }
        let n = self.n;
        let gamma = GroupPrior::new(pair("gamma", &self.gamma)?).map_err(|e| violation("gamma", e))?;
        rows_of_len("mu0", &self.mu0, n)?;
        let [m0, m1] = pair("mu0", &self.mu0)?;
        let mu0 = [
            Distribution::new(m0).map_err(|e| violation("mu0[0]", e))?,
            Distribution::new(m1).map_err(|e| violation("mu0[1]", e))?,
        ];
        let model = match self.variant {
            Variant::FeatureState => {
                let ell = self.ell.ok_or_else(|| Error::Schema("missing field `ell`".into()))?;
                if self.features.is_some() {
                    return Err(Error::Schema("`features` is only valid for qualification-state".into()));
                }
                rows_of_len("ell", &ell, n)?;
                let ell = LabelDistribution::new(pair("ell", &ell)?)?;
                let dynamics = feature_dynamics(&self.dynamics, n)?;
                GenerativeModel::feature_state(gamma, ell, dynamics)?
            }
            Variant::QualificationState => {
                if n != 2 {
                    return Err(Error::InvariantViolation {
                        path: "n".into(),
                        message: "qualification-state models have n = 2".into(),
                    });
                }
                if self.ell.is_some() {
                    return Err(Error::Schema("`ell` is only valid for feature-state".into()));
                }
                let f = self.features.ok_or_else(|| Error::Schema("missing field `features`".into()))?;
                let [f0, f1] = pair("features", &f)?;
                let dist = |s: usize, y: usize, v: &[Vec<f64>]| {
                    let row = v.get(y).cloned().ok_or_else(|| Error::InvariantViolation {
                        path: format!("features[{s}]"),
                        message: "expected 2 qualification rows".into(),
                    })?;
                    Distribution::new(row).map_err(|e| violation(format!("features[{s}][{y}]"), e))
                };
                let features = FeatureDistribution::new([
                    [dist(0, 0, &f0)?, dist(0, 1, &f0)?],
                    [dist(1, 0, &f1)?, dist(1, 1, &f1)?],
                ])?;
                let dynamics = qualification_dynamics(&self.dynamics)?;
                GenerativeModel::qualification_state(gamma, features, dynamics)?
            }
        };
        Ok(LoadedModel { model, mu0 })
    }
}

fn kernel(path: &str, rows: &[Vec<f64>], n: usize) -> Result<TransitionKernel<f64>> {
    if rows.len() != n {
        return Err(Error::InvariantViolation {
            path: path.into(),
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    TransitionKernel::new(rows.to_vec()).map_err(|e| violation(path, e))
}

fn take<'a>(map: &'a BTreeMap<String, Vec<Vec<f64>>>, key: &str) -> Result<&'a Vec<Vec<f64>>> {
    map.get(key).ok_or_else(|| Error::Schema(format!("dynamics: missing matrix `{key}`")))
}

fn feature_dynamics(src: &DynamicsSource, n: usize) -> Result<Dynamics<f64>> {
    match src {
        DynamicsSource::Preset { preset } => {
            if n != 4 {
                return Err(Error::InvariantViolation {
                    path: "dynamics.preset".into(),
                    message: format!("bundled presets have 4 states, model has {n}"),
                });
            }
            Ok(preset.parse::<DynamicsPreset>()?.dynamics())
        }
        DynamicsSource::Explicit(map) => {
            let expected: Vec<String> = (0..8).map(|i| format!("T_{:03b}", i)).collect();
            if let Some(k) = map.keys().find(|k| !expected.contains(k)) {
                return Err(Error::Schema(format!("dynamics: unknown key `{k}`")));
            }
            let m = |s: usize, d: usize, y: usize| {
                let key = format!("T_{s}{d}{y}");
                kernel(&format!("dynamics.{key}"), take(map, &key)?, n)
            };
            Dynamics::new([
                [[m(0, 0, 0)?, m(0, 0, 1)?], [m(0, 1, 0)?, m(0, 1, 1)?]],
                [[m(1, 0, 0)?, m(1, 0, 1)?], [m(1, 1, 0)?, m(1, 1, 1)?]],
            ])
        }
    }
}

fn qualification_dynamics(src: &DynamicsSource) -> Result<Dynamics<f64>> {
    match src {
        DynamicsSource::Preset { .. } => Err(Error::Schema(
            "dynamics presets describe feature-state models only".into(),
        )),
        DynamicsSource::Explicit(map) => {
            let expected = ["T_00", "T_01", "T_10", "T_11"];
            if let Some(k) = map.keys().find(|k| !expected.contains(&k.as_str())) {
                return Err(Error::Schema(format!("dynamics: unknown key `{k}`")));
            }
            let m = |s: usize, d: usize| {
                let key = format!("T_{s}{d}");
                kernel(&format!("dynamics.{key}"), take(map, &key)?, 2)
            };
            Dynamics::decision_only([[m(0, 0)?, m(0, 1)?], [m(1, 0)?, m(1, 1)?]])
        }
    }
}

/// Parses and validates a model from JSON text.
pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

/// The synthetic four-bin, two-group model shipped with the crate.
pub fn bundled_synthetic() -> LoadedModel {
    parse_model(SYNTHETIC).expect("bundled model is valid")
}

/// Raw text of the bundled synthetic model file.
pub fn bundled_synthetic_json() -> &'static str {
    SYNTHETIC
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::from_str(SYNTHETIC).unwrap()
    }

    #[test]
    fn bundled_model_shape() {
        let m = bundled_synthetic();
        assert_eq!(m.model.n(), 4);
        assert_eq!(m.model.variant(), Variant::FeatureState);
        assert_eq!(m.mu0[0].len(), 4);
    }

    #[test]
    fn out_of_range_label_rejected() {
        let mut v = base();
        v["ell"][0][2] = serde_json::json!(1.3);
        match parse_model(&v.to_string()) {
            Err(Error::InvariantViolation { path, .. }) => assert_eq!(path, "ell[0][2]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preset_reference_matches_loader() {
        let mut v = base();
        v["dynamics"] = serde_json::json!({"preset": "recourse"});
        let m = parse_model(&v.to_string()).unwrap();
        assert_eq!(m.model.dynamics, DynamicsPreset::Recourse.dynamics());
    }

    #[test]
    fn unknown_preset_and_keys() {
        let mut v = base();
        v["dynamics"] = serde_json::json!({"preset": "sideways"});
        assert!(matches!(parse_model(&v.to_string()), Err(Error::UnknownPreset(_))));
        let mut v = base();
        v["colour"] = serde_json::json!(3);
        assert!(matches!(parse_model(&v.to_string()), Err(Error::Schema(_))));
    }

    #[test]
    fn explicit_matrices() {
        let mut v = base();
        let id = serde_json::json!([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]);
        let mut map = serde_json::Map::new();
        for i in 0..8 {
            map.insert(format!("T_{:03b}", i), id.clone());
        }
        v["dynamics"] = serde_json::Value::Object(map.clone());
        let m = parse_model(&v.to_string()).unwrap();
        assert_eq!(m.model.dynamics, Dynamics::uniform(TransitionKernel::identity(4)));

        map.insert("T_011".into(), serde_json::json!([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0.5, 0.4]]));
        v["dynamics"] = serde_json::Value::Object(map);
        match parse_model(&v.to_string()) {
            Err(Error::InvariantViolation { path, .. }) => assert_eq!(path, "dynamics.T_011"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_lengths_rejected() {
        let mut v = base();
        v["mu0"][1] = serde_json::json!([0.5, 0.5]);
        assert!(matches!(parse_model(&v.to_string()), Err(Error::InvariantViolation { .. })));
        let mut v = base();
        v["gamma"] = serde_json::json!([0.2, 0.3, 0.5]);
        assert!(matches!(parse_model(&v.to_string()), Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn qualification_variant_file() {
        let text = r#"{
            "n": 2, "gamma": [0.4, 0.6], "mu0": [[0.6, 0.4], [0.3, 0.7]],
            "features": [[[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]],
                         [[0.3, 0.3, 0.2, 0.2], [0.1, 0.1, 0.3, 0.5]]],
            "dynamics": {"T_00": [[0.9, 0.1], [0.3, 0.7]], "T_01": [[0.6, 0.4], [0.1, 0.9]],
                         "T_10": [[0.9, 0.1], [0.3, 0.7]], "T_11": [[0.5, 0.5], [0.05, 0.95]]},
            "variant": "qualification-state"
        }"#;
        let m = parse_model(text).unwrap();
        assert_eq!(m.model.variant(), Variant::QualificationState);
        assert_eq!(m.model.policy_width(), 4);
    }
}
