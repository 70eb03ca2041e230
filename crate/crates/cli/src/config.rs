use std::path::{Path, PathBuf};

use ltfair::baselines::ConversionMode;
use ltfair::estimation::ProbeKind;
use ltfair::model::{bundled_synthetic, load_model, LoadedModel};
use ltfair::OptimizationSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "LTFAIR_OUT_DIR";

/// One experiment file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model file; the bundled synthetic model when absent.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Base seed for the solver restarts, baselines and estimation.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: Option<OptimizationSpec>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub compare: Option<CompareBlock>,
    #[serde(default)]
    pub estimate: Option<EstimateBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    /// Policy JSON as written by `solve`.
    pub policy: PathBuf,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Falls back to the optimization cost, then 0.8.
    #[serde(default)]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareBlock {
    /// Fairness weights of the penalized baselines; the unpenalized one
    /// always runs as well.
    pub lambdas: Vec<f64>,
    pub seeds: usize,
    pub samples_per_step: usize,
    pub horizon: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mode: ConversionMode,
}

impl Default for CompareBlock {
    fn default() -> Self {
        CompareBlock {
            lambdas: vec![2.0],
            seeds: 10,
            samples_per_step: ltfair::baselines::DEFAULT_SAMPLE_SIZE,
            horizon: 100,
            epochs: ltfair::baselines::DEFAULT_EPOCHS,
            learning_rate: ltfair::baselines::DEFAULT_LEARNING_RATE,
            mode: ConversionMode::Threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateBlock {
    pub probes: Vec<ProbeKind>,
    pub samples: usize,
    /// Also write each probe's temporal dataset as CSV.
    pub export_datasets: bool,
}

impl Default for EstimateBlock {
    fn default() -> Self {
        EstimateBlock { probes: vec![ProbeKind::Random, ProbeKind::Bias], samples: 50_000, export_datasets: false }
    }
}

fn default_horizon() -> usize {
    ltfair::simulate::DEFAULT_HORIZON
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

/// A parsed config with paths resolved and command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Experiment {
    /// `--out` beats the environment variable, which beats the file.
    pub fn load(path: Option<&Path>, out: Option<PathBuf>, seed: Option<u64>) -> CliResult<Self> {
        let (mut config, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let config: ExperimentConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, dir)
            }
            None => (Self::empty(), PathBuf::from(".")),
        };
        if let Some(seed) = seed {
            config.seed = Some(seed);
            if let Some(spec) = config.spec.as_mut() {
                spec.solver.seed = seed;
            }
        }
        let env_out = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let out_dir = match (out, env_out, &config.output_dir) {
            (Some(o), _, _) | (None, Some(o), _) => o,
            (None, None, Some(o)) => base_dir.join(o),
            (None, None, None) => PathBuf::from("out"),
        };
        let exp = Experiment { config, base_dir, out_dir };
        exp.validate()?;
        Ok(exp)
    }

    fn empty() -> ExperimentConfig {
        ExperimentConfig {
            model: None,
            output_dir: None,
            seed: None,
            spec: None,
            simulate: None,
            compare: None,
            estimate: None,
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        if let Some(m) = &c.model {
            let p = self.resolve(m);
            if !p.is_file() {
                return Err(invalid("model", format!("{} does not exist", p.display())));
            }
        }
        if let Some(spec) = &c.spec {
            spec.validate().map_err(|e| invalid("spec", e))?;
        }
        if let Some(s) = &c.simulate {
            if s.horizon == 0 {
                return Err(invalid("simulate.horizon", "must be at least 1"));
            }
            if let Some(cost) = s.cost {
                if !(0.0..=1.0).contains(&cost) {
                    return Err(invalid("simulate.cost", format!("{cost} outside [0, 1]")));
                }
            }
        }
        if let Some(b) = &c.compare {
            if b.seeds == 0 || b.samples_per_step == 0 || b.horizon == 0 {
                return Err(invalid("compare", "seeds, samples_per_step and horizon must be at least 1"));
            }
            if let Some(l) = b.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                return Err(invalid("compare.lambdas", format!("{l} must be non-negative")));
            }
            if !(b.learning_rate > 0.0 && b.learning_rate.is_finite()) {
                return Err(invalid("compare.learning_rate", "must be positive"));
            }
        }
        if let Some(e) = &c.estimate {
            if e.samples == 0 {
                return Err(invalid("estimate.samples", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model(&self) -> CliResult<LoadedModel> {
        match &self.config.model {
            Some(p) => Ok(load_model(self.resolve(p))?),
            None => Ok(bundled_synthetic()),
        }
    }

    pub fn spec(&self) -> CliResult<&OptimizationSpec> {
        self.config.spec.as_ref().ok_or_else(|| invalid("spec", "required for this command"))
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }
}
