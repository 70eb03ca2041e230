use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ltfair::baselines::{run_retraining_loop, RetrainingConfig, TrainingConfig};
use ltfair::estimation::{end_to_end_sensitivity, generate_temporal_dataset, probe_policy};
use ltfair::{preset_maxqual, preset_utilmax_eop, simulate, solve, DynamicsPreset, Policy, SolveReport};
use serde::Serialize;

use crate::config::Experiment;
use crate::error::{CliError, CliResult, Outcome};
use crate::table::{self, Label, TrajectoryRow};

pub const REPORT_FILE: &str = "solve_report.json";
pub const POLICY_FILE: &str = "policy.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const ESTIMATE_FILE: &str = "estimate_report.json";

pub const LONG_TERM: &str = "long-term";
pub const SHORT_MAXUTIL: &str = "short-maxutil";
pub const SHORT_EOP: &str = "short-eop";

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn outcome(feasible: bool) -> Outcome {
    if feasible {
        Outcome::Success
    } else {
        Outcome::Infeasible
    }
}

fn solve_and_write(exp: &Experiment) -> CliResult<SolveReport> {
    let loaded = exp.model()?;
    let report = solve(exp.spec()?, &loaded.model)?;
    write_json(&exp.out_dir, REPORT_FILE, &report)?;
    write_json(&exp.out_dir, POLICY_FILE, &report.policy)?;
    log::info!("objective {:.6e}, feasible {}", report.objective_value, report.feasible);
    Ok(report)
}

/// Solves the configured problem, writing the report and the policy table.
pub fn cmd_solve(exp: &Experiment) -> CliResult<Outcome> {
    let report = solve_and_write(exp)?;
    Ok(outcome(report.feasible))
}

pub fn read_policy(path: &Path) -> CliResult<Policy<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read policy {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Evolves the model's initial distributions under a stored policy.
pub fn cmd_simulate(exp: &Experiment) -> CliResult<Outcome> {
    let block = exp
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate: block required for this command".into()))?;
    let policy = read_policy(&exp.resolve(&block.policy))?;
    let loaded = exp.model()?;
    let cost = block.cost.or(exp.config.spec.as_ref().map(|s| s.cost)).unwrap_or(0.8);
    let trajectory = simulate(&loaded.model, &policy, &loaded.mu0, block.horizon, cost)?;
    let rows = table::rows(&trajectory, Label { policy_kind: LONG_TERM, seed: None, lambda: None });
    table::write(create(&exp.out_dir, TRAJECTORY_FILE)?, &rows)?;
    Ok(Outcome::Success)
}

/// Long-term policy against retrained logistic baselines, in one CSV.
pub fn cmd_compare(exp: &Experiment) -> CliResult<Outcome> {
    let block = exp.config.compare.clone().unwrap_or_default();
    let report = solve_and_write(exp)?;
    let loaded = exp.model()?;
    let cost = exp.spec()?.cost;
    let long = simulate(&loaded.model, &report.policy, &loaded.mu0, block.horizon, cost)?;
    let mut rows: Vec<TrajectoryRow> =
        table::rows(&long, Label { policy_kind: LONG_TERM, seed: None, lambda: None });

    let seeds: Vec<u64> = (0..block.seeds as u64).map(|i| exp.seed() + i).collect();
    let mut lambdas = vec![0.0];
    lambdas.extend(block.lambdas.iter().copied().filter(|l| *l > 0.0));
    for lambda in lambdas {
        let cfg = RetrainingConfig {
            horizon: block.horizon,
            samples_per_step: block.samples_per_step,
            training: TrainingConfig { lambda, epochs: block.epochs, learning_rate: block.learning_rate },
            mode: block.mode,
            cost,
        };
        let kind = if lambda == 0.0 { SHORT_MAXUTIL } else { SHORT_EOP };
        for run in run_retraining_loop(&loaded.model, &loaded.mu0, &cfg, &seeds)? {
            let label = Label { policy_kind: kind, seed: Some(run.seed), lambda: Some(lambda) };
            rows.extend(table::rows(&run.trajectory, label));
        }
    }
    table::write(create(&exp.out_dir, COMPARE_FILE)?, &rows)?;
    Ok(outcome(report.feasible))
}

/// Solves on models estimated from probe data and scores on the true model.
pub fn cmd_estimate(exp: &Experiment) -> CliResult<Outcome> {
    let block = exp.config.estimate.clone().unwrap_or_default();
    let loaded = exp.model()?;
    let spec = exp.spec()?;
    let report = end_to_end_sensitivity(&loaded.model, &loaded.mu0, &block.probes, spec, block.samples, exp.seed())?;
    write_json(&exp.out_dir, ESTIMATE_FILE, &report)?;
    if block.export_datasets {
        for kind in &block.probes {
            if let Some(probe) = probe_policy(*kind, loaded.model.n()) {
                let data = generate_temporal_dataset(&loaded.model, &loaded.mu0, &probe, block.samples, exp.seed())?;
                data.write_csv(create(&exp.out_dir, &format!("dataset_{}.csv", kind.name()))?)?;
            }
        }
    }
    Ok(outcome(report.reference.feasible_on_truth))
}

/// Names of the dynamics presets and the optimization presets.
pub fn presets_listing() -> String {
    let mut out = String::from("dynamics presets:\n");
    for p in DynamicsPreset::ALL {
        out.push_str(&format!("  {:<18} {}\n", p.name(), p.description()));
    }
    out.push_str("optimization presets:\n");
    let examples = [
        ("utilmax-eop", "maximize utility subject to |eop gap| <= eps", preset_utilmax_eop(0.8, 0.01)),
        ("maxqual", "maximize total qualification subject to utility >= 0", preset_maxqual(0.8)),
    ];
    for (name, what, spec) in examples {
        let json = serde_json::to_string(&spec).expect("specs serialize");
        out.push_str(&format!("  {name:<18} {what}\n  {:<18} e.g. {json}\n", ""));
    }
    out
}

pub fn cmd_presets() -> CliResult<Outcome> {
    print!("{}", presets_listing());
    Ok(Outcome::Success)
}
