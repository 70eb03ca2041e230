//! Every module's invariants as seeded property checks.

use ltfair::baselines::{sample_population, train_short_term, TrainingConfig};
use ltfair::estimation::{estimate_distributions, generate_temporal_dataset, probe_policy, ProbeKind};
use ltfair::model::{bundled_synthetic, LabelDistribution};
use ltfair::{
    cumulative_series, evaluate, preset_utilmax_eop, simulate, solve, total_variation, validate_kernel, DynamicsPreset,
    GenerativeModel, GroupPrior, MetricContext, Policy,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::oracles::{joint_metrics, power_iteration, tv};
use super::strategies::{self as st, dist, pair};

pub type Check = fn(u64) -> Result<(), String>;

/// The three seeds every property runs under.
pub const SEEDS: [u64; 3] = [11, 23, 47];

pub fn runner(seed: u64, cases: u32) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

fn run<S: Strategy>(
    seed: u64,
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(seed, cases).run(&strategy, check).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub const ALL: &[(&str, Check)] = &[
    ("markov: stationary residual", markov_stationary_residual),
    ("markov: power iteration agreement", markov_power_iteration),
    ("markov: tv contraction", markov_tv_contraction),
    ("markov: stochasticity closure", markov_closure),
    ("markov: positive kernels certified", markov_positive_certified),
    ("model: kernel affine in policy", model_affine),
    ("model: presets give positive kernels", model_presets_positive),
    ("model: kernels row-stochastic", model_row_stochastic),
    ("metrics: ranges", metrics_ranges),
    ("metrics: group symmetry", metrics_symmetry),
    ("metrics: joint enumeration oracle", metrics_oracle),
    ("metrics: eop ignores massless states", metrics_eop_massless),
    ("optimizer: post-hoc feasibility", optimizer_feasibility),
    ("optimizer: determinism", optimizer_determinism),
    ("optimizer: monotone under relaxation", optimizer_relaxation),
    ("optimizer: finite-difference sanity", optimizer_fd_sanity),
    ("simulate: mass conservation", simulate_mass),
    ("simulate: fixed-policy agreement", simulate_agreement),
    ("simulate: tv to stationary non-increasing", simulate_tv_monotone),
    ("simulate: cumulative series", simulate_cumulative),
    ("baselines: determinism per seed", baselines_determinism),
    ("baselines: monotone training loss", baselines_monotone_loss),
    ("baselines: symmetric groups", baselines_symmetry),
    ("estimation: valid tables", estimation_valid_tables),
    ("estimation: consistency", estimation_consistency),
    ("estimation: masking", estimation_masking),
];

fn certified_kernel() -> impl Strategy<Value = ltfair::TransitionKernel<f64>> {
    st::kernel(2..=4, 0.3).prop_filter("both certificates", |k| k.certifies_convergence())
}

pub fn markov_stationary_residual(seed: u64) -> Result<(), String> {
    run(seed, 256, certified_kernel(), |k| {
        let mu = k.stationary_distribution().map_err(|e| fail(e.to_string()))?;
        let r = k.stationary_residual(mu.as_slice());
        prop_assert!(r <= 1e-10, "residual {r}");
        Ok(())
    })
}

pub fn markov_power_iteration(seed: u64) -> Result<(), String> {
    run(seed, 64, certified_kernel(), |k| {
        let mu = k.stationary_distribution().map_err(|e| fail(e.to_string()))?;
        let reference = power_iteration(&k.rows(), 10_000);
        let d = tv(mu.as_slice(), &reference);
        prop_assert!(d <= 1e-8, "tv {d}");
        Ok(())
    })
}

pub fn markov_tv_contraction(seed: u64) -> Result<(), String> {
    let s = (2usize..=4).prop_flat_map(|n| (st::stochastic_rows(n, 0.3), st::distribution(n), st::distribution(n)));
    run(seed, 256, s, |(rows, p, q)| {
        let k = ltfair::TransitionKernel::renormalized(rows).unwrap();
        let (p, q) = (dist(&p), dist(&q));
        let before = total_variation(&p, &q).unwrap();
        let after = total_variation(&k.evolve(&p).unwrap(), &k.evolve(&q).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-15, "{after} > {before}");
        Ok(())
    })
}

pub fn markov_closure(seed: u64) -> Result<(), String> {
    let s = (2usize..=4).prop_flat_map(|n| (st::stochastic_rows(n, 0.3), st::distribution(n), 1u64..500));
    run(seed, 128, s, |(rows, p, t)| {
        let k = ltfair::TransitionKernel::renormalized(rows).unwrap();
        let kt = k.power(t).map_err(|e| fail(e.to_string()))?;
        prop_assert!(validate_kernel(&kt.rows()).is_ok());
        let next = k.evolve(&dist(&p)).map_err(|e| fail(e.to_string()))?;
        prop_assert!(ltfair::markov::Distribution::new(next.into_vec()).is_ok());
        Ok(())
    })
}

pub fn markov_positive_certified(seed: u64) -> Result<(), String> {
    run(seed, 256, st::kernel(2..=6, 0.0), |k| {
        if k.is_strictly_positive() {
            prop_assert!(k.check_irreducible() && k.check_aperiodic());
        }
        Ok(())
    })
}

pub fn model_affine(seed: u64) -> Result<(), String> {
    let s = (2usize..=4).prop_flat_map(|n| {
        (st::raw_model(n), st::probabilities(n, 0.0, 1.0), st::probabilities(n, 0.0, 1.0), 0.0..1.0f64)
    });
    run(seed, 128, s, |(raw, p1, p2, alpha)| {
        let model = raw.model();
        let mix: [Vec<f64>; 2] =
            std::array::from_fn(|s| p1[s].iter().zip(&p2[s]).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect());
        for s in 0..2 {
            let k = model.group_kernel(&st::policy(&mix), s).unwrap();
            let k1 = model.group_kernel(&st::policy(&p1), s).unwrap();
            let k2 = model.group_kernel(&st::policy(&p2), s).unwrap();
            for x in 0..raw.n {
                for to in 0..raw.n {
                    let expected = alpha * k1.get(x, to) + (1.0 - alpha) * k2.get(x, to);
                    prop_assert!((k.get(x, to) - expected).abs() <= 1e-12);
                }
            }
        }
        Ok(())
    })
}

pub fn model_presets_positive(seed: u64) -> Result<(), String> {
    let s = (0usize..6, st::probabilities(4, 1e-6, 1.0 - 1e-6));
    run(seed, 128, s, |(i, pi)| {
        let preset = DynamicsPreset::ALL[i];
        let model = GenerativeModel::feature_state(
            GroupPrior::new([0.3, 0.7]).unwrap(),
            bundled_synthetic().model.labels().unwrap().clone(),
            preset.dynamics(),
        )
        .unwrap();
        for k in model.kernels(&st::policy(&pi)).unwrap() {
            prop_assert!(k.is_strictly_positive(), "{preset}");
            prop_assert!(k.certifies_convergence(), "{preset}");
        }
        Ok(())
    })
}

pub fn model_row_stochastic(seed: u64) -> Result<(), String> {
    run(seed, 256, st::toy(), |(raw, pi, _)| {
        for k in raw.model().kernels(&st::policy(&pi)).unwrap() {
            for x in 0..raw.n {
                let sum: f64 = k.row(x).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
        Ok(())
    })
}

pub fn metrics_ranges(seed: u64) -> Result<(), String> {
    run(seed, 256, (st::toy(), 0.0..1.0f64), |((raw, pi, mu), c)| {
        let model = raw.model();
        let policy = st::policy(&pi);
        let mu = pair(&mu);
        let ctx = MetricContext::new(&model, &policy, &mu, c).unwrap();
        let m = match ctx.snapshot() {
            Ok(m) => m,
            Err(ltfair::Error::DegenerateGroup { .. }) => return Ok(()),
            Err(e) => return Err(fail(e.to_string())),
        };
        for r in [m.eop, m.dp, m.inequity, m.qualification[0], m.qualification[1], m.loan[0], m.loan[1]] {
            prop_assert!((0.0..=1.0).contains(&r), "{m:?}");
        }
        prop_assert!(m.utility >= -c - 1e-15 && m.utility <= 1.0 - c + 1e-15);
        Ok(())
    })
}

pub fn metrics_symmetry(seed: u64) -> Result<(), String> {
    run(seed, 256, (st::toy(), 0.0..1.0f64), |((raw, pi, mu), c)| {
        let model = raw.model();
        let swapped = model.swapped_groups().unwrap();
        let (p, q) = (st::policy(&pi), st::policy(&pi).swapped());
        let (a, b) = (pair(&mu), pair(&[mu[1].clone(), mu[0].clone()]));
        let x = MetricContext::new(&model, &p, &a, c).unwrap();
        let y = MetricContext::new(&swapped, &q, &b, c).unwrap();
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-12;
        prop_assert!(close(x.utility().unwrap(), y.utility().unwrap()));
        prop_assert!(close(x.inequity().unwrap(), y.inequity().unwrap()));
        prop_assert!(close(x.dp_unfairness().unwrap(), y.dp_unfairness().unwrap()));
        prop_assert!(close(x.minimax_risk().unwrap(), y.minimax_risk().unwrap()));
        if let (Ok(e1), Ok(e2)) = (x.eop_unfairness(), y.eop_unfairness()) {
            prop_assert!(close(e1, e2));
        }
        Ok(())
    })
}

pub fn metrics_oracle(seed: u64) -> Result<(), String> {
    run(seed, 256, (st::toy(), 0.0..1.0f64), |((raw, pi, mu), c)| {
        let model = raw.model();
        let policy = st::policy(&pi);
        let d = pair(&mu);
        let ctx = MetricContext::new(&model, &policy, &d, c).unwrap();
        let o = joint_metrics(&raw, &pi, &mu, c);
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-12;
        prop_assert!(close(ctx.utility().unwrap(), o.utility));
        prop_assert!(close(ctx.average_score(), o.average_score));
        for s in 0..2 {
            prop_assert!(close(ctx.group_qualification(s).unwrap(), o.qualification[s]));
            prop_assert!(close(ctx.loan_rate(s).unwrap(), o.loan[s]));
            if let Ok(t) = ctx.true_positive_rate(s) {
                prop_assert!(close(t, o.tpr[s]), "tpr {t} vs {}", o.tpr[s]);
            }
        }
        Ok(())
    })
}

pub fn metrics_eop_massless(seed: u64) -> Result<(), String> {
    let s = (st::toy(), 0usize..4, 0.0..1.0f64, 0.0..1.0f64);
    run(seed, 256, s, |((raw, mut pi, mut mu), x, a, b)| {
        let x = x % raw.n;
        for m in mu.iter_mut() {
            m[x] = 0.0;
            if m.iter().sum::<f64>() <= 1e-9 {
                m[(x + 1) % raw.n] = 1.0;
            }
        }
        let model = raw.model();
        let d = pair(&mu);
        let before = MetricContext::new(&model, &st::policy(&pi), &d, 0.5).unwrap().eop_unfairness();
        pi[0][x] = a;
        pi[1][x] = b;
        let after = MetricContext::new(&model, &st::policy(&pi), &d, 0.5).unwrap().eop_unfairness();
        match (before, after) {
            (Ok(u), Ok(v)) => prop_assert!((u - v).abs() <= 1e-15),
            (Err(_), Err(_)) => {}
            other => return Err(fail(format!("{other:?}"))),
        }
        Ok(())
    })
}

fn sweep_spec() -> impl Strategy<Value = (f64, f64)> {
    (0.6..0.9f64, 0.001..0.05f64)
}

pub fn optimizer_feasibility(seed: u64) -> Result<(), String> {
    let model = bundled_synthetic().model;
    run(seed, 4, sweep_spec(), |(c, eps)| {
        let spec = preset_utilmax_eop(c, eps);
        let r = solve(&spec, &model).unwrap();
        if r.feasible {
            let e = evaluate(&r.policy, &spec, &model).unwrap();
            prop_assert!(e.min_residual() >= -1e-6, "{:?}", e.residuals);
            prop_assert!(e.certified());
        }
        Ok(())
    })
}

pub fn optimizer_determinism(seed: u64) -> Result<(), String> {
    let model = bundled_synthetic().model;
    run(seed, 2, (sweep_spec(), any::<u64>()), |((c, eps), solver_seed)| {
        let mut spec = preset_utilmax_eop(c, eps);
        spec.solver.seed = solver_seed;
        spec.solver.restarts = 2;
        let a = solve(&spec, &model).unwrap();
        let b = solve(&spec, &model).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn optimizer_relaxation(seed: u64) -> Result<(), String> {
    let model = bundled_synthetic().model;
    run(seed, 3, (0.6..0.9f64, 0.0..0.05f64, 0.0..0.05f64), |(c, e1, e2)| {
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let u = |eps: f64| solve(&preset_utilmax_eop(c, eps), &model).unwrap().metrics.unwrap().utility;
        let (a, b) = (u(lo), u(hi));
        prop_assert!(a <= b + 1e-6, "U({lo}) = {a} > U({hi}) = {b}");
        Ok(())
    })
}

pub fn optimizer_fd_sanity(seed: u64) -> Result<(), String> {
    let model = bundled_synthetic().model;
    let s = (sweep_spec(), prop::collection::vec(-1.0..1.0f64, 8));
    run(seed, 3, s, |((c, eps), dir)| {
        let spec = preset_utilmax_eop(c, eps);
        let p = solve(&spec, &model).unwrap().policy.to_flat();
        let f = |x: &[f64]| {
            let e = evaluate(&Policy::from_flat(x).unwrap(), &spec, &model).unwrap();
            [e.objective, e.metrics.unwrap().eop]
        };
        // Central differences along the interior entries when there are
        // any; otherwise one-sided along a direction pointing into the box.
        let interior: Vec<bool> = p.iter().map(|v| *v > 1e-3 && *v < 1.0 - 1e-3).collect();
        let central = interior.iter().any(|b| *b);
        let d: Vec<f64> = dir
            .iter()
            .zip(&p)
            .zip(&interior)
            .map(|((d, v), inside)| match (central, inside) {
                (true, true) => *d,
                (true, false) => 0.0,
                _ if *v < 0.5 => d.abs(),
                _ => -d.abs(),
            })
            .collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return Ok(());
        }
        let at = |h: f64| -> Vec<f64> { p.iter().zip(&d).map(|(v, dv)| v + h * dv / norm).collect() };
        let deriv = |h: f64| -> [f64; 2] {
            let plus = f(&at(h));
            if central {
                let minus = f(&at(-h));
                [(plus[0] - minus[0]) / (2.0 * h), (plus[1] - minus[1]) / (2.0 * h)]
            } else {
                let base = f(&p);
                [(plus[0] - base[0]) / h, (plus[1] - base[1]) / h]
            }
        };
        let h = if central { 1e-5 } else { 1e-7 };
        let (a, b) = (deriv(h), deriv(h / 10.0));
        for i in 0..2 {
            let scale = a[i].abs().max(b[i].abs());
            prop_assert!((a[i] - b[i]).abs() <= 1e-3 * scale + 1e-7, "component {i}: {} vs {}", a[i], b[i]);
        }
        Ok(())
    })
}

fn preset_run() -> impl Strategy<Value = (usize, [Vec<f64>; 2], [Vec<f64>; 2])> {
    (0usize..6, st::probabilities(4, 0.01, 0.99), st::distribution(4), st::distribution(4))
        .prop_map(|(i, pi, a, b)| (i, pi, [a, b]))
}

fn preset_model(i: usize) -> GenerativeModel<f64> {
    let base = bundled_synthetic().model;
    GenerativeModel::feature_state(base.gamma, base.labels().unwrap().clone(), DynamicsPreset::ALL[i].dynamics())
        .unwrap()
}

pub fn simulate_mass(seed: u64) -> Result<(), String> {
    run(seed, 64, preset_run(), |(i, pi, mu)| {
        let t = simulate(&preset_model(i), &st::policy(&pi), &pair(&mu), 200, 0.8).unwrap();
        for step in &t.steps {
            for d in step {
                prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        Ok(())
    })
}

pub fn simulate_agreement(seed: u64) -> Result<(), String> {
    run(seed, 64, preset_run(), |(i, pi, mu)| {
        let model = preset_model(i);
        let policy = st::policy(&pi);
        let t = simulate(&model, &policy, &pair(&mu), 200, 0.8).unwrap();
        for (s, k) in model.kernels(&policy).unwrap().iter().enumerate() {
            prop_assert!(k.certifies_convergence());
            let st = k.stationary_distribution().unwrap();
            let d = total_variation(&t.last()[s], &st).unwrap();
            prop_assert!(d <= 1e-8, "{} group {s}: {d}", DynamicsPreset::ALL[i]);
        }
        Ok(())
    })
}

pub fn simulate_tv_monotone(seed: u64) -> Result<(), String> {
    run(seed, 64, preset_run(), |(i, pi, mu)| {
        let model = preset_model(i);
        let policy = st::policy(&pi);
        let t = simulate(&model, &policy, &pair(&mu), 200, 0.8).unwrap();
        for (s, k) in model.kernels(&policy).unwrap().iter().enumerate() {
            let st = k.stationary_distribution().unwrap();
            let dists: Vec<f64> = t.steps.iter().map(|m| total_variation(&m[s], &st).unwrap()).collect();
            for w in dists.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15, "{w:?}");
            }
        }
        Ok(())
    })
}

pub fn simulate_cumulative(seed: u64) -> Result<(), String> {
    run(seed, 32, preset_run(), |(i, pi, mu)| {
        let t = simulate(&preset_model(i), &st::policy(&pi), &pair(&mu), 50, 0.7).unwrap();
        let series = |f: fn(&ltfair::MetricSnapshot<f64>) -> f64| t.metrics.iter().map(f).collect::<Vec<_>>();
        prop_assert_eq!(&t.cumulative.utility, &cumulative_series(&series(|m| m.utility)));
        prop_assert_eq!(&t.cumulative.inequity, &cumulative_series(&series(|m| m.inequity)));
        prop_assert_eq!(&t.cumulative.eop, &cumulative_series(&series(|m| m.eop)));
        // Also against a plain running sum.
        let mut acc = 0.0;
        for (m, c) in t.metrics.iter().zip(&t.cumulative.utility) {
            acc += m.utility;
            prop_assert_eq!(acc, *c);
        }
        Ok(())
    })
}

fn quick_training(lambda: f64) -> TrainingConfig {
    TrainingConfig { lambda, epochs: 300, ..TrainingConfig::default() }
}

pub fn baselines_determinism(seed: u64) -> Result<(), String> {
    let l = bundled_synthetic();
    run(seed, 4, (any::<u64>(), 0.0..3.0f64), |(s, lambda)| {
        let a = sample_population(&l.model, &l.mu0, 2000, s).unwrap();
        prop_assert_eq!(&a, &sample_population(&l.model, &l.mu0, 2000, s).unwrap());
        prop_assert_ne!(&a, &sample_population(&l.model, &l.mu0, 2000, s.wrapping_add(1)).unwrap());
        let cfg = quick_training(lambda);
        let t1 = train_short_term(&a, &cfg, s).unwrap();
        prop_assert_eq!(&t1, &train_short_term(&a, &cfg, s).unwrap());
        // Same data, different seed: only the initial weights differ.
        let t0 = train_short_term(&a, &TrainingConfig { epochs: 0, ..cfg }, s).unwrap();
        let t2 = train_short_term(&a, &TrainingConfig { epochs: 0, ..cfg }, s.wrapping_add(1)).unwrap();
        prop_assert_ne!(t0.model, t2.model);
        Ok(())
    })
}

pub fn baselines_monotone_loss(seed: u64) -> Result<(), String> {
    let l = bundled_synthetic();
    run(seed, 4, (any::<u64>(), 0.0..4.0f64), |(s, lambda)| {
        let data = sample_population(&l.model, &l.mu0, 5000, s).unwrap();
        let out = train_short_term(&data, &TrainingConfig { lambda, ..TrainingConfig::default() }, s).unwrap();
        for w in out.losses.windows(2) {
            prop_assert!(w[1] <= w[0], "loss rose: {w:?}");
        }
        Ok(())
    })
}

pub fn baselines_symmetry(seed: u64) -> Result<(), String> {
    let l = bundled_synthetic();
    let ell = l.model.labels().unwrap().positive(1).to_vec();
    let model = l
        .model
        .with_labels(LabelDistribution::new([ell.clone(), ell]).unwrap())
        .unwrap();
    let mu = [l.mu0[1].clone(), l.mu0[1].clone()];
    run(seed, 2, any::<u64>(), |s| {
        let data = sample_population(&model, &mu, 100_000, s).unwrap();
        // Trained to convergence: at the default epoch budget the s-weight
        // still carries part of its random initial value.
        let cfg = TrainingConfig { epochs: 20_000, ..TrainingConfig::default() };
        let out = train_short_term(&data, &cfg, s).unwrap();
        let w = out.model.group_weight();
        prop_assert!(w.abs() <= 0.05, "group weight {w}");
        Ok(())
    })
}

fn probe() -> impl Strategy<Value = ProbeKind> {
    prop_oneof![
        Just(ProbeKind::Random),
        Just(ProbeKind::Bias),
        (0usize..5).prop_map(|theta| ProbeKind::Threshold { theta }),
    ]
}

pub fn estimation_valid_tables(seed: u64) -> Result<(), String> {
    let l = bundled_synthetic();
    run(seed, 32, (probe(), 1usize..400, any::<u64>()), |(kind, m, s)| {
        let p = probe_policy(kind, 4).unwrap();
        let est = estimate_distributions(&generate_temporal_dataset(&l.model, &l.mu0, &p, m, s).unwrap()).unwrap();
        for g in 0..2 {
            prop_assert!(est.ell_hat.positive(g).iter().all(|v| (0.0..=1.0).contains(v)));
            for d in 0..2u8 {
                for y in 0..2u8 {
                    prop_assert!(validate_kernel(&est.g_hat.get(g, d, y).rows()).is_ok());
                }
            }
        }
        Ok(())
    })
}

/// Largest absolute error over every label cell and transition entry.
fn max_cell_error(truth: &GenerativeModel<f64>, m: usize, seed: u64) -> f64 {
    let l = bundled_synthetic();
    let p = probe_policy(ProbeKind::Random, 4).unwrap();
    let est = estimate_distributions(&generate_temporal_dataset(truth, &l.mu0, &p, m, seed).unwrap()).unwrap();
    let ell = truth.labels().unwrap();
    let mut worst = 0.0f64;
    for s in 0..2 {
        for x in 0..4 {
            worst = worst.max((est.ell_hat.positive(s)[x] - ell.positive(s)[x]).abs());
            for d in 0..2u8 {
                for y in 0..2u8 {
                    let (a, b) = (est.g_hat.get(s, d, y).row(x), truth.dynamics.get(s, d, y).row(x));
                    worst = a.iter().zip(b).fold(worst, |w, (u, v)| w.max((u - v).abs()));
                }
            }
        }
    }
    worst
}

pub fn estimation_consistency(seed: u64) -> Result<(), String> {
    let truth = bundled_synthetic().model;
    run(seed, 1, any::<u64>(), |base| {
        let sizes = [1_000, 10_000, 100_000, 1_000_000];
        let means: Vec<f64> = sizes
            .iter()
            .map(|&m| (0..5).map(|k| max_cell_error(&truth, m, base.wrapping_add(k))).sum::<f64>() / 5.0)
            .collect();
        for w in means.windows(2) {
            prop_assert!(w[1] < w[0], "{means:?}");
        }
        Ok(())
    })
}

pub fn estimation_masking(seed: u64) -> Result<(), String> {
    let l = bundled_synthetic();
    run(seed, 16, (probe(), 1usize..3000, any::<u64>(), any::<u64>()), |(kind, m, s, poison)| {
        let p = probe_policy(kind, 4).unwrap();
        let data = generate_temporal_dataset(&l.model, &l.mu0, &p, m, s).unwrap();
        let clean = estimate_distributions(&data).unwrap();
        let mut dirty = data.clone();
        for (i, r) in dirty.samples.iter_mut().enumerate() {
            if r.d0 == 0 {
                r.y0 = Some(((poison >> (i % 64)) & 1) as u8);
            }
        }
        prop_assert_eq!(estimate_distributions(&dirty).unwrap(), clean);
        Ok(())
    })
}
