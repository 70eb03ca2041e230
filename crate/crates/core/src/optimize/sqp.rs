//! Sequential quadratic programming for small box-bounded problems with
//! constraints `c_i(x) >= 0` or `c_i(x) = 0`.
//!
//! Gradients come from finite differences. Each iteration solves an elastic QP
//! (linearized constraints softened by nonnegative slacks with an l1 price),
//! so the subproblem is always feasible and infeasible problems drift toward
//! the least-violating point. Steps are accepted on an l1 merit function, with
//! a second-order correction when the full step is rejected, and the
//! Lagrangian Hessian is approximated by damped BFGS.

use super::qp::Qp;

/// Objective and constraint values at a point, or `None` where the model
/// cannot be evaluated (treated as infinitely bad by the line search).
pub(crate) trait Nlp {
    fn dim(&self) -> usize;
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// Which constraints are equalities; empty means none.
    fn equalities(&self) -> Vec<bool> {
        Vec::new()
    }
    fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SqpOptions {
    pub max_iterations: usize,
    pub fd_step: f64,
    pub feasibility_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SqpOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sum of constraint violations.
    pub violation: f64,
    pub iterations: usize,
    /// False if the starting point could not be evaluated.
    pub evaluated: bool,
}

struct Constraints {
    equality: Vec<bool>,
}

impl Constraints {
    fn is_eq(&self, i: usize) -> bool {
        self.equality.get(i).copied().unwrap_or(false)
    }

    fn violation(&self, c: &[f64]) -> f64 {
        c.iter()
            .enumerate()
            .map(|(i, v)| if self.is_eq(i) { v.abs() } else { (-v).max(0.0) })
            .sum()
    }
}

struct Point {
    x: Vec<f64>,
    f: f64,
    c: Vec<f64>,
}

struct Derivatives {
    grad: Vec<f64>,
    /// Row-major `constraints x dim`.
    jac: Vec<f64>,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn differentiate<P: Nlp>(p: &P, at: &Point, lo: &[f64], hi: &[f64], h: f64) -> Option<Derivatives> {
    let n = at.x.len();
    let m = at.c.len();
    let mut grad = vec![0.0; n];
    let mut jac = vec![0.0; m * n];
    let mut probe = at.x.clone();
    for j in 0..n {
        let xj = at.x[j];
        let central = xj - h >= lo[j] && xj + h <= hi[j];
        if central {
            probe[j] = xj + h;
            let plus = p.eval(&probe);
            probe[j] = xj - h;
            let minus = p.eval(&probe);
            probe[j] = xj;
            let ((fp, cp), (fm, cm)) = (plus?, minus?);
            grad[j] = (fp - fm) / (2.0 * h);
            for i in 0..m {
                jac[i * n + j] = (cp[i] - cm[i]) / (2.0 * h);
            }
        } else {
            let step = if xj + h <= hi[j] { h } else { -h };
            probe[j] = xj + step;
            let (fs, cs) = p.eval(&probe)?;
            probe[j] = xj;
            grad[j] = (fs - at.f) / step;
            for i in 0..m {
                jac[i * n + j] = (cs[i] - at.c[i]) / step;
            }
        }
    }
    Some(Derivatives { grad, jac })
}

fn lagrangian_gradient(d: &Derivatives, lambda: &[f64], n: usize) -> Vec<f64> {
    let mut g = d.grad.clone();
    for (i, l) in lambda.iter().enumerate() {
        if *l != 0.0 {
            for j in 0..n {
                g[j] -= l * d.jac[i * n + j];
            }
        }
    }
    g
}

/// Powell-damped BFGS update keeping `b` positive definite.
fn bfgs_update(b: &mut [f64], s: &[f64], y: &[f64]) {
    let n = s.len();
    let bs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[i * n + j] * s[j]).sum()).collect();
    let sbs: f64 = s.iter().zip(&bs).map(|(a, b)| a * b).sum();
    if !(sbs > 1e-300) {
        return;
    }
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r: Vec<f64> = (0..n).map(|i| theta * y[i] + (1.0 - theta) * bs[i]).collect();
    let sr: f64 = s.iter().zip(&r).map(|(a, b)| a * b).sum();
    if !(sr > 1e-300) {
        return;
    }
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        b[i * n + i] = 1.0;
    }
    b
}

struct Subproblem {
    step: Vec<f64>,
    slack_sum: f64,
    multipliers: Vec<f64>,
}

/// Elastic QP in `(d, t)`: `min 0.5 d'Bd + g'd + rho sum t + 0.5 delta |t|^2`
/// subject to `c + J d + t >= 0` (one slack per inequality) or
/// `c + J d + t+ - t- = 0` (two per equality), `t >= 0`, `lo <= x + d <= hi`.
fn solve_subproblem(
    b: &[f64],
    at: &Point,
    c: &[f64],
    der: &Derivatives,
    cons: &Constraints,
    bounds: (&[f64], &[f64]),
    rho: f64,
) -> Subproblem {
    const SLACK_CURVATURE: f64 = 1e-8;
    let (lo, hi) = bounds;
    let n = at.x.len();
    let m = c.len();
    // Slack columns per constraint: (positive part, optional negative part).
    let mut slack_cols = Vec::with_capacity(m);
    let mut next = n;
    for i in 0..m {
        if cons.is_eq(i) {
            slack_cols.push((next, Some(next + 1)));
            next += 2;
        } else {
            slack_cols.push((next, None));
            next += 1;
        }
    }
    let dim = next;
    let slacks = dim - n;

    let mut h = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            h[i * dim + j] = b[i * n + j];
        }
    }
    for i in n..dim {
        h[i * dim + i] = SLACK_CURVATURE;
    }
    let mut q = der.grad.clone();
    q.extend(std::iter::repeat_n(rho, slacks));

    let rows = m + slacks + 2 * n;
    let mut a = vec![0.0; rows * dim];
    let mut rhs = vec![0.0; rows];
    let mut equality = vec![false; rows];
    let mut z0 = vec![0.0; dim];
    for i in 0..m {
        a[i * dim..i * dim + n].copy_from_slice(&der.jac[i * n..(i + 1) * n]);
        rhs[i] = -c[i];
        let (pos, neg) = slack_cols[i];
        a[i * dim + pos] = 1.0;
        z0[pos] = (-c[i]).max(0.0);
        if let Some(neg) = neg {
            a[i * dim + neg] = -1.0;
            z0[neg] = c[i].max(0.0);
            equality[i] = true;
        }
    }
    for k in 0..slacks {
        let r = m + k;
        a[r * dim + n + k] = 1.0;
    }
    for j in 0..n {
        let r = m + slacks + j;
        a[r * dim + j] = 1.0;
        rhs[r] = lo[j] - at.x[j];
        let r = m + slacks + n + j;
        a[r * dim + j] = -1.0;
        rhs[r] = at.x[j] - hi[j];
    }
    let qp = Qp { h: &h, q: &q, a: &a, b: &rhs, equality: &equality };
    let sol = qp.solve(z0, 50 * (rows + dim));
    if !sol.converged {
        log::debug!("QP subproblem stopped before optimality");
    }
    let step = (0..n).map(|j| sol.z[j].clamp(lo[j] - at.x[j], hi[j] - at.x[j])).collect();
    Subproblem {
        step,
        slack_sum: sol.z[n..].iter().map(|t| t.max(0.0)).sum(),
        multipliers: sol.multipliers[..m].to_vec(),
    }
}

pub(crate) fn minimize<P: Nlp>(problem: &P, x0: &[f64], opts: SqpOptions) -> SqpOutcome {
    let n = problem.dim();
    let (lo, hi) = problem.bounds();
    let cons = Constraints { equality: problem.equalities() };
    let mut x = x0.to_vec();
    project(&mut x, &lo, &hi);
    let Some((f, c)) = problem.eval(&x) else {
        return SqpOutcome { x, objective: f64::INFINITY, violation: f64::INFINITY, iterations: 0, evaluated: false };
    };
    let snapshot = |p: &Point, iterations: usize| SqpOutcome {
        x: p.x.clone(),
        objective: p.f,
        violation: cons.violation(&p.c),
        iterations,
        evaluated: true,
    };
    let mut cur = Point { x, f, c };
    let mut best = snapshot(&cur, 0);
    let Some(mut der) = differentiate(problem, &cur, &lo, &hi, opts.fd_step) else {
        return best;
    };
    let mut b = identity(n);
    let mut nu = 1.0f64;
    let mut rho = 1e3f64;
    let mut stalls = 0;

    for it in 1..=opts.max_iterations {
        let sub = solve_subproblem(&b, &cur, &cur.c, &der, &cons, (&lo, &hi), rho);
        let lambda_max = sub.multipliers.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        if lambda_max > 0.5 * rho {
            rho = 10.0 * lambda_max;
        }
        nu = nu.max(1.5 * lambda_max + 1e-6);

        let step_norm = sub.step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let viol = cons.violation(&cur.c);
        log::trace!("iteration {it}: f {:.12e}, violation {viol:.3e}, step {step_norm:.3e}", cur.f);
        if step_norm < 1e-12 {
            // A KKT point, or while infeasible the least violation reachable
            // from here.
            return better(best, snapshot(&cur, it), opts.feasibility_tol);
        }

        let merit = |f: f64, c: &[f64]| f + nu * cons.violation(c);
        let phi0 = merit(cur.f, &cur.c);
        let gd: f64 = der.grad.iter().zip(&sub.step).map(|(g, d)| g * d).sum();
        let mut slope = gd + nu * (sub.slack_sum - viol);
        if slope >= 0.0 {
            slope = -1e-12;
        }
        let sufficient = |phi: f64, alpha: f64| {
            phi <= phi0 + 1e-4 * alpha * slope || alpha == 1.0 && (phi - phi0).abs() <= 1e-15 * phi0.abs().max(1.0)
        };
        let try_step = |d: &[f64], alpha: f64| {
            let mut trial: Vec<f64> = cur.x.iter().zip(d).map(|(x, d)| x + alpha * d).collect();
            project(&mut trial, &lo, &hi);
            problem.eval(&trial).map(|(f, c)| Point { x: trial, f, c })
        };

        let mut accepted = None;
        if let Some(p) = try_step(&sub.step, 1.0) {
            if sufficient(merit(p.f, &p.c), 1.0) {
                accepted = Some(p);
            } else {
                // Second-order correction: re-linearize with the constraint
                // values seen at the full step to pull it back onto the
                // curved constraint surface.
                let shifted: Vec<f64> = (0..cur.c.len())
                    .map(|i| {
                        let jd: f64 = (0..n).map(|j| der.jac[i * n + j] * sub.step[j]).sum();
                        p.c[i] - jd
                    })
                    .collect();
                let soc = solve_subproblem(&b, &cur, &shifted, &der, &cons, (&lo, &hi), rho);
                accepted = try_step(&soc.step, 1.0).filter(|q| sufficient(merit(q.f, &q.c), 1.0));
            }
        }
        let mut alpha = 0.5;
        while accepted.is_none() && alpha > 1e-10 {
            accepted = try_step(&sub.step, alpha).filter(|p| sufficient(merit(p.f, &p.c), alpha));
            alpha *= 0.5;
        }

        let Some(next) = accepted else {
            stalls += 1;
            if stalls >= 2 {
                return better(best, snapshot(&cur, it), opts.feasibility_tol);
            }
            b = identity(n);
            continue;
        };

        let Some(next_der) = differentiate(problem, &next, &lo, &hi, opts.fd_step) else {
            return better(best, snapshot(&next, it), opts.feasibility_tol);
        };
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let g_new = lagrangian_gradient(&next_der, &sub.multipliers, n);
        let g_old = lagrangian_gradient(&der, &sub.multipliers, n);
        let y: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
        bfgs_update(&mut b, &s, &y);

        let df = (next.f - cur.f).abs();
        let moved = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        cur = next;
        der = next_der;
        best = better(best, snapshot(&cur, it), opts.feasibility_tol);

        if cons.violation(&cur.c) <= opts.feasibility_tol && df <= 1e-14 * cur.f.abs().max(1e-3) && moved <= 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                return best;
            }
        } else {
            stalls = 0;
        }
    }
    best
}

/// Feasible beats infeasible, then lower objective or lower violation. Ties
/// keep the later point so the iteration count tracks progress.
pub(crate) fn better(a: SqpOutcome, b: SqpOutcome, tol: f64) -> SqpOutcome {
    if !a.evaluated {
        return b;
    }
    if !b.evaluated {
        return a;
    }
    let (fa, fb) = (a.violation <= tol, b.violation <= tol);
    let keep_b = match (fa, fb) {
        (true, false) => false,
        (false, true) => true,
        (true, true) => b.objective <= a.objective,
        (false, false) => b.violation <= a.violation,
    };
    if keep_b {
        b
    } else {
        SqpOutcome { iterations: b.iterations, ..a }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl Nlp for Rosen {
        fn dim(&self) -> usize {
            2
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![-2.0, -2.0], vec![2.0, 2.0])
        }
        fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            let f = 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
            // unit disc
            Some((f, vec![1.0 - x[0] * x[0] - x[1] * x[1]]))
        }
    }

    fn opts() -> SqpOptions {
        SqpOptions { max_iterations: 200, fd_step: 1e-7, feasibility_tol: 1e-8 }
    }

    #[test]
    fn rosenbrock_on_disc() {
        let out = minimize(&Rosen, &[0.0, 0.0], opts());
        // Known optimum on the unit disc.
        assert!((out.x[0] - 0.786415).abs() < 1e-4, "{:?}", out.x);
        assert!((out.x[1] - 0.617698).abs() < 1e-4);
        assert!(out.violation <= 1e-8);
    }

    struct Linear;
    impl Nlp for Linear {
        fn dim(&self) -> usize {
            2
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, 0.0], vec![1.0, 1.0])
        }
        fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            Some((-(x[0] + 2.0 * x[1]), vec![1.0 - x[0] - x[1]]))
        }
    }

    #[test]
    fn linear_program_vertex() {
        let out = minimize(&Linear, &[0.5, 0.5], opts());
        assert!((out.x[0]).abs() < 1e-9 && (out.x[1] - 1.0).abs() < 1e-9, "{:?}", out.x);
    }

    struct Impossible;
    impl Nlp for Impossible {
        fn dim(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0], vec![1.0])
        }
        fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            Some((x[0], vec![x[0] - 2.0]))
        }
    }

    #[test]
    fn infeasible_reaches_least_violation() {
        let out = minimize(&Impossible, &[0.2], opts());
        assert!(out.violation > 0.5);
        assert!((out.x[0] - 1.0).abs() < 1e-9);
    }

    struct Circle;
    impl Nlp for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![-2.0, -2.0], vec![2.0, 2.0])
        }
        fn equalities(&self) -> Vec<bool> {
            vec![true]
        }
        fn eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            Some((x[0] + x[1], vec![x[0] * x[0] + x[1] * x[1] - 2.0]))
        }
    }

    #[test]
    fn equality_on_curved_surface() {
        let out = minimize(&Circle, &[1.0, 0.5], opts());
        assert!((out.x[0] + 1.0).abs() < 1e-5 && (out.x[1] + 1.0).abs() < 1e-5, "{:?}", out.x);
        assert!(out.violation < 1e-8);
    }
}
