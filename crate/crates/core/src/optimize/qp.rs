//! Dense convex QP by a primal active-set method.
//!
//! Solves `min 0.5 z'Hz + q'z  s.t.  a_i z >= b_i` (or `= b_i` for rows
//! flagged as equalities) from a feasible starting point, with `H` positive
//! definite. Sizes here are tens of variables at most.

use crate::linalg::solve_dense;

pub(crate) struct QpSolution {
    pub z: Vec<f64>,
    /// One multiplier per row of `A`: zero for inactive inequalities, signed
    /// for equalities.
    pub multipliers: Vec<f64>,
    pub converged: bool,
}

pub(crate) struct Qp<'a> {
    pub h: &'a [f64],
    pub q: &'a [f64],
    /// Row-major, `rows x dim`.
    pub a: &'a [f64],
    pub b: &'a [f64],
    /// Rows that must hold with equality; empty means none.
    pub equality: &'a [bool],
}

impl Qp<'_> {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    fn is_equality(&self, i: usize) -> bool {
        self.equality.get(i).copied().unwrap_or(false)
    }

    fn row(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.a[i * n..(i + 1) * n]
    }

    fn dot_row(&self, i: usize, v: &[f64]) -> f64 {
        self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn solve(&self, z0: Vec<f64>, max_iter: usize) -> QpSolution {
        let n = self.dim();
        let m = self.rows();
        let mut z = z0;
        let mut working: Vec<usize> = (0..m).filter(|i| self.is_equality(*i)).collect();
        let mut lambda_w: Vec<f64> = Vec::new();
        // Rows found to be linearly dependent on the working set. At a point
        // where they are active they add nothing, so they are left out.
        let mut dependent = vec![false; m];

        for _ in 0..max_iter {
            let grad: Vec<f64> =
                (0..n).map(|i| (0..n).map(|j| self.h[i * n + j] * z[j]).sum::<f64>() + self.q[i]).collect();
            let k = working.len();
            let size = n + k;
            let mut kkt = vec![0.0; size * size];
            for i in 0..n {
                for j in 0..n {
                    kkt[i * size + j] = self.h[i * n + j];
                }
            }
            let mut rhs = vec![0.0; size];
            for i in 0..n {
                rhs[i] = -grad[i];
            }
            for (r, &w) in working.iter().enumerate() {
                for (j, a) in self.row(w).iter().enumerate() {
                    kkt[j * size + n + r] = -a;
                    kkt[(n + r) * size + j] = *a;
                }
                // Zero for rows already tight; removes drift on equalities.
                rhs[n + r] = self.b[w] - self.dot_row(w, &z);
            }
            let Some(sol) = solve_dense(&kkt, &rhs, 1e-14) else {
                match working.iter().rposition(|w| !self.is_equality(*w)) {
                    Some(pos) => {
                        dependent[working.remove(pos)] = true;
                        continue;
                    }
                    None => break,
                }
            };
            let step = &sol[..n];
            lambda_w = sol[n..].to_vec();
            let step_norm = step.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let scale = z.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

            if step_norm <= 1e-13 * scale {
                let most_negative = lambda_w
                    .iter()
                    .enumerate()
                    .filter(|(r, l)| !self.is_equality(working[*r]) && **l < -1e-12)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(r, _)| r);
                match most_negative {
                    None => return self.finish(z, &working, &lambda_w, true),
                    Some(r) => {
                        working.remove(r);
                        lambda_w.remove(r);
                        continue;
                    }
                }
            }

            let mut alpha = 1.0;
            let mut blocking = None;
            for i in (0..m).filter(|i| !working.contains(i) && !dependent[*i]) {
                let ap = self.dot_row(i, step);
                if ap < -1e-15 {
                    let slack = (self.dot_row(i, &z) - self.b[i]).max(0.0);
                    let ratio = slack / -ap;
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (zi, si) in z.iter_mut().zip(step) {
                *zi += alpha * si;
            }
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        self.finish(z, &working, &lambda_w, false)
    }

    fn finish(&self, z: Vec<f64>, working: &[usize], lambda_w: &[f64], converged: bool) -> QpSolution {
        let mut multipliers = vec![0.0; self.rows()];
        for (w, l) in working.iter().zip(lambda_w) {
            multipliers[*w] = if self.is_equality(*w) { *l } else { l.max(0.0) };
        }
        QpSolution { z, multipliers, converged }
    }
}
