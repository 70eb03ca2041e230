//! Independent reference computations on raw tables.

/// `mu K^steps` from the uniform start, plain loops.
pub fn power_iteration(rows: &[Vec<f64>], steps: usize) -> Vec<f64> {
    let n = rows.len();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..steps {
        let mut next = vec![0.0; n];
        for (x, m) in mu.iter().enumerate() {
            for (k, v) in next.iter_mut().enumerate() {
                *v += m * rows[x][k];
            }
        }
        mu = next;
    }
    mu
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn step(mu: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    (0..rows.len()).map(|k| mu.iter().enumerate().map(|(x, m)| m * rows[x][k]).sum()).collect()
}

/// Raw tables of a feature-state model: `g[s][d][y]` row-stochastic,
/// `ell[s][x]`, `pi[s][x]`.
#[derive(Debug, Clone)]
pub struct RawModel {
    pub n: usize,
    pub gamma0: f64,
    pub ell: [Vec<f64>; 2],
    pub g: [[[Vec<Vec<f64>>; 2]; 2]; 2],
}

/// Group kernel written out as the four `(d, y)` terms.
pub fn brute_kernel(m: &RawModel, pi: &[Vec<f64>; 2], s: usize) -> Vec<Vec<f64>> {
    let n = m.n;
    let mut k = vec![vec![0.0; n]; n];
    for x in 0..n {
        let (a, l) = (pi[s][x], m.ell[s][x]);
        for to in 0..n {
            let reject_default = m.g[s][0][0][x][to] * (1.0 - a) * (1.0 - l);
            let reject_repay = m.g[s][0][1][x][to] * (1.0 - a) * l;
            let approve_default = m.g[s][1][0][x][to] * a * (1.0 - l);
            let approve_repay = m.g[s][1][1][x][to] * a * l;
            k[x][to] = reject_default + reject_repay + approve_default + approve_repay;
        }
    }
    k
}

/// Metrics from the joint law of `(S, X, D, Y)` at one distribution pair.
#[derive(Debug, Clone, Copy)]
pub struct JointMetrics {
    pub utility: f64,
    pub qualification: [f64; 2],
    pub tpr: [f64; 2],
    pub loan: [f64; 2],
    pub average_score: f64,
}

pub fn joint_metrics(m: &RawModel, pi: &[Vec<f64>; 2], mu: &[Vec<f64>; 2], cost: f64) -> JointMetrics {
    let gamma = [m.gamma0, 1.0 - m.gamma0];
    let n = m.n;
    // p[s][x][d][y]
    let mut utility = 0.0;
    let mut group = [0.0; 2];
    let mut pos = [0.0; 2];
    let mut approved = [0.0; 2];
    let mut approved_pos = [0.0; 2];
    let mut score = 0.0;
    for s in 0..2 {
        for x in 0..n {
            for d in 0..2 {
                for y in 0..2 {
                    let pd = if d == 1 { pi[s][x] } else { 1.0 - pi[s][x] };
                    let py = if y == 1 { m.ell[s][x] } else { 1.0 - m.ell[s][x] };
                    let p = gamma[s] * mu[s][x] * pd * py;
                    group[s] += p;
                    score += p * (x + 1) as f64 / n as f64;
                    if y == 1 {
                        pos[s] += p;
                    }
                    if d == 1 {
                        approved[s] += p;
                        utility += p * (y as f64 - cost);
                        if y == 1 {
                            approved_pos[s] += p;
                        }
                    }
                }
            }
        }
    }
    JointMetrics {
        utility,
        qualification: [pos[0] / group[0], pos[1] / group[1]],
        tpr: [approved_pos[0] / pos[0], approved_pos[1] / pos[1]],
        loan: [approved[0] / group[0], approved[1] / group[1]],
        average_score: score,
    }
}
