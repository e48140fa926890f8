//! Independent reference implementations used as test oracles. None of these
//! call into the solver, metric or abstraction code under test.
#![allow(dead_code)]

use shallow_plan::modelgen::{generate_fixed, FixedSpec};
use shallow_plan::TabularMdp;

pub fn fixed(n: usize, d: usize, seed: u64) -> TabularMdp {
    generate_fixed(&FixedSpec::new(n, d, seed)).unwrap()
}

/// Dense `P^pi` as nested rows.
pub fn policy_matrix(mdp: &TabularMdp, policy: &[usize]) -> Vec<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| mdp.transition_row(s, policy[s]).to_vec())
        .collect()
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let pivot_row = a[col].clone();
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// `V = (I - gamma P^pi)^{-1} R^pi` by elimination.
pub fn evaluate(mdp: &TabularMdp, policy: &[usize], gamma: f64) -> Vec<f64> {
    let n = mdp.n_states();
    let p = policy_matrix(mdp, policy);
    let a = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - gamma * p[i][j])
                .collect()
        })
        .collect();
    let r = (0..n).map(|s| mdp.reward(s, policy[s])).collect();
    gauss_solve(a, r)
}

/// `sum_{k=0}^{K} gamma^k (P^pi)^k R^pi` by repeated products.
pub fn power_sum_value(mdp: &TabularMdp, policy: &[usize], gamma: f64, terms: usize) -> Vec<f64> {
    let n = mdp.n_states();
    let p = policy_matrix(mdp, policy);
    let mut term: Vec<f64> = (0..n).map(|s| mdp.reward(s, policy[s])).collect();
    let mut total = term.clone();
    for _ in 0..terms {
        term = mat_vec(&p, &term).into_iter().map(|x| gamma * x).collect();
        for (t, x) in total.iter_mut().zip(&term) {
            *t += x;
        }
    }
    total
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn mat_pow(m: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..k {
        out = mat_mul(&out, m);
    }
    out
}

pub fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Every deterministic policy, in no particular order.
pub fn all_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    (0..total)
        .map(|mut code| {
            (0..n_states)
                .map(|_| {
                    let a = code % n_actions;
                    code /= n_actions;
                    a
                })
                .collect()
        })
        .collect()
}

/// Optimal values by exhaustive enumeration: the state-wise maximum over all
/// deterministic policies.
pub fn brute_force_values(mdp: &TabularMdp, gamma: f64) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; mdp.n_states()];
    for policy in all_policies(mdp.n_states(), mdp.n_actions()) {
        for (b, v) in best.iter_mut().zip(evaluate(mdp, &policy, gamma)) {
            *b = b.max(v);
        }
    }
    best
}

/// Lowest-index action whose one-step lookahead on the enumerated optimal
/// values is within `1e-10 * max(1, |V|_inf)` of the best.
pub fn brute_force_policy(mdp: &TabularMdp, gamma: f64) -> (Vec<usize>, Vec<f64>) {
    let v = brute_force_values(mdp, gamma);
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let policy = (0..mdp.n_states())
        .map(|s| {
            let q: Vec<f64> = (0..mdp.n_actions())
                .map(|a| {
                    mdp.reward(s, a)
                        + gamma
                            * mdp
                                .transition_row(s, a)
                                .iter()
                                .zip(&v)
                                .map(|(p, x)| p * x)
                                .sum::<f64>()
                })
                .collect();
            let top = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|&x| x >= top - 1e-10 * scale).unwrap()
        })
        .collect();
    (policy, v)
}

/// Scan `grid` (descending) with the enumeration oracle; the last discount
/// before the policy first differs from the one at `grid[0]`.
pub fn brute_force_blackwell(mdp: &TabularMdp, grid: &[f64]) -> f64 {
    let top = brute_force_policy(mdp, grid[0]).0;
    let mut last = grid[0];
    for &g in &grid[1..] {
        if brute_force_policy(mdp, g).0 != top {
            return last;
        }
        last = g;
    }
    last
}

/// Triple loop over states and action pairs.
pub fn delta_oracle(mdp: &TabularMdp) -> f64 {
    let mut best = 0.0f64;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            for b in 0..mdp.n_actions() {
                best = best.max(l1(mdp.transition_row(s, a), mdp.transition_row(s, b)));
            }
        }
    }
    best
}
