//! Exact policy evaluation, canonical policy iteration and Blackwell
//! discount-factor detection.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_discount, Result};
use crate::mdp::{DeterministicPolicy, DiscountGrid, TabularMdp, ValueVector};

/// Relative tolerance under which two action values count as tied. Ties go to
/// the lowest action index.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// `P^pi`, row `s` being `P(. | s, pi(s))`.
pub fn policy_transition_matrix(mdp: &TabularMdp, policy: &DeterministicPolicy) -> DMatrix<f64> {
    let n = mdp.n_states();
    DMatrix::from_fn(n, n, |s, t| mdp.transition_row(s, policy[s])[t])
}

/// `R^pi`, entry `s` being `R(s, pi(s))`.
pub fn policy_rewards(mdp: &TabularMdp, policy: &DeterministicPolicy) -> DVector<f64> {
    DVector::from_fn(mdp.n_states(), |s, _| mdp.reward(s, policy[s]))
}

/// Solve `(I - gamma P^pi) V = R^pi` exactly.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    gamma: f64,
) -> Result<ValueVector> {
    check_discount("gamma", gamma)?;
    policy.check_for(mdp)?;
    Ok(evaluate(mdp, policy, gamma))
}

pub(crate) fn evaluate(mdp: &TabularMdp, policy: &DeterministicPolicy, gamma: f64) -> ValueVector {
    let rewards = policy_rewards(mdp, policy);
    if gamma == 0.0 {
        return ValueVector::new(rewards.as_slice().to_vec());
    }
    let n = mdp.n_states();
    let system = DMatrix::<f64>::identity(n, n) - policy_transition_matrix(mdp, policy) * gamma;
    // gamma < 1 keeps the spectral radius of gamma P^pi below one.
    let values = system
        .lu()
        .solve(&rewards)
        .expect("I - gamma P is nonsingular for gamma < 1");
    ValueVector::new(values.as_slice().to_vec())
}

/// `Q(s, a) = R(s, a) + gamma sum_s' P(s'|s,a) V(s')`.
#[inline]
pub fn action_value(mdp: &TabularMdp, values: &[f64], gamma: f64, s: usize, a: usize) -> f64 {
    let future: f64 = mdp
        .transition_row(s, a)
        .iter()
        .zip(values)
        .map(|(p, v)| p * v)
        .sum();
    mdp.reward(s, a) + gamma * future
}

fn tie_tolerance(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    TIE_TOLERANCE * scale
}

/// Lowest-index action whose value is within tolerance of the best.
fn canonical_greedy(mdp: &TabularMdp, values: &[f64], gamma: f64) -> DeterministicPolicy {
    let tol = tie_tolerance(values);
    let actions = (0..mdp.n_states())
        .map(|s| {
            let q: Vec<f64> = (0..mdp.n_actions())
                .map(|a| action_value(mdp, values, gamma, s, a))
                .collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|&v| v >= best - tol).unwrap_or(0)
        })
        .collect();
    DeterministicPolicy::from_actions(actions)
}

/// Canonical optimal policy at `gamma` and its exact value.
///
/// Policy iteration with exact evaluation; a state switches action only on a
/// strict improvement beyond tolerance, then the converged policy is replaced by
/// the lowest-index greedy action in every state.
pub fn optimal_policy(mdp: &TabularMdp, gamma: f64) -> Result<(DeterministicPolicy, ValueVector)> {
    check_discount("gamma", gamma)?;
    Ok(solve_from(
        mdp,
        gamma,
        canonical_greedy(mdp, &vec![0.0; mdp.n_states()], 0.0),
    ))
}

pub(crate) fn solve(mdp: &TabularMdp, gamma: f64) -> (DeterministicPolicy, ValueVector) {
    solve_from(
        mdp,
        gamma,
        canonical_greedy(mdp, &vec![0.0; mdp.n_states()], 0.0),
    )
}

fn solve_from(
    mdp: &TabularMdp,
    gamma: f64,
    initial: DeterministicPolicy,
) -> (DeterministicPolicy, ValueVector) {
    let mut policy = initial;
    let mut values = evaluate(mdp, &policy, gamma);
    loop {
        let tol = tie_tolerance(&values);
        let mut actions = policy.actions().to_vec();
        let mut changed = false;
        for (s, slot) in actions.iter_mut().enumerate() {
            let mut best = action_value(mdp, &values, gamma, s, *slot);
            for a in 0..mdp.n_actions() {
                let q = action_value(mdp, &values, gamma, s, a);
                if q > best + tol {
                    best = q;
                    *slot = a;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        policy = DeterministicPolicy::from_actions(actions);
        values = evaluate(mdp, &policy, gamma);
    }
    let canonical = canonical_greedy(mdp, &values, gamma);
    if canonical != policy {
        values = evaluate(mdp, &canonical, gamma);
    }
    (canonical, values)
}

/// Canonical optimal policies along a discount grid, highest discount first.
#[derive(Debug, Clone)]
pub struct PolicyPath {
    gammas: Vec<f64>,
    policies: Vec<DeterministicPolicy>,
    values: Vec<ValueVector>,
}

impl PolicyPath {
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn policies(&self) -> &[DeterministicPolicy] {
        &self.policies
    }

    pub fn values(&self) -> &[ValueVector] {
        &self.values
    }

    /// Index of the smallest grid discount such that the policy is the same at
    /// every grid point at or above it.
    pub fn blackwell_index(&self) -> usize {
        let first = &self.policies[0];
        self.policies
            .iter()
            .position(|p| p != first)
            .map_or(self.policies.len() - 1, |i| i - 1)
    }

    pub fn blackwell_gamma(&self) -> f64 {
        self.gammas[self.blackwell_index()]
    }
}

/// Solve at every grid point. Each solve is warm-started from its neighbour;
/// the canonical policy does not depend on the starting point.
pub fn optimal_policy_path(mdp: &TabularMdp, grid: &DiscountGrid) -> PolicyPath {
    let mut policies = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    let mut start = canonical_greedy(mdp, &vec![0.0; mdp.n_states()], 0.0);
    for &gamma in grid.values() {
        let (policy, value) = solve_from(mdp, gamma, start);
        start = policy.clone();
        policies.push(policy);
        values.push(value);
    }
    PolicyPath {
        gammas: grid.values().to_vec(),
        policies,
        values,
    }
}

/// Grid approximation of the Blackwell discount factor: scanning down from the
/// top of the grid, the last discount before the canonical optimal policy first
/// changes, or the grid's end if it never changes.
pub fn blackwell_gamma(mdp: &TabularMdp, grid: &DiscountGrid) -> f64 {
    let first = solve(mdp, grid.values()[0]).0;
    let mut previous = grid.values()[0];
    for &gamma in &grid.values()[1..] {
        if solve_from(mdp, gamma, first.clone()).0 != first {
            return previous;
        }
        previous = gamma;
    }
    previous
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_state(reward: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![vec![vec![1.0]]], vec![vec![reward]], 1.0).unwrap()
    }

    #[test]
    fn geometric_series() {
        let m = single_state(1.0);
        let v = evaluate_policy(&m, &DeterministicPolicy::constant(1, 0), 0.5).unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let m = TabularMdp::new(
            2,
            2,
            vec![
                vec![vec![0.3, 0.7], vec![1.0, 0.0]],
                vec![vec![0.0, 1.0], vec![0.5, 0.5]],
            ],
            vec![vec![0.1, 0.9], vec![0.4, 0.2]],
            1.0,
        )
        .unwrap();
        let pi = DeterministicPolicy::from_actions(vec![1, 0]);
        let v = evaluate_policy(&m, &pi, 0.0).unwrap();
        assert_eq!(&*v, &[0.9, 0.4]);
        let (opt, _) = optimal_policy(&m, 0.0).unwrap();
        assert_eq!(opt.actions(), &[1, 0]);
    }

    #[test]
    fn rejects_gamma_one() {
        let m = single_state(1.0);
        assert!(evaluate_policy(&m, &DeterministicPolicy::constant(1, 0), 1.0).is_err());
        assert!(optimal_policy(&m, 1.0).is_err());
        assert!(optimal_policy(&m, -0.1).is_err());
    }

    #[test]
    fn identical_actions_tie_to_zero() {
        let row = vec![0.25, 0.75];
        let m = TabularMdp::new(
            2,
            3,
            vec![vec![row.clone(); 3], vec![row.clone(); 3]],
            vec![vec![0.5; 3], vec![0.2; 3]],
            1.0,
        )
        .unwrap();
        for gamma in [0.0, 0.5, 0.99] {
            let (pi, _) = optimal_policy(&m, gamma).unwrap();
            assert_eq!(pi.actions(), &[0, 0]);
        }
    }

    #[test]
    fn action_independent_transitions_give_zero_blackwell() {
        let m = TabularMdp::new(
            2,
            2,
            vec![
                vec![vec![0.4, 0.6], vec![0.4, 0.6]],
                vec![vec![0.9, 0.1], vec![0.9, 0.1]],
            ],
            vec![vec![0.1, 0.8], vec![0.7, 0.3]],
            1.0,
        )
        .unwrap();
        assert_eq!(blackwell_gamma(&m, &DiscountGrid::default()), 0.0);
    }

    #[test]
    fn path_agrees_with_scan() {
        // state 0: action 0 pays now and stays, action 1 pays nothing but moves
        // to a lucrative absorbing state 1.
        let m = TabularMdp::new(
            2,
            2,
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            vec![vec![0.5, 0.0], vec![1.0, 1.0]],
            1.0,
        )
        .unwrap();
        let grid = DiscountGrid::default();
        let path = optimal_policy_path(&m, &grid);
        // switch when gamma/(1-gamma) > 0.5/(1-gamma) i.e. gamma > 0.5
        assert_eq!(path.blackwell_gamma(), 0.51);
        assert_eq!(blackwell_gamma(&m, &grid), 0.51);
    }
}
