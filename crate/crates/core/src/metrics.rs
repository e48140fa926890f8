//! Structural parameters of an MDP: value-function variation, action
//! variation and its horizon-sensitive and empirical restrictions, the model
//! approximation gap, and k-step transition distances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_discount, Error, Result};
use crate::mdp::{DeterministicPolicy, TabularMdp};
use crate::solve::{evaluate, policy_transition_matrix, solve};

/// `||p - q||_1`.
#[inline]
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// `kappa_{M,gamma}`: largest gap between two optimal state values.
pub fn value_function_variation(mdp: &TabularMdp, gamma: f64) -> Result<f64> {
    check_discount("gamma", gamma)?;
    Ok(solve(mdp, gamma).1.spread())
}

/// `delta_M`: largest L1 distance between two actions' transition rows.
pub fn action_variation(mdp: &TabularMdp) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            for b in (a + 1)..mdp.n_actions() {
                worst = worst.max(l1_distance(
                    mdp.transition_row(s, a),
                    mdp.transition_row(s, b),
                ));
            }
        }
    }
    worst
}

/// State-action pairs `(s, b(s))` for every state where policies `a` and `b`
/// disagree, in increasing state order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscordantPairs {
    pairs: Vec<(usize, usize)>,
}

impl DiscordantPairs {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.pairs.iter()
    }
}

pub fn discordant_pairs(
    policy_a: &DeterministicPolicy,
    policy_b: &DeterministicPolicy,
) -> Result<DiscordantPairs> {
    if policy_a.len() != policy_b.len() {
        return Err(Error::Shape(format!(
            "policies of length {} and {}",
            policy_a.len(),
            policy_b.len()
        )));
    }
    let pairs = policy_a
        .iter()
        .zip(policy_b.iter())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(s, (_, &b))| (s, b))
        .collect();
    Ok(DiscordantPairs { pairs })
}

/// `max_{(s,a) in Z(base != other)} ||P(.|s, base(s)) - P(.|s, a)||_1`, zero
/// over an empty set. Rows come from `mdp`.
pub fn discordant_action_variation(
    mdp: &TabularMdp,
    base: &DeterministicPolicy,
    other: &DeterministicPolicy,
) -> Result<f64> {
    base.check_for(mdp)?;
    other.check_for(mdp)?;
    let pairs = discordant_pairs(base, other)?;
    Ok(pairs
        .iter()
        .map(|&(s, a)| l1_distance(mdp.transition_row(s, base[s]), mdp.transition_row(s, a)))
        .fold(0.0, f64::max))
}

/// `delta_{M,gamma}`: action variation restricted to the states where the
/// `gamma`-optimal and `gamma_bw`-optimal policies disagree.
pub fn horizon_sensitive_action_variation(
    mdp: &TabularMdp,
    gamma: f64,
    gamma_bw: f64,
) -> Result<f64> {
    check_discount("gamma", gamma)?;
    check_discount("gamma_bw", gamma_bw)?;
    let shallow = solve(mdp, gamma).0;
    let deep = solve(mdp, gamma_bw).0;
    discordant_action_variation(mdp, &shallow, &deep)
}

/// `delta-hat_{M,gamma}`: action variation restricted to the states where the
/// policies optimal on `mdp` and on `mdp_hat` disagree, measured with the
/// transitions of the true `mdp`.
pub fn empirical_action_variation(
    mdp: &TabularMdp,
    mdp_hat: &TabularMdp,
    gamma: f64,
) -> Result<f64> {
    check_discount("gamma", gamma)?;
    mdp.check_same_shape(mdp_hat)?;
    let truth = solve(mdp, gamma).0;
    let planned = solve(mdp_hat, gamma).0;
    discordant_action_variation(mdp, &truth, &planned)
}

/// `epsilon-hat`: sup-norm value gap at `gamma`, in the true model, between the
/// policies optimal on `mdp` and on `mdp_hat`.
pub fn model_approx_variance(mdp: &TabularMdp, mdp_hat: &TabularMdp, gamma: f64) -> Result<f64> {
    check_discount("gamma", gamma)?;
    mdp.check_same_shape(mdp_hat)?;
    let (_, optimal) = solve(mdp, gamma);
    let planned = solve(mdp_hat, gamma).0;
    Ok(optimal.sup_distance(&evaluate(mdp, &planned, gamma)))
}

/// L1 distance between row `s` of `(P^a)^k` and `(P^b)^k`.
pub fn k_step_distance(
    mdp: &TabularMdp,
    policy_a: &DeterministicPolicy,
    policy_b: &DeterministicPolicy,
    s: usize,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if s >= mdp.n_states() {
        return Err(Error::invalid("s", format!("state {s} out of range")));
    }
    policy_a.check_for(mdp)?;
    policy_b.check_for(mdp)?;
    let pa = policy_transition_matrix(mdp, policy_a);
    let pb = policy_transition_matrix(mdp, policy_b);
    let ra = k_step_row(&pa, s, k);
    let rb = k_step_row(&pb, s, k);
    Ok(l1_distance(&ra, &rb))
}

/// Row `s` of `m^k` for every `k` in `1..=k_max`, by repeated row-vector
/// products.
pub fn k_step_rows(m: &DMatrix<f64>, s: usize, k_max: usize) -> Vec<Vec<f64>> {
    let mut row = m.row(s).clone_owned();
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        out.push(row.iter().copied().collect());
        row = &row * m;
    }
    out
}

fn k_step_row(m: &DMatrix<f64>, s: usize, k: usize) -> Vec<f64> {
    k_step_rows(m, s, k).pop().expect("k >= 1")
}

/// All structural parameters for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub kappa: f64,
    pub delta: f64,
    pub delta_gamma: f64,
    pub delta_hat: f64,
    pub epsilon_hat: f64,
    pub gamma_bw: f64,
    pub gamma: f64,
}

/// Optimal policies needed by every structural parameter and bound, computed
/// once per `(M, M-hat, gamma, gamma_bw)`.
#[derive(Debug, Clone)]
pub struct PlanningPolicies {
    /// `pi*_{M,gamma}` and its value in `M` at `gamma`.
    pub shallow: DeterministicPolicy,
    pub shallow_value: crate::mdp::ValueVector,
    /// `pi*_{M,gamma_bw}`.
    pub deep: DeterministicPolicy,
    /// `pi*_{M-hat,gamma}`.
    pub planned: DeterministicPolicy,
}

impl PlanningPolicies {
    pub fn solve(
        mdp: &TabularMdp,
        mdp_hat: &TabularMdp,
        gamma: f64,
        gamma_bw: f64,
    ) -> Result<Self> {
        check_discount("gamma", gamma)?;
        check_discount("gamma_bw", gamma_bw)?;
        mdp.check_same_shape(mdp_hat)?;
        let (shallow, shallow_value) = solve(mdp, gamma);
        let deep = solve(mdp, gamma_bw).0;
        let planned = solve(mdp_hat, gamma).0;
        Ok(PlanningPolicies {
            shallow,
            shallow_value,
            deep,
            planned,
        })
    }
}

pub fn structural_report(
    mdp: &TabularMdp,
    mdp_hat: &TabularMdp,
    gamma: f64,
    gamma_bw: f64,
) -> Result<StructuralReport> {
    let policies = PlanningPolicies::solve(mdp, mdp_hat, gamma, gamma_bw)?;
    Ok(structural_report_from(mdp, gamma, gamma_bw, &policies))
}

pub fn structural_report_from(
    mdp: &TabularMdp,
    gamma: f64,
    gamma_bw: f64,
    policies: &PlanningPolicies,
) -> StructuralReport {
    let planned_value = evaluate(mdp, &policies.planned, gamma);
    StructuralReport {
        kappa: policies.shallow_value.spread(),
        delta: action_variation(mdp),
        delta_gamma: discordant_action_variation(mdp, &policies.shallow, &policies.deep)
            .expect("policies solved on mdp"),
        delta_hat: discordant_action_variation(mdp, &policies.shallow, &policies.planned)
            .expect("policies solved on mdp"),
        epsilon_hat: policies.shallow_value.sup_distance(&planned_value),
        gamma_bw,
        gamma,
    }
}
