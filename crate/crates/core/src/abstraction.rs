//! State abstraction: an observation map groups states, the agent's belief is
//! uniform over each group, and the induced abstract MDP is planned on in
//! place of the underlying one.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_discount, Error, Result};
use crate::mdp::{spread, DeterministicPolicy, TabularMdp};
use crate::metrics::{action_variation, l1_distance};
use crate::modelgen::stream;
use crate::solve::{evaluate, solve};

/// Slack on the theorem checks.
pub const THEOREM_TOLERANCE: f64 = 1e-9;

/// Underlying parameters below this make the normalized ratio undefined.
pub const RATIO_FLOOR: f64 = 1e-12;

const TAG_OBSERVATION_MAP: u64 = 0x4f42_534d_4150; // "OBSMAP"

/// Surjective map from states to observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ObservationMapDocument", into = "ObservationMapDocument")]
pub struct ObservationMap {
    n_states: usize,
    n_observations: usize,
    assignment: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationMapDocument {
    pub n_states: usize,
    pub n_observations: usize,
    pub assignment: Vec<usize>,
}

impl TryFrom<ObservationMapDocument> for ObservationMap {
    type Error = Error;

    fn try_from(doc: ObservationMapDocument) -> Result<Self> {
        ObservationMap::new(doc.n_states, doc.n_observations, doc.assignment)
    }
}

impl From<ObservationMap> for ObservationMapDocument {
    fn from(map: ObservationMap) -> Self {
        ObservationMapDocument {
            n_states: map.n_states,
            n_observations: map.n_observations,
            assignment: map.assignment,
        }
    }
}

impl ObservationMap {
    pub fn new(n_states: usize, n_observations: usize, assignment: Vec<usize>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("n_states", "must be positive"));
        }
        if n_observations == 0 || n_observations > n_states {
            return Err(Error::invalid(
                "n_observations",
                format!("{n_observations} outside 1..={n_states}"),
            ));
        }
        if assignment.len() != n_states {
            return Err(Error::invalid(
                "assignment",
                format!("expected {n_states} entries, found {}", assignment.len()),
            ));
        }
        let mut hit = vec![false; n_observations];
        for (s, &o) in assignment.iter().enumerate() {
            if o >= n_observations {
                return Err(Error::invalid(
                    format!("assignment[{s}]"),
                    format!("observation {o} out of range 0..{n_observations}"),
                ));
            }
            hit[o] = true;
        }
        if let Some(o) = hit.iter().position(|&h| !h) {
            return Err(Error::invalid(
                "assignment",
                format!("observation {o} has no state (map must be surjective)"),
            ));
        }
        Ok(ObservationMap {
            n_states,
            n_observations,
            assignment,
        })
    }

    pub fn identity(n_states: usize) -> Self {
        ObservationMap {
            n_states,
            n_observations: n_states,
            assignment: (0..n_states).collect(),
        }
    }

    /// A random surjective map: a random state is pinned to each observation,
    /// the remaining states pick an observation uniformly.
    pub fn random(n_states: usize, n_observations: usize, seed: u64) -> Result<Self> {
        if n_observations == 0 || n_observations > n_states {
            return Err(Error::invalid(
                "n_observations",
                format!("{n_observations} outside 1..={n_states}"),
            ));
        }
        let mut rng = stream(
            seed,
            &[TAG_OBSERVATION_MAP, n_states as u64, n_observations as u64],
        );
        let mut order: Vec<usize> = (0..n_states).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![0; n_states];
        for (i, &s) in order.iter().enumerate() {
            assignment[s] = if i < n_observations {
                i
            } else {
                rng.random_range(0..n_observations)
            };
        }
        ObservationMap::new(n_states, n_observations, assignment)
    }

    pub fn is_identity(&self) -> bool {
        self.n_observations == self.n_states
            && self.assignment.iter().enumerate().all(|(i, &w)| i == w)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn observe(&self, s: usize) -> usize {
        self.assignment[s]
    }

    /// Number of states mapped to each observation.
    pub fn preimage_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_observations];
        for &o in &self.assignment {
            sizes[o] += 1;
        }
        sizes
    }

    pub fn check_for(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states() {
            return Err(Error::Shape(format!(
                "observation map covers {} states, MDP has {}",
                self.n_states,
                mdp.n_states()
            )));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// `b(s | omega)`: uniform over each observation's preimage.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMatrix {
    n_states: usize,
    beliefs: Vec<f64>,
}

impl BeliefMatrix {
    pub fn from_map(map: &ObservationMap) -> Self {
        let sizes = map.preimage_sizes();
        let mut beliefs = vec![0.0; map.n_observations * map.n_states];
        for (s, &o) in map.assignment.iter().enumerate() {
            beliefs[o * map.n_states + s] = 1.0 / sizes[o] as f64;
        }
        BeliefMatrix {
            n_states: map.n_states,
            beliefs,
        }
    }

    pub fn row(&self, observation: usize) -> &[f64] {
        &self.beliefs[observation * self.n_states..][..self.n_states]
    }

    pub fn n_observations(&self) -> usize {
        self.beliefs.len() / self.n_states
    }

    /// `max_{sigma, sigma'} ||b(.|sigma) - b(.|sigma')||_1`.
    pub fn max_l1_spread(&self) -> f64 {
        let k = self.n_observations();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in (i + 1)..k {
                worst = worst.max(l1_distance(self.row(i), self.row(j)));
            }
        }
        worst
    }
}

/// The abstract MDP over observations:
/// `R_A(w, a) = sum_s b(s|w) R(s, a)` and
/// `P_A(w, a, w') = sum_s sum_s' P(s, a, s') b(s|w) O(w', s')`.
pub fn abstract_mdp(mdp: &TabularMdp, map: &ObservationMap) -> Result<TabularMdp> {
    map.check_for(mdp)?;
    if map.is_identity() {
        return Ok(mdp.clone());
    }
    let beliefs = BeliefMatrix::from_map(map);
    let k = map.n_observations;
    let m = mdp.n_actions();
    let mut transitions = vec![0.0; k * m * k];
    let mut rewards = vec![0.0; k * m];
    for w in 0..k {
        let belief = beliefs.row(w);
        for a in 0..m {
            let row = &mut transitions[(w * m + a) * k..][..k];
            let mut reward = 0.0;
            for (s, &b) in belief.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                reward += b * mdp.reward(s, a);
                for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
                    row[map.observe(t)] += b * p;
                }
            }
            // Exact mass is 1; renormalizing removes accumulated rounding.
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            rewards[w * m + a] = reward.min(mdp.r_max());
        }
    }
    TabularMdp::from_flat(k, m, transitions, rewards, mdp.r_max())
}

/// `b(.|w) . V` for every observation `w`.
pub fn observation_values(beliefs: &BeliefMatrix, values: &[f64]) -> Vec<f64> {
    (0..beliefs.n_observations())
        .map(|w| beliefs.row(w).iter().zip(values).map(|(b, v)| b * v).sum())
        .collect()
}

/// `(kappa^phi, delta^phi)`: value-function and action variation of the
/// abstract MDP.
pub fn pomdp_structural_params(abstract_model: &TabularMdp, gamma: f64) -> Result<(f64, f64)> {
    check_discount("gamma", gamma)?;
    Ok((
        solve(abstract_model, gamma).1.spread(),
        action_variation(abstract_model),
    ))
}

/// `pi_phi(s) = pi(omega(s))`.
pub fn lifted_policy(
    abstract_policy: &DeterministicPolicy,
    map: &ObservationMap,
) -> Result<DeterministicPolicy> {
    if abstract_policy.len() != map.n_observations {
        return Err(Error::Shape(format!(
            "abstract policy has {} entries for {} observations",
            abstract_policy.len(),
            map.n_observations
        )));
    }
    Ok(DeterministicPolicy::from_actions(
        map.assignment.iter().map(|&o| abstract_policy[o]).collect(),
    ))
}

/// Tightest `Delta_eps^phi`: `max_s |V*(s) - V^{pi_phi}(s)|` at `gamma` in the
/// underlying MDP, `pi_phi` being the lifted abstract-optimal policy.
pub fn delta_eps_phi(mdp: &TabularMdp, map: &ObservationMap, gamma: f64) -> Result<f64> {
    check_discount("gamma", gamma)?;
    let abstract_model = abstract_mdp(mdp, map)?;
    let lifted = lifted_policy(&solve(&abstract_model, gamma).0, map)?;
    let (optimal, optimal_value) = solve(mdp, gamma);
    if lifted == optimal {
        return Ok(0.0);
    }
    Ok(optimal_value.sup_distance(&evaluate(mdp, &lifted, gamma)))
}

/// Abstract versus underlying structural parameters at one discount.
///
/// The value of an observation is the value the agent actually obtains from
/// it: `V(w) = sum_s b(s|w) V^{pi_phi}(s)`, with `pi_phi` executed in the
/// underlying MDP. `kappa_phi_abstract` instead uses the abstract MDP's own
/// value function, which is not bound by the same inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionReport {
    /// Spread over observations of the belief-weighted values of the lifted
    /// policy in the underlying MDP.
    pub kappa_phi: f64,
    /// Spread of the abstract MDP's own optimal values.
    pub kappa_phi_abstract: f64,
    pub delta_phi: f64,
    pub kappa_s: f64,
    pub delta_s: f64,
    pub delta_eps_phi: f64,
    pub belief_l1_max: f64,
    pub thm2_delta_ok: bool,
    pub thm2_kappa_ok: bool,
}

impl AbstractionReport {
    /// Right-hand side of the value-function-variation inequality.
    pub fn kappa_bound(&self) -> f64 {
        self.belief_l1_max / 2.0 * (self.kappa_s + self.delta_eps_phi)
    }

    pub fn kappa_ratio(&self) -> Option<f64> {
        (self.kappa_s >= RATIO_FLOOR).then(|| self.kappa_phi / self.kappa_s)
    }

    pub fn delta_ratio(&self) -> Option<f64> {
        (self.delta_s >= RATIO_FLOOR).then(|| self.delta_phi / self.delta_s)
    }
}

pub fn theorem2_check(
    mdp: &TabularMdp,
    map: &ObservationMap,
    gamma: f64,
) -> Result<AbstractionReport> {
    check_discount("gamma", gamma)?;
    let abstract_model = abstract_mdp(mdp, map)?;
    Ok(theorem2_check_with(mdp, map, &abstract_model, gamma))
}

/// As [`theorem2_check`] with the abstract MDP already built.
pub fn theorem2_check_with(
    mdp: &TabularMdp,
    map: &ObservationMap,
    abstract_model: &TabularMdp,
    gamma: f64,
) -> AbstractionReport {
    let (abstract_policy, abstract_value) = solve(abstract_model, gamma);
    let (optimal, optimal_value) = solve(mdp, gamma);
    let lifted = lifted_policy(&abstract_policy, map).expect("policy solved on abstract model");
    let lifted_value = if lifted == optimal {
        optimal_value.clone()
    } else {
        evaluate(mdp, &lifted, gamma)
    };
    let beliefs = BeliefMatrix::from_map(map);
    let mut report = AbstractionReport {
        kappa_phi: spread(&observation_values(&beliefs, &lifted_value)),
        kappa_phi_abstract: abstract_value.spread(),
        delta_phi: action_variation(abstract_model),
        kappa_s: optimal_value.spread(),
        delta_s: action_variation(mdp),
        delta_eps_phi: optimal_value.sup_distance(&lifted_value),
        belief_l1_max: beliefs.max_l1_spread(),
        thm2_delta_ok: false,
        thm2_kappa_ok: false,
    };
    report.thm2_delta_ok = report.delta_phi <= report.delta_s + THEOREM_TOLERANCE;
    report.thm2_kappa_ok = report.kappa_phi <= report.kappa_bound() + THEOREM_TOLERANCE;
    report
}

/// `(kappa^phi / kappa^S, delta^phi / delta^S)`, `None` where the underlying
/// parameter vanishes.
pub fn normalized_params(
    mdp: &TabularMdp,
    map: &ObservationMap,
    gamma: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    let report = theorem2_check(mdp, map, gamma)?;
    Ok((report.kappa_ratio(), report.delta_ratio()))
}
