//! Finite MDP representation, policies, value vectors and discount grids.
//!
//! Transitions are stored densely in a flat buffer indexed `(state, action,
//! next_state)`; rewards in a flat buffer indexed `(state, action)`.

use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on transition-row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A finite MDP `(S, A, P, R)` with rewards in `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    r_max: f64,
}

/// Wire format of an MDP, `{ n_states, n_actions, transitions, rewards, r_max }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_r_max() -> f64 {
    1.0
}

impl TabularMdp {
    /// Build from nested `transitions[s][a][s']` and `rewards[s][a]`, validating
    /// every invariant.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        r_max: f64,
    ) -> Result<Self> {
        if transitions.len() != n_states {
            return Err(Error::invalid(
                "transitions",
                format!("expected {n_states} states, found {}", transitions.len()),
            ));
        }
        if rewards.len() != n_states {
            return Err(Error::invalid(
                "rewards",
                format!("expected {n_states} states, found {}", rewards.len()),
            ));
        }
        let mut flat_p = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::invalid(
                    format!("transitions[{s}]"),
                    format!("expected {n_actions} actions, found {}", per_action.len()),
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::invalid(
                        format!("transitions[{s}][{a}]"),
                        format!("expected {n_states} entries, found {}", row.len()),
                    ));
                }
                flat_p.extend_from_slice(row);
            }
        }
        let mut flat_r = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rewards.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::invalid(
                    format!("rewards[{s}]"),
                    format!("expected {n_actions} actions, found {}", row.len()),
                ));
            }
            flat_r.extend_from_slice(row);
        }
        Self::from_flat(n_states, n_actions, flat_p, flat_r, r_max)
    }

    /// Build from flat row-major buffers.
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        r_max: f64,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("n_states", "must be positive"));
        }
        if n_actions == 0 {
            return Err(Error::invalid("n_actions", "must be positive"));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::invalid(
                "r_max",
                format!("must be positive, got {r_max}"),
            ));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::invalid(
                "transitions",
                format!(
                    "expected {} entries, found {}",
                    n_states * n_actions * n_states,
                    transitions.len()
                ),
            ));
        }
        if rewards.len() != n_states * n_actions {
            return Err(Error::invalid(
                "rewards",
                format!(
                    "expected {} entries, found {}",
                    n_states * n_actions,
                    rewards.len()
                ),
            ));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let start = (s * n_actions + a) * n_states;
                let row = &transitions[start..start + n_states];
                if let Some((j, p)) = row
                    .iter()
                    .enumerate()
                    .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
                {
                    return Err(Error::invalid(
                        format!("transitions[{s}][{a}][{j}]"),
                        format!("probability {p} outside [0, 1]"),
                    ));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::invalid(
                        format!("transitions[{s}][{a}]"),
                        format!("row sums to {sum}, expected 1"),
                    ));
                }
                let r = rewards[s * n_actions + a];
                if !(r.is_finite() && (0.0..=r_max).contains(&r)) {
                    return Err(Error::invalid(
                        format!("rewards[{s}][{a}]"),
                        format!("reward {r} outside [0, {r_max}]"),
                    ));
                }
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
            r_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `P(. | s, a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn transitions_flat(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    /// Same shape, same number of actions.
    pub fn check_same_shape(&self, other: &TabularMdp) -> Result<()> {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return Err(Error::Shape(format!(
                "({} states, {} actions) vs ({} states, {} actions)",
                self.n_states, self.n_actions, other.n_states, other.n_actions
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> MdpDocument {
        let transitions = (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect();
        let rewards = (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| self.reward(s, a)).collect())
            .collect();
        MdpDocument {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions,
            rewards,
            r_max: self.r_max,
        }
    }

    pub fn from_document(doc: MdpDocument) -> Result<Self> {
        TabularMdp::new(
            doc.n_states,
            doc.n_actions,
            doc.transitions,
            doc.rewards,
            doc.r_max,
        )
    }

    /// Parse and validate MDP JSON. Syntax errors carry line/column; invariant
    /// violations name the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("MDP serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// One action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeterministicPolicy(Vec<usize>);

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>, mdp: &TabularMdp) -> Result<Self> {
        if actions.len() != mdp.n_states() {
            return Err(Error::Shape(format!(
                "policy has {} entries for {} states",
                actions.len(),
                mdp.n_states()
            )));
        }
        if let Some((s, a)) = actions
            .iter()
            .enumerate()
            .find(|(_, &a)| a >= mdp.n_actions())
        {
            return Err(Error::invalid(
                format!("policy[{s}]"),
                format!("action {a} out of range 0..{}", mdp.n_actions()),
            ));
        }
        Ok(DeterministicPolicy(actions))
    }

    /// Wrap an action vector without checking it against a model.
    pub fn from_actions(actions: Vec<usize>) -> Self {
        DeterministicPolicy(actions)
    }

    /// The same action everywhere.
    pub fn constant(n_states: usize, action: usize) -> Self {
        DeterministicPolicy(vec![action; n_states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_for(&self, mdp: &TabularMdp) -> Result<()> {
        if self.0.len() != mdp.n_states() {
            return Err(Error::Shape(format!(
                "policy has {} entries for {} states",
                self.0.len(),
                mdp.n_states()
            )));
        }
        if let Some((s, a)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, &a)| a >= mdp.n_actions())
        {
            return Err(Error::invalid(
                format!("policy[{s}]"),
                format!("action {a} out of range 0..{}", mdp.n_actions()),
            ));
        }
        Ok(())
    }

    /// Every deterministic policy of `mdp`, in lexicographic order with state 0
    /// varying slowest. Only sensible for tiny models.
    pub fn enumerate(
        n_states: usize,
        n_actions: usize,
    ) -> impl Iterator<Item = DeterministicPolicy> {
        let total = (n_actions as u64).pow(n_states as u32);
        (0..total).map(move |mut code| {
            let mut actions = vec![0usize; n_states];
            for slot in actions.iter_mut().rev() {
                *slot = (code % n_actions as u64) as usize;
                code /= n_actions as u64;
            }
            DeterministicPolicy(actions)
        })
    }
}

impl Deref for DeterministicPolicy {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// State values, in undiscounted reward units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Self {
        ValueVector(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `max_s v(s) - min_s v(s)`, i.e. `max_{s,s'} |v(s) - v(s')|`.
    pub fn spread(&self) -> f64 {
        spread(&self.0)
    }

    /// `||self - other||_inf`.
    pub fn sup_distance(&self, other: &ValueVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `max - min` of a slice, zero when empty.
pub fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// A strictly descending list of discount factors in `[0, 1)`, scanned from
/// `start` down to `end` by `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountGrid {
    start: f64,
    step: f64,
    end: f64,
    values: Vec<f64>,
}

impl Default for DiscountGrid {
    fn default() -> Self {
        DiscountGrid::new(0.99, 0.01, 0.0).expect("default grid is valid")
    }
}

impl DiscountGrid {
    pub fn new(start: f64, step: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && (0.0..1.0).contains(&start)) {
            return Err(Error::invalid(
                "gamma_start",
                format!("{start} outside [0, 1)"),
            ));
        }
        if !(end.is_finite() && (0.0..=start).contains(&end)) {
            return Err(Error::invalid(
                "gamma_end",
                format!("{end} outside [0, {start}]"),
            ));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(
                "gamma_step",
                format!("{step} must be positive"),
            ));
        }
        // Generate by index and snap to 1e-10 so 0.99 - 37 * 0.01 prints as 0.62.
        let snap = |x: f64| (x * 1e10).round() / 1e10;
        let mut values = Vec::new();
        let mut i = 0usize;
        loop {
            let g = snap(start - i as f64 * step);
            if g < end + 1e-12 {
                break;
            }
            values.push(g);
            i += 1;
        }
        if values.last().is_none_or(|&last| (last - end).abs() > 1e-12) {
            values.push(end);
        }
        Ok(DiscountGrid {
            start,
            step,
            end,
            values,
        })
    }

    /// An explicit list, which must be strictly descending within `[0, 1)`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("gamma_grid", "must not be empty"));
        }
        for (i, g) in values.iter().enumerate() {
            if !(g.is_finite() && (0.0..1.0).contains(g)) {
                return Err(Error::invalid(
                    format!("gamma_grid[{i}]"),
                    format!("{g} outside [0, 1)"),
                ));
            }
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("gamma_grid", "must be strictly descending"));
        }
        let start = values[0];
        let end = *values.last().unwrap();
        let step = if values.len() > 1 {
            values[0] - values[1]
        } else {
            0.0
        };
        Ok(DiscountGrid {
            start,
            step,
            end,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> TabularMdp {
        TabularMdp::new(
            2,
            2,
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.5, 0.5], vec![0.0, 1.0]],
            ],
            vec![vec![0.0, 1.0], vec![0.5, 0.25]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let m = two_state();
        assert_eq!(m.transition_row(1, 0), &[0.5, 0.5]);
        assert_eq!(m.reward(1, 1), 0.25);
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = TabularMdp::new(1, 1, vec![vec![vec![0.9]]], vec![vec![0.0]], 1.0).unwrap_err();
        assert!(err.to_string().contains("transitions[0][0]"), "{err}");
    }

    #[test]
    fn rejects_reward_above_r_max() {
        let err = TabularMdp::new(1, 1, vec![vec![vec![1.0]]], vec![vec![1.5]], 1.0).unwrap_err();
        assert!(err.to_string().contains("rewards[0][0]"), "{err}");
    }

    #[test]
    fn rejects_negative_probability() {
        let err = TabularMdp::new(
            2,
            1,
            vec![vec![vec![1.5, -0.5]], vec![vec![0.0, 1.0]]],
            vec![vec![0.0], vec![0.0]],
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("transitions[0][0][0]"), "{err}");
    }

    #[test]
    fn json_reports_position_and_field() {
        let err = TabularMdp::from_json_str("{ \"n_states\": 1,\n \"n_actions\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let bad =
            r#"{"n_states":1,"n_actions":1,"transitions":[[[1.0]]],"rewards":[[2.0]],"r_max":1.0}"#;
        let err = TabularMdp::from_json_str(bad).unwrap_err();
        assert!(err.to_string().contains("rewards[0][0]"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let m = two_state();
        let back = TabularMdp::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn default_grid() {
        let g = DiscountGrid::default();
        assert_eq!(g.len(), 100);
        assert_eq!(g.values()[0], 0.99);
        assert_eq!(g.values()[37], 0.62);
        assert_eq!(*g.values().last().unwrap(), 0.0);
        assert!(g.values().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn grid_always_includes_end() {
        let g = DiscountGrid::new(0.9, 0.25, 0.0).unwrap();
        assert_eq!(g.values(), &[0.9, 0.65, 0.4, 0.15, 0.0]);
        assert!(DiscountGrid::new(1.0, 0.01, 0.0).is_err());
        assert!(DiscountGrid::new(0.5, 0.0, 0.0).is_err());
        assert!(DiscountGrid::from_values(vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn policy_enumeration_is_exhaustive() {
        let all: Vec<_> = DeterministicPolicy::enumerate(3, 2).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0].actions(), &[0, 0, 0]);
        assert_eq!(all[5].actions(), &[1, 0, 1]);
    }

    #[test]
    fn policy_validation() {
        let m = two_state();
        assert!(DeterministicPolicy::new(vec![0, 2], &m).is_err());
        assert!(DeterministicPolicy::new(vec![0], &m).is_err());
        assert!(DeterministicPolicy::new(vec![1, 0], &m).is_ok());
    }
}
