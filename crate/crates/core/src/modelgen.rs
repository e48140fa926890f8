//! Random `Fixed(|S|, d)` MDPs and empirical models estimated from a
//! generative model.
//!
//! Every random draw comes from a ChaCha8 stream whose seed is derived from the
//! caller's seed and the draw's coordinates (e.g. `(s, a)`) through
//! [`derive_seed`]. Output therefore does not depend on iteration order or on
//! how work is split across threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpDocument, TabularMdp};

/// Identifies the stream layout; bump when derivation or draw order changes.
pub const STREAM_VERSION: u64 = 1;

const TAG_FIXED: u64 = 0x0046_4958_4544; // "FIXED"
const TAG_SAMPLE: u64 = 0x5341_4d50_4c45; // "SAMPLE"

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a seed and a coordinate path into an independent sub-seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(
        splitmix64(seed ^ STREAM_VERSION.rotate_left(56)),
        |h, &p| splitmix64(h ^ splitmix64(p)),
    )
}

/// A generator seeded from `derive_seed(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Parameters of `Fixed(|S|, d)`: every state-action pair reaches exactly
/// `branching` next states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedSpec {
    pub n_states: usize,
    pub branching: usize,
    pub n_actions: usize,
    pub seed: u64,
}

impl FixedSpec {
    pub fn new(n_states: usize, branching: usize, seed: u64) -> Self {
        FixedSpec {
            n_states,
            branching,
            n_actions: 2,
            seed,
        }
    }

    pub fn with_actions(mut self, n_actions: usize) -> Self {
        self.n_actions = n_actions;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::invalid("states", "must be positive"));
        }
        if self.n_actions == 0 {
            return Err(Error::invalid("actions", "must be positive"));
        }
        if self.branching == 0 || self.branching > self.n_states {
            return Err(Error::invalid(
                "branching",
                format!("{} outside 1..={}", self.branching, self.n_states),
            ));
        }
        Ok(())
    }
}

/// Sample a `Fixed(|S|, d)` MDP. For each `(s, a)`: pick `d` distinct next
/// states uniformly, give them weights uniform on `[0, 1]` and normalize, and
/// draw `R(s, a)` uniform on `[0, 1]`.
pub fn generate_fixed(spec: &FixedSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let n = spec.n_states;
    let mut transitions = vec![0.0; n * spec.n_actions * n];
    let mut rewards = vec![0.0; n * spec.n_actions];
    for s in 0..n {
        for a in 0..spec.n_actions {
            let mut rng = stream(spec.seed, &[TAG_FIXED, s as u64, a as u64]);
            let support = rand::seq::index::sample(&mut rng, n, spec.branching).into_vec();
            let weights = loop {
                let w: Vec<f64> = (0..spec.branching).map(|_| rng.random::<f64>()).collect();
                if w.iter().sum::<f64>() > 0.0 {
                    break w;
                }
            };
            let total: f64 = weights.iter().sum();
            let row = &mut transitions[(s * spec.n_actions + a) * n..][..n];
            for (&t, w) in support.iter().zip(&weights) {
                row[t] = w / total;
            }
            rewards[s * spec.n_actions + a] = rng.random::<f64>();
        }
    }
    TabularMdp::from_flat(n, spec.n_actions, transitions, rewards, 1.0)
}

/// A model estimated from `n_per_pair` generative-model draws per `(s, a)`.
/// Rewards are copied from the true model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    pub model: TabularMdp,
    /// Flat `(state, action, next_state)` visit counts.
    pub counts: Vec<u64>,
    pub n_per_pair: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalModelDocument {
    pub model: MdpDocument,
    pub counts: Vec<Vec<Vec<u64>>>,
    pub n_per_pair: u64,
    pub seed: u64,
}

impl EmpiricalModel {
    pub fn count(&self, s: usize, a: usize, t: usize) -> u64 {
        let n = self.model.n_states();
        self.counts[(s * self.model.n_actions() + a) * n + t]
    }

    pub fn to_document(&self) -> EmpiricalModelDocument {
        let n = self.model.n_states();
        let m = self.model.n_actions();
        let counts = (0..n)
            .map(|s| {
                (0..m)
                    .map(|a| (0..n).map(|t| self.count(s, a, t)).collect())
                    .collect()
            })
            .collect();
        EmpiricalModelDocument {
            model: self.model.to_document(),
            counts,
            n_per_pair: self.n_per_pair,
            seed: self.seed,
        }
    }
}

pub fn sample_empirical_model(
    mdp: &TabularMdp,
    n_per_pair: u64,
    seed: u64,
) -> Result<EmpiricalModel> {
    if n_per_pair == 0 {
        return Err(Error::invalid("n_per_pair", "must be at least 1"));
    }
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let mut counts = vec![0u64; n * m * n];
    let mut transitions = vec![0.0; n * m * n];
    for s in 0..n {
        for a in 0..m {
            let row = mdp.transition_row(s, a);
            let offset = (s * m + a) * n;
            let support: Vec<usize> = (0..n).filter(|&t| row[t] > 0.0).collect();
            if support.len() == 1 {
                counts[offset + support[0]] = n_per_pair;
            } else {
                let mut rng = stream(seed, &[TAG_SAMPLE, s as u64, a as u64]);
                let dist = WeightedIndex::new(row).expect("validated transition row");
                for _ in 0..n_per_pair {
                    counts[offset + dist.sample(&mut rng)] += 1;
                }
            }
            for t in 0..n {
                transitions[offset + t] = counts[offset + t] as f64 / n_per_pair as f64;
            }
        }
    }
    let model = TabularMdp::from_flat(n, m, transitions, mdp.rewards_flat().to_vec(), mdp.r_max())?;
    Ok(EmpiricalModel {
        model,
        counts,
        n_per_pair,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_branching() {
        let mdp = generate_fixed(&FixedSpec::new(10, 3, 42)).unwrap();
        for s in 0..10 {
            for a in 0..2 {
                let nz = mdp
                    .transition_row(s, a)
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .count();
                assert_eq!(nz, 3);
            }
        }
    }

    #[test]
    fn full_support_when_branching_is_n() {
        let mdp = generate_fixed(&FixedSpec::new(6, 6, 1)).unwrap();
        for s in 0..6 {
            for a in 0..2 {
                assert!(mdp.transition_row(s, a).iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_fixed(&FixedSpec::new(10, 3, 9)).unwrap();
        let b = generate_fixed(&FixedSpec::new(10, 3, 9)).unwrap();
        let c = generate_fixed(&FixedSpec::new(10, 3, 10)).unwrap();
        assert_eq!(a.transitions_flat(), b.transitions_flat());
        assert_eq!(a.rewards_flat(), b.rewards_flat());
        assert_ne!(a.transitions_flat(), c.transitions_flat());
    }

    #[test]
    fn spec_validation() {
        assert!(generate_fixed(&FixedSpec::new(3, 4, 0)).is_err());
        assert!(generate_fixed(&FixedSpec::new(3, 0, 0)).is_err());
        assert!(generate_fixed(&FixedSpec::new(0, 0, 0)).is_err());
    }

    #[test]
    fn sampling_rejects_zero() {
        let mdp = generate_fixed(&FixedSpec::new(4, 2, 0)).unwrap();
        assert!(sample_empirical_model(&mdp, 0, 0).is_err());
    }

    #[test]
    fn single_support_row_is_exact() {
        let mdp = generate_fixed(&FixedSpec::new(5, 1, 3)).unwrap();
        let hat = sample_empirical_model(&mdp, 7, 11).unwrap();
        assert_eq!(hat.model.transitions_flat(), mdp.transitions_flat());
    }

    #[test]
    fn counts_are_consistent() {
        let mdp = generate_fixed(&FixedSpec::new(8, 3, 5)).unwrap();
        let hat = sample_empirical_model(&mdp, 13, 1).unwrap();
        let again = sample_empirical_model(&mdp, 13, 1).unwrap();
        assert_eq!(hat.counts, again.counts);
        for s in 0..8 {
            for a in 0..2 {
                let total: u64 = (0..8).map(|t| hat.count(s, a, t)).sum();
                assert_eq!(total, 13);
                for t in 0..8 {
                    if mdp.transition_row(s, a)[t] == 0.0 {
                        assert_eq!(hat.count(s, a, t), 0);
                    }
                }
            }
        }
        assert_eq!(hat.model.rewards_flat(), mdp.rewards_flat());
    }

    #[test]
    fn derived_seeds_differ_by_coordinate() {
        let a = derive_seed(1, &[2, 3]);
        assert_ne!(a, derive_seed(1, &[3, 2]));
        assert_ne!(a, derive_seed(2, &[2, 3]));
        assert_eq!(a, derive_seed(1, &[2, 3]));
    }
}
