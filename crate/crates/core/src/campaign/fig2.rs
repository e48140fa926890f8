use serde::Serialize;

use super::output::Record;
use super::{map_seed, CampaignConfig};
use crate::abstraction::{abstract_mdp, ObservationMap};
use crate::bounds::normalized_gap;
use crate::error::Result;
use crate::mdp::{DiscountGrid, TabularMdp};
use crate::modelgen::generate_fixed;
use crate::solve::{evaluate, optimal_policy_path};

/// Normalized bias of one abstraction at one discount, measured in the
/// abstract MDP against its own Blackwell discount.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig2Row {
    pub trial: usize,
    pub mdp_seed: u64,
    pub n_observations: usize,
    pub gamma: f64,
    pub gamma_bw: f64,
    pub normalized_bias: f64,
    pub all_skipped: bool,
}

impl Record for Fig2Row {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "mdp_seed",
        "n_observations",
        "gamma",
        "gamma_bw",
        "normalized_bias",
        "all_skipped",
    ];
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig2Blackwell {
    pub trial: usize,
    pub mdp_seed: u64,
    pub n_observations: usize,
    pub gamma_bw: f64,
}

impl Record for Fig2Blackwell {
    const HEADER: &'static [&'static str] = &["trial", "mdp_seed", "n_observations", "gamma_bw"];
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig2MeanBias {
    pub n_observations: usize,
    pub gamma: f64,
    pub mean_normalized_bias: f64,
    pub n: usize,
}

impl Record for Fig2MeanBias {
    const HEADER: &'static [&'static str] =
        &["n_observations", "gamma", "mean_normalized_bias", "n"];
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fig2Output {
    pub rows: Vec<Fig2Row>,
    pub blackwell: Vec<Fig2Blackwell>,
    pub mean_bias: Vec<Fig2MeanBias>,
}

/// The map a campaign uses for `n_observations` observations of an
/// `n_states`-state instance; the identity when nothing is aliased.
pub(crate) fn campaign_map(
    n_states: usize,
    n_observations: usize,
    trial_seed: u64,
) -> Result<ObservationMap> {
    if n_observations == n_states {
        Ok(ObservationMap::identity(n_states))
    } else {
        ObservationMap::random(
            n_states,
            n_observations,
            map_seed(trial_seed, n_observations),
        )
    }
}

pub fn fig2_trial(
    mdp: &TabularMdp,
    map: &ObservationMap,
    grid: &DiscountGrid,
    trial: usize,
    mdp_seed: u64,
) -> Result<(Fig2Blackwell, Vec<Fig2Row>)> {
    let abstract_model = abstract_mdp(mdp, map)?;
    let path = optimal_policy_path(&abstract_model, grid);
    let bw = path.blackwell_index();
    let gamma_bw = path.gammas()[bw];
    let deep = &path.policies()[bw];
    let deep_value = &path.values()[bw];
    let k = map.n_observations();
    let rows = grid
        .values()
        .iter()
        .zip(path.policies())
        .map(|(&gamma, shallow)| {
            let bias = if shallow == deep {
                normalized_gap(deep_value, deep_value)
            } else {
                normalized_gap(deep_value, &evaluate(&abstract_model, shallow, gamma_bw))
            };
            Fig2Row {
                trial,
                mdp_seed,
                n_observations: k,
                gamma,
                gamma_bw,
                normalized_bias: bias.value,
                all_skipped: bias.all_skipped,
            }
        })
        .collect();
    let blackwell = Fig2Blackwell {
        trial,
        mdp_seed,
        n_observations: k,
        gamma_bw,
    };
    Ok((blackwell, rows))
}

pub fn run_fig2(config: &CampaignConfig) -> Result<Fig2Output> {
    config.validate()?;
    let grid = &config.gamma_grid;
    let trials = config.run_trials(|trial| {
        let spec = config.instance_spec(trial);
        let mdp = generate_fixed(&spec)?;
        config
            .observation_sizes
            .iter()
            .map(|&k| {
                let map = campaign_map(spec.n_states, k, spec.seed)?;
                fig2_trial(&mdp, &map, grid, trial, spec.seed)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let n_sizes = config.observation_sizes.len();
    let mut sums = vec![0.0; n_sizes * grid.len()];
    let mut out = Fig2Output::default();
    for per_size in trials {
        for (j, (blackwell, rows)) in per_size.into_iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                sums[j * grid.len() + i] += row.normalized_bias;
            }
            out.blackwell.push(blackwell);
            out.rows.extend(rows);
        }
    }
    let n = config.n_mdps;
    for (j, &k) in config.observation_sizes.iter().enumerate() {
        for (i, &gamma) in grid.values().iter().enumerate() {
            out.mean_bias.push(Fig2MeanBias {
                n_observations: k,
                gamma,
                mean_normalized_bias: sums[j * grid.len() + i] / n as f64,
                n,
            });
        }
    }
    Ok(out)
}
