use serde::Serialize;

use super::fig2::campaign_map;
use super::output::Record;
use super::CampaignConfig;
use crate::abstraction::{abstract_mdp, theorem2_check_with, ObservationMap};
use crate::error::{Error, Result};
use crate::mdp::{DiscountGrid, TabularMdp};
use crate::modelgen::generate_fixed;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig3Row {
    pub trial: usize,
    pub mdp_seed: u64,
    pub n_observations: usize,
    pub gamma: f64,
    pub kappa_s: f64,
    pub delta_s: f64,
    pub kappa_phi: f64,
    pub kappa_phi_abstract: f64,
    pub delta_phi: f64,
    pub delta_eps_phi: f64,
    pub belief_l1_max: f64,
    pub kappa_ratio: Option<f64>,
    pub delta_ratio: Option<f64>,
    pub thm2_delta_ok: bool,
    pub thm2_kappa_ok: bool,
}

impl Record for Fig3Row {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "mdp_seed",
        "n_observations",
        "gamma",
        "kappa_s",
        "delta_s",
        "kappa_phi",
        "kappa_phi_abstract",
        "delta_phi",
        "delta_eps_phi",
        "belief_l1_max",
        "kappa_ratio",
        "delta_ratio",
        "thm2_delta_ok",
        "thm2_kappa_ok",
    ];
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fig3Output {
    pub rows: Vec<Fig3Row>,
}

/// Abstract versus underlying parameters of one map at every grid discount.
/// Fails if either inequality of the abstraction theorem is violated.
pub fn fig3_trial(
    mdp: &TabularMdp,
    map: &ObservationMap,
    grid: &DiscountGrid,
    trial: usize,
    mdp_seed: u64,
) -> Result<Vec<Fig3Row>> {
    let abstract_model = abstract_mdp(mdp, map)?;
    grid.values()
        .iter()
        .map(|&gamma| {
            let r = theorem2_check_with(mdp, map, &abstract_model, gamma);
            if !(r.thm2_delta_ok && r.thm2_kappa_ok) {
                let which = if r.thm2_delta_ok { "kappa" } else { "delta" };
                return Err(Error::Invariant {
                    what: format!(
                        "abstract {which} exceeds its bound with {} observations at gamma {gamma}",
                        map.n_observations()
                    ),
                    trial,
                    seed: mdp_seed,
                });
            }
            Ok(Fig3Row {
                trial,
                mdp_seed,
                n_observations: map.n_observations(),
                gamma,
                kappa_s: r.kappa_s,
                delta_s: r.delta_s,
                kappa_phi: r.kappa_phi,
                kappa_phi_abstract: r.kappa_phi_abstract,
                delta_phi: r.delta_phi,
                delta_eps_phi: r.delta_eps_phi,
                belief_l1_max: r.belief_l1_max,
                kappa_ratio: r.kappa_ratio(),
                delta_ratio: r.delta_ratio(),
                thm2_delta_ok: r.thm2_delta_ok,
                thm2_kappa_ok: r.thm2_kappa_ok,
            })
        })
        .collect()
}

pub fn run_fig3(config: &CampaignConfig) -> Result<Fig3Output> {
    config.validate()?;
    let grid = &config.gamma_grid;
    let trials = config.run_trials(|trial| {
        let spec = config.instance_spec(trial);
        let mdp = generate_fixed(&spec)?;
        let mut rows = Vec::with_capacity(config.observation_sizes.len() * grid.len());
        for &k in &config.observation_sizes {
            let map = campaign_map(spec.n_states, k, spec.seed)?;
            rows.extend(fig3_trial(&mdp, &map, grid, trial, spec.seed)?);
        }
        Ok(rows)
    })?;
    Ok(Fig3Output {
        rows: trials.into_iter().flatten().collect(),
    })
}
