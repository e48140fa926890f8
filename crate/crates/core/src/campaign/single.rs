use std::path::Path;

use serde::Serialize;

use super::{hat_seed, CampaignConfig};
use crate::abstraction::{theorem2_check, AbstractionReport, ObservationMap};
use crate::bounds::{bound_report_from, BoundReport, DOMINATION_TOLERANCE};
use crate::error::{check_discount, Error, Result};
use crate::mdp::TabularMdp;
use crate::metrics::{structural_report_from, PlanningPolicies, StructuralReport};
use crate::modelgen::sample_empirical_model;
use crate::solve::blackwell_gamma;

pub(crate) const REPORT_KEYS: &[&str] = &[
    "gamma",
    "gamma_bw",
    "n_per_pair",
    "seed",
    "structural",
    "bounds",
    "abstraction",
];

/// Every parameter, bound and abstraction quantity for one MDP. `bounds` is
/// null when `gamma > gamma_bw`; `abstraction` is null without a map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleReport {
    pub gamma: f64,
    pub gamma_bw: f64,
    pub n_per_pair: u64,
    pub seed: u64,
    pub structural: StructuralReport,
    pub bounds: Option<BoundReport>,
    pub abstraction: Option<AbstractionReport>,
}

impl SingleReport {
    /// The empirical model is sampled with `config.n_per_pair` draws from a
    /// seed derived from `config.master_seed`.
    pub fn compute(
        config: &CampaignConfig,
        mdp: &TabularMdp,
        map: Option<&ObservationMap>,
        gamma: f64,
    ) -> Result<Self> {
        check_discount("gamma", gamma)?;
        let gamma_bw = blackwell_gamma(mdp, &config.gamma_grid);
        let seed = hat_seed(config.master_seed);
        let hat = sample_empirical_model(mdp, config.n_per_pair, seed)?;
        let policies = PlanningPolicies::solve(mdp, &hat.model, gamma, gamma_bw)?;
        let structural = structural_report_from(mdp, gamma, gamma_bw, &policies);
        let bounds = if gamma <= gamma_bw {
            let b = bound_report_from(mdp, &structural, &policies, config.condition_denominator)?;
            if let Some(what) = b.domination_violation(DOMINATION_TOLERANCE) {
                return Err(Error::Invariant {
                    what: what.to_owned(),
                    trial: 0,
                    seed,
                });
            }
            Some(b)
        } else {
            None
        };
        let abstraction = map.map(|m| theorem2_check(mdp, m, gamma)).transpose()?;
        Ok(SingleReport {
            gamma,
            gamma_bw,
            n_per_pair: config.n_per_pair,
            seed: config.master_seed,
            structural,
            bounds,
            abstraction,
        })
    }
}

/// Load an MDP and an optional observation map and report on them.
pub fn run_single(
    config: &CampaignConfig,
    mdp_path: &Path,
    omap_path: Option<&Path>,
    gamma: f64,
) -> Result<SingleReport> {
    if config.n_per_pair == 0 {
        return Err(Error::invalid("n_per_pair", "must be at least 1"));
    }
    let mdp = TabularMdp::load(mdp_path)?;
    let map = omap_path.map(ObservationMap::load).transpose()?;
    SingleReport::compute(config, &mdp, map.as_ref(), gamma)
}
