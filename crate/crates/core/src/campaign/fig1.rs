use serde::Serialize;

use super::output::Record;
use super::{hat_seed, CampaignConfig};
use crate::bounds::{
    bound_report_from, condition_margin, ConditionDenominator, DOMINATION_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::mdp::{DiscountGrid, TabularMdp};
use crate::metrics::{structural_report_from, PlanningPolicies};
use crate::modelgen::{generate_fixed, sample_empirical_model};
use crate::solve::optimal_policy_path;

/// Share of trials satisfying the tightness condition at one discount.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig1Row {
    pub gamma: f64,
    pub proportion_true: f64,
    pub n: usize,
}

impl Record for Fig1Row {
    const HEADER: &'static [&'static str] = &["gamma", "proportion_true", "n"];
}

/// One `(trial, gamma)` evaluation. Bound columns are empty when
/// `gamma > gamma_bw`, where the bounds do not apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Fig1Detail {
    pub trial: usize,
    pub mdp_seed: u64,
    pub gamma: f64,
    pub gamma_bw: f64,
    pub kappa: f64,
    pub delta: f64,
    pub delta_gamma: f64,
    pub delta_hat: f64,
    pub epsilon_hat: f64,
    pub condition_margin: f64,
    pub condition_holds: bool,
    pub measured_bias: Option<f64>,
    pub bias_bound_prior: Option<f64>,
    pub bias_bound_ext: Option<f64>,
    pub measured_variance: Option<f64>,
    pub variance_bound: Option<f64>,
    pub measured_planning_loss: Option<f64>,
    pub planning_loss_bound: Option<f64>,
    pub prior_planning_loss_bound: Option<f64>,
}

impl Record for Fig1Detail {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "mdp_seed",
        "gamma",
        "gamma_bw",
        "kappa",
        "delta",
        "delta_gamma",
        "delta_hat",
        "epsilon_hat",
        "condition_margin",
        "condition_holds",
        "measured_bias",
        "bias_bound_prior",
        "bias_bound_ext",
        "measured_variance",
        "variance_bound",
        "measured_planning_loss",
        "planning_loss_bound",
        "prior_planning_loss_bound",
    ];
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fig1Output {
    pub rows: Vec<Fig1Row>,
    pub detail: Vec<Fig1Detail>,
}

/// Evaluate the condition for one `(M, M-hat)` pair at every grid discount,
/// checking the domination chain wherever the bounds apply.
pub fn fig1_trial(
    mdp: &TabularMdp,
    mdp_hat: &TabularMdp,
    grid: &DiscountGrid,
    denominator: ConditionDenominator,
    trial: usize,
    mdp_seed: u64,
) -> Result<Vec<Fig1Detail>> {
    mdp.check_same_shape(mdp_hat)?;
    let truth = optimal_policy_path(mdp, grid);
    let planned = optimal_policy_path(mdp_hat, grid);
    let bw = truth.blackwell_index();
    let gamma_bw = truth.gammas()[bw];
    let deep = &truth.policies()[bw];
    let mut out = Vec::with_capacity(grid.len());
    for (i, &gamma) in grid.values().iter().enumerate() {
        let policies = PlanningPolicies {
            shallow: truth.policies()[i].clone(),
            shallow_value: truth.values()[i].clone(),
            deep: deep.clone(),
            planned: planned.policies()[i].clone(),
        };
        let p = structural_report_from(mdp, gamma, gamma_bw, &policies);
        let margin = condition_margin(
            mdp.r_max(),
            p.kappa,
            p.delta_gamma,
            p.delta_hat,
            p.epsilon_hat,
            gamma,
            gamma_bw,
            denominator,
        );
        let mut row = Fig1Detail {
            trial,
            mdp_seed,
            gamma,
            gamma_bw,
            kappa: p.kappa,
            delta: p.delta,
            delta_gamma: p.delta_gamma,
            delta_hat: p.delta_hat,
            epsilon_hat: p.epsilon_hat,
            condition_margin: margin,
            condition_holds: margin >= 0.0,
            ..Fig1Detail::default()
        };
        if gamma <= gamma_bw {
            let b = bound_report_from(mdp, &p, &policies, denominator)?;
            if let Some(what) = b.domination_violation(DOMINATION_TOLERANCE) {
                return Err(Error::Invariant {
                    what: format!("{what} at gamma {gamma}"),
                    trial,
                    seed: mdp_seed,
                });
            }
            row.measured_bias = Some(b.measured_bias);
            row.bias_bound_prior = Some(b.bias_bound_prior);
            row.bias_bound_ext = Some(b.bias_bound_ext);
            row.measured_variance = Some(b.measured_variance);
            row.variance_bound = Some(b.variance_bound);
            row.measured_planning_loss = Some(b.measured_planning_loss);
            row.planning_loss_bound = Some(b.planning_loss_bound);
            row.prior_planning_loss_bound = Some(b.prior_planning_loss_bound);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn run_fig1(config: &CampaignConfig) -> Result<Fig1Output> {
    config.validate()?;
    let grid = &config.gamma_grid;
    let trials = config.run_trials(|trial| {
        let spec = config.instance_spec(trial);
        let mdp = generate_fixed(&spec)?;
        let hat = sample_empirical_model(&mdp, config.n_per_pair, hat_seed(spec.seed))?;
        fig1_trial(
            &mdp,
            &hat.model,
            grid,
            config.condition_denominator,
            trial,
            spec.seed,
        )
    })?;
    let n = trials.len();
    let rows = grid
        .values()
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let holds = trials.iter().filter(|t| t[i].condition_holds).count();
            Fig1Row {
                gamma,
                proportion_true: holds as f64 / n as f64,
                n,
            }
        })
        .collect();
    Ok(Fig1Output {
        rows,
        detail: trials.into_iter().flatten().collect(),
    })
}
