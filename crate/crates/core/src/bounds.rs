//! Bias, variance and planning-loss bounds for shallow planning on an
//! approximate model, together with the measured quantities they dominate.
//!
//! Measured quantities are sup-norm gaps between value vectors evaluated in the
//! true model at `gamma_bw`:
//!
//! * bias: `pi*_{M,gamma_bw}` vs `pi*_{M,gamma}`
//! * variance: `pi*_{M,gamma}` vs `pi*_{M-hat,gamma}`
//! * planning loss: `pi*_{M,gamma_bw}` vs `pi*_{M-hat,gamma}`
//!
//! The triangle inequality gives `loss <= bias + variance`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_discount, Error, Result};
use crate::mdp::TabularMdp;
use crate::metrics::{PlanningPolicies, StructuralReport};
use crate::solve::{evaluate, solve};

/// Absolute slack used when checking a measured quantity against its bound.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

/// Which denominator the tightness condition uses for its `delta-hat` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionDenominator {
    /// `1 - gamma_bw (1 - delta_hat)`, as printed alongside the condition.
    #[default]
    Paper,
    /// `1 - gamma_bw (1 - delta_hat / 2)`, matching the variance bound, which
    /// makes the condition exactly equivalent to the bound comparison.
    Consistent,
}

impl fmt::Display for ConditionDenominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionDenominator::Paper => "paper",
            ConditionDenominator::Consistent => "consistent",
        })
    }
}

impl FromStr for ConditionDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ConditionDenominator::Paper),
            "consistent" => Ok(ConditionDenominator::Consistent),
            other => Err(Error::invalid(
                "condition_denominator",
                format!("expected `paper` or `consistent`, got `{other}`"),
            )),
        }
    }
}

fn check_pair(gamma: f64, gamma_bw: f64) -> Result<()> {
    check_discount("gamma_bw", gamma_bw)?;
    check_discount("gamma", gamma)?;
    if gamma > gamma_bw {
        return Err(Error::Discount {
            name: "gamma",
            value: gamma,
            range: "[0, gamma_bw]",
        });
    }
    Ok(())
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("{value} must be finite and non-negative"),
        ))
    }
}

fn check_delta(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=2.0 + 1e-12).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} outside [0, 2]")))
    }
}

/// `(delta/2) / (1 - gamma_bw (1 - delta/2))`.
fn mixing_factor(delta: f64, gamma_bw: f64) -> f64 {
    let half = delta / 2.0;
    half / (1.0 - gamma_bw * (1.0 - half))
}

/// `(delta/2 kappa (gamma_bw - gamma)) / ((1 - gamma_bw)(1 - gamma_bw (1 - delta/2)))`.
fn structural_term(kappa: f64, delta: f64, gamma: f64, gamma_bw: f64) -> f64 {
    kappa * (gamma_bw - gamma) / (1.0 - gamma_bw) * mixing_factor(delta, gamma_bw)
}

/// Bias bound in terms of the unrestricted action variation `delta_M`.
pub fn bias_bound_prior(kappa: f64, delta: f64, gamma: f64, gamma_bw: f64) -> Result<f64> {
    check_pair(gamma, gamma_bw)?;
    check_nonnegative("kappa", kappa)?;
    check_delta("delta", delta)?;
    Ok(structural_term(kappa, delta, gamma, gamma_bw))
}

/// Bias bound in terms of the horizon-sensitive action variation.
pub fn bias_bound_ext(kappa: f64, delta_gamma: f64, gamma: f64, gamma_bw: f64) -> Result<f64> {
    check_pair(gamma, gamma_bw)?;
    check_nonnegative("kappa", kappa)?;
    check_delta("delta_gamma", delta_gamma)?;
    Ok(structural_term(kappa, delta_gamma, gamma, gamma_bw))
}

pub fn variance_bound(
    epsilon_hat: f64,
    kappa: f64,
    delta_hat: f64,
    gamma: f64,
    gamma_bw: f64,
) -> Result<f64> {
    check_pair(gamma, gamma_bw)?;
    check_nonnegative("epsilon_hat", epsilon_hat)?;
    check_nonnegative("kappa", kappa)?;
    check_delta("delta_hat", delta_hat)?;
    Ok(epsilon_hat * (1.0 - gamma) / (1.0 - gamma_bw)
        + structural_term(kappa, delta_hat, gamma, gamma_bw))
}

pub fn planning_loss_bound(
    kappa: f64,
    delta_gamma: f64,
    delta_hat: f64,
    epsilon_hat: f64,
    gamma: f64,
    gamma_bw: f64,
) -> Result<f64> {
    check_pair(gamma, gamma_bw)?;
    check_nonnegative("kappa", kappa)?;
    check_nonnegative("epsilon_hat", epsilon_hat)?;
    check_delta("delta_gamma", delta_gamma)?;
    check_delta("delta_hat", delta_hat)?;
    Ok(kappa * (gamma_bw - gamma) / (1.0 - gamma_bw)
        * (mixing_factor(delta_gamma, gamma_bw) + mixing_factor(delta_hat, gamma_bw))
        + epsilon_hat * (1.0 - gamma) / (1.0 - gamma_bw))
}

/// Structure-free planning-loss bound the structural bound is compared with.
pub fn prior_planning_loss_bound(
    r_max: f64,
    epsilon_hat: f64,
    gamma: f64,
    gamma_bw: f64,
) -> Result<f64> {
    check_pair(gamma, gamma_bw)?;
    check_nonnegative("epsilon_hat", epsilon_hat)?;
    check_nonnegative("r_max", r_max)?;
    Ok((gamma_bw - gamma) / ((1.0 - gamma_bw) * (1.0 - gamma)) * r_max + epsilon_hat)
}

/// Tightness condition: true iff `epsilon_hat` is at most
/// `r_max/(1-gamma) - kappa (delta_gamma/2 / (1 - gamma_bw(1 - delta_gamma/2)) + delta_hat/2 / D)`
/// where `D` depends on `denominator`.
#[allow(clippy::too_many_arguments)]
pub fn condition_holds(
    r_max: f64,
    kappa: f64,
    delta_gamma: f64,
    delta_hat: f64,
    epsilon_hat: f64,
    gamma: f64,
    gamma_bw: f64,
    denominator: ConditionDenominator,
) -> bool {
    condition_margin(
        r_max,
        kappa,
        delta_gamma,
        delta_hat,
        epsilon_hat,
        gamma,
        gamma_bw,
        denominator,
    ) >= 0.0
}

/// Right-hand side minus `epsilon_hat`; non-negative exactly when the condition
/// holds.
#[allow(clippy::too_many_arguments)]
pub fn condition_margin(
    r_max: f64,
    kappa: f64,
    delta_gamma: f64,
    delta_hat: f64,
    epsilon_hat: f64,
    gamma: f64,
    gamma_bw: f64,
    denominator: ConditionDenominator,
) -> f64 {
    let hat_denominator = match denominator {
        ConditionDenominator::Paper => 1.0 - gamma_bw * (1.0 - delta_hat),
        ConditionDenominator::Consistent => 1.0 - gamma_bw * (1.0 - delta_hat / 2.0),
    };
    let rhs = r_max / (1.0 - gamma)
        - kappa * (mixing_factor(delta_gamma, gamma_bw) + (delta_hat / 2.0) / hat_denominator);
    rhs - epsilon_hat
}

/// `||V^{pi*_{M,gamma_bw}}_{M,gamma_bw} - V^{pi*_{M,gamma}}_{M,gamma_bw}||_inf`.
///
/// Defined for any pair of discounts; it is zero whenever the two canonical
/// policies coincide.
pub fn measured_bias(mdp: &TabularMdp, gamma: f64, gamma_bw: f64) -> Result<f64> {
    check_discount("gamma", gamma)?;
    check_discount("gamma_bw", gamma_bw)?;
    let (deep, deep_value) = solve(mdp, gamma_bw);
    let shallow = solve(mdp, gamma).0;
    if shallow == deep {
        return Ok(0.0);
    }
    Ok(deep_value.sup_distance(&evaluate(mdp, &shallow, gamma_bw)))
}

/// `||V^{pi*_{M,gamma}}_{M,gamma_bw} - V^{pi*_{M-hat,gamma}}_{M,gamma_bw}||_inf`.
pub fn measured_variance(
    mdp: &TabularMdp,
    mdp_hat: &TabularMdp,
    gamma: f64,
    gamma_bw: f64,
) -> Result<f64> {
    check_discount("gamma", gamma)?;
    check_discount("gamma_bw", gamma_bw)?;
    mdp.check_same_shape(mdp_hat)?;
    let truth = solve(mdp, gamma).0;
    let planned = solve(mdp_hat, gamma).0;
    if truth == planned {
        return Ok(0.0);
    }
    Ok(evaluate(mdp, &truth, gamma_bw).sup_distance(&evaluate(mdp, &planned, gamma_bw)))
}

/// Largest relative value loss at `gamma_bw` from acting `gamma`-optimally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBias {
    pub value: f64,
    /// Every state had a (near-)zero optimal value; `value` is then 0.
    pub all_skipped: bool,
}

/// Optimal values at or below this are excluded from the normalized bias.
pub const NORMALIZED_BIAS_FLOOR: f64 = 1e-12;

pub fn normalized_bias(mdp: &TabularMdp, gamma: f64, gamma_bw: f64) -> Result<NormalizedBias> {
    check_pair(gamma, gamma_bw)?;
    let (deep, deep_value) = solve(mdp, gamma_bw);
    let shallow = solve(mdp, gamma).0;
    let shallow_value = if shallow == deep {
        deep_value.clone()
    } else {
        evaluate(mdp, &shallow, gamma_bw)
    };
    Ok(normalized_gap(&deep_value, &shallow_value))
}

pub(crate) fn normalized_gap(optimal: &[f64], other: &[f64]) -> NormalizedBias {
    let mut value = 0.0f64;
    let mut any = false;
    for (&best, &v) in optimal.iter().zip(other) {
        if best > NORMALIZED_BIAS_FLOOR {
            any = true;
            value = value.max((best - v) / best);
        }
    }
    NormalizedBias {
        value,
        all_skipped: !any,
    }
}

/// Measured bias, variance and planning loss next to every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub gamma_bw: f64,
    pub measured_bias: f64,
    pub bias_bound_prior: f64,
    pub bias_bound_ext: f64,
    pub measured_variance: f64,
    pub variance_bound: f64,
    pub measured_planning_loss: f64,
    pub planning_loss_bound: f64,
    pub prior_planning_loss_bound: f64,
    pub condition_holds: bool,
}

impl BoundReport {
    /// First link of the domination chain that fails, if any.
    pub fn domination_violation(&self, tol: f64) -> Option<&'static str> {
        if self.measured_bias > self.bias_bound_ext + tol {
            return Some("measured bias exceeds the horizon-sensitive bias bound");
        }
        if self.bias_bound_ext > self.bias_bound_prior + tol {
            return Some("horizon-sensitive bias bound exceeds the prior bias bound");
        }
        if self.measured_variance > self.variance_bound + tol {
            return Some("measured variance exceeds the variance bound");
        }
        if self.measured_planning_loss > self.measured_bias + self.measured_variance + tol {
            return Some("planning loss exceeds bias plus variance");
        }
        if self.measured_planning_loss > self.planning_loss_bound + tol {
            return Some("planning loss exceeds the planning-loss bound");
        }
        None
    }
}

pub fn bound_report(
    mdp: &TabularMdp,
    mdp_hat: &TabularMdp,
    gamma: f64,
    gamma_bw: f64,
    denominator: ConditionDenominator,
) -> Result<BoundReport> {
    check_pair(gamma, gamma_bw)?;
    let policies = PlanningPolicies::solve(mdp, mdp_hat, gamma, gamma_bw)?;
    let params = crate::metrics::structural_report_from(mdp, gamma, gamma_bw, &policies);
    bound_report_from(mdp, &params, &policies, denominator)
}

/// Assemble a report from already-computed parameters and policies.
pub fn bound_report_from(
    mdp: &TabularMdp,
    params: &StructuralReport,
    policies: &PlanningPolicies,
    denominator: ConditionDenominator,
) -> Result<BoundReport> {
    let StructuralReport {
        kappa,
        delta,
        delta_gamma,
        delta_hat,
        epsilon_hat,
        gamma_bw,
        gamma,
    } = *params;
    check_pair(gamma, gamma_bw)?;
    let deep_value = evaluate(mdp, &policies.deep, gamma_bw);
    let shallow_value = if policies.shallow == policies.deep {
        deep_value.clone()
    } else {
        evaluate(mdp, &policies.shallow, gamma_bw)
    };
    let planned_value = if policies.planned == policies.shallow {
        shallow_value.clone()
    } else {
        evaluate(mdp, &policies.planned, gamma_bw)
    };
    let r_max = mdp.r_max();
    Ok(BoundReport {
        gamma,
        gamma_bw,
        measured_bias: deep_value.sup_distance(&shallow_value),
        bias_bound_prior: bias_bound_prior(kappa, delta, gamma, gamma_bw)?,
        bias_bound_ext: bias_bound_ext(kappa, delta_gamma, gamma, gamma_bw)?,
        measured_variance: shallow_value.sup_distance(&planned_value),
        variance_bound: variance_bound(epsilon_hat, kappa, delta_hat, gamma, gamma_bw)?,
        measured_planning_loss: deep_value.sup_distance(&planned_value),
        planning_loss_bound: planning_loss_bound(
            kappa,
            delta_gamma,
            delta_hat,
            epsilon_hat,
            gamma,
            gamma_bw,
        )?,
        prior_planning_loss_bound: prior_planning_loss_bound(r_max, epsilon_hat, gamma, gamma_bw)?,
        condition_holds: condition_holds(
            r_max,
            kappa,
            delta_gamma,
            delta_hat,
            epsilon_hat,
            gamma,
            gamma_bw,
            denominator,
        ),
    })
}
