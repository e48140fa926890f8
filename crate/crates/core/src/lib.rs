//! A laboratory for shallow planning in finite MDPs.
//!
//! * [`mdp`] and [`solve`]: tabular models, exact evaluation, canonical policy
//!   iteration and grid detection of the Blackwell discount factor.
//! * [`metrics`]: value-function variation, action variation and its
//!   horizon-sensitive and empirical restrictions.
//! * [`bounds`]: bias, variance and planning-loss bounds next to the measured
//!   quantities they dominate.
//! * [`modelgen`]: seeded `Fixed(|S|, d)` instances and empirical models.
//! * [`abstraction`]: observation-map abstractions and their parameters.
//! * [`campaign`]: seeded, parallel experiment campaigns writing CSV/JSON.

pub mod abstraction;
pub mod bounds;
pub mod campaign;
pub mod error;
pub mod mdp;
pub mod metrics;
pub mod modelgen;
pub mod solve;

pub use abstraction::{AbstractionReport, BeliefMatrix, ObservationMap};
pub use bounds::{BoundReport, ConditionDenominator, NormalizedBias};
pub use error::{Error, Result};
pub use mdp::{DeterministicPolicy, DiscountGrid, TabularMdp, ValueVector};
pub use metrics::{DiscordantPairs, StructuralReport};
pub use modelgen::{EmpiricalModel, FixedSpec};
