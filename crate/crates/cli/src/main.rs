//! Command-line front end: generate and inspect MDPs, and run seeded
//! campaigns.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use shallow_plan::abstraction::{abstract_mdp, theorem2_check};
use shallow_plan::bounds::bound_report;
use shallow_plan::campaign::{self, CampaignConfig, Experiment, OutputFormat, SingleReport};
use shallow_plan::metrics::structural_report;
use shallow_plan::modelgen::{generate_fixed, sample_empirical_model};
use shallow_plan::solve::{blackwell_gamma, optimal_policy};
use shallow_plan::{
    ConditionDenominator, DiscountGrid, Error, FixedSpec, ObservationMap, TabularMdp,
};

#[derive(Parser)]
#[command(
    name = "shallow-plan-lab",
    version,
    about = "Discount factors, structure and planning loss in finite MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Fixed(|S|, d) MDP.
    Gen {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate an empirical model from a generative model.
    Sample {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_per_pair: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal policy and values at one discount.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Blackwell discount factor on a grid.
    Blackwell {
        #[arg(long)]
        mdp: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural parameters against an empirical model.
    Params {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measured bias, variance and planning loss next to their bounds.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "paper")]
        condition_denominator: ConditionDenominator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Abstract an MDP through an observation map.
    Abstract {
        #[arg(long)]
        mdp: PathBuf,
        /// Observation map file; a random map is drawn when absent.
        #[arg(long)]
        omap: Option<PathBuf>,
        /// Observations of the random map.
        #[arg(long)]
        obs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment campaign.
    Run {
        experiment: Experiment,
        #[command(flatten)]
        campaign: CampaignArgs,
        /// MDP file for `single`.
        #[arg(long)]
        mdp: Option<PathBuf>,
        /// Observation map for `single`.
        #[arg(long)]
        omap: Option<PathBuf>,
        /// Discount for `single`.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// Print the header of an experiment's main table.
    Schema {
        #[arg(long)]
        experiment: Experiment,
    },
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 10)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    branching: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.99)]
    gamma_start: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma_step: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_end: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<DiscountGrid, Error> {
        DiscountGrid::new(self.gamma_start, self.gamma_step, self.gamma_end)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Approximate model; sampled from `--mdp` when absent.
    #[arg(long)]
    mdp_hat: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n_per_pair: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gamma: f64,
    #[command(flatten)]
    grid: GridArgs,
}

impl ModelArgs {
    fn load(&self) -> Result<(TabularMdp, TabularMdp, f64), Error> {
        let mdp = TabularMdp::load(&self.mdp)?;
        let hat = match &self.mdp_hat {
            Some(path) => TabularMdp::load(path)?,
            None => sample_empirical_model(&mdp, self.n_per_pair, self.seed)?.model,
        };
        let gamma_bw = blackwell_gamma(&mdp, &self.grid.grid()?);
        Ok((mdp, hat, gamma_bw))
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1000)]
    n_mdps: usize,
    #[arg(long, value_delimiter = ',', default_value = "10,8,6,4,2,1")]
    obs_sizes: Vec<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    n_per_pair: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; defaults to `results.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "paper")]
    condition_denominator: ConditionDenominator,
}

impl CampaignArgs {
    fn config(&self, experiment: Experiment) -> Result<CampaignConfig, Error> {
        let output_path = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("results.{}", self.format.extension())));
        Ok(CampaignConfig {
            experiment,
            n_mdps: self.n_mdps,
            spec: FixedSpec::new(self.spec.states, self.spec.branching, 0)
                .with_actions(self.spec.actions),
            observation_sizes: self.obs_sizes.clone(),
            gamma_grid: self.grid.grid()?,
            n_per_pair: self.n_per_pair,
            master_seed: self.seed,
            output_path,
            condition_denominator: self.condition_denominator,
            format: self.format,
            workers: self.workers,
        })
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            std::fs::write(path, text).map_err(|e| io_error(path, e))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen { spec, seed, out } => {
            let spec = FixedSpec::new(spec.states, spec.branching, seed).with_actions(spec.actions);
            emit(&generate_fixed(&spec)?.to_document(), out.as_deref())
        }
        Command::Sample {
            mdp,
            n_per_pair,
            seed,
            out,
        } => {
            let mdp = TabularMdp::load(&mdp)?;
            let hat = sample_empirical_model(&mdp, n_per_pair, seed)?;
            emit(&hat.to_document(), out.as_deref())
        }
        Command::Solve { mdp, gamma, out } => {
            let mdp = TabularMdp::load(&mdp)?;
            let (policy, values) = optimal_policy(&mdp, gamma)?;
            emit(
                &json!({ "gamma": gamma, "policy": policy, "values": values }),
                out.as_deref(),
            )
        }
        Command::Blackwell { mdp, grid, out } => {
            let mdp = TabularMdp::load(&mdp)?;
            let grid = grid.grid()?;
            let gamma_bw = blackwell_gamma(&mdp, &grid);
            emit(&json!({ "gamma_bw": gamma_bw }), out.as_deref())
        }
        Command::Params { model, out } => {
            let (mdp, hat, gamma_bw) = model.load()?;
            emit(
                &structural_report(&mdp, &hat, model.gamma, gamma_bw)?,
                out.as_deref(),
            )
        }
        Command::Bounds {
            model,
            condition_denominator,
            out,
        } => {
            let (mdp, hat, gamma_bw) = model.load()?;
            let report = bound_report(&mdp, &hat, model.gamma, gamma_bw, condition_denominator)?;
            emit(&report, out.as_deref())
        }
        Command::Abstract {
            mdp,
            omap,
            obs,
            seed,
            gamma,
            out,
        } => {
            let mdp = TabularMdp::load(&mdp)?;
            let map = match (omap, obs) {
                (Some(path), _) => ObservationMap::load(path)?,
                (None, Some(k)) => ObservationMap::random(mdp.n_states(), k, seed)?,
                (None, None) => {
                    return Err(Error::Invalid {
                        field: "omap".into(),
                        reason: "pass --omap or --obs".into(),
                    })
                }
            };
            let model = abstract_mdp(&mdp, &map)?;
            let report = theorem2_check(&mdp, &map, gamma)?;
            emit(
                &json!({ "map": map, "model": model.to_document(), "report": report }),
                out.as_deref(),
            )
        }
        Command::Run {
            experiment,
            campaign: args,
            mdp,
            omap,
            gamma,
        } => {
            let config = args.config(experiment)?;
            if experiment == Experiment::Single {
                let mdp = mdp.ok_or_else(|| Error::Invalid {
                    field: "mdp".into(),
                    reason: "`run single` needs --mdp".into(),
                })?;
                let report: SingleReport =
                    campaign::run_single(&config, &mdp, omap.as_deref(), gamma)?;
                return emit(&report, args.out.as_deref());
            }
            for path in campaign::execute(&config)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Schema { experiment } => {
            println!("{}", campaign::schema(experiment));
            Ok(())
        }
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        e if e.is_io() => 2,
        Error::Invariant { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
