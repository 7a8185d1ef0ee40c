//! Metropolis-Hastings sampling of dated trees and the death rate.
//!
//! The birth rate and the branching-process rate are integrated out
//! analytically, so the chain targets `p(g, mu | D)`. Proposals that break a
//! calibration constraint are rejected.

mod diagnostics;
mod init;
mod moves;
mod state;
mod trace;

pub use diagnostics::{
    autocorrelation, diagnostics, integrated_autocorrelation_time, DiagnosticsReport,
    SeriesDiagnostics, MIN_RELIABLE_SAMPLES,
};
pub use init::{initial_mu, initial_tree};
pub use moves::{ridge_log_jacobian, ridge_map, MoveKind, MoveWeights};
pub use state::ChainState;
pub use trace::{ChainTrace, MoveStats, Sample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ObservationModel, TraitMatrix};
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodEngine;
use crate::par::{map_slice, Execution};
use crate::priors::PriorConfig;
use crate::tree::{admissible, CalibrationSet, DatedTree};
use state::Target;

/// Trait model settings used by the sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub obs: ObservationModel,
    /// Starting value of the death rate; chosen from the data when absent.
    pub mu: Option<f64>,
    /// Keep `mu` at its starting value. Disables the rate and ridge moves.
    pub fix_mu: bool,
    /// Ignore the data and sample from the prior.
    pub prior_only: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            obs: ObservationModel::NoAbsent,
            mu: None,
            fix_mu: false,
            prior_only: false,
        }
    }
}

/// Run length, burn-in and thinning, all in iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
}

impl Schedule {
    /// Ten percent burn-in and thinning that records about ten thousand states.
    pub fn with_iterations(iterations: u64) -> Self {
        let burn_in = iterations / 10;
        Schedule {
            iterations,
            burn_in,
            thin: ((iterations - burn_in) / 10_000).max(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "bad schedule: {} iterations, burn-in {}, thinning {}",
                self.iterations, self.burn_in, self.thin
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub model: ModelConfig,
    pub prior: PriorConfig,
    pub weights: MoveWeights,
    pub schedule: Schedule,
    /// Starting tree; built from the data and constraints when absent.
    pub initial_tree: Option<DatedTree>,
    /// How pattern factors are evaluated within each step.
    pub execution: Execution,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            model: ModelConfig::default(),
            prior: PriorConfig::default(),
            weights: MoveWeights::default(),
            schedule: Schedule::with_iterations(100_000),
            initial_tree: None,
            execution: Execution::default(),
        }
    }
}

/// Runs one chain. Deterministic given `seed`.
pub fn run_chain(
    data: &TraitMatrix,
    cal: &CalibrationSet,
    config: &ChainConfig,
    seed: u64,
) -> Result<ChainTrace> {
    config.prior.validate()?;
    config.schedule.validate()?;
    let model = &config.model;
    if !model.prior_only {
        if data.is_empty() {
            return Err(Error::Domain(
                "no traits to condition on; use prior-only sampling for empty data".into(),
            ));
        }
        data.check_observation_model(model.obs)?;
    }
    if model.fix_mu && model.mu.is_none() {
        return Err(Error::Config("a fixed death rate needs a value".into()));
    }
    let taxa = data.taxa();
    let resolved = cal.resolve(taxa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let tree = match &config.initial_tree {
        Some(t) => {
            let t = t.with_leaf_order(taxa)?;
            let adm = admissible(&t, &resolved);
            if !adm.admissible {
                return Err(Error::Config(format!(
                    "starting tree violates constraints: {:?}",
                    adm.violations
                )));
            }
            t
        }
        None => initial_tree(data, &resolved, &config.prior, &mut rng)?,
    };
    let mu = match model.mu {
        Some(mu) => mu,
        None => initial_mu(data, &tree, &config.prior),
    };

    let engine = if model.prior_only {
        None
    } else {
        Some(LikelihoodEngine::new(data, model.obs)?.with_execution(config.execution))
    };
    let target = Target {
        engine,
        cal: &resolved,
        prior: config.prior,
    };
    let mut state = ChainState::new(tree, mu, &target)?;
    let moves = moves::MoveSet::new(&config.weights, &state.tree, &resolved, model.fix_mu)?;

    let schedule = config.schedule;
    let mut trace = ChainTrace::new(seed, config.weights);
    for iter in 1..=schedule.iterations {
        let kind = moves.pick(&mut rng);
        let accepted = state.step(kind, &target, &mut rng);
        trace.count(kind, accepted);
        if iter > schedule.burn_in && (iter - schedule.burn_in).is_multiple_of(schedule.thin) {
            if cfg!(debug_assertions) {
                state.check_cache(&target);
            }
            trace.record(iter, &state);
        }
    }
    Ok(trace)
}

/// Runs independent chains, one per seed, in parallel when enabled.
pub fn run_chains(
    data: &TraitMatrix,
    cal: &CalibrationSet,
    config: &ChainConfig,
    seeds: &[u64],
    exec: Execution,
) -> Vec<Result<ChainTrace>> {
    map_slice(exec, seeds, |&seed| run_chain(data, cal, config, seed))
}
