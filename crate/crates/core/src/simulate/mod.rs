//! Forward simulation of trait data on a dated tree, under the fitted model
//! and under misspecified variants: borrowing between lineages, rate
//! heterogeneity across branches or meaning classes, and a no-empty-field
//! constraint per meaning class.

mod engine;
mod scenario;

pub use engine::LinkageGraph;
pub use scenario::{ConstraintCode, ProcessCode, ScenarioCode, EMPTY_FIELD_RATIO};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{ObservationModel, TraitMatrix};
use crate::error::{Error, Result};
use crate::tree::{DatedTree, NodeId};

/// Largest expected number of traits per lineage accepted by the simulator.
const MAX_TRAITS_PER_LINEAGE: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Borrowing {
    None,
    /// Every pair of contemporaneous lineages can exchange traits; each
    /// instance triggers a transfer at rate `rate * mu`.
    Global {
        rate: f64,
    },
    /// Only lineages whose common ancestor is less than `depth` years older
    /// than the current time are linked.
    Local {
        depth: f64,
        rate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateHeterogeneity {
    None,
    /// Death rate drawn independently on each edge, Gamma with mean `mu` and sd `r * mu`.
    PerBranch {
        r: f64,
    },
    /// Death rate drawn independently for each meaning class.
    PerMeaning {
        r: f64,
    },
}

/// Everything needed to simulate one data set.
#[derive(Clone, Debug)]
pub struct SimScenario {
    pub tree: DatedTree,
    /// Total birth rate per lineage per year, summed over meaning classes.
    pub lambda: f64,
    pub mu: f64,
    pub obs: ObservationModel,
    pub borrowing: Borrowing,
    pub rate_het: RateHeterogeneity,
    /// Number of meaning classes; births are spread evenly over them.
    pub classes: Option<usize>,
    /// Keep every meaning class nonempty on every lineage.
    pub empty_field: bool,
    pub seed: u64,
}

impl SimScenario {
    /// The plain model: no borrowing, homogeneous rates, one class.
    pub fn new(tree: DatedTree, lambda: f64, mu: f64, obs: ObservationModel, seed: u64) -> Self {
        SimScenario {
            tree,
            lambda,
            mu,
            obs,
            borrowing: Borrowing::None,
            rate_het: RateHeterogeneity::None,
            classes: None,
            empty_field: false,
            seed,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.lambda) || !pos(self.mu) {
            return Err(Error::Config(format!(
                "rates must be positive, got lambda {} and mu {}",
                self.lambda, self.mu
            )));
        }
        if self.lambda / self.mu > MAX_TRAITS_PER_LINEAGE {
            return Err(Error::Config(format!(
                "lambda/mu = {} is too large to simulate",
                self.lambda / self.mu
            )));
        }
        match self.borrowing {
            Borrowing::None => {}
            Borrowing::Global { rate } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::Config(format!("bad borrowing rate {rate}")));
                }
            }
            Borrowing::Local { depth, rate } => {
                if !(rate >= 0.0 && rate.is_finite()) || !pos(depth) {
                    return Err(Error::Config(format!(
                        "bad local borrowing (depth {depth}, rate {rate})"
                    )));
                }
            }
        }
        match self.rate_het {
            RateHeterogeneity::None => {}
            RateHeterogeneity::PerBranch { r } | RateHeterogeneity::PerMeaning { r } => {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::Config(format!("bad heterogeneity level {r}")));
                }
            }
        }
        if self.classes == Some(0) {
            return Err(Error::Config("need at least one meaning class".into()));
        }
        if self.empty_field && self.classes.is_none() {
            return Err(Error::Config(
                "the empty-field constraint needs meaning classes".into(),
            ));
        }
        if matches!(self.rate_het, RateHeterogeneity::PerMeaning { .. }) && self.classes.is_none() {
            return Err(Error::Config(
                "per-meaning rates need meaning classes".into(),
            ));
        }
        Ok(())
    }
}

/// Where a trait was born: on the edge above `node`, at `age`. Traits
/// present at the root were born on the edge above it.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthPoint {
    pub trait_id: String,
    pub node: NodeId,
    pub age: f64,
}

/// Simulated data with the ground truth behind it.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub data: TraitMatrix,
    /// Birth point of each recorded trait, in data order.
    pub births: Vec<BirthPoint>,
    /// Death rate of each meaning class.
    pub class_rates: Vec<f64>,
    /// Death-rate multiplier on the edge above each node (the root ancestor entry is unused).
    pub branch_multipliers: Vec<f64>,
}

/// Gamma draw with mean `mean` and standard deviation `r * mean`; exactly `mean` when `r = 0`.
pub fn gamma_mean_sd<R: rand::Rng>(mean: f64, r: f64, rng: &mut R) -> f64 {
    if r == 0.0 {
        return mean;
    }
    let shape = 1.0 / (r * r);
    Gamma::new(shape, mean * r * r)
        .expect("positive shape and scale")
        .sample(rng)
}

/// Simulates any scenario.
pub fn simulate(scenario: &SimScenario) -> Result<Simulation> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    engine::run(scenario, &mut rng)
}

/// The plain trait process.
pub fn simulate_traits(scenario: &SimScenario) -> Result<Simulation> {
    if scenario.borrowing != Borrowing::None
        || scenario.rate_het != RateHeterogeneity::None
        || scenario.empty_field
    {
        return Err(Error::Config(
            "plain simulation takes no borrowing, heterogeneity or constraint".into(),
        ));
    }
    simulate(scenario)
}

pub fn simulate_with_borrowing(scenario: &SimScenario) -> Result<Simulation> {
    if scenario.borrowing == Borrowing::None {
        return Err(Error::Config("no borrowing mode set".into()));
    }
    simulate(scenario)
}

pub fn simulate_rate_heterogeneity(scenario: &SimScenario) -> Result<Simulation> {
    if scenario.rate_het == RateHeterogeneity::None {
        return Err(Error::Config("no rate heterogeneity set".into()));
    }
    simulate(scenario)
}

pub fn simulate_empty_field(scenario: &SimScenario) -> Result<Simulation> {
    if !scenario.empty_field {
        return Err(Error::Config("empty-field constraint not set".into()));
    }
    simulate(scenario)
}
