//! Tree priors, leaf-age priors and the hyperprior on the death rate.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::tree::{min_attainable_ages, Calibrations, DatedTree};

pub const DEFAULT_MAX_ROOT_AGE: f64 = 16000.0;

/// Prior on dated trees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreePrior {
    /// Yule branching process with rate `theta`, which is integrated out against `1/theta`.
    Branching,
    /// Uniform over topologies, with node ages weighted so that the root age
    /// is roughly uniform on `[0, max_root_age]`.
    UniformRoot { max_root_age: f64 },
}

/// Prior on the death rate `mu` (per year).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RatePrior {
    /// Density proportional to `1/mu` on `[lower, upper]`.
    Reciprocal {
        lower: f64,
        upper: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
}

impl Default for RatePrior {
    fn default() -> Self {
        RatePrior::Reciprocal {
            lower: 1e-8,
            upper: 1e2,
        }
    }
}

impl RatePrior {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            RatePrior::Reciprocal { lower, upper } | RatePrior::Uniform { lower, upper } => {
                (lower, upper)
            }
        }
    }

    /// Unnormalized log density; `-inf` outside the support.
    pub fn log_density(&self, mu: f64) -> f64 {
        let (lower, upper) = self.bounds();
        if !(mu >= lower && mu <= upper) {
            return f64::NEG_INFINITY;
        }
        match self {
            RatePrior::Reciprocal { .. } => -mu.ln(),
            RatePrior::Uniform { .. } => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lower, upper) = self.bounds();
        let floor = match self {
            RatePrior::Reciprocal { .. } => lower > 0.0,
            RatePrior::Uniform { .. } => lower >= 0.0,
        };
        if floor && upper > lower && upper.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid death-rate prior bounds [{lower}, {upper}]"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorConfig {
    pub tree: TreePrior,
    pub mu: RatePrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::uniform_root(DEFAULT_MAX_ROOT_AGE)
    }
}

impl PriorConfig {
    pub fn uniform_root(max_root_age: f64) -> Self {
        PriorConfig {
            tree: TreePrior::UniformRoot { max_root_age },
            mu: RatePrior::default(),
        }
    }

    pub fn branching() -> Self {
        PriorConfig {
            tree: TreePrior::Branching,
            mu: RatePrior::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TreePrior::UniformRoot { max_root_age } = self.tree {
            if !(max_root_age > 0.0 && max_root_age.is_finite()) {
                return Err(Error::Config(format!(
                    "maximum root age must be positive, got {max_root_age}"
                )));
            }
        }
        self.mu.validate()
    }

    /// Upper limit on the root age, if the prior imposes one.
    pub fn max_root_age(&self) -> Option<f64> {
        match self.tree {
            TreePrior::UniformRoot { max_root_age } => Some(max_root_age),
            TreePrior::Branching => None,
        }
    }

    /// Log tree prior including the leaf-age prior; `-inf` outside the support.
    pub fn log_tree_prior(&self, tree: &DatedTree, cal: &Calibrations) -> f64 {
        let base = match self.tree {
            TreePrior::Branching => log_fg_marginal_theta(tree).unwrap_or(f64::NEG_INFINITY),
            TreePrior::UniformRoot { max_root_age } => log_fr(tree, cal, max_root_age),
        };
        base + log_leaf_age_prior(tree, cal)
    }

    pub fn log_prior(&self, tree: &DatedTree, mu: f64, cal: &Calibrations) -> f64 {
        let lp = self.mu.log_density(mu);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_tree_prior(tree, cal)
    }
}

/// Yule prior with the branching rate integrated out against `1/theta`:
/// `ln Gamma(L - 1) - (L - 1) ln |g|`.
pub fn log_fg_marginal_theta(tree: &DatedTree) -> Result<f64> {
    let g = tree.total_branch_length();
    if !(g > 0.0) {
        return Err(Error::Domain("total branch length is zero".into()));
    }
    let k = (tree.n_leaves() - 1) as f64;
    Ok(ln_gamma(k) - k * g.ln())
}

/// Uniform-root prior `-sum ln(t_R - s_i)` over the free internal nodes,
/// where `s_i` is the smallest age node `i` can take. `-inf` when the root
/// is at least `max_root_age` or not above every `s_i`.
pub fn log_fr(tree: &DatedTree, cal: &Calibrations, max_root_age: f64) -> f64 {
    let t_root = tree.root_age();
    if t_root >= max_root_age {
        return f64::NEG_INFINITY;
    }
    let mut lp = 0.0;
    for (_, s) in min_attainable_ages(tree, cal) {
        if t_root <= s {
            return f64::NEG_INFINITY;
        }
        lp -= (t_root - s).ln();
    }
    lp
}

/// Uniform prior on each free leaf age over its interval, unnormalized.
pub fn log_leaf_age_prior(tree: &DatedTree, cal: &Calibrations) -> f64 {
    let inside = cal
        .leaf_intervals
        .iter()
        .enumerate()
        .all(|(v, iv)| iv.is_none_or(|(lo, hi)| (lo..=hi).contains(&tree.age(v))));
    if inside {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}
