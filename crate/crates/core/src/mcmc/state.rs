use rand::Rng;

use super::moves::{self, MoveKind, Undo};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodEngine, SurvivalTable};
use crate::priors::PriorConfig;
use crate::tree::{admissible, Calibrations, DatedTree, NodeId};

/// Everything the acceptance ratio needs besides the state.
pub(crate) struct Target<'a> {
    /// `None` when sampling from the prior.
    pub engine: Option<LikelihoodEngine>,
    pub cal: &'a Calibrations,
    pub prior: PriorConfig,
}

/// Which survival-table entries a proposal invalidated.
pub(crate) enum Dirty {
    Nodes(Vec<NodeId>),
    All,
}

impl Target<'_> {
    fn log_likelihood(&self, tree: &DatedTree, mu: f64, table: &SurvivalTable) -> f64 {
        match &self.engine {
            None => 0.0,
            Some(e) => e
                .evaluate_with_table(tree, mu, table)
                .log_marginal_lambda()
                .unwrap_or(f64::NEG_INFINITY),
        }
    }
}

/// Current tree and rate with cached densities.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub tree: DatedTree,
    pub mu: f64,
    table: SurvivalTable,
    spare: SurvivalTable,
    pub log_prior: f64,
    /// Log-likelihood with the birth rate integrated out; zero when sampling the prior.
    pub log_lkd: f64,
}

fn ages_ordered(tree: &DatedTree) -> bool {
    (0..tree.n_nodes() - 1)
        .filter(|&v| v != tree.root())
        .all(|v| tree.age(v) <= tree.age(tree.parent(v).expect("has parent")))
}

impl ChainState {
    pub(crate) fn new(tree: DatedTree, mu: f64, target: &Target) -> Result<Self> {
        let table = crate::likelihood::survival_recursion(&tree, mu)?;
        let log_prior = target.prior.log_prior(&tree, mu, target.cal);
        let log_lkd = target.log_likelihood(&tree, mu, &table);
        if !(log_prior + log_lkd).is_finite() {
            return Err(Error::Config(format!(
                "starting state has zero posterior density (log prior {log_prior}, log likelihood {log_lkd})"
            )));
        }
        Ok(ChainState {
            tree,
            mu,
            spare: table.clone(),
            table,
            log_prior,
            log_lkd,
        })
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_lkd
    }

    /// One Metropolis-Hastings update with a move of the given kind. Returns whether it was accepted.
    pub(crate) fn step<R: Rng>(&mut self, kind: MoveKind, target: &Target, rng: &mut R) -> bool {
        let Some(prop) = moves::propose(kind, self, target, rng) else {
            return false;
        };
        let accepted = self.consider(prop.dirty, prop.log_ratio, target, rng);
        if !accepted {
            self.undo(prop.undo);
        }
        accepted
    }

    fn consider<R: Rng>(
        &mut self,
        dirty: Dirty,
        log_ratio: f64,
        target: &Target,
        rng: &mut R,
    ) -> bool {
        if !ages_ordered(&self.tree) || !admissible(&self.tree, target.cal).admissible {
            return false;
        }
        let log_prior = target.prior.log_prior(&self.tree, self.mu, target.cal);
        if log_prior == f64::NEG_INFINITY {
            return false;
        }
        let log_lkd = if target.engine.is_some() {
            self.spare.clone_from(&self.table);
            match dirty {
                Dirty::Nodes(nodes) => self.spare.refresh(&self.tree, self.mu, &nodes),
                Dirty::All => self.spare.recompute(&self.tree, self.mu),
            }
            target.log_likelihood(&self.tree, self.mu, &self.spare)
        } else {
            0.0
        };
        let log_alpha = log_prior + log_lkd - self.log_posterior() + log_ratio;
        if log_alpha.is_nan() {
            return false;
        }
        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
            self.log_prior = log_prior;
            self.log_lkd = log_lkd;
            std::mem::swap(&mut self.table, &mut self.spare);
            true
        } else {
            false
        }
    }

    fn undo(&mut self, undo: Undo) {
        match undo {
            Undo::Age { node, age } => self.tree.set_age(node, age),
            Undo::Regraft {
                node,
                sibling,
                swap,
            } => {
                self.tree.prune_regraft(node, sibling);
                let p = self.tree.parent(node).expect("has parent");
                if swap != (self.tree.children(p).expect("internal")[0] != node) {
                    self.tree.swap_children(p);
                }
            }
            Undo::Scale { ages, mu } => {
                for (v, a) in ages {
                    self.tree.set_age(v, a);
                }
                self.mu = mu;
            }
            Undo::Rate { mu } => self.mu = mu,
        }
    }

    /// Panics if the cached densities differ from a fresh evaluation.
    pub(crate) fn check_cache(&self, target: &Target) {
        let fresh =
            crate::likelihood::survival_recursion(&self.tree, self.mu).expect("rate stays valid");
        let lp = target.prior.log_prior(&self.tree, self.mu, target.cal);
        let ll = target.log_likelihood(&self.tree, self.mu, &fresh);
        let tol = |x: f64| 1e-8 * x.abs().max(1.0);
        assert!(
            (lp - self.log_prior).abs() <= tol(lp) && (ll - self.log_lkd).abs() <= tol(ll),
            "cached target ({}, {}) drifted from recomputation ({lp}, {ll})",
            self.log_prior,
            self.log_lkd
        );
    }
}
