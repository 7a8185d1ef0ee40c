//! Batched evaluation of the pattern factors.
//!
//! For a leaf set `m` with MRCA `v`, the factor splits as `P(v) * G(v)`:
//! `P(v)` is the probability that a trait at `v` reaches exactly `m`, a
//! product over the Steiner subtree spanned by `m`, and `G(v)` collects the
//! edges from `v` up to the root ancestor. `G` satisfies
//! `G(c) = (1 - delta_c) + delta_c * side(sibling c) * G(parent c)` with
//! `G(root) = 1`, so one pre-order pass serves every pattern and each
//! pattern costs time proportional to its Steiner subtree.

use statrs::function::gamma::ln_gamma;

use super::{check_rate, integral_from_table, ln_factorial, survival_recursion, SurvivalTable};
use crate::data::{ObservationModel, TraitMatrix};
use crate::error::{Error, Result};
use crate::par::{map_slice_with, Execution};
use crate::tree::{DatedTree, NodeId};

const PARALLEL_PATTERNS: usize = 64;

/// Per-node quantities shared by all patterns on one tree.
#[derive(Debug)]
pub(crate) struct PatternTerms {
    /// `-mu * length` of the branch above each node.
    log_delta: Vec<f64>,
    /// Log-probability that a trait entering the branch above a node leaves no descendant.
    log_side: Vec<f64>,
    lift: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct Scratch {
    mark: Vec<u32>,
    generation: u32,
    stack: Vec<NodeId>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Scratch {
            mark: vec![0; n],
            generation: 0,
            stack: Vec::new(),
        }
    }
}

impl PatternTerms {
    pub(crate) fn new(tree: &DatedTree, mu: f64, table: &SurvivalTable) -> Self {
        let n = tree.n_nodes();
        let root = tree.root();
        let mut log_delta = vec![f64::NEG_INFINITY; n];
        let mut log_side = vec![0.0; n];
        for v in 0..n - 1 {
            if v != root {
                let x = -mu * tree.branch_length(v);
                log_delta[v] = x;
                log_side[v] = (-x.exp() * table.present[v]).ln_1p();
            }
        }
        let mut lift = vec![0.0; n];
        lift[root] = 1.0;
        for v in tree.preorder() {
            if let Some([a, b]) = tree.children(v) {
                for (c, s) in [(a, b), (b, a)] {
                    let delta = log_delta[c].exp();
                    lift[c] = -log_delta[c].exp_m1() + delta * log_side[s].exp() * lift[v];
                }
            }
        }
        PatternTerms {
            log_delta,
            log_side,
            lift,
        }
    }

    /// Log factor for a nonempty, sorted set of leaf ids.
    pub(crate) fn log_factor(&self, tree: &DatedTree, leaves: &[NodeId], s: &mut Scratch) -> f64 {
        s.generation = s.generation.wrapping_add(1);
        if s.generation == 0 {
            s.mark.fill(0);
            s.generation = 1;
        }
        let g = s.generation;
        let anc = tree.root_ancestor();
        for &leaf in leaves {
            let mut v = leaf;
            while v != anc && s.mark[v] != g {
                s.mark[v] = g;
                v = tree.parent(v).expect("has parent");
            }
        }
        // walk down from the root to the first node with both children marked
        let mut mrca = tree.root();
        while let Some([a, b]) = tree.children(mrca) {
            match (s.mark[a] == g, s.mark[b] == g) {
                (true, true) => break,
                (true, false) => mrca = a,
                (false, true) => mrca = b,
                (false, false) => unreachable!("marked internal node without marked child"),
            }
        }
        let mut log_p = 0.0;
        s.stack.clear();
        s.stack.push(mrca);
        while let Some(v) = s.stack.pop() {
            if let Some(ch) = tree.children(v) {
                for c in ch {
                    if s.mark[c] == g {
                        log_p += self.log_delta[c];
                        s.stack.push(c);
                    } else {
                        log_p += self.log_side[c];
                    }
                }
            }
        }
        log_p + self.lift[mrca].ln()
    }
}

/// Data prepared for repeated likelihood evaluation on changing trees.
#[derive(Clone, Debug)]
pub struct LikelihoodEngine {
    patterns: Vec<(Vec<NodeId>, f64)>,
    n_taxa: usize,
    n_traits: usize,
    obs: ObservationModel,
    exec: Execution,
}

/// Sufficient summaries of one likelihood evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub n_traits: usize,
    /// Expected number of observed traits divided by `lambda / mu`.
    pub integral: f64,
    /// Sum over traits of the log pattern factor.
    pub sum_log_factors: f64,
}

impl Evaluation {
    pub fn log_likelihood(&self, mu: f64, lambda: f64) -> f64 {
        let n = self.n_traits as f64;
        let mut ll = -(lambda / mu) * self.integral - ln_factorial(self.n_traits);
        if self.n_traits > 0 {
            ll += n * (lambda.ln() - mu.ln()) + self.sum_log_factors;
        }
        ll
    }

    pub fn log_marginal_lambda(&self) -> Result<f64> {
        if self.n_traits == 0 {
            return Err(Error::Domain(
                "the lambda marginal is improper for empty data".into(),
            ));
        }
        let n = self.n_traits as f64;
        Ok(ln_gamma(n) - n * self.integral.ln() + self.sum_log_factors
            - ln_factorial(self.n_traits))
    }
}

impl LikelihoodEngine {
    /// Compresses the data into distinct patterns. Taxon `i` of the data is leaf `i` of the tree.
    pub fn new(data: &TraitMatrix, obs: ObservationModel) -> Result<Self> {
        data.check_observation_model(obs)?;
        Ok(LikelihoodEngine {
            patterns: data
                .patterns()
                .into_iter()
                .map(|(leaves, k)| (leaves, k as f64))
                .collect(),
            n_taxa: data.n_taxa(),
            n_traits: data.n_traits(),
            obs,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn observation_model(&self) -> ObservationModel {
        self.obs
    }

    pub fn n_traits(&self) -> usize {
        self.n_traits
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    fn check_tree(&self, tree: &DatedTree) -> Result<()> {
        if tree.n_leaves() != self.n_taxa {
            return Err(Error::InvalidInput(format!(
                "tree has {} leaves but the data has {} taxa",
                tree.n_leaves(),
                self.n_taxa
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, tree: &DatedTree, mu: f64) -> Result<Evaluation> {
        self.check_tree(tree)?;
        let table = survival_recursion(tree, mu)?;
        Ok(self.evaluate_with_table(tree, mu, &table))
    }

    /// Evaluation reusing a survival table that is current for `tree` and `mu`.
    pub fn evaluate_with_table(
        &self,
        tree: &DatedTree,
        mu: f64,
        table: &SurvivalTable,
    ) -> Evaluation {
        let factors = self.pattern_log_factors(tree, mu, table);
        let sum_log_factors = self
            .patterns
            .iter()
            .zip(&factors)
            .map(|((_, k), f)| k * f)
            .sum();
        Evaluation {
            n_traits: self.n_traits,
            integral: integral_from_table(tree, mu, table, self.obs),
            sum_log_factors,
        }
    }

    /// Log factor of each distinct pattern, in first-seen order.
    pub fn pattern_log_factors(
        &self,
        tree: &DatedTree,
        mu: f64,
        table: &SurvivalTable,
    ) -> Vec<f64> {
        let terms = PatternTerms::new(tree, mu, table);
        let n = tree.n_nodes();
        map_slice_with(
            self.exec.above(self.patterns.len(), PARALLEL_PATTERNS),
            &self.patterns,
            || Scratch::new(n),
            |s, (leaves, _)| terms.log_factor(tree, leaves, s),
        )
    }

    /// Log-likelihood at given rates; fails on invalid rates or a mismatched tree.
    pub fn log_likelihood(&self, tree: &DatedTree, mu: f64, lambda: f64) -> Result<f64> {
        check_rate(lambda, "birth rate")?;
        Ok(self.evaluate(tree, mu)?.log_likelihood(mu, lambda))
    }
}
