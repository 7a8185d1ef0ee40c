//! Likelihood of trait data on a dated tree.
//!
//! Traits are born along the branches at rate `lambda`, copied at branching
//! points and lost independently at per-capita rate `mu`. Integrating birth
//! points out leaves a Poisson number of traits whose intensity reduces to
//! per-edge sums. Two post-order recursions evaluate everything exactly:
//! the survival recursion gives the probability that a trait present at a
//! node reaches zero, one, or more leaves; the pattern recursion gives the
//! probability that it reaches exactly a given leaf set.

mod engine;
mod two_leaf;

pub use engine::{Evaluation, LikelihoodEngine};
pub use two_leaf::{two_leaf_closed_form_log_likelihood, two_leaf_mle, two_leaf_posterior_logpdf};

use std::borrow::Cow;

use statrs::function::gamma::ln_gamma;

use crate::data::{ObservationModel, TraitMatrix};
use crate::error::{Error, Result};
use crate::tree::{DatedTree, NodeId};

/// Per-node survival probabilities for a trait present at the node.
///
/// `u0[i]` and `u1[i]` are the probabilities that the trait is displayed at
/// exactly zero and exactly one of the leaves below `i`. The complements
/// `present[i] = 1 - u0[i]` and `multiple[i] = 1 - u0[i] - u1[i]` are kept
/// from their own recursions so they stay accurate when close to zero.
/// Entries for the root ancestor are unused.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalTable {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub present: Vec<f64>,
    pub multiple: Vec<f64>,
}

impl SurvivalTable {
    /// Probability that a trait present at `v` is displayed at more than `d` leaves.
    pub fn prob_observed(&self, v: NodeId, obs: ObservationModel) -> f64 {
        match obs {
            ObservationModel::NoAbsent => self.present[v],
            ObservationModel::NoUnique => self.multiple[v],
        }
    }

    /// Recomputes every entry in place.
    pub fn recompute(&mut self, tree: &DatedTree, mu: f64) {
        for v in tree.postorder() {
            self.update_node(tree, mu, v);
        }
    }

    /// Recomputes the entries of `dirty` nodes and all of their ancestors.
    /// `dirty` must contain every node whose age, children, or child ages changed.
    pub fn refresh(&mut self, tree: &DatedTree, mu: f64, dirty: &[NodeId]) {
        let anc = tree.root_ancestor();
        let mut marked = Vec::new();
        let mut seen = vec![false; tree.n_nodes()];
        for &d in dirty {
            let mut v = d;
            let mut path = Vec::new();
            while v != anc && !seen[v] {
                seen[v] = true;
                path.push(v);
                v = tree
                    .parent(v)
                    .expect("nodes below the root ancestor have parents");
            }
            marked.extend(path);
        }
        // children before parents: sort by depth, deepest first
        let depth = |mut v: NodeId| {
            let mut d = 0;
            while v != anc {
                v = tree.parent(v).expect("has parent");
                d += 1;
            }
            d
        };
        let mut keyed: Vec<(usize, NodeId)> = marked.into_iter().map(|v| (depth(v), v)).collect();
        keyed.sort_unstable_by_key(|k| std::cmp::Reverse(k.0));
        for (_, v) in keyed {
            self.update_node(tree, mu, v);
        }
    }

    fn update_node(&mut self, tree: &DatedTree, mu: f64, v: NodeId) {
        match tree.children(v) {
            None => {
                self.u0[v] = 0.0;
                self.u1[v] = 1.0;
                self.present[v] = 1.0;
                self.multiple[v] = 0.0;
            }
            Some([a, b]) => {
                let t = tree.age(v);
                let top = |c: NodeId| {
                    let x = -mu * (t - tree.age(c));
                    let delta = x.exp();
                    let gone = -x.exp_m1();
                    // distribution of the leaf count seen from the top of the branch
                    (
                        gone + delta * self.u0[c],
                        delta * self.u1[c],
                        delta * self.present[c],
                        delta * self.multiple[c],
                    )
                };
                let (z_a, one_a, p_a, m_a) = top(a);
                let (z_b, one_b, p_b, m_b) = top(b);
                self.u0[v] = z_a * z_b;
                self.u1[v] = one_a * z_b + z_a * one_b;
                self.present[v] = p_a + p_b * (1.0 - p_a);
                self.multiple[v] = m_a + (1.0 - m_a) * m_b + one_a * one_b;
            }
        }
    }
}

pub(crate) fn check_rate(mu: f64, what: &str) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} must be positive and finite, got {mu}"
        )))
    }
}

/// Post-order evaluation of the survival probabilities at every node.
pub fn survival_recursion(tree: &DatedTree, mu: f64) -> Result<SurvivalTable> {
    check_rate(mu, "death rate")?;
    let n = tree.n_nodes();
    let mut table = SurvivalTable {
        u0: vec![0.0; n],
        u1: vec![0.0; n],
        present: vec![0.0; n],
        multiple: vec![0.0; n],
    };
    table.recompute(tree, mu);
    Ok(table)
}

/// `1 - exp(-mu * branch)` for the branch above `v`; exactly 1 on the root edge.
pub(crate) fn edge_mass(tree: &DatedTree, mu: f64, v: NodeId) -> f64 {
    if v == tree.root() {
        1.0
    } else {
        -(-mu * tree.branch_length(v)).exp_m1()
    }
}

/// Expected number of observed traits, divided by `lambda / mu`.
///
/// Sum over edges of `Pr{O > d}` at the lower node times the edge mass
/// `1 - exp(-mu * length)`, with the root edge contributing mass one.
pub fn expected_births_integral(tree: &DatedTree, mu: f64, obs: ObservationModel) -> Result<f64> {
    let table = survival_recursion(tree, mu)?;
    Ok(integral_from_table(tree, mu, &table, obs))
}

pub(crate) fn integral_from_table(
    tree: &DatedTree,
    mu: f64,
    table: &SurvivalTable,
    obs: ObservationModel,
) -> f64 {
    (0..tree.n_nodes() - 1)
        .map(|v| table.prob_observed(v, obs) * edge_mass(tree, mu, v))
        .sum()
}

/// Log of the per-trait factor: the sum, over the edges from the MRCA of `m`
/// up to the root ancestor, of the probability that a trait present at the
/// lower end of the edge is displayed at exactly the leaves `m`, times the
/// edge mass.
///
/// This is the direct node-by-node recursion; [`LikelihoodEngine`] computes
/// the same quantity by a faster route.
pub fn pattern_log_factor(
    tree: &DatedTree,
    mu: f64,
    m: &[NodeId],
    table: &SurvivalTable,
) -> Result<f64> {
    check_rate(mu, "death rate")?;
    if m.is_empty() {
        return Err(Error::Domain("trait pattern must be nonempty".into()));
    }
    let l = tree.n_leaves();
    if let Some(&bad) = m.iter().find(|&&v| v >= l) {
        return Err(Error::InvalidInput(format!(
            "pattern refers to non-leaf {bad}"
        )));
    }
    let n = tree.n_nodes();
    let mut in_m = vec![false; l];
    for &v in m {
        in_m[v] = true;
    }
    let size = in_m.iter().filter(|&&b| b).count();
    let mut count = vec![0usize; n];
    // log Pr{M^(i) = m^(i) | trait at (t_i, i)} where m^(i) is nonempty
    let mut log_p = vec![f64::NEG_INFINITY; n];
    for v in tree.postorder() {
        match tree.children(v) {
            None => {
                if in_m[v] {
                    count[v] = 1;
                    log_p[v] = 0.0;
                }
            }
            Some([a, b]) => {
                count[v] = count[a] + count[b];
                if count[v] == 0 {
                    continue;
                }
                let t = tree.age(v);
                let mut acc = 0.0;
                for c in [a, b] {
                    let x = -mu * (t - tree.age(c));
                    acc += if count[c] > 0 {
                        x + log_p[c]
                    } else {
                        // empty below c: the trait must die out, or reach c and die below
                        ((-x.exp_m1()) + x.exp() * table.u0[c]).ln()
                    };
                }
                log_p[v] = acc;
            }
        }
    }
    let terms: Vec<f64> = (0..n - 1)
        .filter(|&v| count[v] == size)
        .map(|v| log_p[v] + edge_mass(tree, mu, v).ln())
        .collect();
    Ok(log_sum_exp(&terms))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn aligned<'a>(tree: &DatedTree, data: &'a TraitMatrix) -> Result<Cow<'a, TraitMatrix>> {
    if data.taxa() == tree.leaf_names() {
        Ok(Cow::Borrowed(data))
    } else {
        Ok(Cow::Owned(data.with_taxa_order(tree.leaf_names())?))
    }
}

/// Log-likelihood of the data given the tree and both rates, including the `1/N!` term.
pub fn log_likelihood(
    tree: &DatedTree,
    mu: f64,
    lambda: f64,
    data: &TraitMatrix,
    obs: ObservationModel,
) -> Result<f64> {
    check_rate(lambda, "birth rate")?;
    let data = aligned(tree, data)?;
    let engine = LikelihoodEngine::new(&data, obs)?;
    Ok(engine.evaluate(tree, mu)?.log_likelihood(mu, lambda))
}

/// Log-likelihood with `lambda` integrated out against the prior `1/lambda`.
///
/// The integral is `Gamma(N) / I^N * prod(F_a) / N!`; `mu` cancels from the
/// per-trait prefactors.
pub fn log_likelihood_marginal_lambda(
    tree: &DatedTree,
    mu: f64,
    data: &TraitMatrix,
    obs: ObservationModel,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain(
            "the lambda marginal is improper for empty data".into(),
        ));
    }
    let data = aligned(tree, data)?;
    let engine = LikelihoodEngine::new(&data, obs)?;
    engine.evaluate(tree, mu)?.log_marginal_lambda()
}
