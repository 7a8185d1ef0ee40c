use std::collections::HashMap;
use std::fmt::Write;

use super::aligned_trees;
use crate::error::{Error, Result};
use crate::mcmc::ChainTrace;
use crate::tree::{quote_label, LeafSet};

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusNode {
    pub leaves: Vec<usize>,
    /// Fraction of trees containing this clade.
    pub support: f64,
    /// Mean age of the clade over the trees that contain it.
    pub mean_age: f64,
    pub children: Vec<usize>,
}

/// A possibly multifurcating summary tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusTree {
    pub taxa: Vec<String>,
    pub nodes: Vec<ConsensusNode>,
}

impl ConsensusTree {
    /// Newick text annotated with clade support and mean age on each internal node.
    /// Branch lengths are differences of mean ages.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write(0, None, &mut out);
        out.push(';');
        out
    }

    fn write(&self, v: usize, parent_age: Option<f64>, out: &mut String) {
        let n = &self.nodes[v];
        if n.children.is_empty() {
            out.push_str(&quote_label(&self.taxa[n.leaves[0]]));
        } else {
            out.push('(');
            for (i, &c) in n.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write(c, Some(n.mean_age), out);
            }
            let _ = write!(out, ")[&support={:.4},age={:.2}]", n.support, n.mean_age);
        }
        if let Some(p) = parent_age {
            let _ = write!(out, ":{:.2}", (p - n.mean_age).max(0.0));
        }
    }

    /// Non-trivial clades (more than one leaf, fewer than all), as taxon name lists.
    pub fn clades(&self) -> Vec<(Vec<&str>, f64)> {
        let l = self.taxa.len();
        self.nodes
            .iter()
            .filter(|n| n.leaves.len() > 1 && n.leaves.len() < l)
            .map(|n| {
                (
                    n.leaves.iter().map(|&i| self.taxa[i].as_str()).collect(),
                    n.support,
                )
            })
            .collect()
    }
}

/// Majority-rule consensus: every clade found in more than `threshold` of the
/// trees (`threshold >= 0.5`), with mean ages.
pub fn majority_consensus(trace: &ChainTrace, threshold: f64) -> Result<ConsensusTree> {
    if !(0.5..1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "consensus threshold {threshold} outside [0.5, 1)"
        )));
    }
    let trees = aligned_trees(trace)?;
    let taxa = trees[0].leaf_names().to_vec();
    let l = taxa.len();
    let mut counts: HashMap<LeafSet, (usize, f64)> = HashMap::new();
    for t in &trees {
        let sets = t.leaf_sets();
        for v in t.internal_nodes() {
            let e = counts.entry(sets[v].clone()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += t.age(v);
        }
    }
    let n = trees.len() as f64;
    let mut clades: Vec<(Vec<usize>, f64, f64)> = counts
        .into_iter()
        .filter(|(s, (c, _))| *c as f64 / n > threshold || s.count_ones(..) == l)
        .map(|(s, (c, sum))| (s.ones().collect(), c as f64 / n, sum / c as f64))
        .collect();
    for i in 0..l {
        let mean = trees.iter().map(|t| t.age(i)).sum::<f64>() / n;
        clades.push((vec![i], 1.0, mean));
    }
    // larger clades first so that each node's parent precedes it
    clades.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    let mut nodes: Vec<ConsensusNode> = Vec::with_capacity(clades.len());
    for (leaves, support, mean_age) in clades {
        let id = nodes.len();
        // majority clades are compatible, so the smallest enclosing one is the parent
        let parent = (0..id).rev().find(|&p| {
            leaves
                .iter()
                .all(|x| nodes[p].leaves.binary_search(x).is_ok())
        });
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        nodes.push(ConsensusNode {
            leaves,
            support,
            mean_age,
            children: Vec::new(),
        });
    }
    Ok(ConsensusTree { taxa, nodes })
}
