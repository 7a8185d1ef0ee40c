//! Proposal kernels. Each proposal edits the state in place and returns
//! what is needed to evaluate and, if rejected, revert it.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::state::{ChainState, Dirty, Target};
use crate::error::{Error, Result};
use crate::tree::{Calibrations, DatedTree, NodeId};

/// Width of the log-scale window for the root-height and rate moves.
const ROOT_WINDOW: f64 = 1.0;
const RATE_WINDOW: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    NodeAge,
    Topology,
    Ridge,
    Rate,
    LeafAge,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::NodeAge,
        MoveKind::Topology,
        MoveKind::Ridge,
        MoveKind::Rate,
        MoveKind::LeafAge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::NodeAge => "node-age",
            MoveKind::Topology => "topology",
            MoveKind::Ridge => "ridge",
            MoveKind::Rate => "mu-walk",
            MoveKind::LeafAge => "leaf-age",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        MoveKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Relative proposal weights. Moves that cannot apply to a problem get
/// weight zero and the others are renormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveWeights {
    pub node_age: f64,
    pub topology: f64,
    pub ridge: f64,
    pub rate: f64,
    pub leaf_age: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            node_age: 40.0,
            topology: 25.0,
            ridge: 15.0,
            rate: 10.0,
            leaf_age: 10.0,
        }
    }
}

impl MoveWeights {
    pub fn get(&self, kind: MoveKind) -> f64 {
        match kind {
            MoveKind::NodeAge => self.node_age,
            MoveKind::Topology => self.topology,
            MoveKind::Ridge => self.ridge,
            MoveKind::Rate => self.rate,
            MoveKind::LeafAge => self.leaf_age,
        }
    }

    pub fn set(&mut self, kind: MoveKind, w: f64) {
        let slot = match kind {
            MoveKind::NodeAge => &mut self.node_age,
            MoveKind::Topology => &mut self.topology,
            MoveKind::Ridge => &mut self.ridge,
            MoveKind::Rate => &mut self.rate,
            MoveKind::LeafAge => &mut self.leaf_age,
        };
        *slot = w;
    }
}

pub(crate) struct MoveSet {
    kinds: Vec<MoveKind>,
    index: WeightedIndex<f64>,
}

impl MoveSet {
    pub(crate) fn new(
        weights: &MoveWeights,
        tree: &DatedTree,
        cal: &Calibrations,
        fix_mu: bool,
    ) -> Result<Self> {
        let applies = |k: MoveKind| match k {
            MoveKind::NodeAge => true,
            MoveKind::Topology => tree.n_leaves() >= 3,
            MoveKind::Ridge | MoveKind::Rate => !fix_mu,
            MoveKind::LeafAge => !cal.free_leaves().is_empty(),
        };
        let mut kinds = Vec::new();
        let mut w = Vec::new();
        for k in MoveKind::ALL {
            let x = weights.get(k);
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!(
                    "invalid weight {x} for move {}",
                    k.name()
                )));
            }
            if x > 0.0 && applies(k) {
                kinds.push(k);
                w.push(x);
            }
        }
        let index = WeightedIndex::new(&w)
            .map_err(|_| Error::Config("no applicable move has positive weight".into()))?;
        Ok(MoveSet { kinds, index })
    }

    pub(crate) fn pick<R: Rng>(&self, rng: &mut R) -> MoveKind {
        self.kinds[self.index.sample(rng)]
    }
}

pub(crate) enum Undo {
    Age {
        node: NodeId,
        age: f64,
    },
    Regraft {
        node: NodeId,
        sibling: NodeId,
        swap: bool,
    },
    Scale {
        ages: Vec<(NodeId, f64)>,
        mu: f64,
    },
    Rate {
        mu: f64,
    },
}

pub(crate) struct Proposal {
    pub dirty: Dirty,
    /// Log of Hastings ratio times Jacobian.
    pub log_ratio: f64,
    pub undo: Undo,
}

/// Applies a proposal of the given kind to `state`, or returns `None` when
/// the move has nothing to propose from here.
pub(crate) fn propose<R: Rng>(
    kind: MoveKind,
    state: &mut ChainState,
    target: &Target,
    rng: &mut R,
) -> Option<Proposal> {
    match kind {
        MoveKind::NodeAge => node_age(&mut state.tree, target.cal, rng),
        MoveKind::LeafAge => leaf_age(&mut state.tree, target.cal, rng),
        MoveKind::Topology => topology(&mut state.tree, rng),
        MoveKind::Ridge => {
            let rho = rng.random_range(0.5..2.0);
            let ages = scale_internal(&mut state.tree, rho);
            let mu = state.mu;
            state.mu = mu / rho;
            Some(Proposal {
                dirty: Dirty::All,
                // the auxiliary rho maps to 1/rho on the way back, adding rho^-2
                log_ratio: ridge_log_jacobian(state.tree.n_leaves(), rho) - 2.0 * rho.ln(),
                undo: Undo::Scale { ages, mu },
            })
        }
        MoveKind::Rate => {
            let step = RATE_WINDOW * (rng.random::<f64>() - 0.5);
            let mu = state.mu;
            state.mu = mu * step.exp();
            Some(Proposal {
                dirty: Dirty::All,
                log_ratio: step,
                undo: Undo::Rate { mu },
            })
        }
    }
}

fn node_age<R: Rng>(tree: &mut DatedTree, cal: &Calibrations, rng: &mut R) -> Option<Proposal> {
    let l = tree.n_leaves();
    let v = rng.random_range(l..2 * l - 1);
    let [a, b] = tree.children(v).expect("internal node");
    let floor = tree.age(a).max(tree.age(b));
    let old = tree.age(v);
    let (age, log_ratio) = if v == tree.root() {
        let x = old - floor;
        if x <= 0.0 {
            return None;
        }
        let step = ROOT_WINDOW * (rng.random::<f64>() - 0.5);
        (floor + x * step.exp(), step)
    } else {
        let mut lo = floor;
        let mut hi = tree.age(tree.parent(v).expect("non-root has parent"));
        for c in &cal.clades {
            if tree.mrca_of(&c.leaves).ok() == Some(v) {
                if let Some(x) = c.lower {
                    lo = lo.max(x);
                }
                if let Some(x) = c.upper {
                    hi = hi.min(x);
                }
            }
        }
        if hi <= lo {
            return None;
        }
        (rng.random_range(lo..hi), 0.0)
    };
    tree.set_age(v, age);
    Some(Proposal {
        dirty: Dirty::Nodes(vec![v]),
        log_ratio,
        undo: Undo::Age { node: v, age: old },
    })
}

fn leaf_age<R: Rng>(tree: &mut DatedTree, cal: &Calibrations, rng: &mut R) -> Option<Proposal> {
    let free = cal.free_leaves();
    if free.is_empty() {
        return None;
    }
    let v = free[rng.random_range(0..free.len())];
    let (lo, hi) = cal.leaf_intervals[v].expect("free leaf has an interval");
    let hi = hi.min(tree.age(tree.parent(v).expect("leaf has parent")));
    if hi <= lo {
        return None;
    }
    let old = tree.age(v);
    tree.set_age(v, rng.random_range(lo..hi));
    Some(Proposal {
        dirty: Dirty::Nodes(vec![v]),
        log_ratio: 0.0,
        undo: Undo::Age { node: v, age: old },
    })
}

/// Prune a subtree together with its parent and reattach the parent, at
/// its current age, on a uniformly chosen edge of the remaining tree that
/// spans that age. The remaining tree is the same before and after, so the
/// proposal is symmetric.
fn topology<R: Rng>(tree: &mut DatedTree, rng: &mut R) -> Option<Proposal> {
    let n = tree.n_nodes() - 1;
    let root = tree.root();
    let mut v = rng.random_range(0..n - 1);
    if v >= root {
        v += 1;
    }
    let p = tree.parent(v).expect("non-root has parent");
    let s = tree.sibling(v).expect("non-root has sibling");
    let gp = tree.parent(p).expect("internal node has parent");
    let t_p = tree.age(p);

    let mut inside = vec![false; n];
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        inside[x] = true;
        if let Some(ch) = tree.children(x) {
            stack.extend(ch);
        }
    }
    let top = |c: NodeId| {
        let up = if c == s {
            gp
        } else {
            tree.parent(c).expect("has parent")
        };
        tree.age(up)
    };
    let targets: Vec<NodeId> = (0..n)
        .filter(|&c| !inside[c] && c != p && tree.age(c) <= t_p && t_p < top(c))
        .collect();
    if targets.is_empty() {
        return None;
    }
    let target = targets[rng.random_range(0..targets.len())];
    let swap = tree.children(p).expect("internal")[0] != v;
    tree.prune_regraft(v, target);
    Some(Proposal {
        dirty: Dirty::Nodes(vec![p, s]),
        log_ratio: 0.0,
        undo: Undo::Regraft {
            node: v,
            sibling: s,
            swap,
        },
    })
}

fn scale_internal(tree: &mut DatedTree, rho: f64) -> Vec<(NodeId, f64)> {
    tree.internal_nodes()
        .map(|v| {
            let a = tree.age(v);
            tree.set_age(v, a * rho);
            (v, a)
        })
        .collect()
}

/// The ridge map: internal node ages times `rho`, death rate divided by `rho`.
/// Leaf ages are unchanged.
pub fn ridge_map(tree: &DatedTree, mu: f64, rho: f64) -> (DatedTree, f64) {
    let mut t = tree.clone();
    scale_internal(&mut t, rho);
    (t, mu / rho)
}

/// Log absolute Jacobian determinant of [`ridge_map`] on the internal ages and the rate.
pub fn ridge_log_jacobian(n_leaves: usize, rho: f64) -> f64 {
    (n_leaves as f64 - 2.0) * rho.ln()
}
