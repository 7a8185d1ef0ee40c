//! Dated rooted binary trees.
//!
//! A tree with `L` leaves has `2L` nodes with stable integer identities:
//! leaves are `0..L`, internal nodes are `L..2L-1`, and the last index is the
//! root ancestor, an extra node of infinite age whose only child is the root.
//! Ages are years before present and never decrease towards the root.
//! Identities do not follow age order, so MCMC moves never re-sort nodes.

mod calibration;
mod newick;

pub use calibration::{
    admissible, min_attainable_ages, Admissibility, CalibrationSet, Calibrations, CladeConstraint,
    LeafAgeInterval, ResolvedClade, Violation,
};
pub(crate) use newick::quote_label;
pub use newick::{parse_newick, NewickNode};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

pub type NodeId = usize;

/// A set of leaves, indexed by leaf id.
pub type LeafSet = FixedBitSet;

#[derive(Clone, Debug, PartialEq)]
struct Node {
    age: f64,
    parent: Option<NodeId>,
    children: Option<[NodeId; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatedTree {
    nodes: Vec<Node>,
    names: Vec<String>,
    root: NodeId,
}

/// Nested description of a tree, used to build [`DatedTree`] values.
#[derive(Clone, Debug)]
pub enum Subtree {
    Leaf {
        name: String,
        age: f64,
    },
    Node {
        age: f64,
        children: Box<[Subtree; 2]>,
    },
}

impl Subtree {
    pub fn leaf(name: impl Into<String>, age: f64) -> Self {
        Subtree::Leaf {
            name: name.into(),
            age,
        }
    }

    pub fn node(age: f64, left: Subtree, right: Subtree) -> Self {
        Subtree::Node {
            age,
            children: Box::new([left, right]),
        }
    }
}

impl DatedTree {
    /// Builds a tree from a nested description. Leaves are numbered in
    /// left-to-right order, internal nodes in post-order.
    pub fn from_subtree(spec: &Subtree) -> Result<Self> {
        let mut names = Vec::new();
        collect_leaf_names(spec, &mut names);
        let n_leaves = names.len();
        if n_leaves < 2 {
            return Err(Error::InvalidInput(
                "a tree needs at least two leaves".into(),
            ));
        }
        let mut nodes = vec![
            Node {
                age: 0.0,
                parent: None,
                children: None,
            };
            2 * n_leaves
        ];
        let mut next_leaf = 0;
        let mut next_internal = n_leaves;
        let root = place(spec, &mut nodes, &mut next_leaf, &mut next_internal);
        let anc = 2 * n_leaves - 1;
        nodes[anc].age = f64::INFINITY;
        nodes[root].parent = Some(anc);
        let tree = DatedTree { nodes, names, root };
        tree.validate()?;
        Ok(tree)
    }

    /// Two leaves under a single root.
    pub fn two_leaf(a: &str, b: &str, root_age: f64) -> Result<Self> {
        Self::from_subtree(&Subtree::node(
            root_age,
            Subtree::leaf(a, 0.0),
            Subtree::leaf(b, 0.0),
        ))
    }

    /// Checks every structural and age invariant.
    pub fn validate(&self) -> Result<()> {
        let l = self.n_leaves();
        if self.nodes.len() != 2 * l || l < 2 {
            return Err(Error::InvalidInput(
                "node count must be 2L with L >= 2".into(),
            ));
        }
        let anc = self.root_ancestor();
        if self.nodes[anc].parent.is_some() || self.nodes[anc].children.is_some() {
            return Err(Error::InvalidInput("root ancestor must be detached".into()));
        }
        if self.nodes[self.root].parent != Some(anc) {
            return Err(Error::InvalidInput(
                "root must hang from the root ancestor".into(),
            ));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            if seen[v] {
                return Err(Error::InvalidInput("tree contains a cycle".into()));
            }
            seen[v] = true;
            count += 1;
            let age = self.nodes[v].age;
            if !age.is_finite() || age < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "node {v} has invalid age {age}"
                )));
            }
            match self.nodes[v].children {
                Some(ch) => {
                    if v < l {
                        return Err(Error::InvalidInput(format!("leaf id {v} has children")));
                    }
                    for c in ch {
                        if self.nodes[c].parent != Some(v) {
                            return Err(Error::InvalidInput(format!(
                                "parent link of node {c} is inconsistent"
                            )));
                        }
                        if self.nodes[c].age > age {
                            return Err(Error::InvalidInput(format!(
                                "node {c} (age {}) is older than its parent {v} (age {age})",
                                self.nodes[c].age
                            )));
                        }
                        stack.push(c);
                    }
                }
                None => {
                    if v >= l {
                        return Err(Error::InvalidInput(format!(
                            "internal id {v} has no children"
                        )));
                    }
                }
            }
        }
        if count != 2 * l - 1 {
            return Err(Error::InvalidInput("tree is not connected".into()));
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_ancestor(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn root_age(&self) -> f64 {
        self.nodes[self.root].age
    }

    pub fn age(&self, v: NodeId) -> f64 {
        self.nodes[v].age
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> Option<[NodeId; 2]> {
        self.nodes[v].children
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        v < self.n_leaves()
    }

    pub fn sibling(&self, v: NodeId) -> Option<NodeId> {
        let p = self.parent(v)?;
        let [a, b] = self.children(p)?;
        Some(if a == v { b } else { a })
    }

    /// Length of the branch above `v`; infinite for the root.
    pub fn branch_length(&self, v: NodeId) -> f64 {
        match self.parent(v) {
            Some(p) => self.age(p) - self.age(v),
            None => f64::NAN,
        }
    }

    pub fn leaf_names(&self) -> &[String] {
        &self.names
    }

    pub fn leaf_name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn leaf_id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    /// Internal node ids, excluding the root ancestor.
    pub fn internal_nodes(&self) -> std::ops::Range<NodeId> {
        self.n_leaves()..self.nodes.len() - 1
    }

    /// Nodes below the root ancestor, children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len() - 1);
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            match self.nodes[v].children {
                Some([a, b]) if !expanded => {
                    stack.push((v, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                _ => out.push(v),
            }
        }
        out
    }

    /// Nodes below the root ancestor, parents before children.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len() - 1);
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            if let Some([a, b]) = self.nodes[v].children {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    /// Number of edges between each node and the root ancestor.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        for v in self.preorder() {
            depth[v] = self.parent(v).map_or(0, |p| depth[p] + 1);
        }
        depth
    }

    /// Leaf set below every node (the root ancestor gets all leaves).
    pub fn leaf_sets(&self) -> Vec<LeafSet> {
        let l = self.n_leaves();
        let mut sets = vec![LeafSet::with_capacity(l); self.nodes.len()];
        for v in self.postorder() {
            match self.nodes[v].children {
                None => sets[v].insert(v),
                Some([a, b]) => {
                    let mut s = sets[a].clone();
                    s.union_with(&sets[b]);
                    sets[v] = s;
                }
            }
        }
        sets[self.root_ancestor()] = sets[self.root].clone();
        sets
    }

    /// Number of leaves below every node.
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        for v in self.postorder() {
            counts[v] = match self.nodes[v].children {
                None => 1,
                Some([a, b]) => counts[a] + counts[b],
            };
        }
        counts
    }

    pub fn leaf_set_of(&self, leaves: &[NodeId]) -> LeafSet {
        let mut s = LeafSet::with_capacity(self.n_leaves());
        for &v in leaves {
            s.insert(v);
        }
        s
    }

    /// Resolves leaf names to ids.
    pub fn leaf_ids<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Vec<NodeId>> {
        taxa.iter()
            .map(|t| {
                self.leaf_id(t.as_ref())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown taxon '{}'", t.as_ref())))
            })
            .collect()
    }

    /// Most recent common ancestor of a nonempty set of leaves.
    pub fn mrca_of(&self, leaves: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = leaves
            .split_first()
            .ok_or_else(|| Error::InvalidInput("MRCA of an empty taxon set".into()))?;
        if let Some(&bad) = leaves.iter().find(|&&v| !self.is_leaf(v)) {
            return Err(Error::InvalidInput(format!("node {bad} is not a leaf")));
        }
        let depth = self.depths();
        Ok(rest
            .iter()
            .fold(first, |acc, &v| self.pair_mrca(&depth, acc, v)))
    }

    /// Most recent common ancestor of a set of named leaves.
    pub fn mrca<S: AsRef<str>>(&self, taxa: &[S]) -> Result<NodeId> {
        self.mrca_of(&self.leaf_ids(taxa)?)
    }

    pub(crate) fn pair_mrca(&self, depth: &[usize], mut a: NodeId, mut b: NodeId) -> NodeId {
        while depth[a] > depth[b] {
            a = self.nodes[a].parent.expect("depth > 0 implies a parent");
        }
        while depth[b] > depth[a] {
            b = self.nodes[b].parent.expect("depth > 0 implies a parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("distinct nodes below the root");
            b = self.nodes[b].parent.expect("distinct nodes below the root");
        }
        a
    }

    /// True iff the leaves below the MRCA of `taxa` are exactly `taxa`.
    pub fn is_clade<S: AsRef<str>>(&self, taxa: &[S]) -> Result<bool> {
        let ids = self.leaf_ids(taxa)?;
        let m = self.mrca_of(&ids)?;
        let distinct = self.leaf_set_of(&ids).count_ones(..);
        Ok(self.leaf_counts()[m] == distinct)
    }

    /// Sum of all finite branch lengths (the root ancestor edge is excluded).
    pub fn total_branch_length(&self) -> f64 {
        (0..self.nodes.len() - 1)
            .filter(|&v| v != self.root)
            .map(|v| self.branch_length(v))
            .sum()
    }

    /// Returns the same tree with leaves renumbered so that leaf `i` is named `taxa[i]`.
    pub fn with_leaf_order<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Self> {
        let l = self.n_leaves();
        if taxa.len() != l {
            return Err(Error::InvalidInput(format!(
                "tree has {l} leaves but {} taxa were given",
                taxa.len()
            )));
        }
        let mut map: Vec<NodeId> = (0..self.nodes.len()).collect();
        let mut used = vec![false; l];
        for (new, t) in taxa.iter().enumerate() {
            let old = self
                .leaf_id(t.as_ref())
                .ok_or_else(|| Error::InvalidInput(format!("unknown taxon '{}'", t.as_ref())))?;
            if used[old] {
                return Err(Error::InvalidInput(format!(
                    "duplicate taxon '{}'",
                    t.as_ref()
                )));
            }
            used[old] = true;
            map[old] = new;
        }
        let mut nodes = self.nodes.clone();
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[map[old]] = Node {
                age: node.age,
                parent: node.parent.map(|p| map[p]),
                children: node.children.map(|[a, b]| [map[a], map[b]]),
            };
        }
        Ok(DatedTree {
            nodes,
            names: taxa.iter().map(|t| t.as_ref().to_string()).collect(),
            root: map[self.root],
        })
    }

    /// Ages of all nodes below the root ancestor, indexed by id.
    pub fn ages(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.age).collect()
    }

    pub(crate) fn set_age(&mut self, v: NodeId, age: f64) {
        self.nodes[v].age = age;
    }

    /// Detaches `v` together with its parent `p`, then reinserts `p` on the
    /// branch above `target`. `p` keeps its age; the caller checks ages.
    pub(crate) fn prune_regraft(&mut self, v: NodeId, target: NodeId) {
        let p = self.nodes[v].parent.expect("pruned node has a parent");
        let s = self.sibling(v).expect("pruned node has a sibling");
        if target == s || target == p {
            return;
        }
        let gp = self.nodes[p]
            .parent
            .expect("parent of a non-root node has a parent");
        // splice p out
        self.replace_child(gp, p, s);
        self.nodes[s].parent = Some(gp);
        if self.root == p {
            self.root = s;
        }
        // splice p in above target
        let tp = self.nodes[target].parent.expect("target has a parent");
        self.replace_child(tp, target, p);
        self.nodes[p].parent = Some(tp);
        self.nodes[p].children = Some([v, target]);
        self.nodes[target].parent = Some(p);
        if self.root == target {
            self.root = p;
        }
    }

    fn replace_child(&mut self, parent: NodeId, old: NodeId, new: NodeId) {
        if parent == self.root_ancestor() {
            return;
        }
        let ch = self.nodes[parent].children.as_mut().expect("internal node");
        for c in ch.iter_mut() {
            if *c == old {
                *c = new;
            }
        }
    }

    /// Swaps the two children of an internal node. Only affects output order.
    pub fn swap_children(&mut self, v: NodeId) {
        if let Some([a, b]) = self.nodes[v].children {
            self.nodes[v].children = Some([b, a]);
        }
    }

    /// Ancestors of `v` up to and including the root (not the root ancestor).
    pub fn ancestors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let anc = self.root_ancestor();
        std::iter::successors(self.parent(v), move |&u| self.parent(u)).filter(move |&u| u != anc)
    }
}

fn collect_leaf_names(spec: &Subtree, out: &mut Vec<String>) {
    match spec {
        Subtree::Leaf { name, .. } => out.push(name.clone()),
        Subtree::Node { children, .. } => {
            collect_leaf_names(&children[0], out);
            collect_leaf_names(&children[1], out);
        }
    }
}

fn place(
    spec: &Subtree,
    nodes: &mut [Node],
    next_leaf: &mut usize,
    next_internal: &mut usize,
) -> NodeId {
    match spec {
        Subtree::Leaf { age, .. } => {
            let id = *next_leaf;
            *next_leaf += 1;
            nodes[id].age = *age;
            id
        }
        Subtree::Node { age, children } => {
            let a = place(&children[0], nodes, next_leaf, next_internal);
            let b = place(&children[1], nodes, next_leaf, next_internal);
            let id = *next_internal;
            *next_internal += 1;
            nodes[id] = Node {
                age: *age,
                parent: None,
                children: Some([a, b]),
            };
            nodes[a].parent = Some(id);
            nodes[b].parent = Some(id);
            id
        }
    }
}
