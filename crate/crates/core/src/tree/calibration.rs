//! Calibration constraints and the admissible tree space.

use super::{DatedTree, LeafSet, NodeId};
use crate::error::{Error, Result};

/// A clade that must appear in every admissible tree, with optional bounds
/// (years BP) on the age of its most recent common ancestor.
#[derive(Clone, Debug, PartialEq)]
pub struct CladeConstraint {
    pub name: String,
    pub taxa: Vec<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Allowed range for the age of one leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafAgeInterval {
    pub taxon: String,
    pub t_minus: f64,
    pub t_plus: f64,
}

/// Clade and leaf-age constraints as read from a calibration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CalibrationSet {
    pub clades: Vec<CladeConstraint>,
    pub leaf_ages: Vec<LeafAgeInterval>,
}

/// A clade constraint resolved against a fixed leaf numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedClade {
    pub name: String,
    pub leaves: Vec<NodeId>,
    pub set: LeafSet,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// A [`CalibrationSet`] bound to a taxon order. Leaf `i` of any tree used
/// with it must be `taxa[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibrations {
    pub taxa: Vec<String>,
    pub clades: Vec<ResolvedClade>,
    /// Per leaf id: the allowed age range, if the leaf age is free.
    pub leaf_intervals: Vec<Option<(f64, f64)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// The constrained taxa do not form a clade.
    Topology { clade: String },
    CladeAge {
        clade: String,
        age: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    },
    LeafAge {
        taxon: String,
        age: f64,
        t_minus: f64,
        t_plus: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

impl CalibrationSet {
    pub fn is_empty(&self) -> bool {
        self.clades.is_empty() && self.leaf_ages.is_empty()
    }

    /// True if some clade has an upper age bound. Without one, rescaling
    /// time is not ruled out by the constraints.
    pub fn has_upper_bound(&self) -> bool {
        self.clades.iter().any(|c| c.upper.is_some())
    }

    /// Checks the constraints against a taxon list and binds them to its order.
    pub fn resolve<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Calibrations> {
        let taxa: Vec<String> = taxa.iter().map(|t| t.as_ref().to_string()).collect();
        let index = |name: &str| {
            taxa.iter().position(|t| t == name).ok_or_else(|| {
                Error::InvalidInput(format!("unknown taxon '{name}' in calibration"))
            })
        };
        let mut clades = Vec::with_capacity(self.clades.len());
        for c in &self.clades {
            if c.taxa.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "clade '{}' has no taxa",
                    c.name
                )));
            }
            if let (Some(lo), Some(hi)) = (c.lower, c.upper) {
                if lo > hi {
                    return Err(Error::InvalidInput(format!(
                        "clade '{}' has lower bound {lo} above upper bound {hi}",
                        c.name
                    )));
                }
            }
            let leaves = c
                .taxa
                .iter()
                .map(|t| index(t))
                .collect::<Result<Vec<_>>>()?;
            let mut set = LeafSet::with_capacity(taxa.len());
            for &v in &leaves {
                set.insert(v);
            }
            clades.push(ResolvedClade {
                name: c.name.clone(),
                leaves,
                set,
                lower: c.lower,
                upper: c.upper,
            });
        }
        let mut leaf_intervals = vec![None; taxa.len()];
        for iv in &self.leaf_ages {
            if !(iv.t_minus.is_finite() && iv.t_plus.is_finite() && iv.t_minus >= 0.0)
                || iv.t_minus > iv.t_plus
            {
                return Err(Error::InvalidInput(format!(
                    "leaf '{}' has invalid age interval [{}, {}]",
                    iv.taxon, iv.t_minus, iv.t_plus
                )));
            }
            leaf_intervals[index(&iv.taxon)?] = Some((iv.t_minus, iv.t_plus));
        }
        Ok(Calibrations {
            taxa,
            clades,
            leaf_intervals,
        })
    }
}

impl Calibrations {
    /// No constraints at all over the given taxa.
    pub fn none<S: AsRef<str>>(taxa: &[S]) -> Self {
        CalibrationSet::default()
            .resolve(taxa)
            .expect("an empty calibration set always resolves")
    }

    /// Leaves whose age may vary (nondegenerate interval).
    pub fn free_leaves(&self) -> Vec<NodeId> {
        self.leaf_intervals
            .iter()
            .enumerate()
            .filter_map(|(i, iv)| match iv {
                Some((lo, hi)) if hi > lo => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn has_upper_bound(&self) -> bool {
        self.clades.iter().any(|c| c.upper.is_some())
    }
}

/// Checks topology, clade-age and leaf-age constraints.
pub fn admissible(tree: &DatedTree, cal: &Calibrations) -> Admissibility {
    let mut violations = Vec::new();
    if !cal.clades.is_empty() {
        let depth = tree.depths();
        let counts = tree.leaf_counts();
        for c in &cal.clades {
            let m = c.leaves[1..]
                .iter()
                .fold(c.leaves[0], |acc, &v| tree.pair_mrca(&depth, acc, v));
            if counts[m] != c.set.count_ones(..) {
                violations.push(Violation::Topology {
                    clade: c.name.clone(),
                });
            }
            let age = tree.age(m);
            if c.lower.is_some_and(|lo| age < lo) || c.upper.is_some_and(|hi| age > hi) {
                violations.push(Violation::CladeAge {
                    clade: c.name.clone(),
                    age,
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
    }
    for (v, iv) in cal.leaf_intervals.iter().enumerate() {
        if let Some((lo, hi)) = *iv {
            let age = tree.age(v);
            if age < lo || age > hi {
                violations.push(Violation::LeafAge {
                    taxon: tree.leaf_name(v).to_string(),
                    age,
                    t_minus: lo,
                    t_plus: hi,
                });
            }
        }
    }
    Admissibility {
        admissible: violations.is_empty(),
        violations,
    }
}

/// Free internal nodes and the smallest age each can take in any admissible tree.
///
/// Free nodes are the internal nodes other than the root that are not at or
/// below the MRCA of an upper-bounded clade. The minimum age of a node is the
/// largest lower limit among its descendants: leaf minimum ages and clade
/// lower bounds of constrained MRCAs at or below it.
pub fn min_attainable_ages(tree: &DatedTree, cal: &Calibrations) -> Vec<(NodeId, f64)> {
    let n = tree.n_nodes();
    let depth = tree.depths();
    let mut floor = vec![0.0_f64; n];
    let mut pinned = vec![false; n];
    for c in &cal.clades {
        let m = c.leaves[1..]
            .iter()
            .fold(c.leaves[0], |acc, &v| tree.pair_mrca(&depth, acc, v));
        if let Some(lo) = c.lower {
            floor[m] = floor[m].max(lo);
        }
        if c.upper.is_some() {
            pinned[m] = true;
        }
    }
    // anything below a pinned MRCA is pinned too
    for v in tree.preorder() {
        if let Some(p) = tree.parent(v) {
            if p != tree.root_ancestor() && pinned[p] {
                pinned[v] = true;
            }
        }
    }
    let mut s = vec![0.0_f64; n];
    for v in tree.postorder() {
        s[v] = match tree.children(v) {
            None => cal.leaf_intervals[v].map_or(tree.age(v), |(lo, _)| lo),
            Some([a, b]) => s[a].max(s[b]),
        }
        .max(floor[v]);
    }
    tree.internal_nodes()
        .filter(|&v| v != tree.root() && !pinned[v])
        .map(|v| (v, s[v]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Subtree;

    fn four() -> DatedTree {
        // (((A,B)@1500,C)@2000,D)@3000
        DatedTree::from_subtree(&Subtree::node(
            3000.0,
            Subtree::node(
                2000.0,
                Subtree::node(1500.0, Subtree::leaf("A", 0.0), Subtree::leaf("B", 0.0)),
                Subtree::leaf("C", 0.0),
            ),
            Subtree::leaf("D", 0.0),
        ))
        .unwrap()
    }

    fn clade(name: &str, taxa: &[&str], lower: Option<f64>, upper: Option<f64>) -> CladeConstraint {
        CladeConstraint {
            name: name.into(),
            taxa: taxa.iter().map(|s| s.to_string()).collect(),
            lower,
            upper,
        }
    }

    #[test]
    fn satisfied_constraints() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![clade("AB", &["A", "B"], Some(1450.0), Some(1600.0))],
            leaf_ages: vec![],
        }
        .resolve(t.leaf_names())
        .unwrap();
        let a = admissible(&t, &cal);
        assert!(a.admissible);
        assert!(a.violations.is_empty());
    }

    #[test]
    fn age_violation() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![clade("ABC", &["A", "B", "C"], None, Some(1600.0))],
            leaf_ages: vec![],
        }
        .resolve(t.leaf_names())
        .unwrap();
        let a = admissible(&t, &cal);
        assert!(!a.admissible);
        assert!(matches!(a.violations[..], [Violation::CladeAge { age, .. }] if age == 2000.0));
    }

    #[test]
    fn topology_violation() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![clade("AC", &["A", "C"], None, None)],
            leaf_ages: vec![],
        }
        .resolve(t.leaf_names())
        .unwrap();
        let a = admissible(&t, &cal);
        assert_eq!(
            a.violations,
            vec![Violation::Topology { clade: "AC".into() }]
        );
    }

    #[test]
    fn leaf_age_violation() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![],
            leaf_ages: vec![LeafAgeInterval {
                taxon: "D".into(),
                t_minus: 100.0,
                t_plus: 200.0,
            }],
        }
        .resolve(t.leaf_names())
        .unwrap();
        assert!(!admissible(&t, &cal).admissible);
    }

    #[test]
    fn resolve_errors() {
        let t = four();
        let bad = CalibrationSet {
            clades: vec![clade("X", &["A", "Q"], None, None)],
            leaf_ages: vec![],
        };
        assert!(bad.resolve(t.leaf_names()).is_err());
        let inverted = CalibrationSet {
            clades: vec![clade("X", &["A", "B"], Some(10.0), Some(5.0))],
            leaf_ages: vec![],
        };
        assert!(inverted.resolve(t.leaf_names()).is_err());
    }

    #[test]
    fn free_nodes_without_constraints() {
        let t = four();
        let s = min_attainable_ages(&t, &Calibrations::none(t.leaf_names()));
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|&(_, a)| a == 0.0));
    }

    #[test]
    fn lower_bound_lifts_ancestors() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![clade("AB", &["A", "B"], Some(1450.0), None)],
            leaf_ages: vec![],
        }
        .resolve(t.leaf_names())
        .unwrap();
        let s = min_attainable_ages(&t, &cal);
        let ab = t.mrca(&["A", "B"]).unwrap();
        let abc = t.mrca(&["A", "B", "C"]).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(&(ab, 1450.0)));
        assert!(s.contains(&(abc, 1450.0)));
    }

    #[test]
    fn upper_bounded_clade_is_not_free() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![clade("ABC", &["A", "B", "C"], Some(1800.0), Some(2200.0))],
            leaf_ages: vec![],
        }
        .resolve(t.leaf_names())
        .unwrap();
        assert!(min_attainable_ages(&t, &cal).is_empty());
    }

    #[test]
    fn leaf_interval_minimum() {
        let t = four();
        let cal = CalibrationSet {
            clades: vec![],
            leaf_ages: vec![LeafAgeInterval {
                taxon: "C".into(),
                t_minus: 300.0,
                t_plus: 400.0,
            }],
        }
        .resolve(t.leaf_names())
        .unwrap();
        let s = min_attainable_ages(&t, &cal);
        let abc = t.mrca(&["A", "B", "C"]).unwrap();
        let ab = t.mrca(&["A", "B"]).unwrap();
        assert!(s.contains(&(abc, 300.0)));
        assert!(s.contains(&(ab, 0.0)));
    }
}
