//! Binary trait data: taxa by traits, stored as the leaf set of each trait.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which traits survive into the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ObservationModel {
    /// Every trait displayed at one or more leaves is recorded.
    #[default]
    NoAbsent,
    /// Traits displayed at a single leaf are dropped.
    NoUnique,
}

impl ObservationModel {
    /// The thinning threshold: a trait is recorded when seen at more than `d` leaves.
    pub fn threshold(self) -> usize {
        match self {
            ObservationModel::NoAbsent => 0,
            ObservationModel::NoUnique => 1,
        }
    }

    pub fn keeps(self, n_leaves: usize) -> bool {
        n_leaves > self.threshold()
    }
}

impl fmt::Display for ObservationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservationModel::NoAbsent => "noabsent",
            ObservationModel::NoUnique => "nounique",
        })
    }
}

impl FromStr for ObservationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noabsent" | "d0" => Ok(ObservationModel::NoAbsent),
            "nounique" | "d1" => Ok(ObservationModel::NoUnique),
            other => Err(Error::InvalidInput(format!(
                "unknown observation model '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trait {
    pub id: String,
    /// Sorted, distinct taxon indices displaying the trait.
    pub leaves: Vec<usize>,
    /// Meaning class, when known.
    pub class: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraitMatrix {
    taxa: Vec<String>,
    traits: Vec<Trait>,
}

impl TraitMatrix {
    /// Validates structure: distinct taxa, distinct trait ids, leaf indices in
    /// range. Leaf lists are sorted and deduplicated.
    pub fn new(taxa: Vec<String>, mut traits: Vec<Trait>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &taxa {
            if !seen.insert(t.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate taxon '{t}'")));
            }
        }
        let mut ids = HashSet::new();
        for tr in &mut traits {
            if !ids.insert(tr.id.clone()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate trait id '{}'",
                    tr.id
                )));
            }
            tr.leaves.sort_unstable();
            tr.leaves.dedup();
            if let Some(&bad) = tr.leaves.iter().find(|&&i| i >= taxa.len()) {
                return Err(Error::InvalidInput(format!(
                    "trait '{}' refers to taxon index {bad} of {}",
                    tr.id,
                    taxa.len()
                )));
            }
        }
        Ok(TraitMatrix { taxa, traits })
    }

    /// Builds a matrix from bare leaf sets; trait ids are `c1`, `c2`, ...
    pub fn from_leaf_sets<S: AsRef<str>>(taxa: &[S], sets: Vec<Vec<usize>>) -> Result<Self> {
        let traits = sets
            .into_iter()
            .enumerate()
            .map(|(i, leaves)| Trait {
                id: format!("c{}", i + 1),
                leaves,
                class: None,
            })
            .collect();
        Self::new(
            taxa.iter().map(|t| t.as_ref().to_string()).collect(),
            traits,
        )
    }

    /// Two-taxon data with `n1` traits only at the first taxon, `n2` only at
    /// the second and `n12` shared.
    pub fn two_leaf_counts(a: &str, b: &str, n1: usize, n2: usize, n12: usize) -> Self {
        let sets = std::iter::repeat_n(vec![0], n1)
            .chain(std::iter::repeat_n(vec![1], n2))
            .chain(std::iter::repeat_n(vec![0, 1], n12))
            .collect();
        Self::from_leaf_sets(&[a, b], sets).expect("two distinct taxa")
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn traits(&self) -> &[Trait] {
        &self.traits
    }

    pub fn n_traits(&self) -> usize {
        self.traits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traits.is_empty()
    }

    /// Fails if some trait could not have been recorded under `obs`.
    pub fn check_observation_model(&self, obs: ObservationModel) -> Result<()> {
        match self.traits.iter().find(|t| !obs.keeps(t.leaves.len())) {
            None => Ok(()),
            Some(t) => Err(Error::DataInconsistency(format!(
                "trait '{}' is displayed at {} taxa, which {obs} data cannot contain",
                t.id,
                t.leaves.len()
            ))),
        }
    }

    /// Drops the traits that `obs` would not record.
    pub fn thinned(&self, obs: ObservationModel) -> Self {
        TraitMatrix {
            taxa: self.taxa.clone(),
            traits: self
                .traits
                .iter()
                .filter(|t| obs.keeps(t.leaves.len()))
                .cloned()
                .collect(),
        }
    }

    /// Distinct leaf sets with their multiplicities, in first-seen order.
    pub fn patterns(&self) -> Vec<(Vec<usize>, usize)> {
        let mut index: BTreeMap<&[usize], usize> = BTreeMap::new();
        let mut out: Vec<(Vec<usize>, usize)> = Vec::new();
        for t in &self.traits {
            match index.get(t.leaves.as_slice()) {
                Some(&i) => out[i].1 += 1,
                None => {
                    index.insert(&t.leaves, out.len());
                    out.push((t.leaves.clone(), 1));
                }
            }
        }
        out
    }

    /// Dense presence/absence rows, one per taxon.
    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        let mut rows = vec![vec![false; self.traits.len()]; self.taxa.len()];
        for (j, t) in self.traits.iter().enumerate() {
            for &i in &t.leaves {
                rows[i][j] = true;
            }
        }
        rows
    }

    /// Same data with taxa renumbered to follow `order`.
    pub fn with_taxa_order<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.taxa.len() {
            return Err(Error::InvalidInput("taxon lists differ in length".into()));
        }
        let mut map = vec![usize::MAX; self.taxa.len()];
        for (new, name) in order.iter().enumerate() {
            let old = self
                .taxa
                .iter()
                .position(|t| t == name.as_ref())
                .ok_or_else(|| Error::InvalidInput(format!("unknown taxon '{}'", name.as_ref())))?;
            map[old] = new;
        }
        let traits = self
            .traits
            .iter()
            .map(|t| Trait {
                id: t.id.clone(),
                leaves: t.leaves.iter().map(|&i| map[i]).collect(),
                class: t.class.clone(),
            })
            .collect();
        Self::new(
            order.iter().map(|s| s.as_ref().to_string()).collect(),
            traits,
        )
    }
}
