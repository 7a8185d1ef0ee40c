//! Starting states: a constraint-respecting clustering tree and a rate
//! estimate matched to it.

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::data::TraitMatrix;
use crate::error::{Error, Result};
use crate::likelihood::two_leaf_mle;
use crate::priors::PriorConfig;
use crate::tree::{admissible, Calibrations, DatedTree, ResolvedClade, Subtree};

/// Root age used when neither the data nor the constraints fix a time scale.
const DEFAULT_ROOT_AGE: f64 = 1000.0;

enum Topo {
    Leaf(usize),
    Node(Box<Topo>, Box<Topo>),
}

struct Cluster {
    leaves: Vec<usize>,
    topo: Topo,
}

/// Average-linkage clustering on Jaccard distances between trait sets,
/// performed inside each calibration clade first so every clade comes out
/// as a clade. Node ages are then spread between the bounds implied by the
/// constraints. Ties are broken at random.
pub fn initial_tree<R: Rng>(
    data: &TraitMatrix,
    cal: &Calibrations,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<DatedTree> {
    let l = data.n_taxa();
    if l < 2 {
        return Err(Error::InvalidInput("need at least two taxa".into()));
    }
    let dist = jaccard(data);
    let groups = clade_hierarchy(cal, l)?;

    // cluster each group bottom-up; groups are sorted by size so sub-clades are ready
    let mut owner: Vec<Option<usize>> = vec![None; l];
    let mut built: Vec<Option<Cluster>> = (0..groups.len()).map(|_| None).collect();
    for (gi, g) in groups.iter().enumerate() {
        let mut units: Vec<Cluster> = Vec::new();
        let mut taken = vec![false; groups.len()];
        for &leaf in &g.leaves {
            match owner[leaf] {
                None => units.push(Cluster {
                    leaves: vec![leaf],
                    topo: Topo::Leaf(leaf),
                }),
                Some(sub) if !taken[sub] => {
                    taken[sub] = true;
                    units.push(built[sub].take().expect("sub-clade built once"));
                }
                Some(_) => {}
            }
        }
        for &leaf in &g.leaves {
            owner[leaf] = Some(gi);
        }
        built[gi] = Some(upgma(units, &dist, rng));
    }
    let whole = built.pop().flatten().expect("top group");

    let bounds = group_bounds(&groups, cal);
    let spec = assign_ages(
        &whole.topo,
        data,
        cal,
        &bounds,
        &group_sets(&groups),
        prior,
        rng,
    )?;
    let tree = DatedTree::from_subtree(&spec)?.with_leaf_order(data.taxa())?;
    let adm = admissible(&tree, cal);
    if !adm.admissible {
        return Err(Error::Config(format!(
            "could not build a starting tree satisfying the constraints: {:?}",
            adm.violations
        )));
    }
    Ok(tree)
}

struct Group {
    leaves: Vec<usize>,
    set: FixedBitSet,
    /// Indices into `cal.clades` with exactly this leaf set.
    clades: Vec<usize>,
}

/// Distinct constraint clades plus the full taxon set, smallest first.
/// Fails if two clades overlap without nesting.
fn clade_hierarchy(cal: &Calibrations, l: usize) -> Result<Vec<Group>> {
    let mut groups: Vec<Group> = Vec::new();
    for (ci, c) in cal.clades.iter().enumerate() {
        match groups.iter_mut().find(|g| g.set == c.set) {
            Some(g) => g.clades.push(ci),
            None => groups.push(Group {
                leaves: c.leaves.clone(),
                set: c.set.clone(),
                clades: vec![ci],
            }),
        }
    }
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let nested = a.set.is_subset(&b.set) || b.set.is_subset(&a.set);
            if !nested && !a.set.is_disjoint(&b.set) {
                let name = |g: &Group| cal.clades[g.clades[0]].name.clone();
                return Err(Error::Config(format!(
                    "clades '{}' and '{}' overlap without nesting",
                    name(a),
                    name(b)
                )));
            }
        }
    }
    let mut all = FixedBitSet::with_capacity(l);
    all.insert_range(..);
    match groups.iter_mut().find(|g| g.set == all) {
        Some(g) => g.clades.push(usize::MAX),
        None => groups.push(Group {
            leaves: (0..l).collect(),
            set: all,
            clades: vec![],
        }),
    }
    groups.sort_by_key(|g| g.leaves.len());
    for g in &mut groups {
        g.clades.retain(|&c| c != usize::MAX);
    }
    Ok(groups)
}

fn group_bounds(groups: &[Group], cal: &Calibrations) -> Vec<(f64, f64)> {
    groups
        .iter()
        .map(|g| {
            g.clades.iter().fold((0.0, f64::INFINITY), |(lo, hi), &c| {
                let c: &ResolvedClade = &cal.clades[c];
                (
                    c.lower.map_or(lo, |x| x.max(lo)),
                    c.upper.map_or(hi, |x| x.min(hi)),
                )
            })
        })
        .collect()
}

fn group_sets(groups: &[Group]) -> Vec<FixedBitSet> {
    groups.iter().map(|g| g.set.clone()).collect()
}

fn jaccard(data: &TraitMatrix) -> Vec<Vec<f64>> {
    let l = data.n_taxa();
    let mut rows = vec![FixedBitSet::with_capacity(data.n_traits()); l];
    for (j, t) in data.traits().iter().enumerate() {
        for &i in &t.leaves {
            rows[i].insert(j);
        }
    }
    let mut d = vec![vec![0.0; l]; l];
    for i in 0..l {
        for j in i + 1..l {
            let inter = rows[i].intersection_count(&rows[j]);
            let union = rows[i].union_count(&rows[j]);
            let x = if union == 0 {
                1.0
            } else {
                1.0 - inter as f64 / union as f64
            };
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    d
}

fn upgma<R: Rng>(mut units: Vec<Cluster>, dist: &[Vec<f64>], rng: &mut R) -> Cluster {
    let avg = |a: &Cluster, b: &Cluster| {
        let s: f64 = a
            .leaves
            .iter()
            .flat_map(|&i| b.leaves.iter().map(move |&j| dist[i][j]))
            .sum();
        s / (a.leaves.len() * b.leaves.len()) as f64
    };
    while units.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..units.len() {
            for j in i + 1..units.len() {
                let d = avg(&units[i], &units[j]) + 1e-9 * rng.random::<f64>();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let b = units.swap_remove(j);
        let a = units.swap_remove(i);
        let mut leaves = a.leaves;
        leaves.extend(b.leaves);
        units.push(Cluster {
            leaves,
            topo: Topo::Node(Box::new(a.topo), Box::new(b.topo)),
        });
    }
    units.pop().expect("at least one unit")
}

fn assign_ages<R: Rng>(
    topo: &Topo,
    data: &TraitMatrix,
    cal: &Calibrations,
    group_bounds: &[(f64, f64)],
    group_sets: &[FixedBitSet],
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<Subtree> {
    let l = data.n_taxa();
    let leaf_age = |i: usize| cal.leaf_intervals[i].map_or(0.0, |(lo, _)| lo);

    // lower bounds bottom-up
    fn lower(
        t: &Topo,
        l: usize,
        leaf_age: &dyn Fn(usize) -> f64,
        bounds: &dyn Fn(&FixedBitSet) -> (f64, f64),
    ) -> (f64, usize, FixedBitSet) {
        match t {
            Topo::Leaf(i) => {
                let mut s = FixedBitSet::with_capacity(l);
                s.insert(*i);
                (leaf_age(*i), 0, s)
            }
            Topo::Node(a, b) => {
                let (la, ha, mut sa) = lower(a, l, leaf_age, bounds);
                let (lb, hb, sb) = lower(b, l, leaf_age, bounds);
                sa.union_with(&sb);
                let (lo, _) = bounds(&sa);
                (la.max(lb).max(lo), ha.max(hb) + 1, sa)
            }
        }
    }
    let bounds = |s: &FixedBitSet| {
        group_sets
            .iter()
            .position(|g| g == s)
            .map_or((0.0, f64::INFINITY), |i| group_bounds[i])
    };

    let (root_lo, _, _) = lower(topo, l, &leaf_age, &bounds);
    let max_root = prior.max_root_age().unwrap_or(f64::INFINITY);
    let root_hi = bounds(&full(l)).1.min(max_root);
    if root_lo >= root_hi {
        return Err(Error::Config(format!(
            "constraints force the root to be at least {root_lo} but at most {root_hi}"
        )));
    }
    let mut root_age = if root_lo > 0.0 {
        1.5 * root_lo
    } else if root_hi.is_finite() {
        0.5 * root_hi
    } else {
        DEFAULT_ROOT_AGE
    };
    if root_age >= root_hi {
        root_age = root_lo + 0.8 * (root_hi - root_lo);
    }
    root_age = root_lo + (root_age - root_lo) * rng.random_range(0.95..1.0);

    fn build(
        t: &Topo,
        age: Option<f64>,
        cap: f64,
        l: usize,
        data: &TraitMatrix,
        leaf_age: &dyn Fn(usize) -> f64,
        bounds: &dyn Fn(&FixedBitSet) -> (f64, f64),
    ) -> Result<Subtree> {
        match t {
            Topo::Leaf(i) => Ok(Subtree::leaf(data.taxa()[*i].clone(), leaf_age(*i))),
            Topo::Node(a, b) => {
                let (lo, height, set) = lower(t, l, leaf_age, bounds);
                let (_, upper) = bounds(&set);
                let hi = cap.min(upper);
                if lo > hi {
                    return Err(Error::Config(format!(
                        "no room for a clade between ages {lo} and {hi}"
                    )));
                }
                let t_v = age.unwrap_or_else(|| {
                    let frac = height as f64 / (height as f64 + 1.0);
                    lo + frac * (hi - lo)
                });
                Ok(Subtree::node(
                    t_v,
                    build(a, None, t_v, l, data, leaf_age, bounds)?,
                    build(b, None, t_v, l, data, leaf_age, bounds)?,
                ))
            }
        }
    }
    build(topo, Some(root_age), root_hi, l, data, &leaf_age, &bounds)
}

fn full(l: usize) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(l);
    s.insert_range(..);
    s
}

/// Death rate matching the tree's pairwise distances to the two-leaf
/// estimates of `mu * |g|`, clamped to the prior support.
pub fn initial_mu(data: &TraitMatrix, tree: &DatedTree, prior: &PriorConfig) -> f64 {
    let l = data.n_taxa();
    let mut counts = vec![vec![0usize; l]; l];
    let mut sizes = vec![0usize; l];
    for t in data.traits() {
        for (k, &i) in t.leaves.iter().enumerate() {
            sizes[i] += 1;
            for &j in &t.leaves[k + 1..] {
                counts[i][j] += 1;
            }
        }
    }
    let depth = tree.depths();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..l {
        for j in i + 1..l {
            let n12 = counts[i][j];
            if n12 == 0 {
                continue;
            }
            let scaled =
                two_leaf_mle(sizes[i] - n12, sizes[j] - n12, n12, 1.0).expect("unit rate is valid");
            let m = tree.pair_mrca(&depth, i, j);
            num += scaled;
            den += 2.0 * tree.age(m) - tree.age(i) - tree.age(j);
        }
    }
    let (lo, hi) = prior.mu.bounds();
    let guess = if num > 0.0 && den > 0.0 {
        num / den
    } else {
        1.0 / tree.root_age().max(1e-300)
    };
    guess.clamp(lo.max(1e-300), hi)
}
