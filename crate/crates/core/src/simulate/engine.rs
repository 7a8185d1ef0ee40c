//! Event-driven simulation, one epoch at a time. An epoch is the interval
//! between consecutive node ages, during which the set of live lineages is
//! fixed; births, deaths and borrowing events occur as a continuous-time
//! Markov chain over all live lineages jointly.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use super::{gamma_mean_sd, BirthPoint, Borrowing, RateHeterogeneity, SimScenario, Simulation};
use crate::data::{Trait, TraitMatrix};
use crate::error::Result;
use crate::tree::{DatedTree, NodeId};

/// Which live lineages can exchange traits.
#[derive(Clone, Debug)]
pub struct LinkageGraph {
    /// Age of the common ancestor of every pair of nodes, when linkage is local.
    mrca_age: Option<Vec<Vec<f64>>>,
    depth: f64,
}

impl LinkageGraph {
    pub fn new(tree: &DatedTree, borrowing: Borrowing) -> Self {
        match borrowing {
            Borrowing::Local { depth, .. } => {
                let n = tree.n_nodes() - 1;
                let d = tree.depths();
                let mut ages = vec![vec![0.0; n]; n];
                for (a, row) in ages.iter_mut().enumerate() {
                    for (b, x) in row.iter_mut().enumerate() {
                        *x = tree.age(tree.pair_mrca(&d, a, b));
                    }
                }
                LinkageGraph {
                    mrca_age: Some(ages),
                    depth,
                }
            }
            _ => LinkageGraph {
                mrca_age: None,
                depth: f64::INFINITY,
            },
        }
    }

    /// Whether the lineages on the edges above `a` and `b` are linked at `time`.
    pub fn linked(&self, a: NodeId, b: NodeId, time: f64) -> bool {
        a != b
            && match &self.mrca_age {
                None => true,
                Some(m) => m[a][b] - time < self.depth,
            }
    }
}

struct Lineage {
    node: NodeId,
    /// Trait indices present, per meaning class.
    sets: Vec<Vec<u32>>,
    count: usize,
    death: f64,
}

struct Engine {
    class_mu: Vec<f64>,
    mult: Vec<f64>,
    lambda_k: f64,
    borrow_rate: f64,
    empty_field: bool,
    linkage: LinkageGraph,
    traits: Vec<(u32, NodeId, f64)>,
    leaf_sets: Vec<Vec<usize>>,
}

impl Engine {
    /// Instances of a class of size `n` that are allowed to die.
    fn mortal(&self, n: usize) -> usize {
        if self.empty_field && n == 1 {
            0
        } else {
            n
        }
    }

    fn death_rate(&self, lin: &Lineage) -> f64 {
        let m = self.mult[lin.node];
        lin.sets
            .iter()
            .zip(&self.class_mu)
            .map(|(s, mu)| mu * m * self.mortal(s.len()) as f64)
            .sum()
    }

    fn refresh(&self, lin: &mut Lineage) {
        lin.count = lin.sets.iter().map(Vec::len).sum();
        lin.death = self.death_rate(lin);
    }

    fn new_trait(&mut self, class: usize, node: NodeId, age: f64) -> u32 {
        self.traits.push((class as u32, node, age));
        self.leaf_sets.push(Vec::new());
        (self.traits.len() - 1) as u32
    }

    fn rates(&self, lin: &Lineage) -> [f64; 3] {
        [
            self.lambda_k * self.class_mu.len() as f64,
            lin.death,
            self.borrow_rate * lin.count as f64,
        ]
    }
}

pub(super) fn run<R: Rng>(s: &SimScenario, rng: &mut R) -> Result<Simulation> {
    let tree = &s.tree;
    let k = s.n_classes();
    let n_nodes = tree.n_nodes();
    let class_mu: Vec<f64> = match s.rate_het {
        RateHeterogeneity::PerMeaning { r } => {
            (0..k).map(|_| gamma_mean_sd(s.mu, r, rng)).collect()
        }
        _ => vec![s.mu; k],
    };
    let mult: Vec<f64> = match s.rate_het {
        RateHeterogeneity::PerBranch { r } => {
            (0..n_nodes).map(|_| gamma_mean_sd(1.0, r, rng)).collect()
        }
        _ => vec![1.0; n_nodes],
    };
    let borrow_rate = match s.borrowing {
        Borrowing::None => 0.0,
        Borrowing::Global { rate } | Borrowing::Local { rate, .. } => rate * s.mu,
    };
    let mut e = Engine {
        class_mu,
        mult,
        lambda_k: s.lambda / k as f64,
        borrow_rate,
        empty_field: s.empty_field,
        linkage: LinkageGraph::new(tree, s.borrowing),
        traits: Vec::new(),
        leaf_sets: Vec::new(),
    };

    // stationary state on the edge above the root
    let root = tree.root();
    let mut t = tree.root_age();
    let mut root_lin = Lineage {
        node: root,
        sets: vec![Vec::new(); k],
        count: 0,
        death: 0.0,
    };
    for c in 0..k {
        let rate = e.class_mu[c] * e.mult[root];
        let mean = e.lambda_k / rate;
        let poisson = Poisson::new(mean).expect("finite positive mean");
        let n = loop {
            let n = poisson.sample(rng) as usize;
            if n > 0 || !s.empty_field {
                break n;
            }
        };
        let age_exp = Exp::new(rate).expect("positive rate");
        for _ in 0..n {
            let age = t + age_exp.sample(rng);
            let id = e.new_trait(c, root, age);
            root_lin.sets[c].push(id);
        }
    }
    e.refresh(&mut root_lin);
    let mut live = vec![root_lin];

    while !live.is_empty() {
        let (next_i, boundary) = live
            .iter()
            .enumerate()
            .map(|(i, l)| (i, tree.age(l.node)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        loop {
            let weights: Vec<[f64; 3]> = live.iter().map(|l| e.rates(l)).collect();
            let total: f64 = weights.iter().flatten().sum();
            if total <= 0.0 {
                t = boundary;
                break;
            }
            let dt = Exp::new(total).expect("positive").sample(rng);
            if t - dt <= boundary {
                t = boundary;
                break;
            }
            t -= dt;
            // pick lineage and event type
            let mut u = rng.random::<f64>() * total;
            let mut pick = (live.len() - 1, 2);
            'outer: for (i, w) in weights.iter().enumerate() {
                for (j, &x) in w.iter().enumerate() {
                    if u < x {
                        pick = (i, j);
                        break 'outer;
                    }
                    u -= x;
                }
            }
            let (i, kind) = pick;
            match kind {
                0 => {
                    let c = rng.random_range(0..k);
                    let node = live[i].node;
                    let id = e.new_trait(c, node, t);
                    live[i].sets[c].push(id);
                }
                1 => {
                    let lin = &live[i];
                    let m = e.mult[lin.node];
                    let mut u = rng.random::<f64>() * lin.death;
                    let mut class = None;
                    for (c, set) in lin.sets.iter().enumerate() {
                        let w = e.class_mu[c] * m * e.mortal(set.len()) as f64;
                        if w > 0.0 {
                            class = Some(c);
                            if u < w {
                                break;
                            }
                            u -= w;
                        }
                    }
                    let Some(c) = class else { continue };
                    let set = &mut live[i].sets[c];
                    let j = rng.random_range(0..set.len());
                    set.swap_remove(j);
                }
                _ => {
                    let lin = &live[i];
                    if lin.count == 0 {
                        continue;
                    }
                    let mut j = rng.random_range(0..lin.count);
                    let mut found = None;
                    for (c, set) in lin.sets.iter().enumerate() {
                        if j < set.len() {
                            found = Some((c, set[j]));
                            break;
                        }
                        j -= set.len();
                    }
                    let (c, id) = found.expect("index within count");
                    let from = lin.node;
                    let targets: Vec<usize> = live
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| e.linkage.linked(from, l.node, t))
                        .map(|(x, _)| x)
                        .collect();
                    if targets.is_empty() {
                        continue;
                    }
                    let y = targets[rng.random_range(0..targets.len())];
                    if !live[y].sets[c].contains(&id) {
                        live[y].sets[c].push(id);
                        e.refresh(&mut live[y]);
                    }
                }
            }
            e.refresh(&mut live[i]);
        }
        // the lineage reaching `boundary` ends at its node
        let ended = live.swap_remove(next_i);
        match tree.children(ended.node) {
            None => {
                for set in &ended.sets {
                    for &id in set {
                        e.leaf_sets[id as usize].push(ended.node);
                    }
                }
            }
            Some([a, b]) => {
                for child in [a, b] {
                    let mut lin = Lineage {
                        node: child,
                        sets: ended.sets.clone(),
                        count: 0,
                        death: 0.0,
                    };
                    e.refresh(&mut lin);
                    live.push(lin);
                }
            }
        }
    }

    let mut traits = Vec::new();
    let mut births = Vec::new();
    for (idx, leaves) in e.leaf_sets.iter().enumerate() {
        if !s.obs.keeps(leaves.len()) {
            continue;
        }
        let (class, node, age) = e.traits[idx];
        let id = format!("c{}", traits.len() + 1);
        births.push(BirthPoint {
            trait_id: id.clone(),
            node,
            age,
        });
        traits.push(Trait {
            id,
            leaves: leaves.clone(),
            class: s.classes.map(|_| format!("m{}", class + 1)),
        });
    }
    let data = TraitMatrix::new(tree.leaf_names().to_vec(), traits)?;
    Ok(Simulation {
        data,
        births,
        class_rates: e.class_mu,
        branch_multipliers: e.mult,
    })
}
