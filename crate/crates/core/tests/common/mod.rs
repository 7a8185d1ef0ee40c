//! Independent reference computations shared by the integration and acceptance tests.
#![allow(dead_code, clippy::excessive_precision, clippy::needless_range_loop)]

use dollo_core::tree::LeafSet;
use dollo_core::{DatedTree, NodeId, ObservationModel, TraitMatrix};
use statrs::function::gamma::ln_gamma;

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ];
    const WK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    fn rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let x = h * XK[i];
            let s = f(c - x) + f(c + x);
            k += WK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, ((k - g) * h).abs())
    }
    // global adaptive bisection: always split the interval with the largest error estimate
    let mut parts = vec![(a, b, rule(f, a, b))];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs() {
            break;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].2 .1.total_cmp(&parts[j].2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        parts.push((lo, m, rule(f, lo, m)));
        parts.push((m, hi, rule(f, m, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > rel_tol * (c.abs() + d.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// One-sample Kolmogorov-Smirnov statistic against the CDF `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Expected number of traits with each leaf set, by dynamic programming over
/// all subsets of leaves below every node. Keys are bitmasks over leaf ids.
pub fn expected_pattern_counts(tree: &DatedTree, mu: f64, lambda: f64) -> Vec<f64> {
    let l = tree.n_leaves();
    assert!(l <= 12, "subset enumeration");
    let full = 1usize << l;
    // q[v][s]: probability that exactly leaf set s survives, given the trait at the bottom of v's edge
    let mut q: Vec<Vec<f64>> = vec![Vec::new(); tree.n_nodes()];
    let mut below: Vec<usize> = vec![0; tree.n_nodes()];
    for v in tree.postorder() {
        match tree.children(v) {
            None => {
                below[v] = 1 << v;
                let mut t = vec![0.0; full];
                t[1 << v] = 1.0;
                q[v] = t;
            }
            Some([a, b]) => {
                below[v] = below[a] | below[b];
                let ta = top_of_edge(tree, a, mu, &q[a]);
                let tb = top_of_edge(tree, b, mu, &q[b]);
                let mut t = vec![0.0; full];
                for (sa, &pa) in ta.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                    for (sb, &pb) in tb.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                        t[sa | sb] += pa * pb;
                    }
                }
                q[v] = t;
            }
        }
    }
    let mut e = vec![0.0; full];
    for v in 0..tree.n_nodes() {
        let mass = if v == tree.root() {
            1.0 / mu
        } else {
            -(-mu * tree.branch_length(v)).exp_m1() / mu
        };
        for (s, &p) in q[v].iter().enumerate() {
            e[s] += lambda * mass * p;
        }
    }
    e
}

fn top_of_edge(tree: &DatedTree, v: NodeId, mu: f64, bottom: &[f64]) -> Vec<f64> {
    let keep = (-mu * tree.branch_length(v)).exp();
    let mut t: Vec<f64> = bottom.iter().map(|p| keep * p).collect();
    t[0] += 1.0 - keep;
    t
}

pub fn mask(leaves: &[usize]) -> usize {
    leaves.iter().fold(0, |m, &i| m | 1 << i)
}

/// Log-likelihood of labelled data from independent Poisson pattern counts:
/// the probability of the count vector, divided by the number of orderings.
pub fn oracle_log_likelihood(
    tree: &DatedTree,
    mu: f64,
    lambda: f64,
    data: &TraitMatrix,
    obs: ObservationModel,
) -> f64 {
    let data = data.with_taxa_order(tree.leaf_names()).unwrap();
    let e = expected_pattern_counts(tree, mu, lambda);
    let total: f64 = e
        .iter()
        .enumerate()
        .filter(|(s, _)| obs.keeps(s.count_ones() as usize))
        .map(|(_, x)| x)
        .sum();
    let mut ll = -total;
    for (leaves, n) in data.patterns() {
        ll += n as f64 * e[mask(&leaves)].ln();
    }
    ll - ln_gamma(data.n_traits() as f64 + 1.0)
}

/// Leaf sets below every node as bitmasks.
pub fn clade_masks(tree: &DatedTree) -> Vec<usize> {
    tree.leaf_sets()
        .iter()
        .map(|s: &LeafSet| s.ones().fold(0, |m, i| m | 1 << i))
        .collect()
}

pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Random binary tree with `l` leaves named `t0..`, built by random coalescence.
pub fn random_tree<R: rand::Rng>(l: usize, rng: &mut R, height: f64) -> DatedTree {
    use dollo_core::Subtree;
    let mut pool: Vec<(Subtree, f64)> = (0..l)
        .map(|i| (Subtree::leaf(format!("t{i}"), 0.0), 0.0))
        .collect();
    let mut age = 0.0;
    while pool.len() > 1 {
        age += rng.random::<f64>() * height / l as f64 + 1e-3;
        let i = rng.random_range(0..pool.len());
        let a = pool.swap_remove(i);
        let j = rng.random_range(0..pool.len());
        let b = pool.swap_remove(j);
        pool.push((Subtree::node(age, a.0, b.0), age));
    }
    DatedTree::from_subtree(&pool.pop().unwrap().0).unwrap()
}
