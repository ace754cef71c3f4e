//! Independent dense reference implementations used by the integration tests.
#![allow(dead_code)]

use hone::orbits::{EdgeOrbitCounts, Orbit, NUM_ORBITS};
use hone::{Graph, MotifMatrixKind};
use hone::generators::erdos_renyi;
use hone::linop::CompositionOrder;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn er(n: usize, p: f64, seed: u64) -> Graph {
    erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Per-edge orbit counts by classifying every connected induced subgraph on
/// 2–4 vertices from its edge count and degree sequence.
pub fn classify_orbits(g: &Graph) -> Vec<[u64; NUM_ORBITS]> {
    let n = g.num_nodes();
    let mut rows = vec![[0u64; NUM_ORBITS]; g.num_edges()];
    let adj = |a: usize, b: usize| g.has_edge(a, b);
    let mut bump = |u: usize, v: usize, orbit: usize| {
        let e = g.edge_index(u, v).unwrap();
        rows[e][orbit - 1] += 1;
    };

    for (u, v) in g.edges().to_vec() {
        bump(u, v, 1);
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let es: Vec<(usize, usize)> = [(a, b), (a, c), (b, c)]
                    .into_iter()
                    .filter(|&(x, y)| adj(x, y))
                    .collect();
                match es.len() {
                    2 => es.iter().for_each(|&(x, y)| bump(x, y, 2)),
                    3 => es.iter().for_each(|&(x, y)| bump(x, y, 3)),
                    _ => {}
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let vs = [a, b, c, d];
                    let mut es = Vec::new();
                    for i in 0..4 {
                        for j in i + 1..4 {
                            if adj(vs[i], vs[j]) {
                                es.push((vs[i], vs[j]));
                            }
                        }
                    }
                    let deg = |x: usize| es.iter().filter(|&&(p, q)| p == x || q == x).count();
                    let mut degs: Vec<usize> = vs.iter().map(|&x| deg(x)).collect();
                    degs.sort_unstable();
                    let shape = (es.len(), degs.as_slice());
                    for &(x, y) in &es {
                        let (dx, dy) = (deg(x).min(deg(y)), deg(x).max(deg(y)));
                        let orbit = match shape {
                            (3, [1, 1, 2, 2]) => if dx == 1 { 4 } else { 5 },
                            (3, [1, 1, 1, 3]) => 6,
                            (4, [2, 2, 2, 2]) => 7,
                            (4, [1, 2, 2, 3]) => match (dx, dy) {
                                (1, 3) => 8,
                                (2, 3) => 9,
                                _ => 10,
                            },
                            (5, _) => if dx == 3 { 12 } else { 11 },
                            (6, _) => 13,
                            // Disconnected (triangle plus isolated vertex).
                            _ => continue,
                        };
                        bump(x, y, orbit);
                    }
                }
            }
        }
    }
    rows
}

pub fn dense_weights(g: &Graph, counts: &EdgeOrbitCounts, orbit: Orbit, delta: u64) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut w = DMatrix::zeros(n, n);
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let c = counts.row(e)[orbit.id() - 1];
        if c >= delta {
            w[(u, v)] = c as f64;
            w[(v, u)] = c as f64;
        }
    }
    w
}

pub fn dense_psi(w: &DMatrix<f64>, kind: MotifMatrixKind) -> DMatrix<f64> {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
    let diag = |f: &dyn Fn(f64) -> f64| DMatrix::from_fn(n, n, |i, j| if i == j { f(d[i]) } else { 0.0 });
    let dinv = diag(&inv);
    let dinv_sqrt = diag(&|x| inv(x).sqrt());
    let mask = diag(&|x| if x > 0.0 { 1.0 } else { 0.0 });
    match kind {
        MotifMatrixKind::WeightedGraph => w.clone(),
        MotifMatrixKind::Transition => &dinv * w,
        MotifMatrixKind::Laplacian => diag(&|x| x) - w,
        MotifMatrixKind::NormalizedLaplacian => mask - &dinv_sqrt * w * &dinv_sqrt,
        MotifMatrixKind::RandomWalkLaplacian => mask - &dinv * w,
    }
}

pub fn dense_kstep(w: &DMatrix<f64>, kind: MotifMatrixKind, k: usize, order: CompositionOrder) -> DMatrix<f64> {
    let pow = |m: &DMatrix<f64>| {
        let mut out = DMatrix::identity(m.nrows(), m.ncols());
        for _ in 0..k {
            out = &out * m;
        }
        out
    };
    match order {
        CompositionOrder::PowerThenPsi => dense_psi(&pow(w), kind),
        CompositionOrder::PsiThenPower => pow(&dense_psi(w, kind)),
    }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            total += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    total / pairs as f64
}

/// `‖S − S_r‖_F / ‖S‖_F` for the best rank-`r` approximation `S_r`.
pub fn optimal_relative_residual(s: &DMatrix<f64>, r: usize) -> f64 {
    let mut sv: Vec<f64> = s.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sv.iter().map(|x| x * x).sum();
    let tail: f64 = sv.iter().skip(r).map(|x| x * x).sum();
    if total > 0.0 {
        (tail / total).sqrt()
    } else {
        0.0
    }
}

pub fn fixtures() -> Vec<(&'static str, Graph)> {
    use hone::generators::{complete, cycle, path, petersen, star};
    vec![
        ("K4", complete(4)),
        ("P4", path(4)),
        ("C4", cycle(4)),
        ("C5", cycle(5)),
        ("C6", cycle(6)),
        ("star3", star(3)),
        ("petersen", petersen()),
    ]
}
