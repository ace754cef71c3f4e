//! Exact per-edge counts of the thirteen connected edge orbits on 2–4 vertices.
//!
//! For an edge `(i, j)` let `C = N(i) ∩ N(j)`, `X_i = N(i) \ (N(j) ∪ {j})` and
//! `X_j = N(j) \ (N(i) ∪ {i})`. Every induced graphlet on at most four vertices
//! that contains `(i, j)` has its remaining vertices either in `C ∪ X_i ∪ X_j`
//! or one hop further out, so each orbit reduces to a count over these three
//! sets and their neighborhoods. Marks are kept in a dense per-worker byte
//! array; nothing depends on hashing or scheduling, so counts are exact and
//! reproducible.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorize::normalize_columns;
use crate::graph::{Graph, NodeId};

pub const NUM_ORBITS: usize = 13;

/// Edge orbits of the connected graphlets on 2–4 vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orbit {
    /// The single edge.
    Edge = 1,
    /// Either edge of an induced wedge (open 2-path).
    Wedge,
    /// Triangle edge.
    Triangle,
    /// End edge of an induced 4-path.
    PathEnd,
    /// Middle edge of an induced 4-path.
    PathMiddle,
    /// Edge of an induced 3-star.
    Star,
    /// Edge of an induced 4-cycle.
    Cycle,
    /// Tail of a tailed triangle.
    TailedTriangleTail,
    /// Triangle edge of a tailed triangle touching the tail's attachment node.
    TailedTriangleInner,
    /// Triangle edge of a tailed triangle opposite the attachment node.
    TailedTriangleOpposite,
    /// Cycle (non-chord) edge of a diamond.
    DiamondCycle,
    /// Chord of a diamond.
    DiamondChord,
    /// Edge of a 4-clique.
    Clique,
}

impl Orbit {
    pub const ALL: [Orbit; NUM_ORBITS] = [
        Orbit::Edge,
        Orbit::Wedge,
        Orbit::Triangle,
        Orbit::PathEnd,
        Orbit::PathMiddle,
        Orbit::Star,
        Orbit::Cycle,
        Orbit::TailedTriangleTail,
        Orbit::TailedTriangleInner,
        Orbit::TailedTriangleOpposite,
        Orbit::DiamondCycle,
        Orbit::DiamondChord,
        Orbit::Clique,
    ];

    /// 1-based orbit number, `O1..O13`.
    pub fn id(self) -> usize {
        self as usize
    }

    /// Zero-based column in [`EdgeOrbitCounts`].
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_id(id: usize) -> Option<Orbit> {
        Orbit::ALL.get(id.checked_sub(1)?).copied()
    }

    /// Number of vertices in the graphlet this orbit belongs to.
    pub fn graphlet_size(self) -> usize {
        match self {
            Orbit::Edge => 2,
            Orbit::Wedge | Orbit::Triangle => 3,
            _ => 4,
        }
    }
}

impl std::fmt::Display for Orbit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "O{}", self.id())
    }
}

impl std::str::FromStr for Orbit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['O', 'o']);
        digits
            .parse()
            .ok()
            .and_then(Orbit::from_id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown orbit {s:?}")))
    }
}

/// `M × 13` table of orbit frequencies, row `e` for edge id `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeOrbitCounts {
    rows: Vec<[u64; NUM_ORBITS]>,
    graph_fingerprint: u64,
}

impl EdgeOrbitCounts {
    pub fn num_edges(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, e: usize) -> &[u64; NUM_ORBITS] {
        &self.rows[e]
    }

    pub fn rows(&self) -> &[[u64; NUM_ORBITS]] {
        &self.rows
    }

    pub fn get(&self, e: usize, orbit: Orbit) -> u64 {
        self.rows[e][orbit.index()]
    }

    pub fn graph_fingerprint(&self) -> u64 {
        self.graph_fingerprint
    }

    pub fn matches(&self, g: &Graph) -> bool {
        self.graph_fingerprint == g.fingerprint() && self.rows.len() == g.num_edges()
    }

    pub(crate) fn check(&self, g: &Graph) -> Result<()> {
        if self.matches(g) {
            Ok(())
        } else {
            Err(Error::CountsMismatch)
        }
    }
}

const IN_I: u8 = 1;
const IN_J: u8 = 2;

/// Exact induced orbit counts for every edge.
///
/// Work is split over edges on the current rayon pool; each worker owns its
/// mark buffer and writes only its own rows.
pub fn count_edge_orbits(g: &Graph) -> EdgeOrbitCounts {
    let n = g.num_nodes();
    let rows = g
        .edges()
        .par_iter()
        .with_min_len(256)
        .map_init(
            || Scratch::new(n),
            |scratch, &(i, j)| scratch.count_edge(g, i, j),
        )
        .collect();
    EdgeOrbitCounts {
        rows,
        graph_fingerprint: g.fingerprint(),
    }
}

struct Scratch {
    mark: Vec<u8>,
    common: Vec<NodeId>,
    only_i: Vec<NodeId>,
    only_j: Vec<NodeId>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            mark: vec![0; n],
            common: Vec::new(),
            only_i: Vec::new(),
            only_j: Vec::new(),
        }
    }

    fn count_edge(&mut self, g: &Graph, i: NodeId, j: NodeId) -> [u64; NUM_ORBITS] {
        let mark = &mut self.mark;
        for &u in g.neighbors(i) {
            mark[u] |= IN_I;
        }
        for &u in g.neighbors(j) {
            mark[u] |= IN_J;
        }
        self.common.clear();
        self.only_i.clear();
        self.only_j.clear();
        for &u in g.neighbors(i) {
            match mark[u] {
                m if m == IN_I | IN_J => self.common.push(u),
                IN_I if u != j => self.only_i.push(u),
                _ => {}
            }
        }
        for &u in g.neighbors(j) {
            if mark[u] == IN_J && u != i {
                self.only_j.push(u);
            }
        }
        // Membership tests below read the marks: i carries IN_J only and j
        // carries IN_I only, so they are excluded explicitly.
        let in_xi = |v: NodeId, m: u8| m == IN_I && v != j;
        let in_xj = |v: NodeId, m: u8| m == IN_J && v != i;

        let (mut clique, mut diamond_cycle, mut tt_opposite) = (0u64, 0u64, 0u64);
        for &u in &self.common {
            for &v in g.neighbors(u) {
                let m = mark[v];
                if m == IN_I | IN_J && v > u {
                    clique += 1;
                } else if in_xi(v, m) || in_xj(v, m) {
                    diamond_cycle += 1;
                } else if m == 0 {
                    tt_opposite += 1;
                }
            }
        }

        let (mut cycle, mut tail, mut path_end) = (0u64, 0u64, 0u64);
        for &u in &self.only_i {
            for &v in g.neighbors(u) {
                let m = mark[v];
                if in_xj(v, m) {
                    cycle += 1;
                } else if in_xi(v, m) && v > u {
                    tail += 1;
                } else if m == 0 {
                    path_end += 1;
                }
            }
        }
        for &u in &self.only_j {
            for &v in g.neighbors(u) {
                let m = mark[v];
                if in_xj(v, m) && v > u {
                    tail += 1;
                } else if m == 0 {
                    path_end += 1;
                }
            }
        }

        for &u in g.neighbors(i).iter().chain(g.neighbors(j)) {
            mark[u] = 0;
        }

        let c = self.common.len() as u64;
        let xi = self.only_i.len() as u64;
        let xj = self.only_j.len() as u64;
        let pairs = |k: u64| k * k.saturating_sub(1) / 2;

        let mut row = [0u64; NUM_ORBITS];
        row[Orbit::Edge.index()] = 1;
        row[Orbit::Wedge.index()] = xi + xj;
        row[Orbit::Triangle.index()] = c;
        row[Orbit::PathEnd.index()] = path_end;
        row[Orbit::PathMiddle.index()] = xi * xj - cycle;
        row[Orbit::Star.index()] = pairs(xi) + pairs(xj) - tail;
        row[Orbit::Cycle.index()] = cycle;
        row[Orbit::TailedTriangleTail.index()] = tail;
        row[Orbit::TailedTriangleInner.index()] = c * (xi + xj) - diamond_cycle;
        row[Orbit::TailedTriangleOpposite.index()] = tt_opposite;
        row[Orbit::DiamondCycle.index()] = diamond_cycle;
        row[Orbit::DiamondChord.index()] = pairs(c) - clique;
        row[Orbit::Clique.index()] = clique;
        row
    }
}

/// Default node cap for [`brute_force_orbit_counts`].
pub const ORACLE_NODE_CAP: usize = 64;

/// Reference graphlets on 3 and 4 vertices: edge lists labelled with orbits.
/// The labels must be constant on every automorphism orbit of edges.
pub(crate) const GRAPHLETS: [(usize, &[(usize, usize, Orbit)]); 8] = [
    (3, &[(0, 1, Orbit::Wedge), (1, 2, Orbit::Wedge)]),
    (
        3,
        &[(0, 1, Orbit::Triangle), (0, 2, Orbit::Triangle), (1, 2, Orbit::Triangle)],
    ),
    (
        4,
        &[(0, 1, Orbit::PathEnd), (1, 2, Orbit::PathMiddle), (2, 3, Orbit::PathEnd)],
    ),
    (4, &[(0, 1, Orbit::Star), (0, 2, Orbit::Star), (0, 3, Orbit::Star)]),
    (
        4,
        &[
            (0, 1, Orbit::Cycle),
            (1, 2, Orbit::Cycle),
            (2, 3, Orbit::Cycle),
            (0, 3, Orbit::Cycle),
        ],
    ),
    (
        4,
        &[
            (0, 1, Orbit::TailedTriangleOpposite),
            (0, 2, Orbit::TailedTriangleInner),
            (1, 2, Orbit::TailedTriangleInner),
            (2, 3, Orbit::TailedTriangleTail),
        ],
    ),
    (
        4,
        &[
            (0, 1, Orbit::DiamondChord),
            (0, 2, Orbit::DiamondCycle),
            (0, 3, Orbit::DiamondCycle),
            (1, 2, Orbit::DiamondCycle),
            (1, 3, Orbit::DiamondCycle),
        ],
    ),
    (
        4,
        &[
            (0, 1, Orbit::Clique),
            (0, 2, Orbit::Clique),
            (0, 3, Orbit::Clique),
            (1, 2, Orbit::Clique),
            (1, 3, Orbit::Clique),
            (2, 3, Orbit::Clique),
        ],
    ),
];

pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

type Adjacency4 = [[bool; 4]; 4];

fn reference_adjacency(k: usize, edges: &[(usize, usize, Orbit)]) -> (Adjacency4, Adjacency4Orbits) {
    let mut adj = [[false; 4]; 4];
    let mut orbit = [[None; 4]; 4];
    for &(a, b, o) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
        orbit[a][b] = Some(o);
        orbit[b][a] = Some(o);
    }
    debug_assert!(edges.iter().all(|&(a, b, _)| a < k && b < k));
    (adj, orbit)
}

type Adjacency4Orbits = [[Option<Orbit>; 4]; 4];

/// Enumerates every connected induced subgraph on 2–4 vertices, matches it
/// against the reference graphlets by trying all vertex permutations, and
/// credits each of its edges with the orbit of its image. Exponential; for
/// tests on graphs with at most `cap` nodes.
pub fn brute_force_orbit_counts(g: &Graph, cap: usize) -> Result<EdgeOrbitCounts> {
    let n = g.num_nodes();
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let refs: Vec<_> = GRAPHLETS
        .iter()
        .map(|&(k, edges)| (k, edges.len(), reference_adjacency(k, edges)))
        .collect();
    let perms = [permutations(3), permutations(4)];
    let mut rows = vec![[0u64; NUM_ORBITS]; g.num_edges()];
    for row in rows.iter_mut() {
        row[Orbit::Edge.index()] = 1;
    }

    let mut credit = |nodes: &[NodeId]| {
        let k = nodes.len();
        let mut adj = [[false; 4]; 4];
        let mut m = 0;
        for a in 0..k {
            for b in a + 1..k {
                if g.has_edge(nodes[a], nodes[b]) {
                    adj[a][b] = true;
                    adj[b][a] = true;
                    m += 1;
                }
            }
        }
        for (rk, rm, (radj, rorb)) in &refs {
            if *rk != k || *rm != m {
                continue;
            }
            let iso = perms[k - 3].iter().find(|p| {
                (0..k).all(|a| (0..k).all(|b| a == b || adj[a][b] == radj[p[a]][p[b]]))
            });
            if let Some(p) = iso {
                for a in 0..k {
                    for b in a + 1..k {
                        if adj[a][b] {
                            let e = g.edge_index(nodes[a], nodes[b]).unwrap();
                            let o = rorb[p[a]][p[b]].unwrap();
                            rows[e][o.index()] += 1;
                        }
                    }
                }
                return;
            }
        }
    };

    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                credit(&[a, b, c]);
                for d in c + 1..n {
                    credit(&[a, b, c, d]);
                }
            }
        }
    }
    Ok(EdgeOrbitCounts {
        rows,
        graph_fingerprint: g.fingerprint(),
    })
}

/// Number of node-feature columns: per-orbit base value plus sum, mean and
/// max over neighbors.
pub const NODE_FEATURE_WIDTH: usize = 4 * NUM_ORBITS;

/// Node attributes built from orbit counts.
///
/// Column layout: `[base(13) | sum(13) | mean(13) | max(13)]` where base is
/// the node's per-orbit motif degree (sum over incident edges) and the other
/// blocks aggregate the neighbors' base values. Every column is scaled to
/// unit Euclidean norm (all-zero columns stay zero).
pub fn node_motif_features(g: &Graph, counts: &EdgeOrbitCounts) -> Result<DMatrix<f64>> {
    counts.check(g)?;
    let n = g.num_nodes();
    let base = motif_degree_table(g, counts);
    let mut x = DMatrix::zeros(n, NODE_FEATURE_WIDTH);
    for u in 0..n {
        let nbrs = g.neighbors(u);
        for t in 0..NUM_ORBITS {
            x[(u, t)] = base[u][t];
            if nbrs.is_empty() {
                continue;
            }
            let (mut sum, mut max) = (0.0, f64::NEG_INFINITY);
            for &v in nbrs {
                sum += base[v][t];
                max = max.max(base[v][t]);
            }
            x[(u, NUM_ORBITS + t)] = sum;
            x[(u, 2 * NUM_ORBITS + t)] = sum / nbrs.len() as f64;
            x[(u, 3 * NUM_ORBITS + t)] = max;
        }
    }
    Ok(normalize_columns(x))
}

/// Per-node sum of each orbit's counts over incident edges.
pub fn motif_degree_table(g: &Graph, counts: &EdgeOrbitCounts) -> Vec<[f64; NUM_ORBITS]> {
    (0..g.num_nodes())
        .map(|u| {
            let mut acc = [0.0; NUM_ORBITS];
            for &e in g.incident_edges(u) {
                for (a, &c) in acc.iter_mut().zip(counts.row(e)) {
                    *a += c as f64;
                }
            }
            acc
        })
        .collect()
}
