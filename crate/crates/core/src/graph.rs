//! Immutable undirected simple graphs in compressed adjacency form.
//!
//! Every edge is stored once as `(u, v)` with `u < v`; its [`EdgeId`] is its
//! position in the lexicographically sorted edge list. Adjacency lists are
//! sorted ascending and carry the id of the edge that connects each pair, so
//! orbit counts (indexed by edge) and matrix rows (indexed by node) can be
//! cross-referenced without hashing.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Input ids start at 1; a `0` token is rejected.
    pub one_indexed: bool,
    /// Skip the first non-comment line (MatrixMarket size line).
    pub skip_header: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    /// Parallel to `neighbors`: id of the edge joining the owner and the neighbor.
    incident: Vec<EdgeId>,
    edges: Vec<(NodeId, NodeId)>,
    labels: Vec<u64>,
    fingerprint: u64,
}

impl Graph {
    /// Builds a graph on `n` nodes labelled `0..n`. Self-loops are dropped and
    /// duplicate or reversed pairs collapse to one edge.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        Self::with_labels((0..n as u64).collect(), edges)
    }

    /// Like [`Graph::from_edges`] but with caller-supplied output labels, one per node.
    pub fn with_labels<I>(labels: Vec<u64>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let n = labels.len();
        let mut list = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u != v {
                list.push((u.min(v), u.max(v)));
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut degree = vec![0usize; n];
        for &(u, v) in &list {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0; 2 * list.len()];
        let mut incident = vec![0; 2 * list.len()];
        // Sorted edge order fills every list in ascending order: all smaller
        // neighbors (as `(w, x)` edges) precede all larger ones (as `(x, w)`).
        for (e, &(u, v)) in list.iter().enumerate() {
            neighbors[cursor[u]] = v;
            incident[cursor[u]] = e;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            incident[cursor[v]] = e;
            cursor[v] += 1;
        }

        let mut hasher = DefaultHasher::new();
        n.hash(&mut hasher);
        list.hash(&mut hasher);
        let fingerprint = hasher.finish();

        Ok(Self {
            offsets,
            neighbors,
            incident,
            edges: list,
            labels,
            fingerprint,
        })
    }

    /// Reads a whitespace-separated edge list. Lines starting with `%` or `#`
    /// are comments; tokens after the first two are ignored. Node ids are
    /// compacted to `0..N` in ascending order of their original value, and the
    /// original values are kept as labels.
    pub fn load_edge_list<R: BufRead>(source: R, opts: LoadOptions) -> Result<Self> {
        let mut raw = Vec::new();
        let mut header_pending = opts.skip_header;
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
                continue;
            }
            if header_pending {
                header_pending = false;
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let mut next_id = |what: &str| -> Result<u64> {
                let tok = tokens.next().ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("missing {what} node id"),
                })?;
                let id: u64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid node id {tok:?}"),
                })?;
                if opts.one_indexed && id == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "node id 0 in one-indexed input".into(),
                    });
                }
                Ok(id)
            };
            let u = next_id("source")?;
            let v = next_id("target")?;
            raw.push((u, v));
        }

        let mut labels: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
        labels.sort_unstable();
        labels.dedup();
        let index = |x: u64| labels.binary_search(&x).unwrap();
        let edges: Vec<_> = raw.iter().map(|&(u, v)| (index(u), index(v))).collect();
        let g = Self::with_labels(labels.clone(), edges)?;
        if g.num_edges() == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(g)
    }

    /// Writes the canonical edge list using original labels. Isolated nodes are
    /// written as self-loop lines so that reloading keeps them.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for &(u, v) in &self.edges {
            writeln!(out, "{} {}", self.labels[u], self.labels[v])?;
        }
        for u in 0..self.num_nodes() {
            if self.degree(u) == 0 {
                writeln!(out, "{} {}", self.labels[u], self.labels[u])?;
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes()).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    /// Sorted neighbors of `u`.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Edge ids aligned with [`Graph::neighbors`].
    pub fn incident_edges(&self, u: NodeId) -> &[EdgeId] {
        &self.incident[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }

    pub fn edge_index(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let pos = self.neighbors(u).binary_search(&v).ok()?;
        Some(self.incident_edges(u)[pos])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// N(u) ∩ N(v) by merging the two sorted lists.
    pub fn common_neighbors(&self, u: NodeId, v: NodeId) -> Vec<NodeId> {
        let (a, b) = (self.neighbors(u), self.neighbors(v));
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, u: NodeId) -> u64 {
        self.labels[u]
    }

    /// Hash of the node count and canonical edge list.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Graph with node `u` renamed to `perm[u]`; labels travel with their nodes.
    pub fn permuted(&self, perm: &[NodeId]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut labels = vec![0; n];
        for u in 0..n {
            labels[perm[u]] = self.labels[u];
        }
        Self::with_labels(labels, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    /// Same node set with only the listed edges kept.
    pub fn subgraph_with_edges(&self, keep: impl IntoIterator<Item = EdgeId>) -> Result<Self> {
        let edges: Vec<_> = keep.into_iter().map(|e| self.edges[e]).collect();
        Self::with_labels(self.labels.clone(), edges)
    }
}
