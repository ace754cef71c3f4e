//! Motif-weighted matrices and the motif matrix functions Ψ.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linop::{CompositionOrder, KStepOperator, LinearOperator};
use crate::orbits::{EdgeOrbitCounts, Orbit};
use crate::sparse::CsrMatrix;

/// Sparse symmetric matrix whose `(i, j)` entry is the number of times edge
/// `(i, j)` takes part in `orbit`, kept only when that count reaches `delta`.
#[derive(Debug, Clone)]
pub struct MotifWeightedGraph {
    weights: CsrMatrix,
    orbit: Orbit,
    delta: u64,
}

impl MotifWeightedGraph {
    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn orbit(&self) -> Orbit {
        self.orbit
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.nrows()
    }

    /// No edge survived the threshold.
    pub fn is_empty(&self) -> bool {
        self.weights.nnz() == 0
    }

    pub fn nnz(&self) -> usize {
        self.weights.nnz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotifMatrixKind {
    /// `Ψ(W) = W`
    WeightedGraph,
    /// `Ψ(W) = D⁻¹W`
    Transition,
    /// `Ψ(W) = D − W`
    Laplacian,
    /// `Ψ(W) = I − D^{-1/2} W D^{-1/2}`
    NormalizedLaplacian,
    /// `Ψ(W) = I − D⁻¹W`
    RandomWalkLaplacian,
}

impl MotifMatrixKind {
    pub const ALL: [MotifMatrixKind; 5] = [
        MotifMatrixKind::WeightedGraph,
        MotifMatrixKind::Transition,
        MotifMatrixKind::Laplacian,
        MotifMatrixKind::NormalizedLaplacian,
        MotifMatrixKind::RandomWalkLaplacian,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            MotifMatrixKind::WeightedGraph => "w",
            MotifMatrixKind::Transition => "p",
            MotifMatrixKind::Laplacian => "l",
            MotifMatrixKind::NormalizedLaplacian => "lnorm",
            MotifMatrixKind::RandomWalkLaplacian => "lrw",
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(
            self,
            MotifMatrixKind::Transition | MotifMatrixKind::RandomWalkLaplacian
        )
    }
}

impl fmt::Display for MotifMatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MotifMatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotifMatrixKind::ALL
            .into_iter()
            .find(|k| k.short_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown matrix kind {s:?}")))
    }
}

/// Builds `W_t` for one orbit. An empty result is valid and logged; callers
/// decide how to treat it.
pub fn build_motif_weight_matrix(
    g: &Graph,
    counts: &EdgeOrbitCounts,
    orbit: Orbit,
    delta: u64,
) -> Result<MotifWeightedGraph> {
    counts.check(g)?;
    if delta == 0 {
        return Err(Error::InvalidConfig("delta must be at least 1".into()));
    }
    let rows = (0..g.num_nodes())
        .map(|u| {
            g.neighbors(u)
                .iter()
                .zip(g.incident_edges(u))
                .filter_map(|(&v, &e)| {
                    let c = counts.get(e, orbit);
                    (c >= delta).then_some((v, c as f64))
                })
                .collect()
        })
        .collect();
    let weights = CsrMatrix::from_rows(g.num_nodes(), rows);
    if weights.nnz() == 0 {
        log::warn!("motif graph for {orbit} with delta={delta} is empty");
    }
    Ok(MotifWeightedGraph {
        weights,
        orbit,
        delta,
    })
}

/// Row sums `w_i = Σ_j W_ij`.
pub fn motif_degrees(w: &MotifWeightedGraph) -> Vec<f64> {
    w.weights.row_sums()
}

/// Materializes `Ψ(W)` as a sparse matrix.
///
/// Nodes with zero motif degree get an all-zero row in every kind: the
/// transition matrix gets no self-loop and both normalized Laplacians put `0`
/// rather than `1` on their diagonal.
pub fn apply_psi(w: &MotifWeightedGraph, kind: MotifMatrixKind) -> CsrMatrix {
    let a = &w.weights;
    let deg = a.row_sums();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
        .collect();
    let rows = (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let di = deg[i];
            let off = cols.iter().zip(vals).map(|(&j, &v)| {
                let s = match kind {
                    MotifMatrixKind::WeightedGraph => v,
                    MotifMatrixKind::Transition => v / di,
                    MotifMatrixKind::Laplacian => -v,
                    MotifMatrixKind::NormalizedLaplacian => -v * inv_sqrt[i] * inv_sqrt[j],
                    MotifMatrixKind::RandomWalkLaplacian => -v / di,
                };
                (j, s)
            });
            let diag = match kind {
                MotifMatrixKind::WeightedGraph | MotifMatrixKind::Transition => None,
                MotifMatrixKind::Laplacian => Some(di),
                MotifMatrixKind::NormalizedLaplacian | MotifMatrixKind::RandomWalkLaplacian => {
                    Some(if di > 0.0 { 1.0 } else { 0.0 })
                }
            };
            let mut row: Vec<(usize, f64)> = off.collect();
            if let Some(d) = diag.filter(|&d| d != 0.0) {
                let pos = row.partition_point(|&(j, _)| j < i);
                row.insert(pos, (i, d));
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(a.ncols(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumulationMode {
    /// `(1/K) Σ_{ℓ=1..K} Ψ(W)^ℓ` (gives `W̄` for the weighted graph, `P̄` for transitions).
    AveragePowers,
    /// `(1/K) Σ_{ℓ=1..K} α^ℓ S^{(ℓ)}` with `S^{(ℓ)}` the kind's ℓ-step matrix.
    DecayedPsiSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulationSpec {
    pub steps: usize,
    pub alpha: f64,
    pub mode: AccumulationMode,
}

impl AccumulationSpec {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("accumulation needs K >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Largest node count [`accumulate`] will densify by default.
pub const DEFAULT_MATERIALIZE_CAP: usize = 20_000;

/// Dense accumulated motif matrix. Each ℓ-step term is materialized column by
/// column through the implicit operator, so no dense power is ever formed.
pub fn accumulate(
    w: &MotifWeightedGraph,
    kind: MotifMatrixKind,
    spec: AccumulationSpec,
    cap: usize,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = w.num_nodes();
    if n > cap {
        return Err(Error::MaterializeCapExceeded { n, cap });
    }
    let mut total = DMatrix::zeros(n, n);
    for step in 1..=spec.steps {
        let (order, scale) = match spec.mode {
            AccumulationMode::AveragePowers => (CompositionOrder::PsiThenPower, 1.0),
            AccumulationMode::DecayedPsiSum => (
                CompositionOrder::default_for(kind),
                spec.alpha.powi(step as i32),
            ),
        };
        let op = KStepOperator::with_order(w, kind, step, order)?;
        total += op.to_dense() * scale;
    }
    Ok(total / spec.steps as f64)
}
