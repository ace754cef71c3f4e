//! Matrix-free access to k-step motif matrices.
//!
//! `W^k x` is computed as `k` sparse products, so a k-step operator costs at
//! most `k` times the base matvec plus `O(N)` for the diagonal scalings, and
//! no power of `W` is ever stored.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::motif::{MotifMatrixKind, MotifWeightedGraph};
use crate::sparse::CsrMatrix;

/// Anything that can multiply vectors by a matrix and its transpose.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64>;

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.nrows(), x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            let col = self.apply(xc.as_slice());
            yc.as_mut_slice().copy_from_slice(&col);
        }
        y
    }

    fn apply_transpose_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.ncols(), x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            let col = self.apply_transpose(xc.as_slice());
            yc.as_mut_slice().copy_from_slice(&col);
        }
        y
    }

    /// Dense copy obtained by applying the operator to the identity.
    fn to_dense(&self) -> DMatrix<f64> {
        self.apply_block(&DMatrix::identity(self.ncols(), self.ncols()))
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        CsrMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        CsrMatrix::ncols(self)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.transpose_matvec(x)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x)).data.into()
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        (self.tr_mul(&nalgebra::DVector::from_column_slice(x))).data.into()
    }
    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
    fn apply_transpose_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        // (xᵀA)ᵀ goes through the blocked gemm kernel; `tr_mul` does not.
        (x.transpose() * self).transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionOrder {
    /// `S = Ψ(W^k)`, degrees rebuilt from the row sums of `W^k`.
    PowerThenPsi,
    /// `S = Ψ(W)^k`.
    PsiThenPower,
}

impl CompositionOrder {
    /// Transition matrices are powered directly (powers stay row-stochastic);
    /// every other kind is applied to `W^k`. For the weighted graph the two
    /// orders coincide.
    pub fn default_for(kind: MotifMatrixKind) -> Self {
        match kind {
            MotifMatrixKind::Transition => CompositionOrder::PsiThenPower,
            _ => CompositionOrder::PowerThenPsi,
        }
    }
}

/// Implicit `S^{(k)}` for one motif graph.
#[derive(Debug, Clone)]
pub struct KStepOperator<'a> {
    base: &'a MotifWeightedGraph,
    kind: MotifMatrixKind,
    k: usize,
    order: CompositionOrder,
    /// Degrees used by Ψ: row sums of `W^k` (power first) or of `W`.
    degrees: Vec<f64>,
    inv_degrees: Vec<f64>,
    inv_sqrt_degrees: Vec<f64>,
}

impl<'a> KStepOperator<'a> {
    pub fn new(base: &'a MotifWeightedGraph, kind: MotifMatrixKind, k: usize) -> Result<Self> {
        Self::with_order(base, kind, k, CompositionOrder::default_for(kind))
    }

    pub fn with_order(
        base: &'a MotifWeightedGraph,
        kind: MotifMatrixKind,
        k: usize,
        order: CompositionOrder,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k-step operator needs k >= 1".into()));
        }
        let w = base.weights();
        let degrees = match order {
            CompositionOrder::PsiThenPower => w.row_sums(),
            CompositionOrder::PowerThenPsi => {
                let mut r = vec![1.0; w.nrows()];
                for _ in 0..k {
                    r = w.matvec(&r);
                }
                r
            }
        };
        let inv = |f: fn(f64) -> f64| -> Vec<f64> {
            degrees
                .iter()
                .map(|&d| if d > 0.0 { f(d) } else { 0.0 })
                .collect()
        };
        let inv_degrees = inv(f64::recip);
        let inv_sqrt_degrees = inv(|d| d.sqrt().recip());
        Ok(Self {
            base,
            kind,
            k,
            order,
            degrees,
            inv_degrees,
            inv_sqrt_degrees,
        })
    }

    pub fn kind(&self) -> MotifMatrixKind {
        self.kind
    }

    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> CompositionOrder {
        self.order
    }

    /// Row sums of the matrix Ψ is applied to (`W^k 1` or `W 1`).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    fn power(&self, x: &[f64], times: usize) -> Vec<f64> {
        let w = self.base.weights();
        let mut y = x.to_vec();
        for _ in 0..times {
            y = w.matvec(&y);
        }
        y
    }

    /// One application of Ψ around `a`, where `a` multiplies by the symmetric
    /// non-negative matrix whose row sums are `self.degrees`.
    fn psi<F: Fn(&[f64]) -> Vec<f64>>(&self, x: &[f64], transpose: bool, a: F) -> Vec<f64> {
        let scale = |s: &[f64], v: &[f64]| -> Vec<f64> { s.iter().zip(v).map(|(a, b)| a * b).collect() };
        let mask = |i: usize| if self.degrees[i] > 0.0 { 1.0 } else { 0.0 };
        match self.kind {
            MotifMatrixKind::WeightedGraph => a(x),
            MotifMatrixKind::Transition if transpose => a(&scale(&self.inv_degrees, x)),
            MotifMatrixKind::Transition => scale(&self.inv_degrees, &a(x)),
            MotifMatrixKind::Laplacian => {
                let ax = a(x);
                (0..x.len()).map(|i| self.degrees[i] * x[i] - ax[i]).collect()
            }
            MotifMatrixKind::NormalizedLaplacian => {
                let ax = a(&scale(&self.inv_sqrt_degrees, x));
                (0..x.len())
                    .map(|i| mask(i) * x[i] - self.inv_sqrt_degrees[i] * ax[i])
                    .collect()
            }
            MotifMatrixKind::RandomWalkLaplacian => {
                if transpose {
                    let ax = a(&scale(&self.inv_degrees, x));
                    (0..x.len()).map(|i| mask(i) * x[i] - ax[i]).collect()
                } else {
                    let ax = a(x);
                    (0..x.len())
                        .map(|i| mask(i) * x[i] - self.inv_degrees[i] * ax[i])
                        .collect()
                }
            }
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        let n = self.base.num_nodes();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn apply_impl(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        match self.order {
            CompositionOrder::PowerThenPsi => self.psi(x, transpose, |v| self.power(v, self.k)),
            CompositionOrder::PsiThenPower => {
                let mut y = x.to_vec();
                for _ in 0..self.k {
                    y = self.psi(&y, transpose, |v| self.power(v, 1));
                }
                y
            }
        }
    }

    /// `S^{(k)} x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.apply_impl(x, false))
    }

    /// `S^{(k)ᵀ} x`, using the symmetry of `W` (e.g. `Pᵀx = W(D⁻¹x)`).
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.apply_impl(x, true))
    }
}

impl LinearOperator for KStepOperator<'_> {
    fn nrows(&self) -> usize {
        self.base.num_nodes()
    }
    fn ncols(&self) -> usize {
        self.base.num_nodes()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.base.num_nodes(), "operator dimension mismatch");
        self.apply_impl(x, false)
    }
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.base.num_nodes(), "operator dimension mismatch");
        self.apply_impl(x, true)
    }
}
