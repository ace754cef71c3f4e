//! Rank-`D` factorizations `S ≈ U V` under squared loss.
//!
//! Two solvers share one result type:
//!
//! * [`randomized_low_rank`] needs only products with `S` and `Sᵀ`, so it runs
//!   directly on implicit k-step operators. It is a randomized range finder
//!   with power iterations followed by a small dense SVD.
//! * [`ccd_factorize`] is cyclic coordinate descent on
//!   `½‖S − UV‖²_F + λ(‖U‖²_F + ‖V‖²_F)` for materialized matrices. Every
//!   scalar update is the exact minimizer given all other coordinates; the
//!   sweep is organised through the Gram matrices `UᵀU`, `VVᵀ` so the cost per
//!   sweep is two dense products with `S` plus `O((m + n) D²)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorizeMethod {
    RandomizedSvd,
    Ccd,
}

impl std::fmt::Display for FactorizeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FactorizeMethod::RandomizedSvd => "rsvd",
            FactorizeMethod::Ccd => "ccd",
        })
    }
}

impl std::str::FromStr for FactorizeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rsvd" => Ok(FactorizeMethod::RandomizedSvd),
            "ccd" => Ok(FactorizeMethod::Ccd),
            other => Err(Error::InvalidConfig(format!("unknown factorization method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdConfig {
    /// L2 penalty λ on both factors.
    pub reg: f64,
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the objective by less than this fraction.
    pub tol: f64,
}

impl Default for CcdConfig {
    fn default() -> Self {
        Self {
            reg: 1e-4,
            max_sweeps: 50,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizeConfig {
    pub rank: usize,
    pub oversampling: usize,
    pub power_iterations: usize,
    pub method: FactorizeMethod,
    pub ccd: CcdConfig,
    pub seed: u64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            oversampling: 10,
            power_iterations: 2,
            method: FactorizeMethod::RandomizedSvd,
            ccd: CcdConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    /// `m × rank`
    pub u: DMatrix<f64>,
    /// `rank × n`
    pub v: DMatrix<f64>,
    /// Number of numerically nonzero components; later columns of `u` and
    /// rows of `v` are zero.
    pub achieved_rank: usize,
    /// `‖S − UV‖_F / ‖S‖_F` when it can be computed without densifying `S`.
    pub residual: Option<f64>,
    /// Regularized objective after each CCD sweep (empty for the randomized solver).
    pub objective: Vec<f64>,
}

/// A matrix whose Frobenius norm is known.
pub trait MaterializedMatrix: LinearOperator {
    fn frobenius_norm_squared(&self) -> f64;
}

impl MaterializedMatrix for DMatrix<f64> {
    fn frobenius_norm_squared(&self) -> f64 {
        self.norm_squared()
    }
}

impl MaterializedMatrix for CsrMatrix {
    fn frobenius_norm_squared(&self) -> f64 {
        CsrMatrix::frobenius_norm_squared(self)
    }
}

/// Scales every nonzero column to unit Euclidean norm.
pub fn normalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    m
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Dispatches on `cfg.method`.
pub fn factorize<S: MaterializedMatrix + ?Sized>(s: &S, cfg: &FactorizeConfig) -> Result<LowRankFactors> {
    match cfg.method {
        FactorizeMethod::RandomizedSvd => randomized_low_rank(s, cfg),
        FactorizeMethod::Ccd => ccd_factorize(s, cfg),
    }
}

/// Randomized rank-`cfg.rank` factorization from matvecs only.
///
/// `U` carries the singular values (`U = QŨΣ`), so `UV` approximates `S`
/// directly. Oversampling is clipped to the matrix size. When the range is
/// numerically smaller than the requested rank, the surplus columns are zero
/// and `achieved_rank` reports the true size.
pub fn randomized_low_rank<A: LinearOperator + ?Sized>(
    op: &A,
    cfg: &FactorizeConfig,
) -> Result<LowRankFactors> {
    let (m, n) = (op.nrows(), op.ncols());
    let rank = cfg.rank;
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidConfig(format!(
            "rank {rank} not in 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let width = (rank + cfg.oversampling).min(m.min(n));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let omega = DMatrix::from_fn(n, width, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormal_basis(op.apply_block(&omega));
    for _ in 0..cfg.power_iterations {
        let z = orthonormal_basis(op.apply_transpose_block(&q));
        q = orthonormal_basis(op.apply_block(&z));
    }
    // B = SᵀQ, so QᵀS = Bᵀ = V_b Σ U_bᵀ.
    let b = op.apply_transpose_block(&q);
    let svd = b.svd(true, true);
    let (ub, vbt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let top = sigma[order[0]];
    let cutoff = top * 1e-10;

    let mut u = DMatrix::zeros(m, rank);
    let mut v = DMatrix::zeros(rank, n);
    let mut achieved = 0;
    for (slot, &idx) in order.iter().take(rank).enumerate() {
        let s = sigma[idx];
        if !(s > cutoff) || top == 0.0 {
            break;
        }
        achieved += 1;
        // Column idx of V_b, as a column of the m-dim left factor via Q.
        let left = &q * vbt.row(idx).transpose();
        u.set_column(slot, &(left * s));
        v.set_row(slot, &ub.column(idx).transpose());
    }
    if achieved < rank {
        log::debug!("randomized factorization reached rank {achieved} of {rank}");
    }
    Ok(LowRankFactors {
        u,
        v,
        achieved_rank: achieved,
        residual: None,
        objective: Vec::new(),
    })
}

/// Cyclic coordinate descent on `½‖S − UV‖² + λ(‖U‖² + ‖V‖²)`.
///
/// `U` starts i.i.d. uniform in `±0.5/√rank` (seeded) and `V` at zero; each
/// sweep updates all of `V`, then all of `U`. A coordinate whose curvature is
/// zero (possible only with `λ = 0`) is set to zero.
pub fn ccd_factorize<S: MaterializedMatrix + ?Sized>(
    s: &S,
    cfg: &FactorizeConfig,
) -> Result<LowRankFactors> {
    let (m, n) = (s.nrows(), s.ncols());
    let rank = cfg.rank;
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let CcdConfig { reg, max_sweeps, tol } = cfg.ccd;
    if reg < 0.0 {
        return Err(Error::InvalidConfig("CCD regularization must be >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / (rank as f64).sqrt();
    let mut u = DMatrix::from_fn(m, rank, |_, _| rng.random_range(-bound..=bound));
    let mut v = DMatrix::<f64>::zeros(rank, n);
    let s_norm2 = s.frobenius_norm_squared();

    let gram = |m: &DMatrix<f64>| m.transpose() * m;
    let mut history = Vec::new();
    let mut fit = s_norm2;
    let mut gram_u = gram(&u);
    for _ in 0..max_sweeps.max(1) {
        // V given U: columns are independent, coordinates within a column cyclic.
        let ust = s.apply_transpose_block(&u).transpose();
        coordinate_pass(v.as_mut_slice(), ust.as_slice(), gram_u.as_slice(), rank, reg);

        // U given V, row by row on the transposed copy for contiguous access.
        let gram_v = &v * v.transpose();
        let svt = s.apply_block(&v.transpose());
        let mut ut = u.transpose();
        coordinate_pass(ut.as_mut_slice(), svt.transpose().as_slice(), gram_v.as_slice(), rank, reg);
        u = ut.transpose();

        // ‖S − UV‖² = ‖S‖² − 2⟨U, SVᵀ⟩ + ⟨UᵀU, VVᵀ⟩
        gram_u = gram(&u);
        fit = (s_norm2 - 2.0 * u.dot(&svt) + gram_u.dot(&gram_v)).max(0.0);
        let objective = 0.5 * fit + reg * (u.norm_squared() + v.norm_squared());
        let done = history
            .last()
            .is_some_and(|&prev: &f64| prev - objective <= tol * prev.abs());
        history.push(objective);
        if done {
            break;
        }
    }

    let residual = if s_norm2 > 0.0 { (fit / s_norm2).sqrt() } else { 0.0 };
    let achieved_rank = (0..rank)
        .filter(|&d| u.column(d).norm() * v.row(d).norm() > 0.0)
        .count();
    Ok(LowRankFactors {
        u,
        v,
        achieved_rank,
        residual: Some(residual),
        objective: history,
    })
}

/// Unrolled dot product with a fixed summation order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// One cyclic pass over every `rank`-long column of `x` (column-major),
/// minimizing `½ xᵀGx − rhsᵀx + λ‖x‖²` one coordinate at a time.
fn coordinate_pass(x: &mut [f64], rhs: &[f64], gram: &[f64], rank: usize, reg: f64) {
    for (col, b) in x.chunks_exact_mut(rank).zip(rhs.chunks_exact(rank)) {
        for d in 0..rank {
            let g = &gram[d * rank..(d + 1) * rank];
            let cross = dot(g, col) - g[d] * col[d];
            let den = g[d] + 2.0 * reg;
            col[d] = if den > 0.0 { (b[d] - cross) / den } else { 0.0 };
        }
    }
}

/// `‖S − UV‖_F / ‖S‖_F` against a dense `S` (0 when `S = 0`).
pub fn relative_residual(s: &DMatrix<f64>, f: &LowRankFactors) -> f64 {
    let norm = s.norm();
    let err = (s - &f.u * &f.v).norm();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}
