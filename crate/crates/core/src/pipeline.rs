//! Local k-step embeddings, their concatenation, and the global embedding.

use std::fmt;
use std::ops::Range;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorize::{
    ccd_factorize, normalize_columns, randomized_low_rank, CcdConfig, FactorizeConfig,
    FactorizeMethod,
};
use crate::graph::Graph;
use crate::linop::{KStepOperator, LinearOperator};
use crate::motif::{
    apply_psi, build_motif_weight_matrix, MotifMatrixKind, MotifWeightedGraph,
    DEFAULT_MATERIALIZE_CAP,
};
use crate::orbits::{count_edge_orbits, node_motif_features, EdgeOrbitCounts, Orbit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionVariant {
    /// `X̄⁽ˢ⁾ = S⁽ˢ⁾ X̄⁽ˢ⁻¹⁾` with the pipeline's motif matrix kind.
    LinearPsi,
    /// `X̄⁽ˢ⁾ = P X̄⁽ˢ⁻¹⁾`.
    TransitionWalk,
    /// `X̄⁽ˢ⁾ = (1 − θ) L̂ X̄⁽ˢ⁻¹⁾ + θ X`.
    NormalizedLaplacianTheta { theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    pub variant: DiffusionVariant,
    /// `None` diffuses for as many steps as the pipeline's K.
    pub steps: Option<usize>,
    /// Orbits whose motif graphs carry the diffusion.
    pub orbits: Vec<Orbit>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            variant: DiffusionVariant::LinearPsi,
            steps: None,
            orbits: vec![Orbit::Edge],
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orbits.is_empty() {
            return Err(Error::InvalidConfig("diffusion needs at least one orbit".into()));
        }
        if self.steps == Some(0) {
            return Err(Error::InvalidConfig("diffusion needs at least one step".into()));
        }
        if let DiffusionVariant::NormalizedLaplacianTheta { theta } = self.variant {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "diffusion theta must lie in (0, 1], got {theta}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub orbits: Vec<Orbit>,
    /// Largest step count K; blocks are produced for k = 1..=K.
    pub steps: usize,
    pub local_rank: usize,
    pub dim: usize,
    pub kind: MotifMatrixKind,
    pub delta: u64,
    pub diffusion: Option<DiffusionConfig>,
    pub local_method: FactorizeMethod,
    pub global_method: FactorizeMethod,
    pub oversampling: usize,
    pub power_iterations: usize,
    pub ccd: CcdConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            orbits: Orbit::ALL.to_vec(),
            steps: 2,
            local_rank: 16,
            dim: 128,
            kind: MotifMatrixKind::WeightedGraph,
            delta: 1,
            diffusion: None,
            local_method: FactorizeMethod::RandomizedSvd,
            global_method: FactorizeMethod::Ccd,
            oversampling: 10,
            power_iterations: 2,
            ccd: CcdConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orbits.is_empty() {
            return Err(Error::InvalidConfig("at least one orbit is required".into()));
        }
        if self.steps == 0 || self.local_rank == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("K, D_local and D must all be >= 1".into()));
        }
        if self.delta == 0 {
            return Err(Error::InvalidConfig("delta must be at least 1".into()));
        }
        if let Some(d) = &self.diffusion {
            d.validate()?;
        }
        Ok(())
    }

    fn factorize_config(&self, rank: usize, method: FactorizeMethod, seed: u64) -> FactorizeConfig {
        FactorizeConfig {
            rank,
            oversampling: self.oversampling,
            power_iterations: self.power_iterations,
            method,
            ccd: self.ccd,
            seed,
        }
    }
}

impl fmt::Display for PipelineConfig {
    /// `key=value` lines; the same keys the CLI config file accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let orbits: Vec<String> = self.orbits.iter().map(|o| o.to_string()).collect();
        writeln!(f, "orbits={}", orbits.join(","))?;
        writeln!(f, "k={}", self.steps)?;
        writeln!(f, "dl={}", self.local_rank)?;
        writeln!(f, "d={}", self.dim)?;
        writeln!(f, "kind={}", self.kind)?;
        writeln!(f, "delta={}", self.delta)?;
        let diffusion = match &self.diffusion {
            None => "none".to_string(),
            Some(d) => match d.variant {
                DiffusionVariant::LinearPsi => "linear".to_string(),
                DiffusionVariant::TransitionWalk => "transition".to_string(),
                DiffusionVariant::NormalizedLaplacianTheta { theta } => format!("theta:{theta}"),
            },
        };
        writeln!(f, "diffusion={diffusion}")?;
        if let Some(d) = &self.diffusion {
            let steps = d.steps.unwrap_or(self.steps);
            let orbits: Vec<String> = d.orbits.iter().map(|o| o.to_string()).collect();
            writeln!(f, "diffusion_steps={steps}")?;
            writeln!(f, "diffusion_orbits={}", orbits.join(","))?;
        }
        writeln!(f, "local_method={}", self.local_method)?;
        writeln!(f, "global_method={}", self.global_method)?;
        writeln!(f, "oversampling={}", self.oversampling)?;
        writeln!(f, "power_iterations={}", self.power_iterations)?;
        writeln!(
            f,
            "ccd_reg={}\nccd_max_sweeps={}\nccd_tol={}",
            self.ccd.reg, self.ccd.max_sweeps, self.ccd.tol
        )?;
        write!(f, "seed={}", self.seed)
    }
}

impl PipelineConfig {
    /// Applies one `key=value` setting, using the keys written by `Display`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("invalid value {value:?} for {key}")))
        }
        let value = value.trim();
        match key.trim() {
            "orbits" => self.orbits = parse_orbits(value)?,
            "k" => self.steps = num(key, value)?,
            "dl" => self.local_rank = num(key, value)?,
            "d" => self.dim = num(key, value)?,
            "kind" => self.kind = value.parse()?,
            "delta" => self.delta = num(key, value)?,
            "diffusion" => {
                let old = self.diffusion.take().unwrap_or_default();
                self.diffusion = parse_diffusion(value)?.map(|variant| DiffusionConfig { variant, ..old });
            }
            "diffusion_steps" => {
                let steps = num(key, value)?;
                self.diffusion.get_or_insert_with(Default::default).steps = Some(steps);
            }
            "diffusion_orbits" => {
                let orbits = parse_orbits(value)?;
                self.diffusion.get_or_insert_with(Default::default).orbits = orbits;
            }
            "local_method" => self.local_method = value.parse()?,
            "global_method" => self.global_method = value.parse()?,
            "oversampling" => self.oversampling = num(key, value)?,
            "power_iterations" => self.power_iterations = num(key, value)?,
            "ccd_reg" => self.ccd.reg = num(key, value)?,
            "ccd_max_sweeps" => self.ccd.max_sweeps = num(key, value)?,
            "ccd_tol" => self.ccd.tol = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines on top of the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(key, value).map_err(|e| e.context(format!("line {}", idx + 1)))?;
        }
        Ok(cfg)
    }
}

/// `all`, or a comma-separated list such as `O1,O3,7`.
pub fn parse_orbits(s: &str) -> Result<Vec<Orbit>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Orbit::ALL.to_vec());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// `none`, `linear`, `transition` or `theta:<θ>`.
pub fn parse_diffusion(s: &str) -> Result<Option<DiffusionVariant>> {
    let s = s.trim().to_ascii_lowercase();
    Ok(match s.as_str() {
        "none" => None,
        "linear" => Some(DiffusionVariant::LinearPsi),
        "transition" => Some(DiffusionVariant::TransitionWalk),
        _ => {
            let theta = s
                .strip_prefix("theta:")
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("unknown diffusion {s:?}")))?;
            Some(DiffusionVariant::NormalizedLaplacianTheta { theta })
        }
    })
}

/// SplitMix64 finalizer over a combination of inputs; used to give every
/// factorization its own reproducible stream.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One column-normalized `N × D_ℓ` local embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBlock {
    pub orbit: Orbit,
    pub step: usize,
    pub embedding: DMatrix<f64>,
    pub achieved_rank: usize,
    /// The motif graph had no edges; the block is all zeros.
    pub empty: bool,
}

/// Factorizes `S_t^{(k)}` for every orbit and `k = 1..=K`, returned in
/// k-major order (all orbits for k = 1, then k = 2, ...).
pub fn local_embeddings(
    g: &Graph,
    counts: &EdgeOrbitCounts,
    cfg: &PipelineConfig,
) -> Result<Vec<LocalBlock>> {
    cfg.validate()?;
    let n = g.num_nodes();
    let rank = cfg.local_rank.min(n);
    if rank < cfg.local_rank {
        log::warn!(
            "local rank {} exceeds node count {n}; padding blocks with zero columns",
            cfg.local_rank
        );
    }
    let motifs = cfg
        .orbits
        .iter()
        .map(|&o| build_motif_weight_matrix(g, counts, o, cfg.delta))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, &MotifWeightedGraph)> = (1..=cfg.steps)
        .flat_map(|step| motifs.iter().map(move |w| (step, w)))
        .collect();
    jobs.par_iter()
        .map(|&(step, w)| local_block(w, step, rank, cfg))
        .collect()
}

fn local_block(
    w: &MotifWeightedGraph,
    step: usize,
    rank: usize,
    cfg: &PipelineConfig,
) -> Result<LocalBlock> {
    let n = w.num_nodes();
    let mut embedding = DMatrix::zeros(n, cfg.local_rank);
    if w.is_empty() {
        return Ok(LocalBlock {
            orbit: w.orbit(),
            step,
            embedding,
            achieved_rank: 0,
            empty: true,
        });
    }
    let seed = derive_seed(cfg.seed, w.orbit().id() as u64, step as u64);
    let fcfg = cfg.factorize_config(rank, cfg.local_method, seed);
    let op = KStepOperator::new(w, cfg.kind, step)?;
    let factors = match cfg.local_method {
        FactorizeMethod::RandomizedSvd => randomized_low_rank(&op, &fcfg)?,
        FactorizeMethod::Ccd if step == 1 => ccd_factorize(&apply_psi(w, cfg.kind), &fcfg)?,
        FactorizeMethod::Ccd => {
            if n > DEFAULT_MATERIALIZE_CAP {
                return Err(Error::MaterializeCapExceeded {
                    n,
                    cap: DEFAULT_MATERIALIZE_CAP,
                });
            }
            ccd_factorize(&op.to_dense(), &fcfg)?
        }
    };
    if factors.achieved_rank < rank {
        log::warn!(
            "{} k={step}: factorization reached rank {} of {rank}",
            w.orbit(),
            factors.achieved_rank
        );
    }
    let u = normalize_columns(factors.u);
    embedding.columns_mut(0, rank).copy_from(&u);
    Ok(LocalBlock {
        orbit: w.orbit(),
        step,
        embedding,
        achieved_rank: factors.achieved_rank,
        empty: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSource {
    Motif { orbit: Orbit, step: usize },
    Attributes,
}

impl fmt::Display for BlockSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSource::Motif { orbit, step } => write!(f, "{orbit}@k{step}"),
            BlockSource::Attributes => f.write_str("attributes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTag {
    pub source: BlockSource,
    pub columns: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcatenatedY {
    pub y: DMatrix<f64>,
    pub provenance: Vec<BlockTag>,
}

/// `Y = [U_1^{(1)} … U_T^{(1)} … U_1^{(K)} … U_T^{(K)} X̄]`, blocks in the
/// order given, attributes last.
pub fn concatenate(blocks: &[LocalBlock], attrs: Option<&DMatrix<f64>>) -> Result<ConcatenatedY> {
    let n = blocks
        .first()
        .map(|b| b.embedding.nrows())
        .or_else(|| attrs.map(|a| a.nrows()))
        .ok_or_else(|| Error::InvalidConfig("nothing to concatenate".into()))?;
    let parts: Vec<(BlockSource, &DMatrix<f64>)> = blocks
        .iter()
        .map(|b| {
            (
                BlockSource::Motif {
                    orbit: b.orbit,
                    step: b.step,
                },
                &b.embedding,
            )
        })
        .chain(attrs.map(|a| (BlockSource::Attributes, a)))
        .collect();
    for (_, m) in &parts {
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
    }
    let width = parts.iter().map(|(_, m)| m.ncols()).sum();
    let mut y = DMatrix::zeros(n, width);
    let mut provenance = Vec::with_capacity(parts.len());
    let mut at = 0;
    for (source, m) in parts {
        y.columns_mut(at, m.ncols()).copy_from(m);
        provenance.push(BlockTag {
            source,
            columns: at..at + m.ncols(),
        });
        at += m.ncols();
    }
    Ok(ConcatenatedY { y, provenance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEmbedding {
    /// `N × D`; row `i` embeds node `i`.
    pub z: DMatrix<f64>,
    /// `D × columns(Y)`.
    pub h: DMatrix<f64>,
    pub residual: f64,
}

/// Factorizes `Y ≈ Z H` at rank `dim`.
pub fn global_embedding(
    y: &ConcatenatedY,
    dim: usize,
    method: FactorizeMethod,
    ccd: CcdConfig,
    seed: u64,
) -> Result<GlobalEmbedding> {
    let cols = y.y.ncols();
    if dim > cols {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension {dim} exceeds the {cols} columns of Y"
        )));
    }
    let cfg = FactorizeConfig {
        rank: dim,
        method,
        ccd,
        seed,
        ..Default::default()
    };
    let factors = match method {
        FactorizeMethod::Ccd => ccd_factorize(&y.y, &cfg)?,
        FactorizeMethod::RandomizedSvd => randomized_low_rank(&y.y, &cfg)?,
    };
    let residual = factors
        .residual
        .unwrap_or_else(|| crate::factorize::relative_residual(&y.y, &factors));
    Ok(GlobalEmbedding {
        z: factors.u,
        h: factors.v,
        residual,
    })
}

/// Diffuses node attributes for `steps` steps over each of the config's
/// orbit graphs and returns `[X̄_1 X̄_2 …]` with unit-norm columns.
pub fn diffuse_attributes(
    g: &Graph,
    counts: &EdgeOrbitCounts,
    x: &DMatrix<f64>,
    dcfg: &DiffusionConfig,
    steps: usize,
    kind: MotifMatrixKind,
    delta: u64,
) -> Result<DMatrix<f64>> {
    dcfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidConfig("diffusion needs at least one step".into()));
    }
    let orbits = &dcfg.orbits;
    let n = g.num_nodes();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    let width = x.ncols();
    let mut out = DMatrix::zeros(n, width * orbits.len());
    for (slot, &orbit) in orbits.iter().enumerate() {
        let w = build_motif_weight_matrix(g, counts, orbit, delta)?;
        let mut cur = x.clone();
        for step in 1..=steps {
            cur = match dcfg.variant {
                DiffusionVariant::LinearPsi => KStepOperator::new(&w, kind, step)?.apply_block(&cur),
                DiffusionVariant::TransitionWalk => {
                    KStepOperator::new(&w, MotifMatrixKind::Transition, 1)?.apply_block(&cur)
                }
                DiffusionVariant::NormalizedLaplacianTheta { theta } => {
                    let l = KStepOperator::new(&w, MotifMatrixKind::NormalizedLaplacian, 1)?;
                    l.apply_block(&cur) * (1.0 - theta) + x * theta
                }
            };
        }
        out.columns_mut(slot * width, width).copy_from(&cur);
    }
    Ok(normalize_columns(out))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub counting: Duration,
    pub local: Duration,
    pub diffusion: Duration,
    pub global: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.counting + self.local + self.diffusion + self.global
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub y: ConcatenatedY,
    pub global: GlobalEmbedding,
    /// Global dimension actually used (clamped to the width of `Y`).
    pub dim: usize,
    pub empty_blocks: Vec<BlockSource>,
    pub timings: StageTimings,
}

/// Counts orbits and runs the whole pipeline.
pub fn embed(g: &Graph, cfg: &PipelineConfig) -> Result<Embedding> {
    let start = Instant::now();
    let counts = count_edge_orbits(g);
    let counting = start.elapsed();
    let mut out = embed_with_counts(g, &counts, cfg)?;
    out.timings.counting = counting;
    Ok(out)
}

pub fn embed_with_counts(
    g: &Graph,
    counts: &EdgeOrbitCounts,
    cfg: &PipelineConfig,
) -> Result<Embedding> {
    cfg.validate()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let blocks = local_embeddings(g, counts, cfg)?;
    timings.local = t.elapsed();

    let t = Instant::now();
    let attrs = match &cfg.diffusion {
        None => None,
        Some(d) => {
            let x = node_motif_features(g, counts)?;
            let steps = d.steps.unwrap_or(cfg.steps);
            Some(diffuse_attributes(g, counts, &x, d, steps, cfg.kind, cfg.delta)?)
        }
    };
    timings.diffusion = t.elapsed();

    let y = concatenate(&blocks, attrs.as_ref())?;
    let empty_blocks = blocks
        .iter()
        .filter(|b| b.empty)
        .map(|b| BlockSource::Motif {
            orbit: b.orbit,
            step: b.step,
        })
        .collect();

    let t = Instant::now();
    let dim = cfg.dim.min(y.y.ncols());
    if dim < cfg.dim {
        log::warn!(
            "embedding dimension {} clamped to the {} columns of Y",
            cfg.dim,
            y.y.ncols()
        );
    }
    let global = global_embedding(&y, dim, cfg.global_method, cfg.ccd, derive_seed(cfg.seed, 0, 0))?;
    timings.global = t.elapsed();

    Ok(Embedding {
        y,
        global,
        dim,
        empty_blocks,
        timings,
    })
}
