//! End-to-end timing on Erdős–Rényi graphs of increasing size.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generators::erdos_renyi;
use crate::pipeline::{derive_seed, embed, PipelineConfig, StageTimings};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nodes: usize,
    pub edges: usize,
    pub stages: StageTimings,
    /// Wall time of the whole pipeline call.
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// First size that failed and why; later sizes were not attempted.
    pub failure: Option<(usize, String)>,
}

impl BenchReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("nodes\tedges\tcounting_s\tlocal_s\tdiffusion_s\tglobal_s\ttotal_s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.nodes,
                r.edges,
                r.stages.counting.as_secs_f64(),
                r.stages.local.as_secs_f64(),
                r.stages.diffusion.as_secs_f64(),
                r.stages.global.as_secs_f64(),
                r.total.as_secs_f64()
            );
        }
        if let Some((n, msg)) = &self.failure {
            let _ = writeln!(out, "# failed at n={n}: {msg}");
        }
        out
    }

    /// Least-squares slope of `ln total` against `ln nodes`.
    pub fn loglog_slope(&self) -> Option<f64> {
        if self.rows.len() < 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| ((r.nodes as f64).ln(), r.total.as_secs_f64().max(1e-9).ln()))
            .collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Runs the pipeline on `G(n, avg_degree / (n − 1))` for every size.
pub fn bench_scaling(
    sizes: &[usize],
    avg_degree: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("bench sizes must be ascending".into()));
    }
    if sizes.iter().any(|&n| n < 2) || avg_degree <= 0.0 {
        return Err(Error::InvalidConfig("bench needs n >= 2 and a positive degree".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    let mut failure = None;
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n as u64, 0));
        let p = (avg_degree / (n - 1) as f64).min(1.0);
        let g = erdos_renyi(n, p, &mut rng);
        let start = Instant::now();
        match embed(&g, cfg) {
            Ok(e) => {
                let total = start.elapsed();
                log::info!("bench n={n}: {:.3}s", total.as_secs_f64());
                rows.push(BenchRow {
                    nodes: n,
                    edges: g.num_edges(),
                    stages: e.timings,
                    total,
                });
            }
            Err(err) => {
                log::error!("bench n={n} failed: {err}");
                failure = Some((n, err.to_string()));
                break;
            }
        }
    }
    Ok(BenchReport { rows, failure })
}
