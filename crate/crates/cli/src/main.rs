use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hone::bench::bench_scaling;
use hone::eval::{run_experiment, EvalConfig};
use hone::factorize::FactorizeMethod;
use hone::linop::{KStepOperator, LinearOperator};
use hone::motif::{apply_psi, build_motif_weight_matrix, DEFAULT_MATERIALIZE_CAP};
use hone::orbits::{count_edge_orbits, Orbit};
use hone::pipeline::{embed, parse_diffusion, parse_orbits, DiffusionConfig, PipelineConfig};
use hone::{Graph, LoadOptions, MotifMatrixKind};

const SEED_ENV: &str = "HONE_SEED";

/// Higher-order network embeddings from edge-orbit motif matrices.
#[derive(Parser, Debug)]
#[command(name = "hone", version)]
struct Cli {
    /// Base random seed; the HONE_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for counting and matrix products.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-edge counts of the 13 edge orbits, as TSV.
    CountOrbits {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export one motif matrix in MatrixMarket coordinate format.
    MotifMatrix {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        orbit: Orbit,
        #[arg(long, default_value = "w")]
        kind: MotifMatrixKind,
        #[arg(long, default_value_t = 1)]
        delta: u64,
        /// Step count; k > 1 materializes the k-step matrix densely.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute node embeddings and write them as TSV.
    Embed {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        k: Option<usize>,
        /// Output for Z (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the concatenated local embeddings Y here.
        #[arg(long)]
        y_out: Option<PathBuf>,
    },
    /// Run the link-prediction protocol and write a per-seed AUC report.
    Linkpred {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// `auto` searches K in 1..=4; a number fixes K.
        #[arg(long, default_value = "auto")]
        k: String,
        /// Number of seeds, counted up from the base seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the pipeline on Erdős–Rényi graphs of increasing size.
    Bench {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        avg_degree: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Whitespace-separated edge list.
    #[arg(long)]
    input: PathBuf,
    /// Node ids start at 1.
    #[arg(long)]
    one_indexed: bool,
    /// Skip the first non-comment line.
    #[arg(long)]
    skip_header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Graph> {
        let file = File::open(&self.input)
            .with_context(|| format!("cannot open input {}", self.input.display()))?;
        let opts = LoadOptions {
            one_indexed: self.one_indexed,
            skip_header: self.skip_header,
        };
        let g = Graph::load_edge_list(BufReader::new(file), opts)
            .with_context(|| format!("cannot parse {}", self.input.display()))?;
        log::info!(
            "loaded {}: {} nodes, {} edges",
            self.input.display(),
            g.num_nodes(),
            g.num_edges()
        );
        Ok(g)
    }

    fn header(&self) -> Vec<String> {
        vec![
            format!("input={}", self.input.display()),
            format!("one_indexed={}", self.one_indexed),
            format!("skip_header={}", self.skip_header),
        ]
    }
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// key=value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `all` or a list such as O1,O3,O13.
    #[arg(long)]
    orbits: Option<String>,
    #[arg(long)]
    kind: Option<MotifMatrixKind>,
    #[arg(long)]
    delta: Option<u64>,
    /// Local embedding rank.
    #[arg(long)]
    dl: Option<usize>,
    /// Global embedding dimension.
    #[arg(long)]
    d: Option<usize>,
    /// none, linear, transition or theta:<θ>.
    #[arg(long)]
    diffusion: Option<String>,
    #[arg(long)]
    diffusion_steps: Option<usize>,
    #[arg(long)]
    diffusion_orbits: Option<String>,
    #[arg(long)]
    local_method: Option<FactorizeMethod>,
    #[arg(long)]
    global_method: Option<FactorizeMethod>,
}

impl PipelineArgs {
    fn resolve(&self, k: Option<usize>, seed: Option<u64>) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                PipelineConfig::from_kv(&text)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.orbits {
            cfg.orbits = parse_orbits(v)?;
        }
        if let Some(v) = self.kind {
            cfg.kind = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.dl {
            cfg.local_rank = v;
        }
        if let Some(v) = self.d {
            cfg.dim = v;
        }
        if let Some(v) = &self.diffusion {
            cfg.diffusion = parse_diffusion(v)?.map(|variant| DiffusionConfig {
                variant,
                ..cfg.diffusion.take().unwrap_or_default()
            });
        }
        if let Some(v) = self.diffusion_steps {
            cfg.diffusion.get_or_insert_with(Default::default).steps = Some(v);
        }
        if let Some(v) = &self.diffusion_orbits {
            cfg.diffusion.get_or_insert_with(Default::default).orbits = parse_orbits(v)?;
        }
        if let Some(v) = self.local_method {
            cfg.local_method = v;
        }
        if let Some(v) = self.global_method {
            cfg.global_method = v;
        }
        if let Some(v) = k {
            cfg.steps = v;
        }
        if let Some(v) = seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `HONE_SEED` wins over `--seed`.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let seed = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
            Ok(Some(seed))
        }
        _ => Ok(flag),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_header(out: &mut dyn Write, command: &str, lines: &[String]) -> io::Result<()> {
    writeln!(out, "# hone {command}")?;
    for line in lines {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_matrix_tsv(out: &mut dyn Write, g: &Graph, m: &hone::DMatrix<f64>) -> io::Result<()> {
    for i in 0..m.nrows() {
        write!(out, "{}", g.label(i))?;
        for v in m.row(i).iter() {
            write!(out, "\t{}", fmt_float(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = resolve_seed(cli.seed)?;
    let mut common = vec![format!("workers={}", cli.workers)];
    match cli.command {
        Command::CountOrbits { input, out } => {
            let g = input.load()?;
            let counts = count_edge_orbits(&g);
            let mut w = open_output(out.as_deref())?;
            common.extend(input.header());
            write_header(&mut *w, "count-orbits", &common)?;
            let names: Vec<String> = Orbit::ALL.iter().map(|o| o.to_string()).collect();
            writeln!(w, "u\tv\t{}", names.join("\t"))?;
            for (e, &(u, v)) in g.edges().iter().enumerate() {
                let row: Vec<String> = counts.row(e).iter().map(|c| c.to_string()).collect();
                writeln!(w, "{}\t{}\t{}", g.label(u), g.label(v), row.join("\t"))?;
            }
            w.flush()?;
        }
        Command::MotifMatrix {
            input,
            orbit,
            kind,
            delta,
            k,
            out,
        } => {
            let g = input.load()?;
            let counts = count_edge_orbits(&g);
            let w_t = build_motif_weight_matrix(&g, &counts, orbit, delta)?;
            let n = g.num_nodes();
            let entries: Vec<(usize, usize, f64)> = if k <= 1 {
                apply_psi(&w_t, kind).triplets().collect()
            } else {
                if n > DEFAULT_MATERIALIZE_CAP {
                    bail!("k={k} needs a dense {n}x{n} matrix; limit is {DEFAULT_MATERIALIZE_CAP} nodes");
                }
                let dense = KStepOperator::new(&w_t, kind, k)?.to_dense();
                let mut v = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        if dense[(i, j)] != 0.0 {
                            v.push((i, j, dense[(i, j)]));
                        }
                    }
                }
                v
            };
            let mut w = open_output(out.as_deref())?;
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            common.extend(input.header());
            common.extend([
                format!("orbit={orbit}"),
                format!("kind={kind}"),
                format!("delta={delta}"),
                format!("k={k}"),
            ]);
            for line in &common {
                writeln!(w, "% {line}")?;
            }
            writeln!(w, "{n} {n} {}", entries.len())?;
            for (i, j, v) in entries {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_float(v))?;
            }
            w.flush()?;
        }
        Command::Embed {
            input,
            pipeline,
            k,
            out,
            y_out,
        } => {
            let cfg = pipeline.resolve(k, seed)?;
            let g = input.load()?;
            let e = embed(&g, &cfg)?;
            for b in &e.empty_blocks {
                log::warn!("{b}: motif graph is empty; its block is zero");
            }
            common.extend(input.header());
            common.extend(cfg.to_string().lines().map(str::to_string));
            let mut w = open_output(out.as_deref())?;
            write_header(&mut *w, "embed", &common)?;
            write_matrix_tsv(&mut *w, &g, &e.global.z)?;
            w.flush()?;
            if let Some(path) = y_out {
                let mut w = open_output(Some(&path))?;
                write_header(&mut *w, "embed", &common)?;
                let blocks: Vec<String> = e
                    .y
                    .provenance
                    .iter()
                    .map(|t| format!("{}[{}..{}]", t.source, t.columns.start, t.columns.end))
                    .collect();
                writeln!(w, "# blocks={}", blocks.join(","))?;
                write_matrix_tsv(&mut *w, &g, &e.y.y)?;
                w.flush()?;
            }
            log::info!(
                "embedding done: {} dims, residual {:.4}, {:.2}s",
                e.dim,
                e.global.residual,
                e.timings.total().as_secs_f64()
            );
        }
        Command::Linkpred {
            input,
            pipeline,
            k,
            seeds,
            out,
        } => {
            let k_grid = if k.eq_ignore_ascii_case("auto") {
                vec![1, 2, 3, 4]
            } else {
                let k: usize = k.parse().with_context(|| format!("--k expects auto or a number, got {k:?}"))?;
                vec![k]
            };
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let cfg = pipeline.resolve(None, seed)?;
            let base = cfg.seed;
            let ecfg = EvalConfig {
                k_grid,
                seeds: (0..seeds).map(|i| base.wrapping_add(i)).collect(),
                ..Default::default()
            };
            let g = input.load()?;
            let report = run_experiment(&g, &cfg, &ecfg)?;
            let mut w = open_output(out.as_deref())?;
            common.extend(input.header());
            write_header(&mut *w, "linkpred", &common)?;
            w.write_all(report.to_tsv().as_bytes())?;
            w.flush()?;
            log::info!("mean AUC {:.4} ± {:.4}", report.mean, report.std);
        }
        Command::Bench {
            pipeline,
            k,
            sizes,
            avg_degree,
            out,
        } => {
            let cfg = pipeline.resolve(k, seed)?;
            let report = bench_scaling(&sizes, avg_degree, &cfg, cfg.seed)?;
            let mut w = open_output(out.as_deref())?;
            common.push(format!("avg_degree={avg_degree}"));
            common.extend(cfg.to_string().lines().map(str::to_string));
            write_header(&mut *w, "bench", &common)?;
            w.write_all(report.to_tsv().as_bytes())?;
            if let Some(slope) = report.loglog_slope() {
                writeln!(w, "# loglog_slope={slope:.4}")?;
            }
            w.flush()?;
            if let Some((n, msg)) = report.failure {
                bail!("bench failed at n={n}: {msg}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build_global()
    {
        log::warn!("could not size the worker pool: {e}");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
