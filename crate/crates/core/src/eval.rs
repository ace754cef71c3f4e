//! Link-prediction protocol: edge holdout, negative sampling, mean edge
//! features, L2 logistic regression, AUC, and selection of K.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, ResultExt};
use crate::graph::{Graph, NodeId};
use crate::pipeline::{derive_seed, embed, PipelineConfig};

pub type NodePair = (NodeId, NodeId);

#[derive(Debug, Clone)]
pub struct LinkPredSplit {
    pub train_graph: Graph,
    pub positives: Vec<NodePair>,
    pub negatives: Vec<NodePair>,
    pub seed: u64,
}

impl LinkPredSplit {
    /// Positives then negatives, with matching labels.
    pub fn labeled_pairs(&self) -> (Vec<NodePair>, Vec<bool>) {
        let pairs: Vec<NodePair> = self.positives.iter().chain(&self.negatives).copied().collect();
        let labels = (0..pairs.len()).map(|i| i < self.positives.len()).collect();
        (pairs, labels)
    }
}

/// Removes a uniformly random ⌊M/2⌋ of the edges and samples as many
/// distinct non-adjacent pairs. Isolated nodes stay in the train graph.
pub fn make_split(g: &Graph, seed: u64) -> Result<LinkPredSplit> {
    let m = g.num_edges();
    if m < 4 {
        return Err(Error::InvalidConfig(format!(
            "link prediction needs at least 4 edges, graph has {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..m).collect();
    ids.shuffle(&mut rng);
    let held = m / 2;
    let mut positives: Vec<NodePair> = ids[..held].iter().map(|&e| g.edge(e)).collect();
    positives.sort_unstable();
    let mut kept = ids[held..].to_vec();
    kept.sort_unstable();
    let train_graph = g.subgraph_with_edges(kept)?;

    let n = g.num_nodes();
    let max_attempts = 100 * held + 1000;
    let mut seen = BTreeSet::new();
    let mut negatives = Vec::with_capacity(held);
    let mut attempts = 0;
    while negatives.len() < held {
        if attempts == max_attempts {
            return Err(Error::NegativeSampling {
                wanted: held,
                attempts,
            });
        }
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || g.has_edge(a, b) {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if seen.insert(pair) {
            negatives.push(pair);
        }
    }
    Ok(LinkPredSplit {
        train_graph,
        positives,
        negatives,
        seed,
    })
}

/// One row `(z_i + z_j) / 2` per pair.
pub fn edge_features_mean(z: &DMatrix<f64>, pairs: &[NodePair]) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    let mut out = DMatrix::zeros(pairs.len(), z.ncols());
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for id in [i, j] {
            if id >= n {
                return Err(Error::NodeOutOfRange { id, n });
            }
        }
        let mean = (z.row(i) + z.row(j)) * 0.5;
        out.set_row(r, &mean);
    }
    Ok(out)
}

/// Area under the ROC curve via the Mann–Whitney statistic with mid-ranks,
/// so tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: DVector<f64>,
    pub bias: f64,
    pub reg: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogRegModel {
    /// Raw margins `w·x + b`; monotone in the probability, so AUC is the same.
    pub fn decision(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.weights).add_scalar(self.bias)
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.decision(x).map(sigmoid)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 500;

fn check_classes(y: &[bool], min_per_class: usize) -> Result<()> {
    let pos = y.iter().filter(|&&l| l).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    if pos < min_per_class || y.len() - pos < min_per_class {
        return Err(Error::InvalidConfig(format!(
            "need at least {min_per_class} examples per class"
        )));
    }
    Ok(())
}

/// Full-batch gradient descent with backtracking on
/// `mean log-loss + (λ/2)‖w‖²` (bias unpenalized).
pub fn fit_logreg(x: &DMatrix<f64>, y: &[bool], reg: f64) -> Result<LogRegModel> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: x.nrows(),
        });
    }
    check_classes(y, 1)?;
    let n = y.len() as f64;
    let target = DVector::from_iterator(y.len(), y.iter().map(|&l| if l { 1.0 } else { 0.0 }));
    let objective = |w: &DVector<f64>, margins: &DVector<f64>| {
        let data: f64 = margins
            .iter()
            .zip(target.iter())
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum();
        data / n + 0.5 * reg * w.norm_squared()
    };

    let mut w = DVector::zeros(x.ncols());
    let mut b = 0.0;
    let mut margins = DVector::zeros(y.len());
    let mut f = objective(&w, &margins);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        let resid = margins.map(sigmoid) - &target;
        let gw = x.tr_mul(&resid) / n + &w * reg;
        let gb = resid.sum() / n;
        let g2 = gw.norm_squared() + gb * gb;
        if g2.sqrt() <= GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        step *= 2.0;
        loop {
            let w_new = &w - &gw * step;
            let b_new = b - gb * step;
            let m_new = (x * &w_new).add_scalar(b_new);
            let f_new = objective(&w_new, &m_new);
            if f_new <= f - 0.5 * step * g2 {
                w = w_new;
                b = b_new;
                margins = m_new;
                f = f_new;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                // No representable descent step left.
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
    }
    if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(Error::InvalidConfig("logistic regression diverged".into()));
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        reg,
        iterations,
        converged,
    })
}

/// Fold id per example, dealt round-robin within each class after a seeded
/// shuffle so every fold sees both classes when possible.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; y.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            out[i] = (pos + offset) % folds;
        }
        offset += idx.len();
    }
    out
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

/// Mean held-out AUC over `folds` stratified folds. Folds whose training or
/// test part misses a class are skipped.
pub fn cross_validated_auc(
    x: &DMatrix<f64>,
    y: &[bool],
    reg: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    check_classes(y, 2)?;
    let assignment = stratified_folds(y, folds, seed);
    let mut total = 0.0;
    let mut used = 0;
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..y.len()).partition(|&i| assignment[i] == fold);
        let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let both = |v: &[bool]| v.iter().any(|&l| l) && v.iter().any(|&l| !l);
        if !both(&y_train) || !both(&y_test) {
            continue;
        }
        let model = fit_logreg(&select_rows(x, &train), &y_train, reg)?;
        let scores = model.decision(&select_rows(x, &test));
        total += auc(scores.as_slice(), &y_test)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidConfig("no fold contained both classes".into()));
    }
    Ok(total / used as f64)
}

/// Default L2 grid.
pub const REG_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];

/// Best `(λ, CV AUC)` over the grid; ties go to the earlier grid entry.
pub fn select_reg(
    x: &DMatrix<f64>,
    y: &[bool],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &reg in grid {
        let score = cross_validated_auc(x, y, reg, folds, seed)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((reg, score));
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("empty regularization grid".into()))
}

/// Stratified subsample of `fraction` of each class (at least
/// `min(folds, class size)` per class), in ascending index order.
pub fn selection_subsample(y: &[bool], fraction: f64, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let want = ((fraction * idx.len() as f64).ceil() as usize)
            .max(folds.min(idx.len()))
            .min(idx.len());
        out.extend_from_slice(&idx[..want]);
    }
    out.sort_unstable();
    out
}

/// Chooses λ by `folds`-fold CV AUC on a `fraction` subsample, then refits
/// on all of `x`.
pub fn train_logreg(
    x: &DMatrix<f64>,
    y: &[bool],
    grid: &[f64],
    folds: usize,
    fraction: f64,
    seed: u64,
) -> Result<LogRegModel> {
    check_classes(y, 2)?;
    let sub = selection_subsample(y, fraction, folds, seed);
    let y_sub: Vec<bool> = sub.iter().map(|&i| y[i]).collect();
    let (reg, _) = select_reg(&select_rows(x, &sub), &y_sub, grid, folds, seed)?;
    fit_logreg(x, y, reg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k_grid: Vec<usize>,
    pub reg_grid: Vec<f64>,
    pub folds: usize,
    pub selection_fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_grid: vec![1, 2, 3, 4],
            reg_grid: REG_GRID.to_vec(),
            folds: 10,
            selection_fraction: 0.1,
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    pub reg: f64,
    /// `(K, best CV AUC)` for every grid entry, ascending K.
    pub scores: Vec<(usize, f64)>,
    /// Embedding of the train graph at the chosen K.
    pub z: DMatrix<f64>,
}

/// Embeds the train graph once per K and keeps the K (and λ) with the best
/// CV AUC on the selection subsample. Ties go to the smaller K.
pub fn select_k(
    split: &LinkPredSplit,
    cfg: &PipelineConfig,
    ecfg: &EvalConfig,
    seed: u64,
) -> Result<KSelection> {
    let mut grid = ecfg.k_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty K grid".into()));
    }
    let (pairs, labels) = split.labeled_pairs();
    let sub = selection_subsample(&labels, ecfg.selection_fraction, ecfg.folds, derive_seed(seed, 2, 0));
    let sub_pairs: Vec<NodePair> = sub.iter().map(|&i| pairs[i]).collect();
    let sub_labels: Vec<bool> = sub.iter().map(|&i| labels[i]).collect();

    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, f64, DMatrix<f64>)> = None;
    for &k in &grid {
        let pcfg = PipelineConfig {
            steps: k,
            ..cfg.clone()
        };
        let z = embed(&split.train_graph, &pcfg)
            .context(format!("embedding train graph with K={k}"))?
            .global
            .z;
        let x = edge_features_mean(&z, &sub_pairs)?;
        let (reg, score) = select_reg(&x, &sub_labels, &ecfg.reg_grid, ecfg.folds, derive_seed(seed, 3, k as u64))?;
        scores.push((k, score));
        if best.as_ref().is_none_or(|b| score > b.2) {
            best = Some((k, reg, score, z));
        }
    }
    let (k, reg, _, z) = best.expect("grid is nonempty");
    Ok(KSelection { k, reg, scores, z })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub k: usize,
    pub reg: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub runs: Vec<SeedRun>,
    pub mean: f64,
    pub std: f64,
    /// Most frequent per-seed K (smaller on ties).
    pub selected_k: usize,
    pub config: String,
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for line in self.config.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("seed\tK\tlambda\tAUC\n");
        for r in &self.runs {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.6}", r.seed, r.k, r.reg, r.auc);
        }
        let _ = writeln!(out, "mean\t{}\t-\t{:.6}", self.selected_k, self.mean);
        let _ = writeln!(out, "std\t-\t-\t{:.6}", self.std);
        out
    }
}

/// Split, select K and λ, then report the mean AUC of `folds`-fold CV over
/// all labeled pairs of that split.
pub fn run_seed(g: &Graph, cfg: &PipelineConfig, ecfg: &EvalConfig, seed: u64) -> Result<SeedRun> {
    let split = make_split(g, seed)?;
    let pcfg = PipelineConfig {
        seed: derive_seed(cfg.seed, seed, 1),
        ..cfg.clone()
    };
    let sel = select_k(&split, &pcfg, ecfg, seed)?;
    let (pairs, labels) = split.labeled_pairs();
    let x = edge_features_mean(&sel.z, &pairs)?;
    let auc = cross_validated_auc(&x, &labels, sel.reg, ecfg.folds, derive_seed(seed, 4, 0))?;
    Ok(SeedRun {
        seed,
        k: sel.k,
        reg: sel.reg,
        auc,
    })
}

pub fn run_experiment(g: &Graph, cfg: &PipelineConfig, ecfg: &EvalConfig) -> Result<EvalReport> {
    if ecfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let mut runs = ecfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(g, cfg, ecfg, seed).context(format!("seed {seed}")))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.seed);

    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.auc).sum::<f64>() / n;
    let std = if runs.len() > 1 {
        (runs.iter().map(|r| (r.auc - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut tally: Vec<(usize, usize)> = Vec::new();
    for r in &runs {
        match tally.iter_mut().find(|(k, _)| *k == r.k) {
            Some(slot) => slot.1 += 1,
            None => tally.push((r.k, 1)),
        }
    }
    tally.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let ks: Vec<String> = ecfg.k_grid.iter().map(|k| k.to_string()).collect();
    let seeds: Vec<String> = ecfg.seeds.iter().map(|s| s.to_string()).collect();
    let config = format!(
        "{cfg}\nk_grid={}\nfolds={}\nselection_fraction={}\nseeds={}",
        ks.join(","),
        ecfg.folds,
        ecfg.selection_fraction,
        seeds.join(",")
    );
    Ok(EvalReport {
        runs,
        mean,
        std,
        selected_k: tally[0].0,
        config,
    })
}
