//! Toy datasets, dataset files, and the simulated predict/query loop.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_laplacian, Graph};
use crate::strategies::{Learner, QueryStrategy, StrategyKind};

/// A graph with a ground-truth class per node. For two classes, class 1 is
/// the positive label.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: Graph, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != graph.node_count() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                graph.node_count()
            )));
        }
        let distinct: BTreeSet<usize> = labels.iter().copied().collect();
        let classes = distinct.len().max(2);
        if let Some(&max) = distinct.iter().next_back() {
            if max >= classes {
                return Err(Error::InvalidParameter(format!(
                    "class ids must be dense in 0..C; found {max} with only {} distinct classes",
                    distinct.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graph,
            labels,
            classes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }
}

/// Unit chain with one uniformly random cut edge: nodes left of the cut are
/// positive, the rest negative.
pub fn gen_chain(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = rng.random_range(0..n - 1);
    let labels = (0..n).map(|v| usize::from(v <= cut)).collect();
    Dataset::new(format!("chain{n}"), Graph::chain(n), labels)
}

pub const GRID_SIDE: usize = 10;
const BOX_SIDE: usize = 3;

/// Pre-jitter grid labels: 3x3 positive boxes at the bottom-left and
/// top-right corners of the 10x10 grid (row 0 is the bottom).
pub fn grid_base_labels() -> Vec<usize> {
    let mut labels = vec![0; GRID_SIDE * GRID_SIDE];
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            let low = r < BOX_SIDE && c < BOX_SIDE;
            let high = r >= GRID_SIDE - BOX_SIDE && c >= GRID_SIDE - BOX_SIDE;
            if low || high {
                labels[r * GRID_SIDE + c] = 1;
            }
        }
    }
    labels
}

/// 10x10 grid with two positive boxes whose boundary is jittered: each
/// negative node adjacent to a positive node (before jitter) turns positive
/// with probability 1/2, scanned in ascending node order.
pub fn gen_jittered_grid(seed: u64) -> Result<Dataset> {
    gen_grid(seed, true)
}

pub fn gen_grid(seed: u64, jitter: bool) -> Result<Dataset> {
    let graph = Graph::grid(GRID_SIDE, GRID_SIDE);
    let base = grid_base_labels();
    let mut labels = base.clone();
    if jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = graph.neighbors();
        for v in 0..base.len() {
            if base[v] == 0 && adj[v].iter().any(|&w| base[w] == 1) && rng.random_bool(0.5) {
                labels[v] = 1;
            }
        }
    }
    Dataset::new("grid", graph, labels)
}

/// Parses `node_id class_id` lines (1-based node ids, `#` comments) for a
/// graph with `n` nodes. Every node needs exactly one label and class ids
/// must be dense from 0.
pub fn parse_labels(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(perr(format!("expected `node_id class_id`, got `{line}`")));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| perr(format!("invalid node id `{}`", fields[0])))?;
        let class: usize = fields[1]
            .parse()
            .map_err(|_| perr(format!("invalid class id `{}`", fields[1])))?;
        if node == 0 || node > n {
            return Err(perr(format!("unknown node id {node} (graph has {n} nodes)")));
        }
        if labels[node - 1].replace(class).is_some() {
            return Err(perr(format!("node {node} labeled twice")));
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| {
            l.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing label for node {}", v + 1),
            })
        })
        .collect::<Result<_>>()?;
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if let Some((i, c)) = distinct.iter().enumerate().find(|&(i, &c)| i != c) {
        return Err(Error::Parse {
            line: 0,
            message: format!("class ids are not contiguous from 0: expected {i}, found {c}"),
        });
    }
    Ok(labels)
}

pub fn load_dataset(edge_path: &Path, label_path: &Path) -> Result<Dataset> {
    let graph = Graph::parse_edge_list(&std::fs::read_to_string(edge_path)?)?;
    let labels = parse_labels(&std::fs::read_to_string(label_path)?, graph.node_count())?;
    let name = edge_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, graph, labels)
}

/// Seeds for one trial. Every strategy in a trial sees the same seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub labeling: u64,
    pub initial: u64,
    pub tie_break: u64,
}

impl TrialSeeds {
    /// Per-trial substreams from one master seed.
    pub fn stream(base_seed: u64, trials: usize) -> Vec<TrialSeeds> {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        (0..trials)
            .map(|_| TrialSeeds {
                labeling: rng.next_u64(),
                initial: rng.next_u64(),
                tie_break: rng.next_u64(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub ridge: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            beta: crate::config::DEFAULT_BETA,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub strategy: StrategyKind,
    pub seeds: TrialSeeds,
    pub initial: usize,
    /// Accuracy after `t` queries, `t = 0..=T`, over all `n` nodes.
    pub accuracy: Vec<f64>,
    pub queries: Vec<usize>,
}

/// Fraction of nodes whose prediction matches the truth.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

/// One simulated run: a random initial node is revealed, then for
/// `t = 0..=budget` the learner predicts every node and (for `t < budget`)
/// the strategy queries one node whose true class is revealed.
pub fn run_trial(
    dataset: &Dataset,
    kind: StrategyKind,
    budget: usize,
    seeds: TrialSeeds,
    params: ModelParams,
) -> Result<TrialRecord> {
    let n = dataset.node_count();
    if budget > n.saturating_sub(1) {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} exceeds n - 1 = {}",
            n.saturating_sub(1)
        )));
    }
    let lap = Arc::new(build_laplacian(&dataset.graph, params.beta)?.with_ridge(params.ridge)?);
    let initial = ChaCha8Rng::seed_from_u64(seeds.initial).random_range(0..n);
    let mut learner = Learner::new(lap, dataset.classes, &[(initial, dataset.labels[initial])])?;
    let mut strategy = QueryStrategy::new(kind, seeds.tie_break);

    let mut curve = Vec::with_capacity(budget + 1);
    let mut queries = Vec::with_capacity(budget);
    for t in 0..=budget {
        curve.push(accuracy(&learner.predict(), &dataset.labels));
        if t == budget {
            break;
        }
        let q = strategy
            .next_query(&learner)?
            .expect("budget <= n - 1 leaves an unlabeled node");
        learner = learner.observe(q, dataset.labels[q])?;
        queries.push(q);
    }
    Ok(TrialRecord {
        strategy: kind,
        seeds,
        initial,
        accuracy: curve,
        queries,
    })
}

/// Where trial datasets come from: toys are relabeled every trial.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Chain(usize),
    Grid,
    Fixed(Dataset),
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Chain(n) => format!("chain{n}"),
            DatasetSource::Grid => "grid".into(),
            DatasetSource::Fixed(d) => d.name.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            DatasetSource::Chain(n) => *n,
            DatasetSource::Grid => GRID_SIDE * GRID_SIDE,
            DatasetSource::Fixed(d) => d.node_count(),
        }
    }

    pub fn instantiate(&self, seed: u64) -> Result<Dataset> {
        match self {
            DatasetSource::Chain(n) => gen_chain(*n, seed),
            DatasetSource::Grid => gen_jittered_grid(seed),
            DatasetSource::Fixed(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub strategy: StrategyKind,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub dataset: String,
    pub trials: usize,
    pub budget: usize,
    pub curves: Vec<CurveSummary>,
    /// `records[s][i]`: trial `i` of strategy `s`, in trial order.
    pub records: Vec<Vec<TrialRecord>>,
}

impl ExperimentTable {
    pub fn curve(&self, kind: StrategyKind) -> Option<&CurveSummary> {
        self.curves.iter().find(|c| c.strategy == kind)
    }

    pub fn records_for(&self, kind: StrategyKind) -> Option<&[TrialRecord]> {
        self.curves
            .iter()
            .position(|c| c.strategy == kind)
            .map(|i| self.records[i].as_slice())
    }

    /// CSV with header `strategy,t,mean_accuracy,stderr,trials`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,t,mean_accuracy,stderr,trials\n");
        for c in &self.curves {
            for t in 0..c.mean.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    c.strategy,
                    t,
                    format_sig17(c.mean[t]),
                    format_sig17(c.stderr[t]),
                    self.trials
                );
            }
        }
        s
    }
}

/// Positional decimal with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Mean and standard error (`sample std / sqrt(trials)`) per position.
pub fn summarize(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let trials = curves.len();
    let len = curves.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / trials as f64;
        mean[t] = m;
        if trials > 1 {
            let var = curves.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / (trials - 1) as f64;
            stderr[t] = (var / trials as f64).sqrt();
        }
    }
    (mean, stderr)
}

/// Runs every strategy on `trials` paired trials. Trials execute in
/// parallel; results are reduced in trial order.
pub fn run_experiment(
    source: &DatasetSource,
    strategies: &[StrategyKind],
    budget: usize,
    trials: usize,
    base_seed: u64,
    params: ModelParams,
) -> Result<ExperimentTable> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if strategies.is_empty() {
        return Err(Error::InvalidParameter("no strategies given".into()));
    }
    let seeds = TrialSeeds::stream(base_seed, trials);
    let per_trial: Vec<Vec<TrialRecord>> = seeds
        .par_iter()
        .map(|&s| {
            let dataset = source.instantiate(s.labeling)?;
            strategies
                .iter()
                .map(|&k| run_trial(&dataset, k, budget, s, params))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(strategies.len());
    let mut curves = Vec::with_capacity(strategies.len());
    for (si, &kind) in strategies.iter().enumerate() {
        let recs: Vec<TrialRecord> = per_trial.iter().map(|t| t[si].clone()).collect();
        let accs: Vec<Vec<f64>> = recs.iter().map(|r| r.accuracy.clone()).collect();
        let (mean, stderr) = summarize(&accs);
        curves.push(CurveSummary {
            strategy: kind,
            mean,
            stderr,
        });
        records.push(recs);
    }
    Ok(ExperimentTable {
        dataset: source.name(),
        trials,
        budget,
        curves,
        records,
    })
}
