//! Query strategies behind one interface, and the one-vs-rest learner that
//! handles more than two classes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eem::{self, BinaryModel, RiskReport};
use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::config::TOLERANCES;
use crate::inference::MarginalKind;
use crate::state::{Label, LabelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Tsa,
    Zlg,
    VOpt,
    SOpt,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Tsa,
        StrategyKind::Zlg,
        StrategyKind::VOpt,
        StrategyKind::SOpt,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Tsa => "tsa",
            StrategyKind::Zlg => "zlg",
            StrategyKind::VOpt => "vopt",
            StrategyKind::SOpt => "sopt",
            StrategyKind::Random => "random",
        }
    }

    /// Marginal approximation used by the expected-error strategies.
    pub fn marginal_kind(self) -> Option<MarginalKind> {
        match self {
            StrategyKind::Tsa => Some(MarginalKind::Tsa),
            StrategyKind::Zlg => Some(MarginalKind::Zlg),
            _ => None,
        }
    }

    /// `random` is a reference baseline rather than a published method.
    pub fn is_reference_baseline(self) -> bool {
        self == StrategyKind::Random
    }

    pub fn parse_list(s: &str) -> Result<Vec<StrategyKind>> {
        let kinds: Vec<StrategyKind> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if kinds.is_empty() {
            return Err(Error::Usage("empty strategy list".into()));
        }
        Ok(kinds)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsa" => Ok(StrategyKind::Tsa),
            "zlg" => Ok(StrategyKind::Zlg),
            "vopt" => Ok(StrategyKind::VOpt),
            "sopt" => Ok(StrategyKind::SOpt),
            "random" => Ok(StrategyKind::Random),
            other => Err(Error::Usage(format!(
                "unknown strategy `{other}` (expected tsa|zlg|vopt|sopt|random)"
            ))),
        }
    }
}

/// V-optimality score per candidate: `(1 / G_qq) Σ_k G_kq²`.
pub fn vopt_scores(g: &DMatrix<f64>) -> Vec<f64> {
    (0..g.ncols())
        .map(|q| g.column(q).norm_squared() / g[(q, q)])
        .collect()
}

/// Σ-optimality score per candidate: `(Σ_k G_kq)² / G_qq`.
pub fn sopt_scores(g: &DMatrix<f64>) -> Vec<f64> {
    (0..g.ncols())
        .map(|q| {
            let s = g.column(q).sum();
            s * s / g[(q, q)]
        })
        .collect()
}

/// Nodes whose score is within the tie tolerance of the maximum.
pub fn argmax_set(nodes: &[usize], scores: &[f64]) -> Vec<usize> {
    let negated: Vec<(usize, f64)> = nodes.iter().copied().zip(scores.iter().map(|s| -s)).collect();
    // Scores here are not on unit scale; compare relative to the best magnitude.
    let best = negated.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    let slack = TOLERANCES.tie * best.abs().max(f64::MIN_POSITIVE);
    negated
        .iter()
        .filter(|&&(_, s)| s - best <= slack)
        .map(|&(v, _)| v)
        .collect()
}

/// Class-probability table over `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    pub nodes: Vec<usize>,
    /// `rows[k][c]`; every row sums to 1.
    pub rows: Vec<Vec<f64>>,
    /// Rows whose binary marginals were all zero and fell back to uniform.
    pub degenerate_rows: usize,
}

/// Normalizes per-class binary marginals into class distributions.
/// A row of all zeros becomes uniform.
pub fn normalize_rows(per_class: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let classes = per_class.len();
    let len = per_class.first().map_or(0, Vec::len);
    let mut degenerate = 0;
    let rows = (0..len)
        .map(|k| {
            let total: f64 = per_class.iter().map(|p| p[k]).sum();
            if total > 0.0 {
                per_class.iter().map(|p| p[k] / total).collect()
            } else {
                degenerate += 1;
                vec![1.0 / classes as f64; classes]
            }
        })
        .collect();
    if degenerate > 0 {
        log::warn!("{degenerate} class rows had all-zero binary marginals; using uniform");
    }
    (rows, degenerate)
}

/// `(1/n) Σ_{k∈u} (1 - max_c table[k][c])`.
pub fn multiclass_zero_one_risk(table: &ClassTable, n: usize) -> f64 {
    table
        .rows
        .iter()
        .map(|row| 1.0 - row.iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / n as f64
}

/// Labels for one binary run. In the native binary learner class 1 is `+1`.
fn binary_label(class: usize) -> Label {
    if class == 1 {
        Label::Pos
    } else {
        Label::Neg
    }
}

fn ovr_label(run: usize, class: usize) -> Label {
    if run == class {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Binary or one-vs-rest collection of runs sharing one partition.
#[derive(Debug, Clone)]
pub struct Learner {
    classes: usize,
    one_vs_rest: bool,
    runs: Vec<BinaryModel>,
}

impl Learner {
    /// Native binary learner for two classes, one-vs-rest otherwise.
    pub fn new(laplacian: Arc<Laplacian>, classes: usize, observed: &[(usize, usize)]) -> Result<Self> {
        if classes == 2 {
            Self::binary(laplacian, observed)
        } else {
            Self::one_vs_rest(laplacian, classes, observed)
        }
    }

    pub fn binary(laplacian: Arc<Laplacian>, observed: &[(usize, usize)]) -> Result<Self> {
        check_classes(2, observed)?;
        let obs: Vec<(usize, Label)> = observed.iter().map(|&(v, c)| (v, binary_label(c))).collect();
        Ok(Self {
            classes: 2,
            one_vs_rest: false,
            runs: vec![BinaryModel::new(LabelState::new(laplacian, &obs)?)],
        })
    }

    /// One binary run per class; run `c` sees `+1` on nodes of class `c`.
    pub fn one_vs_rest(laplacian: Arc<Laplacian>, classes: usize, observed: &[(usize, usize)]) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 classes, got {classes}")));
        }
        check_classes(classes, observed)?;
        let first = LabelState::new(
            Arc::clone(&laplacian),
            &observed.iter().map(|&(v, c)| (v, ovr_label(0, c))).collect::<Vec<_>>(),
        )?;
        // G depends only on the partition, so the other runs reuse it.
        let runs = (0..classes)
            .map(|run| {
                let state = first.with_flipped_labels(|v| {
                    let c = observed.iter().find(|&&(w, _)| w == v).map(|&(_, c)| c).unwrap();
                    ovr_label(run, c) != ovr_label(0, c)
                });
                BinaryModel::new(state)
            })
            .collect();
        Ok(Self {
            classes,
            one_vs_rest: true,
            runs,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn is_one_vs_rest(&self) -> bool {
        self.one_vs_rest
    }

    pub fn runs(&self) -> &[BinaryModel] {
        &self.runs
    }

    pub fn primary(&self) -> &BinaryModel {
        &self.runs[0]
    }

    pub fn unlabeled(&self) -> &[usize] {
        self.primary().state().unlabeled()
    }

    pub fn node_count(&self) -> usize {
        self.primary().node_count()
    }

    /// Absorbs the class of `q` into every run (one downdate per run).
    pub fn observe(&self, q: usize, class: usize) -> Result<Self> {
        if class >= self.classes {
            return Err(Error::Usage(format!("class {class} out of range 0..{}", self.classes)));
        }
        if self.primary().state().position_of(q).is_none() {
            return Err(Error::Usage(format!("node {q} is already labeled")));
        }
        let runs = self
            .runs
            .par_iter()
            .enumerate()
            .map(|(run, m)| {
                let y = if self.one_vs_rest { ovr_label(run, class) } else { binary_label(class) };
                m.commit(q, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classes: self.classes,
            one_vs_rest: self.one_vs_rest,
            runs,
        })
    }

    /// Predicted class of every node. Observed nodes keep their class; the
    /// rest follow label propagation (sign of `h`, or argmax over runs).
    pub fn predict(&self) -> Vec<usize> {
        if !self.one_vs_rest {
            return self.runs[0]
                .predict()
                .into_iter()
                .map(|l| if l == Label::Pos { 1 } else { 0 })
                .collect();
        }
        let n = self.node_count();
        let mut out = vec![0; n];
        let primary = self.primary().state();
        for &v in primary.labeled() {
            out[v] = (0..self.classes)
                .find(|&c| self.runs[c].state().label_of(v) == Some(Label::Pos))
                .unwrap_or(0);
        }
        let harmonics: Vec<_> = self.runs.iter().map(BinaryModel::harmonic).collect();
        for (pos, &v) in primary.unlabeled().iter().enumerate() {
            let mut best = 0;
            for c in 1..self.classes {
                if harmonics[c][pos] > harmonics[best][pos] {
                    best = c;
                }
            }
            out[v] = best;
        }
        out
    }

    fn run_probs(&self, kind: MarginalKind) -> Result<Vec<Vec<f64>>> {
        self.runs
            .iter()
            .map(|m| m.marginals(kind).map(|mv| mv.probs))
            .collect()
    }

    /// Class-probability table over `u`.
    pub fn class_table(&self, kind: MarginalKind) -> Result<ClassTable> {
        let nodes = self.unlabeled().to_vec();
        if !self.one_vs_rest {
            let p = self.runs[0].marginals(kind)?.probs;
            return Ok(ClassTable {
                nodes,
                rows: p.iter().map(|&p| vec![1.0 - p, p]).collect(),
                degenerate_rows: 0,
            });
        }
        let (rows, degenerate_rows) = normalize_rows(&self.run_probs(kind)?);
        Ok(ClassTable {
            nodes,
            rows,
            degenerate_rows,
        })
    }

    pub fn zero_one_risk(&self, kind: MarginalKind) -> Result<f64> {
        Ok(multiclass_zero_one_risk(&self.class_table(kind)?, self.node_count()))
    }

    /// Lookahead risk of every candidate. One-vs-rest candidates enumerate
    /// the observed class `c`, fixing run `c` to `+1` and every other run to
    /// `-1`, weighted by the current class probability of `q`.
    pub fn risk_report(&self, kind: MarginalKind) -> Result<RiskReport> {
        if !self.one_vs_rest {
            return self.runs[0].risk_report(kind);
        }
        if kind == MarginalKind::Exact {
            return Err(Error::Usage(
                "exact marginals are only available for binary learners".into(),
            ));
        }
        let table = self.class_table(kind)?;
        let u = self.unlabeled();
        let n = self.node_count() as f64;
        let classes = self.classes;
        let score = |qp: usize| -> Result<(usize, f64)> {
            let q = u[qp];
            let mut plus = Vec::with_capacity(classes);
            let mut minus = Vec::with_capacity(classes);
            for m in &self.runs {
                plus.push(m.lookahead_probs(kind, q, Label::Pos)?);
                minus.push(m.lookahead_probs(kind, q, Label::Neg)?);
            }
            let mut risk = 0.0;
            for c in 0..classes {
                let weight = table.rows[qp][c];
                if weight == 0.0 {
                    continue;
                }
                let mut branch = 0.0;
                for k in 0..u.len() {
                    if k == qp {
                        continue;
                    }
                    let mut total = plus[c][k];
                    let mut top = plus[c][k];
                    for (r, row) in minus.iter().enumerate() {
                        if r != c {
                            total += row[k];
                            top = top.max(row[k]);
                        }
                    }
                    branch += if total > 0.0 {
                        1.0 - top / total
                    } else {
                        1.0 - 1.0 / classes as f64
                    };
                }
                risk += weight * branch / n;
            }
            Ok((q, risk))
        };
        let per_query = if u.len() >= 256 {
            (0..u.len()).into_par_iter().map(score).collect::<Result<Vec<_>>>()?
        } else {
            (0..u.len()).map(score).collect::<Result<Vec<_>>>()?
        };
        Ok(RiskReport::from_risks(per_query))
    }

    /// TSA-normalized class table: `σ(f_k^c) / Σ_c' σ(f_k^c')`.
    pub fn multiclass_marginals(&self) -> Result<ClassTable> {
        self.class_table(MarginalKind::Tsa)
    }
}

fn check_classes(classes: usize, observed: &[(usize, usize)]) -> Result<()> {
    match observed.iter().find(|&&(_, c)| c >= classes) {
        Some(&(v, c)) => Err(Error::Usage(format!(
            "node {v} has class {c}, outside 0..{classes}"
        ))),
        None => Ok(()),
    }
}

/// A query strategy with its own seeded tie-break stream.
#[derive(Debug, Clone)]
pub struct QueryStrategy {
    kind: StrategyKind,
    rng: ChaCha8Rng,
}

impl QueryStrategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Next node to query, or `None` when nothing is unlabeled.
    pub fn next_query(&mut self, learner: &Learner) -> Result<Option<usize>> {
        let u = learner.unlabeled();
        if u.is_empty() {
            return Ok(None);
        }
        let candidates = match self.kind {
            StrategyKind::Tsa | StrategyKind::Zlg => {
                let kind = self.kind.marginal_kind().expect("eem kinds carry a marginal");
                learner.risk_report(kind)?.argmin
            }
            StrategyKind::VOpt => argmax_set(u, &vopt_scores(learner.primary().state().inverse())),
            StrategyKind::SOpt => argmax_set(u, &sopt_scores(learner.primary().state().inverse())),
            StrategyKind::Random => u.to_vec(),
        };
        Ok(eem::break_tie(&candidates, &mut self.rng))
    }
}
