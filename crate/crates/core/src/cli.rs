//! Command-line front end. Node ids are 1-based here and 0-based everywhere
//! else; this module owns the conversion.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config::{DEFAULT_BETA, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::graph::{build_laplacian, Graph};
use crate::harness::{self, DatasetSource, ModelParams};
use crate::inference::{self, exact_bmrf_marginals};
use crate::selftest::{self, SelfTestConfig};
use crate::state::{Label, LabelState};
use crate::strategies::StrategyKind;

#[derive(Debug, Parser)]
#[command(name = "graph-eem", version, about = "Graph-based active learning by expected error minimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print per-node P(Y=+1) under several marginal approximations.
    Marginals(MarginalsArgs),
    /// Run paired active-learning trials and write the accuracy curves as CSV.
    Experiment(ExperimentArgs),
    /// Check the fast update routes against slow reference routes.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model strength; the Laplacian is scaled by beta.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Adds ridge*I to the Laplacian so unlabeled components are allowed.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct MarginalsArgs {
    /// Toy graph: `chainN` (unit path on N nodes) or `grid` (10x10).
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    pub toy: Option<String>,
    /// Edge list file (`i j [w]` per line, 1-based ids).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Observed labels, e.g. `1:+1,11:-1` (1-based node ids).
    #[arg(long, allow_hyphen_values = true)]
    pub labels: String,
    /// Comma-separated subset of tsa,zlg,lp,exact. `lp` prints the harmonic value.
    #[arg(long, default_value = "tsa,zlg,lp")]
    pub methods: String,
    /// Largest number of unlabeled nodes for `exact` (2^N completions).
    #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
    pub enum_cap: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Toy dataset relabeled every trial: `chainN` (default N=15) or `grid`.
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    pub toy: Option<String>,
    /// Edge list file; requires --labels.
    #[arg(long, requires = "labels")]
    pub edges: Option<PathBuf>,
    /// Label file (`node_id class_id` per line, 1-based ids, classes from 0).
    #[arg(long, requires = "edges")]
    pub labels: Option<PathBuf>,
    /// Comma-separated strategies: tsa|zlg|vopt|sopt|random.
    #[arg(long, default_value = "tsa,zlg,vopt,sopt,random")]
    pub strategies: String,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Number of queries per trial.
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random graphs per check.
    #[arg(long, default_value_t = 100)]
    pub graphs: usize,
    /// Add this offset to every fast-route value (forces failures).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub perturb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tsa,
    Zlg,
    Lp,
    Exact,
}

impl Method {
    fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods: Vec<Method> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t.to_ascii_lowercase().as_str() {
                "tsa" => Ok(Method::Tsa),
                "zlg" => Ok(Method::Zlg),
                "lp" => Ok(Method::Lp),
                "exact" => Ok(Method::Exact),
                other => Err(Error::Usage(format!(
                    "unknown method `{other}` (expected tsa|zlg|lp|exact)"
                ))),
            })
            .collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::Usage("empty method list".into()));
        }
        Ok(methods)
    }

    fn column(self) -> &'static str {
        match self {
            Method::Tsa => "tsa",
            Method::Zlg => "zlg",
            Method::Lp => "lp_harmonic",
            Method::Exact => "exact",
        }
    }
}

/// Parses `1:+1,11:-1` into 0-based observations.
pub fn parse_label_spec(spec: &str, n: usize) -> Result<Vec<(usize, Label)>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (node, label) = item
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("label `{item}` is not `node:±1`")))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("invalid node id `{node}`")))?;
        if node == 0 || node > n {
            return Err(Error::Usage(format!("node id {node} outside 1..={n}")));
        }
        let label = match label.trim() {
            "+1" | "1" | "+" => Label::Pos,
            "-1" | "-" => Label::Neg,
            other => return Err(Error::Usage(format!("label `{other}` is not +1 or -1"))),
        };
        if out.iter().any(|&(v, _)| v == node - 1) {
            return Err(Error::Usage(format!("node {node} labeled twice")));
        }
        out.push((node - 1, label));
    }
    if out.is_empty() {
        return Err(Error::Usage("--labels must name at least one node".into()));
    }
    Ok(out)
}

/// Parses a toy name: `chainN`, `chain` (15 nodes), or `grid`.
pub fn parse_toy(name: &str) -> Result<DatasetSource> {
    let lower = name.to_ascii_lowercase();
    if lower == "grid" {
        return Ok(DatasetSource::Grid);
    }
    if let Some(rest) = lower.strip_prefix("chain") {
        let n = if rest.is_empty() {
            15
        } else {
            rest.parse()
                .map_err(|_| Error::Usage(format!("invalid chain length in `{name}`")))?
        };
        if n < 2 {
            return Err(Error::Usage("chain needs at least 2 nodes".into()));
        }
        return Ok(DatasetSource::Chain(n));
    }
    Err(Error::Usage(format!("unknown toy `{name}` (expected chainN or grid)")))
}

fn toy_graph(source: &DatasetSource) -> Graph {
    match source {
        DatasetSource::Chain(n) => Graph::chain(*n),
        DatasetSource::Grid => Graph::grid(harness::GRID_SIDE, harness::GRID_SIDE),
        DatasetSource::Fixed(d) => d.graph.clone(),
    }
}

fn check_model(m: &ModelArgs) -> Result<ModelParams> {
    if !(m.beta.is_finite() && m.beta > 0.0) {
        return Err(Error::Usage(format!("--beta must be positive, got {}", m.beta)));
    }
    if !(m.ridge.is_finite() && m.ridge >= 0.0) {
        return Err(Error::Usage(format!("--ridge must be >= 0, got {}", m.ridge)));
    }
    Ok(ModelParams {
        beta: m.beta,
        ridge: m.ridge,
    })
}

pub fn cmd_marginals(args: &MarginalsArgs, out: &mut dyn Write) -> Result<i32> {
    let params = check_model(&args.model)?;
    let methods = Method::parse_list(&args.methods)?;
    let graph = match (&args.toy, &args.edges) {
        (Some(t), None) => toy_graph(&parse_toy(t)?),
        (None, Some(p)) => Graph::parse_edge_list(&std::fs::read_to_string(p)?)?,
        _ => return Err(Error::Usage("give exactly one of --toy or --edges".into())),
    };
    let n = graph.node_count();
    let obs = parse_label_spec(&args.labels, n)?;
    if args.enum_cap > DEFAULT_ENUM_CAP && methods.contains(&Method::Exact) {
        eprintln!(
            "warning: --enum-cap {} allows up to 2^{} completions; expect long runtimes",
            args.enum_cap, args.enum_cap
        );
    }

    let lap = Arc::new(build_laplacian(&graph, params.beta)?.with_ridge(params.ridge)?);
    let state = LabelState::new(Arc::clone(&lap), &obs)?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &m in &methods {
        columns.push(match m {
            Method::Tsa => inference::tsa_marginals(&state).probs,
            Method::Zlg => inference::zlg_marginals(&state).probs,
            Method::Lp => inference::lp_harmonic(&state).iter().copied().collect(),
            Method::Exact => exact_bmrf_marginals(&lap, &obs, args.enum_cap)?.probs,
        });
    }

    let header: Vec<&str> = ["node", "observed"]
        .into_iter()
        .chain(methods.iter().map(|m| m.column()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for v in 0..n {
        let mut row = vec![(v + 1).to_string()];
        match state.label_of(v) {
            Some(l) => {
                row.push(l.to_string());
                for &m in &methods {
                    let value = match (m, l) {
                        (Method::Lp, _) => l.sign(),
                        (_, Label::Pos) => 1.0,
                        (_, Label::Neg) => 0.0,
                    };
                    row.push(format!("{value:.6}"));
                }
            }
            None => {
                let pos = state.position_of(v).expect("unlabeled node has a position");
                row.push(String::new());
                for col in &columns {
                    row.push(format!("{:.6}", col[pos]));
                }
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(0)
}

pub fn cmd_experiment(args: &ExperimentArgs, out: &mut dyn Write) -> Result<i32> {
    let params = check_model(&args.model)?;
    let strategies = StrategyKind::parse_list(&args.strategies)?;
    let source = match (&args.toy, &args.edges, &args.labels) {
        (Some(t), None, None) => parse_toy(t)?,
        (None, Some(e), Some(l)) => DatasetSource::Fixed(harness::load_dataset(e, l)?),
        _ => {
            return Err(Error::Usage(
                "give either --toy or both --edges and --labels".into(),
            ))
        }
    };
    if args.trials == 0 {
        return Err(Error::Usage("--trials must be at least 1".into()));
    }
    let n = source.node_count();
    if args.budget + 1 > n {
        return Err(Error::Usage(format!(
            "--budget {} exceeds n - 1 = {}",
            args.budget,
            n - 1
        )));
    }
    // Fail on an unwritable path before spending time on trials.
    let mut file = std::fs::File::create(&args.output)?;

    let table = harness::run_experiment(&source, &strategies, args.budget, args.trials, args.seed, params)?;
    file.write_all(table.to_csv().as_bytes())?;

    writeln!(
        out,
        "{}: n={} trials={} budget={} seed={}",
        table.dataset, n, args.trials, args.budget, args.seed
    )?;
    let mid = args.budget / 2;
    writeln!(
        out,
        "{:<22} {:>16} {:>16} {:>16}",
        "strategy",
        "acc@t=0",
        format!("acc@t={mid}"),
        format!("acc@t={}", args.budget)
    )?;
    for c in &table.curves {
        let name = if c.strategy.is_reference_baseline() {
            format!("{} (reference)", c.strategy)
        } else {
            c.strategy.to_string()
        };
        let cell = |t: usize| format!("{:.4}±{:.4}", c.mean[t], c.stderr[t]);
        writeln!(out, "{:<22} {:>16} {:>16} {:>16}", name, cell(0), cell(mid), cell(args.budget))?;
    }
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(0)
}

pub fn cmd_selftest(args: &SelftestArgs, out: &mut dyn Write) -> Result<i32> {
    if args.graphs == 0 {
        return Err(Error::Usage("--graphs must be at least 1".into()));
    }
    let cfg = SelfTestConfig {
        seed: args.seed,
        graphs: args.graphs,
        perturb: args.perturb,
    };
    let results = selftest::run(&cfg)?;
    let mut failed = 0;
    for r in &results {
        writeln!(out, "{r}")?;
        if !r.passed() {
            failed += 1;
        }
    }
    writeln!(out, "{} of {} checks passed", results.len() - failed, results.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Marginals(a) => cmd_marginals(a, out),
        Command::Experiment(a) => cmd_experiment(a, out),
        Command::Selftest(a) => cmd_selftest(a, out),
    }
}

/// Formats an error for the terminal, converting node ids to 1-based.
pub fn describe(err: &Error) -> String {
    match err {
        Error::UnanchoredComponent { component } => {
            let shown: Vec<String> = component.iter().take(10).map(|v| (v + 1).to_string()).collect();
            let more = if component.len() > 10 { ", ..." } else { "" };
            format!(
                "connected component {{{}{more}}} has no labeled node; label one of its nodes or pass --ridge",
                shown.join(", ")
            )
        }
        Error::Degenerate { node, pivot, tolerance } => format!(
            "numerical degeneracy at node {}: pivot {pivot:e} is not above {tolerance:e}",
            node + 1
        ),
        other => other.to_string(),
    }
}
