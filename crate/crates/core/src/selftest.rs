//! Equivalence checks of the fast routes against slow reference routes on
//! random small graphs. Failures are reported, never thrown.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eem::{tsa_lookahead_decisions, BinaryModel};
use crate::error::Result;
use crate::graph::{build_laplacian, invert_spd, Graph, Laplacian};
use crate::inference::{self, exact_bmrf_marginals, MarginalKind};
use crate::state::{Label, LabelState};

/// Connected graph on `n` nodes: a random spanning tree plus each remaining
/// pair with probability `density`; weights uniform in `(0, 2]`.
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    let mut present = vec![vec![false; n]; n];
    let weight = |rng: &mut R| 2.0 * (1.0 - rng.random::<f64>());
    for v in 1..n {
        let parent = rng.random_range(0..v);
        present[parent][v] = true;
        edges.push((parent, v, weight(rng)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !present[i][j] && rng.random_bool(density) {
                edges.push((i, j, weight(rng)));
            }
        }
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

/// Random observations on `count` distinct nodes.
pub fn random_observations<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<(usize, Label)> {
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    nodes
        .into_iter()
        .take(count)
        .map(|v| (v, if rng.random_bool(0.5) { Label::Pos } else { Label::Neg }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:<28} cases={:<7} max_dev={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_deviation,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelfTestConfig {
    pub seed: u64,
    pub graphs: usize,
    /// Added to every fast-route value before comparison.
    pub perturb: f64,
}

impl Default for SelfTestConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            graphs: 100,
            perturb: 0.0,
        }
    }
}

fn setup(n: usize, labeled: usize, rng: &mut ChaCha8Rng) -> Result<(Arc<Laplacian>, LabelState)> {
    let g = random_connected_graph(n, 0.15, rng);
    let lap = Arc::new(build_laplacian(&g, 1.0)?);
    let obs = random_observations(n, labeled, rng);
    let state = LabelState::new(Arc::clone(&lap), &obs)?;
    Ok((lap, state))
}

fn downdate_check(cfg: &SelfTestConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x01);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..cfg.graphs {
        let n = rng.random_range(3..=40);
        let (lap, state) = setup(n, rng.random_range(1..=n / 3 + 1), &mut rng)?;
        for &k in state.unlabeled() {
            let next = state.observe(k, Label::Pos)?;
            let direct = invert_spd(&lap.submatrix(next.unlabeled(), next.unlabeled()))
                .expect("anchored block is invertible");
            let dev = next
                .inverse()
                .iter()
                .zip(direct.iter())
                .map(|(a, b)| (a + cfg.perturb - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
            cases += 1;
        }
    }
    Ok(CheckResult {
        name: "downdate-vs-reinversion",
        cases,
        max_deviation: worst,
        tolerance: 1e-9,
    })
}

fn dongle_check(cfg: &SelfTestConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x02);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..cfg.graphs {
        let n = rng.random_range(3..=40);
        let (lap, state) = setup(n, rng.random_range(1..=n / 3 + 1), &mut rng)?;
        let f = inference::tsa_decisions(&state);
        for &q in state.unlabeled() {
            for y in Label::BOTH {
                let fast = tsa_lookahead_decisions(&state, &f, q, y)?;
                let mut obs = state.observations();
                obs.push((q, y));
                let fresh = inference::tsa_decisions(&LabelState::new(Arc::clone(&lap), &obs)?);
                let fast: Vec<f64> = fast.iter().filter_map(|d| d.finite().ok()).collect();
                for (a, b) in fast.iter().zip(fresh.iter()) {
                    worst = worst.max((a + cfg.perturb - b).abs());
                }
                cases += 1;
            }
        }
    }
    Ok(CheckResult {
        name: "lookahead-vs-recompute",
        cases,
        max_deviation: worst,
        tolerance: 1e-9,
    })
}

fn single_unlabeled_check(cfg: &SelfTestConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x03);
    let mut worst = 0.0f64;
    for _ in 0..cfg.graphs {
        let n = rng.random_range(2..=12);
        let (lap, state) = setup(n, n - 1, &mut rng)?;
        let tsa = inference::tsa_marginals(&state).probs[0];
        let exact = exact_bmrf_marginals(&lap, &state.observations(), 1)?.probs[0];
        worst = worst.max((tsa + cfg.perturb - exact).abs());
    }
    Ok(CheckResult {
        name: "single-unlabeled-exactness",
        cases: cfg.graphs,
        max_deviation: worst,
        tolerance: 1e-12,
    })
}

fn routes_check(cfg: &SelfTestConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x04);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..cfg.graphs {
        let n = rng.random_range(3..=30);
        let (_, state) = setup(n, rng.random_range(1..=n / 3 + 1), &mut rng)?;
        let f = inference::tsa_decisions(&state);
        for (pos, &k) in state.unlabeled().iter().enumerate() {
            let direct = inference::tsa_decision_direct(&state, k)?;
            let imputed = inference::tsa_imputation_decision(&state, k)?;
            let v = f[pos] + cfg.perturb;
            worst = worst.max((v - direct).abs()).max((v - imputed).abs());
            cases += 1;
        }
    }
    Ok(CheckResult {
        name: "decision-route-equivalence",
        cases,
        max_deviation: worst,
        tolerance: 1e-9,
    })
}

/// Lookahead risk of `q` by explicit expectation over every completion:
/// `Σ_{y_q} P(y_q) Σ_{y_rest} P(y_rest | y_q) (1/n) Σ_i 1{Ŷ_i ≠ y_i}`.
pub fn brute_force_lookahead_risk(lap: &Laplacian, obs: &[(usize, Label)], q: usize) -> f64 {
    let n = lap.node_count();
    let mut fixed = vec![None; n];
    for &(v, y) in obs {
        fixed[v] = Some(y.sign());
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let m = free.len();
    let energy = |y: &[f64]| -> f64 {
        let l = lap.matrix();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e += y[i] * l[(i, j)] * y[j];
            }
        }
        0.5 * e
    };
    let mut configs = Vec::with_capacity(1 << m);
    for bits in 0u64..(1u64 << m) {
        let mut y: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (b, &v) in free.iter().enumerate() {
            y[v] = if bits >> b & 1 == 1 { 1.0 } else { -1.0 };
        }
        let e = energy(&y);
        configs.push((y, e));
    }
    let e_min = configs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = configs.iter().map(|c| (e_min - c.1).exp()).collect();
    let z: f64 = weights.iter().sum();

    let mut risk = 0.0;
    for yq in [1.0, -1.0] {
        let members: Vec<usize> = (0..configs.len()).filter(|&i| configs[i].0[q] == yq).collect();
        let zq: f64 = members.iter().map(|&i| weights[i]).sum();
        // Bayes prediction of every node given y_ℓ and y_q.
        let predict: Vec<f64> = (0..n)
            .map(|v| {
                let plus: f64 = members
                    .iter()
                    .filter(|&&i| configs[i].0[v] > 0.0)
                    .map(|&i| weights[i])
                    .sum();
                if plus >= zq - plus { 1.0 } else { -1.0 }
            })
            .collect();
        let expected_error: f64 = members
            .iter()
            .map(|&i| {
                let wrong = (0..n).filter(|&v| predict[v] != configs[i].0[v]).count();
                weights[i] / zq * wrong as f64 / n as f64
            })
            .sum();
        risk += zq / z * expected_error;
    }
    risk
}

fn eem_check(cfg: &SelfTestConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let graphs = cfg.graphs.min(30);
    for _ in 0..graphs {
        let n = rng.random_range(3..=10);
        let (lap, state) = setup(n, rng.random_range(1..=2), &mut rng)?;
        let model = BinaryModel::new(state);
        let report = model.risk_report(MarginalKind::Exact)?;
        for &(q, r) in &report.per_query {
            let brute = brute_force_lookahead_risk(&lap, &model.state().observations(), q);
            worst = worst.max((r + cfg.perturb - brute).abs());
            cases += 1;
        }
    }
    Ok(CheckResult {
        name: "eem-vs-enumeration",
        cases,
        max_deviation: worst,
        tolerance: 1e-10,
    })
}

pub fn run(cfg: &SelfTestConfig) -> Result<Vec<CheckResult>> {
    Ok(vec![
        downdate_check(cfg)?,
        dongle_check(cfg)?,
        single_unlabeled_check(cfg)?,
        routes_check(cfg)?,
        eem_check(cfg)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let cfg = SelfTestConfig { seed: 13, graphs: 8, perturb: 0.0 };
        for r in run(&cfg).unwrap() {
            assert!(r.passed(), "{r}");
            assert!(r.cases > 0);
        }
    }

    #[test]
    fn perturbation_fails() {
        let cfg = SelfTestConfig { seed: 1, graphs: 3, perturb: 1e-3 };
        assert!(run(&cfg).unwrap().iter().all(|r| !r.passed()));
    }

    #[test]
    fn generated_graphs_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = random_connected_graph(25, 0.1, &mut rng);
            assert_eq!(g.components().len(), 1);
            assert!(g.edges().iter().all(|e| e.weight > 0.0 && e.weight <= 2.0));
        }
    }
}
