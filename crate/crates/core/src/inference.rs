//! Posterior marginals of the unlabeled nodes.
//!
//! Four regimes are provided: the harmonic (label propagation) solution,
//! the two-step approximation (TSA) whose log-odds are the decision values
//! `f_k = 2 h_k / G_kk`, the linear approximation `(h_k + 1) / 2` (ZLG), and
//! exact marginals of the binary Markov random field by enumeration.

use nalgebra::{Cholesky, DVector};

use crate::config::{DEFAULT_ENUM_CAP, TOLERANCES};
use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::state::{Label, LabelState};

/// A decision value (log-odds of `Y_k = +1`). Infinite values only arise for
/// a node whose label was just fixed and carry nothing but their sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Finite(f64),
    Saturated(Label),
}

impl Decision {
    pub fn probability(self) -> f64 {
        match self {
            Decision::Finite(f) => sigmoid(f),
            Decision::Saturated(Label::Pos) => 1.0,
            Decision::Saturated(Label::Neg) => 0.0,
        }
    }

    /// The finite value. Arithmetic on a saturated value is an error.
    pub fn finite(self) -> Result<f64> {
        match self {
            Decision::Finite(f) => Ok(f),
            Decision::Saturated(l) => Err(Error::InvalidParameter(format!(
                "decision value is saturated at {}infinity",
                if l == Label::Pos { "+" } else { "-" }
            ))),
        }
    }

    /// `f64` view with saturation mapped to `±inf`.
    pub fn as_f64(self) -> f64 {
        match self {
            Decision::Finite(f) => f,
            Decision::Saturated(l) => l.sign() * f64::INFINITY,
        }
    }
}

/// Logistic function, clamped to exactly 0 or 1 beyond the saturation bound.
pub fn sigmoid(z: f64) -> f64 {
    let cut = TOLERANCES.sigmoid_saturation;
    if z > cut {
        1.0
    } else if z < -cut {
        0.0
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// Per-node marginals over `u`, in the state's `unlabeled` order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVector {
    pub nodes: Vec<usize>,
    /// `P(Y_k = +1 | y_ℓ)`.
    pub probs: Vec<f64>,
    pub decision: Vec<Decision>,
}

impl MarginalVector {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn prob_of(&self, node: usize) -> Option<f64> {
        self.nodes.iter().position(|&v| v == node).map(|i| self.probs[i])
    }
}

/// Which marginal approximation drives prediction and lookahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginalKind {
    Tsa,
    Zlg,
    /// Exact enumeration; only feasible for small `|u|`.
    Exact,
}

/// Harmonic solution `h = -G L_uℓ y_ℓ` over `u`.
pub fn lp_harmonic(state: &LabelState) -> DVector<f64> {
    -(state.inverse() * state.boundary_term())
}

/// TSA decision values for every node in `u`, all at once:
/// `f = -2 [1 / G_kk] ∘ (G L_uℓ y_ℓ)`.
pub fn tsa_decisions(state: &LabelState) -> DVector<f64> {
    let h = lp_harmonic(state);
    let g = state.inverse();
    DVector::from_fn(h.len(), |k, _| 2.0 * h[k] / g[(k, k)])
}

pub fn tsa_marginals(state: &LabelState) -> MarginalVector {
    marginals_from_decisions(state.unlabeled(), tsa_decisions(state).iter().copied())
}

pub(crate) fn marginals_from_decisions(
    nodes: &[usize],
    decisions: impl Iterator<Item = f64>,
) -> MarginalVector {
    let decision: Vec<Decision> = decisions.map(Decision::Finite).collect();
    MarginalVector {
        nodes: nodes.to_vec(),
        probs: decision.iter().map(|d| d.probability()).collect(),
        decision,
    }
}

/// `σ_linear(h) = (h + 1) / 2` with `h` clamped to `[-1, 1]`. Values within
/// rounding distance of ±1 land exactly on 0 or 1.
pub fn zlg_probability(h: f64) -> f64 {
    let snap = TOLERANCES.boundary_snap;
    if h >= 1.0 - snap {
        1.0
    } else if h <= -1.0 + snap {
        0.0
    } else {
        0.5 * (h + 1.0)
    }
}

pub fn zlg_marginals(state: &LabelState) -> MarginalVector {
    let h = lp_harmonic(state);
    MarginalVector {
        nodes: state.unlabeled().to_vec(),
        probs: h.iter().map(|&v| zlg_probability(v)).collect(),
        decision: h.iter().map(|&v| Decision::Finite(v)).collect(),
    }
}

/// Solves `L_ūū x = L_ūℓ y_ℓ` where `ū = u \ {k}`; returns `(ū, x)`.
fn solve_without(state: &LabelState, k: usize) -> Result<(Vec<usize>, DVector<f64>)> {
    if state.position_of(k).is_none() {
        return Err(Error::Usage(format!("node {k} is not unlabeled")));
    }
    let lap = state.laplacian();
    let rest: Vec<usize> = state.unlabeled().iter().copied().filter(|&v| v != k).collect();
    let rhs = DVector::from_iterator(
        rest.len(),
        rest.iter().map(|&v| {
            state
                .observations()
                .iter()
                .map(|&(j, y)| lap.get(v, j) * y.sign())
                .sum::<f64>()
        }),
    );
    if rest.is_empty() {
        return Ok((rest, rhs));
    }
    let chol = Cholesky::new(lap.submatrix(&rest, &rest)).ok_or(Error::Degenerate {
        node: k,
        pivot: 0.0,
        tolerance: TOLERANCES.singularity,
    })?;
    let x = chol.solve(&rhs);
    Ok((rest, x))
}

fn labeled_coupling(state: &LabelState, k: usize) -> f64 {
    state
        .observations()
        .iter()
        .map(|&(j, y)| state.laplacian().get(k, j) * y.sign())
        .sum()
}

/// Decision value of one node from its defining form
/// `f_k = -2 L_kℓ y_ℓ + 2 L_kū L_ūū^-1 L_ūℓ y_ℓ`, with a fresh solve on `ū`.
pub fn tsa_decision_direct(state: &LabelState, k: usize) -> Result<f64> {
    let (rest, x) = solve_without(state, k)?;
    let lap = state.laplacian();
    let coupled: f64 = rest.iter().zip(x.iter()).map(|(&v, xv)| lap.get(k, v) * xv).sum();
    Ok(-2.0 * labeled_coupling(state, k) + 2.0 * coupled)
}

/// Decision value of one node by imputation: impute `ū` with the harmonic
/// solution that ignores `k`, take the harmonic value of `k` given its
/// neighbours, and scale by `2 L_kk`.
pub fn tsa_imputation_decision(state: &LabelState, k: usize) -> Result<f64> {
    let (rest, x) = solve_without(state, k)?;
    let lap = state.laplacian();
    let imputed = -x;
    let lkk = lap.get(k, k);
    if !(lkk > TOLERANCES.singularity) {
        return Err(Error::Degenerate {
            node: k,
            pivot: lkk,
            tolerance: TOLERANCES.singularity,
        });
    }
    let neighbour_sum: f64 = labeled_coupling(state, k)
        + rest
            .iter()
            .zip(imputed.iter())
            .map(|(&v, yv)| lap.get(k, v) * yv)
            .sum::<f64>();
    let y_hat_k = -neighbour_sum / lkk;
    Ok(2.0 * lkk * y_hat_k)
}

/// Exact posterior marginals of the binary Markov random field.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    pub nodes: Vec<usize>,
    /// `P(Y_k = +1 | y_ℓ)`.
    pub probs: Vec<f64>,
    /// `log Σ exp(-E)` over completions, with `E = ½ yᵀ L y` minus the
    /// constant `½ y_ℓᵀ L_ℓℓ y_ℓ`.
    pub log_partition: f64,
}

/// Marginals by summing `exp(-½ yᵀ L y)` over all `2^|u|` completions.
///
/// Walks the completions in Gray-code order so each step flips one label and
/// updates the energy in `O(|u|)`; weights are accumulated in log space with
/// rescaling whenever a new maximum appears.
pub fn exact_bmrf_marginals(
    laplacian: &Laplacian,
    observations: &[(usize, Label)],
    cap: usize,
) -> Result<ExactPosterior> {
    let n = laplacian.node_count();
    let mut label_of = vec![None; n];
    for &(v, y) in observations {
        if v >= n {
            return Err(Error::Usage(format!("node {v} is outside the graph (n = {n})")));
        }
        if label_of[v].replace(y).is_some() {
            return Err(Error::Usage(format!("node {v} is labeled twice")));
        }
    }
    let nodes: Vec<usize> = (0..n).filter(|&v| label_of[v].is_none()).collect();
    let m = nodes.len();
    if m > cap {
        return Err(Error::Capacity { unlabeled: m, cap });
    }
    if m == 0 {
        return Ok(ExactPosterior {
            nodes,
            probs: Vec::new(),
            log_partition: 0.0,
        });
    }

    let a = laplacian.submatrix(&nodes, &nodes);
    let b: Vec<f64> = nodes
        .iter()
        .map(|&k| {
            observations
                .iter()
                .map(|&(j, y)| laplacian.get(k, j) * y.sign())
                .sum()
        })
        .collect();

    // Start from y = +1 everywhere.
    let mut y = vec![1.0f64; m];
    let mut s: Vec<f64> = (0..m).map(|i| a.row(i).sum() + b[i]).collect();
    let mut energy: f64 = 0.5 * a.sum() + b.iter().sum::<f64>();

    let mut log_max = -energy;
    let mut total = 1.0f64;
    let mut plus = vec![1.0f64; m];

    let configs: u64 = 1u64 << m;
    for step in 1..configs {
        let j = step.trailing_zeros() as usize;
        let yj = y[j];
        energy += -2.0 * yj * s[j] + 2.0 * a[(j, j)];
        for (i, si) in s.iter_mut().enumerate() {
            *si -= 2.0 * yj * a[(i, j)];
        }
        y[j] = -yj;

        let lw = -energy;
        if lw > log_max {
            let scale = (log_max - lw).exp();
            total *= scale;
            for p in plus.iter_mut() {
                *p *= scale;
            }
            log_max = lw;
        }
        let w = (lw - log_max).exp();
        total += w;
        for (p, &yi) in plus.iter_mut().zip(&y) {
            if yi > 0.0 {
                *p += w;
            }
        }
    }

    Ok(ExactPosterior {
        nodes,
        probs: plus.iter().map(|p| p / total).collect(),
        log_partition: log_max + total.ln(),
    })
}

/// Exact marginals for a state's current observations with the default cap.
pub fn exact_marginals_for(state: &LabelState) -> Result<ExactPosterior> {
    exact_bmrf_marginals(state.laplacian(), &state.observations(), DEFAULT_ENUM_CAP)
}
