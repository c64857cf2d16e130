//! Expected error minimization: zero-one risk, one-step lookahead risk, and
//! the argmin query rule.
//!
//! The lookahead posteriors never require a new inversion. Labeling `q` as
//! `y` is modelled by attaching a node of infinite weight and known label to
//! `q`, which gives closed-form updates of the decision values in `O(|u|)`
//! per candidate, so scoring every candidate costs `O(|u|^2)`.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{DEFAULT_ENUM_CAP, TOLERANCES};
use crate::error::{Error, Result};
use crate::inference::{
    self, exact_bmrf_marginals, sigmoid, zlg_probability, Decision, MarginalKind, MarginalVector,
};
use crate::state::{Label, LabelState};

/// Candidate count above which lookahead risks are scored in parallel.
const PARALLEL_CANDIDATES: usize = 256;

/// Expected zero-one risk `(1/n) Σ_{k∈u} (1 - max(p_k, 1 - p_k))`.
/// Labeled nodes contribute nothing.
pub fn zero_one_risk(probs: &[f64], n: usize) -> f64 {
    probs.iter().map(|&p| p.min(1.0 - p)).sum::<f64>() / n as f64
}

/// `G_kk - G_kq^2 / G_qq`: the variance of `k` once `q` is fixed.
fn conditioned_variance(g: &nalgebra::DMatrix<f64>, k: usize, q: usize) -> Result<f64> {
    let s = g[(k, k)] - g[(k, q)] * g[(k, q)] / g[(q, q)];
    if s > TOLERANCES.singularity {
        Ok(s)
    } else {
        Err(Error::Degenerate {
            node: k,
            pivot: s,
            tolerance: TOLERANCES.singularity,
        })
    }
}

fn check_pivot(state: &LabelState, q: usize) -> Result<usize> {
    let pos = state
        .position_of(q)
        .ok_or_else(|| Error::Usage(format!("node {q} is not unlabeled")))?;
    let gqq = state.inverse()[(pos, pos)];
    if gqq > TOLERANCES.singularity {
        Ok(pos)
    } else {
        Err(Error::Degenerate {
            node: q,
            pivot: gqq,
            tolerance: TOLERANCES.singularity,
        })
    }
}

/// TSA decision of position `k` after fixing position `q` to `y`:
/// `2 / (G_kk - G_kq²/G_qq) · (½ G_kk f_k + (y / G_qq - f_q / 2) G_kq)`.
#[inline]
fn lookahead_decision(
    g: &nalgebra::DMatrix<f64>,
    f: &DVector<f64>,
    k: usize,
    q: usize,
    y: f64,
) -> Result<f64> {
    let s = conditioned_variance(g, k, q)?;
    let coef = y / g[(q, q)] - 0.5 * f[q];
    Ok(2.0 / s * (0.5 * g[(k, k)] * f[k] + coef * g[(k, q)]))
}

/// TSA decision values over `u` after observing `Y_q = y`, given the current
/// decision vector `f` (in `unlabeled` order). Entry `q` is saturated at `y`.
pub fn tsa_lookahead_decisions(
    state: &LabelState,
    f: &DVector<f64>,
    q: usize,
    y: Label,
) -> Result<Vec<Decision>> {
    let qp = check_pivot(state, q)?;
    let g = state.inverse();
    (0..f.len())
        .map(|k| {
            if k == qp {
                Ok(Decision::Saturated(y))
            } else {
                lookahead_decision(g, f, k, qp, y.sign()).map(Decision::Finite)
            }
        })
        .collect()
}

/// Harmonic values over `u` after observing `Y_q = y`:
/// `h_k + (y - h_q) G_kq / G_qq`. Entry `q` equals `y` exactly.
pub fn zlg_lookahead_harmonic(
    state: &LabelState,
    h: &DVector<f64>,
    q: usize,
    y: Label,
) -> Result<DVector<f64>> {
    let qp = check_pivot(state, q)?;
    let g = state.inverse();
    let shift = (y.sign() - h[qp]) / g[(qp, qp)];
    let mut out = DVector::from_fn(h.len(), |k, _| h[k] + shift * g[(k, qp)]);
    out[qp] = y.sign();
    Ok(out)
}

/// Lookahead risk of every candidate and the set attaining the minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub per_query: Vec<(usize, f64)>,
    pub argmin: Vec<usize>,
}

impl RiskReport {
    pub fn from_risks(per_query: Vec<(usize, f64)>) -> Self {
        let argmin = argmin_within(&per_query, TOLERANCES.tie);
        Self { per_query, argmin }
    }

    pub fn risk_of(&self, node: usize) -> Option<f64> {
        self.per_query.iter().find(|(v, _)| *v == node).map(|(_, r)| *r)
    }

    pub fn min_risk(&self) -> Option<f64> {
        self.per_query.iter().map(|&(_, r)| r).reduce(f64::min)
    }
}

/// Candidates whose score lies within `tol` (relative, on unit scale) of the minimum.
pub(crate) fn argmin_within(scores: &[(usize, f64)], tol: f64) -> Vec<usize> {
    let Some(best) = scores.iter().map(|&(_, r)| r).reduce(f64::min) else {
        return Vec::new();
    };
    let slack = tol * best.abs().max(1.0);
    scores
        .iter()
        .filter(|&&(_, r)| r - best <= slack)
        .map(|&(v, _)| v)
        .collect()
}

/// Uniform draw from a nonempty candidate set; a single candidate consumes
/// no randomness.
pub fn break_tie<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> Option<usize> {
    match candidates.len() {
        0 => None,
        1 => Some(candidates[0]),
        len => Some(candidates[rng.random_range(0..len)]),
    }
}

/// Picks a minimizer of the lookahead risk, ties broken uniformly.
pub fn select_query_eem<R: Rng + ?Sized>(report: &RiskReport, rng: &mut R) -> Option<usize> {
    break_tie(&report.argmin, rng)
}

/// One binary run: the label state plus its TSA decision vector, which is
/// carried forward with the lookahead update instead of being recomputed.
#[derive(Debug, Clone)]
pub struct BinaryModel {
    state: LabelState,
    decisions: DVector<f64>,
    enum_cap: usize,
}

impl BinaryModel {
    pub fn new(state: LabelState) -> Self {
        let decisions = inference::tsa_decisions(&state);
        Self {
            state,
            decisions,
            enum_cap: DEFAULT_ENUM_CAP,
        }
    }

    pub fn with_enum_cap(mut self, cap: usize) -> Self {
        self.enum_cap = cap;
        self
    }

    pub fn state(&self) -> &LabelState {
        &self.state
    }

    pub fn node_count(&self) -> usize {
        self.state.node_count()
    }

    /// Current TSA decision values in `unlabeled` order.
    pub fn decisions(&self) -> &DVector<f64> {
        &self.decisions
    }

    /// Harmonic values recovered from the decisions: `h_k = f_k G_kk / 2`.
    pub fn harmonic(&self) -> DVector<f64> {
        let g = self.state.inverse();
        DVector::from_fn(self.decisions.len(), |k, _| 0.5 * self.decisions[k] * g[(k, k)])
    }

    pub fn marginals(&self, kind: MarginalKind) -> Result<MarginalVector> {
        let nodes = self.state.unlabeled();
        Ok(match kind {
            MarginalKind::Tsa => {
                inference::marginals_from_decisions(nodes, self.decisions.iter().copied())
            }
            MarginalKind::Zlg => {
                let h = self.harmonic();
                MarginalVector {
                    nodes: nodes.to_vec(),
                    probs: h.iter().map(|&v| zlg_probability(v)).collect(),
                    decision: h.iter().map(|&v| Decision::Finite(v)).collect(),
                }
            }
            MarginalKind::Exact => {
                let exact = exact_bmrf_marginals(
                    self.state.laplacian(),
                    &self.state.observations(),
                    self.enum_cap,
                )?;
                MarginalVector {
                    nodes: exact.nodes,
                    decision: exact
                        .probs
                        .iter()
                        .map(|&p| Decision::Finite((p / (1.0 - p)).ln()))
                        .collect(),
                    probs: exact.probs,
                }
            }
        })
    }

    /// Label prediction for every node: observed labels as-is, unlabeled
    /// nodes by thresholding the harmonic solution at 0 (ties to `+1`).
    pub fn predict(&self) -> Vec<Label> {
        let mut out = vec![Label::Pos; self.node_count()];
        for (v, l) in self.state.observations() {
            out[v] = l;
        }
        for (&v, &f) in self.state.unlabeled().iter().zip(self.decisions.iter()) {
            out[v] = Label::from_value(f);
        }
        out
    }

    /// Commits `Y_q = y`: downdates `G` and advances `f` with the lookahead
    /// update for the realized label. Never re-inverts.
    pub fn commit(&self, q: usize, y: Label) -> Result<Self> {
        let qp = check_pivot(&self.state, q)?;
        let g = self.state.inverse();
        let mut next = Vec::with_capacity(self.decisions.len().saturating_sub(1));
        for k in 0..self.decisions.len() {
            if k != qp {
                next.push(lookahead_decision(g, &self.decisions, k, qp, y.sign())?);
            }
        }
        let state = self.state.observe(q, y)?;
        Ok(Self {
            state,
            decisions: DVector::from_vec(next),
            enum_cap: self.enum_cap,
        })
    }

    /// Post-observation marginal probabilities over `u` (entry `q` is 0/1)
    /// for one branch `Y_q = y`.
    pub(crate) fn lookahead_probs(&self, kind: MarginalKind, q: usize, y: Label) -> Result<Vec<f64>> {
        match kind {
            MarginalKind::Tsa => Ok(tsa_lookahead_decisions(&self.state, &self.decisions, q, y)?
                .into_iter()
                .map(Decision::probability)
                .collect()),
            MarginalKind::Zlg => Ok(zlg_lookahead_harmonic(&self.state, &self.harmonic(), q, y)?
                .iter()
                .map(|&v| zlg_probability(v))
                .collect()),
            MarginalKind::Exact => {
                let mut obs = self.state.observations();
                obs.push((q, y));
                let exact = exact_bmrf_marginals(self.state.laplacian(), &obs, self.enum_cap)?;
                let mut out = Vec::with_capacity(self.state.unlabeled().len());
                let mut it = exact.probs.into_iter();
                for &v in self.state.unlabeled() {
                    out.push(if v == q {
                        if y == Label::Pos { 1.0 } else { 0.0 }
                    } else {
                        it.next().expect("exact marginals cover u minus q")
                    });
                }
                Ok(out)
            }
        }
    }

    /// `R^{+q} = Σ_y R(Y_q = y) P(Y_q = y)` under the chosen approximation.
    pub fn lookahead_risk(&self, kind: MarginalKind, q: usize) -> Result<f64> {
        let current = self.marginals(kind)?;
        let qp = self
            .state
            .position_of(q)
            .ok_or_else(|| Error::Usage(format!("node {q} is not unlabeled")))?;
        self.lookahead_risk_at(kind, qp, current.probs[qp])
    }

    fn lookahead_risk_at(&self, kind: MarginalKind, qp: usize, p_pos: f64) -> Result<f64> {
        let n = self.node_count() as f64;
        let q = self.state.unlabeled()[qp];
        let mut total = 0.0;
        for y in Label::BOTH {
            let weight = if y == Label::Pos { p_pos } else { 1.0 - p_pos };
            let branch = match kind {
                MarginalKind::Tsa => self.tsa_branch_risk(qp, y)?,
                _ => {
                    let probs = self.lookahead_probs(kind, q, y)?;
                    probs.iter().map(|&p| p.min(1.0 - p)).sum::<f64>() / n
                }
            };
            total += weight * branch;
        }
        Ok(total)
    }

    /// Zero-one risk after `Y_q = y` without materializing the vector.
    fn tsa_branch_risk(&self, qp: usize, y: Label) -> Result<f64> {
        let g = self.state.inverse();
        let mut sum = 0.0;
        for k in 0..self.decisions.len() {
            if k == qp {
                continue;
            }
            let p = sigmoid(lookahead_decision(g, &self.decisions, k, qp, y.sign())?);
            sum += p.min(1.0 - p);
        }
        Ok(sum / self.node_count() as f64)
    }

    /// Lookahead risk of every unlabeled node.
    pub fn risk_report(&self, kind: MarginalKind) -> Result<RiskReport> {
        let current = self.marginals(kind)?;
        let u = self.state.unlabeled();
        let score = |qp: usize| -> Result<(usize, f64)> {
            Ok((u[qp], self.lookahead_risk_at(kind, qp, current.probs[qp])?))
        };
        let per_query: Result<Vec<_>> = if u.len() >= PARALLEL_CANDIDATES {
            (0..u.len()).into_par_iter().map(score).collect()
        } else {
            (0..u.len()).map(score).collect()
        };
        Ok(RiskReport::from_risks(per_query?))
    }
}
