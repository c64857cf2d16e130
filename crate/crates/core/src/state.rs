//! The labeled/unlabeled partition together with `G = (L_uu)^-1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::TOLERANCES;
use crate::error::{Error, Result};
use crate::graph::{self, Laplacian};

/// A binary label, `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// `+1` for nonnegative values. Ties go to `+1`.
    pub fn from_value(v: f64) -> Self {
        if v >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub const BOTH: [Label; 2] = [Label::Pos, Label::Neg];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "+1",
            Label::Neg => "-1",
        })
    }
}

/// Partition of the nodes into labeled `ℓ` (with labels) and unlabeled `u`,
/// plus the dense inverse `G = (L_uu)^-1`.
///
/// Both index lists are ascending. `G` is indexed by position in `unlabeled`.
#[derive(Debug, Clone)]
pub struct LabelState {
    laplacian: Arc<Laplacian>,
    labeled: Vec<usize>,
    labels: Vec<Label>,
    unlabeled: Vec<usize>,
    /// Position of each node in `unlabeled`, or `None` if labeled.
    position: Vec<Option<usize>>,
    inverse: DMatrix<f64>,
}

impl LabelState {
    /// Builds the state and inverts `L_uu` once (Cholesky, `O(n^3)`).
    pub fn new(laplacian: Arc<Laplacian>, observations: &[(usize, Label)]) -> Result<Self> {
        let n = laplacian.node_count();
        if observations.is_empty() {
            return Err(Error::Usage("at least one labeled node is required".into()));
        }
        let mut label_of: Vec<Option<Label>> = vec![None; n];
        for &(node, label) in observations {
            if node >= n {
                return Err(Error::Usage(format!("node {node} is outside the graph (n = {n})")));
            }
            if label_of[node].replace(label).is_some() {
                return Err(Error::Usage(format!("node {node} is labeled twice")));
            }
        }

        if laplacian.ridge() == 0.0 {
            for component in laplacian.components() {
                if component.iter().all(|&v| label_of[v].is_none()) {
                    return Err(Error::UnanchoredComponent { component });
                }
            }
        }

        let mut labeled = Vec::new();
        let mut labels = Vec::new();
        let mut unlabeled = Vec::new();
        let mut position = vec![None; n];
        for (v, l) in label_of.iter().enumerate() {
            match l {
                Some(l) => {
                    labeled.push(v);
                    labels.push(*l);
                }
                None => {
                    position[v] = Some(unlabeled.len());
                    unlabeled.push(v);
                }
            }
        }

        let block = laplacian.submatrix(&unlabeled, &unlabeled);
        let inverse = graph::invert_spd(&block).ok_or_else(|| Error::Degenerate {
            node: unlabeled.first().copied().unwrap_or(0),
            pivot: 0.0,
            tolerance: TOLERANCES.singularity,
        })?;
        let state = Self {
            laplacian,
            labeled,
            labels,
            unlabeled,
            position,
            inverse,
        };
        state.debug_check_inverse();
        Ok(state)
    }

    /// Moves `node` from `u` to `ℓ` with `label`, downdating `G` in `O(|u|^2)`.
    pub fn observe(&self, node: usize, label: Label) -> Result<Self> {
        let pos = self.position_of(node).ok_or_else(|| {
            Error::Usage(format!("node {node} is already labeled or out of range"))
        })?;
        let inverse = graph::downdate_inverse(&self.inverse, pos, TOLERANCES.singularity)
            .map_err(|e| match e {
                Error::Degenerate { pivot, tolerance, .. } => Error::Degenerate {
                    node,
                    pivot,
                    tolerance,
                },
                other => other,
            })?;

        let at = self.labeled.partition_point(|&v| v < node);
        let mut labeled = self.labeled.clone();
        let mut labels = self.labels.clone();
        labeled.insert(at, node);
        labels.insert(at, label);

        let mut unlabeled = self.unlabeled.clone();
        unlabeled.remove(pos);
        let mut position = self.position.clone();
        position[node] = None;
        for p in position.iter_mut().flatten() {
            if *p > pos {
                *p -= 1;
            }
        }
        let state = Self {
            laplacian: Arc::clone(&self.laplacian),
            labeled,
            labels,
            unlabeled,
            position,
            inverse,
        };
        state.debug_check_inverse();
        Ok(state)
    }

    /// Same partition with every observed label negated. `G` is unchanged.
    pub fn with_flipped_labels(&self, flip: impl Fn(usize) -> bool) -> Self {
        let mut out = self.clone();
        for (v, l) in out.labeled.iter().zip(out.labels.iter_mut()) {
            if flip(*v) {
                *l = l.flip();
            }
        }
        out
    }

    pub fn laplacian(&self) -> &Laplacian {
        &self.laplacian
    }

    pub fn shared_laplacian(&self) -> Arc<Laplacian> {
        Arc::clone(&self.laplacian)
    }

    pub fn node_count(&self) -> usize {
        self.laplacian.node_count()
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn observations(&self) -> Vec<(usize, Label)> {
        self.labeled.iter().copied().zip(self.labels.iter().copied()).collect()
    }

    pub fn label_of(&self, node: usize) -> Option<Label> {
        self.labeled
            .binary_search(&node)
            .ok()
            .map(|i| self.labels[i])
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn position_of(&self, node: usize) -> Option<usize> {
        self.position.get(node).copied().flatten()
    }

    /// `G = (L_uu)^-1`, rows and columns in `unlabeled` order.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `L_uℓ y_ℓ` over `u`.
    pub fn boundary_term(&self) -> DVector<f64> {
        let l = self.laplacian.matrix();
        DVector::from_iterator(
            self.unlabeled.len(),
            self.unlabeled.iter().map(|&k| {
                self.labeled
                    .iter()
                    .zip(&self.labels)
                    .map(|(&j, y)| l[(k, j)] * y.sign())
                    .sum::<f64>()
            }),
        )
    }

    /// Max-abs entry of `G * L_uu - I`.
    pub fn inverse_residual(&self) -> f64 {
        let block = self.laplacian.submatrix(&self.unlabeled, &self.unlabeled);
        graph::identity_residual(&self.inverse, &block)
    }

    /// Debug builds verify small inverses; the cap keeps the `O(n^3)` check
    /// from distorting per-query cost on larger graphs.
    fn debug_check_inverse(&self) {
        if cfg!(debug_assertions) && self.unlabeled.len() <= 64 {
            let r = self.inverse_residual();
            debug_assert!(
                r <= TOLERANCES.inverse_check,
                "inverse drifted: max|G L_uu - I| = {r:e}"
            );
        }
    }
}
