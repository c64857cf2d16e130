//! Numerical tolerances and limits shared by every module.

/// Central tolerance record. Every comparison against a numerical threshold
/// in the crate reads from one of these fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-abs deviation accepted between two algebraically equal routes.
    pub equivalence: f64,
    /// Pivots (`G_kk`, Schur complements) at or below this are degenerate.
    pub singularity: f64,
    /// Max-abs deviation of `G * L_uu` from the identity.
    pub inverse_check: f64,
    /// Risks within this distance (on unit scale) of the minimum are tied.
    pub tie: f64,
    /// Decision values beyond this magnitude map to probability exactly 0 or 1.
    pub sigmoid_saturation: f64,
    /// Harmonic values this close to ±1 are treated as exactly ±1 when
    /// mapped to a linear-approximation probability.
    pub boundary_snap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

/// Largest number of unlabeled nodes the enumeration oracle accepts by default.
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Default model strength.
pub const DEFAULT_BETA: f64 = 1.0;

/// Default tolerances.
pub const TOLERANCES: Tolerances = Tolerances {
    equivalence: 1e-9,
    singularity: 1e-12,
    inverse_check: 1e-8,
    tie: 1e-12,
    sigmoid_saturation: 36.0,
    boundary_snap: 1e-12,
};
