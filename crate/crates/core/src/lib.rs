//! Graph-based active learning over a binary Markov random field.
//!
//! Labels on a weighted graph are modelled as `P(y) ∝ exp(-β/2 · yᵀ L y)`.
//! Given observed labels, the crate approximates the posterior marginals of
//! the remaining nodes (TSA decision values `f_k = 2 h_k / G_kk`, where `h`
//! is the harmonic solution and `G = (L_uu)^-1`), and picks the next node to
//! query by minimizing the expected zero-one risk one step ahead. `G` is
//! inverted once and then downdated per query, so each query costs `O(n^2)`.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | graphs, Laplacians, dense inverse and rank-one downdate |
//! | [`state`] | labeled/unlabeled partition with the maintained inverse |
//! | [`inference`] | harmonic, TSA, linear (ZLG), and exact marginals |
//! | [`eem`] | zero-one risk, lookahead updates, argmin query rule |
//! | [`strategies`] | TSA/ZLG/VOpt/SOpt/random, one-vs-rest learner |
//! | [`harness`] | toy generators, dataset files, trials, CSV |
//! | [`selftest`] | fast-route vs reference-route equivalence checks |

pub mod cli;
pub mod config;
pub mod eem;
pub mod error;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod selftest;
pub mod state;
pub mod strategies;

pub use config::Tolerances;
pub use eem::{BinaryModel, RiskReport};
pub use error::{Error, Result};
pub use graph::{build_laplacian, Graph, Laplacian};
pub use harness::{Dataset, DatasetSource, ExperimentTable, ModelParams, TrialRecord, TrialSeeds};
pub use inference::{Decision, ExactPosterior, MarginalKind, MarginalVector};
pub use state::{Label, LabelState};
pub use strategies::{Learner, QueryStrategy, StrategyKind};
