//! Aggregation of linear scoring vectors into collective ranking rules, with
//! Monte Carlo measurement of individual proportionality.
//!
//! Voters are unit vectors `θ_i` on `S^{d-1}` with weights `α_i`. A rule maps
//! each batch of items to a ranking; a voter's IP level on a batch is its
//! pairwise agreement with that ranking divided by `α_i · C(m,2)`.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rules;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use model::{Item, ItemBatch, Profile, Ranking, ScoringVector, TieBreak};
pub use rules::{Mechanism, OptimizerOptions, RankingRule};
pub use sampling::{ItemDistribution, SeedSpec};
