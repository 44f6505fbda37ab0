//! Environments, query sources, loss ledgers, and the episode loop, plus the
//! lower-bound adversary for general convex regions.

pub mod env;
pub mod episode;
pub mod ledger;
pub mod lowerbound;
pub mod queries;

pub use env::{Environment, Metric};
pub use episode::{
    build_learner, build_pair_learner, even_exponent, run_episode, LearnerSettings, OnlineLearner, TwoPoint,
};
pub use ledger::{LossLedger, RoundRecord};
pub use lowerbound::{LowerBoundAdversary, LowerBoundEpisode, RandomGuesser};
pub use queries::{
    margin_stream, parse_replay, read_replay, uniform_stream, QuerySource, DEFAULT_CANDIDATES,
};
