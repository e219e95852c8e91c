//! Actor-critic training against scripted opponents and in self-play.

pub mod agent;
pub mod eval;
pub mod loops;
pub mod metrics;
pub mod reward;

pub use agent::{
    accept_net_update, offer_net_update, AgentArchitecture, DiscreteRecord, EpisodeBuffer, Learner, Losses,
    NeuralAgent, OfferArchitecture, OfferLosses, OfferPolicy, OfferRecord,
};
pub use eval::{evaluate, summarize, EvalSummary};
pub use loops::{
    rng_stream, time_opponent, train_self_play, train_self_play_observed, train_vs_opponent,
    train_vs_opponent_observed, train_vs_tft, NetSelection, SelfPlayConfig, SelfPlayMode, SelfPlayOutcome, TftVariant,
    TrainConfig, TrainOutcome, BAYES_TFT_DISCOUNT,
};
pub use metrics::{EarlyStop, EpochMetrics, TrainingLog};
pub use reward::{assign_rewards, PenaltyReward};
