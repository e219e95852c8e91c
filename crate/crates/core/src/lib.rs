//! Bilateral multi-issue negotiation: the alternating-offers mechanism,
//! scripted opponents, analytic oracles, and actor-critic learners trained
//! against both.

pub mod agents;
pub mod analysis;
pub mod error;
pub mod neural;
pub mod protocol;
pub mod training;

pub use error::{Error, Result};
pub use protocol::{
    normalized_utility, run_negotiation, utility, Decision, EndState, GameRng, GameRules, Negotiation, Negotiator,
    Offer, Scenario, Side, Transcript, Turn,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/neural.md")]
    mod neural {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
