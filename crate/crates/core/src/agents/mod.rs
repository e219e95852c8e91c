//! Scripted opponents.

pub mod simplex;
pub mod tft;
pub mod time;
pub mod zoo;

use rand::Rng;

use crate::protocol::{share_value, Decision, GameRng, Negotiator, Offer, Turn};

pub use simplex::simplex_solve;
pub use tft::{
    bayesian_tft_offer, estimate_opponent_weights, relative_tft_share, BayesianTft, OpponentValueEstimate, RelativeTft,
    TftState,
};
pub use time::{
    decision_utility, planar_offer, preference_concession_offer, time_agent_accept, OfferMode, TimeAgent,
    TimeAgentConfig,
};
pub use zoo::AgentSpec;

/// Take-it-or-leave-it: always demands everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hardliner;

pub fn hardliner_offer(issue_count: usize) -> Vec<f64> {
    vec![1.0; issue_count]
}

impl Negotiator for Hardliner {
    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, _rng: &mut GameRng) -> Decision {
        let weights = turn.own_weights();
        if share_value(weights, &offer.shares_for(turn.side)) >= weights.iter().sum::<f64>() {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    fn propose(&mut self, turn: &Turn<'_>, _rng: &mut GameRng) -> Vec<f64> {
        hardliner_offer(turn.scenario.issue_count())
    }
}

/// Offers i.i.d. uniform shares and accepts by a biased coin.
#[derive(Clone, Copy, Debug)]
pub struct RandomWalker {
    pub accept_probability: f64,
}

impl Default for RandomWalker {
    fn default() -> Self {
        RandomWalker {
            accept_probability: 0.5,
        }
    }
}

pub fn random_walker_offer(issue_count: usize, rng: &mut GameRng) -> Vec<f64> {
    (0..issue_count).map(|_| rng.random::<f64>()).collect()
}

impl Negotiator for RandomWalker {
    fn respond(&mut self, _turn: &Turn<'_>, _offer: &Offer, rng: &mut GameRng) -> Decision {
        if rng.random_bool(self.accept_probability) {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    fn propose(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Vec<f64> {
        random_walker_offer(turn.scenario.issue_count(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_negotiation, EndState, Scenario};
    use rand::SeedableRng;

    #[test]
    fn random_walker_moments() {
        let mut rng = GameRng::seed_from_u64(5);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| random_walker_offer(3, &mut rng)).collect();
        let mean = |i: usize| draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
        let means: Vec<f64> = (0..3).map(mean).collect();
        for m in &means {
            assert!((m - 0.5).abs() < 0.01, "{means:?}");
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let cov = draws.iter().map(|d| (d[i] - means[i]) * (d[j] - means[j])).sum::<f64>() / n as f64;
            // uniform variance is 1/12
            let corr = cov * 12.0;
            assert!(corr.abs() < 0.02, "corr({i},{j}) = {corr}");
        }
    }

    #[test]
    fn hardliner_always_demands_everything() {
        let s = Scenario::default();
        let mut rng = GameRng::seed_from_u64(0);
        for round in 1..=20 {
            let turn = Turn {
                scenario: &s,
                side: crate::protocol::Side::A,
                round,
                may_accept: true,
            };
            assert_eq!(Hardliner.propose(&turn, &mut rng), vec![1.0; 3]);
        }
    }

    #[test]
    fn conceders_settle_early() {
        // Two c = 10 agents: the brute-force playout must stop before the
        // deadline, at a round where the accepted offer clears the threshold.
        let s = Scenario::default();
        let config = TimeAgentConfig {
            concession: 10.0,
            noise_sigma: 0.0,
            ..TimeAgentConfig::default()
        };
        let mut a = TimeAgent::new(config.clone()).unwrap();
        let mut b = TimeAgent::new(config.clone()).unwrap();
        let t = run_negotiation(&mut a, &mut b, &s, 3).unwrap();
        assert_eq!(t.end_state, EndState::Accepted);
        assert!(t.end_round < s.deadline());
        let acceptor = t.acceptor().unwrap();
        let offer = t.agreement.as_ref().unwrap();
        let w = s.weights(acceptor);
        let value = share_value(w, &offer.shares_for(acceptor)) / 6.0;
        let threshold = decision_utility(&config, f64::from(t.end_round), 20.0).unwrap();
        assert!(value >= threshold);
    }
}
