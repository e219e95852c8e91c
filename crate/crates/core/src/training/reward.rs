use crate::protocol::{share_value, Offer, RewardScheme, Scenario, Side, Transcript};

/// Default conflict penalty.
pub const DEFAULT_PENALTY: f64 = 1.0;

/// Discounted utility of the agreed division, or `-K` for both sides when
/// the deadline passes without agreement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyReward {
    pub penalty: f64,
}

impl Default for PenaltyReward {
    fn default() -> Self {
        PenaltyReward {
            penalty: DEFAULT_PENALTY,
        }
    }
}

impl RewardScheme for PenaltyReward {
    fn rewards(&self, scenario: &Scenario, agreement: Option<&Offer>, end_round: u32) -> [f64; 2] {
        match agreement {
            None => [-self.penalty; 2],
            Some(offer) => [Side::A, Side::B].map(|side| {
                scenario.discount_factor(end_round) * share_value(scenario.weights(side), &offer.shares_for(side))
            }),
        }
    }
}

/// Terminal rewards of a finished game under the penalty scheme.
pub fn assign_rewards(transcript: &Transcript, scenario: &Scenario, penalty: f64) -> [f64; 2] {
    PenaltyReward { penalty }.rewards(scenario, transcript.agreement.as_ref(), transcript.end_round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{EndState, Scenario};

    fn accepted(scenario: &Scenario, shares_b: Vec<f64>, round: u32) -> Transcript {
        let mut t = Transcript {
            events: Vec::new(),
            end_state: EndState::Accepted,
            final_rewards: [0.0; 2],
            end_round: round,
            agreement: Some(Offer::new(Side::B, shares_b, round).unwrap()),
        };
        t.final_rewards = assign_rewards(&t, scenario, 1.0);
        t
    }

    #[test]
    fn conflict_costs_both() {
        let s = Scenario::default();
        let t = Transcript {
            events: Vec::new(),
            end_state: EndState::ConflictDeal,
            final_rewards: [0.0; 2],
            end_round: 20,
            agreement: None,
        };
        assert_eq!(assign_rewards(&t, &s, 1.0), [-1.0, -1.0]);
        assert_eq!(assign_rewards(&t, &s, 2.5), [-2.5, -2.5]);
    }

    #[test]
    fn acceptor_gets_discounted_value() {
        let s = Scenario::default();
        // B keeps (1, 0.5, 0), so A holds (0, 0.5, 1): 0 + 1 + 3.
        let t = accepted(&s, vec![1.0, 0.5, 0.0], 1);
        assert_eq!(t.final_rewards[Side::A.index()], 4.0);
        let d = Scenario::new(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], 0.9, 20, 0.0).unwrap();
        let t = accepted(&d, vec![1.0, 0.5, 0.0], 3);
        assert!((t.final_rewards[0] - 4.0 * 0.81).abs() < 1e-12);
    }
}
