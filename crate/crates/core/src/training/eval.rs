//! Frozen-policy evaluation and the outcome measures reported for it.

use crate::agents::AgentSpec;
use crate::analysis::{bid_distribution, mean_distance_to, outcome_point, pareto_frontier, OutcomePoint};
use crate::error::Result;
use crate::protocol::{GameRng, GameRules, Negotiation, Scenario, Side, Transcript};
use crate::training::agent::NeuralAgent;
use crate::training::loops::rng_stream;
use crate::training::reward::PenaltyReward;

/// Aggregate measures over a batch of games. Distances use the undiscounted
/// utilities of agreed divisions; conflict deals contribute only to reward
/// and time. Empty sets give NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    pub games: usize,
    pub agreements: usize,
    pub d_nash: f64,
    pub bid_distribution: f64,
    pub mean_reward: f64,
    pub mean_time: f64,
    pub reward_range: f64,
}

pub const NASH_POINT: OutcomePoint = OutcomePoint { u_a: 4.0, u_b: 4.0 };

impl EvalSummary {
    pub const CSV_HEADER: [&'static str; 7] = [
        "games",
        "agreements",
        "d_nash",
        "bid_distribution",
        "mean_reward",
        "mean_time",
        "reward_range",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        [
            self.games as f64,
            self.agreements as f64,
            self.d_nash,
            self.bid_distribution,
            self.mean_reward,
            self.mean_time,
            self.reward_range,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect()
    }
}

/// Outcome points of the agreed games.
pub fn agreement_points(scenario: &Scenario, transcripts: &[Transcript]) -> Vec<OutcomePoint> {
    transcripts
        .iter()
        .filter_map(|t| t.agreement.as_ref())
        .map(|o| outcome_point(scenario, &o.shares_for(Side::A)))
        .collect()
}

/// Summary from `side`'s point of view.
pub fn summarize(scenario: &Scenario, transcripts: &[Transcript], side: Side) -> Result<EvalSummary> {
    let points = agreement_points(scenario, transcripts);
    let (d_nash, bd) = if points.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let frontier = pareto_frontier(scenario)?;
        (
            mean_distance_to(&points, NASH_POINT)?,
            bid_distribution(&points, &frontier)?,
        )
    };
    let n = transcripts.len();
    let rewards: Vec<f64> = transcripts.iter().map(|t| t.reward(side)).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let times: Vec<f64> = transcripts.iter().map(|t| f64::from(t.end_round)).collect();
    let range = if rewards.is_empty() {
        f64::NAN
    } else {
        rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - rewards.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(EvalSummary {
        games: n,
        agreements: points.len(),
        d_nash,
        bid_distribution: bd,
        mean_reward: mean(&rewards),
        mean_time: mean(&times),
        reward_range: range,
    })
}

/// Plays `games` games with the agent's current policy (still sampled, but
/// nothing recorded or trained). The learner plays side A.
pub fn evaluate(
    agent: &mut NeuralAgent,
    opponent: &AgentSpec,
    scenario: &Scenario,
    rules: GameRules,
    penalty: f64,
    games: usize,
    seed: u64,
) -> Result<(Vec<Transcript>, EvalSummary)> {
    let mut opp = opponent.build()?;
    let rewards = PenaltyReward { penalty };
    let negotiation = Negotiation::new(scenario).rules(rules).rewards(&rewards);
    let mut rng: GameRng = rng_stream(seed, 3);
    let recording = agent.recording;
    agent.recording = false;
    let mut transcripts = Vec::with_capacity(games);
    let result = (|| {
        for _ in 0..games {
            let t = negotiation.run_with_rng(agent, opp.as_mut(), &mut rng)?;
            if let Some(e) = agent.take_failure() {
                return Err(e);
            }
            transcripts.push(t);
        }
        Ok(())
    })();
    agent.recording = recording;
    result?;
    let summary = summarize(scenario, &transcripts, Side::A)?;
    Ok((transcripts, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{EndState, Offer};

    fn game(shares_a: Option<Vec<f64>>, round: u32, reward: f64) -> Transcript {
        Transcript {
            events: Vec::new(),
            end_state: if shares_a.is_some() {
                EndState::Accepted
            } else {
                EndState::ConflictDeal
            },
            final_rewards: [reward, 0.0],
            end_round: round,
            agreement: shares_a.map(|s| Offer::new(Side::A, s, round).unwrap()),
        }
    }

    #[test]
    fn nash_agreement_scores_zero() {
        let s = Scenario::default();
        let games = vec![game(Some(vec![0.0, 0.5, 1.0]), 4, 4.0), game(None, 20, -1.0)];
        let sum = summarize(&s, &games, Side::A).unwrap();
        assert_eq!(sum.agreements, 1);
        assert!(sum.d_nash.abs() < 1e-12);
        assert!(sum.bid_distribution.abs() < 1e-12);
        assert_eq!(sum.mean_reward, 1.5);
        assert_eq!(sum.mean_time, 12.0);
        assert_eq!(sum.reward_range, 5.0);
    }

    #[test]
    fn empty_batch_is_nan() {
        let sum = summarize(&Scenario::default(), &[], Side::A).unwrap();
        assert_eq!(sum.games, 0);
        assert!(sum.d_nash.is_nan() && sum.mean_reward.is_nan() && sum.mean_time.is_nan());
    }
}
