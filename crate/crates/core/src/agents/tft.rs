//! Imitative strategies: relative tit-for-tat and a Bayesian variant that
//! mirrors concessions in its own utility and shapes offers with an LP.

use crate::agents::simplex::simplex_solve;
use crate::error::{contract, ensure_len, Result};
use crate::protocol::{share_value, Decision, GameRng, Negotiator, Offer, Scenario, Side, Turn};

/// `old / new`, or 1 when either side of the ratio is zero.
fn concession_ratio(old: f64, new: f64) -> f64 {
    if old == 0.0 || new == 0.0 {
        1.0
    } else {
        old / new
    }
}

/// One issue of the relative tit-for-tat rule: scale the previous own share
/// by the opponent's concession ratio and clamp into `[lo, hi]`.
pub fn relative_tft_share(ratio: f64, previous_own: f64, lo: f64, hi: f64) -> f64 {
    (ratio * previous_own).max(lo).min(hi)
}

/// Per-game memory of a relative tit-for-tat agent.
///
/// Opponent offers are stored as the shares they would hand to us, so a
/// growing entry means the opponent conceded on that issue.
#[derive(Clone, Debug, PartialEq)]
pub struct TftState {
    pub delta_lag: usize,
    pub issue_bounds: Vec<(f64, f64)>,
    pub own_offer_history: Vec<Vec<f64>>,
    pub opponent_offer_history: Vec<Vec<f64>>,
}

impl TftState {
    pub fn new(delta_lag: usize, issue_bounds: Vec<(f64, f64)>) -> Result<Self> {
        if delta_lag == 0 {
            return Err(contract("tit-for-tat lag must be at least 1"));
        }
        for &(lo, hi) in &issue_bounds {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(contract(format!("issue bounds ({lo}, {hi}) not inside [0, 1]")));
            }
        }
        Ok(TftState {
            delta_lag,
            issue_bounds,
            own_offer_history: Vec::new(),
            opponent_offer_history: Vec::new(),
        })
    }

    pub fn clear(&mut self) {
        self.own_offer_history.clear();
        self.opponent_offer_history.clear();
    }

    /// Whether enough history exists to apply the reciprocity rule.
    pub fn is_warm(&self) -> bool {
        self.opponent_offer_history.len() >= 2 * self.delta_lag && !self.own_offer_history.is_empty()
    }

    /// Next own demand. Before the history is warm the agent opens with the
    /// largest share its bounds allow.
    pub fn next_offer(&self) -> Vec<f64> {
        if !self.is_warm() {
            return self.issue_bounds.iter().map(|&(_, hi)| hi).collect();
        }
        let k = self.opponent_offer_history.len();
        let old = &self.opponent_offer_history[k - 1 - self.delta_lag];
        let new = &self.opponent_offer_history[k - self.delta_lag];
        let previous = self.own_offer_history.last().expect("warm history");
        self.issue_bounds
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| relative_tft_share(concession_ratio(old[j], new[j]), previous[j], lo, hi))
            .collect()
    }
}

/// Relative tit-for-tat: concedes in proportion to the opponent's last
/// concession, issue by issue.
#[derive(Clone, Debug)]
pub struct RelativeTft {
    pub state: TftState,
}

impl RelativeTft {
    pub fn new(delta_lag: usize) -> Result<Self> {
        Ok(RelativeTft {
            state: TftState::new(delta_lag, Vec::new())?,
        })
    }
}

impl Negotiator for RelativeTft {
    fn begin(&mut self, scenario: &Scenario, _side: Side) {
        self.state.clear();
        let m = scenario.issue_count();
        if self.state.issue_bounds.len() != m {
            self.state.issue_bounds = vec![(0.0, 1.0); m];
        }
    }

    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, _rng: &mut GameRng) -> Decision {
        let received = offer.shares_for(turn.side);
        self.state.opponent_offer_history.push(received.clone());
        let weights = turn.own_weights();
        let next = self.state.next_offer();
        if share_value(weights, &received) >= share_value(weights, &next) {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    fn propose(&mut self, _turn: &Turn<'_>, _rng: &mut GameRng) -> Vec<f64> {
        let next = self.state.next_offer();
        self.state.own_offer_history.push(next.clone());
        next
    }
}

/// Estimated opponent issue values, scaled to a fixed total.
#[derive(Clone, Debug, PartialEq)]
pub struct OpponentValueEstimate {
    pub weights_estimate: Vec<f64>,
}

/// Averages the opponent's offers after normalizing each by its component
/// sum, then rescales to `scale`. An all-zero offer counts as uniform.
pub fn estimate_opponent_weights(opponent_offers: &[Vec<f64>], scale: f64) -> Result<OpponentValueEstimate> {
    let Some(first) = opponent_offers.first() else {
        return Err(contract("cannot estimate weights from an empty history"));
    };
    let m = first.len();
    let mut mean = vec![0.0; m];
    for offer in opponent_offers {
        ensure_len(m, offer.len())?;
        let total: f64 = offer.iter().sum();
        for (acc, v) in mean.iter_mut().zip(offer) {
            *acc += if total > 0.0 { v / total } else { 1.0 / m as f64 };
        }
    }
    let n = opponent_offers.len() as f64;
    Ok(OpponentValueEstimate {
        weights_estimate: mean.into_iter().map(|v| scale * v / n).collect(),
    })
}

/// The share vector worth exactly `target` to us that the estimated opponent
/// likes best: maximize `estimate·(1 - x)` subject to `own_weights·x = target`.
/// Targets outside `[0, Σw]` are clamped first.
pub fn bayesian_tft_offer(own_weights: &[f64], estimate: &[f64], target: f64) -> Result<Vec<f64>> {
    ensure_len(own_weights.len(), estimate.len())?;
    let total: f64 = own_weights.iter().sum();
    let target = target.clamp(0.0, total);
    let negated: Vec<f64> = estimate.iter().map(|v| -v).collect();
    simplex_solve(&negated, own_weights, target)
}

/// Mirrors the opponent's concessions, measured in its own utility, and
/// builds each offer to be as attractive as possible to the opponent.
#[derive(Clone, Debug)]
pub struct BayesianTft {
    pub delta_lag: usize,
    pub reserve: f64,
    pub scale: f64,
    target: f64,
    /// Opponent offers as the shares the opponent keeps.
    opponent_kept: Vec<Vec<f64>>,
    /// Our utility of each opponent offer.
    opponent_value: Vec<f64>,
}

impl BayesianTft {
    pub fn new(delta_lag: usize, reserve: f64) -> Result<Self> {
        if delta_lag == 0 {
            return Err(contract("tit-for-tat lag must be at least 1"));
        }
        if !(0.0..1.0).contains(&reserve) {
            return Err(contract(format!("reserve {reserve} outside [0, 1)")));
        }
        Ok(BayesianTft {
            delta_lag,
            reserve,
            scale: 6.0,
            target: f64::NAN,
            opponent_kept: Vec::new(),
            opponent_value: Vec::new(),
        })
    }

    /// Current unnormalized utility target.
    pub fn target(&self) -> f64 {
        self.target
    }

    fn update_target(&mut self, own_weights: &[f64]) {
        let k = self.opponent_value.len();
        if k > self.delta_lag {
            let new = self.opponent_value[k - self.delta_lag];
            let old = self.opponent_value[k - self.delta_lag - 1];
            self.target *= concession_ratio(old, new);
        }
        let total: f64 = own_weights.iter().sum();
        self.target = self.target.clamp(self.reserve * total, total);
    }
}

impl Negotiator for BayesianTft {
    fn begin(&mut self, scenario: &Scenario, side: Side) {
        self.target = scenario.total_weight(side);
        self.opponent_kept.clear();
        self.opponent_value.clear();
    }

    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, _rng: &mut GameRng) -> Decision {
        let weights = turn.own_weights();
        let value = share_value(weights, &offer.shares_for(turn.side));
        self.opponent_kept.push(offer.shares_for(turn.side.other()));
        self.opponent_value.push(value);
        if value >= self.target {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    fn propose(&mut self, turn: &Turn<'_>, _rng: &mut GameRng) -> Vec<f64> {
        let weights = turn.own_weights();
        self.update_target(weights);
        if self.opponent_kept.is_empty() {
            return bayesian_tft_offer(weights, &vec![1.0; weights.len()], self.target)
                .expect("clamped target is feasible");
        }
        let estimate =
            estimate_opponent_weights(&self.opponent_kept, self.scale).expect("non-empty history of consistent length");
        bayesian_tft_offer(weights, &estimate.weights_estimate, self.target).expect("clamped target is feasible")
    }
}
