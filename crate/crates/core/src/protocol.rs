//! Alternating-offers bargaining over a package of divisible issues.
//!
//! A game is played in rounds `t = 1..=T`. Inside a round the first mover
//! proposes and the second mover answers; on a rejection the second mover
//! counter-proposes and the first mover answers, after which the round counter
//! advances. An acceptance ends the game immediately. If nobody accepts by the
//! end of round `T` the conflict deal is enacted.
//!
//! Offers are expressed from the proposer's side: `shares[i]` is the fraction
//! of issue `i` the proposer keeps, and the receiver gets `1 - shares[i]`.
//! Utilities are linear-additive and discounted by `δ^(t-1)`.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, ensure_len, Error, Result};

/// Random stream owned by a single game.
pub type GameRng = ChaCha8Rng;

/// Largest per-round growth factor accepted for centipede scenarios.
pub const GROWTH_CAP: f64 = 1.3;

/// Schema tag written as the first line of every transcript CSV.
pub const TRANSCRIPT_SCHEMA: &str = "# schema: bargain.transcript.v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// Public parameters of one bilateral negotiation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    weights_a: Vec<f64>,
    weights_b: Vec<f64>,
    discount: f64,
    deadline: u32,
    reserve: f64,
    growth: bool,
}

impl Scenario {
    pub fn new(weights_a: Vec<f64>, weights_b: Vec<f64>, discount: f64, deadline: u32, reserve: f64) -> Result<Self> {
        let scenario = Scenario {
            weights_a,
            weights_b,
            discount,
            deadline,
            reserve,
            growth: false,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// A centipede-style scenario whose pie grows by `growth` every round.
    pub fn with_growth(weights_a: Vec<f64>, weights_b: Vec<f64>, growth: f64, deadline: u32) -> Result<Self> {
        let scenario = Scenario {
            weights_a,
            weights_b,
            discount: growth,
            deadline,
            reserve: 0.0,
            growth: true,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Single issue, identical unit valuations.
    pub fn univariate(discount: f64, deadline: u32) -> Result<Self> {
        Scenario::new(vec![1.0], vec![1.0], discount, deadline, 0.0)
    }

    fn validate(&self) -> Result<()> {
        ensure_len(self.weights_a.len(), self.weights_b.len())?;
        if self.weights_a.is_empty() {
            return Err(contract("scenario needs at least one issue"));
        }
        for (name, w) in [("weights_a", &self.weights_a), ("weights_b", &self.weights_b)] {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(contract(format!("{name} must be finite and nonnegative")));
            }
            if !w.iter().any(|v| *v > 0.0) {
                return Err(contract(format!("{name} needs a strictly positive entry")));
            }
        }
        let cap = if self.growth { GROWTH_CAP } else { 1.0 };
        if !(self.discount > 0.0 && self.discount <= cap) {
            return Err(contract(format!("discount {} outside (0, {cap}]", self.discount)));
        }
        if self.deadline < 1 {
            return Err(contract("deadline must be at least one round"));
        }
        if !(0.0..1.0).contains(&self.reserve) {
            return Err(contract(format!("reserve {} outside [0, 1)", self.reserve)));
        }
        Ok(())
    }

    pub fn weights(&self, side: Side) -> &[f64] {
        match side {
            Side::A => &self.weights_a,
            Side::B => &self.weights_b,
        }
    }

    pub fn total_weight(&self, side: Side) -> f64 {
        self.weights(side).iter().sum()
    }

    pub fn issue_count(&self) -> usize {
        self.weights_a.len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn deadline(&self) -> u32 {
        self.deadline
    }

    pub fn reserve(&self) -> f64 {
        self.reserve
    }

    pub fn is_growth(&self) -> bool {
        self.growth
    }

    /// Multiplier `δ^(t-1)` applied to a division agreed in round `t`.
    pub fn discount_factor(&self, round: u32) -> f64 {
        self.discount.powi(round.saturating_sub(1) as i32)
    }

    pub fn set_discount(&mut self, discount: f64) -> Result<()> {
        let previous = self.discount;
        self.discount = discount;
        self.validate().inspect_err(|_| self.discount = previous)
    }

    pub fn set_deadline(&mut self, deadline: u32) -> Result<()> {
        let previous = self.deadline;
        self.deadline = deadline;
        self.validate().inspect_err(|_| self.deadline = previous)
    }

    pub fn set_reserve(&mut self, reserve: f64) -> Result<()> {
        let previous = self.reserve;
        self.reserve = reserve;
        self.validate().inspect_err(|_| self.reserve = previous)
    }
}

impl Default for Scenario {
    /// Three issues valued `(1,2,3)` by A and `(3,2,1)` by B, twenty rounds,
    /// no discount, zero reserve.
    fn default() -> Self {
        Scenario {
            weights_a: vec![1.0, 2.0, 3.0],
            weights_b: vec![3.0, 2.0, 1.0],
            discount: 1.0,
            deadline: 20,
            reserve: 0.0,
            growth: false,
        }
    }
}

/// A proposed division: `shares[i]` is what the proposer keeps of issue `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Offer {
    pub proposer: Side,
    pub shares: Vec<f64>,
    pub round: u32,
}

impl Offer {
    pub fn new(proposer: Side, shares: Vec<f64>, round: u32) -> Result<Self> {
        if let Some(bad) = shares.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(contract(format!("share {bad} outside [0, 1]")));
        }
        if round < 1 {
            return Err(contract("rounds start at 1"));
        }
        Ok(Offer {
            proposer,
            shares,
            round,
        })
    }

    /// Clamps `raw` into the unit cube. Non-finite entries become 0. The flag
    /// reports whether anything had to change.
    pub fn clamped(proposer: Side, raw: &[f64], round: u32) -> (Offer, bool) {
        let mut changed = false;
        let shares = raw
            .iter()
            .map(|&v| {
                let c = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
                changed |= c != v;
                c
            })
            .collect();
        (
            Offer {
                proposer,
                shares,
                round,
            },
            changed,
        )
    }

    /// The receiver's implied division, `1 - shares`.
    pub fn receiver_shares(&self) -> Vec<f64> {
        self.shares.iter().map(|s| 1.0 - s).collect()
    }

    /// Shares held by `side` if this offer were agreed.
    pub fn shares_for(&self, side: Side) -> Vec<f64> {
        if side == self.proposer {
            self.shares.clone()
        } else {
            self.receiver_shares()
        }
    }
}

fn dot(weights: &[f64], shares: &[f64]) -> f64 {
    weights.iter().zip(shares).map(|(w, s)| w * s).sum()
}

/// Discounted linear utility of `offer` for `perspective` if agreed in `round`.
/// Rounds past the deadline yield the conflict deal, worth 0.
pub fn utility(scenario: &Scenario, offer: &Offer, round: u32, perspective: Side) -> Result<f64> {
    ensure_len(scenario.issue_count(), offer.shares.len())?;
    if round < 1 {
        return Err(contract("rounds start at 1"));
    }
    if round > scenario.deadline {
        return Ok(0.0);
    }
    let shares = offer.shares_for(perspective);
    Ok(scenario.discount_factor(round) * dot(scenario.weights(perspective), &shares))
}

/// [`utility`] divided by the perspective player's total weight.
pub fn normalized_utility(scenario: &Scenario, offer: &Offer, round: u32, perspective: Side) -> Result<f64> {
    Ok(utility(scenario, offer, round, perspective)? / scenario.total_weight(perspective))
}

/// Undiscounted value of a division, from the holder's weights.
pub fn share_value(weights: &[f64], shares: &[f64]) -> f64 {
    dot(weights, shares)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Offer(Vec<f64>),
    Accept,
    Reject,
    /// The agent proposed shares outside the unit cube; they were clamped.
    Clamp(Vec<f64>),
}

impl Action {
    fn tag(&self) -> &'static str {
        match self {
            Action::Offer(_) => "offer",
            Action::Accept => "accept",
            Action::Reject => "reject",
            Action::Clamp(_) => "clamp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub round: u32,
    pub actor: Side,
    pub action: Action,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndState {
    Accepted,
    ConflictDeal,
}

impl fmt::Display for EndState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndState::Accepted => "accepted",
            EndState::ConflictDeal => "conflict_deal",
        })
    }
}

/// Complete record of one game.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub end_state: EndState,
    /// Indexed by [`Side::index`].
    pub final_rewards: [f64; 2],
    pub end_round: u32,
    /// The accepted offer, if any.
    pub agreement: Option<Offer>,
}

impl Transcript {
    pub fn reward(&self, side: Side) -> f64 {
        self.final_rewards[side.index()]
    }

    /// The side that accepted, if the game ended in agreement.
    pub fn acceptor(&self) -> Option<Side> {
        self.agreement.as_ref().map(|o| o.proposer.other())
    }

    pub fn offers_by(&self, side: Side) -> impl Iterator<Item = &[f64]> {
        self.events.iter().filter_map(move |e| match &e.action {
            Action::Offer(s) if e.actor == side => Some(s.as_slice()),
            _ => None,
        })
    }
}

/// What a player sees when it is asked to act.
#[derive(Clone, Copy, Debug)]
pub struct Turn<'a> {
    pub scenario: &'a Scenario,
    pub side: Side,
    pub round: u32,
    /// False when the rules do not let this player end the game; any
    /// acceptance it returns is treated as a rejection.
    pub may_accept: bool,
}

impl Turn<'_> {
    pub fn own_weights(&self) -> &[f64] {
        self.scenario.weights(self.side)
    }

    pub fn deadline(&self) -> u32 {
        self.scenario.deadline()
    }

    /// Round normalized by the deadline, in `(0, 1]`.
    pub fn time(&self) -> f64 {
        f64::from(self.round) / f64::from(self.scenario.deadline())
    }
}

/// A negotiating party.
///
/// Agents carry per-game state; [`Negotiator::begin`] is called before every
/// game and must clear it. An instance must not be shared between games that
/// run concurrently.
pub trait Negotiator {
    fn begin(&mut self, _scenario: &Scenario, _side: Side) {}

    /// Answer an incoming offer. Called for every offer, including those the
    /// receiver is not allowed to accept, so agents can track history.
    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, rng: &mut GameRng) -> Decision;

    /// Shares this agent wants to keep, one per issue.
    fn propose(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Vec<f64>;
}

impl<N: Negotiator + ?Sized> Negotiator for Box<N> {
    fn begin(&mut self, scenario: &Scenario, side: Side) {
        (**self).begin(scenario, side)
    }

    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, rng: &mut GameRng) -> Decision {
        (**self).respond(turn, offer, rng)
    }

    fn propose(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Vec<f64> {
        (**self).propose(turn, rng)
    }
}

/// Maps a finished game to per-side rewards.
pub trait RewardScheme {
    fn rewards(&self, scenario: &Scenario, agreement: Option<&Offer>, end_round: u32) -> [f64; 2];
}

/// Discounted utility of the agreement; the conflict deal is worth 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlainUtility;

impl RewardScheme for PlainUtility {
    fn rewards(&self, scenario: &Scenario, agreement: Option<&Offer>, end_round: u32) -> [f64; 2] {
        match agreement {
            None => [0.0, 0.0],
            Some(offer) => [Side::A, Side::B].map(|side| {
                scenario.discount_factor(end_round) * share_value(scenario.weights(side), &offer.shares_for(side))
            }),
        }
    }
}

/// Turn order and who may end the game by accepting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameRules {
    pub may_accept: [bool; 2],
    pub first_mover: Side,
}

impl GameRules {
    pub const STANDARD: GameRules = GameRules {
        may_accept: [true, true],
        first_mover: Side::A,
    };

    /// Only `side` can end the game; the other party's answers are ignored.
    pub fn only(side: Side) -> GameRules {
        let mut may_accept = [false, false];
        may_accept[side.index()] = true;
        GameRules {
            may_accept,
            ..GameRules::STANDARD
        }
    }

    pub fn first_mover(self, side: Side) -> GameRules {
        GameRules {
            first_mover: side,
            ..self
        }
    }
}

impl Default for GameRules {
    fn default() -> Self {
        GameRules::STANDARD
    }
}

/// A configured game mechanism. Agent `a` always plays side A; who opens is
/// set by [`GameRules::first_mover`].
pub struct Negotiation<'s> {
    scenario: &'s Scenario,
    rules: GameRules,
    rewards: &'s dyn RewardScheme,
}

impl<'s> Negotiation<'s> {
    pub fn new(scenario: &'s Scenario) -> Self {
        Negotiation {
            scenario,
            rules: GameRules::STANDARD,
            rewards: &PlainUtility,
        }
    }

    pub fn rules(mut self, rules: GameRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn rewards(mut self, rewards: &'s dyn RewardScheme) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn run(&self, a: &mut dyn Negotiator, b: &mut dyn Negotiator, seed: u64) -> Result<Transcript> {
        let mut rng = GameRng::seed_from_u64(seed);
        self.run_with_rng(a, b, &mut rng)
    }

    pub fn run_with_rng(
        &self,
        a: &mut dyn Negotiator,
        b: &mut dyn Negotiator,
        rng: &mut GameRng,
    ) -> Result<Transcript> {
        let scenario = self.scenario;
        let m = scenario.issue_count();
        a.begin(scenario, Side::A);
        b.begin(scenario, Side::B);
        let mut events = Vec::new();
        let agents: [&mut dyn Negotiator; 2] = [a, b];
        let first = self.rules.first_mover;

        for round in 1..=scenario.deadline() {
            for proposer in [first, first.other()] {
                let receiver = proposer.other();
                let turn = Turn {
                    scenario,
                    side: proposer,
                    round,
                    may_accept: self.rules.may_accept[proposer.index()],
                };
                let raw = agents[proposer.index()].propose(&turn, rng);
                if raw.len() != m {
                    return Err(Error::Dimension {
                        expected: m,
                        got: raw.len(),
                    });
                }
                let (offer, clamped) = Offer::clamped(proposer, &raw, round);
                if clamped {
                    log::debug!("round {round}: clamped offer from {proposer}: {raw:?}");
                    events.push(Event {
                        round,
                        actor: proposer,
                        action: Action::Clamp(raw),
                    });
                }
                events.push(Event {
                    round,
                    actor: proposer,
                    action: Action::Offer(offer.shares.clone()),
                });

                let may_accept = self.rules.may_accept[receiver.index()];
                let turn = Turn {
                    scenario,
                    side: receiver,
                    round,
                    may_accept,
                };
                let decision = agents[receiver.index()].respond(&turn, &offer, rng);
                if decision == Decision::Accept && may_accept {
                    events.push(Event {
                        round,
                        actor: receiver,
                        action: Action::Accept,
                    });
                    let final_rewards = self.rewards.rewards(scenario, Some(&offer), round);
                    return Ok(Transcript {
                        events,
                        end_state: EndState::Accepted,
                        final_rewards,
                        end_round: round,
                        agreement: Some(offer),
                    });
                }
                events.push(Event {
                    round,
                    actor: receiver,
                    action: Action::Reject,
                });
            }
        }

        let end_round = scenario.deadline();
        Ok(Transcript {
            events,
            end_state: EndState::ConflictDeal,
            final_rewards: self.rewards.rewards(scenario, None, end_round),
            end_round,
            agreement: None,
        })
    }
}

/// Plays one game under the standard rules with plain utility rewards.
pub fn run_negotiation(
    agent_a: &mut dyn Negotiator,
    agent_b: &mut dyn Negotiator,
    scenario: &Scenario,
    rng_seed: u64,
) -> Result<Transcript> {
    Negotiation::new(scenario).run(agent_a, agent_b, rng_seed)
}

/// Writes one CSV row per event, headed by [`TRANSCRIPT_SCHEMA`].
pub fn write_transcripts_csv<'t, W: Write>(
    mut out: W,
    issue_count: usize,
    games: impl IntoIterator<Item = (usize, &'t Transcript)>,
) -> Result<()> {
    writeln!(out, "{TRANSCRIPT_SCHEMA}")?;
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["game_id".to_string(), "round".into(), "actor".into(), "action".into()];
    header.extend((1..=issue_count).map(|i| format!("share_{i}")));
    header.extend(["reward_a".into(), "reward_b".into(), "end_state".into()]);
    writer.write_record(&header)?;

    for (game_id, transcript) in games {
        for event in &transcript.events {
            let mut row = vec![
                game_id.to_string(),
                event.round.to_string(),
                event.actor.to_string(),
                event.action.tag().to_string(),
            ];
            match &event.action {
                Action::Offer(s) | Action::Clamp(s) => row.extend(s.iter().map(f64::to_string)),
                _ => row.extend(std::iter::repeat_n(String::new(), issue_count)),
            }
            row.push(transcript.final_rewards[0].to_string());
            row.push(transcript.final_rewards[1].to_string());
            row.push(transcript.end_state.to_string());
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed {
        shares: Vec<f64>,
        accept: bool,
    }

    impl Negotiator for Fixed {
        fn respond(&mut self, _: &Turn<'_>, _: &Offer, _: &mut GameRng) -> Decision {
            if self.accept {
                Decision::Accept
            } else {
                Decision::Reject
            }
        }

        fn propose(&mut self, _: &Turn<'_>, _: &mut GameRng) -> Vec<f64> {
            self.shares.clone()
        }
    }

    fn offer(shares: &[f64]) -> Offer {
        Offer::new(Side::A, shares.to_vec(), 1).unwrap()
    }

    #[test]
    fn full_pie_without_discount() {
        let s = Scenario::default();
        let u = utility(&s, &offer(&[1.0, 1.0, 1.0]), 1, Side::A).unwrap();
        assert_eq!(u, 6.0);
    }

    #[test]
    fn discounted_partial_division() {
        let mut s = Scenario::default();
        s.set_discount(0.9).unwrap();
        let u = utility(&s, &offer(&[0.0, 0.5, 1.0]), 2, Side::A).unwrap();
        assert!((u - 3.6).abs() < 1e-12);
    }

    #[test]
    fn past_deadline_is_conflict() {
        let s = Scenario::default();
        let u = utility(&s, &offer(&[0.3, 0.2, 0.9]), 21, Side::B).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn receiver_gets_complement() {
        let s = Scenario::default();
        let o = offer(&[1.0, 0.5, 0.0]);
        // B holds (0, 0.5, 1) valued (3,2,1)
        assert_eq!(utility(&s, &o, 1, Side::B).unwrap(), 2.0);
        assert_eq!(normalized_utility(&s, &o, 1, Side::B).unwrap(), 2.0 / 6.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = Scenario::default();
        let err = utility(&s, &offer(&[1.0, 1.0]), 1, Side::A).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 3, got: 2 });
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::new(vec![0.0; 3], vec![1.0; 3], 1.0, 20, 0.0).is_err());
        assert!(Scenario::new(vec![1.0; 3], vec![1.0; 2], 1.0, 20, 0.0).is_err());
        assert!(Scenario::new(vec![1.0; 3], vec![1.0; 3], 1.3, 20, 0.0).is_err());
        assert!(Scenario::new(vec![1.0; 3], vec![1.0; 3], 0.9, 0, 0.0).is_err());
        assert!(Scenario::new(vec![1.0; 3], vec![1.0; 3], 0.9, 5, 1.0).is_err());
        assert!(Scenario::with_growth(vec![1.0], vec![1.0], 1.3, 20).is_ok());
        assert!(Scenario::with_growth(vec![1.0], vec![1.0], 1.31, 20).is_err());
    }

    #[test]
    fn hardliners_reach_conflict() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![1.0; 3],
            accept: false,
        };
        let mut b = Fixed {
            shares: vec![1.0; 3],
            accept: false,
        };
        let t = run_negotiation(&mut a, &mut b, &s, 1).unwrap();
        assert_eq!(t.end_state, EndState::ConflictDeal);
        assert_eq!(t.end_round, 20);
        assert_eq!(t.final_rewards, [0.0, 0.0]);
        // two offers and two rejections per round
        assert_eq!(t.events.len(), 20 * 4);
    }

    #[test]
    fn immediate_acceptance() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![0.5; 3],
            accept: false,
        };
        let mut b = Fixed {
            shares: vec![1.0; 3],
            accept: true,
        };
        let t = run_negotiation(&mut a, &mut b, &s, 1).unwrap();
        assert_eq!(t.end_state, EndState::Accepted);
        assert_eq!(t.end_round, 1);
        assert_eq!(t.events.len(), 2);
        assert_eq!(t.acceptor(), Some(Side::B));
        assert_eq!(t.final_rewards, [3.0, 3.0]);
    }

    #[test]
    fn acceptance_ignored_when_not_allowed() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![0.5; 3],
            accept: true,
        };
        let mut b = Fixed {
            shares: vec![0.5; 3],
            accept: true,
        };
        let t = Negotiation::new(&s)
            .rules(GameRules::only(Side::A))
            .run(&mut a, &mut b, 3)
            .unwrap();
        // B's acceptance of A's opener is ignored; A accepts B's counter.
        assert_eq!(t.acceptor(), Some(Side::A));
        assert_eq!(t.end_round, 1);
    }

    #[test]
    fn second_side_can_open() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![0.5; 3],
            accept: true,
        };
        let mut b = Fixed {
            shares: vec![1.0, 1.0, 0.0],
            accept: false,
        };
        let t = Negotiation::new(&s)
            .rules(GameRules::only(Side::A).first_mover(Side::B))
            .run(&mut a, &mut b, 0)
            .unwrap();
        assert_eq!(t.events[0].actor, Side::B);
        assert_eq!(t.acceptor(), Some(Side::A));
        // A keeps only issue 3 (weight 3), B keeps issues 1 and 2 (3 + 2)
        assert_eq!(t.final_rewards, [3.0, 5.0]);
    }

    #[test]
    fn out_of_range_offers_are_clamped_and_flagged() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![1.4, -0.2, f64::NAN],
            accept: false,
        };
        let mut b = Fixed {
            shares: vec![1.0; 3],
            accept: true,
        };
        let t = run_negotiation(&mut a, &mut b, &s, 0).unwrap();
        assert!(matches!(t.events[0].action, Action::Clamp(_)));
        assert_eq!(t.agreement.unwrap().shares, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn transcript_csv_layout() {
        let s = Scenario::default();
        let mut a = Fixed {
            shares: vec![0.5; 3],
            accept: false,
        };
        let mut b = Fixed {
            shares: vec![1.0; 3],
            accept: true,
        };
        let t = run_negotiation(&mut a, &mut b, &s, 1).unwrap();
        let mut buf = Vec::new();
        write_transcripts_csv(&mut buf, 3, [(0, &t)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRANSCRIPT_SCHEMA);
        assert_eq!(
            lines[1],
            "game_id,round,actor,action,share_1,share_2,share_3,reward_a,reward_b,end_state"
        );
        assert_eq!(lines[2], "0,1,A,offer,0.5,0.5,0.5,3,3,accepted");
        assert_eq!(lines[3], "0,1,B,accept,,,,3,3,accepted");
    }
}
