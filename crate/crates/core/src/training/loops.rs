//! Training loops. One epoch is one complete game followed by one update of
//! every trainable net.
//!
//! Randomness comes from a single master seed split into ChaCha8 streams:
//! stream 0 initializes the learner (P1 in self-play), stream 1 initializes
//! P2, and stream 2 drives every game, including policy sampling and
//! opponent noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentSpec, OfferMode, TimeAgentConfig};
use crate::error::{contract, Error, Result};
use crate::neural::distributions::{EntropyForm, HeadKind};
use crate::neural::nets::{ACCEPT_WIDTH, BETA_OFFSET, OFFER_WIDTH};
use crate::protocol::{GameRng, GameRules, Negotiation, Negotiator, Scenario, Side, Transcript};
use crate::training::agent::{AgentArchitecture, EpisodeStats, NeuralAgent, OfferArchitecture};
use crate::training::metrics::{EarlyStop, EpochMetrics, TrainingLog};
use crate::training::reward::{PenaltyReward, DEFAULT_PENALTY};

pub const ACCEPT_LR: f64 = 3e-5;
pub const OFFER_LR: f64 = 1e-4;
pub const BETA_LR: f64 = 1e-3;
pub const SELF_PLAY_LR: f64 = 1e-4;
pub const TFT_LR: f64 = 1e-4;

/// The bid set of the single-issue mini-games, as shares the proposer keeps.
pub const MINI_GAME_KEPT: [f64; 2] = [0.9, 0.5];

pub fn rng_stream(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Which of the learner's nets are built and trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetSelection {
    Accept,
    Offer,
    Both,
}

impl std::str::FromStr for NetSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept" => Ok(NetSelection::Accept),
            "offer" => Ok(NetSelection::Offer),
            "both" => Ok(NetSelection::Both),
            other => Err(contract(format!(
                "unknown net selection `{other}` (accept, offer, both)"
            ))),
        }
    }
}

impl NetSelection {
    pub fn tag(self) -> &'static str {
        match self {
            NetSelection::Accept => "accept",
            NetSelection::Offer => "offer",
            NetSelection::Both => "both",
        }
    }
}

/// Training against a scripted opponent. The learner always plays side A.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub scenario: Scenario,
    pub opponent: AgentSpec,
    pub nets: NetSelection,
    pub rules: GameRules,
    pub head: HeadKind,
    pub entropy: EntropyForm,
    pub accept_lr: f64,
    pub offer_lr: f64,
    pub epochs: usize,
    /// Conflict penalty `K`.
    pub penalty: f64,
    pub seed: u64,
    pub early_stop: EarlyStop,
    pub accept_width: usize,
    pub offer_width: usize,
    pub beta_offset: f64,
}

impl TrainConfig {
    fn base(scenario: Scenario, opponent: AgentSpec, nets: NetSelection, rules: GameRules) -> Self {
        TrainConfig {
            scenario,
            opponent,
            nets,
            rules,
            head: HeadKind::Normal,
            entropy: EntropyForm::default(),
            accept_lr: ACCEPT_LR,
            offer_lr: OFFER_LR,
            epochs: 8000,
            penalty: DEFAULT_PENALTY,
            seed: 0,
            early_stop: EarlyStop::default(),
            accept_width: ACCEPT_WIDTH,
            offer_width: OFFER_WIDTH,
            beta_offset: BETA_OFFSET,
        }
    }

    /// The opponent opens and only the learner may end the game.
    pub fn accept_experiment(scenario: Scenario, opponent: AgentSpec) -> Self {
        Self::base(
            scenario,
            opponent,
            NetSelection::Accept,
            GameRules::only(Side::A).first_mover(Side::B),
        )
    }

    /// The learner opens and only the opponent may end the game.
    pub fn offer_experiment(scenario: Scenario, opponent: AgentSpec, head: HeadKind) -> Self {
        let mut c = Self::base(
            scenario,
            opponent,
            NetSelection::Offer,
            GameRules::only(Side::B).first_mover(Side::A),
        );
        c.head = head;
        c.epochs = if head == HeadKind::Beta { 5000 } else { 4000 };
        c.offer_lr = if head == HeadKind::Beta { BETA_LR } else { OFFER_LR };
        c
    }

    /// Both nets against a tit-for-tat opponent that opens; the game can only
    /// end on the learner's acceptance.
    pub fn tft_experiment(variant: TftVariant) -> Result<Self> {
        let scenario = variant.scenario()?;
        let opponent = match variant {
            TftVariant::Relative => AgentSpec::Tft { delta: 1 },
            TftVariant::Bayesian => AgentSpec::BayesTft { delta: 1, reserve: 0.0 },
        };
        let mut c = Self::base(
            scenario,
            opponent,
            NetSelection::Both,
            GameRules::only(Side::A).first_mover(Side::B),
        );
        c.accept_lr = TFT_LR;
        c.offer_lr = TFT_LR;
        c.epochs = 5000;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [("accept_lr", self.accept_lr), ("offer_lr", self.offer_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(contract(format!("{name} must be a finite non-negative number")));
            }
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(contract("penalty must be finite and non-negative"));
        }
        if self.accept_width == 0 || self.offer_width == 0 {
            return Err(contract("network widths must be positive"));
        }
        if !(self.beta_offset > 0.0) {
            return Err(contract("beta offset must be positive"));
        }
        if self.rules.may_accept == [false, false] {
            return Err(contract("at least one side must be able to accept"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> AgentArchitecture {
        let inputs = self.scenario.issue_count() + 1;
        let accept =
            matches!(self.nets, NetSelection::Accept | NetSelection::Both).then_some((inputs, self.accept_width));
        let offer = if matches!(self.nets, NetSelection::Offer | NetSelection::Both) {
            OfferArchitecture::Continuous {
                kind: self.head,
                inputs,
                width: self.offer_width,
                issues: self.scenario.issue_count(),
                beta_offset: self.beta_offset,
            }
        } else {
            OfferArchitecture::Hardline
        };
        AgentArchitecture {
            accept,
            offer,
            entropy: self.entropy,
        }
    }
}

/// A time-based opponent with default noise and reserve.
pub fn time_opponent(concession: f64, offer_mode: OfferMode) -> Result<AgentSpec> {
    Ok(AgentSpec::Time(TimeAgentConfig::new(concession, offer_mode)?))
}

/// Discount of the Bayesian tit-for-tat runs; it yields episodes of about
/// four moves once the learner cooperates.
pub const BAYES_TFT_DISCOUNT: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TftVariant {
    Relative,
    Bayesian,
}

impl TftVariant {
    /// The relative variant is played without discount.
    pub fn scenario(self) -> Result<Scenario> {
        let mut s = Scenario::default();
        if self == TftVariant::Bayesian {
            s.set_discount(BAYES_TFT_DISCOUNT)?;
        }
        Ok(s)
    }
}

/// Result of a training run. When training diverged, `agent` holds the last
/// finite parameters and `diverged` the diagnostic.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainingLog,
    pub agent: NeuralAgent,
    pub stopped_early: Option<usize>,
    pub diverged: Option<String>,
}

fn epoch_metrics(epoch: usize, t: &Transcript, stats: &[&EpisodeStats]) -> EpochMetrics {
    let mut critic = 0.0;
    let mut actor = 0.0;
    for s in stats {
        let l = s.total();
        critic += l.critic;
        actor += l.actor;
    }
    EpochMetrics {
        epoch,
        reward_p1: t.final_rewards[0],
        reward_p2: t.final_rewards[1],
        playout_time: t.end_round,
        critic_loss: critic,
        actor_loss: actor,
        mean_sigma: stats
            .first()
            .and_then(|s| s.offer.as_ref())
            .map(|o| o.mean_spread.clone())
            .unwrap_or_default(),
        end_state: t.end_state,
        acceptor: t.acceptor(),
        agreement: t.agreement.as_ref().map(|o| o.shares_for(Side::A)),
    }
}

/// Ends an epoch for one learner, turning a non-finite loss into a
/// divergence diagnostic instead of an error.
fn finish(agent: &mut NeuralAgent, reward: f64, epoch: usize) -> Result<std::result::Result<EpisodeStats, String>> {
    match agent.finish_episode(reward) {
        Ok(s) => Ok(Ok(s)),
        Err(Error::NonFinite(msg)) => Ok(Err(format!("epoch {epoch}: {msg}"))),
        Err(e) => Err(e),
    }
}

pub fn train_vs_opponent(config: &TrainConfig) -> Result<TrainOutcome> {
    train_vs_opponent_observed(config, &mut |_, _| Ok(()))
}

/// [`train_vs_opponent`] with a callback after every epoch, e.g. for
/// periodic checkpoints. The callback receives the number of completed epochs.
pub fn train_vs_opponent_observed(
    config: &TrainConfig,
    observe: &mut dyn FnMut(usize, &NeuralAgent) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut agent = NeuralAgent::build(
        &config.architecture(),
        config.accept_lr,
        config.offer_lr,
        &mut rng_stream(config.seed, 0),
    )?;
    let mut opponent = config.opponent.build()?;
    let mut games: GameRng = rng_stream(config.seed, 2);
    let rewards = PenaltyReward {
        penalty: config.penalty,
    };
    let negotiation = Negotiation::new(&config.scenario).rules(config.rules).rewards(&rewards);
    let mut log = TrainingLog::new(config.scenario.issue_count());
    let mut stopped_early = None;
    let mut diverged = None;
    for epoch in 0..config.epochs {
        let t = negotiation.run_with_rng(&mut agent, opponent.as_mut(), &mut games)?;
        let stats = match finish(&mut agent, t.final_rewards[0], epoch)? {
            Ok(s) => s,
            Err(msg) => {
                log::error!("training diverged at {msg}");
                diverged = Some(msg);
                break;
            }
        };
        log.epochs.push(epoch_metrics(epoch, &t, &[&stats]));
        observe(epoch + 1, &agent)?;
        if config.early_stop.should_stop(&log.playout_times()) {
            stopped_early = Some(epoch + 1);
            break;
        }
    }
    Ok(TrainOutcome {
        log,
        agent,
        stopped_early,
        diverged,
    })
}

/// Training against a tit-for-tat opponent. The config must let only the
/// learner accept.
pub fn train_vs_tft(config: &TrainConfig) -> Result<TrainOutcome> {
    if !matches!(config.opponent, AgentSpec::Tft { .. } | AgentSpec::BayesTft { .. }) {
        return Err(contract("train_vs_tft needs a tit-for-tat opponent"));
    }
    if config.rules.may_accept != [true, false] {
        return Err(contract(
            "games against tit-for-tat end only on the learner's acceptance",
        ));
    }
    train_vs_opponent(config)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelfPlayMode {
    /// One issue, bids restricted to the mini-game set, discount 0.9.
    MinigameBargain,
    /// As the mini-game, but the pie grows by 1.3 every round.
    MinigameCentipede,
    /// Three issues with continuous offers, discount 0.95.
    Multivariate,
}

impl std::str::FromStr for SelfPlayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minigame_bargain" => Ok(SelfPlayMode::MinigameBargain),
            "minigame_centipede" => Ok(SelfPlayMode::MinigameCentipede),
            "multivariate" => Ok(SelfPlayMode::Multivariate),
            other => Err(contract(format!(
                "unknown self-play mode `{other}` (minigame_bargain, minigame_centipede, multivariate)"
            ))),
        }
    }
}

impl SelfPlayMode {
    pub fn tag(self) -> &'static str {
        match self {
            SelfPlayMode::MinigameBargain => "minigame_bargain",
            SelfPlayMode::MinigameCentipede => "minigame_centipede",
            SelfPlayMode::Multivariate => "multivariate",
        }
    }
}

/// Two learners, P1 on side A (opening) and P2 on side B.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfPlayConfig {
    pub mode: SelfPlayMode,
    pub scenario: Scenario,
    /// In the mini-games both sides may accept. The multivariate game splits
    /// the roles: P1 bids and only P2 may accept.
    pub rules: GameRules,
    pub head: HeadKind,
    pub entropy: EntropyForm,
    pub learning_rate: f64,
    pub epochs: usize,
    pub penalty: f64,
    pub seed: u64,
    pub early_stop: EarlyStop,
    pub accept_width: usize,
    pub offer_width: usize,
    pub beta_offset: f64,
}

impl SelfPlayConfig {
    pub fn new(mode: SelfPlayMode) -> Result<Self> {
        let scenario = match mode {
            SelfPlayMode::MinigameBargain => Scenario::univariate(0.9, 20)?,
            SelfPlayMode::MinigameCentipede => Scenario::with_growth(vec![1.0], vec![1.0], 1.3, 20)?,
            SelfPlayMode::Multivariate => {
                let mut s = Scenario::default();
                s.set_discount(0.95)?;
                s
            }
        };
        let rules = match mode {
            SelfPlayMode::Multivariate => GameRules::only(Side::B).first_mover(Side::A),
            _ => GameRules::STANDARD,
        };
        Ok(SelfPlayConfig {
            mode,
            scenario,
            rules,
            head: HeadKind::Normal,
            entropy: EntropyForm::default(),
            learning_rate: SELF_PLAY_LR,
            epochs: 3000,
            penalty: DEFAULT_PENALTY,
            seed: 0,
            early_stop: EarlyStop::default(),
            accept_width: ACCEPT_WIDTH,
            offer_width: OFFER_WIDTH,
            beta_offset: BETA_OFFSET,
        })
    }

    pub fn architecture(&self) -> Result<AgentArchitecture> {
        let m = self.scenario.issue_count();
        let inputs = m + 1;
        let offer = match self.mode {
            SelfPlayMode::Multivariate => OfferArchitecture::Continuous {
                kind: self.head,
                inputs,
                width: self.offer_width,
                issues: m,
                beta_offset: self.beta_offset,
            },
            _ => {
                if m != 1 {
                    return Err(contract("mini-games are single-issue"));
                }
                OfferArchitecture::Choice {
                    inputs,
                    width: self.accept_width,
                    kept: MINI_GAME_KEPT.to_vec(),
                }
            }
        };
        Ok(AgentArchitecture {
            accept: Some((inputs, self.accept_width)),
            offer,
            entropy: self.entropy,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SelfPlayOutcome {
    pub log: TrainingLog,
    pub p1: NeuralAgent,
    pub p2: NeuralAgent,
    pub stopped_early: Option<usize>,
    pub diverged: Option<String>,
}

pub fn train_self_play(config: &SelfPlayConfig) -> Result<SelfPlayOutcome> {
    train_self_play_observed(config, &mut |_, _, _| Ok(()))
}

/// [`train_self_play`] with a callback after every epoch receiving the
/// number of completed epochs and both players.
pub fn train_self_play_observed(
    config: &SelfPlayConfig,
    observe: &mut dyn FnMut(usize, &NeuralAgent, &NeuralAgent) -> Result<()>,
) -> Result<SelfPlayOutcome> {
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(contract("learning rate must be finite and non-negative"));
    }
    let arch = config.architecture()?;
    let lr = config.learning_rate;
    let mut p1 = NeuralAgent::build(&arch, lr, lr, &mut rng_stream(config.seed, 0))?;
    let mut p2 = NeuralAgent::build(&arch, lr, lr, &mut rng_stream(config.seed, 1))?;
    let mut games: GameRng = rng_stream(config.seed, 2);
    let rewards = PenaltyReward {
        penalty: config.penalty,
    };
    let negotiation = Negotiation::new(&config.scenario).rules(config.rules).rewards(&rewards);
    let mut log = TrainingLog::new(if config.mode == SelfPlayMode::Multivariate {
        config.scenario.issue_count()
    } else {
        0
    });
    let mut stopped_early = None;
    let mut diverged = None;
    for epoch in 0..config.epochs {
        let t = negotiation.run_with_rng(&mut p1 as &mut dyn Negotiator, &mut p2, &mut games)?;
        let s1 = finish(&mut p1, t.final_rewards[0], epoch)?;
        let s2 = finish(&mut p2, t.final_rewards[1], epoch)?;
        let (s1, s2) = match (s1, s2) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(msg), _) | (_, Err(msg)) => {
                log::error!("self-play diverged at {msg}");
                diverged = Some(msg);
                break;
            }
        };
        log.epochs.push(epoch_metrics(epoch, &t, &[&s1, &s2]));
        observe(epoch + 1, &p1, &p2)?;
        if config.early_stop.should_stop(&log.playout_times()) {
            stopped_early = Some(epoch + 1);
            break;
        }
    }
    Ok(SelfPlayOutcome {
        log,
        p1,
        p2,
        stopped_early,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut c: TrainConfig) -> TrainConfig {
        c.accept_width = 16;
        c.offer_width = 8;
        c.epochs = 30;
        c.seed = 5;
        c
    }

    #[test]
    fn seeds_split_into_independent_streams() {
        use rand::Rng;
        let a: u64 = rng_stream(1, 0).random();
        let b: u64 = rng_stream(1, 1).random();
        let c: u64 = rng_stream(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let c = small(TrainConfig::offer_experiment(
            Scenario::default(),
            time_opponent(1.0, OfferMode::Planar).unwrap(),
            HeadKind::Cauchy,
        ));
        let a = train_vs_opponent(&c).unwrap();
        let b = train_vs_opponent(&c).unwrap();
        assert_eq!(a.log, b.log);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.agent.checkpoint(c.seed, 30).unwrap().write(&mut x).unwrap();
        b.agent.checkpoint(c.seed, 30).unwrap().write(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_learning_rate_keeps_policies() {
        let mut c = small(TrainConfig::tft_experiment(TftVariant::Bayesian).unwrap());
        c.accept_lr = 0.0;
        c.offer_lr = 0.0;
        c.epochs = 100;
        let before = NeuralAgent::build(&c.architecture(), 0.0, 0.0, &mut rng_stream(c.seed, 0)).unwrap();
        let out = train_vs_tft(&c).unwrap();
        assert_eq!(
            out.agent.accept.as_ref().unwrap().net,
            before.accept.as_ref().unwrap().net
        );
        match (&out.agent.offer, &before.offer) {
            (crate::training::OfferPolicy::Continuous(a), crate::training::OfferPolicy::Continuous(b)) => {
                assert_eq!(a.net, b.net)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rewards_stay_in_bounds() {
        let c = small(TrainConfig::accept_experiment(
            Scenario::default(),
            time_opponent(1.0, OfferMode::Planar).unwrap(),
        ));
        let out = train_vs_opponent(&c).unwrap();
        assert_eq!(out.log.len(), 30);
        for e in &out.log.epochs {
            for r in [e.reward_p1, e.reward_p2] {
                assert!((-c.penalty..=6.0).contains(&r), "{r}");
            }
            assert!(e.mean_sigma.is_empty());
        }
    }

    #[test]
    fn tft_rules_are_enforced() {
        let mut c = small(TrainConfig::tft_experiment(TftVariant::Relative).unwrap());
        c.rules = GameRules::STANDARD;
        assert!(train_vs_tft(&c).is_err());
        let c = small(TrainConfig::accept_experiment(
            Scenario::default(),
            time_opponent(1.0, OfferMode::Planar).unwrap(),
        ));
        assert!(train_vs_tft(&c).is_err());
    }

    #[test]
    fn early_stop_cuts_the_run() {
        let mut c = small(TrainConfig::accept_experiment(
            Scenario::default(),
            time_opponent(1.0, OfferMode::Planar).unwrap(),
        ));
        c.epochs = 200;
        c.early_stop = EarlyStop {
            window: 5,
            threshold: 100.0,
        };
        let out = train_vs_opponent(&c).unwrap();
        assert_eq!(out.stopped_early, Some(5));
        assert_eq!(out.log.len(), 5);
    }

    #[test]
    fn mini_game_policies_stay_normalized() {
        let mut c = SelfPlayConfig::new(SelfPlayMode::MinigameBargain).unwrap();
        c.accept_width = 8;
        c.epochs = 40;
        let out = train_self_play(&c).unwrap();
        assert_eq!(out.log.len(), 40);
        for agent in [&out.p1, &out.p2] {
            for r in agent.choice_records() {
                assert!(r.log_prob <= 0.0);
            }
            if let crate::training::OfferPolicy::Choice { learner, .. } = &agent.offer {
                for t in [0.05, 0.5, 1.0] {
                    let (logits, _) = learner.net.evaluate(&[0.5, t]).unwrap();
                    let p = crate::neural::distributions::softmax_policy(&logits);
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(p.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }
}
