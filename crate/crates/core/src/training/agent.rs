//! The learning negotiator: an accept net, an offer policy, and the
//! per-episode actor-critic updates that train them.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::hardliner_offer;
use crate::error::{contract, Error, Result};
use crate::neural::distributions::{log_softmax, softmax_policy, EntropyForm, HeadKind};
use crate::neural::nets::{batch_of, DiscreteActorCritic, OfferNet, SCALE_FLOOR};
use crate::neural::{AdamState, Checkpoint, Parameterized, Section};
use crate::protocol::{Decision, GameRng, Negotiator, Offer, Scenario, Side, Turn};

/// Logit index of "accept" in an accept net; index 1 rejects.
pub const ACCEPT: usize = 0;
pub const REJECT: usize = 1;

/// One decision of a discrete head (accept/reject or a mini-game bid).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteRecord {
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

/// One sampled offer. `action` is the raw draw, before clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct OfferRecord {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Steps of one episode for one network. Rewards are terminal only: every
/// step is credited with the single reward set by [`EpisodeBuffer::terminate`].
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeBuffer<R> {
    records: Vec<R>,
    terminal_reward: Option<f64>,
}

impl<R> Default for EpisodeBuffer<R> {
    fn default() -> Self {
        EpisodeBuffer {
            records: Vec::new(),
            terminal_reward: None,
        }
    }
}

impl<R> EpisodeBuffer<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: R) -> Result<()> {
        if self.terminal_reward.is_some() {
            return Err(contract("episode already terminated"));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn terminate(&mut self, reward: f64) -> Result<()> {
        if self.terminal_reward.is_some() {
            return Err(contract("episode terminated twice"));
        }
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("terminal reward {reward}")));
        }
        self.terminal_reward = Some(reward);
        Ok(())
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn terminal_reward(&self) -> Option<f64> {
        self.terminal_reward
    }

    /// Monte Carlo return of step `i`: the terminal reward itself.
    pub fn reward_to_assign(&self, i: usize) -> Option<f64> {
        (i < self.records.len()).then_some(self.terminal_reward).flatten()
    }

    pub fn clear(&mut self) {
        self.records.clear();
        self.terminal_reward = None;
    }

    fn ready(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(contract("update on an empty episode buffer"));
        }
        self.terminal_reward
            .ok_or_else(|| contract("update before the episode terminated"))
    }
}

/// Summed over the records of one episode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
}

impl Losses {
    fn is_finite(&self) -> bool {
        self.critic.is_finite() && self.actor.is_finite()
    }
}

impl std::ops::Add for Losses {
    type Output = Losses;
    fn add(self, o: Losses) -> Losses {
        Losses {
            critic: self.critic + o.critic,
            actor: self.actor + o.actor,
        }
    }
}

/// Gradients of `Σ TD² − Σ log π(a)·TD` with `TD = R − q̂(s)` held fixed in
/// the actor term.
pub fn discrete_gradients(
    net: &DiscreteActorCritic,
    buffer: &EpisodeBuffer<DiscreteRecord>,
) -> Result<(DiscreteActorCritic, Losses)> {
    let reward = buffer.ready()?;
    let states: Vec<Vec<f64>> = buffer.records.iter().map(|r| r.state.clone()).collect();
    let x = batch_of(&states)?;
    let fwd = net.forward_batch(x.view())?;
    let n = buffer.len();
    let k = net.actions();
    let mut d_logits = Array2::zeros((n, k));
    let mut d_value = Array1::zeros(n);
    let mut losses = Losses::default();
    for (i, rec) in buffer.records.iter().enumerate() {
        if rec.action >= k {
            return Err(contract(format!("action {} outside {k} logits", rec.action)));
        }
        let logits = fwd.logits().row(i).to_vec();
        let td = reward - fwd.values()[i];
        let p = softmax_policy(&logits);
        let log_p = log_softmax(&logits)[rec.action];
        losses.critic += td * td;
        losses.actor += -log_p * td;
        d_value[i] = -2.0 * td;
        for j in 0..k {
            let indicator = if j == rec.action { 1.0 } else { 0.0 };
            d_logits[[i, j]] = -td * (indicator - p[j]);
        }
    }
    let grads = net.backward_batch(&fwd, d_logits.view(), d_value.view())?;
    Ok((grads, losses))
}

fn checked<P: Parameterized>(grads: &P, losses: Losses) -> Result<()> {
    if !losses.is_finite() || !grads.all_finite() {
        return Err(Error::NonFinite(format!(
            "critic loss {:.3e}, actor loss {:.3e}",
            losses.critic, losses.actor
        )));
    }
    Ok(())
}

/// One Adam step on an accept net (or any discrete actor-critic) from one
/// episode. A non-finite loss leaves the parameters untouched.
pub fn accept_net_update(
    net: &mut DiscreteActorCritic,
    adam: &mut AdamState,
    buffer: &EpisodeBuffer<DiscreteRecord>,
) -> Result<Losses> {
    let (grads, losses) = discrete_gradients(net, buffer)?;
    checked(&grads, losses)?;
    adam.step(net, &grads)?;
    Ok(losses)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OfferLosses {
    pub losses: Losses,
    /// Per-issue spread (σ, γ or the Beta standard deviation) averaged over
    /// the episode's steps.
    pub mean_spread: Vec<f64>,
    /// Share of (step, issue) pairs whose scale sits at the floor.
    pub floor_fraction: f64,
}

/// Gradients of `Σ TD² − Σ_issues (log p + entropy)·TD`.
pub fn offer_gradients(
    net: &OfferNet,
    buffer: &EpisodeBuffer<OfferRecord>,
    entropy: EntropyForm,
) -> Result<(OfferNet, OfferLosses)> {
    let reward = buffer.ready()?;
    let states: Vec<Vec<f64>> = buffer.records.iter().map(|r| r.state.clone()).collect();
    let x = batch_of(&states)?;
    let fwd = net.forward_batch(x.view())?;
    let (n, m) = (buffer.len(), net.issues());
    let mut d_first = Array2::zeros((n, m));
    let mut d_second = Array2::zeros((n, m));
    let mut d_value = Array1::zeros(n);
    let mut out = OfferLosses {
        mean_spread: vec![0.0; m],
        ..OfferLosses::default()
    };
    let mut at_floor = 0usize;
    for (i, rec) in buffer.records.iter().enumerate() {
        if rec.action.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: rec.action.len(),
            });
        }
        let td = reward - fwd.values()[i];
        out.losses.critic += td * td;
        d_value[i] = -2.0 * td;
        for (j, marginal) in fwd.marginals(i)?.iter().enumerate() {
            let lp = marginal.log_prob_grad(rec.action[j])?;
            let h = marginal.entropy_grad(entropy);
            out.losses.actor += -(lp.value + h.value) * td;
            d_first[[i, j]] = -(lp.d_first + h.d_first) * td;
            d_second[[i, j]] = -(lp.d_second + h.d_second) * td;
            let spread = marginal.spread();
            out.mean_spread[j] += spread / n as f64;
            if marginal.kind != HeadKind::Beta && marginal.second <= 2.0 * SCALE_FLOOR {
                at_floor += 1;
            }
        }
    }
    out.floor_fraction = at_floor as f64 / (n * m) as f64;
    let grads = net.backward_batch(&fwd, d_value.view(), d_first.view(), d_second.view())?;
    Ok((grads, out))
}

/// One Adam step on the offer net from one episode. Warns when nearly every
/// scale has collapsed onto the floor.
pub fn offer_net_update(
    net: &mut OfferNet,
    adam: &mut AdamState,
    buffer: &EpisodeBuffer<OfferRecord>,
    entropy: EntropyForm,
) -> Result<OfferLosses> {
    let (grads, out) = offer_gradients(net, buffer, entropy)?;
    checked(&grads, out.losses)?;
    if out.floor_fraction > 0.9 {
        log::warn!(
            "variance collapse: {:.0}% of offer scales at the floor",
            100.0 * out.floor_fraction
        );
    }
    adam.step(net, &grads)?;
    Ok(out)
}

/// A network, its optimizer state, and whether updates are applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Learner<N> {
    pub net: N,
    pub adam: AdamState,
    pub trainable: bool,
}

impl<N: Parameterized> Learner<N> {
    pub fn new(net: N, learning_rate: f64) -> Self {
        let adam = AdamState::for_model(&net, learning_rate);
        Learner {
            net,
            adam,
            trainable: true,
        }
    }
}

/// How the agent builds counter-offers.
#[derive(Clone, Debug, PartialEq)]
pub enum OfferPolicy {
    /// Always demands the whole pie; for runs that only train acceptance.
    Hardline,
    Continuous(Learner<OfferNet>),
    /// Chooses one of a fixed set of kept shares on a single issue.
    Choice {
        learner: Learner<DiscreteActorCritic>,
        kept: Vec<f64>,
    },
}

/// Shape of a [`NeuralAgent`], enough to rebuild it from a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentArchitecture {
    /// `(inputs, width)` of the accept net.
    pub accept: Option<(usize, usize)>,
    pub offer: OfferArchitecture,
    pub entropy: EntropyForm,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OfferArchitecture {
    Hardline,
    Continuous {
        kind: HeadKind,
        inputs: usize,
        width: usize,
        issues: usize,
        beta_offset: f64,
    },
    Choice {
        inputs: usize,
        width: usize,
        kept: Vec<f64>,
    },
}

fn entropy_tag(e: EntropyForm) -> &'static str {
    match e {
        EntropyForm::Verbatim => "verbatim",
        EntropyForm::Standard => "standard",
    }
}

fn kv(body: &str) -> Result<Vec<(String, String)>> {
    body.split_whitespace()
        .skip(1)
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Schema(format!("malformed architecture entry {p:?}")))
        })
        .collect()
}

fn field<T: std::str::FromStr>(pairs: &[(String, String)], key: &str) -> Result<T> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Schema(format!("architecture lacks a valid `{key}`")))
}

impl AgentArchitecture {
    pub fn to_meta(&self) -> Vec<(String, String)> {
        let accept = match self.accept {
            Some((inputs, width)) => format!("net inputs={inputs} width={width}"),
            None => "none".into(),
        };
        let offer = match &self.offer {
            OfferArchitecture::Hardline => "hardline".into(),
            OfferArchitecture::Continuous {
                kind,
                inputs,
                width,
                issues,
                beta_offset,
            } => format!(
                "continuous head={} inputs={inputs} width={width} issues={issues} beta_offset={beta_offset}",
                kind.tag()
            ),
            OfferArchitecture::Choice { inputs, width, kept } => {
                let kept: Vec<String> = kept.iter().map(f64::to_string).collect();
                format!("choice inputs={inputs} width={width} kept={}", kept.join(";"))
            }
        };
        vec![
            ("accept".into(), accept),
            ("offer".into(), offer),
            ("entropy".into(), entropy_tag(self.entropy).into()),
        ]
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |k: &str| {
            ck.meta(k)
                .ok_or_else(|| Error::Schema(format!("checkpoint lacks meta `{k}`")))
        };
        let accept_meta = get("accept")?;
        let accept = if accept_meta == "none" {
            None
        } else {
            let p = kv(accept_meta)?;
            Some((field(&p, "inputs")?, field(&p, "width")?))
        };
        let offer_meta = get("offer")?;
        let p = kv(offer_meta)?;
        let offer = match offer_meta.split_whitespace().next() {
            Some("hardline") => OfferArchitecture::Hardline,
            Some("continuous") => OfferArchitecture::Continuous {
                kind: field(&p, "head")?,
                inputs: field(&p, "inputs")?,
                width: field(&p, "width")?,
                issues: field(&p, "issues")?,
                beta_offset: field(&p, "beta_offset")?,
            },
            Some("choice") => {
                let kept: String = field(&p, "kept")?;
                OfferArchitecture::Choice {
                    inputs: field(&p, "inputs")?,
                    width: field(&p, "width")?,
                    kept: kept
                        .split(';')
                        .map(|v| v.parse().map_err(|_| Error::Schema(format!("bad kept share {v:?}"))))
                        .collect::<Result<_>>()?,
                }
            }
            _ => return Err(Error::Schema(format!("unknown offer policy {offer_meta:?}"))),
        };
        let entropy = match get("entropy")? {
            "verbatim" => EntropyForm::Verbatim,
            "standard" => EntropyForm::Standard,
            other => return Err(Error::Schema(format!("unknown entropy form {other:?}"))),
        };
        Ok(AgentArchitecture { accept, offer, entropy })
    }
}

/// Per-episode training summary of one agent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeStats {
    pub accept: Option<Losses>,
    pub offer: Option<OfferLosses>,
    pub choice: Option<Losses>,
}

impl EpisodeStats {
    pub fn total(&self) -> Losses {
        let mut t = Losses::default();
        for l in [self.accept, self.offer.as_ref().map(|o| o.losses), self.choice]
            .into_iter()
            .flatten()
        {
            t = t + l;
        }
        t
    }
}

/// An actor-critic negotiator. The state it sees is the last offer it
/// received, as the shares it would hold, followed by `round / deadline`.
#[derive(Clone, Debug)]
pub struct NeuralAgent {
    pub accept: Option<Learner<DiscreteActorCritic>>,
    pub offer: OfferPolicy,
    pub entropy: EntropyForm,
    /// When false the agent plays without keeping episode records.
    pub recording: bool,
    side: Side,
    last_received: Option<Vec<f64>>,
    accept_buffer: EpisodeBuffer<DiscreteRecord>,
    offer_buffer: EpisodeBuffer<OfferRecord>,
    choice_buffer: EpisodeBuffer<DiscreteRecord>,
    failure: Option<Error>,
}

fn sample_index(probabilities: &[f64], rng: &mut GameRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

impl NeuralAgent {
    pub fn new(accept: Option<Learner<DiscreteActorCritic>>, offer: OfferPolicy, entropy: EntropyForm) -> Self {
        NeuralAgent {
            accept,
            offer,
            entropy,
            recording: true,
            side: Side::A,
            last_received: None,
            accept_buffer: EpisodeBuffer::new(),
            offer_buffer: EpisodeBuffer::new(),
            choice_buffer: EpisodeBuffer::new(),
            failure: None,
        }
    }

    /// Fresh networks drawn from `rng`.
    pub fn build(arch: &AgentArchitecture, accept_lr: f64, offer_lr: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let accept = match arch.accept {
            Some((inputs, width)) => Some(Learner::new(
                DiscreteActorCritic::new(inputs, width, 2, rng)?,
                accept_lr,
            )),
            None => None,
        };
        let offer = match &arch.offer {
            OfferArchitecture::Hardline => OfferPolicy::Hardline,
            OfferArchitecture::Continuous {
                kind,
                inputs,
                width,
                issues,
                beta_offset,
            } => OfferPolicy::Continuous(Learner::new(
                OfferNet::new(*inputs, *issues, *kind, *width, *beta_offset, rng)?,
                offer_lr,
            )),
            OfferArchitecture::Choice { inputs, width, kept } => {
                if kept.len() < 2 || kept.iter().any(|k| !(0.0..=1.0).contains(k)) {
                    return Err(contract("a choice policy needs at least two kept shares in [0, 1]"));
                }
                OfferPolicy::Choice {
                    learner: Learner::new(DiscreteActorCritic::new(*inputs, *width, kept.len(), rng)?, offer_lr),
                    kept: kept.clone(),
                }
            }
        };
        Ok(NeuralAgent::new(accept, offer, arch.entropy))
    }

    pub fn architecture(&self) -> AgentArchitecture {
        let accept = self
            .accept
            .as_ref()
            .map(|l| (l.net.input_dim(), l.net.base.output_dim()));
        let offer = match &self.offer {
            OfferPolicy::Hardline => OfferArchitecture::Hardline,
            OfferPolicy::Continuous(l) => OfferArchitecture::Continuous {
                kind: l.net.kind,
                inputs: l.net.input_dim(),
                width: l.net.base.output_dim(),
                issues: l.net.issues(),
                beta_offset: l.net.beta_offset,
            },
            OfferPolicy::Choice { learner, kept } => OfferArchitecture::Choice {
                inputs: learner.net.input_dim(),
                width: learner.net.base.output_dim(),
                kept: kept.clone(),
            },
        };
        AgentArchitecture {
            accept,
            offer,
            entropy: self.entropy,
        }
    }

    pub fn checkpoint(&self, seed: u64, epoch: u64) -> Result<Checkpoint> {
        let mut sections = Vec::new();
        if let Some(l) = &self.accept {
            sections.push(Section::capture("accept", &l.net, &l.adam)?);
        }
        match &self.offer {
            OfferPolicy::Hardline => {}
            OfferPolicy::Continuous(l) => sections.push(Section::capture("offer", &l.net, &l.adam)?),
            OfferPolicy::Choice { learner, .. } => {
                sections.push(Section::capture("offer", &learner.net, &learner.adam)?)
            }
        }
        Ok(Checkpoint {
            seed,
            epoch,
            meta: self.architecture().to_meta(),
            sections,
        })
    }

    /// Rebuilds an agent from a checkpoint, architecture included.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        use rand::SeedableRng;
        let arch = AgentArchitecture::from_checkpoint(ck)?;
        let mut scratch = ChaCha8Rng::seed_from_u64(0);
        let mut agent = NeuralAgent::build(&arch, 0.0, 0.0, &mut scratch)?;
        if let Some(l) = &mut agent.accept {
            ck.section("accept")?.restore(&mut l.net, &mut l.adam)?;
        }
        match &mut agent.offer {
            OfferPolicy::Hardline => {}
            OfferPolicy::Continuous(l) => ck.section("offer")?.restore(&mut l.net, &mut l.adam)?,
            OfferPolicy::Choice { learner, .. } => ck.section("offer")?.restore(&mut learner.net, &mut learner.adam)?,
        }
        Ok(agent)
    }

    pub fn set_trainable(&mut self, accept: bool, offer: bool) {
        if let Some(l) = &mut self.accept {
            l.trainable = accept;
        }
        match &mut self.offer {
            OfferPolicy::Hardline => {}
            OfferPolicy::Continuous(l) => l.trainable = offer,
            OfferPolicy::Choice { learner, .. } => learner.trainable = offer,
        }
    }

    /// The first error hit while acting, if any. Acting cannot return errors
    /// through [`Negotiator`], so they are parked here.
    pub fn take_failure(&mut self) -> Option<Error> {
        self.failure.take()
    }

    pub fn accept_records(&self) -> &[DiscreteRecord] {
        self.accept_buffer.records()
    }

    pub fn offer_records(&self) -> &[OfferRecord] {
        self.offer_buffer.records()
    }

    pub fn choice_records(&self) -> &[DiscreteRecord] {
        self.choice_buffer.records()
    }

    fn state(&self, received: Option<&[f64]>, turn: &Turn<'_>) -> Vec<f64> {
        let m = turn.scenario.issue_count();
        let mut s = match received {
            Some(shares) => shares.to_vec(),
            None => vec![0.0; m],
        };
        s.push(turn.time());
        s
    }

    fn fail(&mut self, err: Error) {
        if self.failure.is_none() {
            self.failure = Some(err);
        }
    }

    fn decide(&mut self, turn: &Turn<'_>, own: &[f64], rng: &mut GameRng) -> Result<Decision> {
        let Some(learner) = &self.accept else {
            return Ok(Decision::Reject);
        };
        let state = self.state(Some(own), turn);
        let (logits, value) = learner.net.evaluate(&state)?;
        let p = softmax_policy(&logits);
        let action = sample_index(&p, rng);
        if self.recording {
            self.accept_buffer.push(DiscreteRecord {
                log_prob: log_softmax(&logits)[action],
                state,
                action,
                value,
            })?;
        }
        Ok(if action == ACCEPT {
            Decision::Accept
        } else {
            Decision::Reject
        })
    }

    fn counter(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Result<Vec<f64>> {
        let state = self.state(self.last_received.as_deref(), turn);
        match &self.offer {
            OfferPolicy::Hardline => Ok(hardliner_offer(turn.scenario.issue_count())),
            OfferPolicy::Continuous(learner) => {
                let (marginals, value) = learner.net.evaluate(&state)?;
                let action: Vec<f64> = marginals.iter().map(|m| m.sample(rng)).collect();
                if self.recording {
                    let mut log_prob = 0.0;
                    for (m, x) in marginals.iter().zip(&action) {
                        log_prob += m.log_prob(*x)?;
                    }
                    self.offer_buffer.push(OfferRecord {
                        state,
                        action: action.clone(),
                        log_prob,
                        value,
                    })?;
                }
                Ok(action)
            }
            OfferPolicy::Choice { learner, kept } => {
                if turn.scenario.issue_count() != 1 {
                    return Err(contract("choice policies play single-issue games"));
                }
                let (logits, value) = learner.net.evaluate(&state)?;
                let p = softmax_policy(&logits);
                let action = sample_index(&p, rng);
                let share = kept[action];
                if self.recording {
                    self.choice_buffer.push(DiscreteRecord {
                        log_prob: log_softmax(&logits)[action],
                        state,
                        action,
                        value,
                    })?;
                }
                Ok(vec![share])
            }
        }
    }

    /// Credits `reward` to every recorded step, updates the trainable nets
    /// once each, and clears the episode. On a non-finite loss the offending
    /// net keeps its parameters and the error is returned.
    pub fn finish_episode(&mut self, reward: f64) -> Result<EpisodeStats> {
        let mut stats = EpisodeStats::default();
        let result = self.update_all(reward, &mut stats);
        self.accept_buffer.clear();
        self.offer_buffer.clear();
        self.choice_buffer.clear();
        result.map(|_| stats)
    }

    fn update_all(&mut self, reward: f64, stats: &mut EpisodeStats) -> Result<()> {
        if let Some(e) = self.failure.take() {
            return Err(e);
        }
        if let Some(l) = &mut self.accept {
            if l.trainable && !self.accept_buffer.is_empty() {
                self.accept_buffer.terminate(reward)?;
                stats.accept = Some(accept_net_update(&mut l.net, &mut l.adam, &self.accept_buffer)?);
            }
        }
        match &mut self.offer {
            OfferPolicy::Hardline => {}
            OfferPolicy::Continuous(l) => {
                if l.trainable && !self.offer_buffer.is_empty() {
                    self.offer_buffer.terminate(reward)?;
                    stats.offer = Some(offer_net_update(
                        &mut l.net,
                        &mut l.adam,
                        &self.offer_buffer,
                        self.entropy,
                    )?);
                }
            }
            OfferPolicy::Choice { learner, .. } => {
                if learner.trainable && !self.choice_buffer.is_empty() {
                    self.choice_buffer.terminate(reward)?;
                    stats.choice = Some(accept_net_update(
                        &mut learner.net,
                        &mut learner.adam,
                        &self.choice_buffer,
                    )?);
                }
            }
        }
        Ok(())
    }

    /// Offer-head parameters the agent would use in `state`.
    pub fn offer_marginals(&self, state: &[f64]) -> Result<Vec<crate::neural::Marginal>> {
        match &self.offer {
            OfferPolicy::Continuous(l) => Ok(l.net.evaluate(state)?.0),
            _ => Err(contract("agent has no continuous offer head")),
        }
    }

    /// Probabilities over the kept shares of a choice policy, given the last
    /// share received (0 before any offer) at normalized time `time`.
    pub fn choice_probabilities(&self, received: f64, time: f64) -> Result<Vec<f64>> {
        match &self.offer {
            OfferPolicy::Choice { learner, .. } => Ok(softmax_policy(&learner.net.evaluate(&[received, time])?.0)),
            _ => Err(contract("agent has no choice policy")),
        }
    }

    /// Probability of accepting `own_shares` at normalized time `time`.
    pub fn accept_probability(&self, own_shares: &[f64], time: f64) -> Result<f64> {
        let l = self
            .accept
            .as_ref()
            .ok_or_else(|| contract("agent has no accept net"))?;
        let mut s = own_shares.to_vec();
        s.push(time);
        Ok(softmax_policy(&l.net.evaluate(&s)?.0)[ACCEPT])
    }
}

impl Negotiator for NeuralAgent {
    fn begin(&mut self, _scenario: &Scenario, side: Side) {
        self.side = side;
        self.last_received = None;
        self.accept_buffer.clear();
        self.offer_buffer.clear();
        self.choice_buffer.clear();
    }

    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, rng: &mut GameRng) -> Decision {
        let own = offer.shares_for(self.side);
        self.last_received = Some(own.clone());
        if !turn.may_accept {
            return Decision::Reject;
        }
        match self.decide(turn, &own, rng) {
            Ok(d) => d,
            Err(e) => {
                self.fail(e);
                Decision::Reject
            }
        }
    }

    fn propose(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Vec<f64> {
        match self.counter(turn, rng) {
            Ok(x) => x,
            Err(e) => {
                self.fail(e);
                hardliner_offer(turn.scenario.issue_count())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::assert_gradients;
    use rand::SeedableRng;

    fn discrete_buffer(net: &DiscreteActorCritic, reward: f64, rng: &mut ChaCha8Rng) -> EpisodeBuffer<DiscreteRecord> {
        let mut b = EpisodeBuffer::new();
        for _ in 0..4 {
            let state: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            b.push(DiscreteRecord {
                state,
                action: rng.random_range(0..net.actions()),
                log_prob: 0.0,
                value: 0.0,
            })
            .unwrap();
        }
        b.terminate(reward).unwrap();
        b
    }

    #[test]
    fn buffer_has_one_terminal_reward() {
        let mut b: EpisodeBuffer<u8> = EpisodeBuffer::new();
        b.push(1).unwrap();
        b.push(2).unwrap();
        assert_eq!(b.reward_to_assign(0), None);
        b.terminate(3.0).unwrap();
        assert!(b.terminate(4.0).is_err());
        assert!(b.push(5).is_err());
        assert_eq!(b.reward_to_assign(1), Some(3.0));
        assert_eq!(b.reward_to_assign(2), None);
    }

    #[test]
    fn single_record_hand_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = DiscreteActorCritic::new(2, 4, 2, &mut rng).unwrap();
        // Zero the heads: logits (0, 0) give log π = ln 0.5 and q̂ = 0.
        for layer in net.actor.layers.iter_mut().chain(net.value.layers.iter_mut()) {
            layer.weight.fill(0.0);
            layer.bias.fill(0.0);
        }
        let mut b = EpisodeBuffer::new();
        b.push(DiscreteRecord {
            state: vec![0.3, 0.1],
            action: ACCEPT,
            log_prob: 0.5f64.ln(),
            value: 0.0,
        })
        .unwrap();
        b.terminate(1.0).unwrap();
        let (_, losses) = discrete_gradients(&net, &b).unwrap();
        assert!((losses.critic - 1.0).abs() < 1e-12);
        assert!((losses.actor - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_td_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DiscreteActorCritic::new(2, 4, 2, &mut rng).unwrap();
        let state = vec![0.5, 0.5];
        let (_, value) = net.evaluate(&state).unwrap();
        let mut b = EpisodeBuffer::new();
        b.push(DiscreteRecord {
            state,
            action: REJECT,
            log_prob: 0.0,
            value,
        })
        .unwrap();
        b.terminate(value).unwrap();
        let before = net.clone();
        let mut adam = AdamState::for_model(&net, 0.1);
        let losses = accept_net_update(&mut net, &mut adam, &b).unwrap();
        assert_eq!(losses, Losses::default());
        assert_eq!(net, before);
    }

    #[test]
    fn discrete_gradients_match_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = DiscreteActorCritic::new(4, 6, 2, &mut rng).unwrap();
            let b = discrete_buffer(&net, 2.5, &mut rng);
            let (grads, _) = discrete_gradients(&net, &b).unwrap();
            // With TD held fixed, the loss is Σ TD² − Σ log π·TD₀.
            let td0: Vec<f64> = b
                .records()
                .iter()
                .map(|r| 2.5 - net.evaluate(&r.state).unwrap().1)
                .collect();
            let loss = |n: &DiscreteActorCritic| {
                b.records()
                    .iter()
                    .zip(&td0)
                    .map(|(r, t0)| {
                        let (logits, v) = n.evaluate(&r.state).unwrap();
                        let td = 2.5 - v;
                        td * td - log_softmax(&logits)[r.action] * t0
                    })
                    .sum()
            };
            assert_gradients(&net, &grads, loss, 1e-4, 1e-6);
        }
    }

    #[test]
    fn offer_gradients_match_differences() {
        for kind in [HeadKind::Normal, HeadKind::Cauchy, HeadKind::Beta] {
            for form in [EntropyForm::Verbatim, EntropyForm::Standard] {
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                let net = OfferNet::new(4, 3, kind, 5, 1.0, &mut rng).unwrap();
                let mut b = EpisodeBuffer::new();
                for _ in 0..3 {
                    let state: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
                    let action = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
                    b.push(OfferRecord {
                        state,
                        action,
                        log_prob: 0.0,
                        value: 0.0,
                    })
                    .unwrap();
                }
                b.terminate(3.0).unwrap();
                let (grads, _) = offer_gradients(&net, &b, form).unwrap();
                let td0: Vec<f64> = b
                    .records()
                    .iter()
                    .map(|r| 3.0 - net.evaluate(&r.state).unwrap().1)
                    .collect();
                let loss = |n: &OfferNet| {
                    let mut total = 0.0;
                    for (r, t0) in b.records().iter().zip(&td0) {
                        let (ms, v) = n.evaluate(&r.state).unwrap();
                        total += (3.0 - v).powi(2);
                        for (m, x) in ms.iter().zip(&r.action) {
                            total -= (m.log_prob(*x).unwrap() + m.entropy_grad(form).value) * t0;
                        }
                    }
                    total
                };
                assert_gradients(&net, &grads, loss, 1e-4, 1e-6);
            }
        }
    }

    #[test]
    fn zero_learning_rate_freezes_the_agent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DiscreteActorCritic::new(4, 6, 2, &mut rng).unwrap();
        let mut adam = AdamState::for_model(&net, 0.0);
        let mut trained = net.clone();
        for _ in 0..20 {
            let b = discrete_buffer(&net, 1.0, &mut rng);
            accept_net_update(&mut trained, &mut adam, &b).unwrap();
        }
        assert_eq!(trained, net);
    }

    #[test]
    fn architecture_round_trips_through_meta() {
        let arch = AgentArchitecture {
            accept: Some((4, 8)),
            offer: OfferArchitecture::Continuous {
                kind: HeadKind::Cauchy,
                inputs: 4,
                width: 6,
                issues: 3,
                beta_offset: 1.5,
            },
            entropy: EntropyForm::Standard,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = NeuralAgent::build(&arch, 1e-4, 1e-3, &mut rng).unwrap();
        assert_eq!(agent.architecture(), arch);
        let ck = agent.checkpoint(5, 6).unwrap();
        let back = NeuralAgent::from_checkpoint(&ck).unwrap();
        assert_eq!(back.architecture(), arch);
        assert_eq!(back.accept, agent.accept);
        assert_eq!(back.offer, agent.offer);

        let choice = AgentArchitecture {
            accept: None,
            offer: OfferArchitecture::Choice {
                inputs: 2,
                width: 4,
                kept: vec![0.9, 0.5],
            },
            entropy: EntropyForm::Verbatim,
        };
        let agent = NeuralAgent::build(&choice, 1e-4, 1e-4, &mut rng).unwrap();
        let back = NeuralAgent::from_checkpoint(&agent.checkpoint(0, 0).unwrap()).unwrap();
        assert_eq!(back.architecture(), choice);
    }
}
