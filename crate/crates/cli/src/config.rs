//! Experiment files: TOML with sections, unknown keys rejected. Every run
//! writes the fully resolved file back out as `config.toml`, and feeding that
//! snapshot to the same subcommand repeats the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bargain::agents::{AgentSpec, OfferMode};
use bargain::neural::{EntropyForm, HeadKind};
use bargain::protocol::{GameRules, Scenario, Side};
use bargain::training::{time_opponent, NetSelection, SelfPlayConfig, SelfPlayMode, TftVariant, TrainConfig};

use crate::error::{usage, CliError, CliResult};

pub const DEFAULT_CHECKPOINT_EVERY: usize = 1000;
pub const DESK_GAMES: usize = 100;
pub const PAPER_GAMES: usize = 400;

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    /// Output directory; never written into snapshots.
    pub output: Option<String>,
    pub scenario: Option<ScenarioSection>,
    pub agents: Option<AgentsSection>,
    pub train: Option<TrainSection>,
    pub play: Option<PlaySection>,
    pub analyze: Option<AnalyzeSection>,
    pub reproduce: Option<ReproduceSection>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub weights_a: Option<Vec<f64>>,
    pub weights_b: Option<Vec<f64>>,
    /// Per-round discount, or the growth factor when `growth` is set.
    pub discount: Option<f64>,
    pub deadline: Option<u32>,
    pub reserve: Option<f64>,
    pub growth: Option<bool>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    /// Scripted agent on side B, e.g. `time(c=1,mode=planar)`.
    pub opponent: Option<String>,
    /// Scripted agent on side A for `play` runs without a checkpoint.
    pub agent: Option<String>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub nets: Option<String>,
    pub first_mover: Option<String>,
    pub acceptors: Option<Vec<String>>,
    pub head: Option<String>,
    pub entropy: Option<String>,
    pub accept_lr: Option<f64>,
    pub offer_lr: Option<f64>,
    /// Self-play only: shared by both players and both nets.
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub penalty: Option<f64>,
    pub early_stop_window: Option<usize>,
    pub early_stop_threshold: Option<f64>,
    pub accept_width: Option<usize>,
    pub offer_width: Option<usize>,
    pub beta_offset: Option<f64>,
    pub checkpoint_every: Option<usize>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlaySection {
    pub checkpoint: Option<String>,
    pub games: Option<usize>,
    pub first_mover: Option<String>,
    pub acceptors: Option<Vec<String>>,
    pub penalty: Option<f64>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub grid_step: Option<f64>,
    pub concessions: Option<Vec<f64>>,
    pub discounts: Option<Vec<f64>>,
    /// Highest derivative order tabulated.
    pub max_order: Option<u32>,
}

#[derive(Serialize, Deserialize, Default, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub paper_scale: Option<bool>,
    /// Overrides every training run's epoch count.
    pub epochs: Option<usize>,
    pub games: Option<usize>,
}

/// Where a config came from, for line-level diagnostics.
#[derive(Clone, Debug, Default)]
pub struct Source {
    pub path: Option<PathBuf>,
    pub text: String,
}

impl Source {
    /// Line (1-based) of `key` inside `[section]`, or at top level for "".
    pub fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                continue;
            }
            if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    /// A usage error pointing at `section.key` when the file sets it.
    pub fn error(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
        let name = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        match (&self.path, self.line_of(section, key)) {
            (Some(p), Some(line)) => usage(format!("{}:{line}: `{name}`: {msg}", p.display())),
            _ => usage(format!("`{name}`: {msg}")),
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<(ConfigFile, Source)> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let file = ConfigFile::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok((
            file,
            Source {
                path: Some(path.to_path_buf()),
                text,
            },
        ))
    }

    pub fn parse(text: &str) -> Result<ConfigFile, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn render(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    /// Rejects sections and keys the subcommand would silently ignore.
    pub fn expect_command(&self, command: &str, src: &Source) -> CliResult<()> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(src.error("", "command", format!("this file is for `{c}`, not `{command}`")));
            }
        }
        let present = [
            ("scenario", self.scenario.is_some()),
            ("agents", self.agents.is_some()),
            ("train", self.train.is_some()),
            ("play", self.play.is_some()),
            ("analyze", self.analyze.is_some()),
            ("reproduce", self.reproduce.is_some()),
        ];
        let allowed: &[&str] = match command {
            "train" => &["scenario", "agents", "train"],
            "selfplay" => &["scenario", "train"],
            "play" => &["scenario", "agents", "play"],
            "analyze" => &["scenario", "analyze"],
            "reproduce" => &["reproduce"],
            _ => &[],
        };
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(usage(format!("section [{name}] is not used by `{command}`")));
            }
        }
        Ok(())
    }
}

pub fn parse_side(s: &str) -> Option<Side> {
    match s.to_ascii_lowercase().as_str() {
        "a" => Some(Side::A),
        "b" => Some(Side::B),
        _ => None,
    }
}

pub fn side_tag(side: Side) -> String {
    side.to_string().to_ascii_lowercase()
}

fn rules_from(
    base: GameRules,
    first_mover: &Option<String>,
    acceptors: &Option<Vec<String>>,
    section: &str,
    src: &Source,
) -> CliResult<GameRules> {
    let mut rules = base;
    if let Some(f) = first_mover {
        rules.first_mover = parse_side(f).ok_or_else(|| src.error(section, "first_mover", "expected `a` or `b`"))?;
    }
    if let Some(list) = acceptors {
        let mut may = [false, false];
        for s in list {
            let side =
                parse_side(s).ok_or_else(|| src.error(section, "acceptors", format!("`{s}` is not `a` or `b`")))?;
            may[side.index()] = true;
        }
        if may == [false, false] {
            return Err(src.error(section, "acceptors", "at least one side must be able to accept"));
        }
        rules.may_accept = may;
    }
    Ok(rules)
}

fn acceptor_tags(rules: GameRules) -> Vec<String> {
    [Side::A, Side::B]
        .into_iter()
        .filter(|s| rules.may_accept[s.index()])
        .map(side_tag)
        .collect()
}

pub fn apply_scenario(base: Scenario, section: &Option<ScenarioSection>, src: &Source) -> CliResult<Scenario> {
    let Some(s) = section else { return Ok(base) };
    let weights_a = s.weights_a.clone().unwrap_or_else(|| base.weights(Side::A).to_vec());
    let weights_b = s.weights_b.clone().unwrap_or_else(|| base.weights(Side::B).to_vec());
    let discount = s.discount.unwrap_or(base.discount());
    let deadline = s.deadline.unwrap_or(base.deadline());
    let reserve = s.reserve.unwrap_or(base.reserve());
    let growth = s.growth.unwrap_or(base.is_growth());
    let built = if growth {
        if reserve != 0.0 {
            return Err(src.error("scenario", "reserve", "growth scenarios have no reserve"));
        }
        Scenario::with_growth(weights_a, weights_b, discount, deadline)
    } else {
        Scenario::new(weights_a, weights_b, discount, deadline, reserve)
    };
    built.map_err(|e| usage(format!("invalid [scenario]: {e}")))
}

pub fn scenario_section(s: &Scenario) -> ScenarioSection {
    ScenarioSection {
        weights_a: Some(s.weights(Side::A).to_vec()),
        weights_b: Some(s.weights(Side::B).to_vec()),
        discount: Some(s.discount()),
        deadline: Some(s.deadline()),
        reserve: Some(s.reserve()),
        growth: Some(s.is_growth()),
    }
}

fn entropy_tag(e: EntropyForm) -> &'static str {
    match e {
        EntropyForm::Verbatim => "verbatim",
        EntropyForm::Standard => "standard",
    }
}

fn parse_entropy(s: &str) -> Option<EntropyForm> {
    match s {
        "verbatim" => Some(EntropyForm::Verbatim),
        "standard" => Some(EntropyForm::Standard),
        _ => None,
    }
}

/// Named training setups accepted by `train --experiment`.
pub const TRAIN_PRESETS: [&str; 8] = [
    "accept_vs_linear",
    "accept_vs_boulware",
    "accept_vs_conceder",
    "offer_normal",
    "offer_cauchy",
    "offer_beta",
    "tft_relative",
    "tft_bayesian",
];

pub fn train_preset(name: &str) -> CliResult<Option<TrainConfig>> {
    let linear = || time_opponent(1.0, OfferMode::Planar);
    let s = Scenario::default();
    let c = match name {
        "accept_vs_linear" => TrainConfig::accept_experiment(s, linear()?),
        "accept_vs_boulware" => TrainConfig::accept_experiment(s, time_opponent(0.3, OfferMode::Planar)?),
        "accept_vs_conceder" => TrainConfig::accept_experiment(s, time_opponent(10.0, OfferMode::Planar)?),
        "offer_normal" => TrainConfig::offer_experiment(s, linear()?, HeadKind::Normal),
        "offer_cauchy" => TrainConfig::offer_experiment(s, linear()?, HeadKind::Cauchy),
        "offer_beta" => TrainConfig::offer_experiment(s, linear()?, HeadKind::Beta),
        "tft_relative" => TrainConfig::tft_experiment(TftVariant::Relative)?,
        "tft_bayesian" => TrainConfig::tft_experiment(TftVariant::Bayesian)?,
        _ => return Ok(None),
    };
    Ok(Some(c))
}

/// A training run fully pinned down.
#[derive(Clone, Debug)]
pub struct TrainPlan {
    pub experiment: String,
    pub repetitions: usize,
    pub checkpoint_every: usize,
    pub config: TrainConfig,
}

fn opponent_from(raw: &str, src: &Source) -> CliResult<AgentSpec> {
    raw.parse().map_err(|e| src.error("agents", "opponent", e))
}

pub fn resolve_train(file: &ConfigFile, src: &Source) -> CliResult<TrainPlan> {
    file.expect_command("train", src)?;
    let agents = file.agents.clone().unwrap_or_default();
    if agents.agent.is_some() {
        return Err(src.error(
            "agents",
            "agent",
            "the learner is the neural agent; only `opponent` applies",
        ));
    }
    let t = file.train.clone().unwrap_or_default();
    if t.learning_rate.is_some() {
        return Err(src.error("train", "learning_rate", "use accept_lr / offer_lr outside self-play"));
    }
    let name = file.experiment.clone().unwrap_or_else(|| "custom".into());
    let mut config = match train_preset(&name)? {
        Some(c) => c,
        None if name == "custom" => {
            let raw = agents.opponent.as_deref().ok_or_else(|| {
                usage("missing field `agents.opponent`: a custom experiment needs an opponent spec such as `time(c=1,mode=planar)`")
            })?;
            TrainConfig::accept_experiment(Scenario::default(), opponent_from(raw, src)?)
        }
        None => {
            return Err(src.error(
                "",
                "experiment",
                format!(
                    "unknown experiment `{name}`; choose one of: custom, {}",
                    TRAIN_PRESETS.join(", ")
                ),
            ))
        }
    };
    config.scenario = apply_scenario(config.scenario, &file.scenario, src)?;
    if let Some(raw) = &agents.opponent {
        config.opponent = opponent_from(raw, src)?;
    }
    if let Some(n) = &t.nets {
        config.nets = n.parse::<NetSelection>().map_err(|e| src.error("train", "nets", e))?;
    }
    config.rules = rules_from(config.rules, &t.first_mover, &t.acceptors, "train", src)?;
    if let Some(h) = &t.head {
        config.head = h.parse::<HeadKind>().map_err(|e| src.error("train", "head", e))?;
    }
    if let Some(e) = &t.entropy {
        config.entropy =
            parse_entropy(e).ok_or_else(|| src.error("train", "entropy", "expected `verbatim` or `standard`"))?;
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = t.$field {
                config.$field = v;
            }
        };
    }
    set!(accept_lr);
    set!(offer_lr);
    set!(epochs);
    set!(penalty);
    set!(accept_width);
    set!(offer_width);
    set!(beta_offset);
    if let Some(w) = t.early_stop_window {
        config.early_stop.window = w;
    }
    if let Some(th) = t.early_stop_threshold {
        config.early_stop.threshold = th;
    }
    if let Some(seed) = file.seed {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|e| usage(format!("invalid training config: {e}")))?;
    let repetitions = file.repetitions.unwrap_or(1);
    if repetitions == 0 {
        return Err(src.error("", "repetitions", "must be at least 1"));
    }
    Ok(TrainPlan {
        experiment: name,
        repetitions,
        checkpoint_every: t.checkpoint_every.unwrap_or(DEFAULT_CHECKPOINT_EVERY),
        config,
    })
}

impl TrainPlan {
    pub fn snapshot(&self) -> ConfigFile {
        let c = &self.config;
        ConfigFile {
            command: Some("train".into()),
            experiment: Some(self.experiment.clone()),
            seed: Some(c.seed),
            repetitions: Some(self.repetitions),
            scenario: Some(scenario_section(&c.scenario)),
            agents: Some(AgentsSection {
                opponent: Some(c.opponent.to_string()),
                agent: None,
            }),
            train: Some(TrainSection {
                nets: Some(c.nets.tag().into()),
                first_mover: Some(side_tag(c.rules.first_mover)),
                acceptors: Some(acceptor_tags(c.rules)),
                head: Some(c.head.tag().into()),
                entropy: Some(entropy_tag(c.entropy).into()),
                accept_lr: Some(c.accept_lr),
                offer_lr: Some(c.offer_lr),
                learning_rate: None,
                epochs: Some(c.epochs),
                penalty: Some(c.penalty),
                early_stop_window: Some(c.early_stop.window),
                early_stop_threshold: Some(c.early_stop.threshold),
                accept_width: Some(c.accept_width),
                offer_width: Some(c.offer_width),
                beta_offset: Some(c.beta_offset),
                checkpoint_every: Some(self.checkpoint_every),
            }),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelfPlayPlan {
    pub repetitions: usize,
    pub checkpoint_every: usize,
    pub config: SelfPlayConfig,
}

pub fn resolve_selfplay(file: &ConfigFile, src: &Source) -> CliResult<SelfPlayPlan> {
    file.expect_command("selfplay", src)?;
    let t = file.train.clone().unwrap_or_default();
    for (key, set) in [
        ("nets", t.nets.is_some()),
        ("accept_lr", t.accept_lr.is_some()),
        ("offer_lr", t.offer_lr.is_some()),
    ] {
        if set {
            return Err(src.error("train", key, "not used in self-play; set `learning_rate`"));
        }
    }
    let name = file.experiment.as_deref().ok_or_else(|| {
        usage("missing field `experiment`: the self-play mode (minigame_bargain, minigame_centipede, multivariate)")
    })?;
    let mode: SelfPlayMode = name.parse().map_err(|e| src.error("", "experiment", e))?;
    let mut config = SelfPlayConfig::new(mode)?;
    config.scenario = apply_scenario(config.scenario, &file.scenario, src)?;
    config.rules = rules_from(config.rules, &t.first_mover, &t.acceptors, "train", src)?;
    if let Some(h) = &t.head {
        config.head = h.parse::<HeadKind>().map_err(|e| src.error("train", "head", e))?;
    }
    if let Some(e) = &t.entropy {
        config.entropy =
            parse_entropy(e).ok_or_else(|| src.error("train", "entropy", "expected `verbatim` or `standard`"))?;
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = t.$field {
                config.$field = v;
            }
        };
    }
    set!(learning_rate);
    set!(epochs);
    set!(penalty);
    set!(accept_width);
    set!(offer_width);
    set!(beta_offset);
    if let Some(w) = t.early_stop_window {
        config.early_stop.window = w;
    }
    if let Some(th) = t.early_stop_threshold {
        config.early_stop.threshold = th;
    }
    if let Some(seed) = file.seed {
        config.seed = seed;
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(src.error("train", "learning_rate", "must be finite and non-negative"));
    }
    if !(config.penalty >= 0.0 && config.penalty.is_finite()) {
        return Err(src.error("train", "penalty", "must be finite and non-negative"));
    }
    config
        .architecture()
        .map_err(|e| usage(format!("invalid self-play config: {e}")))?;
    let repetitions = file.repetitions.unwrap_or(1);
    if repetitions == 0 {
        return Err(src.error("", "repetitions", "must be at least 1"));
    }
    Ok(SelfPlayPlan {
        repetitions,
        checkpoint_every: t.checkpoint_every.unwrap_or(DEFAULT_CHECKPOINT_EVERY),
        config,
    })
}

impl SelfPlayPlan {
    pub fn snapshot(&self) -> ConfigFile {
        let c = &self.config;
        ConfigFile {
            command: Some("selfplay".into()),
            experiment: Some(c.mode.tag().into()),
            seed: Some(c.seed),
            repetitions: Some(self.repetitions),
            scenario: Some(scenario_section(&c.scenario)),
            train: Some(TrainSection {
                first_mover: Some(side_tag(c.rules.first_mover)),
                acceptors: Some(acceptor_tags(c.rules)),
                head: Some(c.head.tag().into()),
                entropy: Some(entropy_tag(c.entropy).into()),
                learning_rate: Some(c.learning_rate),
                epochs: Some(c.epochs),
                penalty: Some(c.penalty),
                early_stop_window: Some(c.early_stop.window),
                early_stop_threshold: Some(c.early_stop.threshold),
                accept_width: Some(c.accept_width),
                offer_width: Some(c.offer_width),
                beta_offset: Some(c.beta_offset),
                checkpoint_every: Some(self.checkpoint_every),
                ..Default::default()
            }),
            ..Default::default()
        }
    }
}

/// The side-A player in `play`.
#[derive(Clone, Debug, PartialEq)]
pub enum Learner {
    Checkpoint(PathBuf),
    Scripted(AgentSpec),
}

#[derive(Clone, Debug)]
pub struct PlayPlan {
    pub learner: Learner,
    pub opponent: AgentSpec,
    /// `None` means: take the scenario the checkpoint was trained on.
    pub scenario: Option<Scenario>,
    pub rules: Option<GameRules>,
    pub games: usize,
    pub penalty: f64,
    pub seed: u64,
}

pub fn resolve_play(file: &ConfigFile, src: &Source, paper_scale: bool) -> CliResult<PlayPlan> {
    file.expect_command("play", src)?;
    let agents = file.agents.clone().unwrap_or_default();
    let p = file.play.clone().unwrap_or_default();
    let learner = match (&p.checkpoint, &agents.agent) {
        (Some(_), Some(_)) => {
            return Err(src.error(
                "agents",
                "agent",
                "give either a checkpoint or a scripted agent, not both",
            ))
        }
        (Some(path), None) => Learner::Checkpoint(PathBuf::from(path)),
        (None, Some(raw)) => Learner::Scripted(raw.parse().map_err(|e| src.error("agents", "agent", e))?),
        (None, None) => {
            return Err(usage(
                "missing field `play.checkpoint` (or `agents.agent` for a scripted player)",
            ))
        }
    };
    let raw = agents.opponent.as_deref().ok_or_else(|| {
        usage("missing field `agents.opponent`: the agent to play against, e.g. `time(c=1,mode=planar)`")
    })?;
    let opponent = opponent_from(raw, src)?;
    let scenario = match &file.scenario {
        Some(_) => Some(apply_scenario(Scenario::default(), &file.scenario, src)?),
        None => None,
    };
    let rules = if p.first_mover.is_some() || p.acceptors.is_some() {
        Some(rules_from(
            GameRules::STANDARD,
            &p.first_mover,
            &p.acceptors,
            "play",
            src,
        )?)
    } else {
        None
    };
    let penalty = p.penalty.unwrap_or(bargain::training::reward::DEFAULT_PENALTY);
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(src.error("play", "penalty", "must be finite and non-negative"));
    }
    Ok(PlayPlan {
        learner,
        opponent,
        scenario,
        rules,
        games: p.games.unwrap_or(if paper_scale { PAPER_GAMES } else { DESK_GAMES }),
        penalty,
        seed: file.seed.unwrap_or(0),
    })
}

impl PlayPlan {
    /// Snapshot once scenario and rules are known.
    pub fn snapshot(&self, scenario: &Scenario, rules: GameRules) -> ConfigFile {
        let (checkpoint, agent) = match &self.learner {
            Learner::Checkpoint(p) => (Some(p.display().to_string()), None),
            Learner::Scripted(spec) => (None, Some(spec.to_string())),
        };
        ConfigFile {
            command: Some("play".into()),
            seed: Some(self.seed),
            scenario: Some(scenario_section(scenario)),
            agents: Some(AgentsSection {
                opponent: Some(self.opponent.to_string()),
                agent,
            }),
            play: Some(PlaySection {
                checkpoint,
                games: Some(self.games),
                first_mover: Some(side_tag(rules.first_mover)),
                acceptors: Some(acceptor_tags(rules)),
                penalty: Some(self.penalty),
            }),
            ..Default::default()
        }
    }
}

pub const STOPPING_CONCESSIONS: [f64; 8] = [0.3, 0.95, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0];
pub const STOPPING_DISCOUNTS: [f64; 5] = [0.85, 0.9, 0.95, 0.99, 1.0];

#[derive(Clone, Debug)]
pub struct AnalyzePlan {
    pub scenario: Scenario,
    pub grid_step: f64,
    pub concessions: Vec<f64>,
    pub discounts: Vec<f64>,
    pub max_order: u32,
}

pub fn resolve_analyze(file: &ConfigFile, src: &Source) -> CliResult<AnalyzePlan> {
    file.expect_command("analyze", src)?;
    let a = file.analyze.clone().unwrap_or_default();
    let scenario = apply_scenario(Scenario::default(), &file.scenario, src)?;
    let grid_step = a.grid_step.unwrap_or(0.01);
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(src.error("analyze", "grid_step", "must lie in (0, 1]"));
    }
    let concessions = a.concessions.unwrap_or_else(|| STOPPING_CONCESSIONS.to_vec());
    if concessions.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(src.error("analyze", "concessions", "concession factors must be positive"));
    }
    let discounts = a.discounts.unwrap_or_else(|| STOPPING_DISCOUNTS.to_vec());
    if discounts.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(src.error("analyze", "discounts", "discounts must lie in (0, 1]"));
    }
    let max_order = a.max_order.unwrap_or(3);
    if max_order == 0 {
        return Err(src.error("analyze", "max_order", "must be at least 1"));
    }
    Ok(AnalyzePlan {
        scenario,
        grid_step,
        concessions,
        discounts,
        max_order,
    })
}

impl AnalyzePlan {
    pub fn snapshot(&self) -> ConfigFile {
        ConfigFile {
            command: Some("analyze".into()),
            scenario: Some(scenario_section(&self.scenario)),
            analyze: Some(AnalyzeSection {
                grid_step: Some(self.grid_step),
                concessions: Some(self.concessions.clone()),
                discounts: Some(self.discounts.clone()),
                max_order: Some(self.max_order),
            }),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReproducePlan {
    pub id: String,
    pub seed: u64,
    pub paper_scale: bool,
    pub epochs: Option<usize>,
    pub games: usize,
}

pub fn resolve_reproduce(file: &ConfigFile, src: &Source) -> CliResult<ReproducePlan> {
    file.expect_command("reproduce", src)?;
    let r = file.reproduce.clone().unwrap_or_default();
    let id = file.experiment.clone().ok_or_else(|| {
        usage(format!(
            "missing reproduction id; available: {}",
            crate::reproduce::menu()
        ))
    })?;
    if !crate::reproduce::ids().contains(&id.as_str()) {
        return Err(usage(format!(
            "unknown reproduction id `{id}`; available: {}",
            crate::reproduce::menu()
        )));
    }
    let paper_scale = r.paper_scale.unwrap_or(false);
    if r.epochs == Some(0) {
        return Err(src.error("reproduce", "epochs", "must be at least 1"));
    }
    Ok(ReproducePlan {
        id,
        seed: file.seed.unwrap_or(0),
        paper_scale,
        epochs: r.epochs,
        games: r.games.unwrap_or(if paper_scale { PAPER_GAMES } else { DESK_GAMES }),
    })
}

impl ReproducePlan {
    pub fn snapshot(&self) -> ConfigFile {
        ConfigFile {
            command: Some("reproduce".into()),
            experiment: Some(self.id.clone()),
            seed: Some(self.seed),
            reproduce: Some(ReproduceSection {
                paper_scale: Some(self.paper_scale),
                epochs: self.epochs,
                games: Some(self.games),
            }),
            ..Default::default()
        }
    }
}
