//! Command-line front end: config files, run directories and reproduction
//! bundles on top of the `bargain` library.

pub mod analyze;
pub mod config;
pub mod error;
pub mod output;
pub mod reproduce;
pub mod runs;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, Source};
use error::{usage, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bargain", version, about = "Train and evaluate negotiation agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a neural agent against a scripted opponent.
    Train(TrainArgs),
    /// Train two neural agents against each other.
    Selfplay(SelfPlayArgs),
    /// Play frozen games and summarize them.
    Play(PlayArgs),
    /// Write the analytic tables for a scenario.
    Analyze(AnalyzeArgs),
    /// Regenerate a named table or figure bundle.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory (default: $BARGAIN_OUTPUT_ROOT/<command>/<name>-seed<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an earlier run in the target directory instead of picking a fresh sibling.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// accept_vs_linear, accept_vs_boulware, accept_vs_conceder, offer_normal,
    /// offer_cauchy, offer_beta, tft_relative, tft_bayesian or custom.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub opponent: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Write a checkpoint every N epochs (0 disables).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelfPlayArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// minigame_bargain, minigame_centipede or multivariate.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Checkpoint of a trained agent (plays side A).
    #[arg(long, conflicts_with = "agent")]
    pub checkpoint: Option<PathBuf>,
    /// Scripted agent spec for side A instead of a checkpoint.
    #[arg(long)]
    pub agent: Option<String>,
    #[arg(long)]
    pub opponent: Option<String>,
    #[arg(long)]
    pub games: Option<usize>,
    #[arg(long)]
    pub paper_scale: bool,
    /// a or b.
    #[arg(long)]
    pub first_mover: Option<String>,
    /// Comma-separated sides allowed to accept.
    #[arg(long, value_delimiter = ',')]
    pub acceptors: Option<Vec<String>>,
    #[arg(long)]
    pub penalty: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    pub weights_a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub weights_b: Option<Vec<f64>>,
    #[arg(long)]
    pub discount: Option<f64>,
    #[arg(long)]
    pub deadline: Option<u32>,
    #[arg(long)]
    pub reserve: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Table or figure id; `--list` shows them all.
    pub id: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub paper_scale: bool,
    /// Shorten every training run to this many epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub games: Option<usize>,
}

fn load(run: &RunArgs) -> CliResult<(ConfigFile, Source)> {
    let (mut file, src) = match &run.config {
        Some(p) => ConfigFile::load(p)?,
        None => (ConfigFile::default(), Source::default()),
    };
    if let Some(s) = run.seed {
        file.seed = Some(s);
    }
    Ok((file, src))
}

fn target_dir(run: &RunArgs, file: &ConfigFile, command: &str, name: &str, seed: u64) -> CliResult<PathBuf> {
    let wanted = match (&run.out, &file.output) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => output::output_root().join(command).join(format!("{name}-seed{seed}")),
    };
    output::prepare_run_dir(&wanted, run.overwrite)
}

fn announce(dir: &Path) {
    println!("{}", dir.display());
}

fn train(a: TrainArgs) -> CliResult<()> {
    let (mut file, src) = load(&a.run)?;
    if a.experiment.is_some() {
        file.experiment = a.experiment;
    }
    if a.repetitions.is_some() {
        file.repetitions = a.repetitions;
    }
    if let Some(o) = a.opponent {
        file.agents.get_or_insert_with(Default::default).opponent = Some(o);
    }
    let t = file.train.get_or_insert_with(Default::default);
    if a.epochs.is_some() {
        t.epochs = a.epochs;
    }
    if a.checkpoint_every.is_some() {
        t.checkpoint_every = a.checkpoint_every;
    }
    let plan = config::resolve_train(&file, &src)?;
    let dir = target_dir(&a.run, &file, "train", &plan.experiment, plan.config.seed)?;
    announce(&dir);
    runs::train_all(&plan, &dir)?;
    Ok(())
}

fn selfplay(a: SelfPlayArgs) -> CliResult<()> {
    let (mut file, src) = load(&a.run)?;
    if a.mode.is_some() {
        file.experiment = a.mode;
    }
    if a.repetitions.is_some() {
        file.repetitions = a.repetitions;
    }
    let t = file.train.get_or_insert_with(Default::default);
    if a.epochs.is_some() {
        t.epochs = a.epochs;
    }
    if a.checkpoint_every.is_some() {
        t.checkpoint_every = a.checkpoint_every;
    }
    let plan = config::resolve_selfplay(&file, &src)?;
    let dir = target_dir(&a.run, &file, "selfplay", plan.config.mode.tag(), plan.config.seed)?;
    announce(&dir);
    runs::selfplay_all(&plan, &dir)?;
    Ok(())
}

fn play(a: PlayArgs) -> CliResult<()> {
    let (mut file, src) = load(&a.run)?;
    let agents = file.agents.get_or_insert_with(Default::default);
    if a.agent.is_some() {
        agents.agent = a.agent;
    }
    if a.opponent.is_some() {
        agents.opponent = a.opponent;
    }
    let p = file.play.get_or_insert_with(Default::default);
    if let Some(c) = a.checkpoint {
        p.checkpoint = Some(c.display().to_string());
    }
    if a.games.is_some() {
        p.games = a.games;
    }
    if a.first_mover.is_some() {
        p.first_mover = a.first_mover;
    }
    if a.acceptors.is_some() {
        p.acceptors = a.acceptors;
    }
    if a.penalty.is_some() {
        p.penalty = a.penalty;
    }
    let plan = config::resolve_play(&file, &src, a.paper_scale)?;
    // Resolve scenario and rules before touching the filesystem, so a bad
    // checkpoint leaves no empty run directory behind.
    let result = runs::play(&plan)?;
    let name = match &plan.learner {
        config::Learner::Checkpoint(_) => "checkpoint",
        config::Learner::Scripted(_) => "scripted",
    };
    let dir = target_dir(&a.run, &file, "play", name, plan.seed)?;
    announce(&dir);
    runs::write_play(&dir, &plan, &result)?;
    let s = &result.summary;
    eprintln!(
        "{} games, {} agreements, mean reward {}, mean time {}, d_nash {}, bid distribution {}",
        s.games, s.agreements, s.mean_reward, s.mean_time, s.d_nash, s.bid_distribution
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let (mut file, src) = load(&a.run)?;
    if a.weights_a.is_some()
        || a.weights_b.is_some()
        || a.discount.is_some()
        || a.deadline.is_some()
        || a.reserve.is_some()
    {
        let s = file.scenario.get_or_insert_with(Default::default);
        if a.weights_a.is_some() {
            s.weights_a = a.weights_a;
        }
        if a.weights_b.is_some() {
            s.weights_b = a.weights_b;
        }
        if a.discount.is_some() {
            s.discount = a.discount;
        }
        if a.deadline.is_some() {
            s.deadline = a.deadline;
        }
        if a.reserve.is_some() {
            s.reserve = a.reserve;
        }
    }
    if a.grid_step.is_some() {
        file.analyze.get_or_insert_with(Default::default).grid_step = a.grid_step;
    }
    let plan = config::resolve_analyze(&file, &src)?;
    let dir = target_dir(&a.run, &file, "analyze", "scenario", file.seed.unwrap_or(0))?;
    announce(&dir);
    analyze::run(&plan, &dir)
}

fn reproduce(a: ReproduceArgs) -> CliResult<()> {
    if a.list {
        print!("{}", reproduce::menu_lines());
        return Ok(());
    }
    let (mut file, src) = load(&a.run)?;
    if a.id.is_some() {
        file.experiment = a.id;
    }
    let r = file.reproduce.get_or_insert_with(Default::default);
    if a.paper_scale {
        r.paper_scale = Some(true);
    }
    if a.epochs.is_some() {
        r.epochs = a.epochs;
    }
    if a.games.is_some() {
        r.games = a.games;
    }
    let plan = config::resolve_reproduce(&file, &src)?;
    let dir = target_dir(&a.run, &file, "reproduce", &plan.id, plan.seed)?;
    announce(&dir);
    reproduce::run(&plan, &dir)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Selfplay(a) => selfplay(a),
        Command::Play(a) => play(a),
        Command::Analyze(a) => analyze(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

/// Parses `args` (program name first) and runs the command. Help and
/// version requests print and succeed.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            Ok(())
        }
        Err(e) => Err(usage(e.to_string())),
    }
}
