//! Executing resolved plans and writing their artifacts.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use bargain::agents::AgentSpec;
use bargain::neural::Checkpoint;
use bargain::protocol::{write_transcripts_csv, GameRng, GameRules, Negotiation, Scenario, Side, Transcript};
use bargain::training::{
    evaluate, rng_stream, summarize, train_self_play_observed, train_vs_opponent_observed, AgentArchitecture,
    EvalSummary, NeuralAgent, OfferArchitecture, PenaltyReward, SelfPlayOutcome, TrainOutcome, TrainingLog,
};

use crate::config::{parse_side, side_tag, Learner, PlayPlan, SelfPlayPlan, TrainPlan};
use crate::error::{CliError, CliResult};
use crate::output::{create, write_snapshot, write_table, SUMMARY_SCHEMA};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const TRANSCRIPTS_FILE: &str = "transcripts.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DIVERGED_FILE: &str = "diverged.txt";

/// Scenario and rules travel with a checkpoint so `play` can default to them.
pub fn game_meta(scenario: &Scenario, rules: GameRules) -> Vec<(String, String)> {
    let list = |w: &[f64]| w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
    let acceptors: Vec<String> = [Side::A, Side::B]
        .into_iter()
        .filter(|s| rules.may_accept[s.index()])
        .map(side_tag)
        .collect();
    vec![
        (
            "scenario".into(),
            format!(
                "weights_a={} weights_b={} discount={} deadline={} reserve={} growth={}",
                list(scenario.weights(Side::A)),
                list(scenario.weights(Side::B)),
                scenario.discount(),
                scenario.deadline(),
                scenario.reserve(),
                scenario.is_growth()
            ),
        ),
        (
            "rules".into(),
            format!(
                "first_mover={} acceptors={}",
                side_tag(rules.first_mover),
                acceptors.join(";")
            ),
        ),
    ]
}

fn meta_fields(raw: &str) -> Vec<(&str, &str)> {
    raw.split_whitespace().filter_map(|p| p.split_once('=')).collect()
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

pub fn scenario_from_meta(ck: &Checkpoint) -> CliResult<Option<Scenario>> {
    let Some(raw) = ck.meta("scenario") else {
        return Ok(None);
    };
    let f = meta_fields(raw);
    let get = |k: &str| {
        f.iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| schema(format!("checkpoint scenario lacks `{k}`")))
    };
    let num = |k: &str| -> CliResult<f64> { get(k)?.parse().map_err(|_| schema(format!("bad checkpoint `{k}`"))) };
    let weights = |k: &str| -> CliResult<Vec<f64>> {
        get(k)?
            .split(';')
            .map(|v| v.parse().map_err(|_| schema(format!("bad checkpoint `{k}`"))))
            .collect()
    };
    let deadline = get("deadline")?
        .parse()
        .map_err(|_| schema("bad checkpoint `deadline`"))?;
    let s = if get("growth")? == "true" {
        Scenario::with_growth(weights("weights_a")?, weights("weights_b")?, num("discount")?, deadline)
    } else {
        Scenario::new(
            weights("weights_a")?,
            weights("weights_b")?,
            num("discount")?,
            deadline,
            num("reserve")?,
        )
    };
    Ok(Some(s.map_err(|e| schema(format!("checkpoint scenario: {e}")))?))
}

pub fn rules_from_meta(ck: &Checkpoint) -> CliResult<Option<GameRules>> {
    let Some(raw) = ck.meta("rules") else { return Ok(None) };
    let f = meta_fields(raw);
    let get = |k: &str| {
        f.iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| schema(format!("checkpoint rules lack `{k}`")))
    };
    let first = parse_side(get("first_mover")?).ok_or_else(|| schema("bad checkpoint first mover"))?;
    let mut may = [false, false];
    for s in get("acceptors")?.split(';') {
        may[parse_side(s).ok_or_else(|| schema("bad checkpoint acceptor"))?.index()] = true;
    }
    Ok(Some(GameRules {
        may_accept: may,
        first_mover: first,
    }))
}

pub fn save_checkpoint(
    path: &Path,
    agent: &NeuralAgent,
    seed: u64,
    epoch: usize,
    extra: &[(String, String)],
) -> CliResult<()> {
    let mut ck = agent.checkpoint(seed, epoch as u64)?;
    ck.meta.extend(extra.iter().cloned());
    let mut out = create(path)?;
    ck.write(&mut out)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let file = fs::File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    Checkpoint::read(BufReader::new(file)).map_err(|e| schema(format!("{}: {e}", path.display())))
}

pub fn write_metrics(dir: &Path, log: &TrainingLog) -> CliResult<()> {
    let mut out = create(&dir.join(METRICS_FILE))?;
    log.write_csv(&mut out)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

fn periodic(dir: &Path, every: usize, epoch: usize) -> Option<PathBuf> {
    (every > 0 && epoch % every == 0).then(|| dir.join("checkpoints"))
}

/// Runs the plan once per repetition. With several repetitions each seed
/// gets its own subdirectory (and snapshot) and the runs proceed in parallel.
pub fn train_all(plan: &TrainPlan, dir: &Path) -> CliResult<Vec<TrainOutcome>> {
    write_snapshot(dir, &plan.snapshot())?;
    if plan.repetitions == 1 {
        return Ok(vec![train_one(plan, dir)?]);
    }
    let runs: Vec<(TrainPlan, PathBuf)> = (0..plan.repetitions as u64)
        .map(|k| {
            let mut p = plan.clone();
            p.repetitions = 1;
            p.config.seed = plan.config.seed + k;
            let sub = dir.join(format!("seed-{}", p.config.seed));
            (p, sub)
        })
        .collect();
    let results: Vec<CliResult<TrainOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(p, sub)| {
                scope.spawn(move || {
                    fs::create_dir_all(sub)?;
                    write_snapshot(sub, &p.snapshot())?;
                    train_one(p, sub)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// One training run into `dir`. On divergence every output so far is kept
/// and a [`CliError::Diverged`] is returned.
pub fn train_one(plan: &TrainPlan, dir: &Path) -> CliResult<TrainOutcome> {
    let c = &plan.config;
    let mut extra = game_meta(&c.scenario, c.rules);
    extra.push(("opponent".into(), c.opponent.to_string()));
    let mut observe = |epoch: usize, agent: &NeuralAgent| -> bargain::error::Result<()> {
        if let Some(ckdir) = periodic(dir, plan.checkpoint_every, epoch) {
            save_checkpoint(
                &ckdir.join(format!("epoch-{epoch:06}.ckpt")),
                agent,
                c.seed,
                epoch,
                &extra,
            )
            .map_err(|e| bargain::error::Error::Io(e.to_string()))?;
        }
        Ok(())
    };
    let out = train_vs_opponent_observed(c, &mut observe)?;
    write_metrics(dir, &out.log)?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &out.agent, c.seed, out.log.len(), &extra)?;
    if let Some(at) = out.stopped_early {
        log::info!("playout time settled; stopped after {at} epochs");
    }
    if let Some(msg) = &out.diverged {
        fs::write(dir.join(DIVERGED_FILE), format!("{msg}\n"))?;
        return Err(CliError::Diverged(msg.clone()));
    }
    Ok(out)
}

pub fn selfplay_all(plan: &SelfPlayPlan, dir: &Path) -> CliResult<Vec<SelfPlayOutcome>> {
    write_snapshot(dir, &plan.snapshot())?;
    if plan.repetitions == 1 {
        return Ok(vec![selfplay_one(plan, dir)?]);
    }
    let runs: Vec<(SelfPlayPlan, PathBuf)> = (0..plan.repetitions as u64)
        .map(|k| {
            let mut p = plan.clone();
            p.repetitions = 1;
            p.config.seed = plan.config.seed + k;
            let sub = dir.join(format!("seed-{}", p.config.seed));
            (p, sub)
        })
        .collect();
    let results: Vec<CliResult<SelfPlayOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(p, sub)| {
                scope.spawn(move || {
                    fs::create_dir_all(sub)?;
                    write_snapshot(sub, &p.snapshot())?;
                    selfplay_one(p, sub)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("self-play thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn selfplay_one(plan: &SelfPlayPlan, dir: &Path) -> CliResult<SelfPlayOutcome> {
    let c = &plan.config;
    let extra = game_meta(&c.scenario, c.rules);
    let mut observe = |epoch: usize, p1: &NeuralAgent, p2: &NeuralAgent| -> bargain::error::Result<()> {
        if let Some(ckdir) = periodic(dir, plan.checkpoint_every, epoch) {
            for (tag, agent) in [("p1", p1), ("p2", p2)] {
                save_checkpoint(
                    &ckdir.join(format!("{tag}-epoch-{epoch:06}.ckpt")),
                    agent,
                    c.seed,
                    epoch,
                    &extra,
                )
                .map_err(|e| bargain::error::Error::Io(e.to_string()))?;
            }
        }
        Ok(())
    };
    let out = train_self_play_observed(c, &mut observe)?;
    write_metrics(dir, &out.log)?;
    save_checkpoint(&dir.join("p1.ckpt"), &out.p1, c.seed, out.log.len(), &extra)?;
    save_checkpoint(&dir.join("p2.ckpt"), &out.p2, c.seed, out.log.len(), &extra)?;
    if let Some(msg) = &out.diverged {
        fs::write(dir.join(DIVERGED_FILE), format!("{msg}\n"))?;
        return Err(CliError::Diverged(msg.clone()));
    }
    Ok(out)
}

/// Refuses checkpoints whose nets cannot read this scenario's states.
pub fn check_architecture(arch: &AgentArchitecture, scenario: &Scenario) -> CliResult<()> {
    let m = scenario.issue_count();
    let mut inputs = Vec::new();
    if let Some((i, _)) = arch.accept {
        inputs.push(i);
    }
    match &arch.offer {
        OfferArchitecture::Hardline => {}
        OfferArchitecture::Continuous { inputs: i, issues, .. } => {
            inputs.push(*i);
            if *issues != m {
                return Err(schema(format!(
                    "checkpoint offers over {issues} issues but the scenario has {m}"
                )));
            }
        }
        OfferArchitecture::Choice { inputs: i, .. } => {
            inputs.push(*i);
            if m != 1 {
                return Err(schema(format!(
                    "checkpoint holds a single-issue choice policy but the scenario has {m} issues"
                )));
            }
        }
    }
    if let Some(i) = inputs.iter().find(|&&i| i != m + 1) {
        return Err(schema(format!(
            "checkpoint nets take {i} inputs but a {m}-issue scenario gives {}",
            m + 1
        )));
    }
    Ok(())
}

/// Plays `games` games with scripted agents on both sides.
pub fn play_scripted(
    agent: &AgentSpec,
    opponent: &AgentSpec,
    scenario: &Scenario,
    rules: GameRules,
    penalty: f64,
    games: usize,
    seed: u64,
) -> CliResult<(Vec<Transcript>, EvalSummary)> {
    let mut a = agent.build()?;
    let mut b = opponent.build()?;
    let rewards = PenaltyReward { penalty };
    let negotiation = Negotiation::new(scenario).rules(rules).rewards(&rewards);
    let mut rng: GameRng = rng_stream(seed, 3);
    let mut transcripts = Vec::with_capacity(games);
    for _ in 0..games {
        transcripts.push(negotiation.run_with_rng(a.as_mut(), b.as_mut(), &mut rng)?);
    }
    let summary = summarize(scenario, &transcripts, Side::A)?;
    Ok((transcripts, summary))
}

pub struct PlayResult {
    pub scenario: Scenario,
    pub rules: GameRules,
    pub transcripts: Vec<Transcript>,
    pub summary: EvalSummary,
}

pub fn play(plan: &PlayPlan) -> CliResult<PlayResult> {
    let (scenario, rules, (transcripts, summary)) = match &plan.learner {
        Learner::Checkpoint(path) => {
            let ck = load_checkpoint(path)?;
            let mut agent =
                NeuralAgent::from_checkpoint(&ck).map_err(|e| schema(format!("{}: {e}", path.display())))?;
            let scenario = match &plan.scenario {
                Some(s) => s.clone(),
                None => scenario_from_meta(&ck)?.unwrap_or_default(),
            };
            let rules = match plan.rules {
                Some(r) => r,
                None => rules_from_meta(&ck)?.unwrap_or_default(),
            };
            check_architecture(&agent.architecture(), &scenario)?;
            let played = evaluate(
                &mut agent,
                &plan.opponent,
                &scenario,
                rules,
                plan.penalty,
                plan.games,
                plan.seed,
            )?;
            (scenario, rules, played)
        }
        Learner::Scripted(spec) => {
            let scenario = plan.scenario.clone().unwrap_or_default();
            let rules = plan.rules.unwrap_or_default();
            let played = play_scripted(
                spec,
                &plan.opponent,
                &scenario,
                rules,
                plan.penalty,
                plan.games,
                plan.seed,
            )?;
            (scenario, rules, played)
        }
    };
    Ok(PlayResult {
        scenario,
        rules,
        transcripts,
        summary,
    })
}

pub fn write_summary(path: &Path, rows: &[(String, EvalSummary)]) -> CliResult<()> {
    let mut header = vec!["label"];
    header.extend(EvalSummary::CSV_HEADER);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, s)| {
            let mut r = vec![label.clone()];
            r.extend(s.csv_row());
            r
        })
        .collect();
    write_table(path, SUMMARY_SCHEMA, &header, &rows)
}

pub fn write_play(dir: &Path, plan: &PlayPlan, result: &PlayResult) -> CliResult<()> {
    write_snapshot(dir, &plan.snapshot(&result.scenario, result.rules))?;
    let mut out = create(&dir.join(TRANSCRIPTS_FILE))?;
    write_transcripts_csv(
        &mut out,
        result.scenario.issue_count(),
        result.transcripts.iter().enumerate(),
    )?;
    std::io::Write::flush(&mut out)?;
    write_summary(&dir.join(SUMMARY_FILE), &[("all".into(), result.summary)])
}
