use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bargain(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bargain"))
        .args(args)
        .current_dir(cwd)
        .env("BARGAIN_OUTPUT_ROOT", cwd.join("runs"))
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// Rows of a schema-tagged CSV, header included.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: bargain."));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0]
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn train_small(dir: &Path, out: &str) {
    ok(&bargain(
        dir,
        &[
            "train",
            "--experiment",
            "accept_vs_linear",
            "--epochs",
            "60",
            "--seed",
            "5",
            "--out",
            out,
        ],
    ));
}

#[test]
fn custom_training_without_opponent_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = bargain(tmp.path(), &["train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("agents.opponent"), "{}", stderr(&o));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn unknown_config_key_points_at_its_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("x.toml"), "seed = 1\n[train]\nepochz = 3\n").unwrap();
    let o = bargain(tmp.path(), &["train", "--config", "x.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    train_small(tmp.path(), "b");
    for f in ["metrics.csv", "checkpoint.ckpt", "config.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn snapshot_reruns_the_same_experiment() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    ok(&bargain(
        tmp.path(),
        &["train", "--config", "a/config.toml", "--out", "again"],
    ));
    for f in ["metrics.csv", "checkpoint.ckpt", "config.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn occupied_output_gets_a_fresh_sibling() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    let o = bargain(
        tmp.path(),
        &[
            "train",
            "--experiment",
            "accept_vs_linear",
            "--epochs",
            "5",
            "--out",
            "a",
        ],
    );
    ok(&o);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "a.1");
    assert!(tmp.path().join("a.1/metrics.csv").is_file());

    fs::create_dir(tmp.path().join("notes")).unwrap();
    fs::write(tmp.path().join("notes/keep.txt"), "mine").unwrap();
    let o = bargain(
        tmp.path(),
        &[
            "train",
            "--experiment",
            "accept_vs_linear",
            "--epochs",
            "5",
            "--out",
            "notes",
            "--overwrite",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(tmp.path().join("notes/keep.txt").is_file());
}

#[test]
fn default_output_lands_under_the_root() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(
        tmp.path(),
        &["train", "--experiment", "offer_beta", "--epochs", "3", "--seed", "9"],
    ));
    assert!(tmp.path().join("runs/train/offer_beta-seed9/metrics.csv").is_file());
}

#[test]
fn periodic_and_repeated_runs() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(
        tmp.path(),
        &[
            "train",
            "--experiment",
            "accept_vs_linear",
            "--epochs",
            "20",
            "--checkpoint-every",
            "10",
            "--repetitions",
            "2",
            "--seed",
            "3",
            "--out",
            "rep",
        ],
    ));
    for seed in [3, 4] {
        let d = tmp.path().join(format!("rep/seed-{seed}"));
        assert!(d.join("config.toml").is_file());
        assert!(d.join("checkpoint.ckpt").is_file());
        assert!(d.join("checkpoints/epoch-000010.ckpt").is_file());
        assert!(d.join("checkpoints/epoch-000020.ckpt").is_file());
    }
    assert_ne!(
        fs::read(tmp.path().join("rep/seed-3/metrics.csv")).unwrap(),
        fs::read(tmp.path().join("rep/seed-4/metrics.csv")).unwrap()
    );
}

#[test]
fn zero_games_summarize_to_nan() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    ok(&bargain(
        tmp.path(),
        &[
            "play",
            "--checkpoint",
            "a/checkpoint.ckpt",
            "--opponent",
            "time(c=1,mode=planar)",
            "--games",
            "0",
            "--out",
            "p",
        ],
    ));
    let r = rows(&tmp.path().join("p/summary.csv"));
    assert_eq!(r[1][column(&r, "games")], "0");
    for name in ["d_nash", "bid_distribution", "mean_reward", "mean_time"] {
        assert_eq!(r[1][column(&r, name)], "NaN", "{name}");
    }
}

#[test]
fn play_takes_scenario_and_rules_from_the_checkpoint() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    ok(&bargain(
        tmp.path(),
        &[
            "play",
            "--checkpoint",
            "a/checkpoint.ckpt",
            "--opponent",
            "time(c=1,mode=planar)",
            "--games",
            "20",
            "--out",
            "p",
        ],
    ));
    let snap = fs::read_to_string(tmp.path().join("p/config.toml")).unwrap();
    assert!(snap.contains("first_mover = \"b\""), "{snap}");
    assert!(snap.contains("acceptors = [\"a\"]"), "{snap}");
    let t = fs::read_to_string(tmp.path().join("p/transcripts.csv")).unwrap();
    // Only the learner may accept, and B opens every game.
    assert!(t.lines().skip(2).all(|l| !l.contains(",B,accept,")));
    assert!(t.lines().nth(2).unwrap().starts_with("0,1,B,offer"));
}

#[test]
fn divergence_exits_3_and_keeps_partial_output() {
    // A hardliner never accepts, so every game ends in the conflict deal and
    // the squared TD error overflows on the first update.
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("div.toml"),
        "command = \"train\"\nexperiment = \"custom\"\n\n[agents]\nopponent = \"hardliner\"\n\n\
         [train]\nnets = \"offer\"\nfirst_mover = \"a\"\nacceptors = [\"b\"]\nepochs = 20\npenalty = 1e300\n",
    )
    .unwrap();
    let o = bargain(tmp.path(), &["train", "--config", "div.toml", "--out", "run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let run = tmp.path().join("run");
    let note = fs::read_to_string(run.join("diverged.txt")).unwrap();
    assert!(note.starts_with("epoch 0: critic loss inf"), "{note}");
    assert!(run.join("metrics.csv").is_file());
    assert!(run.join("checkpoint.ckpt").is_file());
    assert!(run.join("config.toml").is_file());
}

#[test]
fn mismatched_checkpoint_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    train_small(tmp.path(), "a");
    fs::write(
        tmp.path().join("two.toml"),
        "[scenario]\nweights_a = [1.0, 2.0]\nweights_b = [2.0, 1.0]\n[agents]\nopponent = \"hardliner\"\n[play]\ncheckpoint = \"a/checkpoint.ckpt\"\n",
    )
    .unwrap();
    let o = bargain(tmp.path(), &["play", "--config", "two.toml", "--out", "p"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!tmp.path().join("p").exists());

    fs::write(tmp.path().join("bad.ckpt"), "not a checkpoint\n").unwrap();
    let o = bargain(
        tmp.path(),
        &["play", "--checkpoint", "bad.ckpt", "--opponent", "hardliner"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn selfplay_writes_both_players() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(
        tmp.path(),
        &[
            "selfplay",
            "--mode",
            "minigame_centipede",
            "--epochs",
            "30",
            "--out",
            "s",
        ],
    ));
    for f in ["p1.ckpt", "p2.ckpt", "metrics.csv", "config.toml"] {
        assert!(tmp.path().join("s").join(f).is_file(), "{f}");
    }
    let o = bargain(tmp.path(), &["selfplay", "--mode", "chess"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_default_scenario() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(tmp.path(), &["analyze", "--out", "an"]));
    let d = tmp.path().join("an");

    let f = rows(&d.join("frontier.csv"));
    assert_eq!(f.len(), 4, "three segments");

    let n = rows(&d.join("nash.csv"));
    let ua: f64 = n[1][column(&n, "u_a")].parse().unwrap();
    let ub: f64 = n[1][column(&n, "u_b")].parse().unwrap();
    assert!((ua - 4.0).abs() < 1e-9 && (ub - 4.0).abs() < 1e-9);

    let s = rows(&d.join("stopping.csv"));
    let hit = s
        .iter()
        .skip(1)
        .find(|r| r[0] == "1" && r[1] == "0.85")
        .expect("c = 1, d = 0.85 row");
    let t: f64 = hit[column(&s, "t_opt")].parse().unwrap();
    assert!((t - 6.153).abs() < 1e-3, "{t}");

    let e = rows(&d.join("spne.csv"));
    let centipede = e.iter().find(|r| r[0] == "centipede").unwrap();
    assert_eq!(centipede[column(&e, "payoff_p1")], "0.9");
    assert_eq!(centipede[column(&e, "payoff_p2")], "0.1");
    assert!(centipede[column(&e, "profile")].chars().all(|c| c == 'T'));
}

#[test]
fn analyze_custom_scenario() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(
        tmp.path(),
        &["analyze", "--weights-a", "1,1", "--weights-b", "1,1", "--out", "an"],
    ));
    let n = rows(&tmp.path().join("an/nash.csv"));
    let ua: f64 = n[1][column(&n, "u_a")].parse().unwrap();
    assert!((ua - 1.0).abs() < 1e-9, "{ua}");
    let o = bargain(tmp.path(), &["analyze", "--weights-a", "1,2", "--weights-b", "1"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn reproduce_menu_and_unknown_id() {
    let tmp = TempDir::new().unwrap();
    let o = bargain(tmp.path(), &["reproduce", "--list"]);
    ok(&o);
    let menu = String::from_utf8_lossy(&o.stdout);
    assert!(menu.contains("table-4.1") && menu.contains("figure-4.15"));

    let o = bargain(tmp.path(), &["reproduce", "table-9.9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("table-4.2"), "{}", stderr(&o));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn random_sampling_baseline() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(
        tmp.path(),
        &["reproduce", "table-4.2", "--epochs", "5", "--games", "5", "--out", "r"],
    ));
    let r = rows(&tmp.path().join("r/table-4.2.csv"));
    let random = r.iter().find(|row| row[0] == "random").unwrap();
    let bd: f64 = random[column(&r, "bid_distribution")].parse().unwrap();
    let dn: f64 = random[column(&r, "d_nash")].parse().unwrap();
    assert!((bd - 1.24).abs() <= 0.05, "{bd}");
    assert!((dn - 1.92).abs() <= 0.1, "{dn}");
    for f in [
        "README.txt",
        "config.toml",
        "summary.csv",
        "runs/planar/metrics.csv",
        "runs/preference/metrics.csv",
    ] {
        assert!(tmp.path().join("r").join(f).is_file(), "{f}");
    }
}

#[test]
fn tree_bundles_are_exact() {
    let tmp = TempDir::new().unwrap();
    ok(&bargain(tmp.path(), &["reproduce", "figure-4.9", "--out", "c"]));
    let r = rows(&tmp.path().join("c/figure-4.9.csv"));
    let spne = r.iter().find(|row| row[0] == "spne").unwrap();
    assert_eq!((spne[2].as_str(), spne[3].as_str()), ("0.9", "0.1"));
    assert!(r
        .iter()
        .skip(1)
        .filter(|row| row[0].parse::<usize>().is_ok())
        .all(|row| row[4] == "terminate"));
}
