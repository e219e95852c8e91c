use bargain::agents::OfferMode;
use bargain::neural::{AdamState, EntropyForm, HeadKind, OfferNet, Parameterized};
use bargain::protocol::{EndState, Scenario, Side};
use bargain::training::metrics::segment_means;
use bargain::training::{
    offer_net_update, rng_stream, time_opponent, train_self_play, train_vs_opponent, train_vs_tft, EpisodeBuffer,
    NeuralAgent, OfferRecord, SelfPlayConfig, SelfPlayMode, TftVariant, TrainConfig,
};
use proptest::prelude::*;

fn shrink(mut c: TrainConfig, epochs: usize, seed: u64) -> TrainConfig {
    c.accept_width = 24;
    c.offer_width = 12;
    c.epochs = epochs;
    c.seed = seed;
    c
}

fn checkpoint_bytes(agent: &NeuralAgent, seed: u64, epoch: u64) -> Vec<u8> {
    let mut out = Vec::new();
    agent.checkpoint(seed, epoch).unwrap().write(&mut out).unwrap();
    out
}

fn linear() -> bargain::agents::AgentSpec {
    time_opponent(1.0, OfferMode::Planar).unwrap()
}

#[test]
fn same_seed_same_logs_and_weights() {
    let configs = [
        TrainConfig::accept_experiment(Scenario::default(), linear()),
        TrainConfig::offer_experiment(Scenario::default(), linear(), HeadKind::Beta),
        TrainConfig::tft_experiment(TftVariant::Relative).unwrap(),
    ];
    for c in configs {
        let c = shrink(c, 40, 3);
        let a = train_vs_opponent(&c).unwrap();
        let b = train_vs_opponent(&c).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(checkpoint_bytes(&a.agent, 3, 40), checkpoint_bytes(&b.agent, 3, 40));
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.log.write_csv(&mut csv_a).unwrap();
        b.log.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }
}

#[test]
fn different_seeds_diverge() {
    let c = shrink(
        TrainConfig::offer_experiment(Scenario::default(), linear(), HeadKind::Normal),
        20,
        1,
    );
    let mut d = c.clone();
    d.seed = 2;
    assert_ne!(train_vs_opponent(&c).unwrap().log, train_vs_opponent(&d).unwrap().log);
}

#[test]
fn self_play_is_deterministic() {
    let mut c = SelfPlayConfig::new(SelfPlayMode::Multivariate).unwrap();
    c.accept_width = 16;
    c.offer_width = 8;
    c.epochs = 30;
    c.seed = 9;
    let a = train_self_play(&c).unwrap();
    let b = train_self_play(&c).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(checkpoint_bytes(&a.p2, 9, 30), checkpoint_bytes(&b.p2, 9, 30));
}

#[test]
fn frozen_learning_rate_changes_nothing() {
    let mut c = shrink(TrainConfig::tft_experiment(TftVariant::Relative).unwrap(), 100, 4);
    c.accept_lr = 0.0;
    c.offer_lr = 0.0;
    let before = NeuralAgent::build(&c.architecture(), 0.0, 0.0, &mut rng_stream(c.seed, 0)).unwrap();
    let after = train_vs_tft(&c).unwrap().agent;
    let flat = |a: &NeuralAgent| {
        let mut v = a.accept.as_ref().unwrap().net.flat();
        if let bargain::training::OfferPolicy::Continuous(l) = &a.offer {
            v.extend(l.net.flat());
        }
        v
    };
    assert_eq!(flat(&before), flat(&after));
}

#[test]
fn mini_game_centipede_rewards_grow_with_the_pie() {
    let mut c = SelfPlayConfig::new(SelfPlayMode::MinigameCentipede).unwrap();
    c.accept_width = 16;
    c.epochs = 60;
    let out = train_self_play(&c).unwrap();
    for e in &out.log.epochs {
        if e.end_state == EndState::Accepted {
            let pie = 1.3f64.powi(e.playout_time as i32 - 1);
            assert!((e.reward_p1 + e.reward_p2 - pie).abs() < 1e-9 * pie);
        }
    }
}

/// With rewards far above every value estimate, each update sees a positive
/// TD. The loss weights `log p + entropy` by TD, and both entropy forms grow
/// with the scale, so the spread widens rather than narrows.
#[test]
fn positive_td_widens_offer_spread() {
    for form in [EntropyForm::Verbatim, EntropyForm::Standard] {
        let mut rng = rng_stream(21, 0);
        let mut net = OfferNet::new(4, 3, HeadKind::Normal, 16, 1.0, &mut rng).unwrap();
        let mut adam = AdamState::for_model(&net, 1e-3);
        let states: Vec<Vec<f64>> = (1..=5).map(|t| vec![0.3, 0.6, 0.9, f64::from(t) / 20.0]).collect();
        let mut spreads = Vec::new();
        for _ in 0..200 {
            let mut buffer = EpisodeBuffer::new();
            for s in &states {
                let (marginals, value) = net.evaluate(s).unwrap();
                let action: Vec<f64> = marginals.iter().map(|m| m.first).collect();
                buffer
                    .push(OfferRecord {
                        state: s.clone(),
                        action,
                        log_prob: 0.0,
                        value,
                    })
                    .unwrap();
            }
            buffer.terminate(50.0).unwrap();
            let out = offer_net_update(&mut net, &mut adam, &buffer, form).unwrap();
            spreads.push(out.mean_spread.iter().sum::<f64>() / 3.0);
        }
        let q = segment_means(&spreads, 4).unwrap();
        assert!(q.windows(2).all(|w| w[1] > w[0]), "{form:?}: {q:?}");
    }
}

#[test]
fn checkpoint_restores_the_policy() {
    let c = shrink(TrainConfig::tft_experiment(TftVariant::Bayesian).unwrap(), 25, 8);
    let out = train_vs_tft(&c).unwrap();
    let mut bytes = Vec::new();
    out.agent.checkpoint(8, 25).unwrap().write(&mut bytes).unwrap();
    let ck = bargain::neural::Checkpoint::read(&bytes[..]).unwrap();
    let restored = NeuralAgent::from_checkpoint(&ck).unwrap();
    assert_eq!(restored.architecture(), out.agent.architecture());
    let state = [0.2, 0.4, 0.6, 0.5];
    assert_eq!(
        restored.accept_probability(&state[..3], 0.5).unwrap(),
        out.agent.accept_probability(&state[..3], 0.5).unwrap()
    );
    assert_eq!(
        restored.offer_marginals(&state).unwrap(),
        out.agent.offer_marginals(&state).unwrap()
    );
    assert_eq!(checkpoint_bytes(&restored, 8, 25), bytes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn terminal_rewards_stay_in_bounds(seed in 0u64..1000, penalty in 0.0f64..3.0, discount in 0.5f64..=1.0) {
        let mut scenario = Scenario::default();
        scenario.set_discount(discount).unwrap();
        let mut c = shrink(TrainConfig::offer_experiment(scenario, linear(), HeadKind::Cauchy), 15, seed);
        c.penalty = penalty;
        let out = train_vs_opponent(&c).unwrap();
        for e in &out.log.epochs {
            for side in [Side::A, Side::B] {
                let r = e.reward(side);
                prop_assert!(r >= -penalty && r <= 6.0);
                if e.is_conflict() {
                    prop_assert_eq!(r, -penalty);
                }
            }
        }
    }
}
