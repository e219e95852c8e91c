use std::io::Write;

use crate::error::{contract, Result};
use crate::protocol::{EndState, Side};

/// Schema tag heading every metrics CSV.
pub const METRICS_SCHEMA: &str = "# schema: bargain.metrics.v1";

/// One training epoch (one complete game).
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Side A: the learner, or P1 in self-play.
    pub reward_p1: f64,
    pub reward_p2: f64,
    pub playout_time: u32,
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Per-issue mean offer spread of P1; empty without a continuous head.
    pub mean_sigma: Vec<f64>,
    pub end_state: EndState,
    pub acceptor: Option<Side>,
    /// Shares held by side A under the agreement.
    pub agreement: Option<Vec<f64>>,
}

impl EpochMetrics {
    pub fn reward(&self, side: Side) -> f64 {
        match side {
            Side::A => self.reward_p1,
            Side::B => self.reward_p2,
        }
    }

    pub fn is_conflict(&self) -> bool {
        self.end_state == EndState::ConflictDeal
    }

    /// Reward of the side that accepted; conflict epochs count as the
    /// penalty both sides received.
    pub fn acceptor_reward(&self) -> f64 {
        match self.acceptor {
            Some(side) => self.reward(side),
            None => self.reward_p1.min(self.reward_p2),
        }
    }

    /// Reward of the side whose offer closed the game.
    pub fn proposer_reward(&self) -> f64 {
        match self.acceptor {
            Some(side) => self.reward(side.other()),
            None => self.reward_p1.min(self.reward_p2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub issues: usize,
    pub epochs: Vec<EpochMetrics>,
}

impl TrainingLog {
    pub fn new(issues: usize) -> Self {
        TrainingLog {
            issues,
            epochs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn series(&self, f: impl Fn(&EpochMetrics) -> f64) -> Vec<f64> {
        self.epochs.iter().map(f).collect()
    }

    pub fn playout_times(&self) -> Vec<f64> {
        self.series(|e| f64::from(e.playout_time))
    }

    /// Columns `epoch, reward_p1, reward_p2, playout_time, critic_loss,
    /// actor_loss, mean_sigma_1..m`; sigma cells are empty when the learner
    /// has no continuous head.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{METRICS_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "epoch",
            "reward_p1",
            "reward_p2",
            "playout_time",
            "critic_loss",
            "actor_loss",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=self.issues).map(|i| format!("mean_sigma_{i}")));
        w.write_record(&header)?;
        for e in &self.epochs {
            let mut row = vec![
                e.epoch.to_string(),
                e.reward_p1.to_string(),
                e.reward_p2.to_string(),
                e.playout_time.to_string(),
                e.critic_loss.to_string(),
                e.actor_loss.to_string(),
            ];
            for i in 0..self.issues {
                row.push(e.mean_sigma.get(i).map(f64::to_string).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Means of `parts` consecutive, near-equal chunks (quartiles for 4,
/// quintiles for 5).
pub fn segment_means(values: &[f64], parts: usize) -> Result<Vec<f64>> {
    if parts == 0 || values.len() < parts {
        return Err(contract(format!(
            "cannot split {} values into {parts} parts",
            values.len()
        )));
    }
    let n = values.len();
    Ok((0..parts)
        .map(|k| {
            let chunk = &values[k * n / parts..(k + 1) * n / parts];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect())
}

/// Mean of the first and last `window` values.
pub fn head_tail_means(values: &[f64], window: usize) -> Result<(f64, f64)> {
    if window == 0 || values.len() < window {
        return Err(contract(format!("need at least {window} values, got {}", values.len())));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok((mean(&values[..window]), mean(&values[values.len() - window..])))
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Stop once the playout time has settled: its standard deviation over the
/// last `window` epochs falls below `threshold`. A threshold of zero never
/// fires.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStop {
    pub window: usize,
    pub threshold: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            window: 500,
            threshold: 0.0,
        }
    }
}

impl EarlyStop {
    pub fn should_stop(&self, playout_times: &[f64]) -> bool {
        if self.window == 0 || playout_times.len() < self.window {
            return false;
        }
        std_dev(&playout_times[playout_times.len() - self.window..]) < self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn segments_and_windows() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(segment_means(&v, 4).unwrap(), vec![1.5, 3.5, 5.5, 7.5]);
        assert_eq!(head_tail_means(&v, 2).unwrap(), (1.5, 7.5));
        assert!(segment_means(&v, 9).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut log = TrainingLog::new(3);
        log.epochs.push(EpochMetrics {
            epoch: 0,
            reward_p1: 4.5,
            reward_p2: 1.0,
            playout_time: 7,
            critic_loss: 0.25,
            actor_loss: -0.5,
            mean_sigma: vec![0.1, 0.2, 0.3],
            end_state: EndState::Accepted,
            acceptor: Some(Side::B),
            agreement: Some(vec![0.0, 1.0, 1.0]),
        });
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_SCHEMA);
        assert_eq!(
            lines[1],
            "epoch,reward_p1,reward_p2,playout_time,critic_loss,actor_loss,mean_sigma_1,mean_sigma_2,mean_sigma_3"
        );
        assert_eq!(lines[2], "0,4.5,1,7,0.25,-0.5,0.1,0.2,0.3");
    }

    proptest! {
        #[test]
        fn early_stop_needs_low_spread(times in proptest::collection::vec(1u32..=20, 0..60), threshold in 0.0f64..5.0) {
            let t: Vec<f64> = times.iter().map(|&v| f64::from(v)).collect();
            let rule = EarlyStop { window: 10, threshold };
            if rule.should_stop(&t) {
                prop_assert!(t.len() >= 10);
                prop_assert!(std_dev(&t[t.len() - 10..]) < threshold);
            }
            let never = EarlyStop { window: 10, threshold: 0.0 };
            prop_assert!(!never.should_stop(&t));
        }
    }
}
