//! Time-dependent agents: the acceptance threshold decays from `p_max` to
//! `p_min` along `(t/T)^(1/c)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{contract, ensure_len, Result};
use crate::protocol::{share_value, Decision, GameRng, Negotiator, Offer, Turn};

/// Planar sampling gives up after this many rejected draws.
pub const PLANAR_RETRIES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfferMode {
    /// Uniform over the iso-utility plane inside the cube.
    Planar,
    /// Concede the least valued issues first, then add Gaussian noise.
    PreferenceConcession,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeAgentConfig {
    pub concession: f64,
    pub k: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub offer_mode: OfferMode,
    pub noise_sigma: f64,
}

impl TimeAgentConfig {
    pub fn new(concession: f64, offer_mode: OfferMode) -> Result<Self> {
        let config = TimeAgentConfig {
            concession,
            offer_mode,
            ..TimeAgentConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.concession > 0.0 && self.concession.is_finite()) {
            return Err(contract(format!("concession factor {} must be > 0", self.concession)));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(contract(format!("k = {} outside [0, 1]", self.k)));
        }
        if !(self.p_min <= self.p_max) {
            return Err(contract("p_min must not exceed p_max"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(contract("noise sigma must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for TimeAgentConfig {
    /// A linear agent that builds offers by preference concession.
    fn default() -> Self {
        TimeAgentConfig {
            concession: 1.0,
            k: 0.0,
            p_min: 0.0,
            p_max: 1.0,
            offer_mode: OfferMode::PreferenceConcession,
            noise_sigma: 0.05,
        }
    }
}

/// Fraction of the concession range already given up at time `t`.
pub fn concession_fraction(config: &TimeAgentConfig, t: f64, deadline: f64) -> Result<f64> {
    if !(0.0..=deadline).contains(&t) {
        return Err(contract(format!("time {t} outside [0, {deadline}]")));
    }
    Ok(config.k + (1.0 - config.k) * (t / deadline).powf(1.0 / config.concession))
}

/// Acceptance threshold `u(t)`, a normalized utility in `[p_min, p_max]`.
pub fn decision_utility(config: &TimeAgentConfig, t: f64, deadline: f64) -> Result<f64> {
    let f = concession_fraction(config, t, deadline)?;
    Ok(config.p_min + (config.p_max - config.p_min) * (1.0 - f))
}

/// Accept iff the normalized value of what we would receive reaches `u(t)`.
pub fn time_agent_accept(
    config: &TimeAgentConfig,
    received: &[f64],
    t: f64,
    deadline: f64,
    own_weights: &[f64],
) -> Result<Decision> {
    ensure_len(own_weights.len(), received.len())?;
    let total: f64 = own_weights.iter().sum();
    let value = share_value(own_weights, received) / total;
    Ok(if value >= decision_utility(config, t, deadline)? {
        Decision::Accept
    } else {
        Decision::Reject
    })
}

/// Samples shares `x` with `w·x / Σw = u_d`, uniformly on that plane's
/// intersection with the unit cube.
///
/// All coordinates except the last positively weighted one are drawn
/// uniformly and the remaining one is solved for; a draw that leaves the
/// cube is rejected. Since the solved coordinate is an affine function of the
/// others, uniform draws on the projection are uniform on the plane.
pub fn planar_offer(u_d: f64, own_weights: &[f64], rng: &mut GameRng) -> Result<Vec<f64>> {
    let m = own_weights.len();
    if !(0.0..=1.0).contains(&u_d) {
        return Err(contract(format!("decision utility {u_d} outside [0, 1]")));
    }
    if u_d >= 1.0 {
        return Ok(vec![1.0; m]);
    }
    if u_d <= 0.0 {
        return Ok(vec![0.0; m]);
    }
    let Some(pivot) = own_weights.iter().rposition(|w| *w > 0.0) else {
        return Err(contract("weights need a strictly positive entry"));
    };
    let target = u_d * own_weights.iter().sum::<f64>();
    let mut x = vec![0.0; m];
    for _ in 0..PLANAR_RETRIES {
        let mut rest = 0.0;
        for i in (0..m).filter(|&i| i != pivot) {
            x[i] = rng.random::<f64>();
            rest += own_weights[i] * x[i];
        }
        let solved = (target - rest) / own_weights[pivot];
        if (0.0..=1.0).contains(&solved) {
            x[pivot] = solved;
            return Ok(x);
        }
    }
    log::debug!("planar sampling exhausted at u_d = {u_d}; falling back to concession");
    preference_concession_offer(u_d, own_weights, 0.0, rng)
}

/// Starts from the full pie and gives away the least valued issues first
/// until `w·x / Σw = u_d`, then perturbs every share by `N(0, sigma)` and
/// clamps into the cube.
pub fn preference_concession_offer(u_d: f64, own_weights: &[f64], sigma: f64, rng: &mut GameRng) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&u_d) {
        return Err(contract(format!("decision utility {u_d} outside [0, 1]")));
    }
    let mut x = concession_shares(u_d, own_weights);
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| contract(e.to_string()))?;
        for v in x.iter_mut() {
            *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(x)
}

fn concession_shares(u_d: f64, weights: &[f64]) -> Vec<f64> {
    let mut x = vec![1.0; weights.len()];
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| weights[i].total_cmp(&weights[j]));
    let total: f64 = weights.iter().sum();
    let mut deficit = total * (1.0 - u_d);
    for i in order {
        let w = weights[i];
        if w <= 0.0 {
            // worthless to us, so it costs nothing to give away
            x[i] = 0.0;
            continue;
        }
        // rounding residue from `total * (1 - u_d)`
        if deficit <= 1e-12 * total {
            break;
        }
        if deficit >= w - 1e-12 * total {
            x[i] = 0.0;
        } else {
            x[i] = 1.0 - deficit / w;
        }
        deficit -= w;
    }
    x
}

/// Boulware (`c < 1`), linear (`c = 1`) or Conceder (`c > 1`) negotiator.
#[derive(Clone, Debug)]
pub struct TimeAgent {
    pub config: TimeAgentConfig,
}

impl TimeAgent {
    pub fn new(config: TimeAgentConfig) -> Result<Self> {
        config.validate()?;
        Ok(TimeAgent { config })
    }

    fn threshold(&self, turn: &Turn<'_>) -> f64 {
        let deadline = f64::from(turn.deadline());
        decision_utility(&self.config, f64::from(turn.round).min(deadline), deadline)
            .expect("validated config and in-range round")
    }
}

impl Negotiator for TimeAgent {
    fn respond(&mut self, turn: &Turn<'_>, offer: &Offer, _rng: &mut GameRng) -> Decision {
        let weights = turn.own_weights();
        let value = share_value(weights, &offer.shares_for(turn.side)) / weights.iter().sum::<f64>();
        if value >= self.threshold(turn) {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    fn propose(&mut self, turn: &Turn<'_>, rng: &mut GameRng) -> Vec<f64> {
        let u_d = self.threshold(turn).clamp(0.0, 1.0);
        let weights = turn.own_weights();
        match self.config.offer_mode {
            OfferMode::Planar => planar_offer(u_d, weights, rng),
            OfferMode::PreferenceConcession => preference_concession_offer(u_d, weights, self.config.noise_sigma, rng),
        }
        .expect("threshold clamped into [0, 1]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn linear() -> TimeAgentConfig {
        TimeAgentConfig {
            noise_sigma: 0.0,
            ..TimeAgentConfig::default()
        }
    }

    fn rng() -> GameRng {
        GameRng::seed_from_u64(11)
    }

    #[test]
    fn threshold_endpoints() {
        let c = TimeAgentConfig::new(0.3, OfferMode::Planar).unwrap();
        assert_eq!(decision_utility(&c, 0.0, 20.0).unwrap(), 1.0);
        assert_eq!(decision_utility(&c, 20.0, 20.0).unwrap(), 0.0);
        assert_eq!(decision_utility(&linear(), 10.0, 20.0).unwrap(), 0.5);
        assert!(decision_utility(&c, 21.0, 20.0).is_err());
    }

    #[test]
    fn linear_agent_midpoint_acceptance() {
        // one issue, so the received share is the normalized utility
        let c = linear();
        let reject = time_agent_accept(&c, &[0.49], 10.0, 20.0, &[1.0]).unwrap();
        let accept = time_agent_accept(&c, &[0.51], 10.0, 20.0, &[1.0]).unwrap();
        assert_eq!(reject, Decision::Reject);
        assert_eq!(accept, Decision::Accept);
        let full = time_agent_accept(&c, &[1.0; 3], 0.0, 20.0, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(full, Decision::Accept);
        for t in 0..20 {
            let none = time_agent_accept(&c, &[0.0; 3], f64::from(t), 20.0, &[1.0, 2.0, 3.0]);
            assert_eq!(none.unwrap(), Decision::Reject);
        }
    }

    #[test]
    fn preference_concession_examples() {
        let w = [3.0, 2.0, 1.0];
        let mut r = rng();
        assert_eq!(
            preference_concession_offer(5.0 / 6.0, &w, 0.0, &mut r).unwrap(),
            vec![1.0, 1.0, 0.0]
        );
        let x = preference_concession_offer(4.0 / 6.0, &w, 0.0, &mut r).unwrap();
        assert!(
            (x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12 && x[2] == 0.0,
            "{x:?}"
        );
        assert_eq!(preference_concession_offer(1.0, &w, 0.0, &mut r).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn planar_extremes() {
        let w = [1.0, 2.0, 3.0];
        let mut r = rng();
        assert_eq!(planar_offer(1.0, &w, &mut r).unwrap(), vec![1.0; 3]);
        assert_eq!(planar_offer(0.0, &w, &mut r).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn planar_hits_the_plane() {
        let w = [3.0, 2.0, 1.0];
        let mut r = rng();
        for _ in 0..1000 {
            let x = planar_offer(0.5, &w, &mut r).unwrap();
            assert!((share_value(&w, &x) - 3.0).abs() < 1e-9);
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    proptest! {
        #[test]
        fn threshold_is_nonincreasing(c in 0.05f64..20.0, t in 0.0f64..20.0, dt in 0.0f64..1.0) {
            let cfg = TimeAgentConfig::new(c, OfferMode::Planar).unwrap();
            let later = (t + dt).min(20.0);
            prop_assert!(decision_utility(&cfg, later, 20.0).unwrap() <= decision_utility(&cfg, t, 20.0).unwrap());
        }

        #[test]
        fn boulware_above_linear_above_conceder(boulware in 0.05f64..0.999, conceder in 1.001f64..20.0, s in 0.001f64..0.999) {
            let u = |c: f64| decision_utility(&TimeAgentConfig::new(c, OfferMode::Planar).unwrap(), s * 20.0, 20.0).unwrap();
            prop_assert!(u(boulware) >= u(1.0));
            prop_assert!(u(1.0) >= u(conceder));
        }

        #[test]
        fn concession_meets_target(u in 0.0f64..=1.0, w in prop::collection::vec(0.0f64..5.0, 1..6)) {
            prop_assume!(w.iter().any(|v| *v > 0.1));
            let x = concession_shares(u, &w);
            let total: f64 = w.iter().sum();
            prop_assert!((share_value(&w, &x) / total - u).abs() < 1e-9);
        }

        #[test]
        fn planar_on_plane(u in 0.01f64..0.99, seed in any::<u64>()) {
            let w = [1.0, 2.0, 3.0];
            let mut r = GameRng::seed_from_u64(seed);
            let x = planar_offer(u, &w, &mut r).unwrap();
            prop_assert!((share_value(&w, &x) - 6.0 * u).abs() < 1e-9);
        }
    }
}
