//! Policy distributions: per-issue Normal, Cauchy and Beta marginals plus a
//! categorical head. Log-densities and their parameter gradients are
//! evaluated in log space.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Cauchy, Distribution, Normal};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{contract, Error, Result};
use crate::protocol::GameRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Beta draws are kept this far inside `(0, 1)` so their log-density stays finite.
pub const BETA_EDGE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Normal,
    Cauchy,
    Beta,
}

impl HeadKind {
    pub fn tag(self) -> &'static str {
        match self {
            HeadKind::Normal => "normal",
            HeadKind::Cauchy => "cauchy",
            HeadKind::Beta => "beta",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(HeadKind::Normal),
            "cauchy" => Ok(HeadKind::Cauchy),
            "beta" => Ok(HeadKind::Beta),
            other => Err(contract(format!("unknown head kind `{other}`"))),
        }
    }
}

/// Which exploration bonus is added to each issue's log-probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EntropyForm {
    /// `0.5 + ln(2π)·ln σ`
    #[default]
    Verbatim,
    /// Gaussian differential entropy `0.5·ln(2πeσ²)`.
    Standard,
}

/// `0.5 + ln(2π)·ln σ`.
pub fn entropy_term(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(contract(format!("entropy needs sigma > 0, got {sigma}")));
    }
    Ok(0.5 + LN_2PI * sigma.ln())
}

pub fn standard_entropy(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(contract(format!("entropy needs sigma > 0, got {sigma}")));
    }
    Ok(0.5 * (LN_2PI + 1.0) + sigma.ln())
}

impl EntropyForm {
    /// Value and `∂/∂ ln σ`.
    fn in_log_sigma(self, ln_sigma: f64) -> (f64, f64) {
        match self {
            EntropyForm::Verbatim => (0.5 + LN_2PI * ln_sigma, LN_2PI),
            EntropyForm::Standard => (0.5 * (LN_2PI + 1.0) + ln_sigma, 1.0),
        }
    }
}

/// Mean and variance of `Beta(α, β)`.
pub fn beta_moments(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(contract("beta shapes must be positive"));
    }
    let s = alpha + beta;
    Ok((alpha / s, alpha * beta / (s * s * (s + 1.0))))
}

/// Numerically stable softmax.
pub fn softmax_policy(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|h| (h - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|h| (h - max).exp()).sum::<f64>().ln();
    logits.iter().map(|h| h - lse).collect()
}

/// One issue's distribution, parametrized by `(first, second)`:
/// location and scale, or the two Beta shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marginal {
    pub kind: HeadKind,
    pub first: f64,
    pub second: f64,
}

/// A log-density with its partial derivatives in the two parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogProbGrad {
    pub value: f64,
    pub d_first: f64,
    pub d_second: f64,
}

impl Marginal {
    pub fn new(kind: HeadKind, first: f64, second: f64) -> Result<Self> {
        let ok = match kind {
            HeadKind::Normal | HeadKind::Cauchy => first.is_finite() && second > 0.0 && second.is_finite(),
            HeadKind::Beta => first > 0.0 && second > 0.0 && first.is_finite() && second.is_finite(),
        };
        if !ok {
            return Err(contract(format!(
                "invalid {} parameters ({first}, {second})",
                kind.tag()
            )));
        }
        Ok(Marginal { kind, first, second })
    }

    pub fn sample(&self, rng: &mut GameRng) -> f64 {
        match self.kind {
            HeadKind::Normal => Normal::new(self.first, self.second).expect("validated").sample(rng),
            HeadKind::Cauchy => Cauchy::new(self.first, self.second).expect("validated").sample(rng),
            HeadKind::Beta => Beta::new(self.first, self.second)
                .expect("validated")
                .sample(rng)
                .clamp(BETA_EDGE, 1.0 - BETA_EDGE),
        }
    }

    pub fn log_prob(&self, x: f64) -> Result<f64> {
        Ok(self.log_prob_grad(x)?.value)
    }

    pub fn log_prob_grad(&self, x: f64) -> Result<LogProbGrad> {
        let (a, b) = (self.first, self.second);
        Ok(match self.kind {
            HeadKind::Normal => {
                let z = (x - a) / b;
                LogProbGrad {
                    value: -0.5 * z * z - b.ln() - 0.5 * LN_2PI,
                    d_first: z / b,
                    d_second: (z * z - 1.0) / b,
                }
            }
            HeadKind::Cauchy => {
                let z = (x - a) / b;
                let q = 1.0 + z * z;
                LogProbGrad {
                    value: -(PI * b).ln() - q.ln(),
                    d_first: 2.0 * z / (b * q),
                    d_second: -1.0 / b + 2.0 * z * z / (b * q),
                }
            }
            HeadKind::Beta => {
                if !(x > 0.0 && x < 1.0) {
                    return Err(Error::OutOfSupport {
                        distribution: "beta",
                        value: x,
                    });
                }
                let s = a + b;
                let psi_s = digamma(s);
                LogProbGrad {
                    value: (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_gamma(a) - ln_gamma(b) + ln_gamma(s),
                    d_first: x.ln() - digamma(a) + psi_s,
                    d_second: (1.0 - x).ln() - digamma(b) + psi_s,
                }
            }
        })
    }

    /// Location μ or x₀, or the Beta mean α/(α+β).
    pub fn center(&self) -> f64 {
        match self.kind {
            HeadKind::Normal | HeadKind::Cauchy => self.first,
            HeadKind::Beta => self.first / (self.first + self.second),
        }
    }

    /// The spread fed to the entropy term: σ, γ, or the Beta standard deviation.
    pub fn spread(&self) -> f64 {
        match self.kind {
            HeadKind::Normal | HeadKind::Cauchy => self.second,
            HeadKind::Beta => beta_moments(self.first, self.second).expect("validated").1.sqrt(),
        }
    }

    /// Entropy bonus and its partial derivatives in the two parameters.
    pub fn entropy_grad(&self, form: EntropyForm) -> LogProbGrad {
        match self.kind {
            HeadKind::Normal | HeadKind::Cauchy => {
                let (value, d_ln) = form.in_log_sigma(self.second.ln());
                LogProbGrad {
                    value,
                    d_first: 0.0,
                    d_second: d_ln / self.second,
                }
            }
            HeadKind::Beta => {
                let (a, b) = (self.first, self.second);
                let s = a + b;
                let ln_sigma = 0.5 * (a.ln() + b.ln() - 2.0 * s.ln() - (s + 1.0).ln());
                let (value, d_ln) = form.in_log_sigma(ln_sigma);
                let shared = -2.0 / s - 1.0 / (s + 1.0);
                LogProbGrad {
                    value,
                    d_first: d_ln * 0.5 * (1.0 / a + shared),
                    d_second: d_ln * 0.5 * (1.0 / b + shared),
                }
            }
        }
    }
}

/// Parameters of a full policy output.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionParams {
    Normal { mu: Vec<f64>, sigma: Vec<f64> },
    Cauchy { mu: Vec<f64>, gamma: Vec<f64> },
    Beta { alpha: Vec<f64>, beta: Vec<f64> },
    Categorical { logits: Vec<f64> },
}

impl DistributionParams {
    pub fn continuous(kind: HeadKind, first: Vec<f64>, second: Vec<f64>) -> Self {
        match kind {
            HeadKind::Normal => DistributionParams::Normal {
                mu: first,
                sigma: second,
            },
            HeadKind::Cauchy => DistributionParams::Cauchy {
                mu: first,
                gamma: second,
            },
            HeadKind::Beta => DistributionParams::Beta {
                alpha: first,
                beta: second,
            },
        }
    }

    /// Per-issue marginals of a continuous head.
    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        let (kind, first, second) = match self {
            DistributionParams::Normal { mu, sigma } => (HeadKind::Normal, mu, sigma),
            DistributionParams::Cauchy { mu, gamma } => (HeadKind::Cauchy, mu, gamma),
            DistributionParams::Beta { alpha, beta } => (HeadKind::Beta, alpha, beta),
            DistributionParams::Categorical { .. } => return Err(contract("categorical heads have no marginals")),
        };
        crate::error::ensure_len(first.len(), second.len())?;
        first
            .iter()
            .zip(second)
            .map(|(&a, &b)| Marginal::new(kind, a, b))
            .collect()
    }

    /// Independent draw per issue; a categorical head yields the chosen index.
    pub fn sample(&self, rng: &mut GameRng) -> Result<Vec<f64>> {
        if let DistributionParams::Categorical { logits } = self {
            let p = softmax_policy(logits);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return Ok(vec![i as f64]);
                }
            }
            return Ok(vec![(p.len() - 1) as f64]);
        }
        Ok(self.marginals()?.iter().map(|m| m.sample(rng)).collect())
    }

    /// Joint log-probability: the sum over issues, or the log-softmax of the
    /// chosen index.
    pub fn log_prob(&self, action: &[f64]) -> Result<f64> {
        if let DistributionParams::Categorical { logits } = self {
            let [a] = action else {
                return Err(contract("categorical action is a single index"));
            };
            let idx = *a as usize;
            if *a < 0.0 || a.fract() != 0.0 || idx >= logits.len() {
                return Err(contract(format!("action {a} is not a valid index")));
            }
            return Ok(log_softmax(logits)[idx]);
        }
        let marginals = self.marginals()?;
        crate::error::ensure_len(marginals.len(), action.len())?;
        marginals.iter().zip(action).map(|(m, &x)| m.log_prob(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> GameRng {
        GameRng::seed_from_u64(99)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_policy(&[1.3, 1.3]), vec![0.5, 0.5]);
        let p = softmax_policy(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let shifted = softmax_policy(&[100.0, 100.0 + 3f64.ln()]);
        assert!((p[1] - shifted[1]).abs() < 1e-12);
        let big = softmax_policy(&[1000.0, -1000.0, 0.0]);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_term(1.0).unwrap(), 0.5);
        assert!((entropy_term(std::f64::consts::E).unwrap() - (0.5 + (2.0 * PI).ln())).abs() < 1e-12);
        assert!(entropy_term(0.0).is_err());
        assert!(entropy_term(2.0).unwrap() < entropy_term(3.0).unwrap());
    }

    #[test]
    fn cauchy_peak() {
        let m = Marginal::new(HeadKind::Cauchy, 0.3, 1.0 / PI).unwrap();
        assert!(m.log_prob(0.3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn beta_support() {
        let m = Marginal::new(HeadKind::Beta, 2.0, 3.0).unwrap();
        assert!(matches!(m.log_prob(1.0), Err(Error::OutOfSupport { .. })));
        assert!(matches!(m.log_prob(-0.1), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn beta_moment_examples() {
        assert_eq!(beta_moments(2.0, 2.0).unwrap(), (0.5, 0.05));
        assert_eq!(beta_moments(7.5, 7.5).unwrap().0, 0.5);
    }

    #[test]
    fn sampling_moments() {
        let mut r = rng();
        let n = 100_000;
        let normal = Marginal::new(HeadKind::Normal, 0.4, 0.2).unwrap();
        let mean = (0..n).map(|_| normal.sample(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.4).abs() < 3.0 * 0.2 / (n as f64).sqrt());

        let beta = Marginal::new(HeadKind::Beta, 3.0, 3.0).unwrap();
        let mean = (0..n).map(|_| beta.sample(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);

        let cauchy = Marginal::new(HeadKind::Cauchy, 0.7, 0.1).unwrap();
        let mut draws: Vec<f64> = (0..n).map(|_| cauchy.sample(&mut r)).collect();
        draws.sort_by(f64::total_cmp);
        // the sample median has standard error π γ / (2 √n)
        let median = draws[n / 2];
        assert!((median - 0.7).abs() < 4.0 * PI * 0.1 / (2.0 * (n as f64).sqrt()));
    }

    #[test]
    fn beta_variance_by_monte_carlo() {
        let mut r = rng();
        let n = 1_000_000;
        let m = Marginal::new(HeadKind::Beta, 2.0, 5.0).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| m.sample(&mut r)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let (_, exact) = beta_moments(2.0, 5.0).unwrap();
        assert!((var - exact).abs() < 0.05 * exact);
    }

    /// Composite Simpson rule.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + h * i as f64);
        }
        s * h / 3.0
    }

    #[test]
    fn densities_integrate_to_one() {
        let normal = Marginal::new(HeadKind::Normal, 0.3, 0.15).unwrap();
        let total = simpson(
            |x| normal.log_prob(x).unwrap().exp(),
            0.3 - 12.0 * 0.15,
            0.3 + 12.0 * 0.15,
            20_000,
        );
        assert!((total - 1.0).abs() < 1e-3);

        let beta = Marginal::new(HeadKind::Beta, 2.5, 1.7).unwrap();
        let total = simpson(
            |x| beta.log_prob(x.clamp(1e-15, 1.0 - 1e-15)).unwrap().exp(),
            0.0,
            1.0,
            20_000,
        );
        assert!((total - 1.0).abs() < 1e-3);

        // Cauchy on [μ-10⁴γ, μ+10⁴γ] plus the closed-form tail mass
        let (mu, gamma) = (0.5, 0.2);
        let cauchy = Marginal::new(HeadKind::Cauchy, mu, gamma).unwrap();
        let span = 1e4 * gamma;
        // substitute x = μ + γ tan θ to resolve the peak evenly
        let lo = (-span / gamma).atan();
        let hi = (span / gamma).atan();
        let inner = simpson(
            |th| {
                let x = mu + gamma * th.tan();
                cauchy.log_prob(x).unwrap().exp() * gamma / th.cos().powi(2)
            },
            lo,
            hi,
            20_000,
        );
        let tails = 1.0 - (2.0 / PI) * (span / gamma).atan();
        assert!((inner + tails - 1.0).abs() < 1e-3);
    }

    #[test]
    fn log_prob_gradients_match_finite_differences() {
        let cases = [
            (HeadKind::Normal, 0.3, 0.2, 0.45),
            (HeadKind::Normal, -1.0, 2.0, 3.0),
            (HeadKind::Cauchy, 0.6, 0.05, 0.52),
            (HeadKind::Cauchy, 0.0, 1.5, -4.0),
            (HeadKind::Beta, 1.3, 2.7, 0.2),
            (HeadKind::Beta, 5.0, 1.1, 0.93),
        ];
        for (kind, a, b, x) in cases {
            let m = Marginal::new(kind, a, b).unwrap();
            let g = m.log_prob_grad(x).unwrap();
            let h = 1e-6;
            let lp = |a: f64, b: f64| Marginal::new(kind, a, b).unwrap().log_prob(x).unwrap();
            let da = (lp(a + h, b) - lp(a - h, b)) / (2.0 * h);
            let db = (lp(a, b + h) - lp(a, b - h)) / (2.0 * h);
            assert!((g.d_first - da).abs() <= 1e-6 * da.abs().max(1.0), "{kind:?} d_first");
            assert!((g.d_second - db).abs() <= 1e-6 * db.abs().max(1.0), "{kind:?} d_second");
            for form in [EntropyForm::Verbatim, EntropyForm::Standard] {
                let e = m.entropy_grad(form);
                let ent = |a: f64, b: f64| Marginal::new(kind, a, b).unwrap().entropy_grad(form).value;
                let da = (ent(a + h, b) - ent(a - h, b)) / (2.0 * h);
                let db = (ent(a, b + h) - ent(a, b - h)) / (2.0 * h);
                assert!((e.d_first - da).abs() <= 1e-6 * da.abs().max(1.0));
                assert!((e.d_second - db).abs() <= 1e-6 * db.abs().max(1.0));
            }
        }
    }

    #[test]
    fn verbatim_entropy_matches_helper() {
        let m = Marginal::new(HeadKind::Normal, 0.0, 0.37).unwrap();
        assert!((m.entropy_grad(EntropyForm::Verbatim).value - entropy_term(0.37).unwrap()).abs() < 1e-15);
        assert!((m.entropy_grad(EntropyForm::Standard).value - standard_entropy(0.37).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn categorical_log_prob() {
        let d = DistributionParams::Categorical {
            logits: vec![0.0, 3f64.ln()],
        };
        assert!((d.log_prob(&[1.0]).unwrap() - 0.75f64.ln()).abs() < 1e-15);
        assert!(d.log_prob(&[2.0]).is_err());
        let mut r = rng();
        let ones = (0..10_000).filter(|_| d.sample(&mut r).unwrap()[0] == 1.0).count();
        assert!((ones as f64 / 10_000.0 - 0.75).abs() < 0.02);
    }
}
