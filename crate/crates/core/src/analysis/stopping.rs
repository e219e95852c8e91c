//! When should an acceptor stop waiting for a time-based opponent?
//!
//! Against an opponent whose threshold falls like `1 - (t/T)^(1/c)` the
//! acceptor's discounted utility is `U(t) = (t/T)^(1/c) · d^t` (reserve 0).
//! Setting `U'(t) = 0` gives `t* = -1 / (c ln d)`, capped at the deadline.

use crate::error::{contract, Error, Result};

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(contract(format!("concession factor {c} must be > 0")))
    }
}

fn check_d(d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(contract(format!("discount {d} outside (0, 1]")))
    }
}

/// Slope of the opponent's decision utility at `t`.
pub fn opponent_marginal(c: f64, deadline: f64, reserve: f64, t: f64) -> Result<f64> {
    check_c(c)?;
    if !(0.0..=deadline).contains(&t) {
        return Err(contract(format!("time {t} outside [0, {deadline}]")));
    }
    let exponent = (1.0 - c) / c;
    if t == 0.0 && exponent < 0.0 {
        return Err(Error::Singularity(format!("t^{exponent} at t = 0")));
    }
    Ok(-(1.0 - reserve) / (c * deadline.powf(1.0 / c)) * t.powf(exponent))
}

/// `U(t) = (t/T)^(1/c) · d^t`.
pub fn own_utility(c: f64, d: f64, deadline: f64, t: f64) -> Result<f64> {
    check_c(c)?;
    check_d(d)?;
    if t <= 0.0 {
        return Err(contract("own utility needs t > 0"));
    }
    Ok((t / deadline).powf(1.0 / c) * d.powf(t))
}

/// `U'(t) = U(t) · (1/(c t) + ln d)`.
pub fn own_marginal_utility(c: f64, d: f64, deadline: f64, t: f64) -> Result<f64> {
    Ok(own_utility(c, d, deadline, t)? * (1.0 / (c * t) + d.ln()))
}

/// Stationary point of `U`, or the deadline when waiting always pays
/// (including the undiscounted limit `d = 1`).
pub fn optimal_stopping_time(c: f64, d: f64, deadline: f64) -> Result<f64> {
    check_c(c)?;
    check_d(d)?;
    if d >= 1.0 {
        return Ok(deadline);
    }
    let t = -1.0 / (c * d.ln());
    Ok(if t > deadline { deadline } else { t })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `∂²U/∂t²` in closed form.
pub fn second_time_derivative(c: f64, d: f64, deadline: f64, t: f64) -> Result<f64> {
    check_c(c)?;
    check_d(d)?;
    if t <= 0.0 {
        return Err(contract("derivatives need t > 0"));
    }
    let ln_d = d.ln();
    let lead = d.powf(t) / deadline.powf(1.0 / c);
    Ok(lead
        * (ln_d * ln_d * t.powf(1.0 / c)
            + 2.0 * ln_d / c * t.powf((1.0 - c) / c)
            + (1.0 - c) / (c * c) * t.powf((1.0 - 2.0 * c) / c)))
}

/// `∂ⁿU/∂tⁿ` via the Leibniz expansion of `t^(1/c) · d^t`.
pub fn nth_time_derivative(c: f64, d: f64, deadline: f64, t: f64, n: u32) -> Result<f64> {
    check_c(c)?;
    check_d(d)?;
    if t <= 0.0 {
        return Err(contract("derivatives need t > 0"));
    }
    if n == 0 {
        return own_utility(c, d, deadline, t);
    }
    let ln_d = d.ln();
    let mut sum = 0.0;
    let mut falling = 1.0;
    for i in 0..=n {
        if i > 0 {
            falling *= 1.0 - f64::from(i - 1) * c;
        }
        let power = if n - i == 0 { 1.0 } else { ln_d.powi((n - i) as i32) };
        sum += binomial(n, i) * power * falling / c.powi(i as i32) * t.powf((1.0 - f64::from(i) * c) / c);
    }
    Ok(d.powf(t) / deadline.powf(1.0 / c) * sum)
}

/// Probability that the game ends exactly at each step, given independent
/// per-step acceptance probabilities (index 0 is the first step).
pub fn cumulative_accept_probability(per_step_accept: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = per_step_accept.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(contract(format!("probability {p} outside [0, 1]")));
    }
    let mut survive = 1.0;
    Ok(per_step_accept
        .iter()
        .map(|p| {
            let end = survive * p;
            survive *= 1.0 - p;
            end
        })
        .collect())
}

/// Concession factor whose curve `(t/T)^(1/c)` passes through `u` at `t`.
pub fn decision_utility_to_concession(u: f64, t: f64, deadline: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Singularity(format!("ln of utility {u}")));
    }
    if !(t > 0.0 && t < deadline) {
        return Err(Error::Singularity(format!("ln of t/T at t = {t}")));
    }
    Ok((t / deadline).ln() / u.ln())
}
