//! Outcome-space geometry: Pareto frontier, distances to it, Nash product.

use crate::error::{contract, Result};
use crate::protocol::{share_value, Scenario, Side};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomePoint {
    pub u_a: f64,
    pub u_b: f64,
}

impl OutcomePoint {
    pub fn new(u_a: f64, u_b: f64) -> Self {
        OutcomePoint { u_a, u_b }
    }

    /// Scales both coordinates, e.g. by `δ^(t-1)` for a late agreement.
    pub fn scaled(self, factor: f64) -> Self {
        OutcomePoint::new(self.u_a * factor, self.u_b * factor)
    }

    pub fn distance(self, other: OutcomePoint) -> f64 {
        (self.u_a - other.u_a).hypot(self.u_b - other.u_b)
    }
}

/// Undiscounted outcome of a division where A keeps `shares_a` and B the rest.
pub fn outcome_point(scenario: &Scenario, shares_a: &[f64]) -> OutcomePoint {
    let shares_b: Vec<f64> = shares_a.iter().map(|s| 1.0 - s).collect();
    OutcomePoint::new(
        share_value(scenario.weights(Side::A), shares_a),
        share_value(scenario.weights(Side::B), &shares_b),
    )
}

/// The line `a·u_A + b·u_B + c = 0`, valid for `u_A` in `range`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub range: (f64, f64),
}

impl Segment {
    pub fn eval(&self, p: OutcomePoint) -> f64 {
        self.a * p.u_a + self.b * p.u_b + self.c
    }

    /// Distance from `p` to the segment's supporting line.
    pub fn line_distance(&self, p: OutcomePoint) -> f64 {
        self.eval(p).abs() / self.a.hypot(self.b)
    }

    pub fn slope(&self) -> f64 {
        -self.a / self.b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierSpec {
    /// Ordered by increasing `u_A`.
    pub segments: Vec<Segment>,
    /// Lexicographically smallest action-space corner behind each hull point,
    /// ordered like the segment endpoints.
    pub vertices: Vec<Vec<f64>>,
}

/// Maps every corner of the action cube to outcome space and keeps the
/// descending part of the upper hull.
pub fn pareto_frontier(scenario: &Scenario) -> Result<FrontierSpec> {
    let m = scenario.issue_count();
    if m > 20 {
        return Err(contract("corner enumeration limited to 20 issues"));
    }
    for side in [Side::A, Side::B] {
        if scenario.total_weight(side) <= 0.0 {
            return Err(contract("degenerate weights"));
        }
    }

    // corners in lexicographic order, so the first preimage seen is the smallest
    let mut corners: Vec<(OutcomePoint, Vec<f64>)> = Vec::with_capacity(1 << m);
    for index in 0..(1u32 << m) {
        let x: Vec<f64> = (0..m).map(|i| f64::from((index >> (m - 1 - i)) & 1)).collect();
        corners.push((outcome_point(scenario, &x), x));
    }

    // best u_B for each u_A, remembering the first preimage reaching it
    let mut columns: Vec<(OutcomePoint, Vec<f64>)> = Vec::new();
    let mut sorted: Vec<usize> = (0..corners.len()).collect();
    sorted.sort_by(|&i, &j| corners[i].0.u_a.total_cmp(&corners[j].0.u_a).then(i.cmp(&j)));
    for i in sorted {
        let (p, x) = &corners[i];
        match columns.last_mut() {
            Some((q, qx)) if q.u_a == p.u_a => {
                if p.u_b > q.u_b {
                    *q = *p;
                    *qx = x.clone();
                }
            }
            _ => columns.push((*p, x.clone())),
        }
    }

    // upper hull, left to right, dropping collinear points
    let mut hull: Vec<(OutcomePoint, Vec<f64>)> = Vec::new();
    for (p, x) in columns {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2].0;
            let a = hull[hull.len() - 1].0;
            let cross = (a.u_a - o.u_a) * (p.u_b - o.u_b) - (a.u_b - o.u_b) * (p.u_a - o.u_a);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((p, x));
    }

    // Pareto part: segments going strictly down
    let mut segments = Vec::new();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for pair in hull.windows(2) {
        let (p, px) = &pair[0];
        let (q, qx) = &pair[1];
        let slope = (q.u_b - p.u_b) / (q.u_a - p.u_a);
        if slope >= 0.0 {
            continue;
        }
        if vertices.is_empty() {
            vertices.push(px.clone());
        }
        vertices.push(qx.clone());
        segments.push(Segment {
            a: -slope,
            b: 1.0,
            c: slope * p.u_a - p.u_b,
            range: (p.u_a, q.u_a),
        });
    }
    if segments.is_empty() {
        return Err(contract("outcome space has no descending frontier"));
    }
    Ok(FrontierSpec { segments, vertices })
}

/// Smallest distance from `point` to any frontier line.
pub fn frontier_distance(frontier: &FrontierSpec, point: OutcomePoint) -> f64 {
    frontier
        .segments
        .iter()
        .map(|s| s.line_distance(point))
        .fold(f64::INFINITY, f64::min)
}

/// Mean frontier distance over a set of outcomes.
pub fn bid_distribution(outcomes: &[OutcomePoint], frontier: &FrontierSpec) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(contract("bid distribution of an empty outcome set"));
    }
    let total: f64 = outcomes.iter().map(|p| frontier_distance(frontier, *p)).sum();
    Ok(total / outcomes.len() as f64)
}

/// Mean Euclidean distance from a set of outcomes to `target`.
pub fn mean_distance_to(outcomes: &[OutcomePoint], target: OutcomePoint) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(contract("mean distance of an empty outcome set"));
    }
    Ok(outcomes.iter().map(|p| p.distance(target)).sum::<f64>() / outcomes.len() as f64)
}

pub fn nash_product(point: OutcomePoint) -> f64 {
    point.u_a * point.u_b
}

fn grid_values(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round();
    if ((1.0 / step) - n).abs() < 1e-9 {
        let n = n as u32;
        return (0..=n).map(|k| f64::from(k) / f64::from(n)).collect();
    }
    let mut values: Vec<f64> = (0..).map(|k| f64::from(k) * step).take_while(|v| *v <= 1.0).collect();
    if values.last().is_some_and(|v| *v < 1.0) {
        values.push(1.0);
    }
    values
}

/// Grid search over A's shares for the largest Nash product. The first grid
/// point (lexicographically) wins ties.
pub fn nash_solution(scenario: &Scenario, grid_step: f64) -> Result<(Vec<f64>, OutcomePoint)> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(contract(format!("grid step {grid_step} outside (0, 0.5]")));
    }
    let values = grid_values(grid_step);
    let m = scenario.issue_count();
    let wa = scenario.weights(Side::A);
    let wb = scenario.weights(Side::B);
    let mut index = vec![0usize; m];
    let mut x = vec![values[0]; m];
    let mut best: Option<(f64, Vec<f64>, OutcomePoint)> = None;
    loop {
        let p = OutcomePoint::new(share_value(wa, &x), wb.iter().zip(&x).map(|(w, s)| w * (1.0 - s)).sum());
        let product = nash_product(p);
        if best.as_ref().is_none_or(|(b, _, _)| product > *b) {
            best = Some((product, x.clone(), p));
        }
        // odometer, last coordinate fastest
        let mut i = m;
        loop {
            if i == 0 {
                let (_, shares, point) = best.expect("grid is non-empty");
                return Ok((shares, point));
            }
            i -= 1;
            index[i] += 1;
            if index[i] < values.len() {
                x[i] = values[index[i]];
                break;
            }
            index[i] = 0;
            x[i] = values[0];
        }
    }
}
