//! Analytic tables: frontier, Nash solution, stopping times, derivatives and
//! equilibria of the built-in stopping games.

use std::path::Path;

use bargain::analysis::{
    backward_induction, bargaining_tree, centipede_tree, nash_product, nash_solution, nth_time_derivative,
    optimal_stopping_time, own_marginal_utility, own_utility, pareto_frontier, second_time_derivative, GameTree, Move,
};
use bargain::protocol::Scenario;

use crate::config::AnalyzePlan;
use crate::error::CliResult;
use crate::output::{
    fmt, write_snapshot, write_table, DERIVATIVES_SCHEMA, FRONTIER_SCHEMA, NASH_SCHEMA, SPNE_SCHEMA, STOPPING_SCHEMA,
};

pub const BARGAINING_ROUNDS: usize = 4;
pub const BARGAINING_DISCOUNT: f64 = 0.9;
pub const BARGAINING_KEPT: f64 = 0.9;

pub fn frontier_rows(scenario: &Scenario) -> CliResult<Vec<Vec<String>>> {
    let f = pareto_frontier(scenario)?;
    Ok(f.segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                fmt(s.a),
                fmt(s.b),
                fmt(s.c),
                fmt(s.range.0),
                fmt(s.range.1),
            ]
        })
        .collect())
}

pub fn stopping_rows(plan: &AnalyzePlan) -> CliResult<Vec<Vec<String>>> {
    let deadline = f64::from(plan.scenario.deadline());
    let mut rows = Vec::new();
    for &c in &plan.concessions {
        for &d in &plan.discounts {
            let t = optimal_stopping_time(c, d, deadline)?;
            rows.push(vec![fmt(c), fmt(d), fmt(t), fmt(own_utility(c, d, deadline, t)?)]);
        }
    }
    Ok(rows)
}

pub fn derivative_rows(plan: &AnalyzePlan) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let deadline = f64::from(plan.scenario.deadline());
    let mut header: Vec<String> = ["c", "d", "t", "utility", "first", "second"].map(String::from).to_vec();
    header.extend((3..=plan.max_order).map(|n| format!("order_{n}")));
    let mut rows = Vec::new();
    for &c in &plan.concessions {
        for &d in &plan.discounts {
            for t in 1..=plan.scenario.deadline() {
                let t = f64::from(t);
                let mut r = vec![
                    fmt(c),
                    fmt(d),
                    fmt(t),
                    fmt(own_utility(c, d, deadline, t)?),
                    fmt(own_marginal_utility(c, d, deadline, t)?),
                    fmt(second_time_derivative(c, d, deadline, t)?),
                ];
                for n in 3..=plan.max_order {
                    r.push(fmt(nth_time_derivative(c, d, deadline, t, n)?));
                }
                rows.push(r);
            }
        }
    }
    Ok((header, rows))
}

fn profile_tag(profile: &[Move]) -> String {
    profile
        .iter()
        .map(|m| match m {
            Move::Terminate => 'T',
            Move::Continue => 'C',
        })
        .collect()
}

pub fn spne_rows() -> CliResult<Vec<Vec<String>>> {
    let trees: [(&str, GameTree); 2] = [
        ("centipede", centipede_tree()),
        (
            "bargaining",
            bargaining_tree(BARGAINING_ROUNDS, BARGAINING_DISCOUNT, BARGAINING_KEPT),
        ),
    ];
    let mut rows = Vec::new();
    for (name, tree) in trees {
        let eq = backward_induction(&tree)?;
        rows.push(vec![
            name.to_string(),
            tree.nodes.len().to_string(),
            profile_tag(&eq.profile),
            fmt(eq.root_payoff.0),
            fmt(eq.root_payoff.1),
        ]);
    }
    Ok(rows)
}

pub fn run(plan: &AnalyzePlan, dir: &Path) -> CliResult<()> {
    write_snapshot(dir, &plan.snapshot())?;
    write_table(
        &dir.join("frontier.csv"),
        FRONTIER_SCHEMA,
        &["segment", "a", "b", "c", "u_a_min", "u_a_max"],
        &frontier_rows(&plan.scenario)?,
    )?;
    let (offer, point) = nash_solution(&plan.scenario, plan.grid_step)?;
    let mut header: Vec<String> = (1..=offer.len()).map(|i| format!("share_{i}")).collect();
    header.extend(["u_a", "u_b", "nash_product"].map(String::from));
    let mut row: Vec<String> = offer.iter().map(|v| fmt(*v)).collect();
    row.extend([fmt(point.u_a), fmt(point.u_b), fmt(nash_product(point))]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join("nash.csv"), NASH_SCHEMA, &header, &[row])?;
    write_table(
        &dir.join("stopping.csv"),
        STOPPING_SCHEMA,
        &["c", "d", "t_opt", "utility"],
        &stopping_rows(plan)?,
    )?;
    let (header, rows) = derivative_rows(plan)?;
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&dir.join("derivatives.csv"), DERIVATIVES_SCHEMA, &header, &rows)?;
    write_table(
        &dir.join("spne.csv"),
        SPNE_SCHEMA,
        &["tree", "nodes", "profile", "payoff_p1", "payoff_p2"],
        &spne_rows()?,
    )?;
    Ok(())
}
