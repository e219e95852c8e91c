//! Analytic oracles for checking learned behavior.

pub mod geometry;
pub mod induction;
pub mod stopping;

pub use geometry::{
    bid_distribution, frontier_distance, mean_distance_to, nash_product, nash_solution, outcome_point, pareto_frontier,
    FrontierSpec, OutcomePoint, Segment,
};
pub use induction::{backward_induction, bargaining_tree, centipede_tree, DecisionNode, Equilibrium, GameTree, Move};
pub use stopping::{
    cumulative_accept_probability, decision_utility_to_concession, nth_time_derivative, opponent_marginal,
    optimal_stopping_time, own_marginal_utility, own_utility, second_time_derivative,
};
