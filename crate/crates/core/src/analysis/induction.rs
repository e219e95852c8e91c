//! Backward induction on stopping games: a line of decision nodes where the
//! mover either terminates (collecting that node's payoff pair) or passes the
//! move on.

use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Terminate,
    Continue,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionNode {
    /// 0 for the first player, 1 for the second.
    pub player: usize,
    pub terminate: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameTree {
    pub nodes: Vec<DecisionNode>,
    /// Reached when every node continues.
    pub final_payoff: (f64, f64),
}

impl GameTree {
    /// Players alternate, starting with the first.
    pub fn alternating(terminals: &[(f64, f64)], final_payoff: (f64, f64)) -> Self {
        GameTree {
            nodes: terminals
                .iter()
                .enumerate()
                .map(|(i, &terminate)| DecisionNode {
                    player: i % 2,
                    terminate,
                })
                .collect(),
            final_payoff,
        }
    }

    /// Payoff reached from `start` when node `i` plays `profile[i]`.
    pub fn play_from(&self, profile: &[Move], start: usize) -> (f64, f64) {
        self.nodes[start..]
            .iter()
            .zip(&profile[start..])
            .find(|(_, mv)| **mv == Move::Terminate)
            .map_or(self.final_payoff, |(node, _)| node.terminate)
    }
}

/// The six-node centipede whose pie grows by one each step.
pub fn centipede_tree() -> GameTree {
    GameTree::alternating(
        &[(0.9, 0.1), (0.2, 1.8), (2.7, 0.3), (0.4, 3.6), (4.5, 0.5), (0.6, 5.4)],
        (3.5, 3.5),
    )
}

/// Alternating bargaining over a shrinking pie: at node `i` the mover can
/// close the deal keeping `kept` of a pie worth `discount^i`, or pass.
/// Running out of rounds enacts the conflict deal `(0, 0)`.
pub fn bargaining_tree(rounds: usize, discount: f64, kept: f64) -> GameTree {
    let terminals: Vec<(f64, f64)> = (0..rounds)
        .map(|i| {
            let pie = discount.powi(i as i32);
            let (mover, other) = (kept * pie, (1.0 - kept) * pie);
            if i % 2 == 0 {
                (mover, other)
            } else {
                (other, mover)
            }
        })
        .collect();
    GameTree::alternating(&terminals, (0.0, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub profile: Vec<Move>,
    pub root_payoff: (f64, f64),
}

fn payoff_of(pair: (f64, f64), player: usize) -> f64 {
    if player == 0 {
        pair.0
    } else {
        pair.1
    }
}

/// Solves the tree from the last node backwards. A mover indifferent
/// between its options terminates.
pub fn backward_induction(tree: &GameTree) -> Result<Equilibrium> {
    if tree.nodes.iter().any(|n| n.player > 1) {
        return Err(contract("players are numbered 0 and 1"));
    }
    let mut profile = vec![Move::Continue; tree.nodes.len()];
    let mut value = tree.final_payoff;
    for (i, node) in tree.nodes.iter().enumerate().rev() {
        if payoff_of(node.terminate, node.player) >= payoff_of(value, node.player) {
            profile[i] = Move::Terminate;
            value = node.terminate;
        }
    }
    Ok(Equilibrium {
        profile,
        root_payoff: value,
    })
}
