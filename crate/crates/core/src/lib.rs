//! On-the-fly LTL realizability checking over semantically labelled parity
//! games, with exploration guided by a trueness baseline or a learned
//! pairwise edge ranker.

pub mod arena;
pub mod autlab;
pub mod explore;
pub mod featex;
pub mod guide;
pub mod learn;
pub mod ltl;
pub mod psolve;

use serde::{Deserialize, Serialize};

/// The two players of the synthesis game.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Env,
    Sys,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Env => Player::Sys,
            Player::Sys => Player::Env,
        }
    }

    /// Player favoured by a priority under min-parity (even favours the system).
    pub fn of_priority(priority: u32) -> Player {
        if priority.is_multiple_of(2) {
            Player::Sys
        } else {
            Player::Env
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::Env => 0,
            Player::Sys => 1,
        }
    }
}
