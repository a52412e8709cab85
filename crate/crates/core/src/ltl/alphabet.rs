use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use super::formula::{Formula, Var};
use crate::Player;

/// Default cap on the total number of propositions.
pub const DEFAULT_MAX_PROPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("proposition {0} is assigned to both players")]
    Overlap(String),
    #[error("proposition {0} occurs in the formula but in neither --ins nor --outs")]
    Uncovered(String),
    #[error("{count} propositions exceed the cap of {cap}")]
    TooManyProps { count: usize, cap: usize },
}

/// Split of the atomic propositions between environment and system.
///
/// Letters are bitsets over the combined order: environment propositions
/// first, then system propositions.
#[derive(Clone, PartialEq, Eq)]
pub struct Partition {
    env: Vec<Var>,
    sys: Vec<Var>,
    position: FxHashMap<Var, usize>,
}

impl Partition {
    pub fn new(env: Vec<Var>, sys: Vec<Var>) -> Result<Self, PartitionError> {
        let mut position = FxHashMap::default();
        for (i, v) in env.iter().chain(sys.iter()).enumerate() {
            if position.insert(*v, i).is_some() {
                return Err(PartitionError::Overlap(v.name().to_string()));
            }
        }
        let total = env.len() + sys.len();
        if total > 30 {
            return Err(PartitionError::TooManyProps { count: total, cap: 30 });
        }
        Ok(Partition { env, sys, position })
    }

    pub fn from_names<S: AsRef<str>>(env: &[S], sys: &[S]) -> Result<Self, PartitionError> {
        let conv = |xs: &[S]| -> Vec<Var> {
            xs.iter()
                .map(|s| s.as_ref().trim())
                .filter(|s| !s.is_empty())
                .map(Var::new)
                .collect()
        };
        Partition::new(conv(env), conv(sys))
    }

    /// Checks that every atom of `f` is covered and the width is under `cap`.
    pub fn check(&self, f: &Formula, cap: usize) -> Result<(), PartitionError> {
        for v in f.vars() {
            if !self.position.contains_key(&v) {
                return Err(PartitionError::Uncovered(v.name().to_string()));
            }
        }
        if self.width() > cap {
            return Err(PartitionError::TooManyProps {
                count: self.width(),
                cap,
            });
        }
        Ok(())
    }

    pub fn env(&self) -> &[Var] {
        &self.env
    }

    pub fn sys(&self) -> &[Var] {
        &self.sys
    }

    pub fn width(&self) -> usize {
        self.env.len() + self.sys.len()
    }

    pub fn env_letters(&self) -> u32 {
        1 << self.env.len()
    }

    pub fn sys_letters(&self) -> u32 {
        1 << self.sys.len()
    }

    pub fn position(&self, v: Var) -> Option<usize> {
        self.position.get(&v).copied()
    }

    /// Owner of a proposition; `None` if it is not in the partition.
    pub fn owner(&self, v: Var) -> Option<Player> {
        self.position(v)
            .map(|p| if p < self.env.len() { Player::Env } else { Player::Sys })
    }

    /// Combines an environment and a system sub-letter.
    pub fn join(&self, env: u32, sys: u32) -> Letter {
        Letter(env | (sys << self.env.len()))
    }

    pub fn holds(&self, letter: Letter, v: Var) -> bool {
        self.position(v).is_some_and(|p| letter.get(p))
    }

    /// Builds a letter from the set of propositions that hold.
    pub fn letter_of(&self, props: &[Var]) -> Letter {
        let mut bits = 0;
        for v in props {
            if let Some(p) = self.position(*v) {
                bits |= 1 << p;
            }
        }
        Letter(bits)
    }

    pub fn letter_by_names(&self, props: &[&str]) -> Letter {
        let vars: Vec<Var> = props.iter().map(|s| Var::new(s)).collect();
        self.letter_of(&vars)
    }

    pub fn all_letters(&self) -> impl Iterator<Item = Letter> {
        (0u32..(1u32 << self.width())).map(Letter)
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition(env={:?}, sys={:?})", self.env, self.sys)
    }
}

/// A valuation of all propositions, as a bitset over the partition order.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Letter(pub u32);

impl Letter {
    pub fn get(self, pos: usize) -> bool {
        self.0 >> pos & 1 == 1
    }

    pub fn env_part(self, p: &Partition) -> u32 {
        self.0 & ((1 << p.env.len()) - 1)
    }

    pub fn sys_part(self, p: &Partition) -> u32 {
        self.0 >> p.env.len()
    }
}
