//! Parity solving of (partial) arenas.

mod zielonka;

use thiserror::Error;

pub use zielonka::{zielonka, Game, Solution, SolveError, DEFAULT_CALL_BUDGET};

use crate::arena::{Arena, ArenaError, NodeId, Verdict, NEUTRAL};
use crate::ltl::{Formula, Partition};
use crate::Player;

/// Default node budget for building whole arenas.
pub const ORACLE_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A game built from the known part of an arena.
pub struct SolveView {
    pub game: Game,
    /// Game index of each environment node (u32::MAX if absent).
    pub env_index: Vec<u32>,
    pub sys_index: Vec<u32>,
    /// Arena id of each game node: `(is_env, id)`.
    pub origin: Vec<(bool, NodeId)>,
}

impl SolveView {
    /// Unexplored nodes lose for `pessimist` (no pessimist: the arena must be
    /// complete); decided nodes are won by their winner.
    pub fn build(a: &Arena, pessimist: Option<Player>) -> SolveView {
        let mut game = Game::new();
        let mut env_index = vec![u32::MAX; a.env_count_raw()];
        let mut sys_index = vec![u32::MAX; a.sys_count_raw()];
        let mut origin = Vec::new();
        for n in a.env_nodes() {
            env_index[n as usize] = game.add_node(Player::Env);
            origin.push((true, n));
        }
        for s in a.sys_nodes() {
            sys_index[s as usize] = game.add_node(Player::Sys);
            origin.push((false, s));
        }
        for n in a.env_nodes() {
            let v = env_index[n as usize];
            let sink = match (a.decided(n), a.is_explored(n)) {
                (Some(w), _) => Some(w),
                (None, false) => Some(pessimist.expect("complete arena required").opponent()),
                (None, true) => None,
            };
            match sink {
                Some(Player::Sys) => game.add_edge(v, v, 0),
                Some(Player::Env) => game.add_edge(v, v, 1),
                None => {
                    for s in a.env_choices(n) {
                        game.add_edge(v, sys_index[s as usize], NEUTRAL);
                    }
                }
            }
        }
        for s in a.sys_nodes() {
            let v = sys_index[s as usize];
            for (t, p, _) in a.sys_edges(s) {
                game.add_edge(v, env_index[t as usize], p);
            }
        }
        SolveView {
            game,
            env_index,
            sys_index,
            origin,
        }
    }
}

/// Solves the known arena treating unexplored nodes as losing for
/// `perspective`. The perspective's winning region is recorded as decided.
pub fn solve_partial(a: &mut Arena, perspective: Player, budget: usize) -> Result<Verdict, SolveError> {
    let view = SolveView::build(a, Some(perspective));
    let sol = zielonka(&view.game, budget)?;
    for (v, &(is_env, id)) in view.origin.iter().enumerate() {
        if is_env && sol.winner[v] == perspective && a.decided(id).is_none() {
            a.set_decided(id, perspective);
        }
    }
    let init = a.initial();
    Ok(if a.decided(init) == Some(perspective) {
        Verdict::of_winner(perspective)
    } else {
        Verdict::Unknown
    })
}

/// Builds the whole reachable arena and solves it exactly.
pub fn solve_full_oracle(f: &Formula, p: &Partition) -> Result<Verdict, OracleError> {
    solve_full_with(f, p, true, ORACLE_NODE_BUDGET).map(|(v, _)| v)
}

/// Full solve with explicit merging flag and budget; also returns the arena
/// node count.
pub fn solve_full_with(
    f: &Formula,
    p: &Partition,
    merging: bool,
    budget: usize,
) -> Result<(Verdict, usize), OracleError> {
    let mut a = Arena::new(f, p, merging, budget)?;
    a.build_all()?;
    let view = SolveView::build(&a, None);
    let sol = zielonka(&view.game, DEFAULT_CALL_BUDGET)?;
    let init = view.env_index[a.initial() as usize];
    Ok((Verdict::of_winner(sol.winner[init as usize]), a.node_count()))
}
