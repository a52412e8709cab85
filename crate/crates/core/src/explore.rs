//! The on-the-fly loop: guided frontier exploration, closure detection,
//! partial solving and backtracking, alternating between both players.

use std::collections::VecDeque;
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::arena::{Arena, ArenaError, NodeId, Selection, Verdict};
use crate::autlab::AutError;
use crate::featex::{Aggregation, Base, EdgeCtx, Featurizer};
use crate::guide::{rank_baseline, Heuristic};
use crate::ltl::{Formula, Partition};
use crate::psolve::{solve_partial, DEFAULT_CALL_BUDGET};
use crate::Player;

#[derive(Clone, Debug)]
pub struct ExploreConfig {
    /// Expansions per perspective before switching.
    pub stint_budget: usize,
    /// Candidates reopened per backtrack round.
    pub fanout: usize,
    pub max_nodes: usize,
    pub merging: bool,
    pub solver_budget: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            stint_budget: 4096,
            fanout: 8,
            max_nodes: 200_000,
            merging: true,
            solver_budget: DEFAULT_CALL_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    pub env_nodes: usize,
    pub sys_nodes: usize,
    pub expansions: usize,
    pub solves: usize,
    pub backtracks: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub stats: RunStats,
    /// Why the run gave up, for `Unknown`.
    pub diagnostic: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StintEnd {
    Closed,
    BudgetExhausted,
}

#[derive(Default)]
struct Side {
    frontier: VecDeque<NodeId>,
    /// Environment nodes whose choices this side has opened.
    visited: FxHashSet<NodeId>,
    sel: Selection,
    /// Ranked successors per choice node; the cursor is the opened length.
    ranked: FxHashMap<NodeId, Vec<NodeId>>,
    seen_order: FxHashMap<NodeId, usize>,
}

/// Exploration state shared by both perspectives.
pub struct Explorer<'h> {
    pub arena: Arena,
    feat: Featurizer,
    heuristic: &'h mut dyn Heuristic,
    cfg: ExploreConfig,
    sides: [Side; 2],
    representative: FxHashMap<NodeId, EdgeCtx>,
    pub stats: RunStats,
}

impl<'h> Explorer<'h> {
    pub fn new(
        f: &Formula,
        p: &Partition,
        cfg: ExploreConfig,
        heuristic: &'h mut dyn Heuristic,
    ) -> Result<Self, AutError> {
        let arena = match Arena::new(f, p, cfg.merging, cfg.max_nodes) {
            Ok(a) => a,
            Err(ArenaError::Automaton(e)) => return Err(e),
            Err(ArenaError::Budget(_)) => unreachable!("a fresh arena holds one node"),
        };
        let mut sides: [Side; 2] = Default::default();
        for s in &mut sides {
            s.frontier.push_back(arena.initial());
        }
        Ok(Explorer {
            arena,
            feat: Featurizer::new(),
            heuristic,
            cfg,
            sides,
            representative: FxHashMap::default(),
            stats: RunStats::default(),
        })
    }

    fn state_of(&self, n: NodeId) -> u32 {
        state_of(&self.arena, n)
    }

    fn sys_edge_ctx(&self, s: NodeId) -> Vec<EdgeCtx> {
        sys_edge_contexts(&self.arena, s)
    }

    fn representative_of(&mut self, s: NodeId) -> EdgeCtx {
        if let Some(e) = self.representative.get(&s) {
            return *e;
        }
        let e = choice_context(&self.arena, &mut self.feat, s);
        self.representative.insert(s, e);
        e
    }

    fn rank_sys(&mut self, s: NodeId) -> Vec<NodeId> {
        let edges = self.sys_edge_ctx(s);
        let targets = self.arena.sys_edges(s);
        let order = self
            .heuristic
            .rank(self.arena.automaton_mut(), &mut self.feat, Player::Sys, &edges);
        let mut out: Vec<NodeId> = Vec::with_capacity(order.len());
        for i in order {
            if !out.contains(&targets[i].0) {
                out.push(targets[i].0);
            }
        }
        out
    }

    fn rank_env(&mut self, n: NodeId) -> Vec<NodeId> {
        let choices = self.arena.env_choices(n);
        let source = self.state_of(n);
        let edges: Vec<EdgeCtx> = choices
            .iter()
            .map(|&s| EdgeCtx {
                source,
                ..self.representative_of(s)
            })
            .collect();
        let order = self
            .heuristic
            .rank(self.arena.automaton_mut(), &mut self.feat, Player::Env, &edges);
        order.into_iter().map(|i| choices[i]).collect()
    }

    /// Opens the top-ranked successor of choice node `c` if it has none yet.
    fn ensure_opened(&mut self, who: Player, c: NodeId) {
        let side = &self.sides[who.index()];
        if side.sel.opened.get(&c).is_some_and(|v| !v.is_empty()) {
            return;
        }
        let ranked = match who {
            Player::Sys => self.rank_sys(c),
            Player::Env => self.rank_env(c),
        };
        let side = &mut self.sides[who.index()];
        side.sel.opened.insert(c, vec![ranked[0]]);
        let k = side.seen_order.len();
        side.seen_order.entry(c).or_insert(k);
        side.ranked.insert(c, ranked);
    }

    fn push_if_needed(&mut self, who: Player, t: NodeId) {
        let t = self.arena.env_rep(t);
        let side = &mut self.sides[who.index()];
        if self.arena.decided(t).is_none() && !side.visited.contains(&t) {
            side.frontier.push_back(t);
        }
    }

    /// Environment nodes that the side's choices make necessary.
    fn required_targets(&self, who: Player, n: NodeId) -> Vec<NodeId> {
        let side = &self.sides[who.index()];
        let mut out = Vec::new();
        match who {
            Player::Sys => {
                for s in self.arena.env_choices(n) {
                    if let Some(v) = side.sel.opened.get(&s) {
                        out.extend(v.iter().map(|&t| self.arena.env_rep(t)));
                    }
                }
            }
            Player::Env => {
                if let Some(v) = side.sel.opened.get(&n) {
                    for &s in v {
                        let s = self.arena.sys_rep(s);
                        out.extend(self.arena.sys_edges(s).into_iter().map(|(t, _, _)| t));
                    }
                }
            }
        }
        out
    }

    fn process(&mut self, who: Player, n: NodeId) -> Result<(), ArenaError> {
        let n = self.arena.env_rep(n);
        if self.arena.decided(n).is_some() {
            return Ok(());
        }
        if !self.arena.is_explored(n) {
            self.arena.expand(n)?;
            self.stats.expansions += 1;
            log::trace!("expand {n} by {who:?}: {} nodes", self.arena.node_count());
        }
        let n = self.arena.env_rep(n);
        self.sides[who.index()].visited.insert(n);
        match who {
            Player::Sys => {
                for s in self.arena.env_choices(n) {
                    self.ensure_opened(who, s);
                }
            }
            Player::Env => self.ensure_opened(who, n),
        }
        for t in self.required_targets(who, n) {
            self.push_if_needed(who, t);
        }
        Ok(())
    }

    /// Walks the side's view from the initial node and queues every reached
    /// node that is unexplored or lacks an opened choice; true if it queued
    /// anything.
    fn repair(&mut self, who: Player) -> bool {
        let mut seen = FxHashSet::default();
        let mut stack = vec![self.arena.initial()];
        let mut queued = false;
        while let Some(n) = stack.pop() {
            let n = self.arena.env_rep(n);
            if !seen.insert(n) || self.arena.decided(n).is_some() {
                continue;
            }
            let side = &self.sides[who.index()];
            let complete = self.arena.is_explored(n)
                && match who {
                    Player::Sys => self
                        .arena
                        .env_choices(n)
                        .iter()
                        .all(|s| side.sel.opened.contains_key(s)),
                    Player::Env => side.sel.opened.contains_key(&n),
                };
            if !complete {
                let side = &mut self.sides[who.index()];
                side.visited.remove(&n);
                side.frontier.push_back(n);
                queued = true;
                continue;
            }
            stack.extend(self.required_targets(who, n));
        }
        queued
    }

    /// Explores until the side's view is closed or its stint budget is spent.
    pub fn explore_frontier(&mut self, who: Player, budget: usize) -> Result<StintEnd, ArenaError> {
        let mut used = 0;
        loop {
            while let Some(n) = self.sides[who.index()].frontier.pop_front() {
                let n = self.arena.env_rep(n);
                if self.sides[who.index()].visited.contains(&n) {
                    continue;
                }
                if !self.arena.is_explored(n) && self.arena.decided(n).is_none() {
                    if used >= budget {
                        self.sides[who.index()].frontier.push_front(n);
                        return Ok(StintEnd::BudgetExhausted);
                    }
                    used += 1;
                }
                self.process(who, n)?;
            }
            if !self.repair(who) {
                debug_assert!(crate::arena::closed(&self.arena, who, &self.sides[who.index()].sel));
                return Ok(StintEnd::Closed);
            }
        }
    }

    fn trueness(&mut self, n: NodeId) -> f64 {
        let s = self.state_of(n);
        self.feat
            .state_value(self.arena.automaton(), Base::Trueness, Aggregation::MasterOnly, s)
    }

    /// Up to `k` reachable choice nodes of `who` with unopened successors,
    /// best master trueness for their owner first; each gets its next
    /// ranked successor opened.
    pub fn backtrack_select(&mut self, who: Player, k: usize) -> Vec<NodeId> {
        let mut cands: Vec<(f64, usize, NodeId)> = Vec::new();
        let mut seen = FxHashSet::default();
        let mut stack = vec![self.arena.initial()];
        while let Some(n) = stack.pop() {
            let n = self.arena.env_rep(n);
            if !seen.insert(n) || self.arena.decided(n).is_some() {
                continue;
            }
            let nodes: Vec<NodeId> = match who {
                Player::Sys => self.arena.env_choices(n),
                Player::Env => vec![n],
            };
            for c in nodes {
                let side = &self.sides[who.index()];
                let (Some(r), Some(o)) = (side.ranked.get(&c), side.sel.opened.get(&c)) else {
                    continue;
                };
                if o.len() < r.len() && !cands.iter().any(|x| x.2 == c) {
                    let order = side.seen_order[&c];
                    let owner_node = match who {
                        Player::Sys => self.arena.sys_node(c).parent,
                        Player::Env => c,
                    };
                    let t = self.trueness(owner_node);
                    cands.push((if who == Player::Sys { -t } else { t }, order, c));
                }
            }
            stack.extend(self.required_targets(who, n));
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(k);
        let picked: Vec<NodeId> = cands.into_iter().map(|c| c.2).collect();
        for &c in &picked {
            let side = &mut self.sides[who.index()];
            let opened = side.sel.opened.get_mut(&c).expect("candidate is opened");
            let next = side.ranked[&c][opened.len()];
            opened.push(next);
            let new_targets: Vec<NodeId> = match who {
                Player::Sys => vec![next],
                Player::Env => {
                    let s = self.arena.sys_rep(next);
                    self.arena.sys_edges(s).into_iter().map(|(t, _, _)| t).collect()
                }
            };
            for t in new_targets {
                self.push_if_needed(who, t);
            }
        }
        picked
    }

    fn finish(&mut self, verdict: Verdict, diagnostic: Option<String>) -> RunOutcome {
        self.stats.env_nodes = self.arena.env_count();
        self.stats.sys_nodes = self.arena.sys_count();
        RunOutcome {
            verdict,
            stats: self.stats.clone(),
            diagnostic,
        }
    }

    pub fn run(&mut self) -> RunOutcome {
        let mut who = Player::Sys;
        loop {
            let end = match self.explore_frontier(who, self.cfg.stint_budget) {
                Ok(e) => e,
                Err(e) => return self.finish(Verdict::Unknown, Some(e.to_string())),
            };
            if end == StintEnd::Closed {
                self.stats.solves += 1;
                let v = match solve_partial(&mut self.arena, who, self.cfg.solver_budget) {
                    Ok(v) => v,
                    Err(e) => return self.finish(Verdict::Unknown, Some(e.to_string())),
                };
                log::debug!("solve {} as {who:?}: {v}", self.stats.solves);
                if v != Verdict::Unknown {
                    return self.finish(v, None);
                }
                let picked = self.backtrack_select(who, self.cfg.fanout);
                if picked.is_empty() {
                    // the view is the whole reachable game
                    return self.finish(Verdict::of_winner(who.opponent()), None);
                }
                self.stats.backtracks += 1;
                log::debug!("backtrack {} as {who:?}: {} nodes", self.stats.backtracks, picked.len());
            }
            who = who.opponent();
        }
    }
}

fn state_of(a: &Arena, n: NodeId) -> u32 {
    a.env_node(a.env_rep(n)).state
}

/// Edges of a system node in arena order.
pub fn sys_edge_contexts(a: &Arena, s: NodeId) -> Vec<EdgeCtx> {
    let source = state_of(a, a.sys_node(s).parent);
    a.sys_edges(s)
        .into_iter()
        .enumerate()
        .map(|(i, (t, p, _))| {
            let target = state_of(a, t);
            EdgeCtx {
                source,
                target,
                priority: p,
                key: (target, p, a.sys_edge_letter(s, i)),
            }
        })
        .collect()
}

/// An environment choice stands for the system node's best successor by
/// the baseline, keyed by the environment letter.
pub fn choice_context(a: &Arena, feat: &mut Featurizer, s: NodeId) -> EdgeCtx {
    let edges = sys_edge_contexts(a, s);
    let best = rank_baseline(a.automaton(), feat, Player::Sys, &edges)[0];
    let mut e = edges[best];
    e.key.2 = a.sys_node(s).env_letter;
    e
}

/// Decides realizability on the fly.
pub fn run(f: &Formula, p: &Partition, cfg: ExploreConfig, h: &mut dyn Heuristic) -> Result<RunOutcome, AutError> {
    let mut ex = Explorer::new(f, p, cfg, h)?;
    Ok(ex.run())
}

/// [`run`] plus wall time in milliseconds.
pub fn run_timed(
    f: &Formula,
    p: &Partition,
    cfg: ExploreConfig,
    h: &mut dyn Heuristic,
) -> Result<(RunOutcome, f64), AutError> {
    let start = Instant::now();
    let out = run(f, p, cfg, h)?;
    Ok((out, start.elapsed().as_secs_f64() * 1e3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guide::{Baseline, Reverse};
    use crate::ltl::parse_ltl;

    fn verdict(f: &str, env: &[&str], sys: &[&str]) -> Verdict {
        let p = Partition::from_names(env, sys).unwrap();
        run(&parse_ltl(f).unwrap(), &p, ExploreConfig::default(), &mut Baseline)
            .unwrap()
            .verdict
    }

    #[test]
    fn small_examples() {
        assert_eq!(verdict("G (r <-> X g)", &["r"], &["g"]), Verdict::Realizable);
        assert_eq!(verdict("G e & F !e", &["e"], &[]), Verdict::Unrealizable);
        assert_eq!(verdict("F e", &["e"], &[]), Verdict::Unrealizable);
        assert_eq!(verdict("G (r -> F g)", &["r"], &["g"]), Verdict::Realizable);
        assert_eq!(verdict("G (g <-> X r)", &["r"], &["g"]), Verdict::Unrealizable);
    }

    #[test]
    fn true_closes_after_one_expansion() {
        let p = Partition::from_names(&["a"], &["b"]).unwrap();
        let mut h = Baseline;
        let mut ex = Explorer::new(&Formula::tt(), &p, ExploreConfig::default(), &mut h).unwrap();
        assert_eq!(ex.explore_frontier(Player::Sys, 4096).unwrap(), StintEnd::Closed);
        assert_eq!(ex.stats.expansions, 1);
        assert_eq!(ex.run().verdict, Verdict::Realizable);
    }

    #[test]
    fn stint_budget_of_one() {
        let p = Partition::from_names(&["r"], &["g"]).unwrap();
        let mut h = Baseline;
        let f = parse_ltl("G (r <-> X g)").unwrap();
        let mut ex = Explorer::new(&f, &p, ExploreConfig::default(), &mut h).unwrap();
        assert_eq!(ex.explore_frontier(Player::Sys, 1).unwrap(), StintEnd::BudgetExhausted);
    }

    #[test]
    fn node_cap_gives_unknown() {
        let p = Partition::from_names(&["r1", "r2"], &["g1", "g2"]).unwrap();
        let f = parse_ltl("G (r1 -> F g1) & G (r2 -> F g2) & G !(g1 & g2)").unwrap();
        let cfg = ExploreConfig {
            max_nodes: 3,
            ..Default::default()
        };
        let out = run(&f, &p, cfg, &mut Baseline).unwrap();
        assert_eq!(out.verdict, Verdict::Unknown);
        assert!(out.diagnostic.is_some());
    }

    #[test]
    fn reverse_guidance_is_still_correct() {
        let p = Partition::from_names(&["r1", "r2"], &["g1", "g2"]).unwrap();
        let f = parse_ltl("G (r1 -> F g1) & G (r2 -> F g2) & G !(g1 & g2)").unwrap();
        let out = run(&f, &p, ExploreConfig::default(), &mut Reverse).unwrap();
        assert_eq!(out.verdict, Verdict::Realizable);
    }

    #[test]
    fn backtracking_runs_dry() {
        let p = Partition::from_names(&["a"], &["b"]).unwrap();
        let f = parse_ltl("G F b & G F a").unwrap();
        let mut h = Baseline;
        let mut ex = Explorer::new(&f, &p, ExploreConfig::default(), &mut h).unwrap();
        ex.explore_frontier(Player::Sys, 4096).unwrap();
        let mut rounds = 0;
        while !ex.backtrack_select(Player::Sys, 1).is_empty() {
            ex.explore_frontier(Player::Sys, 4096).unwrap();
            rounds += 1;
            assert!(rounds < 100);
        }
        assert!(rounds > 0);
    }
}
