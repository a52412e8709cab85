//! Partial game arena: the environment picks its letter first, then the
//! system picks its own and the automaton moves.

use std::fmt::Write as _;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autlab::{AutError, Automaton, StateId};
use crate::ltl::{Formula, Partition};
use crate::Player;

pub type NodeId = u32;

/// Priority of the environment's letter choice; never decides a play.
pub const NEUTRAL: u32 = u32::MAX;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Realizable,
    Unrealizable,
    Unknown,
}

impl Verdict {
    pub fn token(self) -> &'static str {
        match self {
            Verdict::Realizable => "REALIZABLE",
            Verdict::Unrealizable => "UNREALIZABLE",
            Verdict::Unknown => "UNKNOWN",
        }
    }

    pub fn of_winner(p: Player) -> Verdict {
        match p {
            Player::Sys => Verdict::Realizable,
            Player::Env => Verdict::Unrealizable,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArenaError {
    #[error(transparent)]
    Automaton(#[from] AutError),
    #[error("arena grew past {0} nodes")]
    Budget(usize),
}

#[derive(Clone, Debug)]
pub struct EnvNode {
    pub state: StateId,
    pub explored: bool,
    /// One system node per environment letter (raw ids; resolve with `sys_rep`).
    pub succ: Vec<NodeId>,
}

/// System moves sharing target and priority are stored once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SysEdge {
    pub target: NodeId,
    pub priority: u32,
    pub letters: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct SysNode {
    pub parent: NodeId,
    pub env_letter: u32,
    pub edges: Vec<SysEdge>,
}

pub struct Arena {
    aut: Automaton,
    env: Vec<EnvNode>,
    sys: Vec<SysNode>,
    env_uf: Vec<NodeId>,
    sys_uf: Vec<NodeId>,
    by_state: FxHashMap<StateId, NodeId>,
    env_sig: FxHashMap<Vec<NodeId>, NodeId>,
    sys_sig: FxHashMap<Vec<(NodeId, u32)>, NodeId>,
    /// System nodes with an edge into the environment node.
    env_preds: Vec<Vec<NodeId>>,
    /// Environment nodes listing the system node as a successor.
    sys_parents: Vec<Vec<NodeId>>,
    decided: Vec<Option<Player>>,
    merging: bool,
    max_nodes: usize,
    live_env: usize,
    live_sys: usize,
    expanded: usize,
}

impl Arena {
    pub fn new(f: &Formula, p: &Partition, merging: bool, max_nodes: usize) -> Result<Self, ArenaError> {
        let aut = Automaton::new(f, p)?;
        let mut a = Arena {
            aut,
            env: Vec::new(),
            sys: Vec::new(),
            env_uf: Vec::new(),
            sys_uf: Vec::new(),
            by_state: FxHashMap::default(),
            env_sig: FxHashMap::default(),
            sys_sig: FxHashMap::default(),
            env_preds: Vec::new(),
            sys_parents: Vec::new(),
            decided: Vec::new(),
            merging,
            max_nodes,
            live_env: 0,
            live_sys: 0,
            expanded: 0,
        };
        let init = a.aut.initial();
        a.node_of(init);
        Ok(a)
    }

    pub fn automaton(&self) -> &Automaton {
        &self.aut
    }

    pub fn automaton_mut(&mut self) -> &mut Automaton {
        &mut self.aut
    }

    pub fn partition(&self) -> &Partition {
        self.aut.partition()
    }

    pub fn merging(&self) -> bool {
        self.merging
    }

    pub fn initial(&self) -> NodeId {
        self.env_rep(0)
    }

    fn node_of(&mut self, s: StateId) -> NodeId {
        if let Some(&n) = self.by_state.get(&s) {
            return n;
        }
        let n = self.env.len() as NodeId;
        self.env.push(EnvNode {
            state: s,
            explored: false,
            succ: Vec::new(),
        });
        self.env_uf.push(n);
        self.env_preds.push(Vec::new());
        self.decided.push(None);
        self.by_state.insert(s, n);
        self.live_env += 1;
        n
    }

    pub fn env_rep(&self, mut n: NodeId) -> NodeId {
        while self.env_uf[n as usize] != n {
            n = self.env_uf[n as usize];
        }
        n
    }

    pub fn sys_rep(&self, mut n: NodeId) -> NodeId {
        while self.sys_uf[n as usize] != n {
            n = self.sys_uf[n as usize];
        }
        n
    }

    fn compress_env(&mut self, n: NodeId) -> NodeId {
        let r = self.env_rep(n);
        let mut x = n;
        while self.env_uf[x as usize] != r {
            let next = self.env_uf[x as usize];
            self.env_uf[x as usize] = r;
            x = next;
        }
        r
    }

    pub fn env_node(&self, n: NodeId) -> &EnvNode {
        &self.env[n as usize]
    }

    pub fn sys_node(&self, n: NodeId) -> &SysNode {
        &self.sys[n as usize]
    }

    pub fn is_explored(&self, n: NodeId) -> bool {
        self.env[self.env_rep(n) as usize].explored
    }

    /// Distinct representative system nodes of an environment node.
    pub fn env_choices(&self, n: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.env[n as usize].succ.iter().map(|&s| self.sys_rep(s)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Edges of a system node with representative targets, in storage order.
    pub fn sys_edges(&self, n: NodeId) -> Vec<(NodeId, u32, usize)> {
        self.sys[n as usize]
            .edges
            .iter()
            .map(|e| (self.env_rep(e.target), e.priority, e.letters.len()))
            .collect()
    }

    /// Smallest system letter of each edge, used as a canonical key.
    pub fn sys_edge_letter(&self, n: NodeId, i: usize) -> u32 {
        self.sys[n as usize].edges[i].letters[0]
    }

    pub fn decided(&self, n: NodeId) -> Option<Player> {
        self.decided[self.env_rep(n) as usize]
    }

    pub fn set_decided(&mut self, n: NodeId, p: Player) {
        let r = self.env_rep(n) as usize;
        debug_assert!(self.decided[r].is_none_or(|q| q == p));
        self.decided[r] = Some(p);
    }

    pub fn decided_count(&self, p: Player) -> usize {
        (0..self.env.len() as NodeId)
            .filter(|&n| self.env_rep(n) == n && self.decided[n as usize] == Some(p))
            .count()
    }

    /// Raw store sizes, including merged-away nodes.
    pub fn env_count_raw(&self) -> usize {
        self.env.len()
    }

    pub fn sys_count_raw(&self) -> usize {
        self.sys.len()
    }

    /// Live (unmerged) environment nodes.
    pub fn env_count(&self) -> usize {
        self.live_env
    }

    pub fn sys_count(&self) -> usize {
        self.live_sys
    }

    pub fn node_count(&self) -> usize {
        self.live_env + self.live_sys
    }

    /// Environment nodes that were expanded, merged or not.
    pub fn expansions(&self) -> usize {
        self.expanded
    }

    /// All live environment node ids.
    pub fn env_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.env.len() as NodeId).filter(move |&n| self.env_uf[n as usize] == n)
    }

    pub fn sys_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.sys.len() as NodeId).filter(move |&n| self.sys_uf[n as usize] == n)
    }

    /// Expands an environment node: creates its system nodes and their
    /// targets. Returns the representative of `n` afterwards.
    pub fn expand(&mut self, n: NodeId) -> Result<NodeId, ArenaError> {
        let n = self.compress_env(n);
        if self.env[n as usize].explored {
            return Ok(n);
        }
        let p = self.aut.partition().clone();
        let (env_letters, sys_letters) = (p.env_letters(), p.sys_letters());
        if self.node_count() + env_letters as usize * (1 + sys_letters as usize) > self.max_nodes {
            return Err(ArenaError::Budget(self.max_nodes));
        }
        let state = self.env[n as usize].state;
        let mut succ = Vec::with_capacity(env_letters as usize);
        for e in 0..env_letters {
            let mut groups: Vec<SysEdge> = Vec::new();
            for s in 0..sys_letters {
                let (t, prio) = self.aut.successor(state, p.join(e, s));
                let tn = self.node_of(t);
                match groups.iter_mut().find(|g| g.target == tn && g.priority == prio) {
                    Some(g) => g.letters.push(s),
                    None => groups.push(SysEdge {
                        target: tn,
                        priority: prio,
                        letters: vec![s],
                    }),
                }
            }
            let id = self.sys.len() as NodeId;
            for g in &groups {
                self.env_preds[g.target as usize].push(id);
            }
            self.sys.push(SysNode {
                parent: n,
                env_letter: e,
                edges: groups,
            });
            self.sys_uf.push(id);
            self.sys_parents.push(vec![n]);
            self.live_sys += 1;
            let rep = self.settle_sys(id);
            succ.push(rep);
        }
        let node = &mut self.env[n as usize];
        node.succ = succ;
        node.explored = true;
        self.expanded += 1;
        self.settle_env(n);
        Ok(self.env_rep(n))
    }

    fn sys_signature(&self, s: NodeId) -> Vec<(NodeId, u32)> {
        let mut sig: Vec<(NodeId, u32)> = self.sys[s as usize]
            .edges
            .iter()
            .map(|e| (self.env_rep(e.target), e.priority))
            .collect();
        sig.sort_unstable();
        sig.dedup();
        sig
    }

    /// Registers a system node under its signature, merging on collision.
    fn settle_sys(&mut self, s: NodeId) -> NodeId {
        let s = self.sys_rep(s);
        if !self.merging {
            return s;
        }
        let sig = self.sys_signature(s);
        match self.sys_sig.get(&sig).map(|&r| self.sys_rep(r)) {
            Some(r) if r != s && self.sys_signature(r) == sig => {
                self.sys_uf[s as usize] = r;
                self.live_sys -= 1;
                let parents = std::mem::take(&mut self.sys_parents[s as usize]);
                self.sys_parents[r as usize].extend(parents.iter().copied());
                for e in parents {
                    let e = self.env_rep(e);
                    if self.env[e as usize].explored {
                        self.settle_env(e);
                    }
                }
                r
            }
            _ => {
                self.sys_sig.insert(sig, s);
                s
            }
        }
    }

    fn env_signature(&self, n: NodeId) -> Vec<NodeId> {
        self.env_choices(n)
    }

    fn settle_env(&mut self, n: NodeId) {
        let n = self.env_rep(n);
        if !self.merging || !self.env[n as usize].explored {
            return;
        }
        let sig = self.env_signature(n);
        match self.env_sig.get(&sig).map(|&r| self.env_rep(r)) {
            Some(r) if r != n && self.env[r as usize].explored && self.env_signature(r) == sig => {
                // keep the older node as representative
                let (keep, gone) = if r < n { (r, n) } else { (n, r) };
                self.env_uf[gone as usize] = keep;
                self.live_env -= 1;
                self.env_sig.insert(sig, keep);
                if let Some(p) = self.decided[gone as usize] {
                    self.decided[keep as usize] = Some(p);
                }
                let preds = std::mem::take(&mut self.env_preds[gone as usize]);
                self.env_preds[keep as usize].extend(preds.iter().copied());
                for s in preds {
                    self.settle_sys(s);
                }
            }
            _ => {
                self.env_sig.insert(sig, n);
            }
        }
    }

    /// Re-derives every merge signature; true if merged nodes still agree.
    pub fn check_signatures(&self) -> bool {
        (0..self.sys.len() as NodeId).all(|s| self.sys_signature(s) == self.sys_signature(self.sys_rep(s)))
            && (0..self.env.len() as NodeId)
                .filter(|&n| self.env[n as usize].explored)
                .all(|n| self.env_signature(n) == self.env_signature(self.env_rep(n)))
    }

    /// Expands everything reachable from the initial node.
    pub fn build_all(&mut self) -> Result<(), ArenaError> {
        let mut queue = vec![self.initial()];
        while let Some(n) = queue.pop() {
            let n = self.env_rep(n);
            if self.env[n as usize].explored {
                continue;
            }
            let n = self.expand(n)?;
            for s in self.env_choices(n) {
                for (t, _, _) in self.sys_edges(s) {
                    if !self.env[t as usize].explored {
                        queue.push(t);
                    }
                }
            }
        }
        Ok(())
    }

    /// DOT rendering of the explored part.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph arena {\n");
        for n in self.env_nodes() {
            let shape = if self.env[n as usize].explored {
                "box"
            } else {
                "box,style=dashed"
            };
            let label = self
                .aut
                .master(self.env[n as usize].state)
                .to_string()
                .replace('"', "'");
            let _ = writeln!(out, "  e{n} [shape={shape},label=\"{label}\"];");
            if self.env[n as usize].explored {
                for s in self.env_choices(n) {
                    let _ = writeln!(out, "  e{n} -> s{s};");
                }
            }
        }
        for s in self.sys_nodes() {
            let _ = writeln!(out, "  s{s} [shape=circle,label=\"\"];");
            for (t, p, _) in self.sys_edges(s) {
                let _ = writeln!(out, "  s{s} -> e{t} [label=\"{p}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// The perspective player's own choices recorded so far.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    /// Ranked successors that have been opened, keyed by node: system nodes
    /// for the system perspective, environment nodes for the environment's.
    pub opened: FxHashMap<NodeId, Vec<NodeId>>,
}

/// Whether the arena is closed for `perspective`: starting from the initial
/// node and following only opened choices of the perspective player (and all
/// choices of the opponent), every reached node is explored or decided.
pub fn closed(a: &Arena, perspective: Player, sel: &Selection) -> bool {
    let mut seen_env = vec![false; a.env.len()];
    let mut seen_sys = vec![false; a.sys.len()];
    let mut stack = vec![a.initial()];
    let ok_target = |t: NodeId| a.decided(t).is_some() || a.is_explored(t);
    while let Some(n) = stack.pop() {
        let n = a.env_rep(n);
        if seen_env[n as usize] {
            continue;
        }
        seen_env[n as usize] = true;
        if a.decided(n).is_some() {
            continue;
        }
        if !a.env[n as usize].explored {
            return false;
        }
        let choices: Vec<NodeId> = match perspective {
            Player::Sys => a.env_choices(n),
            Player::Env => match sel.opened.get(&n) {
                Some(v) if !v.is_empty() => v.iter().map(|&s| a.sys_rep(s)).collect(),
                _ => return false,
            },
        };
        for s in choices {
            if seen_sys[s as usize] {
                continue;
            }
            seen_sys[s as usize] = true;
            let targets: Vec<NodeId> = match perspective {
                Player::Env => a.sys_edges(s).into_iter().map(|(t, _, _)| t).collect(),
                Player::Sys => match sel.opened.get(&s) {
                    Some(v) => {
                        let ok: Vec<NodeId> = v.iter().map(|&t| a.env_rep(t)).filter(|&t| ok_target(t)).collect();
                        if ok.is_empty() {
                            return false;
                        }
                        ok
                    }
                    None => return false,
                },
            };
            for t in targets {
                if !ok_target(t) {
                    return false;
                }
                stack.push(t);
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn arena(f: &str, env: &[&str], sys: &[&str], merging: bool) -> Arena {
        let p = Partition::from_names(env, sys).unwrap();
        Arena::new(&parse_ltl(f).unwrap(), &p, merging, 100_000).unwrap()
    }

    #[test]
    fn expansion_shape() {
        let mut a = arena("G (r -> F g)", &["r"], &["g"], false);
        let n = a.expand(a.initial()).unwrap();
        assert_eq!(a.env_node(n).succ.len(), 2);
        for &s in &a.env_node(n).succ {
            let letters: usize = a.sys_edges(s).iter().map(|e| e.2).sum();
            assert_eq!(letters, 2);
        }
        assert_eq!(a.sys_count(), 2);
    }

    #[test]
    fn terminal_true_loops_with_zero() {
        let mut a = arena("true", &["r"], &["g"], true);
        let n = a.expand(a.initial()).unwrap();
        for s in a.env_choices(n) {
            assert_eq!(a.sys_edges(s), vec![(n, 0, 2)]);
        }
    }

    #[test]
    fn identical_system_nodes_merge() {
        // the environment letter is irrelevant: both system nodes coincide
        let mut merged = arena("G F g", &["r"], &["g"], true);
        let n = merged.expand(merged.initial()).unwrap();
        assert_eq!(merged.env_choices(n).len(), 1);
        assert_eq!(merged.sys_count(), 1);
        let mut plain = arena("G F g", &["r"], &["g"], false);
        let n = plain.expand(plain.initial()).unwrap();
        assert_eq!(plain.env_choices(n).len(), 2);
        assert!(merged.check_signatures());
    }

    #[test]
    fn priorities_keep_nodes_apart() {
        let mut a = arena("G (r -> X g)", &["r"], &["g"], true);
        let n = a.expand(a.initial()).unwrap();
        assert_eq!(a.env_choices(n).len(), 2);
    }

    #[test]
    fn closure_needs_explored_initial() {
        let a = arena("G (r -> F g)", &["r"], &["g"], true);
        assert!(!closed(&a, Player::Sys, &Selection::default()));
    }

    #[test]
    fn closure_on_terminal() {
        let mut a = arena("true", &["r"], &["g"], true);
        let n = a.expand(a.initial()).unwrap();
        let mut sel = Selection::default();
        for s in a.env_choices(n) {
            sel.opened.insert(s, vec![n]);
        }
        assert!(closed(&a, Player::Sys, &sel));
    }
}
