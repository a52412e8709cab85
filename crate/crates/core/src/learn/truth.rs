//! Decayed edge ground truth: exact (solve, certainty cores, attractor
//! distance) and a Monte-Carlo tree search approximation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::arena::{Arena, ArenaError, NodeId, NEUTRAL};
use crate::featex::{EdgeCtx, Featurizer};
use crate::guide::{classify_state, StateClass};
use crate::ltl::{Formula, Partition};
use crate::psolve::{zielonka, Game, SolveError, SolveView, DEFAULT_CALL_BUDGET};
use crate::Player;

pub const DEFAULT_GAMMA: f64 = 0.9;

/// Winner and distance to the winner's certainty core, per game node.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub winner: Vec<Player>,
    pub dist: Vec<u32>,
}

impl Truth {
    /// Ground truth of any edge entering `v`.
    pub fn value(&self, v: u32, gamma: f64) -> f64 {
        let m = gamma.powi(self.dist[v as usize] as i32);
        match self.winner[v as usize] {
            Player::Sys => m,
            Player::Env => -m,
        }
    }
}

/// Strongly connected components of the subgraph given by `keep`
/// (node filter) and `edge_ok`; returns a component id per kept node.
fn sccs(game: &Game, keep: &[bool], edge_ok: &impl Fn(u32) -> bool) -> Vec<u32> {
    let n = game.len();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![u32::MAX; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    for root in 0..n as u32 {
        if !keep[root as usize] || index[root as usize] != u32::MAX {
            continue;
        }
        // explicit DFS: (node, next edge position)
        let mut work: Vec<(u32, usize)> = vec![(root, 0)];
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            let edges = game.edges(v);
            if *pos < edges.len() {
                let (w, p) = edges[*pos];
                *pos += 1;
                if !keep[w as usize] || !edge_ok(p) {
                    continue;
                }
                if index[w as usize] == u32::MAX {
                    index[w as usize] = counter;
                    low[w as usize] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    work.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                work.pop();
                if let Some(&(u, _)) = work.last() {
                    low[u as usize] = low[u as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w as usize] = false;
                        comp[w as usize] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Nodes of `region` lying on a cycle inside it whose least priority
/// favours `p`.
pub fn certainty_core(game: &Game, region: &[bool], p: Player) -> Vec<bool> {
    let n = game.len();
    let mut core = vec![false; n];
    let mut prios: Vec<u32> = (0..n as u32)
        .filter(|&v| region[v as usize])
        .flat_map(|v| game.edges(v).iter().filter(|e| region[e.0 as usize]).map(|e| e.1))
        .filter(|&c| c != NEUTRAL && Player::of_priority(c) == p)
        .collect();
    prios.sort_unstable();
    prios.dedup();
    for c in prios {
        let comp = sccs(game, region, &|q| q >= c);
        let mut hot = vec![false; n];
        for v in 0..n as u32 {
            if !region[v as usize] {
                continue;
            }
            for &(w, q) in game.edges(v) {
                if q == c && region[w as usize] && comp[v as usize] == comp[w as usize] {
                    hot[comp[v as usize] as usize] = true;
                }
            }
        }
        for v in 0..n {
            if region[v] && hot[comp[v] as usize] {
                core[v] = true;
            }
        }
    }
    core
}

/// Solves the game and measures attractor distance to each winner's core.
pub fn exact_truth(game: &Game, budget: usize) -> Result<Truth, SolveError> {
    let sol = zielonka(game, budget)?;
    let n = game.len();
    let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
    for v in 0..n as u32 {
        for &(w, _) in game.edges(v) {
            pred[w as usize].push(v);
        }
    }
    let mut dist = vec![u32::MAX; n];
    for p in [Player::Sys, Player::Env] {
        let region: Vec<bool> = sol.winner.iter().map(|&w| w == p).collect();
        let core = certainty_core(game, &region, p);
        let mut missing: Vec<usize> = (0..n as u32)
            .map(|v| game.edges(v).iter().filter(|e| region[e.0 as usize]).count())
            .collect();
        let mut queue = std::collections::VecDeque::new();
        for v in 0..n {
            if core[v] {
                dist[v] = 0;
                queue.push_back(v as u32);
            }
        }
        while let Some(w) = queue.pop_front() {
            for &u in &pred[w as usize] {
                let ui = u as usize;
                if !region[ui] || dist[ui] != u32::MAX {
                    continue;
                }
                if game.owner(u) == p {
                    dist[ui] = dist[w as usize] + 1;
                    queue.push_back(u);
                } else {
                    missing[ui] -= 1;
                    if missing[ui] == 0 {
                        dist[ui] = dist[w as usize] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
    }
    debug_assert!(dist.iter().all(|&d| d != u32::MAX), "cores attract whole regions");
    Ok(Truth {
        winner: sol.winner,
        dist,
    })
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// One decision of a player in a fully built arena, with per-edge truth.
#[derive(Clone, Debug)]
pub struct Decision {
    pub owner: Player,
    pub class: StateClass,
    /// Winner of the deciding node itself.
    pub winner: Player,
    pub edges: Vec<EdgeCtx>,
    pub gt: Vec<f64>,
    /// Game node ids of the deciding node and of the edge targets.
    pub source: u32,
    pub targets: Vec<u32>,
}

/// A fully built arena with its solve and per-node ground truth.
pub struct LabelledGame {
    pub arena: Arena,
    pub view: SolveView,
    pub truth: Truth,
    pub gamma: f64,
}

impl LabelledGame {
    pub fn build(f: &Formula, p: &Partition, max_nodes: usize, gamma: f64) -> Result<LabelledGame, LabelError> {
        let mut arena = Arena::new(f, p, true, max_nodes)?;
        arena.build_all()?;
        let view = SolveView::build(&arena, None);
        let truth = exact_truth(&view.game, DEFAULT_CALL_BUDGET)?;
        Ok(LabelledGame {
            arena,
            view,
            truth,
            gamma,
        })
    }

    pub fn env_value(&self, n: NodeId) -> f64 {
        self.truth
            .value(self.view.env_index[self.arena.env_rep(n) as usize], self.gamma)
    }

    pub fn sys_value(&self, s: NodeId) -> f64 {
        self.truth
            .value(self.view.sys_index[self.arena.sys_rep(s) as usize], self.gamma)
    }

    /// Every decision with at least two options, in arena order.
    pub fn decisions(&mut self, feat: &mut Featurizer) -> Vec<Decision> {
        let mut out = Vec::new();
        let env_nodes: Vec<NodeId> = self.arena.env_nodes().collect();
        for n in env_nodes {
            if self.arena.automaton().terminal(self.arena.env_node(n).state).is_some() {
                continue;
            }
            let choices = self.arena.env_choices(n);
            if choices.len() < 2 {
                continue;
            }
            let source = self.arena.env_node(n).state;
            let edges: Vec<EdgeCtx> = choices
                .iter()
                .map(|&s| EdgeCtx {
                    source,
                    ..crate::explore::choice_context(&self.arena, feat, s)
                })
                .collect();
            let class = classify_state(self.arena.automaton_mut(), source, Player::Env);
            out.push(Decision {
                owner: Player::Env,
                class,
                winner: self.truth.winner[self.view.env_index[n as usize] as usize],
                gt: choices.iter().map(|&s| self.sys_value(s)).collect(),
                source: self.view.env_index[n as usize],
                targets: choices.iter().map(|&s| self.view.sys_index[s as usize]).collect(),
                edges,
            });
        }
        let sys_nodes: Vec<NodeId> = self.arena.sys_nodes().collect();
        for s in sys_nodes {
            let targets = self.arena.sys_edges(s);
            if targets.len() < 2 {
                continue;
            }
            let edges = crate::explore::sys_edge_contexts(&self.arena, s);
            let class = classify_state(self.arena.automaton_mut(), edges[0].source, Player::Sys);
            out.push(Decision {
                owner: Player::Sys,
                class,
                winner: self.truth.winner[self.view.sys_index[s as usize] as usize],
                gt: targets.iter().map(|&(t, _, _)| self.env_value(t)).collect(),
                source: self.view.sys_index[s as usize],
                targets: targets
                    .iter()
                    .map(|&(t, _, _)| self.view.env_index[t as usize])
                    .collect(),
                edges,
            });
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MctsConfig {
    pub gamma: f64,
    /// Children this close to the best one stay on the critical path.
    pub epsilon: f64,
    /// Depth below which every child may be expanded.
    pub full_depth: u32,
    pub exploration: f64,
    pub iterations: usize,
    pub max_playout: usize,
    /// Probability of a uniform move in playouts; otherwise the owner takes
    /// its most favourable priority.
    pub playout_noise: f64,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            gamma: DEFAULT_GAMMA,
            epsilon: 0.1,
            full_depth: 8,
            exploration: 8.0,
            iterations: 10_000,
            max_playout: 1000,
            playout_noise: 0.1,
            seed: 0,
        }
    }
}

struct TreeNode {
    v: u32,
    parent: u32,
    in_prio: u32,
    depth: u32,
    children: Vec<u32>,
    visits: u32,
    value: f64,
    /// Closed a cycle on its path; the value is final.
    fixed: bool,
}

fn cycle_sign(min_prio: u32) -> f64 {
    match Player::of_priority(min_prio) {
        Player::Sys => 1.0,
        Player::Env => -1.0,
    }
}

/// Decayed tree search from `root`; returns the estimated ground truth of
/// each outgoing edge in `game.edges(root)` order.
pub fn mcts_edges(game: &Game, root: u32, cfg: &MctsConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (root as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut tree = vec![TreeNode {
        v: root,
        parent: u32::MAX,
        in_prio: NEUTRAL,
        depth: 0,
        children: Vec::new(),
        visits: 0,
        value: 0.0,
        fixed: false,
    }];
    // each root edge is valued as the play from its target, so the root
    // itself never closes a cycle
    let path_of = |tree: &[TreeNode], mut x: u32| {
        let mut out = Vec::new();
        while x != 0 {
            out.push(x);
            x = tree[x as usize].parent;
        }
        out.reverse();
        out
    };
    for _ in 0..cfg.iterations {
        let mut x = 0u32;
        let leaf = loop {
            let node = &tree[x as usize];
            if node.fixed {
                break x;
            }
            let succ = game.edges(node.v);
            if node.children.len() < succ.len() {
                let (w, p) = succ[node.children.len()];
                let path = path_of(&tree, x);
                let depth = node.depth + 1;
                let mut child = TreeNode {
                    v: w,
                    parent: x,
                    in_prio: p,
                    depth,
                    children: Vec::new(),
                    visits: 0,
                    value: 0.0,
                    fixed: false,
                };
                if let Some(i) = path.iter().position(|&y| tree[y as usize].v == w) {
                    let m = path[i + 1..]
                        .iter()
                        .map(|&y| tree[y as usize].in_prio)
                        .chain([p])
                        .min()
                        .unwrap();
                    child.value = cycle_sign(m);
                    child.fixed = true;
                } else {
                    let on_path: Vec<u32> = path.iter().map(|&y| tree[y as usize].v).collect();
                    child.value = playout(game, w, &on_path, &path, &tree, p, cfg, &mut rng);
                }
                let id = tree.len() as u32;
                tree.push(child);
                tree[x as usize].children.push(id);
                break id;
            }
            let owner = game.owner(node.v);
            let sign = if owner == Player::Sys { 1.0 } else { -1.0 };
            let best = node
                .children
                .iter()
                .map(|&c| sign * tree[c as usize].value)
                .fold(f64::NEG_INFINITY, f64::max);
            let ln_n = (node.visits.max(1) as f64).ln();
            let mut pick = None;
            let mut pick_score = f64::NEG_INFINITY;
            for &c in &node.children {
                let ch = &tree[c as usize];
                if node.depth >= cfg.full_depth && sign * ch.value < best - cfg.epsilon {
                    continue;
                }
                let score = sign * ch.value
                    + cfg.exploration * (ln_n / (ch.visits as f64 + 1.0)).sqrt()
                    + rng.gen::<f64>() * 1e-9;
                if score > pick_score {
                    pick_score = score;
                    pick = Some(c);
                }
            }
            x = pick.expect("some child is near the best");
        };
        // backup
        tree[leaf as usize].visits += 1;
        let mut y = tree[leaf as usize].parent;
        while y != u32::MAX {
            let node = &tree[y as usize];
            let vals = node.children.iter().map(|&c| tree[c as usize].value);
            let agg = if game.owner(node.v) == Player::Sys {
                vals.fold(f64::NEG_INFINITY, f64::max)
            } else {
                vals.fold(f64::INFINITY, f64::min)
            };
            let node = &mut tree[y as usize];
            node.value = (cfg.gamma * agg).clamp(-1.0, 1.0);
            node.visits += 1;
            y = node.parent;
        }
    }
    let root_children = &tree[0].children;
    (0..game.edges(root).len())
        .map(|i| root_children.get(i).map_or(0.0, |&c| tree[c as usize].value))
        .collect()
}

/// MCTS estimates for the edges of one decision, matched by target.
pub fn mcts_decision(game: &Game, d: &Decision, cfg: &MctsConfig) -> Vec<f64> {
    let est = mcts_edges(game, d.source, cfg);
    let edges = game.edges(d.source);
    d.targets
        .iter()
        .map(|&t| {
            let vals = edges.iter().zip(&est).filter(|(e, _)| e.0 == t).map(|(_, &x)| x);
            match d.owner {
                Player::Sys => vals.fold(f64::NEG_INFINITY, f64::max),
                Player::Env => vals.fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

/// Owner's favourite edge: its smallest own-parity priority, else the
/// largest priority; ties at random.
fn greedy_edge<'g>(game: &'g Game, v: u32, rng: &mut ChaCha8Rng) -> &'g (u32, u32) {
    let owner = game.owner(v);
    let rank = |p: u32| {
        if p != NEUTRAL && Player::of_priority(p) == owner {
            (0, p)
        } else {
            (1, u32::MAX - p)
        }
    };
    let edges = game.edges(v);
    let best = edges.iter().map(|e| rank(e.1)).min().expect("total game");
    let tied: Vec<&(u32, u32)> = edges.iter().filter(|e| rank(e.1) == best).collect();
    tied.choose(rng).expect("nonempty")
}

/// Random walk from `start` until a vertex repeats; the cycle's least
/// priority decides the sign, decayed by the steps before the cycle.
#[allow(clippy::too_many_arguments)]
fn playout(
    game: &Game,
    start: u32,
    tree_vertices: &[u32],
    tree_path: &[u32],
    tree: &[TreeNode],
    entry_prio: u32,
    cfg: &MctsConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut walk = vec![start];
    let mut prios: Vec<u32> = Vec::new();
    let mut pos: FxHashMap<u32, usize> = FxHashMap::default();
    pos.insert(start, 0);
    let mut v = start;
    for _ in 0..cfg.max_playout {
        let &(w, p) = if rng.gen::<f64>() < cfg.playout_noise {
            game.edges(v).choose(rng).expect("total game")
        } else {
            greedy_edge(game, v, rng)
        };
        prios.push(p);
        if let Some(&i) = pos.get(&w) {
            let m = prios[i..].iter().copied().min().unwrap();
            return cycle_sign(m) * cfg.gamma.powi(i as i32);
        }
        if let Some(j) = tree_vertices.iter().position(|&y| y == w) {
            let m = tree_path[j + 1..]
                .iter()
                .map(|&y| tree[y as usize].in_prio)
                .chain([entry_prio])
                .chain(prios.iter().copied())
                .min()
                .unwrap();
            return cycle_sign(m);
        }
        pos.insert(w, walk.len());
        walk.push(w);
        v = w;
    }
    0.0
}
