//! Recursive attractor decomposition for min-parity games with priorities on
//! edges.

use thiserror::Error;

use crate::Player;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("solver exceeded its budget of {0} recursive calls")]
    Budget(usize),
}

/// Explicit game graph. Every node needs at least one outgoing edge.
#[derive(Clone, Debug, Default)]
pub struct Game {
    owner: Vec<Player>,
    succ: Vec<Vec<(u32, u32)>>,
    pred: Vec<Vec<(u32, u32)>>,
}

impl Game {
    pub fn new() -> Self {
        Game::default()
    }

    pub fn add_node(&mut self, owner: Player) -> u32 {
        self.owner.push(owner);
        self.succ.push(Vec::new());
        self.pred.push(Vec::new());
        (self.owner.len() - 1) as u32
    }

    pub fn add_edge(&mut self, from: u32, to: u32, priority: u32) {
        self.succ[from as usize].push((to, priority));
        self.pred[to as usize].push((from, priority));
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    pub fn owner(&self, v: u32) -> Player {
        self.owner[v as usize]
    }

    pub fn edges(&self, v: u32) -> &[(u32, u32)] {
        &self.succ[v as usize]
    }
}

/// Winner of every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub winner: Vec<Player>,
}

impl Solution {
    pub fn region(&self, p: Player) -> Vec<u32> {
        (0..self.winner.len() as u32)
            .filter(|&v| self.winner[v as usize] == p)
            .collect()
    }
}

pub const DEFAULT_CALL_BUDGET: usize = 1_000_000;

struct Solver<'a> {
    game: &'a Game,
    calls: usize,
    budget: usize,
    count: Vec<u32>,
}

/// Solves the whole game.
pub fn zielonka(game: &Game, budget: usize) -> Result<Solution, SolveError> {
    let mut s = Solver {
        game,
        calls: 0,
        budget,
        count: vec![0; game.len()],
    };
    let all: Vec<u32> = (0..game.len() as u32).collect();
    let mut member = vec![false; game.len()];
    all.iter().for_each(|&v| member[v as usize] = true);
    let (w_sys, _) = s.solve(&all, &mut member, 0)?;
    let mut winner = vec![Player::Env; game.len()];
    for v in w_sys {
        winner[v as usize] = Player::Sys;
    }
    Ok(Solution { winner })
}

impl Solver<'_> {
    /// Edges of `v` inside the subgame.
    fn inside<'b>(&'b self, v: u32, member: &'b [bool], minp: u32) -> impl Iterator<Item = (u32, u32)> + 'b {
        self.game.succ[v as usize]
            .iter()
            .copied()
            .filter(move |&(w, p)| p >= minp && member[w as usize])
    }

    /// Nodes of the subgame from which `player` forces a visit to `target`
    /// or an edge of priority `hot`.
    fn attractor(
        &mut self,
        nodes: &[u32],
        member: &[bool],
        minp: u32,
        player: Player,
        target: &[bool],
        hot: Option<u32>,
    ) -> Vec<bool> {
        let n = self.game.len();
        let mut attr = vec![false; n];
        let mut queue = Vec::new();
        for &v in nodes {
            if target[v as usize] {
                attr[v as usize] = true;
                queue.push(v);
                continue;
            }
            let mut good = 0;
            let mut bad = 0;
            for (w, p) in self.inside(v, member, minp) {
                if Some(p) == hot || target[w as usize] {
                    good += 1;
                } else {
                    bad += 1;
                }
            }
            let owned = self.game.owner[v as usize] == player;
            if (owned && good > 0) || (!owned && bad == 0) {
                attr[v as usize] = true;
                queue.push(v);
            } else {
                self.count[v as usize] = bad;
            }
        }
        while let Some(w) = queue.pop() {
            for &(u, p) in &self.game.pred[w as usize] {
                let ui = u as usize;
                if !member[ui] || attr[ui] || p < minp || Some(p) == hot || target[w as usize] {
                    continue;
                }
                if self.game.owner[ui] == player {
                    attr[ui] = true;
                    queue.push(u);
                } else {
                    self.count[ui] -= 1;
                    if self.count[ui] == 0 {
                        attr[ui] = true;
                        queue.push(u);
                    }
                }
            }
        }
        attr
    }

    /// Returns (system region, environment region) of the subgame. Recursion
    /// depth is bounded by the number of distinct priorities; the second
    /// recursive call of the textbook algorithm is a loop.
    fn solve(&mut self, nodes: &[u32], member: &mut Vec<bool>, minp: u32) -> Result<(Vec<u32>, Vec<u32>), SolveError> {
        let mut nodes = nodes.to_vec();
        let mut removed: Vec<u32> = Vec::new();
        let mut won = [Vec::new(), Vec::new()];
        let result = loop {
            if nodes.is_empty() {
                break Ok(());
            }
            self.calls += 1;
            if self.calls > self.budget {
                break Err(SolveError::Budget(self.budget));
            }
            let p = nodes
                .iter()
                .flat_map(|&v| self.inside(v, member, minp).map(|(_, p)| p))
                .min()
                .expect("every node keeps an edge");
            let alpha = Player::of_priority(p);
            let none = vec![false; self.game.len()];
            let a = self.attractor(&nodes, member, minp, alpha, &none, Some(p));
            let rest: Vec<u32> = nodes.iter().copied().filter(|&v| !a[v as usize]).collect();
            for &v in &nodes {
                member[v as usize] = !a[v as usize];
            }
            let sub = self.solve(&rest, member, p + 1);
            for &v in &nodes {
                member[v as usize] = true;
            }
            let (ws, we) = match sub {
                Ok(r) => r,
                Err(e) => break Err(e),
            };
            let w_opp = if alpha == Player::Sys { we } else { ws };
            if w_opp.is_empty() {
                won[alpha.index()].extend(nodes.iter().copied());
                break Ok(());
            }
            let mut seed = vec![false; self.game.len()];
            w_opp.iter().for_each(|&v| seed[v as usize] = true);
            let b = self.attractor(&nodes, member, minp, alpha.opponent(), &seed, None);
            let mut keep = Vec::with_capacity(nodes.len());
            for &v in &nodes {
                if b[v as usize] {
                    won[alpha.opponent().index()].push(v);
                    member[v as usize] = false;
                    removed.push(v);
                } else {
                    keep.push(v);
                }
            }
            nodes = keep;
        };
        for v in removed {
            member[v as usize] = true;
        }
        result?;
        let [mut we, mut ws] = won;
        ws.sort_unstable();
        we.sort_unstable();
        Ok((ws, we))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(g: &Game) -> Vec<Player> {
        zielonka(g, DEFAULT_CALL_BUDGET).unwrap().winner
    }

    #[test]
    fn single_loops() {
        let mut g = Game::new();
        let v = g.add_node(Player::Env);
        g.add_edge(v, v, 0);
        assert_eq!(solve(&g), vec![Player::Sys]);
        let mut g = Game::new();
        let v = g.add_node(Player::Sys);
        g.add_edge(v, v, 1);
        assert_eq!(solve(&g), vec![Player::Env]);
    }

    #[test]
    fn choice_between_loops() {
        // system picks the even loop, environment the odd one
        for (owner, win) in [(Player::Sys, Player::Sys), (Player::Env, Player::Env)] {
            let mut g = Game::new();
            let v = g.add_node(owner);
            let a = g.add_node(Player::Sys);
            let b = g.add_node(Player::Sys);
            g.add_edge(v, a, 5);
            g.add_edge(v, b, 5);
            g.add_edge(a, a, 2);
            g.add_edge(b, b, 3);
            assert_eq!(solve(&g)[v as usize], win);
        }
    }

    #[test]
    fn edge_priority_on_cycle() {
        // two-node cycle: the smaller edge priority decides
        let mut g = Game::new();
        let u = g.add_node(Player::Sys);
        let v = g.add_node(Player::Env);
        g.add_edge(u, v, 3);
        g.add_edge(v, u, 4);
        assert_eq!(solve(&g), vec![Player::Env, Player::Env]);
        let mut g = Game::new();
        let u = g.add_node(Player::Sys);
        let v = g.add_node(Player::Env);
        g.add_edge(u, v, 6);
        g.add_edge(v, u, 4);
        g.add_edge(v, v, 1);
        assert_eq!(solve(&g), vec![Player::Env, Player::Env]);
    }

    #[test]
    fn budget_is_enforced() {
        let mut g = Game::new();
        let v = g.add_node(Player::Sys);
        g.add_edge(v, v, 0);
        assert_eq!(zielonka(&g, 0), Err(SolveError::Budget(0)));
    }
}
