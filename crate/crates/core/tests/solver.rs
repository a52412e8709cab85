#![allow(clippy::needless_range_loop)]

use guidesynth::psolve::{zielonka, Game, DEFAULT_CALL_BUDGET};
use guidesynth::Player;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Spec {
    owners: Vec<bool>,
    edges: Vec<Vec<(u32, u32)>>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (2usize..7).prop_flat_map(|n| {
        let owners = proptest::collection::vec(any::<bool>(), n);
        let edges = proptest::collection::vec(proptest::collection::vec((0..n as u32, 0u32..6), 1..3), n);
        (owners, edges).prop_map(|(owners, edges)| Spec { owners, edges })
    })
}

fn build(s: &Spec, flip: bool) -> Game {
    let mut g = Game::new();
    for &o in &s.owners {
        let sys = o ^ flip;
        g.add_node(if sys { Player::Sys } else { Player::Env });
    }
    for (u, es) in s.edges.iter().enumerate() {
        for &(v, p) in es {
            g.add_edge(u as u32, v, p + u32::from(flip));
        }
    }
    g
}

/// Does the environment reach a cycle whose least priority is odd, when the
/// system is fixed to `choice`?
fn env_escapes(s: &Spec, choice: &[usize], from: usize) -> bool {
    let n = s.owners.len();
    let edges_of = |u: usize| -> Vec<(usize, u32)> {
        if s.owners[u] {
            let (v, p) = s.edges[u][choice[u]];
            vec![(v as usize, p)]
        } else {
            s.edges[u].iter().map(|&(v, p)| (v as usize, p)).collect()
        }
    };
    let mut reach = vec![false; n];
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if std::mem::replace(&mut reach[u], true) {
            continue;
        }
        stack.extend(edges_of(u).into_iter().map(|e| e.0));
    }
    for q in (1..6).step_by(2) {
        // a reachable cycle using a q-edge and only edges of priority >= q
        for u in 0..n {
            if !reach[u] {
                continue;
            }
            for (v, p) in edges_of(u) {
                if p != q {
                    continue;
                }
                let mut seen = vec![false; n];
                let mut st = vec![v];
                while let Some(x) = st.pop() {
                    if x == u {
                        return true;
                    }
                    if std::mem::replace(&mut seen[x], true) {
                        continue;
                    }
                    st.extend(edges_of(x).into_iter().filter(|e| e.1 >= q).map(|e| e.0));
                }
            }
        }
    }
    false
}

fn brute_force(s: &Spec) -> Vec<Player> {
    let n = s.owners.len();
    let mut winner = vec![Player::Env; n];
    let degrees: Vec<usize> = (0..n).map(|u| if s.owners[u] { s.edges[u].len() } else { 1 }).collect();
    let total: usize = degrees.iter().product();
    for code in 0..total {
        let mut c = code;
        let choice: Vec<usize> = degrees
            .iter()
            .map(|&d| {
                let x = c % d;
                c /= d;
                x
            })
            .collect();
        for v in 0..n {
            if winner[v] == Player::Env && !env_escapes(s, &choice, v) {
                winner[v] = Player::Sys;
            }
        }
    }
    winner
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn agrees_with_positional_brute_force(s in spec()) {
        let sol = zielonka(&build(&s, false), DEFAULT_CALL_BUDGET).unwrap();
        prop_assert_eq!(sol.winner, brute_force(&s));
    }

    #[test]
    fn dual_game_swaps_regions(s in spec()) {
        let a = zielonka(&build(&s, false), DEFAULT_CALL_BUDGET).unwrap();
        let b = zielonka(&build(&s, true), DEFAULT_CALL_BUDGET).unwrap();
        for (x, y) in a.winner.iter().zip(&b.winner) {
            prop_assert_eq!(*x, y.opponent());
        }
    }
}
