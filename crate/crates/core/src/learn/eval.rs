//! State-wise scores of a ranking against ground truth.

use std::collections::BTreeMap;

use super::truth::{Decision, LabelledGame};
use crate::featex::Featurizer;
use crate::guide::{Heuristic, StateClass};
use crate::Player;

/// Score of choosing edge `pick`, or `None` if the decision is excluded
/// (won by the opponent, or all truths equal).
pub fn decision_score(d: &Decision, pick: usize) -> Option<f64> {
    if d.winner != d.owner || d.gt.iter().all(|&g| g == d.gt[0]) {
        return None;
    }
    let best = match d.owner {
        Player::Sys => d.gt.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Player::Env => d.gt.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Some(d.gt[pick] / best)
}

/// Expected score of a uniformly random pick.
pub fn random_score(d: &Decision) -> Option<f64> {
    decision_score(d, 0)?;
    let n = d.gt.len() as f64;
    Some((0..d.gt.len()).filter_map(|i| decision_score(d, i)).sum::<f64>() / n)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassScores {
    pub mean: BTreeMap<StateClass, f64>,
    pub count: BTreeMap<StateClass, usize>,
}

fn collect(items: impl Iterator<Item = (StateClass, f64)>) -> ClassScores {
    let mut sum: BTreeMap<StateClass, f64> = BTreeMap::new();
    let mut out = ClassScores::default();
    for (c, s) in items {
        *sum.entry(c).or_default() += s;
        *out.count.entry(c).or_default() += 1;
    }
    for (c, s) in sum {
        out.mean.insert(c, s / out.count[&c] as f64);
    }
    out
}

/// Mean top-1 score per class of a heuristic.
pub fn state_score_eval(h: &mut dyn Heuristic, games: &mut [LabelledGame]) -> ClassScores {
    let mut items = Vec::new();
    for g in games.iter_mut() {
        let mut feat = Featurizer::new();
        for d in g.decisions(&mut feat) {
            let pick = h.rank(g.arena.automaton_mut(), &mut feat, d.owner, &d.edges)[0];
            if let Some(s) = decision_score(&d, pick) {
                items.push((d.class, s));
            }
        }
    }
    collect(items.into_iter())
}

/// Expected per-class score of uniformly random ranking.
pub fn random_eval(games: &mut [LabelledGame]) -> ClassScores {
    let mut items = Vec::new();
    for g in games.iter_mut() {
        let mut feat = Featurizer::new();
        for d in g.decisions(&mut feat) {
            if let Some(s) = random_score(&d) {
                items.push((d.class, s));
            }
        }
    }
    collect(items.into_iter())
}
