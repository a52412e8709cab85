//! Edge ranking: the trueness baseline and the learned pairwise ranker.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autlab::{Automaton, StateId};
use crate::featex::{Aggregation, Base, EdgeCtx, FeatureSpec, Featurizer};
use crate::Player;

/// Edge counts above this use the pivot scheme.
pub const FULL_ROUND_MAX: usize = 16;
/// Edges kept for the second round of the pivot scheme.
pub const PIVOT_TOP: usize = 8;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateClass {
    pub owner: Player,
    /// At most one live acceptance pair.
    pub trivial: bool,
}

impl StateClass {
    pub const ALL: [StateClass; 4] = [
        StateClass {
            owner: Player::Env,
            trivial: false,
        },
        StateClass {
            owner: Player::Env,
            trivial: true,
        },
        StateClass {
            owner: Player::Sys,
            trivial: false,
        },
        StateClass {
            owner: Player::Sys,
            trivial: true,
        },
    ];

    pub fn name(self) -> &'static str {
        match (self.owner, self.trivial) {
            (Player::Env, false) => "env0",
            (Player::Env, true) => "env1",
            (Player::Sys, false) => "sys0",
            (Player::Sys, true) => "sys1",
        }
    }

    pub fn from_name(s: &str) -> Option<StateClass> {
        StateClass::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn classify_state(aut: &mut Automaton, s: StateId, owner: Player) -> StateClass {
    StateClass {
        owner,
        trivial: aut.live_pairs(s).len() <= 1,
    }
}

/// Trueness order for the owner, then even (system) or odd (environment)
/// priority first, then the canonical edge key.
pub fn rank_baseline(aut: &Automaton, feat: &mut Featurizer, owner: Player, edges: &[EdgeCtx]) -> Vec<usize> {
    let t: Vec<f64> = edges
        .iter()
        .map(|e| feat.state_value(aut, Base::Trueness, Aggregation::MasterOnly, e.target))
        .collect();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&i, &j| {
        let by_truth = match owner {
            Player::Sys => t[j].total_cmp(&t[i]),
            Player::Env => t[i].total_cmp(&t[j]),
        };
        let favoured = |e: &EdgeCtx| Player::of_priority(e.priority) != owner;
        by_truth
            .then_with(|| favoured(&edges[i]).cmp(&favoured(&edges[j])))
            .then_with(|| edges[i].key.cmp(&edges[j].key))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tree {
    Leaf(f64),
    Split {
        #[serde(rename = "featureIndex")]
        feature_index: usize,
        threshold: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut t = self;
        loop {
            match t {
                Tree::Leaf(v) => return *v,
                Tree::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => t = if x[*feature_index] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassModel {
    pub feature_specs: Vec<FeatureSpec>,
    pub trees: Vec<Tree>,
    pub base_score: f64,
}

impl ClassModel {
    /// Raw margin for "a beats b" on pair input `(a, b, a - b)`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn pair_input(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * a.len());
        x.extend_from_slice(a);
        x.extend_from_slice(b);
        x.extend(a.iter().zip(b).map(|(p, q)| p - q));
        x
    }

    /// Antisymmetrized confidence that `a` ranks above `b`.
    pub fn compare(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.margin(&Self::pair_input(a, b)) - self.margin(&Self::pair_input(b, a))) / 2.0
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("model file lacks class {0}")]
    MissingClass(&'static str),
    #[error("class {class}: tree reads feature {index} but the input has {width}")]
    FeatureIndex { class: String, index: usize, width: usize },
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairModel {
    pub version: u32,
    pub classes: BTreeMap<String, ClassModel>,
    #[serde(default)]
    pub training_meta: serde_json::Value,
}

impl PairModel {
    pub fn class(&self, c: StateClass) -> &ClassModel {
        &self.classes[c.name()]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for c in StateClass::ALL {
            let m = self.classes.get(c.name()).ok_or(ModelError::MissingClass(c.name()))?;
            let width = 3 * m.feature_specs.len();
            fn max_index(t: &Tree) -> Option<usize> {
                match t {
                    Tree::Leaf(_) => None,
                    Tree::Split {
                        feature_index,
                        left,
                        right,
                        ..
                    } => [Some(*feature_index), max_index(left), max_index(right)]
                        .into_iter()
                        .flatten()
                        .max(),
                }
            }
            if let Some(index) = m.trees.iter().filter_map(max_index).max().filter(|&i| i >= width) {
                return Err(ModelError::FeatureIndex {
                    class: c.name().to_string(),
                    index,
                    width,
                });
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<PairModel, ModelError> {
        let m: PairModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn load(path: &Path) -> Result<PairModel, ModelError> {
        PairModel::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// The model shipped with the library.
    pub fn builtin() -> PairModel {
        PairModel::from_json(include_str!("../data/default_model.json")).expect("bundled model is valid")
    }
}

fn sum_scores(cm: &ClassModel, rows: &[Vec<f64>], members: &[usize], against: &[usize], calls: &mut usize) -> Vec<f64> {
    members
        .iter()
        .map(|&i| {
            against
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    *calls += 1;
                    cm.compare(&rows[i], &rows[j])
                })
                .sum()
        })
        .collect()
}

/// Sorts `members` by descending score, ties by position in `anchor`.
fn order_by(members: &[usize], scores: &[f64], anchor: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; anchor.len()];
    for (r, &i) in anchor.iter().enumerate() {
        pos[i] = r;
    }
    let mut idx: Vec<usize> = (0..members.len()).collect();
    idx.sort_by(|&x, &y| match scores[y].total_cmp(&scores[x]) {
        Ordering::Equal => pos[members[x]].cmp(&pos[members[y]]),
        o => o,
    });
    idx.into_iter().map(|x| members[x]).collect()
}

/// Ranks by summed pairwise confidence for the owner; returns the order and
/// the number of comparisons made.
pub fn rank_model(
    m: &PairModel,
    aut: &mut Automaton,
    feat: &mut Featurizer,
    owner: Player,
    edges: &[EdgeCtx],
) -> (Vec<usize>, usize) {
    let baseline = rank_baseline(aut, feat, owner, edges);
    let n = edges.len();
    if n <= 1 {
        return (baseline, 0);
    }
    let class = classify_state(aut, edges[0].source, owner);
    let cm = m.class(class);
    let rows = feat.edge_matrix(aut, &cm.feature_specs, edges);
    // comparisons are on the system's scale; the environment wants the low end
    let sign = if owner == Player::Sys { 1.0 } else { -1.0 };
    let mut calls = 0;
    let all: Vec<usize> = (0..n).collect();
    if n <= FULL_ROUND_MAX {
        // summing in baseline order keeps scores independent of input order
        let s: Vec<f64> = sum_scores(cm, &rows, &all, &baseline, &mut calls)
            .into_iter()
            .map(|v| sign * v)
            .collect();
        return (order_by(&all, &s, &baseline), calls);
    }
    let mut pivots: Vec<usize> = [0, n / 3, 2 * n / 3, n - 1].iter().map(|&r| baseline[r]).collect();
    pivots.dedup();
    let first: Vec<f64> = sum_scores(cm, &rows, &all, &pivots, &mut calls)
        .into_iter()
        .map(|v| sign * v)
        .collect();
    let guess = order_by(&all, &first, &baseline);
    let top: Vec<usize> = guess[..PIVOT_TOP].to_vec();
    let second: Vec<f64> = sum_scores(cm, &rows, &top, &top, &mut calls)
        .into_iter()
        .map(|v| sign * v)
        .collect();
    let mut out = order_by(&top, &second, &guess);
    out.extend_from_slice(&guess[PIVOT_TOP..]);
    (out, calls)
}

/// Orders the edges of one decision point, best first for `owner`. All
/// edges share their source state.
pub trait Heuristic {
    fn name(&self) -> String;
    fn rank(&mut self, aut: &mut Automaton, feat: &mut Featurizer, owner: Player, edges: &[EdgeCtx]) -> Vec<usize>;
}

pub struct Baseline;

impl Heuristic for Baseline {
    fn name(&self) -> String {
        "baseline".into()
    }

    fn rank(&mut self, aut: &mut Automaton, feat: &mut Featurizer, owner: Player, edges: &[EdgeCtx]) -> Vec<usize> {
        rank_baseline(aut, feat, owner, edges)
    }
}

/// Baseline order reversed; the worst sensible guidance.
pub struct Reverse;

impl Heuristic for Reverse {
    fn name(&self) -> String {
        "reverse".into()
    }

    fn rank(&mut self, aut: &mut Automaton, feat: &mut Featurizer, owner: Player, edges: &[EdgeCtx]) -> Vec<usize> {
        let mut r = rank_baseline(aut, feat, owner, edges);
        r.reverse();
        r
    }
}

pub struct RandomOrder {
    rng: ChaCha8Rng,
}

impl RandomOrder {
    pub fn new(seed: u64) -> Self {
        RandomOrder {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Heuristic for RandomOrder {
    fn name(&self) -> String {
        "random".into()
    }

    fn rank(&mut self, _: &mut Automaton, _: &mut Featurizer, _: Player, edges: &[EdgeCtx]) -> Vec<usize> {
        let mut r: Vec<usize> = (0..edges.len()).collect();
        r.shuffle(&mut self.rng);
        r
    }
}

pub struct Model {
    pub model: std::sync::Arc<PairModel>,
    pub comparisons: usize,
}

impl Model {
    pub fn new(model: std::sync::Arc<PairModel>) -> Self {
        Model { model, comparisons: 0 }
    }
}

impl Heuristic for Model {
    fn name(&self) -> String {
        "model".into()
    }

    fn rank(&mut self, aut: &mut Automaton, feat: &mut Featurizer, owner: Player, edges: &[EdgeCtx]) -> Vec<usize> {
        let (order, calls) = rank_model(&self.model, aut, feat, owner, edges);
        self.comparisons += calls;
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{parse_ltl, Partition};

    fn edges_over(aut: &mut Automaton) -> Vec<EdgeCtx> {
        let p = aut.partition().clone();
        let mut out = Vec::new();
        for l in p.all_letters() {
            let (t, pr) = aut.successor(0, l);
            out.push(EdgeCtx {
                source: 0,
                target: t,
                priority: pr,
                key: (t, pr, l.0),
            });
        }
        out
    }

    #[test]
    fn class_names() {
        let p = Partition::from_names(&["a"], &["b"]).unwrap();
        let mut one = Automaton::new(&parse_ltl("G F a").unwrap(), &p).unwrap();
        assert_eq!(classify_state(&mut one, 0, Player::Sys).name(), "sys1");
        let mut two = Automaton::new(&parse_ltl("G F a | F G b").unwrap(), &p).unwrap();
        assert_eq!(classify_state(&mut two, 0, Player::Env).name(), "env0");
        let mut t = Automaton::new(&parse_ltl("true").unwrap(), &p).unwrap();
        assert_eq!(classify_state(&mut t, 0, Player::Env).name(), "env1");
    }

    #[test]
    fn baseline_follows_owner() {
        let p = Partition::from_names(&["a"], &["b"]).unwrap();
        let mut aut = Automaton::new(&parse_ltl("G b | (a & X F a)").unwrap(), &p).unwrap();
        let edges = edges_over(&mut aut);
        let mut fx = Featurizer::new();
        let t = |fx: &mut Featurizer, aut: &Automaton, i: usize| {
            fx.state_value(aut, Base::Trueness, Aggregation::MasterOnly, edges[i].target)
        };
        let sys = rank_baseline(&aut, &mut fx, Player::Sys, &edges);
        let env = rank_baseline(&aut, &mut fx, Player::Env, &edges);
        assert!(t(&mut fx, &aut, sys[0]) >= t(&mut fx, &aut, *sys.last().unwrap()));
        assert!(t(&mut fx, &aut, env[0]) <= t(&mut fx, &aut, *env.last().unwrap()));
    }

    #[test]
    fn baseline_prefers_even_on_ties() {
        let p = Partition::from_names::<&str>(&[], &["b"]).unwrap();
        let aut = Automaton::new(&parse_ltl("G F b").unwrap(), &p).unwrap();
        let e = |priority, letter| EdgeCtx {
            source: 0,
            target: 0,
            priority,
            key: (0, priority, letter),
        };
        let edges = [e(1, 0), e(2, 1)];
        let mut fx = Featurizer::new();
        assert_eq!(rank_baseline(&aut, &mut fx, Player::Sys, &edges), vec![1, 0]);
        assert_eq!(rank_baseline(&aut, &mut fx, Player::Env, &edges), vec![0, 1]);
    }

    #[test]
    fn tree_json_shape() {
        let t = Tree::Split {
            feature_index: 2,
            threshold: 0.5,
            left: Box::new(Tree::Leaf(-1.0)),
            right: Box::new(Tree::Leaf(0.25)),
        };
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"featureIndex":2,"threshold":0.5,"left":-1.0,"right":0.25}"#);
        assert_eq!(serde_json::from_str::<Tree>(&s).unwrap(), t);
        assert_eq!(t.predict(&[0.0, 0.0, 0.5]), -1.0);
        assert_eq!(t.predict(&[0.0, 0.0, 0.6]), 0.25);
    }

    #[test]
    fn builtin_model_loads() {
        let m = PairModel::builtin();
        assert_eq!(m.version, MODEL_VERSION);
        assert_eq!(PairModel::from_json(&m.to_json()).unwrap(), m);
    }
}
