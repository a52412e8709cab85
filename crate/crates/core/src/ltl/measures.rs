//! Numeric formula measures used as features: trueness, quantified trueness,
//! controllability and syntactic counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use super::alphabet::Partition;
use super::formula::{Formula, Kind, Var};
use crate::Player;

/// Above this many abstracted variables trueness is estimated by sampling.
pub const EXACT_VAR_CAP: usize = 20;
pub const SAMPLE_COUNT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("abstraction has {0} variables, more than the supported 63")]
    TooManyVars(usize),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    Forall,
    Exists,
}

/// Propositional skeleton of a formula: maximal temporal subformulas become
/// fresh variables.
enum Skel {
    Const(bool),
    Var(usize, bool),
    And(Vec<Skel>),
    Or(Vec<Skel>),
}

impl Skel {
    fn eval(&self, assignment: u64) -> bool {
        match self {
            Skel::Const(b) => *b,
            Skel::Var(i, pos) => (assignment >> i & 1 == 1) == *pos,
            Skel::And(cs) => cs.iter().all(|c| c.eval(assignment)),
            Skel::Or(cs) => cs.iter().any(|c| c.eval(assignment)),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Prop(Var),
    Temporal(u32),
}

struct Abstraction {
    skel: Skel,
    slots: Vec<Slot>,
}

fn abstract_formula(f: &Formula) -> Abstraction {
    fn go(f: &Formula, slots: &mut Vec<Slot>, index: &mut FxHashMap<Slot, usize>) -> Skel {
        let mut slot = |s: Slot, slots: &mut Vec<Slot>| -> usize {
            *index.entry(s).or_insert_with(|| {
                slots.push(s);
                slots.len() - 1
            })
        };
        match f.kind() {
            Kind::True => Skel::Const(true),
            Kind::False => Skel::Const(false),
            Kind::Atom(v) => Skel::Var(slot(Slot::Prop(*v), slots), true),
            Kind::NegAtom(v) => Skel::Var(slot(Slot::Prop(*v), slots), false),
            Kind::And(cs) => Skel::And(cs.iter().map(|c| go(c, slots, index)).collect()),
            Kind::Or(cs) => Skel::Or(cs.iter().map(|c| go(c, slots, index)).collect()),
            _ => Skel::Var(slot(Slot::Temporal(f.id()), slots), true),
        }
    }
    let mut slots = Vec::new();
    let skel = go(f, &mut slots, &mut FxHashMap::default());
    Abstraction { skel, slots }
}

fn seeded_rng(f: &Formula) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(f.structural_hash())
}

/// Fraction of satisfying assignments of the propositional abstraction.
pub fn trueness(f: &Formula) -> Result<f64, MeasureError> {
    if f.is_true() {
        return Ok(1.0);
    }
    if f.is_false() {
        return Ok(0.0);
    }
    let abs = abstract_formula(f);
    let n = abs.slots.len();
    if n > 63 {
        return Err(MeasureError::TooManyVars(n));
    }
    if n <= EXACT_VAR_CAP {
        let total = 1u64 << n;
        let sat = (0..total).filter(|&a| abs.skel.eval(a)).count();
        Ok(sat as f64 / total as f64)
    } else {
        let mut rng = seeded_rng(f);
        let mask = (1u64 << n) - 1;
        let sat = (0..SAMPLE_COUNT)
            .filter(|_| abs.skel.eval(rng.gen::<u64>() & mask))
            .count();
        Ok(sat as f64 / SAMPLE_COUNT as f64)
    }
}

/// Trueness where an assignment of the owner's variables counts only if the
/// formula holds for all (or some) assignments of the opponent's variables.
/// Temporal placeholders and unpartitioned atoms belong to the owner.
pub fn quantified_trueness(f: &Formula, p: &Partition, owner: Player, q: Quantifier) -> Result<f64, MeasureError> {
    if f.is_constant() {
        return Ok(if f.is_true() { 1.0 } else { 0.0 });
    }
    let abs = abstract_formula(f);
    let n = abs.slots.len();
    if n > 63 {
        return Err(MeasureError::TooManyVars(n));
    }
    let (mut own, mut opp) = (Vec::new(), Vec::new());
    for (i, s) in abs.slots.iter().enumerate() {
        match s {
            Slot::Prop(v) if p.owner(*v) == Some(owner.opponent()) => opp.push(i),
            _ => own.push(i),
        }
    }
    let spread = |bits: u64, positions: &[usize]| -> u64 {
        positions
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &pos)| acc | ((bits >> j & 1) << pos))
    };
    let mut rng = seeded_rng(f);
    let check = |own_bits: u64, rng: &mut ChaCha8Rng| -> bool {
        let base = spread(own_bits, &own);
        let mut opp_assignments: Box<dyn Iterator<Item = u64>> = if opp.len() <= 12 {
            Box::new(0..(1u64 << opp.len()))
        } else {
            let draws: Vec<u64> = (0..64).map(|_| rng.gen::<u64>()).collect();
            Box::new(draws.into_iter())
        };
        match q {
            Quantifier::Forall => opp_assignments.all(|b| abs.skel.eval(base | spread(b, &opp))),
            Quantifier::Exists => opp_assignments.any(|b| abs.skel.eval(base | spread(b, &opp))),
        }
    };
    if n <= EXACT_VAR_CAP {
        let total = 1u64 << own.len();
        let good = (0..total).filter(|&b| check(b, &mut rng)).count();
        Ok(good as f64 / total as f64)
    } else {
        let mask = if own.len() >= 64 {
            u64::MAX
        } else {
            (1u64 << own.len()) - 1
        };
        let mut good = 0;
        for _ in 0..SAMPLE_COUNT {
            let b = rng.gen::<u64>() & mask;
            if check(b, &mut rng) {
                good += 1;
            }
        }
        Ok(good as f64 / SAMPLE_COUNT as f64)
    }
}

/// Inductive controllability: owned literals score 1, opponent literals 0,
/// unary operators pass through, n-ary and binary operators average.
pub fn controllability(f: &Formula, p: &Partition, owner: Player) -> f64 {
    fn go(f: &Formula, p: &Partition, owner: Player, memo: &mut FxHashMap<u32, f64>) -> f64 {
        if let Some(&v) = memo.get(&f.id()) {
            return v;
        }
        let r = match f.kind() {
            Kind::True | Kind::False => 1.0,
            Kind::Atom(v) | Kind::NegAtom(v) => match p.owner(*v) {
                Some(o) if o == owner => 1.0,
                Some(_) => 0.0,
                None => 0.5,
            },
            Kind::Next(a) | Kind::Finally(a) | Kind::Globally(a) => go(a, p, owner, memo),
            Kind::Until(a, b) | Kind::Release(a, b) => (go(a, p, owner, memo) + go(b, p, owner, memo)) / 2.0,
            Kind::And(cs) | Kind::Or(cs) => cs.iter().map(|c| go(c, p, owner, memo)).sum::<f64>() / cs.len() as f64,
        };
        memo.insert(f.id(), r);
        r
    }
    go(f, p, owner, &mut FxHashMap::default())
}

/// Syntactic counts over the formula read as a tree.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SyntacticMeasures {
    pub temporal_ops: f64,
    pub height: f64,
    pub size: f64,
    pub top_disjuncts: f64,
}

pub fn syntactic_measures(f: &Formula) -> SyntacticMeasures {
    // (temporal ops, height, size) per node, shared subtrees counted per occurrence
    fn go(f: &Formula, memo: &mut FxHashMap<u32, (f64, f64, f64)>) -> (f64, f64, f64) {
        if let Some(&r) = memo.get(&f.id()) {
            return r;
        }
        let children = f.children();
        let mut temporal = if f.is_temporal() { 1.0 } else { 0.0 };
        let mut height: f64 = 0.0;
        let mut size = 1.0;
        for c in &children {
            let (t, h, s) = go(c, memo);
            temporal += t;
            height = height.max(h + 1.0);
            size += s;
        }
        let r = (temporal, height, size);
        memo.insert(f.id(), r);
        r
    }
    let (temporal_ops, height, size) = go(f, &mut FxHashMap::default());
    let top_disjuncts = match f.kind() {
        Kind::Or(cs) => cs.len() as f64,
        _ => 1.0,
    };
    SyntacticMeasures {
        temporal_ops,
        height,
        size,
        top_disjuncts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn p(s: &str) -> Formula {
        parse_ltl(s).unwrap()
    }

    fn part() -> Partition {
        Partition::from_names(&["e"], &["a"]).unwrap()
    }

    #[test]
    fn trueness_examples() {
        assert_eq!(trueness(&p("true")).unwrap(), 1.0);
        assert_eq!(trueness(&p("a & b")).unwrap(), 0.25);
        assert_eq!(trueness(&p("a | G F b")).unwrap(), 0.75);
    }

    #[test]
    fn trueness_estimate_is_deterministic() {
        let big = (0..24).map(|i| format!("x{i}")).collect::<Vec<_>>().join(" | ");
        let f = p(&big);
        let t = trueness(&f).unwrap();
        assert_eq!(t, trueness(&f).unwrap());
        assert!(t > 0.99);
    }

    #[test]
    fn quantified_examples() {
        let pt = part();
        assert_eq!(
            quantified_trueness(&p("a"), &pt, Player::Sys, Quantifier::Forall).unwrap(),
            0.5
        );
        assert_eq!(
            quantified_trueness(&p("a | e"), &pt, Player::Sys, Quantifier::Forall).unwrap(),
            0.5
        );
        assert_eq!(
            quantified_trueness(&p("a | e"), &pt, Player::Sys, Quantifier::Exists).unwrap(),
            1.0
        );
    }

    #[test]
    fn controllability_examples() {
        let pt = part();
        assert_eq!(controllability(&p("G a"), &pt, Player::Sys), 1.0);
        assert_eq!(controllability(&p("e"), &pt, Player::Sys), 0.0);
        assert_eq!(controllability(&p("a & !a"), &pt, Player::Sys), 1.0);
        let ctrl_mixed = controllability(&Formula::and2(p("a"), Formula::next(p("!a"))), &pt, Player::Sys);
        assert_eq!(ctrl_mixed, 1.0);
        assert_eq!(controllability(&p("a U e"), &pt, Player::Sys), 0.5);
    }

    #[test]
    fn syntactic_examples() {
        let m = syntactic_measures(&p("G (a & X b)"));
        assert_eq!(
            m,
            SyntacticMeasures {
                temporal_ops: 2.0,
                height: 3.0,
                size: 5.0,
                top_disjuncts: 1.0
            }
        );
        let leaf = syntactic_measures(&p("a"));
        assert_eq!(
            leaf,
            SyntacticMeasures {
                temporal_ops: 0.0,
                height: 0.0,
                size: 1.0,
                top_disjuncts: 1.0
            }
        );
        assert_eq!(syntactic_measures(&p("a | b | G c")).top_disjuncts, 3.0);
    }
}
