//! Exact LTL semantics on ultimately periodic words. Used as an independent
//! oracle for progression and the automaton construction.

use rand::Rng;
use rustc_hash::FxHashMap;

use super::alphabet::{Letter, Partition};
use super::formula::{Formula, Kind};

/// The word `stem · loop^ω`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoWord {
    pub stem: Vec<Letter>,
    pub cycle: Vec<Letter>,
}

impl LassoWord {
    pub fn new(stem: Vec<Letter>, cycle: Vec<Letter>) -> Self {
        assert!(!cycle.is_empty(), "lasso loop must be nonempty");
        LassoWord { stem, cycle }
    }

    pub fn len(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn letter(&self, i: usize) -> Letter {
        if i < self.stem.len() {
            self.stem[i]
        } else {
            self.cycle[(i - self.stem.len()) % self.cycle.len()]
        }
    }

    /// Drops the first letter (the loop rotates once the stem is empty).
    pub fn shift(&self) -> LassoWord {
        if self.stem.is_empty() {
            let mut cycle = self.cycle.clone();
            cycle.rotate_left(1);
            LassoWord {
                stem: Vec::new(),
                cycle,
            }
        } else {
            LassoWord {
                stem: self.stem[1..].to_vec(),
                cycle: self.cycle.clone(),
            }
        }
    }

    pub fn random(rng: &mut impl Rng, width: usize, max_stem: usize, max_loop: usize) -> Self {
        let mask = (1u32 << width) - 1;
        let stem_len = rng.gen_range(0..=max_stem);
        let loop_len = rng.gen_range(1..=max_loop.max(1));
        let stem = (0..stem_len).map(|_| Letter(rng.gen::<u32>() & mask)).collect();
        let cycle = (0..loop_len).map(|_| Letter(rng.gen::<u32>() & mask)).collect();
        LassoWord::new(stem, cycle)
    }
}

/// Decides `w ⊨ f` by computing, for every subformula, its truth value at
/// each of the `|stem| + |loop|` distinct positions. Until/release are least
/// and greatest fixpoints over the position graph.
pub fn eval_lasso(f: &Formula, w: &LassoWord, p: &Partition) -> bool {
    let n = w.len();
    let letters: Vec<Letter> = (0..n).map(|i| w.letter(i)).collect();
    let succ: Vec<usize> = (0..n).map(|i| if i + 1 < n { i + 1 } else { w.stem.len() }).collect();
    let mut memo: FxHashMap<u32, Vec<bool>> = FxHashMap::default();
    truth(f, &letters, &succ, p, &mut memo)[0]
}

fn truth(
    f: &Formula,
    letters: &[Letter],
    succ: &[usize],
    p: &Partition,
    memo: &mut FxHashMap<u32, Vec<bool>>,
) -> Vec<bool> {
    if let Some(v) = memo.get(&f.id()) {
        return v.clone();
    }
    let n = letters.len();
    let out = match f.kind() {
        Kind::True => vec![true; n],
        Kind::False => vec![false; n],
        Kind::Atom(v) => letters.iter().map(|l| p.holds(*l, *v)).collect(),
        Kind::NegAtom(v) => letters.iter().map(|l| !p.holds(*l, *v)).collect(),
        Kind::And(cs) => {
            let mut acc = vec![true; n];
            for c in cs.iter() {
                let t = truth(c, letters, succ, p, memo);
                acc.iter_mut().zip(t).for_each(|(a, b)| *a &= b);
            }
            acc
        }
        Kind::Or(cs) => {
            let mut acc = vec![false; n];
            for c in cs.iter() {
                let t = truth(c, letters, succ, p, memo);
                acc.iter_mut().zip(t).for_each(|(a, b)| *a |= b);
            }
            acc
        }
        Kind::Next(a) => {
            let t = truth(a, letters, succ, p, memo);
            (0..n).map(|i| t[succ[i]]).collect()
        }
        Kind::Until(a, b) => {
            let (ta, tb) = (truth(a, letters, succ, p, memo), truth(b, letters, succ, p, memo));
            fixpoint(n, false, |cur, i| tb[i] || (ta[i] && cur[succ[i]]))
        }
        Kind::Release(a, b) => {
            let (ta, tb) = (truth(a, letters, succ, p, memo), truth(b, letters, succ, p, memo));
            fixpoint(n, true, |cur, i| tb[i] && (ta[i] || cur[succ[i]]))
        }
        Kind::Finally(b) => {
            let tb = truth(b, letters, succ, p, memo);
            fixpoint(n, false, |cur, i| tb[i] || cur[succ[i]])
        }
        Kind::Globally(b) => {
            let tb = truth(b, letters, succ, p, memo);
            fixpoint(n, true, |cur, i| tb[i] && cur[succ[i]])
        }
    };
    memo.insert(f.id(), out.clone());
    out
}

fn fixpoint(n: usize, init: bool, step: impl Fn(&[bool], usize) -> bool) -> Vec<bool> {
    let mut cur = vec![init; n];
    loop {
        let next: Vec<bool> = (0..n).map(|i| step(&cur, i)).collect();
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn setup() -> Partition {
        Partition::from_names(&["a"], &["b"]).unwrap()
    }

    #[test]
    fn infinitely_often() {
        let p = setup();
        let gfa = parse_ltl("G F a").unwrap();
        let a = p.letter_by_names(&["a"]);
        let none = p.letter_by_names(&[]);
        assert!(eval_lasso(&gfa, &LassoWord::new(vec![], vec![a]), &p));
        assert!(!eval_lasso(&gfa, &LassoWord::new(vec![a], vec![none]), &p));
    }

    #[test]
    fn until_in_stem() {
        let p = setup();
        let f = parse_ltl("a U b").unwrap();
        let w = LassoWord::new(
            vec![p.letter_by_names(&["a"]), p.letter_by_names(&["b"])],
            vec![p.letter_by_names(&[])],
        );
        assert!(eval_lasso(&f, &w, &p));
    }

    #[test]
    fn persistence_and_release() {
        let p = setup();
        let fg = parse_ltl("F G b").unwrap();
        let w = LassoWord::new(vec![p.letter_by_names(&[])], vec![p.letter_by_names(&["b"])]);
        assert!(eval_lasso(&fg, &w, &p));
        let r = parse_ltl("a R b").unwrap();
        let w2 = LassoWord::new(vec![], vec![p.letter_by_names(&["b"])]);
        assert!(eval_lasso(&r, &w2, &p));
    }

    #[test]
    fn shift_rotates_loop() {
        let w = LassoWord::new(vec![], vec![Letter(1), Letter(2)]);
        assert_eq!(w.shift().cycle, vec![Letter(2), Letter(1)]);
    }
}
