//! Deterministic parity automata built on demand from the supported LTL
//! fragment, with states labelled by residual formulas.

mod decompose;
mod iar;

use std::fmt::Write as _;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::ltl::{af, eval_lasso, normalize_dnf, Formula, Kind, LassoWord, Letter, Partition};

pub use decompose::{decompose, is_cosafety, is_safety, Atom, AtomKind, Decomposition, Skeleton, Unsupported};
pub use iar::{dnf_bound, iar_step, rabin_pairs, RabinPair, MAX_PAIRS};

pub type StateId = u32;

/// Residuals are kept in disjunctive normal form up to this many terms.
const DNF_TERM_CAP: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutError {
    #[error(transparent)]
    Unsupported(#[from] Unsupported),
    #[error("formula {0} expands to more than {MAX_PAIRS} acceptance disjuncts")]
    TooManyPairs(String),
}

/// Progress of one live atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Progress {
    /// Residual of a safety or co-safety atom.
    Finite(Formula),
    /// Breakpoint monitor of a suffix atom: `tracked` holds the obligations
    /// checked in the current round, `pool` all pending ones.
    Suffix { tracked: Formula, pool: Formula },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AutState {
    pub master: Skeleton,
    /// Sorted by atom index; keys are exactly the atoms of `master`.
    pub progress: Vec<(u16, Progress)>,
    pub round_robin: Vec<u8>,
    pub iar: Vec<u8>,
}

impl AutState {
    pub fn terminal(&self) -> Option<bool> {
        self.master.as_const()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    /// Bitmask over the source state's pairs.
    pub good: u64,
    pub bad: u64,
    /// Finite atoms decided this step, and suffix atoms that resolved.
    pub decided: Vec<(u16, bool)>,
    /// GSuffix atoms whose tracked obligations all held this step.
    pub fired: Vec<u16>,
    /// FSuffix atoms whose monitor failed and restarted this step.
    pub restarted: Vec<u16>,
}

pub struct Automaton {
    formula: Formula,
    partition: Partition,
    atoms: Vec<Atom>,
    states: Vec<AutState>,
    masters: Vec<Formula>,
    index: FxHashMap<AutState, StateId>,
    trans: FxHashMap<(StateId, Letter), (StateId, u32)>,
    pairs: FxHashMap<Skeleton, Arc<[RabinPair]>>,
    af_cache: FxHashMap<(u32, Letter), Formula>,
}

impl Automaton {
    pub fn new(f: &Formula, p: &Partition) -> Result<Self, AutError> {
        let d = decompose(f)?;
        if dnf_bound(&d.skeleton).is_none() {
            return Err(AutError::TooManyPairs(f.to_string()));
        }
        let mut aut = Automaton {
            formula: f.clone(),
            partition: p.clone(),
            atoms: d.atoms,
            states: Vec::new(),
            masters: Vec::new(),
            index: FxHashMap::default(),
            trans: FxHashMap::default(),
            pairs: FxHashMap::default(),
            af_cache: FxHashMap::default(),
        };
        let init = aut.fresh_state(d.skeleton, |_, a| match a.kind {
            AtomKind::Safety | AtomKind::CoSafety => Progress::Finite(a.root.clone()),
            _ => Progress::Suffix {
                tracked: a.body.clone(),
                pool: a.body.clone(),
            },
        });
        aut.intern(init);
        Ok(aut)
    }

    fn fresh_state(&mut self, master: Skeleton, mut progress_of: impl FnMut(u16, &Atom) -> Progress) -> AutState {
        let live = master.atoms();
        let k = self.pairs_of(&master).len();
        AutState {
            progress: live
                .iter()
                .map(|&i| (i as u16, progress_of(i as u16, &self.atoms[i])))
                .collect(),
            master,
            round_robin: vec![0; k],
            iar: (0..k as u8).collect(),
        }
    }

    fn intern(&mut self, s: AutState) -> StateId {
        if let Some(&id) = self.index.get(&s) {
            return id;
        }
        let id = self.states.len() as StateId;
        self.masters.push(s.master.to_formula(&self.atoms));
        self.index.insert(s.clone(), id);
        self.states.push(s);
        id
    }

    fn pairs_of(&mut self, master: &Skeleton) -> Arc<[RabinPair]> {
        if let Some(p) = self.pairs.get(master) {
            return p.clone();
        }
        let p: Arc<[RabinPair]> = rabin_pairs(master, &self.atoms).into();
        self.pairs.insert(master.clone(), p.clone());
        p
    }

    fn progress(&mut self, f: &Formula, letter: Letter) -> Formula {
        if f.is_constant() {
            return f.clone();
        }
        let key = (f.id(), letter);
        if let Some(r) = self.af_cache.get(&key) {
            return r.clone();
        }
        let r = normalize_dnf(&af(f, letter, &self.partition), DNF_TERM_CAP);
        self.af_cache.insert(key, r.clone());
        r
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn initial(&self) -> StateId {
        0
    }

    /// Number of states discovered so far.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, id: StateId) -> &AutState {
        &self.states[id as usize]
    }

    /// The master as a formula over the atoms' own formulas.
    pub fn master(&self, id: StateId) -> &Formula {
        &self.masters[id as usize]
    }

    pub fn terminal(&self, id: StateId) -> Option<bool> {
        self.states[id as usize].terminal()
    }

    pub fn live_pairs(&mut self, id: StateId) -> Arc<[RabinPair]> {
        let m = self.states[id as usize].master.clone();
        self.pairs_of(&m)
    }

    /// Successor state and edge priority, memoized.
    pub fn successor(&mut self, id: StateId, letter: Letter) -> (StateId, u32) {
        if let Some(&r) = self.trans.get(&(id, letter)) {
            return r;
        }
        let (t, prio, _) = self.step(id, letter);
        (t, prio)
    }

    /// Full transition including the acceptance events.
    pub fn step(&mut self, id: StateId, letter: Letter) -> (StateId, u32, StepEvents) {
        let src = self.states[id as usize].clone();
        if let Some(b) = src.terminal() {
            self.trans.insert((id, letter), (id, u32::from(!b)));
            return (id, u32::from(!b), StepEvents::default());
        }
        let mut ev = StepEvents::default();
        let mut next_progress = Vec::with_capacity(src.progress.len());
        for (i, pr) in &src.progress {
            let atom = self.atoms[*i as usize].clone();
            match pr {
                Progress::Finite(f) => {
                    let r = self.progress(f, letter);
                    if r.is_constant() {
                        ev.decided.push((*i, r.is_true()));
                    } else {
                        next_progress.push((*i, Progress::Finite(r)));
                    }
                }
                Progress::Suffix { tracked, pool } => {
                    let gsuffix = atom.kind == AtomKind::GSuffix;
                    let stepped = self.progress(pool, letter);
                    let pool2 = if gsuffix {
                        Formula::and2(stepped, atom.body.clone())
                    } else {
                        Formula::or2(stepped, atom.body.clone())
                    };
                    if pool2.is_constant() {
                        ev.decided.push((*i, pool2.is_true()));
                        continue;
                    }
                    let mut tracked2 = self.progress(tracked, letter);
                    if gsuffix && tracked2.is_true() {
                        ev.fired.push(*i);
                        tracked2 = pool2.clone();
                    } else if !gsuffix && tracked2.is_false() {
                        ev.restarted.push(*i);
                        tracked2 = pool2.clone();
                    }
                    next_progress.push((
                        *i,
                        Progress::Suffix {
                            tracked: tracked2,
                            pool: pool2,
                        },
                    ));
                }
            }
        }
        let (target, priority) = if ev.decided.is_empty() {
            let pairs = self.pairs_of(&src.master);
            let mut rr = src.round_robin.clone();
            for (j, pair) in pairs.iter().enumerate() {
                if pair.bad.iter().any(|a| ev.restarted.contains(a)) {
                    ev.bad |= 1 << j;
                }
                let mut idx = rr[j] as usize;
                while idx < pair.good.len() && ev.fired.contains(&pair.good[idx]) {
                    idx += 1;
                }
                if idx == pair.good.len() {
                    ev.good |= 1 << j;
                    idx = 0;
                }
                rr[j] = idx as u8;
            }
            let (iar, priority) = iar_step(&src.iar, ev.good, ev.bad, pairs.len());
            let next = AutState {
                master: src.master.clone(),
                progress: next_progress,
                round_robin: rr,
                iar,
            };
            (self.intern(next), priority)
        } else {
            let decided = ev.decided.clone();
            let master = src
                .master
                .substitute(&|a| decided.iter().find(|(i, _)| *i as usize == a).map(|(_, b)| *b));
            match master.as_const() {
                Some(b) => {
                    let s = AutState {
                        master,
                        progress: Vec::new(),
                        round_robin: Vec::new(),
                        iar: Vec::new(),
                    };
                    (self.intern(s), u32::from(!b))
                }
                None => {
                    let carried: FxHashMap<u16, Progress> = next_progress.into_iter().collect();
                    let s = self.fresh_state(master, |i, _| carried[&i].clone());
                    let k = s.iar.len() as u32;
                    (self.intern(s), 2 * k + 1)
                }
            }
        };
        self.trans.insert((id, letter), (target, priority));
        (target, priority, ev)
    }
}

impl Automaton {
    /// Display form of an atom's progress: the open sub-goal of a
    /// `G F χ`-style atom is shown without the re-armed `F χ`.
    pub fn progress_label(&self, atom: u16, pr: &Progress) -> Formula {
        match pr {
            Progress::Finite(f) => f.clone(),
            Progress::Suffix { tracked, .. } => {
                let a = &self.atoms[atom as usize];
                match (a.kind, a.body.kind()) {
                    (AtomKind::GSuffix, Kind::Finally(inner)) => {
                        if *tracked == a.body {
                            inner.clone()
                        } else if let Kind::Or(cs) = tracked.kind() {
                            Formula::or(cs.iter().filter(|c| **c != a.body).cloned().collect())
                        } else {
                            tracked.clone()
                        }
                    }
                    _ => tracked.clone(),
                }
            }
        }
    }

    /// Per-atom progress formulas of a state, in display form.
    pub fn labels(&self, id: StateId) -> Vec<(u16, Formula)> {
        self.states[id as usize]
            .progress
            .iter()
            .map(|(i, pr)| (*i, self.progress_label(*i, pr)))
            .collect()
    }

    /// Raw progress formulas (tracked obligations for suffix atoms).
    pub fn components(&self, id: StateId) -> Vec<Formula> {
        self.states[id as usize]
            .progress
            .iter()
            .map(|(_, pr)| match pr {
                Progress::Finite(f) => f.clone(),
                Progress::Suffix { tracked, .. } => tracked.clone(),
            })
            .collect()
    }

    /// Builds every reachable state, up to `limit` states.
    pub fn explore_all(&mut self, limit: usize) -> Result<(), usize> {
        let letters: Vec<Letter> = self.partition.all_letters().collect();
        let mut next = 0;
        while next < self.states.len() {
            if self.states.len() > limit {
                return Err(self.states.len());
            }
            for &l in &letters {
                self.successor(next as StateId, l);
            }
            next += 1;
        }
        Ok(())
    }

    /// Runs the automaton on a lasso word.
    pub fn accepts(&mut self, w: &LassoWord) -> bool {
        let mut q = self.initial();
        for &l in &w.stem {
            q = self.successor(q, l).0;
        }
        let mut seen: FxHashMap<(StateId, usize), usize> = FxHashMap::default();
        let mut prios = Vec::new();
        let mut pos = 0;
        loop {
            if let Some(&start) = seen.get(&(q, pos)) {
                let min = prios[start..].iter().min().copied().unwrap_or(1);
                return min % 2 == 0;
            }
            seen.insert((q, pos), prios.len());
            let (t, p) = self.successor(q, w.cycle[pos]);
            prios.push(p);
            q = t;
            pos = (pos + 1) % w.cycle.len();
        }
    }

    /// HOA-like listing of the states built so far.
    pub fn to_hoa(&self) -> String {
        let mut out = String::new();
        let ap: Vec<String> = self
            .partition
            .env()
            .iter()
            .chain(self.partition.sys())
            .map(|v| format!("\"{}\"", v.name()))
            .collect();
        let _ = writeln!(out, "HOA: v1");
        let _ = writeln!(out, "States: {}", self.states.len());
        let _ = writeln!(out, "Start: 0");
        let _ = writeln!(out, "AP: {} {}", ap.len(), ap.join(" "));
        let _ = writeln!(out, "acc-name: parity min even");
        let _ = writeln!(out, "--BODY--");
        let mut edges: Vec<_> = self.trans.iter().collect();
        edges.sort();
        for id in 0..self.states.len() as StateId {
            let _ = writeln!(out, "State: {id} \"{}\"", self.master(id));
            for ((_, l), (t, p)) in edges.iter().filter(|((s, _), _)| *s == id) {
                let _ = writeln!(out, "  [{}] {t} {{{p}}}", l.0);
            }
        }
        let _ = writeln!(out, "--END--");
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n");
        for id in 0..self.states.len() as StateId {
            let _ = writeln!(
                out,
                "  q{id} [label=\"{}\"];",
                self.master(id).to_string().replace('"', "'")
            );
        }
        let mut edges: Vec<_> = self.trans.iter().collect();
        edges.sort();
        for ((s, l), (t, p)) in edges {
            let _ = writeln!(out, "  q{s} -> q{t} [label=\"{}:{p}\"];", l.0);
        }
        out.push_str("}\n");
        out
    }
}

/// Decides `w ⊨ f` through the automaton.
pub fn accepts_lasso(f: &Formula, w: &LassoWord, p: &Partition) -> Result<bool, AutError> {
    Ok(Automaton::new(f, p)?.accepts(w))
}

/// Checks the automaton against the direct semantics on one word.
pub fn conforms(f: &Formula, w: &LassoWord, p: &Partition) -> Result<bool, AutError> {
    Ok(accepts_lasso(f, w, p)? == eval_lasso(f, w, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn p(s: &str) -> Formula {
        parse_ltl(s).unwrap()
    }

    #[test]
    fn running_example_chain() {
        let part = Partition::from_names::<&str>(&[], &["a", "b"]).unwrap();
        let mut aut = Automaton::new(&p("!a | G F (a & X b)"), &part).unwrap();
        let q0 = aut.initial();
        assert_eq!(aut.master(q0), &p("!a | G F (a & X b)"));
        let g = aut.atoms().iter().position(|a| a.kind == AtomKind::GSuffix).unwrap() as u16;
        let label = |aut: &Automaton, q| aut.labels(q).into_iter().find(|(i, _)| *i == g).unwrap().1;
        assert_eq!(label(&aut, q0), p("a & X b"));

        let (q1, _, _) = aut.step(q0, part.letter_by_names(&["a"]));
        assert_eq!(aut.master(q1), &p("G F (a & X b)"));
        assert_eq!(label(&aut, q1), p("b"));

        let (q2, prio, ev) = aut.step(q1, part.letter_by_names(&["b"]));
        assert_eq!(ev.fired, vec![g]);
        assert_eq!(ev.good, 1);
        assert_eq!(prio % 2, 0);
        assert_eq!(aut.master(q2), &p("G F (a & X b)"));
        assert_eq!(label(&aut, q2), p("a & X b"));
    }

    #[test]
    fn invariant_violation_is_terminal() {
        let part = Partition::from_names::<&str>(&[], &["p"]).unwrap();
        let mut aut = Automaton::new(&p("G p"), &part).unwrap();
        assert_eq!(aut.components(0), vec![p("G p")]);
        let (q, prio) = aut.successor(0, part.letter_by_names(&[]));
        assert_eq!(aut.terminal(q), Some(false));
        assert_eq!(prio % 2, 1);
        assert_eq!(aut.successor(q, part.letter_by_names(&["p"])), (q, 1));
    }

    #[test]
    fn constant_true_is_terminal() {
        let part = Partition::from_names::<&str>(&[], &["p"]).unwrap();
        let mut aut = Automaton::new(&Formula::tt(), &part).unwrap();
        assert_eq!(aut.terminal(0), Some(true));
        assert_eq!(aut.successor(0, Letter(1)), (0, 0));
    }

    #[test]
    fn lasso_examples() {
        let part = Partition::from_names(&["r"], &["g", "a"]).unwrap();
        let l = |xs: &[&str]| part.letter_by_names(xs);
        let gfa = p("G F a");
        assert!(accepts_lasso(&gfa, &LassoWord::new(vec![], vec![l(&["a"])]), &part).unwrap());
        assert!(!accepts_lasso(&gfa, &LassoWord::new(vec![], vec![l(&[])]), &part).unwrap());
        let resp = p("G (r -> F g)");
        let w = LassoWord::new(vec![l(&["r"])], vec![l(&["g"])]);
        assert!(accepts_lasso(&resp, &w, &part).unwrap());
        assert!(eval_lasso(&resp, &w, &part));
    }

    #[test]
    fn persistence_with_restarts() {
        let part = Partition::from_names::<&str>(&[], &["a", "b"]).unwrap();
        let l = |xs: &[&str]| part.letter_by_names(xs);
        let f = p("F G a | G F b");
        for w in [
            LassoWord::new(vec![l(&[])], vec![l(&["a"])]),
            LassoWord::new(vec![], vec![l(&[]), l(&["a"])]),
            LassoWord::new(vec![], vec![l(&[]), l(&["b"])]),
            LassoWord::new(vec![l(&["b"])], vec![l(&[])]),
        ] {
            assert_eq!(
                accepts_lasso(&f, &w, &part).unwrap(),
                eval_lasso(&f, &w, &part),
                "{w:?}"
            );
        }
    }

    #[test]
    fn overlapping_obligations_are_all_checked() {
        // a request at every step, answered only two steps later
        let part = Partition::from_names(&["r"], &["g"]).unwrap();
        let l = |xs: &[&str]| part.letter_by_names(xs);
        let f = p("G (!r | X X g)");
        let good = LassoWord::new(vec![], vec![l(&["r", "g"])]);
        let bad = LassoWord::new(vec![l(&["r"]), l(&["r"]), l(&["g"])], vec![l(&[])]);
        assert!(accepts_lasso(&f, &good, &part).unwrap());
        assert!(!accepts_lasso(&f, &bad, &part).unwrap());
    }

    #[test]
    fn deterministic_and_complete() {
        let part = Partition::from_names(&["r"], &["g"]).unwrap();
        let mut aut = Automaton::new(&p("G (r -> F g) & (F G !r | G F g)"), &part).unwrap();
        aut.explore_all(10_000).unwrap();
        for q in 0..aut.len() as StateId {
            for l in part.all_letters() {
                let a = aut.successor(q, l);
                assert_eq!(a, aut.successor(q, l));
            }
        }
        assert!(aut.to_hoa().contains("States:"));
    }
}
