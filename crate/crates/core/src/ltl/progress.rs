use rustc_hash::FxHashMap;

use super::alphabet::{Letter, Partition};
use super::formula::{Formula, Kind, Var};

/// One-step progression of `f` under `letter`: what remains to be satisfied
/// from the next position on.
pub fn af(f: &Formula, letter: Letter, p: &Partition) -> Formula {
    af_with(f, &|v| p.holds(letter, v))
}

/// Progression under an arbitrary valuation.
pub fn af_with(f: &Formula, holds: &dyn Fn(Var) -> bool) -> Formula {
    let mut memo = FxHashMap::default();
    go(f, holds, &mut memo)
}

fn go(f: &Formula, holds: &dyn Fn(Var) -> bool, memo: &mut FxHashMap<u32, Formula>) -> Formula {
    if let Some(r) = memo.get(&f.id()) {
        return r.clone();
    }
    let r = match f.kind() {
        Kind::True | Kind::False => f.clone(),
        Kind::Atom(v) => Formula::constant(holds(*v)),
        Kind::NegAtom(v) => Formula::constant(!holds(*v)),
        Kind::And(cs) => Formula::and(cs.iter().map(|c| go(c, holds, memo)).collect()),
        Kind::Or(cs) => Formula::or(cs.iter().map(|c| go(c, holds, memo)).collect()),
        Kind::Next(a) => a.clone(),
        Kind::Finally(a) => Formula::or2(go(a, holds, memo), f.clone()),
        Kind::Globally(a) => Formula::and2(go(a, holds, memo), f.clone()),
        Kind::Until(a, b) => Formula::or2(go(b, holds, memo), Formula::and2(go(a, holds, memo), f.clone())),
        Kind::Release(a, b) => Formula::and2(go(b, holds, memo), Formula::or2(go(a, holds, memo), f.clone())),
    };
    memo.insert(f.id(), r.clone());
    r
}

/// Rewrites the Boolean top of `f` into a subsumption-minimal disjunctive
/// normal form over its literal and temporal leaves. Gives up and returns
/// `f` when more than `cap` terms would be needed.
pub fn normalize_dnf(f: &Formula, cap: usize) -> Formula {
    fn terms(f: &Formula, cap: usize) -> Option<Vec<Vec<Formula>>> {
        match f.kind() {
            Kind::True => Some(vec![Vec::new()]),
            Kind::False => Some(Vec::new()),
            Kind::Or(cs) => {
                let mut acc = Vec::new();
                for c in cs.iter() {
                    acc.extend(terms(c, cap)?);
                    if acc.len() > cap {
                        return None;
                    }
                }
                Some(minimize(acc))
            }
            Kind::And(cs) => {
                let mut acc: Vec<Vec<Formula>> = vec![Vec::new()];
                for c in cs.iter() {
                    let d = terms(c, cap)?;
                    if acc.len() * d.len() > cap * 4 {
                        return None;
                    }
                    let mut next = Vec::with_capacity(acc.len() * d.len());
                    for x in &acc {
                        for y in &d {
                            let mut z = x.clone();
                            z.extend(y.iter().cloned());
                            z.sort();
                            z.dedup();
                            if !contradictory(&z) {
                                next.push(z);
                            }
                        }
                    }
                    acc = minimize(next);
                    if acc.len() > cap {
                        return None;
                    }
                }
                Some(acc)
            }
            _ => Some(vec![vec![f.clone()]]),
        }
    }
    fn contradictory(term: &[Formula]) -> bool {
        term.iter().any(|x| match x.kind() {
            Kind::Atom(v) => term.iter().any(|y| matches!(y.kind(), Kind::NegAtom(w) if w == v)),
            _ => false,
        })
    }
    fn minimize(mut ts: Vec<Vec<Formula>>) -> Vec<Vec<Formula>> {
        ts.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        ts.dedup();
        let mut keep: Vec<Vec<Formula>> = Vec::with_capacity(ts.len());
        for t in ts {
            if !keep.iter().any(|k| k.iter().all(|x| t.binary_search(x).is_ok())) {
                keep.push(t);
            }
        }
        keep
    }
    if !matches!(f.kind(), Kind::And(_) | Kind::Or(_)) {
        return f.clone();
    }
    match terms(f, cap) {
        Some(ts) => Formula::or(ts.into_iter().map(Formula::and).collect()),
        None => f.clone(),
    }
}
