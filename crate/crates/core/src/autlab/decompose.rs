//! Splitting a formula into a monotone Boolean skeleton over atoms.

use std::fmt;

use thiserror::Error;

use crate::ltl::{Formula, Kind};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomKind {
    /// Only literals, ∧, ∨, X, R, G.
    Safety,
    /// Only literals, ∧, ∨, X, U, F.
    CoSafety,
    /// `G ψ` with ψ co-safety.
    GSuffix,
    /// `F ψ` with ψ safety.
    FSuffix,
}

impl AtomKind {
    pub fn is_finite(self) -> bool {
        matches!(self, AtomKind::Safety | AtomKind::CoSafety)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub kind: AtomKind,
    /// The atom's formula as it occurs in the master.
    pub root: Formula,
    /// ψ for suffix atoms; the root itself for finite atoms.
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula {formula} is outside the supported fragment: cannot handle {offending}")]
pub struct Unsupported {
    pub formula: String,
    pub offending: String,
}

/// Positive Boolean combination over atom indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Skeleton {
    Const(bool),
    Atom(u16),
    And(Vec<Skeleton>),
    Or(Vec<Skeleton>),
}

impl Skeleton {
    pub fn and(children: Vec<Skeleton>) -> Skeleton {
        Skeleton::junction(children, true)
    }

    pub fn or(children: Vec<Skeleton>) -> Skeleton {
        Skeleton::junction(children, false)
    }

    fn junction(children: Vec<Skeleton>, is_and: bool) -> Skeleton {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match c {
                Skeleton::Const(b) if b == is_and => {}
                Skeleton::Const(b) => return Skeleton::Const(b),
                Skeleton::And(cs) if is_and => flat.extend(cs),
                Skeleton::Or(cs) if !is_and => flat.extend(cs),
                c => flat.push(c),
            }
        }
        flat.sort();
        flat.dedup();
        // absorption
        let dual = |s: &Skeleton| -> Option<Vec<Skeleton>> {
            match (s, is_and) {
                (Skeleton::Or(cs), true) | (Skeleton::And(cs), false) => Some(cs.clone()),
                _ => None,
            }
        };
        let sets: Vec<Option<Vec<Skeleton>>> = flat.iter().map(dual).collect();
        let mut keep = vec![true; flat.len()];
        for i in 0..flat.len() {
            let Some(ci) = &sets[i] else { continue };
            for j in 0..flat.len() {
                if i == j || !keep[j] {
                    continue;
                }
                let subsumed = match &sets[j] {
                    None => ci.binary_search(&flat[j]).is_ok(),
                    Some(cj) => cj.len() < ci.len() && cj.iter().all(|x| ci.binary_search(x).is_ok()),
                };
                if subsumed {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut flat: Vec<Skeleton> = flat.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect();
        match flat.len() {
            0 => Skeleton::Const(is_and),
            1 => flat.pop().unwrap(),
            _ if is_and => Skeleton::And(flat),
            _ => Skeleton::Or(flat),
        }
    }

    pub fn as_const(&self) -> Option<bool> {
        match self {
            Skeleton::Const(b) => Some(*b),
            _ => None,
        }
    }

    /// Replaces atoms by the values given in `value` (where `Some`).
    pub fn substitute(&self, value: &impl Fn(usize) -> Option<bool>) -> Skeleton {
        match self {
            Skeleton::Const(_) => self.clone(),
            Skeleton::Atom(i) => match value(*i as usize) {
                Some(b) => Skeleton::Const(b),
                None => self.clone(),
            },
            Skeleton::And(cs) => Skeleton::and(cs.iter().map(|c| c.substitute(value)).collect()),
            Skeleton::Or(cs) => Skeleton::or(cs.iter().map(|c| c.substitute(value)).collect()),
        }
    }

    /// Sorted, deduplicated atom indices occurring in the skeleton.
    pub fn atoms(&self) -> Vec<usize> {
        fn go(s: &Skeleton, out: &mut Vec<usize>) {
            match s {
                Skeleton::Const(_) => {}
                Skeleton::Atom(i) => out.push(*i as usize),
                Skeleton::And(cs) | Skeleton::Or(cs) => cs.iter().for_each(|c| go(c, out)),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Renders the skeleton as a formula over the atom roots.
    pub fn to_formula(&self, atoms: &[Atom]) -> Formula {
        match self {
            Skeleton::Const(b) => Formula::constant(*b),
            Skeleton::Atom(i) => atoms[*i as usize].root.clone(),
            Skeleton::And(cs) => Formula::and(cs.iter().map(|c| c.to_formula(atoms)).collect()),
            Skeleton::Or(cs) => Formula::or(cs.iter().map(|c| c.to_formula(atoms)).collect()),
        }
    }

    /// Folds the skeleton bottom-up with the given leaf valuation.
    pub fn fold<T: Copy>(
        &self,
        leaf: &impl Fn(Option<usize>, Option<bool>) -> T,
        and: &impl Fn(T, T) -> T,
        or: &impl Fn(T, T) -> T,
    ) -> T {
        match self {
            Skeleton::Const(b) => leaf(None, Some(*b)),
            Skeleton::Atom(i) => leaf(Some(*i as usize), None),
            Skeleton::And(cs) => cs
                .iter()
                .map(|c| c.fold(leaf, and, or))
                .reduce(and)
                .expect("junctions have at least two children"),
            Skeleton::Or(cs) => cs
                .iter()
                .map(|c| c.fold(leaf, and, or))
                .reduce(or)
                .expect("junctions have at least two children"),
        }
    }
}

pub fn is_safety(f: &Formula) -> bool {
    match f.kind() {
        Kind::True | Kind::False | Kind::Atom(_) | Kind::NegAtom(_) => true,
        Kind::And(cs) | Kind::Or(cs) => cs.iter().all(is_safety),
        Kind::Next(a) | Kind::Globally(a) => is_safety(a),
        Kind::Release(a, b) => is_safety(a) && is_safety(b),
        Kind::Until(..) | Kind::Finally(_) => false,
    }
}

pub fn is_cosafety(f: &Formula) -> bool {
    match f.kind() {
        Kind::True | Kind::False | Kind::Atom(_) | Kind::NegAtom(_) => true,
        Kind::And(cs) | Kind::Or(cs) => cs.iter().all(is_cosafety),
        Kind::Next(a) | Kind::Finally(a) => is_cosafety(a),
        Kind::Until(a, b) => is_cosafety(a) && is_cosafety(b),
        Kind::Release(..) | Kind::Globally(_) => false,
    }
}

/// Moves X below F and G: `X G a = G X a`, `X F a = F X a`.
fn lift_next(f: &Formula) -> Formula {
    fn push(a: Formula) -> Formula {
        match a.kind() {
            Kind::Globally(c) => Formula::globally(push(c.clone())),
            Kind::Finally(c) => Formula::finally(push(c.clone())),
            Kind::And(cs) => Formula::and(cs.iter().cloned().map(push).collect()),
            Kind::Or(cs) => Formula::or(cs.iter().cloned().map(push).collect()),
            _ => Formula::next(a),
        }
    }
    match f.kind() {
        Kind::True | Kind::False | Kind::Atom(_) | Kind::NegAtom(_) => f.clone(),
        Kind::Next(a) => push(lift_next(a)),
        Kind::And(cs) => Formula::and(cs.iter().map(lift_next).collect()),
        Kind::Or(cs) => Formula::or(cs.iter().map(lift_next).collect()),
        Kind::Until(a, b) => Formula::until(lift_next(a), lift_next(b)),
        Kind::Release(a, b) => Formula::release(lift_next(a), lift_next(b)),
        Kind::Finally(a) => Formula::finally(lift_next(a)),
        Kind::Globally(a) => Formula::globally(lift_next(a)),
    }
}

/// Result of splitting a formula.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub skeleton: Skeleton,
    pub atoms: Vec<Atom>,
}

/// Identifies maximal atoms and the Boolean skeleton combining them.
pub fn decompose(f: &Formula) -> Result<Decomposition, Unsupported> {
    let g = lift_next(f);
    let mut found: Vec<Atom> = Vec::new();
    let raw = split(&g, &mut found).map_err(|offending| Unsupported {
        formula: f.to_string(),
        offending: offending.to_string(),
    })?;
    // canonical atom order
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&a, &b| found[a].root.cmp(&found[b].root));
    let mut rank = vec![0u16; found.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new as u16;
    }
    let atoms: Vec<Atom> = order.iter().map(|&i| found[i].clone()).collect();
    let skeleton = renumber(&raw, &rank);
    Ok(Decomposition { skeleton, atoms })
}

fn renumber(s: &Skeleton, rank: &[u16]) -> Skeleton {
    match s {
        Skeleton::Const(_) => s.clone(),
        Skeleton::Atom(i) => Skeleton::Atom(rank[*i as usize]),
        Skeleton::And(cs) => Skeleton::and(cs.iter().map(|c| renumber(c, rank)).collect()),
        Skeleton::Or(cs) => Skeleton::or(cs.iter().map(|c| renumber(c, rank)).collect()),
    }
}

fn atom_leaf(found: &mut Vec<Atom>, kind: AtomKind, root: &Formula, body: Formula) -> Skeleton {
    let idx = match found.iter().position(|a| a.root == *root) {
        Some(i) => i,
        None => {
            found.push(Atom {
                kind,
                root: root.clone(),
                body,
            });
            found.len() - 1
        }
    };
    Skeleton::Atom(idx as u16)
}

fn split(f: &Formula, found: &mut Vec<Atom>) -> Result<Skeleton, Formula> {
    if f.is_constant() {
        return Ok(Skeleton::Const(f.is_true()));
    }
    if is_cosafety(f) {
        return Ok(atom_leaf(found, AtomKind::CoSafety, f, f.clone()));
    }
    if is_safety(f) {
        return Ok(atom_leaf(found, AtomKind::Safety, f, f.clone()));
    }
    match f.kind() {
        Kind::And(cs) => Ok(Skeleton::and(
            cs.iter().map(|c| split(c, found)).collect::<Result<_, _>>()?,
        )),
        Kind::Or(cs) => Ok(Skeleton::or(
            cs.iter().map(|c| split(c, found)).collect::<Result<_, _>>()?,
        )),
        Kind::Globally(psi) => {
            if is_cosafety(psi) {
                Ok(atom_leaf(found, AtomKind::GSuffix, f, psi.clone()))
            } else if let Kind::And(cs) = psi.kind() {
                let parts = cs.iter().map(|c| split(&Formula::globally(c.clone()), found));
                Ok(Skeleton::and(parts.collect::<Result<_, _>>()?))
            } else {
                Err(f.clone())
            }
        }
        Kind::Finally(psi) => {
            if is_safety(psi) {
                Ok(atom_leaf(found, AtomKind::FSuffix, f, psi.clone()))
            } else if let Kind::Or(cs) = psi.kind() {
                let parts = cs.iter().map(|c| split(&Formula::finally(c.clone()), found));
                Ok(Skeleton::or(parts.collect::<Result<_, _>>()?))
            } else {
                Err(f.clone())
            }
        }
        _ => Err(f.clone()),
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Skeleton::Const(b) => write!(f, "{b}"),
            Skeleton::Atom(i) => write!(f, "#{i}"),
            Skeleton::And(cs) | Skeleton::Or(cs) => {
                let sep = if matches!(self, Skeleton::And(_)) { " & " } else { " | " };
                let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", parts.join(sep))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_ltl;

    fn p(s: &str) -> Formula {
        parse_ltl(s).unwrap()
    }

    #[test]
    fn response_is_one_gsuffix() {
        let d = decompose(&p("G (r -> F g)")).unwrap();
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].kind, AtomKind::GSuffix);
        assert_eq!(d.atoms[0].body, p("!r | F g"));
    }

    #[test]
    fn running_example_split() {
        let d = decompose(&p("!a | G F (a & X b)")).unwrap();
        assert_eq!(d.atoms.len(), 2);
        let kinds: Vec<AtomKind> = d.atoms.iter().map(|a| a.kind).collect();
        assert!(kinds.contains(&AtomKind::CoSafety));
        let g = d.atoms.iter().find(|a| a.kind == AtomKind::GSuffix).unwrap();
        assert_eq!(g.body, p("F (a & X b)"));
        assert_eq!(d.skeleton.to_formula(&d.atoms), p("!a | G F (a & X b)"));
    }

    #[test]
    fn mixed_body_is_rejected() {
        let err = decompose(&p("F ((a R b) & (c U d))")).unwrap_err();
        assert!(err.offending.contains('R') && err.offending.contains('U'));
    }

    #[test]
    fn rewrites_before_rejecting() {
        let d = decompose(&p("G ((a R b) & F c)")).unwrap();
        let kinds: Vec<AtomKind> = d.atoms.iter().map(|a| a.kind).collect();
        assert_eq!(kinds.len(), 2);
        assert!(kinds.contains(&AtomKind::Safety) && kinds.contains(&AtomKind::GSuffix));
        let d = decompose(&p("F (G a | G F b)")).unwrap();
        assert_eq!(d.atoms.len(), 2);
        let d = decompose(&p("X G F a")).unwrap();
        assert_eq!(d.atoms[0].kind, AtomKind::GSuffix);
    }

    #[test]
    fn safety_formula_is_single_atom() {
        let d = decompose(&p("G (r <-> X g)")).unwrap();
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].kind, AtomKind::Safety);
    }

    #[test]
    fn skeleton_simplifies() {
        let s = Skeleton::and(vec![
            Skeleton::Atom(0),
            Skeleton::or(vec![Skeleton::Atom(0), Skeleton::Atom(1)]),
        ]);
        assert_eq!(s, Skeleton::Atom(0));
        let t = Skeleton::or(vec![Skeleton::Atom(2), Skeleton::Const(true)]);
        assert_eq!(t, Skeleton::Const(true));
        let u = Skeleton::and(vec![Skeleton::Atom(1), Skeleton::Atom(2)]).substitute(&|i| (i == 1).then_some(false));
        assert_eq!(u, Skeleton::Const(false));
    }
}
