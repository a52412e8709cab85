//! Hash-consed LTL formulas in negation normal form.
//!
//! Every formula is built through the smart constructors in this module, which
//! apply the fixed simplification rule set before interning. Two formulas are
//! structurally equal iff they are the same interned node, so equality and
//! hashing are by id.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};

use rustc_hash::{FxHashMap, FxHasher};
use std::sync::LazyLock;

/// An atomic proposition, interned by name.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct Var(u32);

struct VarTable {
    names: Vec<Arc<str>>,
    index: FxHashMap<Arc<str>, u32>,
}

static VARS: LazyLock<Mutex<VarTable>> = LazyLock::new(|| {
    Mutex::new(VarTable {
        names: Vec::new(),
        index: FxHashMap::default(),
    })
});

impl Var {
    pub fn new(name: &str) -> Var {
        let mut table = VARS.lock().expect("variable table poisoned");
        if let Some(&id) = table.index.get(name) {
            return Var(id);
        }
        let id = table.names.len() as u32;
        let name: Arc<str> = Arc::from(name);
        table.names.push(name.clone());
        table.index.insert(name, id);
        Var(id)
    }

    pub fn name(self) -> Arc<str> {
        VARS.lock().expect("variable table poisoned").names[self.0 as usize].clone()
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            Ordering::Equal
        } else {
            self.name().cmp(&other.name())
        }
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Node kinds. Negation only occurs on atoms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Kind {
    True,
    False,
    Atom(Var),
    NegAtom(Var),
    And(Box<[Formula]>),
    Or(Box<[Formula]>),
    Next(Formula),
    Until(Formula, Formula),
    Release(Formula, Formula),
    Finally(Formula),
    Globally(Formula),
}

impl Kind {
    fn rank(&self) -> u8 {
        match self {
            Kind::True => 0,
            Kind::False => 1,
            Kind::Atom(_) => 2,
            Kind::NegAtom(_) => 3,
            Kind::And(_) => 4,
            Kind::Or(_) => 5,
            Kind::Next(_) => 6,
            Kind::Until(..) => 7,
            Kind::Release(..) => 8,
            Kind::Finally(_) => 9,
            Kind::Globally(_) => 10,
        }
    }
}

pub struct Node {
    id: u32,
    shash: u64,
    kind: Kind,
}

/// Handle to an interned formula node.
#[derive(Clone)]
pub struct Formula(Arc<Node>);

static NEXT_ID: AtomicU32 = AtomicU32::new(0);
static TABLE: LazyLock<Mutex<FxHashMap<Kind, Formula>>> = LazyLock::new(|| Mutex::new(FxHashMap::default()));
static TT: LazyLock<Formula> = LazyLock::new(|| intern(Kind::True));
static FF: LazyLock<Formula> = LazyLock::new(|| intern(Kind::False));

fn structural_hash(kind: &Kind) -> u64 {
    let mut h = FxHasher::default();
    kind.rank().hash(&mut h);
    match kind {
        Kind::True | Kind::False => {}
        Kind::Atom(v) | Kind::NegAtom(v) => v.name().hash(&mut h),
        Kind::And(cs) | Kind::Or(cs) => {
            cs.len().hash(&mut h);
            for c in cs.iter() {
                c.0.shash.hash(&mut h);
            }
        }
        Kind::Next(a) | Kind::Finally(a) | Kind::Globally(a) => a.0.shash.hash(&mut h),
        Kind::Until(a, b) | Kind::Release(a, b) => {
            a.0.shash.hash(&mut h);
            b.0.shash.hash(&mut h);
        }
    }
    h.finish()
}

fn intern(kind: Kind) -> Formula {
    let mut table = TABLE.lock().expect("formula table poisoned");
    if let Some(f) = table.get(&kind) {
        return f.clone();
    }
    let shash = structural_hash(&kind);
    let id = NEXT_ID.fetch_add(1, AtomicOrdering::Relaxed);
    let f = Formula(Arc::new(Node {
        id,
        shash,
        kind: kind.clone(),
    }));
    table.insert(kind, f.clone());
    f
}

/// Number of distinct formula nodes interned so far.
pub fn table_size() -> usize {
    TABLE.lock().expect("formula table poisoned").len()
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

impl Ord for Formula {
    /// Structural order, independent of interning history.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0.id == other.0.id {
            return Ordering::Equal;
        }
        let (a, b) = (&self.0, &other.0);
        a.shash
            .cmp(&b.shash)
            .then_with(|| a.kind.rank().cmp(&b.kind.rank()))
            .then_with(|| match (&a.kind, &b.kind) {
                (Kind::Atom(x), Kind::Atom(y)) | (Kind::NegAtom(x), Kind::NegAtom(y)) => x.cmp(y),
                (Kind::And(xs), Kind::And(ys)) | (Kind::Or(xs), Kind::Or(ys)) => xs.cmp(ys),
                (Kind::Next(x), Kind::Next(y))
                | (Kind::Finally(x), Kind::Finally(y))
                | (Kind::Globally(x), Kind::Globally(y)) => x.cmp(y),
                (Kind::Until(x1, x2), Kind::Until(y1, y2)) | (Kind::Release(x1, x2), Kind::Release(y1, y2)) => {
                    x1.cmp(y1).then_with(|| x2.cmp(y2))
                }
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Formula {
    pub fn id(&self) -> u32 {
        self.0.id
    }

    /// Hash of the structure only; stable across processes.
    pub fn structural_hash(&self) -> u64 {
        self.0.shash
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn tt() -> Formula {
        TT.clone()
    }

    pub fn ff() -> Formula {
        FF.clone()
    }

    pub fn constant(value: bool) -> Formula {
        if value {
            Formula::tt()
        } else {
            Formula::ff()
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self.kind(), Kind::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self.kind(), Kind::False)
    }

    pub fn is_constant(&self) -> bool {
        self.is_true() || self.is_false()
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind(), Kind::Atom(_) | Kind::NegAtom(_))
    }

    /// True for X, U, R, F and G nodes.
    pub fn is_temporal(&self) -> bool {
        matches!(
            self.kind(),
            Kind::Next(_) | Kind::Until(..) | Kind::Release(..) | Kind::Finally(_) | Kind::Globally(_)
        )
    }

    pub fn children(&self) -> Vec<Formula> {
        match self.kind() {
            Kind::True | Kind::False | Kind::Atom(_) | Kind::NegAtom(_) => Vec::new(),
            Kind::And(cs) | Kind::Or(cs) => cs.to_vec(),
            Kind::Next(a) | Kind::Finally(a) | Kind::Globally(a) => vec![a.clone()],
            Kind::Until(a, b) | Kind::Release(a, b) => vec![a.clone(), b.clone()],
        }
    }

    pub fn atom(v: Var) -> Formula {
        intern(Kind::Atom(v))
    }

    pub fn neg_atom(v: Var) -> Formula {
        intern(Kind::NegAtom(v))
    }

    pub fn var(name: &str) -> Formula {
        Formula::atom(Var::new(name))
    }

    pub fn literal(v: Var, positive: bool) -> Formula {
        if positive {
            Formula::atom(v)
        } else {
            Formula::neg_atom(v)
        }
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Formula::and(vec![a, b])
    }

    pub fn or2(a: Formula, b: Formula) -> Formula {
        Formula::or(vec![a, b])
    }

    pub fn and(children: Vec<Formula>) -> Formula {
        junction(children, true)
    }

    pub fn or(children: Vec<Formula>) -> Formula {
        junction(children, false)
    }

    pub fn next(a: Formula) -> Formula {
        match a.kind() {
            Kind::True | Kind::False => a,
            Kind::And(cs) => Formula::and(cs.iter().cloned().map(Formula::next).collect()),
            Kind::Or(cs) => Formula::or(cs.iter().cloned().map(Formula::next).collect()),
            _ => intern(Kind::Next(a)),
        }
    }

    pub fn finally(a: Formula) -> Formula {
        match a.kind() {
            Kind::True | Kind::False => a,
            Kind::Finally(_) => a,
            // F G F x = G F x
            Kind::Globally(b) if matches!(b.kind(), Kind::Finally(_)) => a,
            _ => intern(Kind::Finally(a)),
        }
    }

    pub fn globally(a: Formula) -> Formula {
        match a.kind() {
            Kind::True | Kind::False => a,
            Kind::Globally(_) => a,
            // G F G x = F G x
            Kind::Finally(b) if matches!(b.kind(), Kind::Globally(_)) => a,
            _ => intern(Kind::Globally(a)),
        }
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        if b.is_constant() || a.is_false() || a == b {
            return b;
        }
        if a.is_true() {
            return Formula::finally(b);
        }
        intern(Kind::Until(a, b))
    }

    pub fn release(a: Formula, b: Formula) -> Formula {
        if b.is_constant() || a.is_true() || a == b {
            return b;
        }
        if a.is_false() {
            return Formula::globally(b);
        }
        intern(Kind::Release(a, b))
    }

    /// Weak until, as the release `b R (a | b)`.
    pub fn weak_until(a: Formula, b: Formula) -> Formula {
        Formula::release(b.clone(), Formula::or2(a, b))
    }

    /// The NNF of the negation.
    pub fn negate(&self) -> Formula {
        match self.kind() {
            Kind::True => Formula::ff(),
            Kind::False => Formula::tt(),
            Kind::Atom(v) => Formula::neg_atom(*v),
            Kind::NegAtom(v) => Formula::atom(*v),
            Kind::And(cs) => Formula::or(cs.iter().map(Formula::negate).collect()),
            Kind::Or(cs) => Formula::and(cs.iter().map(Formula::negate).collect()),
            Kind::Next(a) => Formula::next(a.negate()),
            Kind::Until(a, b) => Formula::release(a.negate(), b.negate()),
            Kind::Release(a, b) => Formula::until(a.negate(), b.negate()),
            Kind::Finally(a) => Formula::globally(a.negate()),
            Kind::Globally(a) => Formula::finally(a.negate()),
        }
    }

    /// Rebuilds the formula through the smart constructors.
    pub fn simplify(&self) -> Formula {
        match self.kind() {
            Kind::True | Kind::False | Kind::Atom(_) | Kind::NegAtom(_) => self.clone(),
            Kind::And(cs) => Formula::and(cs.iter().map(Formula::simplify).collect()),
            Kind::Or(cs) => Formula::or(cs.iter().map(Formula::simplify).collect()),
            Kind::Next(a) => Formula::next(a.simplify()),
            Kind::Until(a, b) => Formula::until(a.simplify(), b.simplify()),
            Kind::Release(a, b) => Formula::release(a.simplify(), b.simplify()),
            Kind::Finally(a) => Formula::finally(a.simplify()),
            Kind::Globally(a) => Formula::globally(a.simplify()),
        }
    }

    /// All variables occurring in the formula, sorted by name.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mut seen = rustc_hash::FxHashSet::default();
        self.visit(&mut seen, &mut |f| {
            if let Kind::Atom(v) | Kind::NegAtom(v) = f.kind() {
                out.push(*v);
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Visits every distinct node of the DAG once, children first.
    pub fn visit(&self, seen: &mut rustc_hash::FxHashSet<u32>, f: &mut impl FnMut(&Formula)) {
        if !seen.insert(self.id()) {
            return;
        }
        for c in self.children() {
            c.visit(seen, f);
        }
        f(self);
    }

    /// Number of distinct DAG nodes.
    pub fn dag_size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut rustc_hash::FxHashSet::default(), &mut |_| n += 1);
        n
    }
}

/// Builds a flattened, sorted and simplified conjunction (`is_and`) or
/// disjunction.
fn junction(children: Vec<Formula>, is_and: bool) -> Formula {
    let absorbing = Formula::constant(!is_and);
    let mut flat: Vec<Formula> = Vec::with_capacity(children.len());
    for c in children {
        match c.kind() {
            Kind::True | Kind::False => {
                if c == absorbing {
                    return absorbing;
                }
            }
            Kind::And(cs) if is_and => flat.extend(cs.iter().cloned()),
            Kind::Or(cs) if !is_and => flat.extend(cs.iter().cloned()),
            _ => flat.push(c),
        }
    }
    flat.sort();
    flat.dedup();

    // complementary literals
    for w in flat.iter() {
        if let Kind::Atom(v) = w.kind() {
            if flat.binary_search(&Formula::neg_atom(*v)).is_ok() {
                return absorbing;
            }
        }
    }

    // absorption: a & (a | b) = a, and (a | b) & (a | b | c) = (a | b)
    if flat.len() > 1 {
        let dual_children = |f: &Formula| -> Option<Vec<Formula>> {
            match (f.kind(), is_and) {
                (Kind::Or(cs), true) | (Kind::And(cs), false) => Some(cs.to_vec()),
                _ => None,
            }
        };
        let sets: Vec<Option<Vec<Formula>>> = flat.iter().map(dual_children).collect();
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
        if keep.iter().any(|k| !k) {
            flat = flat.into_iter().zip(keep).filter_map(|(f, k)| k.then_some(f)).collect();
        }
    }

    match flat.len() {
        0 => Formula::constant(is_and),
        1 => flat.pop().unwrap(),
        _ => {
            let cs = flat.into_boxed_slice();
            intern(if is_and { Kind::And(cs) } else { Kind::Or(cs) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Formula {
        Formula::var(name)
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let a = Formula::and2(v("a"), Formula::finally(v("b")));
        let b = Formula::and2(Formula::finally(v("b")), v("a"));
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn constant_folding_and_flattening() {
        assert!(Formula::and2(v("a"), Formula::ff()).is_false());
        assert_eq!(Formula::or2(v("a"), Formula::ff()), v("a"));
        let nested = Formula::and2(v("a"), Formula::and2(v("b"), v("c")));
        assert_eq!(nested.children().len(), 3);
        assert!(Formula::and2(v("a"), Formula::neg_atom(Var::new("a"))).is_false());
    }

    #[test]
    fn absorption() {
        let a = v("a");
        let aorb = Formula::or2(a.clone(), v("b"));
        assert_eq!(Formula::and2(a.clone(), aorb.clone()), a);
        let abc = Formula::or(vec![v("a"), v("b"), v("c")]);
        assert_eq!(Formula::and2(aorb.clone(), abc), aorb);
    }

    #[test]
    fn temporal_rules() {
        let a = v("a");
        let ga = Formula::globally(a.clone());
        assert_eq!(Formula::globally(ga.clone()), ga);
        let fga = Formula::finally(ga.clone());
        assert_eq!(Formula::globally(fga.clone()), fga);
        let gfa = Formula::globally(Formula::finally(a.clone()));
        assert_eq!(Formula::finally(gfa.clone()), gfa);
        let x = Formula::next(Formula::and2(a.clone(), v("b")));
        assert!(matches!(x.kind(), Kind::And(_)));
        assert_eq!(Formula::until(Formula::tt(), a.clone()), Formula::finally(a.clone()));
        assert_eq!(Formula::release(Formula::ff(), a.clone()), ga);
    }

    #[test]
    fn negation_is_involutive() {
        let f = Formula::until(v("a"), Formula::globally(Formula::or2(v("b"), Formula::next(v("c")))));
        assert_eq!(f.negate().negate(), f);
    }
}
