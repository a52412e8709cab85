//! Rabin pairs from the master's DNF and the index appearance record.

use super::decompose::{Atom, AtomKind, Skeleton};

/// Upper bound on DNF disjuncts (and thus Rabin pairs) per master.
pub const MAX_PAIRS: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RabinPair {
    /// GSuffix atoms; all must fire infinitely often.
    pub good: Vec<u16>,
    /// FSuffix atoms; each may restart only finitely often.
    pub bad: Vec<u16>,
}

type Conj = Vec<u16>;

fn dnf(s: &Skeleton, leaf: &impl Fn(u16) -> Option<Option<bool>>, cap: usize) -> Option<Vec<Conj>> {
    let out = match s {
        Skeleton::Const(true) => vec![Vec::new()],
        Skeleton::Const(false) => Vec::new(),
        Skeleton::Atom(i) => match leaf(*i) {
            None => vec![vec![*i]],
            Some(Some(true)) => vec![Vec::new()],
            Some(_) => Vec::new(),
        },
        Skeleton::Or(cs) => {
            let mut acc = Vec::new();
            for c in cs {
                acc.extend(dnf(c, leaf, cap)?);
                if acc.len() > cap {
                    return None;
                }
            }
            acc
        }
        Skeleton::And(cs) => {
            let mut acc: Vec<Conj> = vec![Vec::new()];
            for c in cs {
                let d = dnf(c, leaf, cap)?;
                let mut next = Vec::with_capacity(acc.len() * d.len());
                for x in &acc {
                    for y in &d {
                        let mut z = x.clone();
                        z.extend_from_slice(y);
                        z.sort_unstable();
                        z.dedup();
                        next.push(z);
                    }
                }
                acc = minimize(next);
                if acc.len() > cap {
                    return None;
                }
            }
            acc
        }
    };
    Some(minimize(out))
}

/// Drops duplicate and subsumed (superset) conjunctions.
fn minimize(mut ds: Vec<Conj>) -> Vec<Conj> {
    ds.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    ds.dedup();
    let mut keep: Vec<Conj> = Vec::with_capacity(ds.len());
    for d in ds {
        if !keep.iter().any(|k| k.iter().all(|x| d.binary_search(x).is_ok())) {
            keep.push(d);
        }
    }
    keep.sort();
    keep
}

/// Number of disjuncts when finite atoms are kept as free variables; bounds
/// the pair count of every master reachable by substitution.
pub fn dnf_bound(s: &Skeleton) -> Option<usize> {
    dnf(s, &|_| None, MAX_PAIRS).map(|d| d.len())
}

/// One Rabin pair per disjunct of the master with finite atoms replaced by
/// their limit value (co-safety never satisfied, safety never violated).
pub fn rabin_pairs(master: &Skeleton, atoms: &[Atom]) -> Vec<RabinPair> {
    let leaf = |i: u16| match atoms[i as usize].kind {
        AtomKind::CoSafety => Some(Some(false)),
        AtomKind::Safety => Some(Some(true)),
        _ => None,
    };
    let ds = dnf(master, &leaf, usize::MAX).expect("uncapped");
    ds.into_iter()
        .map(|d| {
            let (good, bad) = d
                .into_iter()
                .partition(|&i| atoms[i as usize].kind == AtomKind::GSuffix);
            RabinPair { good, bad }
        })
        .collect()
}

/// One step of the index appearance record under min-parity. A bad event at
/// position `p` emits `2p - 1`, a good one `2p`, nothing at all `2k + 1`.
///
/// `good`/`bad` are bitmasks over pair ids; `iar` lists pair ids front to back.
pub fn iar_step(iar: &[u8], good: u64, bad: u64, k: usize) -> (Vec<u8>, u32) {
    let gd = good & !bad;
    let mut p_bad = None;
    let mut p_good = None;
    for (pos, &j) in iar.iter().enumerate() {
        let bit = 1u64 << j;
        if bad & bit != 0 && p_bad.is_none() {
            p_bad = Some(pos as u32 + 1);
        }
        if gd & bit != 0 && p_good.is_none() {
            p_good = Some(pos as u32 + 1);
        }
    }
    let priority = match (p_bad, p_good) {
        (Some(b), Some(g)) if b <= g => 2 * b - 1,
        (Some(b), None) => 2 * b - 1,
        (_, Some(g)) => 2 * g,
        (None, None) => 2 * k as u32 + 1,
    };
    let mut next: Vec<u8> = iar.iter().copied().filter(|&j| bad >> j & 1 == 0).collect();
    next.extend(iar.iter().copied().filter(|&j| bad >> j & 1 == 1));
    (next, priority)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_events() {
        assert_eq!(iar_step(&[0], 1, 0, 1), (vec![0], 2));
        assert_eq!(iar_step(&[0], 0, 1, 1), (vec![0], 1));
        assert_eq!(iar_step(&[0], 0, 0, 1), (vec![0], 3));
    }

    #[test]
    fn good_ahead_of_bad() {
        // pair ids 0,1 stand for pairs 1,2
        assert_eq!(iar_step(&[0, 1], 0b01, 0b10, 2), (vec![0, 1], 2));
        assert_eq!(iar_step(&[0, 1], 0b10, 0b01, 2), (vec![1, 0], 1));
        assert_eq!(iar_step(&[1, 0], 0b01, 0, 2), (vec![1, 0], 4));
    }

    #[test]
    fn unstable_pair_cannot_win_its_own_slot() {
        // pair 0 alternates good and bad behind a silent pair 1
        let (r, p1) = iar_step(&[0, 1], 0, 0b01, 2);
        assert_eq!(r, vec![1, 0]);
        let (r, p2) = iar_step(&r, 0b01, 0, 2);
        let (_, p3) = iar_step(&r, 0, 0b01, 2);
        assert_eq!((p1, p2, p3), (1, 4, 3));
        assert_eq!(p2.min(p3) % 2, 1);
    }

    #[test]
    fn dnf_minimizes() {
        let s = Skeleton::and(vec![
            Skeleton::or(vec![Skeleton::Atom(0), Skeleton::Atom(1)]),
            Skeleton::or(vec![Skeleton::Atom(0), Skeleton::Atom(2)]),
        ]);
        let d = dnf(&s, &|_| None, 64).unwrap();
        assert_eq!(d, vec![vec![0], vec![1, 2]]);
        assert_eq!(dnf_bound(&s), Some(2));
    }
}
