//! Synthetic specifications: a DNF of assumptions implying a DNF of
//! guarantees, instantiated from template pools.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autlab::Automaton;
use crate::ltl::{parse_ltl, Formula, Partition};

/// Template pools; `{e1}`, `{e2}` stand for environment propositions and
/// `{s1}`, `{s2}` for system propositions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PatternPools {
    pub assumptions: Vec<String>,
    pub guarantees: Vec<String>,
}

impl PatternPools {
    pub fn builtin() -> PatternPools {
        serde_json::from_str(include_str!("../../data/patterns.json")).expect("bundled patterns parse")
    }
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub pools: PatternPools,
    pub max_disjuncts: usize,
    pub max_conjuncts: usize,
    pub env_props: usize,
    pub sys_props: usize,
    pub seed: u64,
    /// Rejection-sampling attempts per output.
    pub attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            pools: PatternPools::builtin(),
            max_disjuncts: 2,
            max_conjuncts: 2,
            env_props: 2,
            sys_props: 2,
            seed: 0,
            attempts: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("no supported formula after {0} attempts")]
    Exhausted(usize),
    #[error("empty template pool")]
    EmptyPool,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub formula: Formula,
    pub partition: Partition,
    /// Source text, `(A) -> (G)`.
    pub text: String,
}

fn instantiate(t: &str, env: &[String], sys: &[String], rng: &mut impl Rng) -> String {
    let e: Vec<&String> = env.choose_multiple(rng, 2).collect();
    let s: Vec<&String> = sys.choose_multiple(rng, 2).collect();
    let pick = |v: &[&String], i: usize| v.get(i).or(v.first()).map_or("true".to_string(), |x| x.to_string());
    t.replace("{e1}", &pick(&e, 0))
        .replace("{e2}", &pick(&e, 1))
        .replace("{s1}", &pick(&s, 0))
        .replace("{s2}", &pick(&s, 1))
}

fn dnf_text(pool: &[String], cfg: &GenConfig, env: &[String], sys: &[String], rng: &mut impl Rng) -> String {
    let d = rng.gen_range(1..=cfg.max_disjuncts);
    let terms: Vec<String> = (0..d)
        .map(|_| {
            let c = rng.gen_range(1..=cfg.max_conjuncts);
            let conj: Vec<String> = (0..c)
                .map(|_| format!("({})", instantiate(pool.choose(rng).unwrap(), env, sys, rng)))
                .collect();
            format!("({})", conj.join(" & "))
        })
        .collect();
    terms.join(" | ")
}

/// One unfiltered candidate.
pub fn candidate(cfg: &GenConfig, rng: &mut impl Rng) -> Sample {
    let env: Vec<String> = (0..cfg.env_props).map(|i| format!("r{i}")).collect();
    let sys: Vec<String> = (0..cfg.sys_props).map(|i| format!("g{i}")).collect();
    let a = dnf_text(&cfg.pools.assumptions, cfg, &env, &sys, rng);
    let g = dnf_text(&cfg.pools.guarantees, cfg, &env, &sys, rng);
    let text = format!("({a}) -> ({g})");
    let formula = parse_ltl(&text).expect("templates parse");
    let used = formula.vars();
    let partition = Partition::new(
        env.iter()
            .map(|n| crate::ltl::Var::new(n))
            .filter(|v| used.contains(v))
            .collect(),
        sys.iter()
            .map(|n| crate::ltl::Var::new(n))
            .filter(|v| used.contains(v))
            .collect(),
    )
    .expect("disjoint names");
    Sample {
        formula,
        partition,
        text,
    }
}

pub fn is_supported(s: &Sample) -> bool {
    Automaton::new(&s.formula, &s.partition).is_ok()
}

/// `n` supported samples, deterministic under the seed.
pub fn gen_formulas(cfg: &GenConfig, n: usize) -> Result<Vec<Sample>, GenError> {
    if cfg.pools.assumptions.is_empty() || cfg.pools.guarantees.is_empty() {
        return Err(GenError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut tries = 0;
        loop {
            let s = candidate(cfg, &mut rng);
            if is_supported(&s) {
                out.push(s);
                break;
            }
            tries += 1;
            if tries >= cfg.attempts {
                return Err(GenError::Exhausted(tries));
            }
        }
    }
    Ok(out)
}

/// Number of automaton states, or `None` past `limit`.
pub fn automaton_size(s: &Sample, limit: usize) -> Option<usize> {
    let mut aut = Automaton::new(&s.formula, &s.partition).ok()?;
    aut.explore_all(limit).ok()?;
    Some(aut.len())
}

/// Splits samples into training-sized (at most `train_max` automaton
/// states) and larger ones.
pub fn split_by_size(samples: Vec<Sample>, train_max: usize) -> (Vec<Sample>, Vec<Sample>) {
    samples
        .into_iter()
        .partition(|s| automaton_size(s, train_max).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = GenConfig {
            seed: 9,
            ..Default::default()
        };
        let a: Vec<String> = gen_formulas(&cfg, 2).unwrap().into_iter().map(|s| s.text).collect();
        let b: Vec<String> = gen_formulas(&cfg, 2).unwrap().into_iter().map(|s| s.text).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_is_an_implication() {
        for s in gen_formulas(&GenConfig::default(), 20).unwrap() {
            let (lhs, rhs) = s.text.split_once(") -> (").unwrap();
            let expected = parse_ltl(&format!("!{lhs}) | ({rhs}")).unwrap();
            assert_eq!(s.formula, expected);
        }
    }

    #[test]
    fn pools_have_the_advertised_size() {
        let p = PatternPools::builtin();
        assert_eq!(p.assumptions.len(), 40);
        assert_eq!(p.guarantees.len(), 60);
    }
}
