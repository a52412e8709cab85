//! Numeric features of automaton states and game edges.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autlab::{Automaton, StateId};
use crate::ltl::{controllability, quantified_trueness, syntactic_measures, trueness, Formula, Quantifier};
use crate::Player;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    Trueness,
    QuantForall,
    QuantExists,
    Controllability,
    TemporalOps,
    Height,
    Size,
    TopDisjuncts,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    AlongMaster,
    MaxOverComponents,
    MinOverComponents,
    MasterOnly,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeMode {
    Successor,
    Delta,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureSpec {
    State {
        base: Base,
        agg: Aggregation,
        mode: EdgeMode,
        normalized: bool,
    },
    ParityBit,
    LinearScale,
}

const BASES: [(Base, &str); 8] = [
    (Base::Trueness, "trueness"),
    (Base::QuantForall, "quantForall"),
    (Base::QuantExists, "quantExists"),
    (Base::Controllability, "controllability"),
    (Base::TemporalOps, "temporalOps"),
    (Base::Height, "height"),
    (Base::Size, "size"),
    (Base::TopDisjuncts, "topDisjuncts"),
];

const AGGS: [(Aggregation, &str); 4] = [
    (Aggregation::AlongMaster, "alongMaster"),
    (Aggregation::MaxOverComponents, "maxOverComponents"),
    (Aggregation::MinOverComponents, "minOverComponents"),
    (Aggregation::MasterOnly, "masterOnly"),
];

const MODES: [(EdgeMode, &str); 2] = [(EdgeMode::Successor, "successorValue"), (EdgeMode::Delta, "delta")];

impl FeatureSpec {
    /// The whole enumerable family, in canonical order.
    pub fn all() -> Vec<FeatureSpec> {
        let mut out = Vec::with_capacity(130);
        for (base, _) in BASES {
            for (agg, _) in AGGS {
                for (mode, _) in MODES {
                    for normalized in [false, true] {
                        out.push(FeatureSpec::State {
                            base,
                            agg,
                            mode,
                            normalized,
                        });
                    }
                }
            }
        }
        out.push(FeatureSpec::ParityBit);
        out.push(FeatureSpec::LinearScale);
        out
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpec::ParityBit => f.write_str("parityBit"),
            FeatureSpec::LinearScale => f.write_str("linearScale"),
            FeatureSpec::State {
                base,
                agg,
                mode,
                normalized,
            } => {
                let b = BASES.iter().find(|x| x.0 == *base).unwrap().1;
                let a = AGGS.iter().find(|x| x.0 == *agg).unwrap().1;
                let m = MODES.iter().find(|x| x.0 == *mode).unwrap().1;
                write!(f, "{b}.{a}.{m}")?;
                if *normalized {
                    f.write_str(".normalized")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown feature name {0:?}")]
pub struct UnknownFeature(pub String);

impl FromStr for FeatureSpec {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parityBit" => return Ok(FeatureSpec::ParityBit),
            "linearScale" => return Ok(FeatureSpec::LinearScale),
            _ => {}
        }
        let err = || UnknownFeature(s.to_string());
        let parts: Vec<&str> = s.split('.').collect();
        let normalized = match parts.len() {
            3 => false,
            4 if parts[3] == "normalized" => true,
            _ => return Err(err()),
        };
        let base = BASES.iter().find(|x| x.1 == parts[0]).ok_or_else(err)?.0;
        let agg = AGGS.iter().find(|x| x.1 == parts[1]).ok_or_else(err)?.0;
        let mode = MODES.iter().find(|x| x.1 == parts[2]).ok_or_else(err)?.0;
        Ok(FeatureSpec::State {
            base,
            agg,
            mode,
            normalized,
        })
    }
}

impl Serialize for FeatureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One edge as seen by the ranking and feature code.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeCtx {
    pub source: StateId,
    pub target: StateId,
    pub priority: u32,
    /// Canonical tie-break: (target state, priority, letter).
    pub key: (u32, u32, u32),
}

pub fn parity_bit(priority: u32) -> f64 {
    if priority.is_multiple_of(2) {
        1.0
    } else {
        0.0
    }
}

pub fn linear_scale(priority: u32) -> f64 {
    let m = 1.0 / (1.0 + priority as f64);
    if priority.is_multiple_of(2) {
        m
    } else {
        -m
    }
}

/// Min-max rescaling across siblings; constant columns map to 0.5.
pub fn normalize(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in values.iter_mut() {
        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
    }
}

/// Feature evaluation with caches that live as long as one solve.
#[derive(Default)]
pub struct Featurizer {
    base_cache: FxHashMap<(u32, Base), f64>,
    state_cache: FxHashMap<(StateId, Base, Aggregation), f64>,
    edge_cache: FxHashMap<(Vec<EdgeCtx>, u64), Vec<Vec<f64>>>,
    caching: bool,
}

impl Featurizer {
    pub fn new() -> Self {
        Featurizer {
            caching: true,
            ..Default::default()
        }
    }

    /// No memoization at all; for checking that caches are transparent.
    pub fn uncached() -> Self {
        Featurizer::default()
    }

    pub fn base_value(&mut self, aut: &Automaton, base: Base, f: &Formula) -> f64 {
        if self.caching {
            if let Some(&v) = self.base_cache.get(&(f.id(), base)) {
                return v;
            }
        }
        let p = aut.partition();
        let v = match base {
            Base::Trueness => trueness(f).unwrap_or(0.5),
            Base::QuantForall => quantified_trueness(f, p, Player::Sys, Quantifier::Forall).unwrap_or(0.5),
            Base::QuantExists => quantified_trueness(f, p, Player::Sys, Quantifier::Exists).unwrap_or(0.5),
            Base::Controllability => controllability(f, p, Player::Sys),
            Base::TemporalOps => syntactic_measures(f).temporal_ops,
            Base::Height => syntactic_measures(f).height,
            Base::Size => syntactic_measures(f).size,
            Base::TopDisjuncts => syntactic_measures(f).top_disjuncts,
        };
        if self.caching {
            self.base_cache.insert((f.id(), base), v);
        }
        v
    }

    pub fn state_value(&mut self, aut: &Automaton, base: Base, agg: Aggregation, s: StateId) -> f64 {
        if self.caching {
            if let Some(&v) = self.state_cache.get(&(s, base, agg)) {
                return v;
            }
        }
        let master = aut.master(s).clone();
        let v = match agg {
            Aggregation::MasterOnly => self.base_value(aut, base, &master),
            Aggregation::AlongMaster => {
                let st = aut.state(s);
                let mut leaf_val = FxHashMap::default();
                for (i, f) in st.progress.iter().map(|(i, _)| *i).zip(aut.components(s)) {
                    leaf_val.insert(i as usize, self.base_value(aut, base, &f));
                }
                let tt = self.base_value(aut, base, &Formula::tt());
                let ff = self.base_value(aut, base, &Formula::ff());
                st.master.fold(
                    &|atom, constant| match (atom, constant) {
                        (Some(i), _) => leaf_val[&i],
                        (None, Some(true)) => tt,
                        _ => ff,
                    },
                    &f64::min,
                    &f64::max,
                )
            }
            Aggregation::MaxOverComponents | Aggregation::MinOverComponents => {
                let comps = aut.components(s);
                if comps.is_empty() {
                    self.base_value(aut, base, &master)
                } else {
                    let vals = comps.iter().map(|c| self.base_value(aut, base, c));
                    if agg == Aggregation::MaxOverComponents {
                        vals.fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        vals.fold(f64::INFINITY, f64::min)
                    }
                }
            }
        };
        if self.caching {
            self.state_cache.insert((s, base, agg), v);
        }
        v
    }

    /// Feature vectors of a sibling set, one row per edge.
    pub fn edge_matrix(&mut self, aut: &Automaton, specs: &[FeatureSpec], edges: &[EdgeCtx]) -> Vec<Vec<f64>> {
        let key = if self.caching {
            let k = (edges.to_vec(), spec_hash(specs));
            if let Some(m) = self.edge_cache.get(&k) {
                return m.clone();
            }
            Some(k)
        } else {
            None
        };
        let mut rows = vec![vec![0.0; specs.len()]; edges.len()];
        for (j, spec) in specs.iter().enumerate() {
            let mut col: Vec<f64> = edges
                .iter()
                .map(|e| match *spec {
                    FeatureSpec::ParityBit => parity_bit(e.priority),
                    FeatureSpec::LinearScale => linear_scale(e.priority),
                    FeatureSpec::State { base, agg, mode, .. } => {
                        let t = self.state_value(aut, base, agg, e.target);
                        match mode {
                            EdgeMode::Successor => t,
                            EdgeMode::Delta => t - self.state_value(aut, base, agg, e.source),
                        }
                    }
                })
                .collect();
            if matches!(spec, FeatureSpec::State { normalized: true, .. }) {
                normalize(&mut col);
            }
            for (row, v) in rows.iter_mut().zip(col) {
                row[j] = v;
            }
        }
        if let Some(k) = key {
            self.edge_cache.insert(k, rows.clone());
        }
        rows
    }
}

pub fn spec_hash(specs: &[FeatureSpec]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = rustc_hash::FxHasher::default();
    specs.hash(&mut h);
    h.finish()
}
