//! Pairwise training rows from labelled decisions.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::truth::{Decision, LabelledGame};
use crate::featex::{FeatureSpec, Featurizer};
use crate::guide::StateClass;

pub const DEFAULT_ROW_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// +1 if `a` has the larger ground truth.
    pub label: f64,
    pub weight: f64,
    #[serde(default)]
    pub meta: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub specs: Vec<FeatureSpec>,
    pub classes: BTreeMap<StateClass, Vec<Row>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonRow {
    class: String,
    feats_a: Vec<f64>,
    feats_b: Vec<f64>,
    diffs: Vec<f64>,
    label: f64,
    weight: f64,
    meta: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows restricted to the given columns of `self.specs`.
    pub fn project(&self, keep: &[FeatureSpec]) -> Dataset {
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.specs
                    .iter()
                    .position(|s| s == k)
                    .expect("subset of the dataset's specs")
            })
            .collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Dataset {
            specs: keep.to_vec(),
            classes: self
                .classes
                .iter()
                .map(|(c, rows)| {
                    let rows = rows
                        .iter()
                        .map(|r| Row {
                            a: pick(&r.a),
                            b: pick(&r.b),
                            ..r.clone()
                        })
                        .collect();
                    (*c, rows)
                })
                .collect(),
        }
    }

    /// JSON lines; the first line lists the feature names.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        let names: Vec<String> = self.specs.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{}", serde_json::json!({ "featureSpecs": names }))?;
        for (c, rows) in &self.classes {
            for r in rows {
                let j = JsonRow {
                    class: c.name().to_string(),
                    feats_a: r.a.clone(),
                    feats_b: r.b.clone(),
                    diffs: r.a.iter().zip(&r.b).map(|(x, y)| x - y).collect(),
                    label: r.label,
                    weight: r.weight,
                    meta: r.meta.clone(),
                };
                writeln!(w, "{}", serde_json::to_string(&j).expect("rows serialize"))?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Dataset, String> {
        let mut lines = r.lines();
        let head = lines.next().ok_or("empty dataset")?.map_err(|e| e.to_string())?;
        #[derive(Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct Head {
            feature_specs: Vec<FeatureSpec>,
        }
        let head: Head = serde_json::from_str(&head).map_err(|e| e.to_string())?;
        let mut ds = Dataset {
            specs: head.feature_specs,
            classes: BTreeMap::new(),
        };
        for line in lines {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let j: JsonRow = serde_json::from_str(&line).map_err(|e| e.to_string())?;
            let c = StateClass::from_name(&j.class).ok_or_else(|| format!("unknown class {}", j.class))?;
            ds.classes.entry(c).or_default().push(Row {
                a: j.feats_a,
                b: j.feats_b,
                label: j.label,
                weight: j.weight,
                meta: j.meta,
            });
        }
        Ok(ds)
    }
}

/// Rows of one decision: every pair with differing truth, in random
/// orientation.
pub fn decision_rows(d: &Decision, feats: &[Vec<f64>], rng: &mut impl Rng, meta: &str) -> Vec<Row> {
    let mut out = Vec::new();
    for i in 0..d.gt.len() {
        for j in i + 1..d.gt.len() {
            if d.gt[i] == d.gt[j] {
                continue;
            }
            let (x, y) = if rng.gen::<bool>() { (i, j) } else { (j, i) };
            let delta = d.gt[x] - d.gt[y];
            out.push(Row {
                a: feats[x].clone(),
                b: feats[y].clone(),
                label: delta.signum(),
                weight: delta.abs(),
                meta: meta.to_string(),
            });
        }
    }
    out
}

/// Uniform subsample without replacement down to `cap`, order preserved.
pub fn bootstrap(rows: Vec<Row>, cap: usize, rng: &mut impl Rng) -> Vec<Row> {
    if rows.len() <= cap {
        return rows;
    }
    let mut keep = (0..rows.len()).choose_multiple(rng, cap);
    keep.sort_unstable();
    let mut it = keep.into_iter().peekable();
    rows.into_iter()
        .enumerate()
        .filter_map(|(i, r)| {
            if it.peek() == Some(&i) {
                it.next();
                Some(r)
            } else {
                None
            }
        })
        .collect()
}

pub fn build_dataset(games: &mut [LabelledGame], specs: &[FeatureSpec], cap: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset {
        specs: specs.to_vec(),
        classes: BTreeMap::new(),
    };
    for (gi, g) in games.iter_mut().enumerate() {
        let mut feat = Featurizer::new();
        for (di, d) in g.decisions(&mut feat).iter().enumerate() {
            let feats = feat.edge_matrix(g.arena.automaton(), specs, &d.edges);
            let rows = decision_rows(d, &feats, &mut rng, &format!("{gi}:{di}"));
            ds.classes.entry(d.class).or_default().extend(rows);
        }
    }
    for rows in ds.classes.values_mut() {
        let taken = std::mem::take(rows);
        *rows = bootstrap(taken, cap, &mut rng);
        rows.shuffle(&mut rng);
    }
    ds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featex::EdgeCtx;
    use crate::Player;

    fn decision(gt: &[f64]) -> Decision {
        let e = EdgeCtx {
            source: 0,
            target: 0,
            priority: 0,
            key: (0, 0, 0),
        };
        Decision {
            owner: Player::Sys,
            class: StateClass::ALL[3],
            winner: Player::Sys,
            edges: vec![e; gt.len()],
            gt: gt.to_vec(),
            source: 0,
            targets: vec![0; gt.len()],
        }
    }

    #[test]
    fn row_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let feats = vec![vec![0.0]; 3];
        assert!(decision_rows(&decision(&[0.5, 0.5, 0.5]), &feats, &mut rng, "").is_empty());
        let rows = decision_rows(&decision(&[0.9, 0.5, -0.1]), &feats, &mut rng, "");
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.weight > 0.0 && r.label.abs() == 1.0));
    }

    #[test]
    fn bootstrap_cap() {
        let rows: Vec<Row> = (0..100)
            .map(|i| Row {
                a: vec![i as f64],
                b: vec![],
                label: 1.0,
                weight: 1.0,
                meta: String::new(),
            })
            .collect();
        let a = bootstrap(rows.clone(), 10, &mut ChaCha8Rng::seed_from_u64(4));
        let b = bootstrap(rows, 10, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
    }
}
