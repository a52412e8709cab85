//! Gradient-boosted depth-limited regression trees with logistic loss on
//! pair inputs `(a, b, a - b)`, and recursive feature elimination.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::dataset::{Dataset, Row};
use crate::featex::FeatureSpec;
use crate::guide::{ClassModel, PairModel, StateClass, Tree, MODEL_VERSION};

#[derive(Clone, Debug, PartialEq)]
pub struct GbtParams {
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            trees: 30,
            depth: 2,
            learning_rate: 0.2,
            min_leaf: 5,
            lambda: 1.0,
        }
    }
}

fn column(r: &Row, j: usize) -> f64 {
    let m = r.a.len();
    if j < m {
        r.a[j]
    } else if j < 2 * m {
        r.b[j - m]
    } else {
        r.a[j - 2 * m] - r.b[j - 2 * m]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug)]
struct Split {
    gain: f64,
    col: usize,
    threshold: f64,
}

enum Grow {
    Leaf,
    Split(Split),
}

/// Trees, base score and per-column split gain of one class.
pub struct Fitted {
    pub model: ClassModel,
    pub gain: Vec<f64>,
}

pub fn fit_class(rows: &[Row], specs: &[FeatureSpec], hp: &GbtParams) -> Fitted {
    let n = rows.len();
    let width = 3 * specs.len();
    let mean_w = rows.iter().map(|r| r.weight).sum::<f64>() / n.max(1) as f64;
    let w: Vec<f64> = rows
        .iter()
        .map(|r| if mean_w > 0.0 { r.weight / mean_w } else { 1.0 })
        .collect();
    let pos: f64 = rows.iter().zip(&w).filter(|(r, _)| r.label > 0.0).map(|(_, w)| w).sum();
    let neg: f64 = rows
        .iter()
        .zip(&w)
        .filter(|(r, _)| r.label <= 0.0)
        .map(|(_, w)| w)
        .sum();
    if pos == 0.0 || neg == 0.0 {
        log::warn!("degenerate class with a single label; fitting a constant");
        return Fitted {
            model: ClassModel {
                feature_specs: specs.to_vec(),
                trees: Vec::new(),
                base_score: if pos > 0.0 {
                    1.0
                } else if neg > 0.0 {
                    -1.0
                } else {
                    0.0
                },
            },
            gain: vec![0.0; width],
        };
    }
    let base = (pos / neg).ln();
    let order: Vec<Vec<u32>> = (0..width)
        .into_par_iter()
        .map(|j| {
            let mut o: Vec<u32> = (0..n as u32).collect();
            o.sort_by(|&x, &y| {
                column(&rows[x as usize], j)
                    .total_cmp(&column(&rows[y as usize], j))
                    .then(x.cmp(&y))
            });
            o
        })
        .collect();
    let mut f = vec![base; n];
    let mut trees = Vec::with_capacity(hp.trees);
    let mut gain = vec![0.0; width];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..hp.trees {
        for i in 0..n {
            let y = rows[i].label.signum();
            let s = sigmoid(-y * f[i]);
            g[i] = -w[i] * y * s;
            h[i] = w[i] * s * (1.0 - s);
        }
        // grow level by level; `leaf_of` maps rows to open leaves
        let mut leaf_of = vec![0u32; n];
        let mut open = 1usize;
        let mut shapes: Vec<Vec<Grow>> = Vec::new();
        for _ in 0..hp.depth {
            let sums = leaf_sums(&leaf_of, &g, &h, open);
            let best: Vec<Option<Split>> = best_splits(rows, &order, &leaf_of, &g, &h, &sums, open, hp);
            let mut level = Vec::with_capacity(open);
            let mut next_id = vec![u32::MAX; open];
            let mut next_open = 0u32;
            for (k, b) in best.iter().enumerate() {
                match b {
                    Some(s) => {
                        gain[s.col] += s.gain;
                        next_id[k] = next_open;
                        next_open += 2;
                        level.push(Grow::Split(*s));
                    }
                    None => level.push(Grow::Leaf),
                }
            }
            if next_open == 0 {
                break;
            }
            for i in 0..n {
                let k = leaf_of[i];
                if k == u32::MAX {
                    continue;
                }
                leaf_of[i] = match &level[k as usize] {
                    Grow::Split(s) => next_id[k as usize] + (column(&rows[i], s.col) > s.threshold) as u32,
                    Grow::Leaf => u32::MAX,
                };
            }
            // rows parked in finished leaves keep their final leaf via the shape
            shapes.push(level);
            open = next_open as usize;
        }
        let tree = assemble(rows, &shapes, &g, &h, hp);
        for i in 0..n {
            let x: Vec<f64> = (0..width).map(|j| column(&rows[i], j)).collect();
            f[i] += tree.predict(&x);
        }
        trees.push(tree);
    }
    Fitted {
        model: ClassModel {
            feature_specs: specs.to_vec(),
            trees,
            base_score: base,
        },
        gain,
    }
}

fn leaf_sums(leaf_of: &[u32], g: &[f64], h: &[f64], open: usize) -> Vec<(f64, f64, usize)> {
    let mut s = vec![(0.0, 0.0, 0); open];
    for (i, &k) in leaf_of.iter().enumerate() {
        if k != u32::MAX {
            let e = &mut s[k as usize];
            e.0 += g[i];
            e.1 += h[i];
            e.2 += 1;
        }
    }
    s
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

#[allow(clippy::too_many_arguments)]
fn best_splits(
    rows: &[Row],
    order: &[Vec<u32>],
    leaf_of: &[u32],
    g: &[f64],
    h: &[f64],
    sums: &[(f64, f64, usize)],
    open: usize,
    hp: &GbtParams,
) -> Vec<Option<Split>> {
    let per_col: Vec<Vec<Option<Split>>> = order
        .par_iter()
        .enumerate()
        .map(|(j, o)| {
            let mut best: Vec<Option<Split>> = vec![None; open];
            let mut acc = vec![(0.0f64, 0.0f64, 0usize, f64::NAN); open];
            for &i in o {
                let k = leaf_of[i as usize];
                if k == u32::MAX {
                    continue;
                }
                let k = k as usize;
                let v = column(&rows[i as usize], j);
                let (gl, hl, cl, last) = acc[k];
                if cl >= hp.min_leaf && v > last && sums[k].2 - cl >= hp.min_leaf {
                    let (gt, ht, _) = sums[k];
                    let gain = score(gl, hl, hp.lambda) + score(gt - gl, ht - hl, hp.lambda) - score(gt, ht, hp.lambda);
                    if gain > 1e-12 && best[k].is_none_or(|b| gain > b.gain) {
                        best[k] = Some(Split {
                            gain,
                            col: j,
                            threshold: last + (v - last) / 2.0,
                        });
                    }
                }
                acc[k] = (gl + g[i as usize], hl + h[i as usize], cl + 1, v);
            }
            best
        })
        .collect();
    (0..open)
        .map(|k| {
            let mut b: Option<Split> = None;
            for c in &per_col {
                if let Some(s) = c[k] {
                    if b.is_none_or(|x| s.gain > x.gain) {
                        b = Some(s);
                    }
                }
            }
            b
        })
        .collect()
}

/// Turns the grown levels into a tree with Newton leaf values.
fn assemble(rows: &[Row], shapes: &[Vec<Grow>], g: &[f64], h: &[f64], hp: &GbtParams) -> Tree {
    #[allow(clippy::too_many_arguments)]
    fn build(
        level: usize,
        k: usize,
        shapes: &[Vec<Grow>],
        members: Vec<usize>,
        rows: &[Row],
        g: &[f64],
        h: &[f64],
        hp: &GbtParams,
    ) -> Tree {
        let split = shapes.get(level).and_then(|l| match &l[k] {
            Grow::Split(s) => Some(*s),
            Grow::Leaf => None,
        });
        match split {
            None => {
                let gs: f64 = members.iter().map(|&i| g[i]).sum();
                let hs: f64 = members.iter().map(|&i| h[i]).sum();
                Tree::Leaf(-gs / (hs + hp.lambda) * hp.learning_rate)
            }
            Some(s) => {
                // children ids on the next level, counted over splits before k
                let base = shapes[level][..k]
                    .iter()
                    .filter(|x| matches!(x, Grow::Split(_)))
                    .count()
                    * 2;
                let (l, r): (Vec<usize>, Vec<usize>) = members
                    .into_iter()
                    .partition(|&i| column(&rows[i], s.col) <= s.threshold);
                Tree::Split {
                    feature_index: s.col,
                    threshold: s.threshold,
                    left: Box::new(build(level + 1, base, shapes, l, rows, g, h, hp)),
                    right: Box::new(build(level + 1, base + 1, shapes, r, rows, g, h, hp)),
                }
            }
        }
    }
    build(0, 0, shapes, (0..rows.len()).collect(), rows, g, h, hp)
}

/// Fits all four classes; a class without rows gets an empty model.
pub fn train_gbt(ds: &Dataset, hp: &GbtParams, meta: serde_json::Value) -> (PairModel, BTreeMap<StateClass, Vec<f64>>) {
    let mut classes = BTreeMap::new();
    let mut gains = BTreeMap::new();
    for c in StateClass::ALL {
        let rows = ds.classes.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        let fitted = fit_class(rows, &ds.specs, hp);
        classes.insert(c.name().to_string(), fitted.model);
        gains.insert(c, fitted.gain);
    }
    (
        PairModel {
            version: MODEL_VERSION,
            classes,
            training_meta: meta,
        },
        gains,
    )
}

/// Per-feature importance: the maximum over its three input appearances,
/// summed over classes.
pub fn importance(specs: &[FeatureSpec], gains: &BTreeMap<StateClass, Vec<f64>>) -> Vec<f64> {
    let m = specs.len();
    (0..m)
        .map(|j| gains.values().map(|g| g[j].max(g[m + j]).max(g[2 * m + j])).sum())
        .collect()
}

/// Drops the least important tenth per round until `target` remain.
pub fn rfe(ds: &Dataset, hp: &GbtParams, start: &[FeatureSpec], target: usize) -> Vec<FeatureSpec> {
    let mut cur = start.to_vec();
    while cur.len() > target {
        let sub = ds.project(&cur);
        let (_, gains) = train_gbt(&sub, hp, serde_json::Value::Null);
        let imp = importance(&cur, &gains);
        let drop = cur.len().div_ceil(10).min(cur.len() - target);
        let mut idx: Vec<usize> = (0..cur.len()).collect();
        idx.sort_by(|&x, &y| imp[x].total_cmp(&imp[y]).then(y.cmp(&x)));
        let mut gone = idx[..drop].to_vec();
        gone.sort_unstable();
        cur = cur
            .into_iter()
            .enumerate()
            .filter(|(i, _)| gone.binary_search(i).is_err())
            .map(|(_, s)| s)
            .collect();
        log::debug!("rfe: {} features left", cur.len());
    }
    cur
}
