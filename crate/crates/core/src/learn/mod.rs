//! Offline pipeline: formula generation, ground truth, datasets, boosted
//! pair classifiers, feature elimination and evaluation.

pub mod dataset;
pub mod eval;
pub mod gbt;
pub mod gen;
pub mod truth;

pub use dataset::{build_dataset, Dataset, Row, DEFAULT_ROW_CAP};
pub use eval::{random_eval, state_score_eval, ClassScores};
pub use gbt::{rfe, train_gbt, GbtParams};
pub use gen::{gen_formulas, GenConfig, PatternPools, Sample};
pub use truth::{exact_truth, mcts_decision, mcts_edges, Decision, LabelledGame, MctsConfig, Truth, DEFAULT_GAMMA};

use rayon::prelude::*;

/// `n` labelled games from generated samples whose automata have at most
/// `max_states` states, in generation order. Labelling runs in parallel.
pub fn labelled_corpus(
    cfg: &GenConfig,
    n: usize,
    max_states: usize,
    max_nodes: usize,
    gamma: f64,
) -> Result<Vec<(Sample, LabelledGame)>, gen::GenError> {
    let mut out = Vec::with_capacity(n);
    let mut round = 0u64;
    while out.len() < n {
        let batch_cfg = GenConfig {
            seed: cfg.seed.wrapping_add(round.wrapping_mul(0x9E37_79B9)),
            ..cfg.clone()
        };
        let batch = gen_formulas(&batch_cfg, (n - out.len()) * 2 + 8)?;
        let labelled: Vec<Option<(Sample, LabelledGame)>> = batch
            .into_par_iter()
            .map(|s| {
                gen::automaton_size(&s, max_states)?;
                let g = LabelledGame::build(&s.formula, &s.partition, max_nodes, gamma).ok()?;
                Some((s, g))
            })
            .collect();
        out.extend(labelled.into_iter().flatten().take(n - out.len()));
        round += 1;
    }
    Ok(out)
}
