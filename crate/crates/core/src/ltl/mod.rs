//! LTL syntax, progression, lasso semantics and formula measures.

mod alphabet;
mod formula;
mod measures;
mod parse;
mod progress;
mod random;
mod semantics;

pub use alphabet::{Letter, Partition, PartitionError, DEFAULT_MAX_PROPS};
pub use formula::{table_size, Formula, Kind, Var};
pub use measures::{
    controllability, quantified_trueness, syntactic_measures, trueness, MeasureError, Quantifier, SyntacticMeasures,
    EXACT_VAR_CAP, SAMPLE_COUNT,
};
pub use parse::{parse_ltl, ParseError};
pub use progress::{af, af_with, normalize_dnf};
pub use random::random_formula;
pub use semantics::{eval_lasso, LassoWord};
