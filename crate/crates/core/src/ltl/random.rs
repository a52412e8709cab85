use rand::Rng;

use super::formula::{Formula, Var};

/// Random formula with about `nodes` syntax-tree nodes over `vars`, before
/// simplification.
pub fn random_formula(rng: &mut impl Rng, vars: &[Var], nodes: usize) -> Formula {
    if nodes <= 1 || vars.is_empty() {
        if vars.is_empty() {
            return Formula::constant(rng.gen());
        }
        let v = vars[rng.gen_range(0..vars.len())];
        return Formula::literal(v, rng.gen_bool(0.7));
    }
    if nodes == 2 || rng.gen_bool(0.4) {
        let a = random_formula(rng, vars, nodes - 1);
        return match rng.gen_range(0..4) {
            0 => Formula::next(a),
            1 => Formula::finally(a),
            2 => Formula::globally(a),
            _ => a.negate(),
        };
    }
    let left = rng.gen_range(1..nodes - 1);
    let a = random_formula(rng, vars, left);
    let b = random_formula(rng, vars, nodes - 1 - left);
    match rng.gen_range(0..6) {
        0 | 1 => Formula::and2(a, b),
        2 | 3 => Formula::or2(a, b),
        4 => Formula::until(a, b),
        _ => Formula::release(a, b),
    }
}
