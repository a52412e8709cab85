use guidesynth::arena::Verdict;
use guidesynth::explore::{run, ExploreConfig};
use guidesynth::guide::{Baseline, Heuristic, RandomOrder, Reverse};
use guidesynth::ltl::{random_formula, Formula, Partition};
use guidesynth::psolve::solve_full_oracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instances(n: usize, seed: u64) -> Vec<(Formula, Partition, Verdict)> {
    let p = Partition::from_names(&["r1", "r2"], &["g1", "g2"]).unwrap();
    let vars: Vec<_> = p.env().iter().chain(p.sys()).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let f = random_formula(&mut rng, &vars, 9);
        if let Ok(v) = solve_full_oracle(&f, &p) {
            out.push((f, p.clone(), v));
        }
    }
    out
}

fn sweep(h: &mut dyn Heuristic) {
    for (f, p, expected) in instances(150, 11) {
        let got = run(&f, &p, ExploreConfig::default(), h).unwrap();
        assert_eq!(got.verdict, expected, "{f} under {}", h.name());
    }
}

#[test]
fn baseline_matches_oracle() {
    sweep(&mut Baseline);
}

#[test]
fn reverse_matches_oracle() {
    sweep(&mut Reverse);
}

#[test]
fn random_matches_oracle() {
    sweep(&mut RandomOrder::new(3));
}

#[test]
fn small_stints_and_fanout_match_oracle() {
    for (f, p, expected) in instances(60, 5) {
        let cfg = ExploreConfig {
            stint_budget: 2,
            fanout: 1,
            ..Default::default()
        };
        assert_eq!(run(&f, &p, cfg, &mut Baseline).unwrap().verdict, expected, "{f}");
    }
}

#[test]
fn verdict_balance_is_nontrivial() {
    let all = instances(150, 11);
    let real = all.iter().filter(|x| x.2 == Verdict::Realizable).count();
    assert!(real > 15 && real < 135, "{real}");
}
