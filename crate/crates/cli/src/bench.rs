//! Heuristic comparison over an instance set: per-run CSV and geometric
//! mean runtime ratios against the first heuristic.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use guidesynth::arena::Verdict;
use guidesynth::explore::{run_timed, ExploreConfig};

use crate::{heuristic, read_instances, CliError, Instance, RunReport};

#[derive(Args)]
pub(crate) struct BenchArgs {
    /// Instance file (JSON lines from `gen`).
    #[arg(long)]
    instances: PathBuf,
    /// Heuristics, comma separated; ratios are relative to the first.
    #[arg(long, value_delimiter = ',', default_value = "baseline,model")]
    heuristics: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Lower cutoffs on the reference runtime in milliseconds.
    #[arg(long, value_delimiter = ',', default_value = "0,5,30,300")]
    cutoffs: Vec<f64>,
    /// CSV destination; without it the CSV goes to stdout and the table to
    /// stderr.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Runtimes below this are clamped before taking ratios.
const MIN_MS: f64 = 0.01;

fn run_one(inst: &Instance, name: &str, seed: u64, budget: usize) -> Result<RunReport, CliError> {
    let spec = inst.load()?;
    let mut h = heuristic(name, seed)?;
    let cfg = ExploreConfig {
        max_nodes: budget,
        ..ExploreConfig::default()
    };
    let (out, ms) = run_timed(&spec.formula, &spec.partition, cfg, h.as_mut()).map_err(crate::aut_error)?;
    Ok(RunReport::new(&out, ms, h.name(), seed))
}

/// Geometric mean of `ref / other` over instances both solved whose
/// reference time is at least `cutoff`; also the number of such instances.
pub(crate) fn geo_ratio(reference: &[Option<RunReport>], other: &[Option<RunReport>], cutoff: f64) -> (f64, usize) {
    let logs: Vec<f64> = reference
        .iter()
        .zip(other)
        .filter_map(|(r, o)| match (r, o) {
            (Some(r), Some(o))
                if r.verdict != Verdict::Unknown && o.verdict != Verdict::Unknown && r.time_ms >= cutoff =>
            {
                Some((r.time_ms.max(MIN_MS) / o.time_ms.max(MIN_MS)).ln())
            }
            _ => None,
        })
        .collect();
    if logs.is_empty() {
        return (f64::NAN, 0);
    }
    ((logs.iter().sum::<f64>() / logs.len() as f64).exp(), logs.len())
}

pub(crate) fn bench(a: BenchArgs) -> Result<(), CliError> {
    let instances = read_instances(&a.instances)?;
    if a.heuristics.is_empty() {
        return Err(CliError::Usage("no heuristics given".into()));
    }
    for h in &a.heuristics {
        heuristic(h, a.seed)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs: Vec<(usize, usize)> = (0..a.heuristics.len())
        .flat_map(|h| (0..instances.len()).map(move |i| (h, i)))
        .collect();
    let results: Vec<Result<RunReport, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(h, i)| run_one(&instances[i], &a.heuristics[h], a.seed, a.budget))
            .collect()
    });
    let mut table: Vec<Vec<Option<RunReport>>> = vec![vec![None; instances.len()]; a.heuristics.len()];
    let mut csv = String::from("instance,heuristic,verdict,timeMs,envNodes,sysNodes,solves,backtracks,seed\n");
    for (&(h, i), r) in jobs.iter().zip(results) {
        match r {
            Ok(r) => {
                csv.push_str(&format!(
                    "{i},{},{},{:.3},{},{},{},{},{}\n",
                    a.heuristics[h], r.verdict, r.time_ms, r.env_nodes, r.sys_nodes, r.solves, r.backtracks, r.seed
                ));
                table[h][i] = Some(r);
            }
            Err(e) => log::warn!("instance {i}: {e}"),
        }
    }
    let mut summary = String::new();
    summary.push_str(&format!("{:<24}", "speedup vs ".to_string() + &a.heuristics[0]));
    for c in &a.cutoffs {
        summary.push_str(&format!("{:>16}", format!(">= {c} ms")));
    }
    summary.push('\n');
    for (h, name) in a.heuristics.iter().enumerate().skip(1) {
        summary.push_str(&format!("{name:<24}"));
        for &c in &a.cutoffs {
            let (g, n) = geo_ratio(&table[0], &table[h], c);
            summary.push_str(&format!("{:>16}", format!("{g:.3} ({n})")));
        }
        summary.push('\n');
    }
    match &a.csv {
        Some(p) => {
            std::fs::write(p, csv)?;
            print!("{summary}");
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes())?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(verdict: Verdict, ms: f64) -> Option<RunReport> {
        Some(RunReport {
            verdict,
            time_ms: ms,
            env_nodes: 0,
            sys_nodes: 0,
            solves: 0,
            backtracks: 0,
            heuristic: String::new(),
            seed: 0,
        })
    }

    #[test]
    fn geometric_mean_with_cutoff() {
        let r = [
            rep(Verdict::Realizable, 10.0),
            rep(Verdict::Realizable, 100.0),
            rep(Verdict::Unknown, 50.0),
        ];
        let o = [
            rep(Verdict::Realizable, 5.0),
            rep(Verdict::Realizable, 12.5),
            rep(Verdict::Realizable, 1.0),
        ];
        let (g, n) = geo_ratio(&r, &o, 0.0);
        assert_eq!(n, 2);
        assert!((g - 4.0).abs() < 1e-9);
        let (g, n) = geo_ratio(&r, &o, 30.0);
        assert_eq!(n, 1);
        assert!((g - 8.0).abs() < 1e-9);
        assert_eq!(geo_ratio(&r, &o, 1000.0).1, 0);
    }
}
