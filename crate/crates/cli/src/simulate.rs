//! `voicegov simulate`: metrics files per seed and arm, plus the paired summary.

use std::path::{Path, PathBuf};

use voicegov_core::config::ScenarioConfig;
use voicegov_core::engine::logfile;
use voicegov_core::par::{self, Execution};
use voicegov_core::simulation::{arms, run_pairs, run_scenario, summarize, ComparisonSummary, PairOutcome, ScenarioRun};

use crate::community::render;
use crate::error::CliError;

/// Parses `a..b` (inclusive) or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed range `{s}`, expected `a..b` or `n`"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

pub struct SimulateOptions {
    pub seeds: Option<Vec<u64>>,
    pub compare: bool,
    pub logs: bool,
    pub exec: Execution,
}

fn write_run(out: &Path, stem: &str, run: &ScenarioRun, logs: bool, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let csv = out.join(format!("{stem}.csv"));
    std::fs::write(&csv, run.metrics_csv())?;
    written.push(csv);
    if logs {
        let log = out.join(format!("{stem}.log"));
        logfile::write_log(&log, &run.log)?;
        written.push(log);
    }
    Ok(())
}

/// Runs the scenario in `config_path` and writes into `out`. Returns the files written, in order.
pub fn simulate(config_path: &Path, out: &Path, opts: &SimulateOptions) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(config_path)?;
    let config = ScenarioConfig::from_toml(&text)?;
    let seeds = opts.seeds.clone().unwrap_or_else(|| config.run.seeds().collect());
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    if opts.compare {
        let (baseline, treatment) = arms(&config);
        let runs = run_pairs(&baseline, &treatment, &seeds, opts.exec)?;
        let mut pairs = Vec::with_capacity(runs.len());
        for p in &runs {
            write_run(out, &format!("seed-{}-affective", p.seed), &p.baseline, opts.logs, &mut written)?;
            write_run(out, &format!("seed-{}-effective", p.seed), &p.treatment, opts.logs, &mut written)?;
            pairs.push(PairOutcome {
                seed: p.seed,
                baseline: summarize(&p.baseline, &baseline),
                treatment: summarize(&p.treatment, &treatment),
            });
        }
        let summary = out.join("summary.txt");
        std::fs::write(&summary, render(&ComparisonSummary::from_pairs(pairs))?)?;
        written.push(summary);
    } else {
        config.validate()?;
        let runs = par::map(opts.exec, &seeds, |&seed| run_scenario(&config, seed));
        for run in runs {
            let run = run?;
            write_run(out, &format!("seed-{}", run.seed), &run, opts.logs, &mut written)?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("a..b").is_err());
    }
}
