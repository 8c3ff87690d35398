use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::config::ScenarioConfig;
use crate::par::{self, Execution};

use super::world::{run_scenario, ScenarioRun, SimError};

/// Per-run quantities compared across arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub exits: u64,
    pub exit_rate: f64,
    pub recovery_time: u64,
    pub final_mean_loyalty: f64,
}

/// Ticks from the first time quality drops below `theta_voice` until it is
/// back at or above it. Runs that never recover count to the horizon; runs
/// that never drop score 0.
pub fn recovery_time(run: &ScenarioRun, theta_voice: f64) -> u64 {
    let rows = &run.metrics;
    let Some(drop) = rows.iter().position(|r| r.quality < theta_voice) else {
        return 0;
    };
    let end = rows[drop..].iter().position(|r| r.quality >= theta_voice).map_or(rows.len() - 1, |k| drop + k);
    (end - drop) as u64
}

pub fn summarize(run: &ScenarioRun, config: &ScenarioConfig) -> RunSummary {
    let last = run.final_metrics();
    let agents = config.population.agents;
    RunSummary {
        exits: last.exits_cum,
        exit_rate: if agents == 0 { 0.0 } else { last.exits_cum as f64 / f64::from(agents) },
        recovery_time: recovery_time(run, config.dynamics.theta_voice),
        final_mean_loyalty: last.mean_loyalty,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub seed: u64,
    pub baseline: RunSummary,
    pub treatment: RunSummary,
}

/// Paired differences `treatment - baseline` with a two-sided sign test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedStat {
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    pub positive: u64,
    pub negative: u64,
    pub ties: u64,
    pub sign_test_p: f64,
}

pub fn sign_test_p(positive: u64, negative: u64) -> f64 {
    let n = positive + negative;
    if n == 0 {
        return 1.0;
    }
    let k = positive.min(negative);
    let dist = Binomial::new(0.5, n).expect("p = 0.5 is valid");
    (2.0 * dist.cdf(k)).min(1.0)
}

pub fn paired_stat(diffs: &[f64]) -> PairedStat {
    let n = diffs.len();
    let positive = diffs.iter().filter(|d| **d > 0.0).count() as u64;
    let negative = diffs.iter().filter(|d| **d < 0.0).count() as u64;
    let mut sorted = diffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    };
    PairedStat {
        n: n as u64,
        mean: if n == 0 { 0.0 } else { diffs.iter().sum::<f64>() / n as f64 },
        median,
        positive,
        negative,
        ties: n as u64 - positive - negative,
        sign_test_p: sign_test_p(positive, negative),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub pairs: Vec<PairOutcome>,
    pub exit_rate: PairedStat,
    pub recovery_time: PairedStat,
    pub mean_loyalty: PairedStat,
    /// Pairs where the treatment arm ended with strictly fewer exits.
    pub treatment_fewer_exits: u64,
}

impl ComparisonSummary {
    pub fn from_pairs(pairs: Vec<PairOutcome>) -> Self {
        let diff = |f: fn(&RunSummary) -> f64| -> Vec<f64> { pairs.iter().map(|p| f(&p.treatment) - f(&p.baseline)).collect() };
        ComparisonSummary {
            exit_rate: paired_stat(&diff(|r| r.exit_rate)),
            recovery_time: paired_stat(&diff(|r| r.recovery_time as f64)),
            mean_loyalty: paired_stat(&diff(|r| r.final_mean_loyalty)),
            treatment_fewer_exits: pairs.iter().filter(|p| p.treatment.exits < p.baseline.exits).count() as u64,
            pairs,
        }
    }
}

/// Both runs of one seed, plus their summaries.
pub struct PairRuns {
    pub seed: u64,
    pub baseline: ScenarioRun,
    pub treatment: ScenarioRun,
}

/// Runs `baseline` and `treatment` on every seed. Seeds are independent, so
/// they run on the requested executor; results keep seed order.
pub fn run_pairs(
    baseline: &ScenarioConfig,
    treatment: &ScenarioConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<PairRuns>, SimError> {
    baseline.validate()?;
    treatment.validate()?;
    par::map(exec, seeds, |&seed| {
        Ok(PairRuns { seed, baseline: run_scenario(baseline, seed)?, treatment: run_scenario(treatment, seed)? })
    })
    .into_iter()
    .collect()
}

pub fn compare_configs(
    baseline: &ScenarioConfig,
    treatment: &ScenarioConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<ComparisonSummary, SimError> {
    let pairs = par::map(exec, seeds, |&seed| -> Result<PairOutcome, SimError> {
        Ok(PairOutcome {
            seed,
            baseline: summarize(&run_scenario(baseline, seed)?, baseline),
            treatment: summarize(&run_scenario(treatment, seed)?, treatment),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonSummary::from_pairs(pairs))
}

/// The two arms of `config`: affective voice only, and effective mechanisms on.
pub fn arms(config: &ScenarioConfig) -> (ScenarioConfig, ScenarioConfig) {
    let mut baseline = config.clone();
    baseline.mechanisms.effective = false;
    let mut treatment = config.clone();
    treatment.mechanisms.effective = true;
    (baseline, treatment)
}

/// Affective-only (baseline) against effective mechanisms (treatment),
/// differing only in that toggle.
pub fn compare_conditions(config: &ScenarioConfig, seeds: &[u64], exec: Execution) -> Result<ComparisonSummary, SimError> {
    let (baseline, treatment) = arms(config);
    compare_configs(&baseline, &treatment, seeds, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_matches_binomial_tail() {
        // Two-sided p for 0 of 5: 2 / 32.
        assert!((sign_test_p(0, 5) - 0.0625).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 0), 1.0);
        assert_eq!(sign_test_p(3, 3), 1.0);
    }

    #[test]
    fn median_and_ties() {
        let s = paired_stat(&[-1.0, 0.0, 2.0, 3.0]);
        assert_eq!(s.median, 1.0);
        assert_eq!((s.positive, s.negative, s.ties), (2, 1, 1));
        assert_eq!(paired_stat(&[]).median, 0.0);
    }
}
