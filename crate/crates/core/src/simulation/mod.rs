//! Agent-based exit/voice/loyalty model over an engine-governed community.
//!
//! Each run is sequential and a pure function of (config, seed). Separate
//! runs are independent and may execute in parallel.

pub mod agent;
pub mod compare;
pub mod world;

pub use agent::{clamp01, decide, step_agent, AgentAction, AgentProfile, Draws};
pub use compare::{
    arms, compare_conditions, compare_configs, paired_stat, recovery_time, run_pairs, sign_test_p, summarize,
    ComparisonSummary, PairOutcome, PairRuns, PairedStat, RunSummary,
};
pub use world::{agent_id, agent_rng, metrics_csv, run_scenario, MetricsRecord, ScenarioRun, SimError, World, METRICS_HEADER};
