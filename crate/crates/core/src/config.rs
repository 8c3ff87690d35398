//! Scenario configuration: strict TOML with sections `[community]`,
//! `[population]`, `[dynamics]`, `[deterioration]`, `[mechanisms]` and `[run]`.
//! Unknown keys are errors and every error names the offending field.

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_ruleset, AmendmentPolicy, Fraction, GovernanceMode, ModeKind, Rule, RuleSet, Tick};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `deterioration.segments[1].rate`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.path, self.message)
        }
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub community: CommunityConfig,
    pub population: PopulationConfig,
    pub dynamics: DynamicsConfig,
    pub deterioration: DeteriorationConfig,
    pub mechanisms: MechanismsConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommunityConfig {
    pub mode: GovernanceMode,
    /// Founding administrators. They hold every power and never act on their own.
    pub admins: u32,
    pub rules: Vec<Rule>,
    pub amendment_policy: AmendmentPolicy,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            mode: GovernanceMode::DirectDemocracy,
            admins: 1,
            rules: Vec::new(),
            amendment_policy: AmendmentPolicy::default(),
        }
    }
}

/// How an agent parameter is drawn at join time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase", deny_unknown_fields)]
pub enum Dist {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Dist {
    fn check(&self, path: &str) -> Result<(), ConfigError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        match *self {
            Dist::Fixed { value } if !in_unit(value) => Err(err(format!("{path}.value"), "must lie in [0, 1]")),
            Dist::Uniform { low, .. } if !in_unit(low) => Err(err(format!("{path}.low"), "must lie in [0, 1]")),
            Dist::Uniform { high, .. } if !in_unit(high) => Err(err(format!("{path}.high"), "must lie in [0, 1]")),
            Dist::Uniform { low, high } if low > high => Err(err(format!("{path}.high"), "must be at least `low`")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub agents: u32,
    pub satisfaction: Dist,
    pub loyalty: Dist,
    pub voice_cost: Dist,
    pub exit_cost: Dist,
    pub efficacy: Dist,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            agents: 50,
            satisfaction: Dist::Uniform { low: 0.6, high: 1.0 },
            loyalty: Dist::Uniform { low: 0.0, high: 0.6 },
            voice_cost: Dist::Uniform { low: 0.0, high: 0.3 },
            exit_cost: Dist::Uniform { low: 0.0, high: 0.1 },
            efficacy: Dist::Uniform { low: 0.4, high: 0.9 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub theta_exit: f64,
    pub theta_voice: f64,
    pub delta_up: f64,
    pub delta_down: f64,
    pub heal_effective: f64,
    pub heal_affective: f64,
    /// Half-width of the uniform noise added to each satisfaction update.
    pub noise: f64,
    /// Probability that administrators act on one affective voice event.
    pub responsiveness: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            alpha: 0.5,
            beta: 0.3,
            theta_exit: 0.3,
            theta_voice: 0.6,
            delta_up: 0.1,
            delta_down: 0.02,
            heal_effective: 0.15,
            heal_affective: 0.05,
            noise: 0.05,
            responsiveness: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// First tick the rate applies to.
    pub from: Tick,
    /// Quality lost per tick.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeteriorationConfig {
    pub initial_quality: f64,
    pub segments: Vec<Segment>,
}

impl Default for DeteriorationConfig {
    fn default() -> Self {
        DeteriorationConfig { initial_quality: 0.8, segments: vec![Segment { from: 0, rate: 0.02 }] }
    }
}

impl DeteriorationConfig {
    /// Loss applied at `tick`: the rate of the last segment starting at or before it.
    pub fn rate_at(&self, tick: Tick) -> f64 {
        self.segments.iter().rev().find(|s| s.from <= tick).map_or(0.0, |s| s.rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismsConfig {
    /// When false, dissatisfied agents can only voice affectively.
    pub effective: bool,
    pub petition_threshold: Fraction,
    pub petition_ttl: Tick,
    pub voting_period: Tick,
    pub quorum: Fraction,
    pub approval: Fraction,
    pub delegation: bool,
    /// Share of agents that delegate on joining, when delegation is on.
    pub delegate_share: f64,
    pub reputation: bool,
    pub abandonment_ticks: Option<Tick>,
    pub growth_members: Option<u64>,
    pub growth_alternative: GovernanceMode,
}

impl Default for MechanismsConfig {
    fn default() -> Self {
        MechanismsConfig {
            effective: true,
            petition_threshold: Fraction::new(1, 10).expect("valid"),
            petition_ttl: 10,
            voting_period: 5,
            quorum: Fraction::new(1, 10).expect("valid"),
            approval: Fraction::new(500_001, 1_000_000).expect("valid"),
            delegation: false,
            delegate_share: 0.3,
            reputation: false,
            abandonment_ticks: None,
            growth_members: None,
            growth_alternative: GovernanceMode::Representative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ticks: Tick,
    pub seed_start: u64,
    pub seed_end: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { ticks: 200, seed_start: 1, seed_end: 100 }
    }
}

impl RunConfig {
    pub fn seeds(&self) -> RangeInclusive<u64> {
        self.seed_start..=self.seed_end
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            err(if path == "." { String::new() } else { path }, inner.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn ruleset(&self) -> RuleSet {
        RuleSet { version: 0, rules: self.community.rules.clone(), amendment_policy: self.community.amendment_policy }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.community;
        c.mode.validate().map_err(|m| err("community.mode", m))?;
        if let Err(violations) = validate_ruleset(&self.ruleset()) {
            let v = &violations[0];
            let path = match v.rule.as_ref().and_then(|id| c.rules.iter().position(|r| &r.id == id)) {
                Some(i) => format!("community.rules[{i}]"),
                None => "community.rules".into(),
            };
            return Err(err(path, v.message.clone()));
        }
        if c.admins == 0 && matches!(c.mode.kind(), ModeKind::AdminOnly | ModeKind::Oligarchy) {
            return Err(err("community.admins", "this mode needs at least one administrator"));
        }

        let p = &self.population;
        for (name, d) in [
            ("satisfaction", p.satisfaction),
            ("loyalty", p.loyalty),
            ("voice_cost", p.voice_cost),
            ("exit_cost", p.exit_cost),
            ("efficacy", p.efficacy),
        ] {
            d.check(&format!("population.{name}"))?;
        }

        let d = &self.dynamics;
        for (name, v) in [
            ("alpha", d.alpha),
            ("beta", d.beta),
            ("theta_exit", d.theta_exit),
            ("theta_voice", d.theta_voice),
            ("delta_up", d.delta_up),
            ("delta_down", d.delta_down),
            ("heal_effective", d.heal_effective),
            ("heal_affective", d.heal_affective),
            ("noise", d.noise),
            ("responsiveness", d.responsiveness),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("dynamics.{name}"), "must lie in [0, 1]"));
            }
        }

        let s = &self.deterioration;
        if !(0.0..=1.0).contains(&s.initial_quality) {
            return Err(err("deterioration.initial_quality", "must lie in [0, 1]"));
        }
        for (i, seg) in s.segments.iter().enumerate() {
            if !(0.0..=1.0).contains(&seg.rate) {
                return Err(err(format!("deterioration.segments[{i}].rate"), "must lie in [0, 1]"));
            }
            if i > 0 && seg.from <= s.segments[i - 1].from {
                return Err(err(format!("deterioration.segments[{i}].from"), "segments must start at increasing ticks"));
            }
        }

        let m = &self.mechanisms;
        if m.effective && matches!(c.mode.kind(), ModeKind::AdminOnly | ModeKind::Oligarchy) {
            return Err(err("community.mode", "members cannot petition in this mode; disable mechanisms.effective"));
        }
        if m.petition_threshold.num() == 0 {
            return Err(err("mechanisms.petition_threshold", "must be positive"));
        }
        if !m.approval.exceeds_half() {
            return Err(err("mechanisms.approval", "must exceed 1/2"));
        }
        if m.voting_period == 0 {
            return Err(err("mechanisms.voting_period", "must be at least 1"));
        }
        if m.petition_ttl == 0 {
            return Err(err("mechanisms.petition_ttl", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&m.delegate_share) {
            return Err(err("mechanisms.delegate_share", "must lie in [0, 1]"));
        }
        if m.abandonment_ticks == Some(0) {
            return Err(err("mechanisms.abandonment_ticks", "must be at least 1"));
        }
        if m.growth_members == Some(0) {
            return Err(err("mechanisms.growth_members", "must be at least 1"));
        }
        m.growth_alternative.validate().map_err(|msg| err("mechanisms.growth_alternative", msg))?;
        if self.run.seed_start > self.run.seed_end {
            return Err(err("run.seed_end", "must be at least `seed_start`"));
        }
        Ok(())
    }
}
