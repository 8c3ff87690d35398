use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Dist, DynamicsConfig, PopulationConfig};
use crate::domain::MemberId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub member: MemberId,
    pub satisfaction: f64,
    pub loyalty: f64,
    pub voice_cost: f64,
    pub exit_cost: f64,
    pub efficacy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentAction {
    Exit,
    EffectiveVoice,
    AffectiveVoice,
    Silent,
}

/// The random inputs of one agent step, drawn up front so the decision
/// itself is a pure function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draws {
    /// Uniform on [-1, 1], scaled by the noise half-width.
    pub noise: f64,
    /// Uniform on [0, 1), compared against the voice probability.
    pub voice: f64,
}

impl Draws {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Draws { noise: rng.random_range(-1.0..=1.0), voice: rng.random() }
    }
}

pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn draw(d: Dist, rng: &mut impl Rng) -> f64 {
    // Always consume one draw so every parameter keeps its slot in the stream.
    let u: f64 = rng.random();
    match d {
        Dist::Fixed { value } => value,
        Dist::Uniform { low, high } => low + (high - low) * u,
    }
}

impl AgentProfile {
    pub fn sample(member: MemberId, pop: &PopulationConfig, rng: &mut impl Rng) -> Self {
        AgentProfile {
            member,
            satisfaction: clamp01(draw(pop.satisfaction, rng)),
            loyalty: clamp01(draw(pop.loyalty, rng)),
            voice_cost: clamp01(draw(pop.voice_cost, rng)),
            exit_cost: clamp01(draw(pop.exit_cost, rng)),
            efficacy: clamp01(draw(pop.efficacy, rng)),
        }
    }

    /// Satisfaction below this leaves. Loyalty and exit cost push it down.
    pub fn exit_line(&self, p: &DynamicsConfig) -> f64 {
        p.theta_exit - p.beta * self.loyalty - self.exit_cost
    }

    pub fn voice_probability(&self) -> f64 {
        clamp01(self.efficacy - self.voice_cost)
    }

    /// Loyalty after the agent's voice did (or did not) produce an outcome.
    pub fn after_outcome(&mut self, observed: bool, p: &DynamicsConfig) {
        let delta = if observed { p.delta_up } else { -p.delta_down };
        self.loyalty = clamp01(self.loyalty + delta);
    }
}

/// One decision: track quality, then exit, voice or stay silent.
pub fn decide(
    agent: &AgentProfile,
    quality: f64,
    p: &DynamicsConfig,
    effective: bool,
    draws: Draws,
) -> (AgentAction, AgentProfile) {
    let mut next = agent.clone();
    next.satisfaction = clamp01((1.0 - p.alpha) * agent.satisfaction + p.alpha * quality + p.noise * draws.noise);
    let action = if next.satisfaction < next.exit_line(p) {
        AgentAction::Exit
    } else if next.satisfaction < p.theta_voice && draws.voice < next.voice_probability() {
        if effective {
            AgentAction::EffectiveVoice
        } else {
            AgentAction::AffectiveVoice
        }
    } else {
        AgentAction::Silent
    };
    (action, next)
}

pub fn step_agent(
    agent: &AgentProfile,
    quality: f64,
    p: &DynamicsConfig,
    effective: bool,
    rng: &mut impl Rng,
) -> (AgentAction, AgentProfile) {
    decide(agent, quality, p, effective, Draws::sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn agent(s: f64, l: f64, cv: f64, cx: f64, e: f64) -> AgentProfile {
        AgentProfile { member: "a".into(), satisfaction: s, loyalty: l, voice_cost: cv, exit_cost: cx, efficacy: e }
    }

    fn exact() -> DynamicsConfig {
        // alpha 1 and no noise: satisfaction equals quality after the update.
        DynamicsConfig { alpha: 1.0, noise: 0.0, ..DynamicsConfig::default() }
    }

    const NO_NOISE: Draws = Draws { noise: 0.0, voice: 0.0 };

    #[test]
    fn unhappy_unattached_agent_exits() {
        let (a, _) = decide(&agent(0.0, 0.0, 0.0, 0.0, 1.0), 0.0, &exact(), true, NO_NOISE);
        assert_eq!(a, AgentAction::Exit);
    }

    #[test]
    fn loyalty_holds_exit_at_the_boundary() {
        let (a, _) = decide(&agent(0.2, 1.0, 0.0, 0.0, 0.0), 0.2, &exact(), true, NO_NOISE);
        assert_ne!(a, AgentAction::Exit);
    }

    #[test]
    fn zero_voice_probability_stays_silent() {
        let (a, _) = decide(&agent(0.5, 0.5, 0.4, 0.0, 0.4), 0.5, &exact(), true, NO_NOISE);
        assert_eq!(a, AgentAction::Silent);
    }

    #[test]
    fn voice_kind_follows_mechanisms() {
        let a = agent(0.5, 0.5, 0.0, 0.0, 1.0);
        assert_eq!(decide(&a, 0.5, &exact(), true, NO_NOISE).0, AgentAction::EffectiveVoice);
        assert_eq!(decide(&a, 0.5, &exact(), false, NO_NOISE).0, AgentAction::AffectiveVoice);
    }

    #[test]
    fn satisfaction_tracks_quality() {
        let p = DynamicsConfig { noise: 0.0, ..DynamicsConfig::default() };
        let (_, next) = decide(&agent(1.0, 0.5, 0.0, 0.0, 0.0), 0.5, &p, true, NO_NOISE);
        assert_eq!(next.satisfaction, 0.75);
    }

    fn unit() -> impl Strategy<Value = f64> {
        prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
    }

    fn dynamics() -> impl Strategy<Value = DynamicsConfig> {
        (unit(), unit(), unit(), unit(), unit(), unit(), unit()).prop_map(|(alpha, beta, te, tv, up, down, noise)| {
            DynamicsConfig {
                alpha,
                beta,
                theta_exit: te,
                theta_voice: tv,
                delta_up: up,
                delta_down: down,
                noise,
                ..DynamicsConfig::default()
            }
        })
    }

    fn profiles() -> impl Strategy<Value = AgentProfile> {
        (unit(), unit(), unit(), unit(), unit()).prop_map(|(s, l, cv, cx, e)| agent(s, l, cv, cx, e))
    }

    proptest! {
        #[test]
        fn fields_stay_clamped(
            a in profiles(), q in unit(), p in dynamics(), eff: bool,
            noise in -1.0..=1.0f64, voice in 0.0..1.0f64, observed: bool,
        ) {
            let (_, mut next) = decide(&a, q, &p, eff, Draws { noise, voice });
            next.after_outcome(observed, &p);
            for v in [next.satisfaction, next.loyalty, next.voice_cost, next.exit_cost, next.efficacy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn more_loyalty_never_causes_exit(
            a in profiles(), extra in unit(), q in unit(), p in dynamics(), eff: bool,
            noise in -1.0..=1.0f64, voice in 0.0..1.0f64,
        ) {
            let draws = Draws { noise, voice };
            let mut loyal = a.clone();
            loyal.loyalty = clamp01(a.loyalty + extra);
            let (before, _) = decide(&a, q, &p, eff, draws);
            let (after, _) = decide(&loyal, q, &p, eff, draws);
            if before != AgentAction::Exit {
                prop_assert_ne!(after, AgentAction::Exit);
            }
        }
    }
}
