use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigError, ScenarioConfig};
use crate::domain::{
    sha256, Actor, Choice, Command, EligibilityFilter, Event, EventKind, ExitReason, Founder, MemberId, PetitionId,
    PetitionSpec, PetitionStatus, PowerKind, ProposalDraft, ProposalId, ProposalStatus, ProposalSubject, RoleDef,
    TallyMethod, Tick, TopicId, TriggerKind, TriggerSpec, Weighting,
};
use crate::engine::{Engine, EngineError};

use super::agent::{clamp01, step_agent, AgentAction, AgentProfile};

pub const METRICS_HEADER: &str = "tick,Q,exits_cum,affective_cum,effective_cum,mean_loyalty,mean_satisfaction,slack";

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The engine refused an action the simulator believed valid.
    #[error("engine refused a simulated action: {0}")]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub tick: Tick,
    pub quality: f64,
    pub exits_cum: u64,
    pub affective_cum: u64,
    pub effective_cum: u64,
    pub mean_loyalty: f64,
    pub mean_satisfaction: f64,
    /// Share of remaining agents whose satisfaction is below the exit threshold.
    pub slack: f64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{},{},{:.6},{:.6},{:.6}",
            self.tick,
            self.quality,
            self.exits_cum,
            self.affective_cum,
            self.effective_cum,
            self.mean_loyalty,
            self.mean_satisfaction,
            self.slack
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub struct Agent {
    pub profile: AgentProfile,
    pub active: bool,
    rng: ChaCha8Rng,
}

/// Member id of the `i`-th simulated agent.
pub fn agent_id(i: usize) -> MemberId {
    MemberId::from(format!("a{i:03}").as_str())
}

fn admin_id(i: u32) -> MemberId {
    MemberId::from(format!("admin{i}").as_str())
}

/// Independent stream per (seed, member), so reordering agents cannot change any one trajectory.
pub fn agent_rng(seed: u64, member: &MemberId) -> ChaCha8Rng {
    let mut key = b"agent".to_vec();
    key.extend_from_slice(&seed.to_be_bytes());
    key.extend_from_slice(member.as_str().as_bytes());
    ChaCha8Rng::from_seed(sha256(&key).0)
}

/// Who took part in a petition or proposal, so they can observe its outcome.
#[derive(Default)]
struct Participation {
    petitions: BTreeMap<PetitionId, (Tick, BTreeSet<usize>)>,
    proposals: BTreeMap<ProposalId, BTreeSet<usize>>,
}

pub struct World {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub tick: Tick,
    pub quality: f64,
    pub agents: Vec<Agent>,
    pub engine: Engine,
    exits_cum: u64,
    affective_cum: u64,
    effective_cum: u64,
    index: BTreeMap<MemberId, usize>,
    participation: Participation,
}

impl World {
    pub fn new(config: ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut engine = Engine::new();
        engine.submit(Command::system(0, founding(&config)))?;
        let n = config.population.agents as usize;
        let mut agents = Vec::with_capacity(n);
        let mut index = BTreeMap::new();
        for i in 0..n {
            let id = agent_id(i);
            let mut rng = agent_rng(seed, &id);
            let profile = AgentProfile::sample(id.clone(), &config.population, &mut rng);
            engine.submit(Command::system(0, EventKind::MemberJoined { member: id.clone() }))?;
            index.insert(id, i);
            agents.push(Agent { profile, active: true, rng });
        }
        if config.mechanisms.delegation && n > 1 {
            for (i, agent) in agents.iter_mut().enumerate() {
                let rng = &mut agent.rng;
                let (u, pick): (f64, usize) = (rng.random(), rng.random_range(0..n - 1));
                if u < config.mechanisms.delegate_share {
                    let delegate = agent_id(if pick >= i { pick + 1 } else { pick });
                    let kind = EventKind::DelegationSet { delegate, topic: TopicId::wildcard() };
                    engine.submit(Command::new(0, agent_id(i), kind))?;
                }
            }
        }
        Ok(World {
            quality: config.deterioration.initial_quality,
            config,
            seed,
            tick: 0,
            agents,
            engine,
            exits_cum: 0,
            affective_cum: 0,
            effective_cum: 0,
            index,
            participation: Participation::default(),
        })
    }

    pub fn metrics(&self) -> MetricsRecord {
        let active: Vec<&AgentProfile> = self.agents.iter().filter(|a| a.active).map(|a| &a.profile).collect();
        let n = active.len() as f64;
        let mean = |f: fn(&AgentProfile) -> f64| if active.is_empty() { 0.0 } else { active.iter().map(|a| f(a)).sum::<f64>() / n };
        let theta = self.config.dynamics.theta_exit;
        let below = active.iter().filter(|a| a.satisfaction < theta).count() as f64;
        MetricsRecord {
            tick: self.tick,
            quality: self.quality,
            exits_cum: self.exits_cum,
            affective_cum: self.affective_cum,
            effective_cum: self.effective_cum,
            mean_loyalty: mean(|a| a.loyalty),
            mean_satisfaction: mean(|a| a.satisfaction),
            slack: if active.is_empty() { 0.0 } else { below / n },
        }
    }

    fn outcome(&mut self, who: &BTreeSet<usize>, observed: bool) {
        let p = &self.config.dynamics;
        for &i in who {
            if self.agents[i].active {
                self.agents[i].profile.after_outcome(observed, p);
            }
        }
    }

    /// Governance outcomes that landed since the last step.
    fn observe(&mut self, events: &[Event]) {
        for e in events {
            match &e.kind {
                EventKind::PetitionPromoted { petition, proposal } => {
                    if let Some((_, who)) = self.participation.petitions.remove(petition) {
                        self.participation.proposals.entry(proposal.clone()).or_default().extend(who);
                    }
                }
                EventKind::ProposalClosed { proposal, status, .. } => {
                    let adopted = *status == ProposalStatus::Adopted;
                    if adopted && matches!(self.engine.state().proposals[proposal].spec.subject, ProposalSubject::PolicyChange { .. }) {
                        self.quality = clamp01(self.quality + self.config.dynamics.heal_effective);
                    }
                    if let Some(who) = self.participation.proposals.remove(proposal) {
                        self.outcome(&who, adopted);
                    }
                }
                _ => {}
            }
        }
    }

    fn expire_petitions(&mut self) {
        let now = self.tick;
        let expired: Vec<PetitionId> = self
            .participation
            .petitions
            .iter()
            .filter(|(_, (expires_at, _))| now > *expires_at)
            .map(|(id, _)| id.clone())
            .collect();
        for id in expired {
            let (_, who) = self.participation.petitions.remove(&id).expect("listed above");
            self.outcome(&who, false);
        }
    }

    fn submit(&mut self, actor: &MemberId, kind: EventKind) -> Result<Vec<Event>, SimError> {
        Ok(self.engine.submit(Command::new(self.tick, Actor::Member(actor.clone()), kind))?)
    }

    /// Effective voice: back an open proposal, else sign a collecting
    /// petition, else start a petition.
    fn voice(&mut self, i: usize) -> Result<(), SimError> {
        let me = self.agents[i].profile.member.clone();
        let now = self.tick;
        let state = self.engine.state();
        let ballot = state
            .open_proposals()
            .find(|p| now < p.spec.closes_at && p.electorate.contains(&me) && !p.ballots.contains_key(&me)
                && matches!(p.spec.method, TallyMethod::Referendum { .. }))
            .map(|p| p.spec.id.clone());
        let kind = if let Some(p) = ballot {
            self.participation.proposals.entry(p.clone()).or_default().insert(i);
            EventKind::BallotCast { proposal: p, choice: Choice::Yes }
        } else if let Some(p) = state
            .petitions
            .values()
            .find(|p| p.status_at(now) == PetitionStatus::Collecting && !p.signatures.contains(&me)
                && state.is_eligible(&me, &p.spec.eligibility, now))
            .map(|p| p.spec.id.clone())
        {
            if let Some((_, who)) = self.participation.petitions.get_mut(&p) {
                who.insert(i);
            }
            EventKind::PetitionSigned { petition: p }
        } else {
            let petition = self.petition(&me);
            self.participation.petitions.insert(petition.id.clone(), (petition.expires_at, [i].into_iter().collect()));
            EventKind::PetitionOpened { petition }
        };
        let events = self.submit(&me, kind)?;
        self.effective_cum += 1;
        self.observe(&events);
        Ok(())
    }

    fn petition(&self, opener: &MemberId) -> PetitionSpec {
        let m = &self.config.mechanisms;
        let id = format!("pet-{}-{}", self.tick, opener.as_str());
        PetitionSpec {
            id: id.as_str().into(),
            target: ProposalDraft {
                id: format!("prop-{}-{}", self.tick, opener.as_str()).as_str().into(),
                subject: ProposalSubject::PolicyChange { key: "quality".into(), value: id.clone() },
                period: m.voting_period,
                method: TallyMethod::Referendum { quorum: m.quorum, approval: m.approval },
                eligibility: EligibilityFilter::default(),
                topic: TopicId::wildcard(),
                delegation: m.delegation,
                weighting: if m.reputation { Weighting::Reputation } else { Weighting::Unit },
            },
            threshold: m.petition_threshold,
            eligibility: EligibilityFilter::default(),
            expires_at: self.tick + m.petition_ttl,
        }
    }

    /// Advances one tick and returns its metrics row.
    pub fn step(&mut self) -> Result<MetricsRecord, SimError> {
        self.tick += 1;
        let now = self.tick;
        self.quality = clamp01(self.quality - self.config.deterioration.rate_at(now));
        let closed = self.engine.advance(now)?;
        self.observe(&closed);
        self.expire_petitions();

        let q = self.quality;
        let effective = self.config.mechanisms.effective;
        let mut healing = 0.0;
        for i in 0..self.agents.len() {
            if !self.agents[i].active {
                continue;
            }
            let agent = &mut self.agents[i];
            let (action, next) = step_agent(&agent.profile, q, &self.config.dynamics, effective, &mut agent.rng);
            let extra: f64 = agent.rng.random();
            agent.profile = next;
            match action {
                AgentAction::Exit => {
                    agent.active = false;
                    let me = agent.profile.member.clone();
                    let kind = EventKind::MemberExited { member: me.clone(), reason: ExitReason::Voluntary, basis: None };
                    self.submit(&me, kind)?;
                    self.exits_cum += 1;
                }
                AgentAction::EffectiveVoice => self.voice(i)?,
                AgentAction::AffectiveVoice => {
                    self.affective_cum += 1;
                    let heard = extra < self.config.dynamics.responsiveness;
                    if heard {
                        healing += self.config.dynamics.heal_affective;
                    }
                    agent.profile.after_outcome(heard, &self.config.dynamics);
                }
                AgentAction::Silent => {
                    if self.config.mechanisms.reputation && extra < agent.profile.satisfaction {
                        let member = agent.profile.member.clone();
                        self.engine.submit(Command::system(now, EventKind::ContributionRecorded { member, amount: 1 }))?;
                    }
                }
            }
        }
        // Healing lands after every agent has seen this tick's quality.
        self.quality = clamp01(self.quality + healing);
        Ok(self.metrics())
    }

    pub fn member_index(&self, id: &MemberId) -> Option<usize> {
        self.index.get(id).copied()
    }
}

fn founding(config: &ScenarioConfig) -> EventKind {
    let c = &config.community;
    let m = &config.mechanisms;
    let powers: BTreeSet<PowerKind> = [
        PowerKind::EditRules,
        PowerKind::ManageRoles,
        PowerKind::ModerateContent,
        PowerKind::PinContent,
        PowerKind::RemoveMember,
    ]
    .into_iter()
    .collect();
    let mut triggers = Vec::new();
    if let Some(t) = m.abandonment_ticks {
        triggers.push(TriggerSpec {
            id: "abandonment".into(),
            kind: TriggerKind::Abandonment { inactivity_ticks: t },
            voting_period: m.voting_period,
        });
    }
    if let Some(n) = m.growth_members {
        triggers.push(TriggerSpec {
            id: "growth".into(),
            kind: TriggerKind::GrowthThreshold { member_count: n, alternative: m.growth_alternative.clone() },
            voting_period: m.voting_period,
        });
    }
    EventKind::CommunityFounded {
        mode: c.mode.clone(),
        ruleset: config.ruleset(),
        roles: vec![RoleDef { id: "admin".into(), powers, seats: None }],
        founders: (0..c.admins)
            .map(|i| Founder { member: admin_id(i), roles: ["admin".into()].into_iter().collect() })
            .collect(),
        triggers,
    }
}

/// Everything one run produces.
pub struct ScenarioRun {
    pub seed: u64,
    /// Row 0 is the state before the first tick.
    pub metrics: Vec<MetricsRecord>,
    pub log: Vec<Event>,
    pub final_agents: Vec<AgentProfile>,
}

impl ScenarioRun {
    pub fn final_metrics(&self) -> &MetricsRecord {
        self.metrics.last().expect("row 0 always exists")
    }

    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }
}

pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioRun, SimError> {
    let mut world = World::new(config.clone(), seed)?;
    let mut metrics = Vec::with_capacity(config.run.ticks as usize + 1);
    metrics.push(world.metrics());
    for _ in 0..config.run.ticks {
        metrics.push(world.step()?);
    }
    let final_agents = world.agents.iter().map(|a| a.profile.clone()).collect();
    Ok(ScenarioRun { seed, metrics, log: world.engine.into_log(), final_agents })
}
