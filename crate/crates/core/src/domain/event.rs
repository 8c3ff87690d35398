use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest as _, Sha256};

use super::{
    Actor, AmendmentPolicy, Basis, Bloc, Choice, Digest, GovernanceMode, MemberId, ModerationKind,
    PetitionId, PetitionSpec, ProposalId, ProposalOrigin, ProposalSpec, ProposalStatus, RoleDef,
    RoleId, Rule, RuleId, RuleSet, TallyResult, Tick, TopicId, TriggerId, TriggerSpec,
};
use crate::canonical::{self, EncodingError, Fields, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitReason {
    Voluntary,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Founder {
    pub member: MemberId,
    #[serde(default)]
    pub roles: BTreeSet<RoleId>,
}

/// Every kind of change the log can record, with its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    CommunityFounded {
        mode: GovernanceMode,
        ruleset: RuleSet,
        roles: Vec<RoleDef>,
        founders: Vec<Founder>,
        triggers: Vec<TriggerSpec>,
    },
    MemberJoined {
        member: MemberId,
    },
    MemberExited {
        member: MemberId,
        reason: ExitReason,
        basis: Basis,
    },
    ContributionRecorded {
        member: MemberId,
        amount: u64,
    },
    ProposalOpened {
        proposal: ProposalSpec,
        origin: ProposalOrigin,
    },
    BallotCast {
        proposal: ProposalId,
        choice: Choice,
    },
    DelegationSet {
        delegate: MemberId,
        topic: TopicId,
    },
    DelegationRevoked {
        topic: TopicId,
    },
    PetitionOpened {
        petition: PetitionSpec,
    },
    PetitionSigned {
        petition: PetitionId,
    },
    PetitionPromoted {
        petition: PetitionId,
        proposal: ProposalId,
    },
    ProposalClosed {
        proposal: ProposalId,
        status: ProposalStatus,
        tally: TallyResult,
    },
    RoleGranted {
        role: RoleId,
        member: MemberId,
        basis: Basis,
    },
    RoleRevoked {
        role: RoleId,
        member: MemberId,
        basis: Basis,
    },
    ModeChanged {
        from: GovernanceMode,
        to: GovernanceMode,
        basis: ProposalId,
    },
    RuleAmended {
        old_version: u64,
        new_version: u64,
        rules: Vec<Rule>,
        amendment_policy: AmendmentPolicy,
        basis: ProposalId,
    },
    PolicySet {
        key: String,
        value: String,
        basis: ProposalId,
    },
    ModerationAction {
        action: ModerationKind,
        target: MemberId,
        basis: Basis,
    },
    ViolationFlagged {
        rule: RuleId,
        actor: MemberId,
        event_seq: u64,
    },
    TriggerFired {
        trigger: TriggerId,
        proposals: Vec<ProposalSpec>,
    },
    JuryDrawn {
        proposal: ProposalId,
        members: Vec<MemberId>,
        seed: u64,
        exclusions: BTreeSet<MemberId>,
    },
    BlocDeclared {
        bloc: Bloc,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::CommunityFounded { .. } => "CommunityFounded",
            EventKind::MemberJoined { .. } => "MemberJoined",
            EventKind::MemberExited { .. } => "MemberExited",
            EventKind::ContributionRecorded { .. } => "ContributionRecorded",
            EventKind::ProposalOpened { .. } => "ProposalOpened",
            EventKind::BallotCast { .. } => "BallotCast",
            EventKind::DelegationSet { .. } => "DelegationSet",
            EventKind::DelegationRevoked { .. } => "DelegationRevoked",
            EventKind::PetitionOpened { .. } => "PetitionOpened",
            EventKind::PetitionSigned { .. } => "PetitionSigned",
            EventKind::PetitionPromoted { .. } => "PetitionPromoted",
            EventKind::ProposalClosed { .. } => "ProposalClosed",
            EventKind::RoleGranted { .. } => "RoleGranted",
            EventKind::RoleRevoked { .. } => "RoleRevoked",
            EventKind::ModeChanged { .. } => "ModeChanged",
            EventKind::RuleAmended { .. } => "RuleAmended",
            EventKind::PolicySet { .. } => "PolicySet",
            EventKind::ModerationAction { .. } => "ModerationAction",
            EventKind::ViolationFlagged { .. } => "ViolationFlagged",
            EventKind::TriggerFired { .. } => "TriggerFired",
            EventKind::JuryDrawn { .. } => "JuryDrawn",
            EventKind::BlocDeclared { .. } => "BlocDeclared",
        }
    }

    /// Splits the serde form `{Variant: payload}` into tag and payload.
    fn tag_and_payload(&self) -> Result<(String, Value), EncodingError> {
        match canonical::to_value(self)? {
            Value::Object(map) if map.len() == 1 => {
                let (tag, payload) = map.into_iter().next().expect("length checked");
                Ok((tag, payload))
            }
            Value::String(tag) => Ok((tag, Value::Object(Map::new()))),
            _ => Err(EncodingError::Unencodable("event kind has unexpected shape".into())),
        }
    }
}

/// An action submitted to the engine, before it is sequenced and hashed.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub at: Tick,
    pub actor: Actor,
    pub kind: EventKind,
}

impl Command {
    pub fn new(at: Tick, actor: impl Into<Actor>, kind: EventKind) -> Self {
        Command { at, actor: actor.into(), kind }
    }

    pub fn system(at: Tick, kind: EventKind) -> Self {
        Command { at, actor: Actor::System, kind }
    }
}

/// A hash-chained, append-only unit of change.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub at: Tick,
    pub kind: EventKind,
    pub actor: Actor,
    pub parent_hash: Digest,
    pub hash: Digest,
}

/// Field list of an event in declared order, excluding `hash`.
pub fn event_fields(
    seq: u64,
    at: Tick,
    kind: &EventKind,
    actor: &Actor,
    parent_hash: &Digest,
) -> Result<Fields, EncodingError> {
    let (tag, payload) = kind.tag_and_payload()?;
    let mut out = Fields::new();
    out.push(("seq".into(), seq.to_string()));
    out.push(("at".into(), at.to_string()));
    out.push(("kind".into(), canonical::escape(&tag)));
    canonical::flatten("actor", &canonical::to_value(actor)?, &mut out)?;
    canonical::flatten("payload", &payload, &mut out)?;
    out.push(("parent_hash".into(), parent_hash.to_hex()));
    Ok(out)
}

pub fn sha256(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

impl Event {
    /// Sequences and hashes a command on top of `parent_hash`.
    pub fn seal(seq: u64, parent_hash: Digest, command: Command) -> Result<Event, EncodingError> {
        let mut event = Event {
            seq,
            at: command.at,
            kind: command.kind,
            actor: command.actor,
            parent_hash,
            hash: Digest::ZERO,
        };
        event.hash = event.compute_hash()?;
        Ok(event)
    }

    pub fn fields(&self) -> Result<Fields, EncodingError> {
        event_fields(self.seq, self.at, &self.kind, &self.actor, &self.parent_hash)
    }

    /// Canonical encoding of every field except `hash`.
    pub fn canonical_encode(&self) -> Result<Vec<u8>, EncodingError> {
        Ok(canonical::render(&self.fields()?, '\n').into_bytes())
    }

    pub fn compute_hash(&self) -> Result<Digest, EncodingError> {
        Ok(sha256(&self.canonical_encode()?))
    }

    pub fn command(&self) -> Command {
        Command { at: self.at, actor: self.actor.clone(), kind: self.kind.clone() }
    }

    /// Rebuilds an event from its canonical fields; `hash` is supplied separately.
    pub fn from_fields(fields: Fields, hash: Digest) -> Result<Event, EncodingError> {
        let Node::Branch(mut map) = canonical::tree_from_fields(fields)? else {
            return Err(EncodingError::Malformed("event is not a record".into()));
        };
        let mut take = |name: &str| {
            map.shift_remove(name)
                .ok_or_else(|| EncodingError::Malformed(format!("missing field `{name}`")))
        };
        let seq: u64 = serde::Deserialize::deserialize(take("seq")?)?;
        let at: Tick = serde::Deserialize::deserialize(take("at")?)?;
        let tag: String = serde::Deserialize::deserialize(take("kind")?)?;
        let actor: Actor = serde::Deserialize::deserialize(take("actor")?)?;
        let payload = take("payload")?;
        let parent_hash: Digest = serde::Deserialize::deserialize(take("parent_hash")?)?;
        if let Some(extra) = map.keys().next() {
            return Err(EncodingError::Malformed(format!("unexpected field `{extra}`")));
        }
        let mut wrapped = indexmap::IndexMap::new();
        wrapped.insert(tag, payload);
        let kind = EventKind::deserialize(Node::Branch(wrapped))?;
        Ok(Event { seq, at, kind, actor, parent_hash, hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joined(at: Tick, who: &str) -> Event {
        Event::seal(
            0,
            Digest::ZERO,
            Command::system(at, EventKind::MemberJoined { member: who.into() }),
        )
        .unwrap()
    }

    #[test]
    fn encoding_layout() {
        let e = joined(3, "alice");
        let text = String::from_utf8(e.canonical_encode().unwrap()).unwrap();
        assert_eq!(
            text,
            format!(
                "seq=0\nat=3\nkind=MemberJoined\nactor=system\npayload.member=alice\nparent_hash={}",
                "0".repeat(64)
            )
        );
    }

    #[test]
    fn encoding_is_deterministic_and_tick_sensitive() {
        let a = joined(1, "alice");
        assert_eq!(a.canonical_encode().unwrap(), a.canonical_encode().unwrap());
        assert_eq!(a.compute_hash().unwrap(), a.compute_hash().unwrap());
        let b = joined(2, "alice");
        assert_ne!(a.canonical_encode().unwrap(), b.canonical_encode().unwrap());
    }

    #[test]
    fn empty_actor_is_an_encoding_error() {
        let mut e = joined(1, "alice");
        e.actor = Actor::Member(MemberId::from(""));
        assert!(e.canonical_encode().is_err());
        assert!(e.compute_hash().is_err());
    }

    // Digests below were computed with `hashlib.sha256` over the literal
    // canonical texts, independently of this crate.
    #[test]
    fn digests_match_reference_sha256() {
        let a = joined(3, "alice");
        assert_eq!(
            a.hash.to_hex(),
            "6011620cea921c44eed8954e31973de59097165ba673b7d995750957328d823c"
        );
        // `alice` -> `alicd`: a single flipped bit in the payload.
        let b = joined(3, "alicd");
        assert_eq!(
            b.hash.to_hex(),
            "9193eab89e42aa50898c1e228112cf2d90e899e4686ececdc071766b8806d307"
        );
    }

    #[test]
    fn fields_round_trip() {
        let e = Event::seal(
            4,
            Digest([7; 32]),
            Command::new(
                9,
                MemberId::from("bob"),
                EventKind::BallotCast { proposal: "p1".into(), choice: Choice::Approve(["x".to_string(), "y".to_string()].into()) },
            ),
        )
        .unwrap();
        let back = Event::from_fields(e.fields().unwrap(), e.hash).unwrap();
        assert_eq!(back, e);
    }
}
