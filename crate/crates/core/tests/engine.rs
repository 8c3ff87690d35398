use std::collections::BTreeSet;

use voicegov_core::domain::*;
use voicegov_core::engine::{self, logfile, Authorization, Engine, EngineError};
use voicegov_core::mechanisms::tally_liquid;

fn all_powers() -> BTreeSet<PowerKind> {
    [
        PowerKind::EditRules,
        PowerKind::ManageRoles,
        PowerKind::ModerateContent,
        PowerKind::PinContent,
        PowerKind::RemoveMember,
    ]
    .into_iter()
    .collect()
}

fn founding(mode: GovernanceMode, rules: Vec<Rule>) -> EventKind {
    EventKind::CommunityFounded {
        mode,
        ruleset: RuleSet { version: 0, rules, amendment_policy: AmendmentPolicy::default() },
        roles: vec![RoleDef { id: "admin".into(), powers: all_powers(), seats: Some(2) }],
        founders: vec![Founder { member: "root".into(), roles: ["admin".into()].into_iter().collect() }],
        triggers: vec![],
    }
}

fn community(mode: GovernanceMode, rules: Vec<Rule>, members: &[&str]) -> Engine {
    let mut e = Engine::new();
    e.submit(Command::system(0, founding(mode, rules))).unwrap();
    for m in members {
        e.submit(Command::system(0, EventKind::MemberJoined { member: (*m).into() })).unwrap();
    }
    e
}

fn act(e: &mut Engine, at: Tick, who: &str, kind: EventKind) -> Result<Vec<Event>, EngineError> {
    e.submit(Command::new(at, MemberId::from(who), kind))
}

fn ban(target: &str, basis: Option<&str>) -> EventKind {
    EventKind::ModerationAction { action: ModerationKind::Ban, target: target.into(), basis: basis.map(ProposalId::from) }
}

fn referendum(id: &str, subject: ProposalSubject, closes_at: Tick) -> ProposalSpec {
    ProposalSpec {
        id: id.into(),
        subject,
        closes_at,
        method: TallyMethod::Referendum { quorum: Fraction::ZERO, approval: "2/3".parse().unwrap() },
        eligibility: EligibilityFilter::default(),
        topic: TopicId::wildcard(),
        delegation: false,
        weighting: Weighting::Unit,
    }
}

fn open(spec: ProposalSpec) -> EventKind {
    EventKind::ProposalOpened { proposal: spec, origin: ProposalOrigin::Direct }
}

fn vote(p: &str, c: Choice) -> EventKind {
    EventKind::BallotCast { proposal: p.into(), choice: c }
}

fn jury_rule() -> Rule {
    Rule {
        id: "bans-require-jury".into(),
        constraint: RuleConstraint {
            actions: [ActionKind::Ban].into_iter().collect(),
            modes: BTreeSet::new(),
            requires: vec![Requirement::AdoptedProposal(ProposalKind::ModerationAppeal)],
        },
        enforcement: Enforcement::Hard,
    }
}

#[test]
fn member_joined_on_empty_community() {
    let mut e = Engine::new();
    e.submit(Command::system(0, founding(GovernanceMode::AdminOnly, vec![]))).unwrap();
    let out = e.submit(Command::system(1, EventKind::MemberJoined { member: "alice".into() })).unwrap();
    assert_eq!(out.len(), 1);
    assert!(e.state().is_active(&"alice".into()));
    assert_eq!(e.log().len(), 2);
}

#[test]
fn admin_ban_allowed_in_admin_only() {
    let mut e = community(GovernanceMode::AdminOnly, vec![], &["bob"]);
    assert_eq!(
        e.authorize(&Command::new(1, MemberId::from("root"), ban("bob", None))).unwrap(),
        Authorization::Allowed
    );
    act(&mut e, 1, "root", ban("bob", None)).unwrap();
    assert!(!e.state().is_active(&"bob".into()));
}

#[test]
fn admin_ban_denied_in_jury_mode() {
    let mut e = community(GovernanceMode::JuryMode { jury_size: 1 }, vec![jury_rule()], &["bob"]);
    let before = e.head_hash();
    let err = act(&mut e, 1, "root", ban("bob", None)).unwrap_err();
    let EngineError::Rejected(r) = err else { panic!("expected rejection, got {err}") };
    let ids: Vec<&str> = r.violations.iter().map(|v| v.as_str()).collect();
    assert_eq!(ids, ["mode:JuryMode", "bans-require-jury"]);
    assert_eq!(e.head_hash(), before);
    assert_eq!(e.rejections().len(), 1);
    assert!(e.state().is_active(&"bob".into()));
}

#[test]
fn soft_rule_flags_and_appends() {
    let soft = Rule {
        id: "no-pins".into(),
        constraint: RuleConstraint {
            actions: [ActionKind::PinContent].into_iter().collect(),
            modes: BTreeSet::new(),
            requires: vec![Requirement::ActorHasRole("curator".into())],
        },
        enforcement: Enforcement::Soft,
    };
    let mut e = community(GovernanceMode::AdminOnly, vec![soft], &["bob"]);
    let pin = EventKind::ModerationAction { action: ModerationKind::PinContent, target: "bob".into(), basis: None };
    let out = act(&mut e, 2, "root", pin).unwrap();
    assert_eq!(out.len(), 2);
    assert!(matches!(
        &out[1].kind,
        EventKind::ViolationFlagged { rule, event_seq, .. } if rule.as_str() == "no-pins" && *event_seq == out[0].seq
    ));
    let report = engine::audit(e.log());
    assert!(report.chain_valid);
    assert_eq!(report.soft_violations.len(), 1);
    assert!(report.unauthorized.is_empty());
}

#[test]
fn mode_change_effect_follows_close() {
    // founded(0), join(1), open(2), ballot(3), close(4) -> ModeChanged(5)
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &["a"]);
    let spec = referendum("to-consensus", ProposalSubject::ModeChange { to: GovernanceMode::Oligarchy }, 5);
    act(&mut e, 1, "a", open(spec)).unwrap();
    act(&mut e, 2, "a", vote("to-consensus", Choice::Yes)).unwrap();
    let out = e.close(&"to-consensus".into(), 5).unwrap();
    assert_eq!(out[0].seq, 4);
    assert!(matches!(out[0].kind, EventKind::ProposalClosed { status: ProposalStatus::Adopted, .. }));
    assert_eq!(out[1].seq, 5);
    assert!(matches!(&out[1].kind, EventKind::ModeChanged { to: GovernanceMode::Oligarchy, .. }));
    assert_eq!(out[1].actor, Actor::System);
    assert_eq!(e.state().mode, GovernanceMode::Oligarchy);
}

#[test]
fn close_is_idempotent_and_waits_for_deadline() {
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &["a"]);
    let spec = referendum("p", ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() }, 5);
    act(&mut e, 1, "a", open(spec)).unwrap();
    assert!(e.close(&"p".into(), 4).unwrap().is_empty());
    assert_eq!(e.close(&"p".into(), 5).unwrap().len(), 1);
    assert!(e.close(&"p".into(), 6).unwrap().is_empty());
    // The only active voter did not vote: no quorum needed, 0/0 approval fails.
    assert_eq!(e.state().proposals[&ProposalId::from("p")].status, ProposalStatus::Rejected);
}

#[test]
fn tick_regression_is_refused() {
    let mut e = community(GovernanceMode::AdminOnly, vec![], &[]);
    e.submit(Command::system(5, EventKind::MemberJoined { member: "x".into() })).unwrap();
    let err = e.submit(Command::system(4, EventKind::MemberJoined { member: "y".into() })).unwrap_err();
    assert!(matches!(err, EngineError::TickOrder { last: 5, at: 4 }));
}

#[test]
fn derived_kinds_cannot_be_submitted() {
    let mut e = community(GovernanceMode::AdminOnly, vec![], &[]);
    let forged = EventKind::ModeChanged {
        from: GovernanceMode::AdminOnly,
        to: GovernanceMode::DirectDemocracy,
        basis: "nothing".into(),
    };
    assert!(matches!(e.submit(Command::system(1, forged.clone())), Err(EngineError::Invalid(_))));
    assert!(matches!(act(&mut e, 1, "root", forged), Err(EngineError::Invalid(_))));
}

#[test]
fn unknown_actor() {
    let e = community(GovernanceMode::AdminOnly, vec![], &[]);
    let cmd = Command::new(1, MemberId::from("ghost"), ban("root", None));
    assert!(matches!(e.authorize(&cmd), Err(EngineError::UnknownActor(_))));
}

#[test]
fn replay_reproduces_state_and_detects_tampering() {
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &["a", "b", "c"]);
    let spec = referendum("p", ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() }, 9);
    act(&mut e, 1, "a", open(spec)).unwrap();
    act(&mut e, 2, "b", vote("p", Choice::Yes)).unwrap();
    act(&mut e, 3, "c", vote("p", Choice::Yes)).unwrap();
    e.close(&"p".into(), 9).unwrap();
    assert_eq!(e.state().policies["k"], "v");

    let replayed = engine::replay(e.log()).unwrap();
    assert_eq!(replayed.state(), e.state());
    assert_eq!(replayed.head_hash(), e.head_hash());
    assert_eq!(engine::fold_all(e.log()), *e.state());

    let text = logfile::render_log(e.log()).unwrap();
    assert_eq!(logfile::read_log_bytes(text.as_bytes()).unwrap(), e.log());
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[3] = lines[3].replacen("payload.member=c", "payload.member=d", 1);
    let tampered = lines.join("\n") + "\n";
    let err = logfile::read_log_bytes(tampered.as_bytes()).unwrap_err();
    assert!(matches!(err, EngineError::CorruptLog { first_break_seq: 3, .. }), "{err}");
    let report = logfile::audit_bytes(tampered.as_bytes());
    assert!(!report.chain_valid);
    assert_eq!(report.first_break_seq, Some(3));
}

#[test]
fn empty_log_replays_to_empty_state() {
    let engine = engine::replay(&[]).unwrap();
    assert_eq!(engine.head_hash(), Digest::ZERO);
    assert_eq!(*engine.state(), CommunityState::default());
}

#[test]
fn petition_promotes_to_binding_proposal() {
    let members: Vec<String> = (0..9).map(|i| format!("m{i}")).collect();
    let refs: Vec<&str> = members.iter().map(String::as_str).collect();
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &refs);
    // 10 eligible members, threshold 0.2 -> 2 signatures.
    let petition = PetitionSpec {
        id: "pet".into(),
        target: ProposalDraft {
            id: "from-pet".into(),
            subject: ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() },
            period: 4,
            method: TallyMethod::Referendum { quorum: Fraction::ZERO, approval: "0.51".parse().unwrap() },
            eligibility: EligibilityFilter::default(),
            topic: TopicId::wildcard(),
            delegation: false,
            weighting: Weighting::Unit,
        },
        threshold: "0.2".parse().unwrap(),
        eligibility: EligibilityFilter::default(),
        expires_at: 50,
    };
    let out = act(&mut e, 1, "m0", EventKind::PetitionOpened { petition }).unwrap();
    assert_eq!(out.len(), 1);
    assert!(act(&mut e, 2, "m0", EventKind::PetitionSigned { petition: "pet".into() }).is_err());
    let out = act(&mut e, 2, "m1", EventKind::PetitionSigned { petition: "pet".into() }).unwrap();
    let kinds: Vec<&str> = out.iter().map(|ev| ev.kind.name()).collect();
    assert_eq!(kinds, ["PetitionSigned", "PetitionPromoted", "ProposalOpened"]);
    let p = &e.state().proposals[&ProposalId::from("from-pet")];
    assert_eq!(p.spec.closes_at, 6);
    assert_eq!(p.origin, ProposalOrigin::Petition("pet".into()));
    assert!(p.ballots.is_empty(), "signatures are not votes");
    let err = act(&mut e, 3, "m2", EventKind::PetitionSigned { petition: "pet".into() }).unwrap_err();
    assert!(matches!(err, EngineError::Mechanism(_)));
    engine::replay(e.log()).unwrap();
}

#[test]
fn jury_appeal_carries_out_ban() {
    let members: Vec<String> = (0..6).map(|i| format!("j{i}")).collect();
    let mut refs: Vec<&str> = members.iter().map(String::as_str).collect();
    refs.push("troll");
    let mut e = community(GovernanceMode::JuryMode { jury_size: 3 }, vec![jury_rule()], &refs);
    let spec = ProposalSpec {
        id: "appeal".into(),
        subject: ProposalSubject::ModerationAppeal { action: ModerationKind::Ban, target: "troll".into() },
        closes_at: 10,
        method: TallyMethod::JuryVerdict { jury_size: 3 },
        eligibility: EligibilityFilter::default(),
        topic: TopicId::wildcard(),
        delegation: false,
        weighting: Weighting::Unit,
    };
    let out = act(&mut e, 1, "j0", open(spec)).unwrap();
    assert_eq!(out.len(), 2);
    let EventKind::JuryDrawn { members: jury, exclusions, seed, .. } = &out[1].kind else { panic!() };
    assert_eq!(jury.len(), 3);
    assert!(exclusions.contains(&MemberId::from("troll")) && exclusions.contains(&MemberId::from("j0")));
    assert!(!jury.contains(&"troll".into()) && !jury.contains(&"j0".into()));
    let expected = u64::from_be_bytes(out[0].hash.0[..8].try_into().unwrap());
    assert_eq!(*seed, expected);
    // A non-juror cannot vote.
    let outsider = ["j1", "j2", "j3", "j4", "j5"].into_iter().find(|m| !jury.contains(&(*m).into())).unwrap();
    assert!(act(&mut e, 2, outsider, vote("appeal", Choice::Yes)).is_err());
    for j in jury.clone() {
        act(&mut e, 2, j.as_str(), vote("appeal", Choice::Yes)).unwrap();
    }
    let out = e.close(&"appeal".into(), 10).unwrap();
    assert!(matches!(
        &out[1].kind,
        EventKind::ModerationAction { action: ModerationKind::Ban, basis: Some(b), .. } if b.as_str() == "appeal"
    ));
    assert!(!e.state().is_active(&"troll".into()));
    let report = engine::audit(e.log());
    assert_eq!(report.moderation.len(), 1);
    assert_eq!(report.moderation[0].basis, Some("appeal".into()));
    assert!(report.unauthorized.is_empty() && report.replay_error.is_none());
}

#[test]
fn appeal_basis_satisfies_admin_in_jury_mode() {
    let mut e = community(GovernanceMode::JuryMode { jury_size: 1 }, vec![jury_rule()], &["j", "k", "troll"]);
    let spec = ProposalSpec {
        id: "appeal".into(),
        subject: ProposalSubject::ModerationAppeal { action: ModerationKind::Ban, target: "troll".into() },
        closes_at: 3,
        method: TallyMethod::JuryVerdict { jury_size: 1 },
        eligibility: EligibilityFilter::default(),
        topic: TopicId::wildcard(),
        delegation: false,
        weighting: Weighting::Unit,
    };
    let out = act(&mut e, 1, "root", open(spec)).unwrap();
    let EventKind::JuryDrawn { members, .. } = &out[1].kind else { panic!() };
    act(&mut e, 2, members[0].as_str(), vote("appeal", Choice::No)).unwrap();
    e.close(&"appeal".into(), 3).unwrap();
    // Rejected appeal: the ban stays forbidden.
    assert!(matches!(act(&mut e, 4, "root", ban("troll", Some("appeal"))), Err(EngineError::Rejected(_))));
}

#[test]
fn role_grants_need_manage_roles_and_a_permitting_mode() {
    let mut e = community(GovernanceMode::AdminOnly, vec![], &["a", "b"]);
    let grant = |m: &str| EventKind::RoleGranted { role: "admin".into(), member: m.into(), basis: None };
    assert!(matches!(act(&mut e, 1, "a", grant("b")), Err(EngineError::Rejected(_))));
    act(&mut e, 1, "root", grant("a")).unwrap();
    // Two seats: a third holder does not fit.
    assert!(matches!(act(&mut e, 1, "root", grant("b")), Err(EngineError::Invalid(_))));

    let mut d = community(GovernanceMode::DirectDemocracy, vec![], &["a"]);
    let err = act(&mut d, 1, "root", grant("a")).unwrap_err();
    let EngineError::Rejected(r) = err else { panic!() };
    assert_eq!(r.violations[0].as_str(), "mode:DirectDemocracy");
}

#[test]
fn amendment_needs_policy_level_referendum() {
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &["a", "b", "c"]);
    let subject = ProposalSubject::Amendment { rules: vec![jury_rule()], amendment_policy: AmendmentPolicy::default() };
    let mut weak = referendum("weak", subject.clone(), 5);
    weak.method = TallyMethod::Referendum { quorum: Fraction::ZERO, approval: "0.6".parse().unwrap() };
    let err = act(&mut e, 1, "a", open(weak)).unwrap_err();
    let EngineError::Rejected(r) = err else { panic!() };
    assert_eq!(r.violations[0].as_str(), "policy:amendment");

    act(&mut e, 1, "a", open(referendum("amend", subject, 5))).unwrap();
    for m in ["a", "b", "root"] {
        act(&mut e, 2, m, vote("amend", Choice::Yes)).unwrap();
    }
    act(&mut e, 2, "c", vote("amend", Choice::No)).unwrap();
    let out = e.close(&"amend".into(), 5).unwrap();
    assert!(matches!(out[1].kind, EventKind::RuleAmended { old_version: 0, new_version: 1, .. }));
    assert_eq!(e.state().ruleset.version, 1);
}

#[test]
fn delegated_tally_matches_liquid_mechanism() {
    let mut e = community(GovernanceMode::DirectDemocracy, vec![], &["a", "b", "c", "d"]);
    let mut spec = referendum("p", ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() }, 9);
    spec.delegation = true;
    act(&mut e, 1, "a", EventKind::DelegationSet { delegate: "b".into(), topic: TopicId::wildcard() }).unwrap();
    act(&mut e, 1, "c", EventKind::DelegationSet { delegate: "d".into(), topic: TopicId::wildcard() }).unwrap();
    act(&mut e, 1, "d", EventKind::DelegationSet { delegate: "c".into(), topic: TopicId::wildcard() }).unwrap();
    act(&mut e, 2, "root", open(spec)).unwrap();
    act(&mut e, 3, "b", vote("p", Choice::Yes)).unwrap();
    act(&mut e, 3, "root", vote("p", Choice::No)).unwrap();
    let (_, tally) = e.preview_close(&"p".into(), 9).unwrap();
    let p = &e.state().proposals[&ProposalId::from("p")];
    let liquid = tally_liquid(&e.state().all_edges(), &p.direct_ballots(), &TopicId::wildcard(), |_| 1.0).unwrap();
    assert_eq!(tally.totals, liquid.totals);
    assert_eq!(tally.weight("yes"), 2.0);
    assert_eq!(tally.abstained_by_cycle, 2);
}

#[test]
fn snapshot_and_journal_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = community(GovernanceMode::JuryMode { jury_size: 1 }, vec![jury_rule()], &["bob"]);
    let spec = referendum("p", ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() }, 9);
    act(&mut e, 1, "bob", open(spec)).unwrap();
    act(&mut e, 2, "bob", vote("p", Choice::Yes)).unwrap();
    let _ = act(&mut e, 3, "root", ban("bob", None));

    let bytes = logfile::encode_snapshot(e.state()).unwrap();
    let decoded = logfile::decode_snapshot(&bytes).unwrap();
    assert_eq!(&decoded, e.state());
    assert_eq!(logfile::encode_snapshot(&decoded).unwrap(), bytes);

    let path = dir.path().join("rejections.log");
    logfile::append_rejections(&path, e.rejections()).unwrap();
    logfile::append_rejections(&path, e.rejections()).unwrap();
    let journal = logfile::read_journal(&path).unwrap();
    assert_eq!(journal.len(), 2);
    assert_eq!(journal[1].parent_hash, journal[0].hash);
    assert_eq!(journal[0].rejected, e.rejections()[0]);
}
