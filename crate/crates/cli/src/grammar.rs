//! The action grammar: `<kind> key=value ...`.
//!
//! The full grammar is [`GRAMMAR`].

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use voicegov_core::domain::{
    AmendmentPolicy, Bloc, BlocOrigin, Choice, Command, EligibilityFilter, EventKind, ExitReason, Fraction,
    GovernanceMode, MemberId, ModerationKind, PetitionSpec, ProposalDraft, ProposalOrigin, ProposalSpec,
    ProposalSubject, Rule, TallyMethod, Tick, TopicId, Weighting,
};

use crate::error::CliError;

/// Grammar reference printed by `voicegov act --help`.
pub const GRAMMAR: &str = "\
join member=M                                   (system)\n\
contribute member=M [amount=N]                  (system)\n\
exit [member=M] [reason=voluntary|removed] [basis=P]\n\
ballot proposal=P choice=yes|no|abstain|pick:M|approve:M,N\n\
delegate to=M [topic=T]\n\
revoke-delegation [topic=T]\n\
sign petition=P\n\
grant-role role=R member=M [basis=P]\n\
revoke-role role=R member=M [basis=P]\n\
moderate action=ban|mute|warn|pin|remove target=M [basis=P]\n\
declare-bloc id=B members=M,N [label=L]\n\
open-proposal id=P (closes=T | period=N) SUBJECT METHOD [OPTIONS]\n\
open-petition id=X proposal=P threshold=F expires=T period=N SUBJECT METHOD [OPTIONS]\n\
\n\
SUBJECT  subject=policy key=K value=V\n\
         subject=election role=R seats=N [candidates=M,N]\n\
         subject=recall role=R member=M\n\
         subject=mode to=AdminOnly|Oligarchy|Representative|DirectDemocracy|Consensus:F|JuryMode:N\n\
         subject=appeal action=ACTION target=M\n\
         subject=amendment rules-file=PATH   (TOML with `rules` and `amendment_policy`)\n\
METHOD   method=referendum quorum=F approval=F | method=jury size=N | method=plurality | method=approval\n\
OPTIONS  topic=T delegation=true|false weighting=unit|reputation\n\
         min-tenure=N min-contributions=N voter-role=R\n\
\n\
Fractions are `a/b` or decimals. Unknown keys are errors.\n";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Args {
    kind: String,
    map: BTreeMap<String, String>,
}

impl Args {
    fn parse(tokens: &[String]) -> Result<Self, CliError> {
        let (kind, rest) = tokens.split_first().ok_or_else(|| usage("missing action kind"))?;
        let mut map = BTreeMap::new();
        for t in rest {
            let (k, v) = t.split_once('=').ok_or_else(|| usage(format!("expected key=value, got `{t}`")))?;
            if map.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(usage(format!("`{k}` given twice")));
            }
        }
        Ok(Args { kind: kind.clone(), map })
    }

    fn opt(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn req(&mut self, key: &str) -> Result<String, CliError> {
        self.opt(key).ok_or_else(|| usage(format!("`{}` needs `{key}=`", self.kind)))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)
            .map(|v| v.parse::<T>().map_err(|e| usage(format!("bad `{key}`: {e}"))))
            .transpose()
    }

    fn req_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let kind = self.kind.clone();
        self.parsed(key)?.ok_or_else(|| usage(format!("`{kind}` needs `{key}=`")))
    }

    fn id<T: for<'a> From<&'a str>>(&mut self, key: &str) -> Result<T, CliError> {
        Ok(T::from(self.req(key)?.as_str()))
    }

    fn finish(self) -> Result<(), CliError> {
        match self.map.keys().next() {
            Some(k) => Err(usage(format!("unknown key `{k}` for `{}`", self.kind))),
            None => Ok(()),
        }
    }
}

fn list(v: &str) -> BTreeSet<MemberId> {
    v.split(',').filter(|s| !s.is_empty()).map(MemberId::from).collect()
}

pub fn parse_mode(s: &str) -> Result<GovernanceMode, CliError> {
    let mode = match s.split_once(':') {
        None => match s {
            "AdminOnly" => GovernanceMode::AdminOnly,
            "Oligarchy" => GovernanceMode::Oligarchy,
            "Representative" => GovernanceMode::Representative,
            "DirectDemocracy" => GovernanceMode::DirectDemocracy,
            _ => return Err(usage(format!("unknown mode `{s}`"))),
        },
        Some(("Consensus", f)) => {
            GovernanceMode::Consensus { threshold: f.parse().map_err(|e| usage(format!("bad threshold: {e}")))? }
        }
        Some(("JuryMode", n)) => {
            GovernanceMode::JuryMode { jury_size: n.parse().map_err(|e| usage(format!("bad jury size: {e}")))? }
        }
        _ => return Err(usage(format!("unknown mode `{s}`"))),
    };
    Ok(mode)
}

fn parse_moderation(s: &str) -> Result<ModerationKind, CliError> {
    Ok(match s {
        "ban" => ModerationKind::Ban,
        "mute" => ModerationKind::Mute,
        "warn" => ModerationKind::Warn,
        "pin" => ModerationKind::PinContent,
        "remove" => ModerationKind::RemoveContent,
        _ => return Err(usage(format!("unknown moderation action `{s}`"))),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AmendmentFile {
    #[serde(default)]
    rules: Vec<Rule>,
    #[serde(default)]
    amendment_policy: AmendmentPolicy,
}

fn subject(a: &mut Args) -> Result<ProposalSubject, CliError> {
    let s = a.req("subject")?;
    Ok(match s.as_str() {
        "policy" => ProposalSubject::PolicyChange { key: a.req("key")?, value: a.req("value")? },
        "election" => ProposalSubject::RoleElection {
            role: a.id("role")?,
            seats: a.req_parsed("seats")?,
            candidates: a.opt("candidates").map(|v| list(&v)),
        },
        "recall" => ProposalSubject::Recall { role: a.id("role")?, member: a.id("member")? },
        "mode" => ProposalSubject::ModeChange { to: parse_mode(&a.req("to")?)? },
        "appeal" => ProposalSubject::ModerationAppeal { action: parse_moderation(&a.req("action")?)?, target: a.id("target")? },
        "amendment" => {
            let path = a.req("rules-file")?;
            let text = std::fs::read_to_string(&path)?;
            let f: AmendmentFile = toml::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))?;
            ProposalSubject::Amendment { rules: f.rules, amendment_policy: f.amendment_policy }
        }
        _ => return Err(usage(format!("unknown subject `{s}`"))),
    })
}

fn method(a: &mut Args) -> Result<TallyMethod, CliError> {
    let m = a.req("method")?;
    Ok(match m.as_str() {
        "referendum" => TallyMethod::Referendum {
            quorum: a.parsed::<Fraction>("quorum")?.unwrap_or(Fraction::ZERO),
            approval: a.req_parsed("approval")?,
        },
        "jury" => TallyMethod::JuryVerdict { jury_size: a.req_parsed("size")? },
        "plurality" => TallyMethod::Plurality,
        "approval" => TallyMethod::Approval,
        _ => return Err(usage(format!("unknown method `{m}`"))),
    })
}

struct Options {
    eligibility: EligibilityFilter,
    topic: TopicId,
    delegation: bool,
    weighting: Weighting,
}

fn options(a: &mut Args) -> Result<Options, CliError> {
    let weighting = match a.opt("weighting").as_deref() {
        None | Some("unit") => Weighting::Unit,
        Some("reputation") => Weighting::Reputation,
        Some(w) => return Err(usage(format!("unknown weighting `{w}`"))),
    };
    Ok(Options {
        eligibility: EligibilityFilter {
            min_tenure: a.parsed("min-tenure")?.unwrap_or(0),
            min_contributions: a.parsed("min-contributions")?.unwrap_or(0),
            required_role: a.opt("voter-role").map(|r| r.as_str().into()),
        },
        topic: a.opt("topic").map_or_else(TopicId::wildcard, |t| t.as_str().into()),
        delegation: a.parsed("delegation")?.unwrap_or(false),
        weighting,
    })
}

fn draft(a: &mut Args, id_key: &str) -> Result<ProposalDraft, CliError> {
    let id = a.id(id_key)?;
    let period = a.req_parsed("period")?;
    let subject = subject(a)?;
    let method = method(a)?;
    let o = options(a)?;
    Ok(ProposalDraft {
        id,
        subject,
        period,
        method,
        eligibility: o.eligibility,
        topic: o.topic,
        delegation: o.delegation,
        weighting: o.weighting,
    })
}

/// Builds the command for `tokens`, acting as `actor` (or the system when `None`) at `at`.
pub fn parse_action(tokens: &[String], actor: Option<&MemberId>, at: Tick) -> Result<Command, CliError> {
    let mut a = Args::parse(tokens)?;
    let me = || actor.cloned().ok_or_else(|| usage("this action needs an acting member (--as)"));
    let kind = match a.kind.as_str() {
        "join" => EventKind::MemberJoined { member: a.id("member")? },
        "contribute" => {
            EventKind::ContributionRecorded { member: a.id("member")?, amount: a.parsed("amount")?.unwrap_or(1) }
        }
        "exit" => {
            let member = match a.opt("member") {
                Some(m) => MemberId::from(m.as_str()),
                None => me()?,
            };
            let reason = match a.opt("reason").as_deref() {
                None | Some("voluntary") => ExitReason::Voluntary,
                Some("removed") => ExitReason::Removed,
                Some(r) => return Err(usage(format!("unknown exit reason `{r}`"))),
            };
            EventKind::MemberExited { member, reason, basis: a.opt("basis").map(|b| b.as_str().into()) }
        }
        "ballot" => EventKind::BallotCast {
            proposal: a.id("proposal")?,
            choice: a.req_parsed::<Choice>("choice")?,
        },
        "delegate" => EventKind::DelegationSet {
            delegate: a.id("to")?,
            topic: a.opt("topic").map_or_else(TopicId::wildcard, |t| t.as_str().into()),
        },
        "revoke-delegation" => {
            EventKind::DelegationRevoked { topic: a.opt("topic").map_or_else(TopicId::wildcard, |t| t.as_str().into()) }
        }
        "sign" => EventKind::PetitionSigned { petition: a.id("petition")? },
        "grant-role" | "revoke-role" => {
            let (role, member) = (a.id("role")?, a.id("member")?);
            let basis = a.opt("basis").map(|b| b.as_str().into());
            if a.kind == "grant-role" {
                EventKind::RoleGranted { role, member, basis }
            } else {
                EventKind::RoleRevoked { role, member, basis }
            }
        }
        "moderate" => EventKind::ModerationAction {
            action: parse_moderation(&a.req("action")?)?,
            target: a.id("target")?,
            basis: a.opt("basis").map(|b| b.as_str().into()),
        },
        "declare-bloc" => EventKind::BlocDeclared {
            bloc: Bloc {
                id: a.id("id")?,
                members: list(&a.req("members")?),
                origin: BlocOrigin::Declared,
                label: a.opt("label").unwrap_or_default(),
            },
        },
        "open-proposal" => {
            let closes: Option<Tick> = a.parsed("closes")?;
            let closes_at = match closes {
                Some(t) => t,
                None if a.map.contains_key("period") => at + a.req_parsed::<Tick>("period")?,
                None => return Err(usage("`open-proposal` needs `closes=` or `period=`")),
            };
            a.map.insert("period".into(), "0".into());
            let d = draft(&mut a, "id")?;
            let spec = ProposalSpec { closes_at, ..d.open_at(at) };
            EventKind::ProposalOpened { proposal: spec, origin: ProposalOrigin::Direct }
        }
        "open-petition" => {
            let id = a.id("id")?;
            let threshold = a.req_parsed("threshold")?;
            let expires_at = a.req_parsed("expires")?;
            let target = draft(&mut a, "proposal")?;
            let eligibility = target.eligibility.clone();
            EventKind::PetitionOpened { petition: PetitionSpec { id, target, threshold, eligibility, expires_at } }
        }
        other => return Err(usage(format!("unknown action `{other}`"))),
    };
    a.finish()?;
    Ok(match kind {
        EventKind::MemberJoined { .. } | EventKind::ContributionRecorded { .. } => Command::system(at, kind),
        _ => Command::new(at, me()?, kind),
    })
}

/// Splits a one-line action description on whitespace.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use voicegov_core::domain::Actor;

    fn parse(line: &str, actor: Option<&str>) -> Result<Command, CliError> {
        let m = actor.map(MemberId::from);
        parse_action(&tokenize(line), m.as_ref(), 4)
    }

    #[test]
    fn join_is_system() {
        let c = parse("join member=alice", None).unwrap();
        assert_eq!(c.actor, Actor::System);
        assert_eq!(c.kind, EventKind::MemberJoined { member: "alice".into() });
    }

    #[test]
    fn moderation_needs_an_actor() {
        assert!(matches!(parse("moderate action=ban target=bob", None), Err(CliError::Usage(_))));
        let c = parse("moderate action=ban target=bob basis=p1", Some("root")).unwrap();
        assert!(matches!(c.kind, EventKind::ModerationAction { action: ModerationKind::Ban, basis: Some(_), .. }));
    }

    #[test]
    fn proposal_with_period() {
        let c = parse("open-proposal id=p subject=mode to=JuryMode:3 method=referendum quorum=1/10 approval=2/3 period=5", Some("a"))
            .unwrap();
        let EventKind::ProposalOpened { proposal, .. } = c.kind else { panic!() };
        assert_eq!(proposal.closes_at, 9);
        assert_eq!(proposal.subject, ProposalSubject::ModeChange { to: GovernanceMode::JuryMode { jury_size: 3 } });
    }

    #[test]
    fn petition_carries_its_draft() {
        let line = "open-petition id=x proposal=p threshold=0.01 expires=20 period=7 subject=policy key=k value=v method=referendum approval=0.6";
        let EventKind::PetitionOpened { petition } = parse(line, Some("a")).unwrap().kind else { panic!() };
        assert_eq!(petition.target.period, 7);
        assert_eq!(petition.expires_at, 20);
    }

    #[test]
    fn unknown_keys_are_refused() {
        let e = parse("ballot proposal=p choice=yes colour=red", Some("a")).unwrap_err();
        assert!(e.to_string().contains("colour"));
        assert!(parse("ballot proposal=p choice=maybe", Some("a")).is_err());
        assert!(parse("teleport", Some("a")).is_err());
    }
}
