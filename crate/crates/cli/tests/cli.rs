use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voicegov_cli::community::{Community, EVENTS, REJECTIONS, SNAPSHOT};
use voicegov_core::domain::{ProposalId, TopicId};
use voicegov_core::engine::logfile;
use voicegov_core::mechanisms::tally_liquid;

const ADMIN_ONLY: &str = r#"
mode = "AdminOnly"
members = ["alice", "bob"]

[[roles]]
id = "admin"
powers = ["ManageRoles", "ModerateContent", "RemoveMember"]

[[roles]]
id = "mod"
powers = ["ModerateContent"]

[[founders]]
member = "root"
roles = ["admin"]
"#;

const JURY: &str = r#"
mode = { JuryMode = { jury_size = 3 } }
members = ["alice", "bob", "carol", "dave"]

[[roles]]
id = "admin"
powers = ["ManageRoles", "ModerateContent", "RemoveMember"]

[[founders]]
member = "root"
roles = ["admin"]
"#;

const DIRECT: &str = r#"
mode = "DirectDemocracy"
members = ["a", "b", "c", "d", "e"]
"#;

fn voicegov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voicegov")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn init(root: &Path, name: &str, setup: &str) -> PathBuf {
    let cfg = root.join(format!("{name}.toml"));
    std::fs::write(&cfg, setup).unwrap();
    let dir = root.join(name);
    let o = voicegov(&["init", p(&dir), "--config", p(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

fn act(dir: &Path, who: &str, at: u64, action: &str) -> Output {
    let at = at.to_string();
    let mut args = vec!["act", p(dir), "--as", who, "--at", &at];
    args.extend(action.split_whitespace());
    voicegov(&args)
}

fn last_hash(dir: &Path) -> String {
    let log = std::fs::read_to_string(dir.join(EVENTS)).unwrap();
    log.lines().last().unwrap().rsplit_once("hash=").unwrap().1.to_owned()
}

#[test]
fn init_writes_the_directory_and_refuses_reuse() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", ADMIN_ONLY);
    for f in [EVENTS, REJECTIONS, "config", SNAPSHOT] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(dir.join("config")).unwrap(), ADMIN_ONLY);
    assert_eq!(std::fs::read(dir.join(REJECTIONS)).unwrap(), b"");

    let replay = voicegov(&["replay", p(&dir)]);
    assert!(replay.status.success());
    assert!(stdout(&replay).contains(&format!("head_hash={}", last_hash(&dir))));

    let cfg = tmp.path().join("c.toml");
    let again = voicegov(&["init", p(&dir), "--config", p(&cfg)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("path exists"));
}

#[test]
fn invalid_ruleset_names_the_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let setup = r#"
[[rules]]
id = "mode:sneaky"
constraint = { actions = ["Ban"] }
enforcement = "Hard"
"#;
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, setup).unwrap();
    let o = voicegov(&["init", p(&tmp.path().join("c")), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("rules[0]") && err.contains("reserved prefix"), "{err}");
    assert!(!tmp.path().join("c").exists());

    std::fs::write(&cfg, "[amendment_policy]\napproval_threshold = \"1/2\"\nquorum = \"0\"\n").unwrap();
    let o = voicegov(&["init", p(&tmp.path().join("c")), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("must exceed 1/2"));
}

#[test]
fn authorized_grant_prints_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", ADMIN_ONLY);
    let o = act(&dir, "root", 1, "grant-role role=mod member=alice");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), last_hash(&dir));

    // alice moderates, but holds no power to grant roles.
    let o = act(&dir, "alice", 2, "grant-role role=mod member=bob");
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("power:ManageRoles"));
}

#[test]
fn jury_mode_ban_without_jury_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", JURY);
    let before = std::fs::read(dir.join(EVENTS)).unwrap();
    let o = act(&dir, "root", 1, "moderate action=ban target=bob");
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).trim(), "mode:JuryMode");
    assert_eq!(std::fs::read(dir.join(EVENTS)).unwrap(), before);
    let journal = logfile::read_journal(&dir.join(REJECTIONS)).unwrap();
    assert_eq!(journal.len(), 1);
    assert_eq!(journal[0].rejected.violations[0].as_str(), "mode:JuryMode");
}

#[test]
fn tampered_log_exits_with_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", ADMIN_ONLY);
    assert!(act(&dir, "root", 1, "grant-role role=mod member=alice").status.success());
    let text = std::fs::read_to_string(dir.join(EVENTS)).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    // seq 2 joins bob; rename him in place.
    assert!(lines[2].contains("payload.member=bob"));
    lines[2] = lines[2].replace("payload.member=bob", "payload.member=bop");
    std::fs::write(dir.join(EVENTS), lines.join("\n") + "\n").unwrap();

    let o = act(&dir, "root", 2, "grant-role role=mod member=bob");
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("first_break_seq=2"));

    let audit = voicegov(&["audit", p(&dir)]);
    assert_eq!(audit.status.code(), Some(2));
    assert!(stdout(&audit).contains("first_break_seq=2"));
}

#[test]
fn tally_closes_once_and_renders_the_same_result() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", DIRECT);
    let open = "open-proposal id=p1 period=3 subject=policy key=theme value=dark method=referendum quorum=3/10 approval=2/3";
    assert!(act(&dir, "a", 1, open).status.success());
    for (m, c) in [("a", "yes"), ("b", "yes"), ("c", "yes"), ("d", "no")] {
        assert!(act(&dir, m, 2, &format!("ballot proposal=p1 choice={c}")).status.success());
    }
    let early = voicegov(&["tally", p(&dir), "p1"]);
    assert!(early.status.success());
    assert!(stdout(&early).contains("closed=false"));

    let first = voicegov(&["tally", p(&dir), "p1", "--now", "4"]);
    assert!(first.status.success());
    let out = stdout(&first);
    assert!(out.contains("status=Adopted") && out.contains("closed=true"), "{out}");
    let log = std::fs::read(dir.join(EVENTS)).unwrap();
    let state = Community::open(&dir).unwrap();
    assert_eq!(state.state().policies.get("theme").map(String::as_str), Some("dark"));

    let second = voicegov(&["tally", p(&dir), "p1", "--now", "9"]);
    assert_eq!(stdout(&second), out);
    assert_eq!(std::fs::read(dir.join(EVENTS)).unwrap(), log);

    let missing = voicegov(&["tally", p(&dir), "nope"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("not found"));
}

#[test]
fn liquid_tally_matches_the_delegation_resolver() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", DIRECT);
    let open = "open-proposal id=q period=4 subject=policy key=k value=v method=referendum approval=0.6 delegation=true";
    assert!(act(&dir, "a", 1, open).status.success());
    assert!(act(&dir, "b", 1, "delegate to=a").status.success());
    assert!(act(&dir, "c", 1, "delegate to=b").status.success());
    assert!(act(&dir, "d", 1, "delegate to=e").status.success());
    assert!(act(&dir, "e", 1, "delegate to=d").status.success());
    assert!(act(&dir, "a", 2, "ballot proposal=q choice=yes").status.success());
    assert!(act(&dir, "c", 2, "ballot proposal=q choice=no").status.success());
    let o = voicegov(&["tally", p(&dir), "q", "--now", "5"]);
    assert!(o.status.success());

    let snapshot = logfile::read_snapshot(&dir.join(SNAPSHOT)).unwrap();
    let proposal = &snapshot.proposals[&ProposalId::from("q")];
    let liquid = tally_liquid(&snapshot.all_edges(), &proposal.direct_ballots(), &TopicId::wildcard(), |_| 1.0).unwrap();
    let closed = proposal.result.as_ref().unwrap();
    assert_eq!(closed.totals, liquid.totals);
    assert_eq!(closed.abstained_by_cycle, liquid.abstained_by_cycle);
    // a and b count for yes, c votes no directly, d and e delegate in a cycle.
    assert_eq!((closed.weight("yes"), closed.weight("no"), closed.abstained_by_cycle), (2.0, 1.0, 2));
}

#[test]
fn unknown_keys_and_missing_actor_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", DIRECT);
    let o = act(&dir, "a", 1, "ballot proposal=p choice=yes flavour=mint");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("flavour"));
    let o = voicegov(&["act", p(&dir), "sign", "petition=x"]);
    assert_eq!(o.status.code(), Some(1));
    let o = voicegov(&["act", p(&dir), "--system", "join", "member=f"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn triggers_fire_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let setup = format!(
        "{ADMIN_ONLY}\n[[triggers]]\nid = \"abandonment\"\nkind = {{ Abandonment = {{ inactivity_ticks = 5 }} }}\n"
    );
    let dir = init(tmp.path(), "c", &setup);
    let quiet = voicegov(&["triggers", p(&dir), "--now", "5"]);
    assert!(quiet.status.success());
    assert_eq!(stdout(&quiet), "");
    let fired = voicegov(&["triggers", p(&dir), "--now", "6"]);
    assert!(stdout(&fired).contains("TriggerFired"), "{}", stdout(&fired));
    let again = voicegov(&["triggers", p(&dir), "--now", "7"]);
    assert!(!stdout(&again).contains("TriggerFired"));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn simulate_writes_one_file_per_seed_and_arm() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.toml");
    std::fs::write(&cfg, "[run]\nticks = 40\n").unwrap();

    let single = tmp.path().join("single");
    let o = voicegov(&["simulate", p(&cfg), "--seeds", "1..3", "--out", p(&single)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = files(&single).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["seed-1.csv", "seed-2.csv", "seed-3.csv"]);
    let csv = String::from_utf8(files(&single)[0].1.clone()).unwrap();
    assert!(csv.starts_with("tick,Q,exits_cum,affective_cum,effective_cum,mean_loyalty,mean_satisfaction,slack\n"));
    assert_eq!(csv.lines().count(), 42);

    let paired = tmp.path().join("paired");
    let o = voicegov(&["simulate", p(&cfg), "--seeds", "1..3", "--compare", "--out", p(&paired)]);
    assert!(o.status.success());
    let first = files(&paired);
    assert_eq!(first.iter().filter(|f| f.0.ends_with(".csv")).count(), 6);
    assert!(first.iter().any(|f| f.0 == "summary.txt"));

    let o = voicegov(&["simulate", p(&cfg), "--seeds", "1..3", "--compare", "--sequential", "--out", p(&paired)]);
    assert!(o.status.success());
    assert_eq!(files(&paired), first);
}

#[test]
fn malformed_schedule_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.toml");
    std::fs::write(&cfg, "[deterioration]\nsegments = [{ from = 0, rate = 0.02 }, { from = 5, rate = -1.0 }]\n").unwrap();
    let o = voicegov(&["simulate", p(&cfg), "--seeds", "1", "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("deterioration.segments[1].rate"), "{}", stderr(&o));

    std::fs::write(&cfg, "[deterioration]\nsegmnts = []\n").unwrap();
    let o = voicegov(&["simulate", p(&cfg), "--seeds", "1", "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("segmnts"), "{}", stderr(&o));
}

#[test]
fn artifacts_round_trip_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = init(tmp.path(), "c", JURY);
    assert!(act(&dir, "alice", 1, "open-petition id=x proposal=px threshold=1/2 expires=9 period=3 subject=appeal action=ban target=bob method=jury size=3").status.success());
    assert!(act(&dir, "carol", 2, "sign petition=x").status.success());
    assert_eq!(act(&dir, "root", 2, "moderate action=ban target=bob").status.code(), Some(3));

    let log = std::fs::read(dir.join(EVENTS)).unwrap();
    let events = logfile::read_log_bytes(&log).unwrap();
    assert_eq!(logfile::render_log(&events).unwrap().into_bytes(), log);

    let snap = std::fs::read(dir.join(SNAPSHOT)).unwrap();
    let state = logfile::decode_snapshot(&snap).unwrap();
    assert_eq!(logfile::encode_snapshot(&state).unwrap(), snap);

    let journal = std::fs::read(dir.join(REJECTIONS)).unwrap();
    let entries = logfile::read_journal_bytes(&journal).unwrap();
    let rewritten: String = entries.iter().map(|e| logfile::encode_journal_line(e).unwrap() + "\n").collect();
    assert_eq!(rewritten.into_bytes(), journal);

    let copy = tmp.path().join("copy");
    logfile::write_log(&copy, &events).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), log);
}
