//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use protea_core::snapshot::StoreSnapshot;
use protea_core::signature::{Sha256Hasher, SignatureRegistry};
use protea_core::{
    AdminCommand, AdminError, AuthError, Credentials, ErrorCode, Function, Handle, InquiryOutcome,
    KernelConfig, Mode, RecognitionChange, Request, Right, Scope, SessionState, Signature, SnapshotError,
    Value, ValueKind, Visibility,
};
use protea_shell::{batch, config};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::world::{observed, reference, run_world, World, WorldStats};
use support::{define, enroll, get, grant, instantiate, schema, secret_of, Fixture};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const WORLDS: u64 = 200;
const WORLD_MESSAGES: usize = 1000;

/// Criteria 1 and 2 share the same 200 worlds.
fn worlds() -> (WorldStats, Duration) {
    let start = Instant::now();
    let mut total = WorldStats::default();
    for seed in 0..WORLDS {
        total.absorb(&run_world(seed, WORLD_MESSAGES));
    }
    (total, start.elapsed())
}

fn oracle_equivalence(stats: &WorldStats, elapsed: Duration) -> Outcome {
    check(stats.decided > 0, "no decisions compared")?;
    check(
        stats.disagreements.is_empty(),
        format!("{} disagreement(s), first: {}", stats.disagreements.len(), stats.disagreements.first().map_or("", |s| s))
    )?;
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "{WORLDS} worlds, {} decisions, 100% agreement in {:.1?}",
        stats.decided, elapsed
    ))
}

fn write_exclusivity(stats: &WorldStats) -> Outcome {
    check(stats.writes_attempted > stats.writes_ok, "no non-owner write was attempted")?;
    check(stats.nonowner_writes_ok == 0, format!("{} non-owner write(s) succeeded", stats.nonowner_writes_ok))?;
    Ok(format!(
        "{} write attempts, {} by owners succeeded, 0 by non-owners",
        stats.writes_attempted, stats.writes_ok
    ))
}

/// Set the four grant bits of `item` to `pattern` through owner messages.
fn apply_pattern(f: &mut Fixture, owner: protea_core::SessionId, item: Handle, pattern: u8) -> Result<(), String> {
    let bits = [(Right::Read, Scope::Group), (Right::Read, Scope::All), (Right::Use, Scope::Group), (Right::Use, Scope::All)];
    for (i, (right, scope)) in bits.into_iter().enumerate() {
        let r = grant(&mut f.kernel, owner, item, right, scope, pattern & (1 << i) != 0);
        check(r.is_ok(), format!("setting bit {i}: {r:?}"))?;
    }
    Ok(())
}

fn exhaustive_table() -> Outcome {
    let mut f = Fixture::new();
    let paul = f.user("PAUL");
    let michel = f.user("MICHEL");
    let anne = f.user("ANNE");
    let ty = define(&mut f.kernel, paul, "Fiche", vec![schema("note", ValueKind::Integer, Visibility::All)]);
    check(grant(&mut f.kernel, paul, ty, Right::Use, Scope::All, false).is_ok(), "type grant")?;
    let item = instantiate(&mut f.kernel, paul, ty, vec![("note", Value::Integer(1))]);
    check(enroll(&mut f.kernel, paul, "MICHEL").is_ok(), "enrollment")?;
    apply_pattern(&mut f, paul, item, 0b1111)?;
    let mut handles = vec![(paul, item)];
    for viewer in [michel, anne] {
        let seen = support::learn(&mut f.kernel, viewer, "Fiche");
        check(seen.len() == 1, "viewer could not learn the object")?;
        handles.push((viewer, seen[0]));
    }

    let sig = |f: &Fixture, n: &str| f.kernel.inspect().user_signature(n).expect("live user");
    let owner = sig(&f, "PAUL");
    let group: HashSet<Signature> = [sig(&f, "MICHEL")].into();
    let requesters = [("owner", sig(&f, "PAUL")), ("member", sig(&f, "MICHEL")), ("stranger", sig(&f, "ANNE"))];

    let mut cases = 0;
    for pattern in 0u8..16 {
        apply_pattern(&mut f, paul, item, pattern)?;
        let id = f.kernel.inspect().resolve(paul, item).ok_or("object vanished")?;
        let stored = f.kernel.inspect().bits_of(id);
        check(stored.map(|b| b.pattern()) == Some(pattern), format!("stored bits differ for {pattern:04b}"))?;
        for (mode, function) in [
            (Mode::Read, Function::Get { attr: "note".into() }),
            (Mode::Use, Function::Invoke { name: "imprimer".into(), args: Vec::new() }),
            (Mode::Write, Function::Set { attr: "note".into(), values: vec![Value::Integer(2)] }),
        ] {
            for (i, (class, requester)) in requesters.iter().enumerate() {
                let (sid, h) = handles[i];
                let expected = reference(*requester, owner, mode, pattern, &group);
                let reply = f.kernel.dispatch(sid, Request::to_item(h, function.clone()));
                let got = observed(reply.error());
                check(
                    got == expected,
                    format!("{pattern:04b} {mode:?} {class}: expected {expected:?}, got {got:?}"),
                )?;
                cases += 1;
            }
        }
    }
    check(cases == 144, format!("{cases} cases"))?;
    Ok("144/144 cases match".into())
}

fn enrollment_trace() -> Outcome {
    let mut f = Fixture::new();
    let paul = f.user("PAUL");
    let michel = f.user("MICHEL");
    let anne = f.user("ANNE");
    let k = &mut f.kernel;
    let ty = define(k, paul, "Carnet", vec![schema("texte", ValueKind::Text, Visibility::Group)]);
    let item = instantiate(k, paul, ty, vec![("texte", Value::Text("ordre du jour".into()))]);
    check(grant(k, paul, item, Right::Read, Scope::Group, true).is_ok(), "grant")?;
    check(grant(k, paul, ty, Right::Read, Scope::Group, true).is_ok(), "type grant")?;
    check(enroll(k, paul, "MICHEL").is_ok(), "enrollment refused")?;
    let lines: Vec<&str> = k.trace_lines().collect();
    let at = lines
        .iter()
        .position(|l| *l == r#"Mess("PAUL","MICHEL",*,inscription)"#)
        .ok_or("request line missing")?;
    check(lines.get(at + 1) == Some(&r#"Mess("MICHEL","PAUL",*,ok)"#), "reply line missing or out of order")?;

    let member = support::learn(k, michel, "Carnet");
    let stranger = support::learn(k, anne, "Carnet");
    check(member.len() == 1 && stranger.len() == 1, "handles not learned")?;
    let r = get(k, michel, member[0], "texte");
    check(r.is_ok(), format!("member read: {r:?}"))?;
    let r = get(k, anne, stranger[0], "texte");
    check(r.error() == Some(ErrorCode::DeniedGroup), format!("non-member read: {r:?}"))?;
    Ok("both trace lines present, member read ok, non-member E_DENIED_GROUP".into())
}

fn revocation_immediacy(stats: &WorldStats) -> Outcome {
    check(stats.stale_successes == 0, format!("{} stale success(es) in worlds", stats.stale_successes))?;
    let mut f = Fixture::new();
    let paul = f.user("PAUL");
    let anne = f.user("ANNE");
    let k = &mut f.kernel;
    let ty = define(k, paul, "Affiche", vec![schema("titre", ValueKind::Text, Visibility::All)]);
    instantiate(k, paul, ty, vec![("titre", Value::Text("concert".into()))]);
    let h = support::learn(k, anne, "Affiche")[0];
    let (mut directed, mut stale) = (0, 0);
    for round in 0..100 {
        let right = if round % 2 == 0 { Right::Read } else { Right::Use };
        let function = match right {
            Right::Read => Function::Get { attr: "titre".into() },
            Right::Use => Function::Invoke { name: "imprimer".into(), args: Vec::new() },
        };
        let obj = support::learn(k, paul, "Affiche")[0];
        check(grant(k, paul, obj, right, Scope::All, true).is_ok(), "grant")?;
        check(k.dispatch(anne, Request::to_item(h, function.clone())).is_ok(), "granted access failed")?;
        check(grant(k, paul, obj, right, Scope::All, false).is_ok(), "revoke")?;
        directed += 1;
        if k.dispatch(anne, Request::to_item(h, function)).is_ok() {
            stale += 1;
        }
    }
    check(stale == 0, format!("{stale} stale success(es) right after revocation"))?;
    Ok(format!("0 stale successes over {} revoked requests in worlds and {directed} directed", stats.after_revoke))
}

fn admin_isolation() -> Outcome {
    let mut f = Fixture::new();
    let paul = f.user("PAUL");
    f.create_user("MICHEL");
    let k = &mut f.kernel;
    let ty = define(k, paul, "Dossier", vec![schema("cote", ValueKind::Text, Visibility::All)]);
    let mut objects = vec![ty];
    for i in 0..5 {
        objects.push(instantiate(k, paul, ty, vec![("cote", Value::Text(format!("D{i}")))]));
    }
    check(grant(k, paul, ty, Right::Read, Scope::All, true).is_ok(), "grant")?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xad);
    let mut refused = 0;
    for n in 0..500 {
        let function = match rng.gen_range(0..8) {
            0 => Function::Get { attr: "cote".into() },
            1 => Function::Set { attr: "cote".into(), values: vec![Value::Text("X".into())] },
            2 => Function::Describe,
            3 => Function::Invoke { name: "imprimer".into(), args: Vec::new() },
            4 => Function::Donate { to: "MICHEL".into() },
            5 => Function::SetGrant { right: Right::Read, scope: Scope::All, enable: rng.gen_bool(0.5) },
            6 => Function::Duplicate { to: "MICHEL".into(), new_name: None },
            _ => Function::Instantiate { values: Vec::new() },
        };
        let request = match rng.gen_range(0..4) {
            0 => Request::to_type("Dossier", function),
            1 => Request::to_item(*objects.choose(&mut rng).expect("non-empty"), function),
            2 => {
                let h: Handle = format!("#{:08x}", rng.gen::<u32>()).parse().expect("handle syntax");
                Request::to_item(h, function)
            }
            _ => Request::to_user(["PAUL", "MICHEL"].choose(&mut rng).expect("non-empty"), function),
        };
        let r = k.dispatch(f.admin, request);
        check(r.error() == Some(ErrorCode::AdminForbidden), format!("message {n}: {:?}", r.status))?;
        refused += 1;
    }

    let paul_sig = k.inspect().user_signature("PAUL").ok_or("PAUL missing")?;
    let owned = k.inspect().owned_by(paul_sig).len();
    k.admin(f.admin, AdminCommand::BulkTransfer { departing: "PAUL".into(), new_owner: "MICHEL".into() })
        .map_err(|e| format!("transfer: {e}"))?;
    let left = k.inspect().owned_by(paul_sig).len();
    check(left == 0, format!("{left} item(s) still under the departed signature"))?;
    let t = k.open_terminal();
    check(
        k.login(t, &Credentials::new("PAUL", &secret_of("PAUL"))) == Err(AuthError::AuthFailed),
        "departed user can still log in",
    )?;
    Ok(format!("{refused}/500 E_ADMIN_FORBIDDEN, {owned} items moved, 0 left, departed login rejected"))
}

fn leaks(haystack: &[u8], sig: &Signature) -> bool {
    let raw = sig.to_bytes();
    let hex: Vec<u8> = raw.iter().map(|b| format!("{b:02x}")).collect::<String>().into_bytes();
    let hex_upper = hex.to_ascii_uppercase();
    let decimal = u32::from_be_bytes(raw).to_string().into_bytes();
    [&raw[..], &hex, &hex_upper, &decimal].iter().any(|needle| haystack.windows(needle.len()).any(|w| w == *needle))
}

fn signature_hygiene() -> Outcome {
    check(std::mem::size_of::<Signature>() == 4, "signature is not 4 bytes in memory")?;
    let mut registry = SignatureRegistry::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut seen = HashSet::new();
    for i in 0..10_000 {
        let sig = registry.mint(&format!("U{}", i % 17), &Sha256Hasher, &mut rng).map_err(|e| e.to_string())?;
        check(sig.len() == 4 && sig.to_bytes().len() == Signature::LEN, "signature length")?;
        check(seen.insert(sig.to_bytes()), format!("duplicate signature at mint {i}"))?;
    }

    let cfg = config::load(Some(&scripts().join("kernel.toml"))).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut transcript = Vec::new();
    let mut sigs = Vec::new();
    for name in ["enrollment.pt", "coverage.pt", "inquisitor.pt"] {
        let text = std::fs::read_to_string(scripts().join(name)).map_err(|e| e.to_string())?;
        let mut cfg = cfg.clone();
        cfg.snapshot_path = Some(dir.path().join(format!("{name}.snap")));
        let out = batch::run(cfg, &text).map_err(|e| e.to_string())?;
        let inspect = out.kernel.inspect();
        for user in inspect.store().users() {
            sigs.push(user.signature());
        }
        transcript.extend(out.transcript);
        transcript.extend(out.kernel.trace_lines().map(str::to_owned));
        transcript.extend(out.kernel.audit_entries().map(|e| e.to_string()));
    }
    let text = transcript.join("\n").into_bytes();
    check(!sigs.is_empty(), "no users to check")?;
    let leaked = sigs.iter().filter(|s| leaks(&text, s)).count();
    check(leaked == 0, format!("{leaked} signature(s) found in the transcript"))?;
    Ok(format!(
        "4 bytes, 10000 unique mints, {} signatures absent from {} transcript lines",
        sigs.len(),
        transcript.len()
    ))
}

fn scripts() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/scripts")
}

fn inquisitor() -> Outcome {
    let mut f = Fixture::with_config(KernelConfig { inquisitor_threshold: 3, ..support::config() });
    let paul = f.user("PAUL");
    let k = &mut f.kernel;
    let change = RecognitionChange::AddQuestion { question: "ville".into(), answer: "Lyon".into() };
    check(k.dispatch(paul, Request::to_user("PAUL", Function::Configure { change })).is_ok(), "question")?;
    let bad = |k: &mut protea_core::Kernel| k.dispatch(paul, Request::to_type("absent", Function::Describe));
    for n in 1..=3 {
        bad(k);
        check(k.session_state(paul) == SessionState::Active, format!("fired after error {n}"))?;
    }
    bad(k);
    check(matches!(k.session_state(paul), SessionState::Challenged { .. }), "did not fire on the 4th error")?;
    check(k.answer_inquiry(paul, &["Lyon".into()]) == InquiryOutcome::Continue, "correct answer refused")?;
    check(k.inspect().error_counter("PAUL") == Some(0), "counter not reset")?;

    let cfg = scripts().join("kernel.toml");
    let pt = scripts().join("inquisitor.pt");
    let out = Command::new(env!("CARGO_BIN_EXE_protea"))
        .args(["-c", cfg.to_str().unwrap_or_default(), "batch", pt.to_str().unwrap_or_default()])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.code() == Some(1), format!("wrong answer exit status {:?}", out.status.code()))?;
    Ok("fires on error 4, correct answer resets counter to 0, wrong answer exits 1".into())
}

fn authentication() -> Outcome {
    let mut f = Fixture::new();
    f.create_user("PAUL");
    let real = secret_of("PAUL");
    let t = f.kernel.open_terminal();
    let mut dictionary: Vec<String> = (0..99).map(|i| format!("mot{i:02}-de-passe")).collect();
    dictionary.insert(37, real.clone());
    let mut outcomes = HashSet::new();
    let mut locked_at = None;
    for (i, guess) in dictionary.iter().enumerate() {
        let r = f.kernel.login(t, &Credentials::new("PAUL", guess));
        check(r.is_err(), format!("guess {i} got in"))?;
        outcomes.insert(format!("{r:?}"));
        if locked_at.is_none() && f.kernel.inspect().lockout_failures("PAUL") >= 5 {
            locked_at = Some(i + 1);
        }
    }
    outcomes.insert(format!("{:?}", f.kernel.login(t, &Credentials::new("NOBODY", "x"))));
    check(outcomes.len() == 1, format!("rejections differ: {outcomes:?}"))?;
    check(locked_at == Some(5), format!("lockout after {locked_at:?} failures"))?;
    f.clock.advance_secs(61);
    let sid = f.kernel.login(t, &Credentials::new("PAUL", &real)).map_err(|e| format!("after cooldown: {e:?}"))?;

    let k = &mut f.kernel;
    for change in [
        RecognitionChange::SetSequence { tokens: vec!["inbox".into(), "type".into()], window_secs: Some(30) },
        RecognitionChange::ForbidField("badge".into()),
    ] {
        check(k.dispatch(sid, Request::to_user("PAUL", Function::Configure { change })).is_ok(), "profile change")?;
    }
    k.logout(sid);
    let now = k.now();
    let good = || Credentials::new("PAUL", &real).with_action("inbox", now).with_action("type", now);
    let wrong_sequence = Credentials::new("PAUL", &real).with_action("type", now).with_action("inbox", now);
    let forbidden = good().with_field("badge", "B-7");
    let t = k.open_terminal();
    check(k.login(t, &wrong_sequence) == Err(AuthError::AuthFailed), "sequence violation accepted")?;
    check(k.login(t, &forbidden) == Err(AuthError::AuthFailed), "forbidden field accepted")?;
    let sid = k.login(t, &good()).map_err(|e| format!("clean login: {e:?}"))?;
    k.logout(sid);
    Ok("100 uniform rejections, locked after 5, sequence and forbidden-field violations each AuthFailed".into())
}

fn snapshot_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("store.snap");
    let mut world = World::build(4242);
    world.run(400);
    let f = &mut world.fixture;
    let before = f.kernel.inspect().store().clone();
    f.kernel.admin(f.admin, AdminCommand::Backup { path: Some(path.clone()) }).map_err(|e| e.to_string())?;
    for sid in world.sessions.clone() {
        f.kernel.logout(sid);
    }
    f.kernel.admin(f.admin, AdminCommand::Restore { path: Some(path.clone()) }).map_err(|e| e.to_string())?;
    check(*f.kernel.inspect().store() == before, "restored store differs")?;

    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let decoded = StoreSnapshot::decode(&text).map_err(|e| e.to_string())?.into_store();
    check(decoded == before, "decoded snapshot differs")?;

    let at = text.find("\"a\"").ok_or("no attribute value to tamper with")?;
    let mut tampered = text.into_bytes();
    tampered[at + 1] = b'z';
    std::fs::write(&path, &tampered).map_err(|e| e.to_string())?;
    let r = f.kernel.admin(f.admin, AdminCommand::Restore { path: Some(path) });
    check(
        matches!(r, Err(AdminError::Snapshot(SnapshotError::CorruptSnapshot))),
        format!("tampered restore: {r:?}"),
    )?;
    check(*f.kernel.inspect().store() == before, "failed restore changed the store")?;
    Ok(format!("{} objects deep-equal after round trip, tamper rejected", before.objects().count()))
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    match result {
        Ok(detail) => {
            println!("PASS {n:>2} {name}: {detail}");
            true
        }
        Err(why) => {
            println!("FAIL {n:>2} {name}: {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let (stats, elapsed) = worlds();
    let results = [
        run(1, "oracle equivalence", || oracle_equivalence(&stats, elapsed)),
        run(2, "write exclusivity", || write_exclusivity(&stats)),
        run(3, "exhaustive protection table", exhaustive_table),
        run(4, "enrollment trace", enrollment_trace),
        run(5, "revocation immediacy", || revocation_immediacy(&stats)),
        run(6, "administrator isolation", admin_isolation),
        run(7, "signature hygiene", signature_hygiene),
        run(8, "inquisitor", inquisitor),
        run(9, "authentication", authentication),
        run(10, "snapshot round trip", snapshot_round_trip),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
