//! Transcript lines.
//!
//! `> ` echoes a command, `< ` is a kernel answer, `? ` an inquisitor
//! question and `! ` a local notice. Nothing here ever sees a signature.

use protea_core::{AdminError, AdminOutcome, AuthError, Payload, Reply, Status, Value};

pub fn echo(text: &str) -> String {
    format!("> {text}")
}

pub fn notice(text: &str) -> String {
    format!("! {text}")
}

pub fn question(text: &str) -> String {
    format!("? {text}")
}

fn values(vs: &[Value]) -> String {
    vs.iter().map(Value::to_string).collect::<Vec<_>>().join(" ")
}

fn status(s: Status) -> String {
    match s {
        Status::Ok => "ok".into(),
        Status::Error(code) => code.name().into(),
    }
}

fn payload(p: &Payload) -> String {
    match p {
        Payload::Values(vs) if vs.is_empty() => "(empty)".into(),
        Payload::Values(vs) => values(vs),
        Payload::Item(h) => h.to_string(),
        Payload::Text(t) => t.clone(),
        Payload::Count(n) => n.to_string(),
        Payload::Inbox(rs) => format!("{} message(s)", rs.len()),
    }
}

/// One reply, optionally prefixed by its sender for broadcasts.
pub fn reply(r: &Reply, with_sender: bool) -> Vec<String> {
    let mut head = String::from("< ");
    if with_sender {
        head.push_str(&format!("{} ", r.from));
    }
    head.push_str(&status(r.status));
    if let Some(p) = &r.payload {
        head.push(' ');
        head.push_str(&payload(p));
    }
    let mut out = vec![head];
    if let Some(Payload::Inbox(rs)) = &r.payload {
        for copy in rs {
            let mut line = format!("<   {} -> {} {}", copy.from, copy.to, status(copy.status));
            if let Some(p) = &copy.payload {
                line.push(' ');
                line.push_str(&payload(p));
            }
            out.push(line);
        }
    }
    out
}

pub fn auth_error(e: AuthError) -> String {
    let name = match e {
        AuthError::AuthFailed => "AuthFailed",
        AuthError::AlreadyConnected => "AlreadyConnected",
        AuthError::DualLoginForbidden => "DualLoginForbidden",
    };
    format!("< {name}")
}

pub fn admin_outcome(o: &AdminOutcome) -> String {
    match o {
        AdminOutcome::UserCreated { name } => format!("< ok user {name:?} created"),
        AdminOutcome::Transferred { items, flagged } => {
            format!("< ok {items} item(s) transferred{}", if *flagged { " (flagged for audit)" } else { "" })
        }
        AdminOutcome::BackedUp { path, bytes } => format!("< ok {bytes} bytes written to {}", path.display()),
        AdminOutcome::Restored { users, objects } => format!("< ok restored {users} user(s), {objects} object(s)"),
    }
}

pub fn admin_error(e: &AdminError) -> String {
    let name = match e {
        AdminError::NotAdmin => "NotAdmin",
        AdminError::InvalidName => "InvalidName",
        AdminError::DuplicateName => "DuplicateName",
        AdminError::UnknownUser => "UnknownUser",
        AdminError::InvalidTransfer => "InvalidTransfer",
        AdminError::SessionsActive => "SessionsActive",
        AdminError::RegistryExhausted => "RegistryExhausted",
        AdminError::Snapshot(_) => "SnapshotError",
    };
    format!("< {name}: {e}")
}
