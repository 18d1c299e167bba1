//! Evaluation functions run at login.

use std::collections::BTreeMap;

use super::UserObject;
use crate::clock::Timestamp;

/// One captured action: a command token and when it was issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub token: String,
    pub at: Timestamp,
}

impl Action {
    pub fn new(token: impl Into<String>, at: Timestamp) -> Self {
        Action { token: token.into(), at }
    }
}

/// Everything a person supplies when trying to connect.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Credentials {
    pub fields: BTreeMap<String, String>,
    pub actions: Vec<Action>,
}

impl Credentials {
    pub fn new(name: &str, secret: &str) -> Self {
        Credentials::default().with_field("name", name).with_field("secret", secret)
    }

    pub fn with_field(mut self, field: &str, value: &str) -> Self {
        self.fields.insert(field.to_owned(), value.to_owned());
        self
    }

    pub fn with_action(mut self, token: &str, at: Timestamp) -> Self {
        self.actions.push(Action::new(token, at));
        self
    }

    pub fn name(&self) -> &str {
        self.fields.get("name").map(String::as_str).unwrap_or("")
    }
}

/// Smallest time span (ms) over which `expected` occurs as an in-order
/// subsequence of `actions`. Unrelated tokens may be interleaved.
pub(crate) fn sequence_span(expected: &[String], actions: &[Action]) -> Option<u64> {
    let (first, rest) = expected.split_first()?;
    let mut sorted: Vec<&Action> = actions.iter().collect();
    sorted.sort_by_key(|a| a.at);
    let mut best: Option<u64> = None;
    for (start, a) in sorted.iter().enumerate() {
        if &a.token != first {
            continue;
        }
        let mut cursor = start + 1;
        let mut last = a.at;
        let mut complete = true;
        for want in rest {
            match sorted[cursor..].iter().position(|b| &b.token == want) {
                Some(off) => {
                    last = sorted[cursor + off].at;
                    cursor += off + 1;
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            // Later starts only have fewer actions to draw from.
            break;
        }
        let span = last.millis() - a.at.millis();
        best = Some(best.map_or(span, |b| b.min(span)));
    }
    best
}

/// All checks are evaluated; the caller only learns the conjunction.
pub(crate) fn recognizes(user: &UserObject, creds: &Credentials) -> bool {
    let supplied = |f: &str| creds.fields.get(f).filter(|v| !v.is_empty());
    let name_ok = creds.fields.get("name").is_some_and(|n| *n == user.name);
    let secret_ok = supplied("secret").is_some_and(|s| user.secret_digest.matches(s));
    let profile = &user.profile;
    let required_ok = profile.required_fields.iter().all(|f| {
        match (supplied(f), profile.habit_attributes.get(f)) {
            (Some(value), Some(habit)) => habit.matches(value),
            _ => false,
        }
    });
    let forbidden_ok = profile.forbidden_fields.iter().all(|f| supplied(f).is_none());
    let sequence_ok = profile.action_sequence.is_empty()
        || sequence_span(&profile.action_sequence, &creds.actions)
            .is_some_and(|span| span <= profile.sequence_window_secs.saturating_mul(1000));
    name_ok & secret_ok & required_ok & forbidden_ok & sequence_ok
}
