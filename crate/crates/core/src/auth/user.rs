use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::SecretDigest;
use crate::error::ErrorCode;
use crate::message::RoutedReply;
use crate::model::ObjectId;
use crate::signature::Signature;

/// Fields checked at every login whatever the user configures.
pub const MINIMAL_FIELDS: [&str; 2] = ["name", "secret"];

fn is_minimal(field: &str) -> bool {
    MINIMAL_FIELDS.contains(&field)
}

/// A person's proxy in the system: an instance of the built-in USER type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserObject {
    pub(crate) object_id: ObjectId,
    pub(crate) name: String,
    pub(crate) signature: Signature,
    pub(crate) secret_digest: SecretDigest,
    pub(crate) profile: RecognitionProfile,
    pub(crate) group_list: BTreeSet<Signature>,
    pub(crate) error_counter: u64,
    pub(crate) opt_out_enroll: bool,
    pub(crate) inquisitor_qa: Vec<(String, SecretDigest)>,
    pub(crate) must_rotate_secret: bool,
    pub(crate) inbox: Vec<RoutedReply>,
}

impl UserObject {
    pub(crate) fn new(
        object_id: ObjectId,
        name: String,
        signature: Signature,
        secret_digest: SecretDigest,
        sequence_window_secs: u64,
    ) -> Self {
        UserObject {
            object_id,
            name,
            signature,
            secret_digest,
            profile: RecognitionProfile::minimal(sequence_window_secs),
            group_list: BTreeSet::new(),
            error_counter: 0,
            opt_out_enroll: false,
            inquisitor_qa: Vec::new(),
            must_rotate_secret: true,
            inbox: Vec::new(),
        }
    }

    pub fn object_id(&self) -> ObjectId {
        self.object_id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn error_counter(&self) -> u64 {
        self.error_counter
    }

    pub fn profile(&self) -> &RecognitionProfile {
        &self.profile
    }

    pub fn group_size(&self) -> usize {
        self.group_list.len()
    }

    pub fn opt_out_enroll(&self) -> bool {
        self.opt_out_enroll
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox.len()
    }

    #[cfg(any(test, feature = "inspect"))]
    pub fn signature(&self) -> Signature {
        self.signature
    }

    #[cfg(any(test, feature = "inspect"))]
    pub fn group_list(&self) -> &BTreeSet<Signature> {
        &self.group_list
    }

    pub(crate) fn apply(&mut self, change: RecognitionChange, rng: &mut dyn RngCore) -> Result<(), ErrorCode> {
        let profile = &mut self.profile;
        match change {
            RecognitionChange::SetSecret(secret) => {
                if secret.is_empty() {
                    return Err(ErrorCode::ImmutableMinimalControl);
                }
                self.secret_digest = SecretDigest::new(&secret, rng);
                self.must_rotate_secret = false;
            }
            RecognitionChange::RemoveSecret => return Err(ErrorCode::ImmutableMinimalControl),
            RecognitionChange::RequireField { field, value } => {
                if is_minimal(&field) {
                    return Err(ErrorCode::ImmutableMinimalControl);
                }
                profile.forbidden_fields.remove(&field);
                profile.habit_attributes.insert(field.clone(), SecretDigest::new(&value, rng));
                profile.required_fields.insert(field);
            }
            RecognitionChange::DropRequiredField(field) => {
                if is_minimal(&field) {
                    return Err(ErrorCode::ImmutableMinimalControl);
                }
                profile.required_fields.remove(&field);
                profile.habit_attributes.remove(&field);
            }
            RecognitionChange::ForbidField(field) => {
                if is_minimal(&field) {
                    return Err(ErrorCode::ImmutableMinimalControl);
                }
                profile.required_fields.remove(&field);
                profile.habit_attributes.remove(&field);
                profile.forbidden_fields.insert(field);
            }
            RecognitionChange::AllowField(field) => {
                profile.forbidden_fields.remove(&field);
            }
            RecognitionChange::SetSequence { tokens, window_secs } => {
                if tokens.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
                    return Err(ErrorCode::ConstraintViolation);
                }
                profile.action_sequence = tokens;
                if let Some(w) = window_secs {
                    profile.sequence_window_secs = w;
                }
            }
            RecognitionChange::ClearSequence => profile.action_sequence.clear(),
            RecognitionChange::AddQuestion { question, answer } => {
                if question.is_empty() {
                    return Err(ErrorCode::ConstraintViolation);
                }
                self.inquisitor_qa.push((question, SecretDigest::new(&answer, rng)));
            }
            RecognitionChange::ClearQuestions => self.inquisitor_qa.clear(),
        }
        Ok(())
    }
}

/// The user-chosen part of login recognition. Name and secret are always
/// checked in addition to whatever is configured here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognitionProfile {
    pub(crate) required_fields: BTreeSet<String>,
    pub(crate) habit_attributes: BTreeMap<String, SecretDigest>,
    pub(crate) forbidden_fields: BTreeSet<String>,
    pub(crate) action_sequence: Vec<String>,
    pub(crate) sequence_window_secs: u64,
}

impl RecognitionProfile {
    pub(crate) fn minimal(sequence_window_secs: u64) -> Self {
        RecognitionProfile {
            required_fields: BTreeSet::new(),
            habit_attributes: BTreeMap::new(),
            forbidden_fields: BTreeSet::new(),
            action_sequence: Vec::new(),
            sequence_window_secs,
        }
    }

    pub fn required_fields(&self) -> impl Iterator<Item = &str> {
        self.required_fields.iter().map(String::as_str)
    }

    pub fn forbidden_fields(&self) -> impl Iterator<Item = &str> {
        self.forbidden_fields.iter().map(String::as_str)
    }

    pub fn action_sequence(&self) -> &[String] {
        &self.action_sequence
    }

    pub fn sequence_window_secs(&self) -> u64 {
        self.sequence_window_secs
    }
}

/// A change a user makes to their own recognition protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecognitionChange {
    SetSecret(String),
    /// Always refused: the secret is a minimal control.
    RemoveSecret,
    RequireField { field: String, value: String },
    DropRequiredField(String),
    ForbidField(String),
    AllowField(String),
    SetSequence { tokens: Vec<String>, window_secs: Option<u64> },
    ClearSequence,
    AddQuestion { question: String, answer: String },
    ClearQuestions,
}

impl RecognitionChange {
    pub fn label(&self) -> &'static str {
        match self {
            RecognitionChange::SetSecret(_) => "secret",
            RecognitionChange::RemoveSecret => "remove-secret",
            RecognitionChange::RequireField { .. } => "require",
            RecognitionChange::DropRequiredField(_) => "unrequire",
            RecognitionChange::ForbidField(_) => "forbid",
            RecognitionChange::AllowField(_) => "allow",
            RecognitionChange::SetSequence { .. } => "sequence",
            RecognitionChange::ClearSequence => "clear-sequence",
            RecognitionChange::AddQuestion { .. } => "question",
            RecognitionChange::ClearQuestions => "clear-questions",
        }
    }
}
