//! Error codes carried by replies, plus the session and admin error types.
//!
//! The numeric values of [`ErrorCode`] are a stable contract: the shell prints
//! them, the inquisitor counts them, and scripted transcripts compare them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Status code returned in a [`Reply`](crate::message::Reply) when a message fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Error)]
#[repr(u16)]
pub enum ErrorCode {
    #[error("access denied to all users other than the owner")]
    DeniedAll = 1,
    #[error("access reserved to the owner's group")]
    DeniedGroup = 2,
    #[error("write access is reserved to the owner")]
    WriteForbidden = 3,
    #[error("attribute is not consultable by this requester")]
    HiddenAttr = 4,
    #[error("the administrator may not access objects")]
    AdminForbidden = 5,
    #[error("unknown target")]
    UnknownTarget = 6,
    #[error("unknown function for this target")]
    UnknownFunction = 7,
    #[error("argument type mismatch")]
    ArgTypeMismatch = 8,
    #[error("cardinality or integrity constraint violated")]
    ConstraintViolation = 9,
    #[error("composition would create a cycle")]
    CycleDetected = 10,
    #[error("caller does not own a required object")]
    NotOwner = 11,
    #[error("unknown user")]
    UnknownUser = 12,
    #[error("name already in use")]
    DuplicateName = 13,
    #[error("parent type is not accessible")]
    ParentNotAccessible = 14,
    #[error("built-in types cannot be modified")]
    ImmutableBuiltin = 15,
    #[error("attribute is reserved to the kernel")]
    KernelPrivateAttribute = 16,
    #[error("unknown attribute")]
    UnknownAttribute = 17,
    #[error("enrollment declined")]
    DeclinedEnrollment = 18,
    #[error("minimal connection controls cannot be removed")]
    ImmutableMinimalControl = 19,
    #[error("recognition profile may only be changed by its user")]
    NotSelf = 20,
    #[error("an inquiry must be answered first")]
    InquiryPending = 21,
    #[error("the initial secret must be changed first")]
    RotationRequired = 22,
    #[error("session closed")]
    SessionClosed = 23,
    #[error("unknown type")]
    UnknownType = 24,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 24] = [
        ErrorCode::DeniedAll,
        ErrorCode::DeniedGroup,
        ErrorCode::WriteForbidden,
        ErrorCode::HiddenAttr,
        ErrorCode::AdminForbidden,
        ErrorCode::UnknownTarget,
        ErrorCode::UnknownFunction,
        ErrorCode::ArgTypeMismatch,
        ErrorCode::ConstraintViolation,
        ErrorCode::CycleDetected,
        ErrorCode::NotOwner,
        ErrorCode::UnknownUser,
        ErrorCode::DuplicateName,
        ErrorCode::ParentNotAccessible,
        ErrorCode::ImmutableBuiltin,
        ErrorCode::KernelPrivateAttribute,
        ErrorCode::UnknownAttribute,
        ErrorCode::DeclinedEnrollment,
        ErrorCode::ImmutableMinimalControl,
        ErrorCode::NotSelf,
        ErrorCode::InquiryPending,
        ErrorCode::RotationRequired,
        ErrorCode::SessionClosed,
        ErrorCode::UnknownType,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<ErrorCode> {
        ErrorCode::ALL.into_iter().find(|c| c.code() == code)
    }

    /// Symbolic name used in transcripts, e.g. `E_DENIED_ALL`.
    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::DeniedAll => "E_DENIED_ALL",
            ErrorCode::DeniedGroup => "E_DENIED_GROUP",
            ErrorCode::WriteForbidden => "E_WRITE_FORBIDDEN",
            ErrorCode::HiddenAttr => "E_HIDDEN_ATTR",
            ErrorCode::AdminForbidden => "E_ADMIN_FORBIDDEN",
            ErrorCode::UnknownTarget => "E_UNKNOWN_TARGET",
            ErrorCode::UnknownFunction => "E_UNKNOWN_FUNCTION",
            ErrorCode::ArgTypeMismatch => "E_ARG_TYPE_MISMATCH",
            ErrorCode::ConstraintViolation => "E_CONSTRAINT_VIOLATION",
            ErrorCode::CycleDetected => "E_CYCLE_DETECTED",
            ErrorCode::NotOwner => "E_NOT_OWNER",
            ErrorCode::UnknownUser => "E_UNKNOWN_USER",
            ErrorCode::DuplicateName => "E_DUPLICATE_NAME",
            ErrorCode::ParentNotAccessible => "E_PARENT_NOT_ACCESSIBLE",
            ErrorCode::ImmutableBuiltin => "E_IMMUTABLE_BUILTIN",
            ErrorCode::KernelPrivateAttribute => "E_KERNEL_PRIVATE_ATTRIBUTE",
            ErrorCode::UnknownAttribute => "E_UNKNOWN_ATTRIBUTE",
            ErrorCode::DeclinedEnrollment => "E_DECLINED_ENROLLMENT",
            ErrorCode::ImmutableMinimalControl => "E_IMMUTABLE_MINIMAL_CONTROL",
            ErrorCode::NotSelf => "E_NOT_SELF",
            ErrorCode::InquiryPending => "E_INQUIRY_PENDING",
            ErrorCode::RotationRequired => "E_ROTATION_REQUIRED",
            ErrorCode::SessionClosed => "E_SESSION_CLOSED",
            ErrorCode::UnknownType => "E_UNKNOWN_TYPE",
        }
    }

    /// Whether receiving this code increments the emitter's error counter.
    ///
    /// Session-state refusals are not the user's mistakes about the system and
    /// the administrator has no counter at all.
    pub fn counts_toward_inquisitor(self) -> bool {
        !matches!(
            self,
            ErrorCode::InquiryPending
                | ErrorCode::RotationRequired
                | ErrorCode::SessionClosed
                | ErrorCode::AdminForbidden
        )
    }

    /// Codes produced by the access-decision layer itself (owner, bits, group).
    pub fn is_access_denial(self) -> bool {
        matches!(
            self,
            ErrorCode::DeniedAll | ErrorCode::DeniedGroup | ErrorCode::WriteForbidden
        )
    }
}

/// Login failures. `AuthFailed` is deliberately uninformative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("authentication failed")]
    AuthFailed,
    #[error("principal already connected")]
    AlreadyConnected,
    #[error("cannot be connected as administrator and as user at the same time")]
    DualLoginForbidden,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("snapshot checksum mismatch or missing checksum line")]
    CorruptSnapshot,
    #[error("malformed snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum AdminError {
    #[error("session is not an administrator session")]
    NotAdmin,
    #[error("user names must be non-empty, without spaces or quotes, and come with a secret")]
    InvalidName,
    #[error("user name already in use")]
    DuplicateName,
    #[error("unknown user")]
    UnknownUser,
    #[error("departing user and new owner must differ")]
    InvalidTransfer,
    #[error("live user sessions must be closed first")]
    SessionsActive,
    #[error("signature space exhausted")]
    RegistryExhausted,
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}
