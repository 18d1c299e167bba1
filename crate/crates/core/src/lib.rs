//! Protection kernel for a multi-user object store.
//!
//! Users act only by sending messages to objects. Each message is stamped
//! by the kernel with its emitter's 4-byte owner signature, and each access
//! is decided from the target's owner signature and four protection bits:
//! read and use, each grantable to the owner's group or to everyone. Write
//! is owner-only. Group membership is checked by asking the owner's user
//! object, and joining a group takes the member's consent.
//!
//! The [`Kernel`] is the only entry point. See [`Kernel::dispatch`] for the
//! access path, [`Kernel::login`] for recognition, and [`Kernel::admin`]
//! for what the administrator may (and may not) do.

mod admin;
pub mod auth;
pub mod clock;
mod dispatch;
pub mod error;
#[cfg(feature = "inspect")]
pub mod inspect;
mod kernel;
pub mod message;
pub mod model;
mod ownership;
pub mod protection;
pub mod session;
pub mod signature;
pub mod snapshot;

pub use admin::{AdminCommand, AdminOutcome};
pub use auth::{Action, Credentials, InquiryOutcome, RecognitionChange, SecretDigest};
pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use error::{AdminError, AuthError, ErrorCode, SnapshotError};
pub use kernel::{AdminConfig, AuditEntry, Kernel, KernelConfig, Metrics};
pub use message::{
    CopyTarget, Function, ItemRef, Operation, Party, Payload, PayloadKind, Reply, ReplySpec, Request, Status, Target,
};
pub use model::{AttributeSchema, Cardinality, FunctionDecl, IntegrityPredicate, ItemId, Value, ValueKind, Visibility};
pub use protection::{decide, AccessDecision, Mode, Protected, ProtectionBits, Right, Scope, Verdict};
pub use session::{Handle, SessionId, SessionState, Terminal};
pub use signature::Signature;
