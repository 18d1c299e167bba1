//! Messages and replies.
//!
//! A request names a target, a function and where the reply goes. The
//! emitter and its signature are never part of a request: the kernel fills
//! them in from the session.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::auth::RecognitionChange;
use crate::error::ErrorCode;
use crate::model::value::Plain;
use crate::model::{AttributeSchema, FunctionDecl, ItemId, ObjectId, Value, Visibility};
use crate::protection::{Mode, Right, Scope};
use crate::session::Handle;

/// How a request names an object or type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ItemRef {
    Handle(Handle),
    /// Type names are global.
    TypeName(String),
}

impl fmt::Display for ItemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemRef::Handle(h) => h.fmt(f),
            ItemRef::TypeName(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Item(ItemRef),
    /// A user object, by name.
    User(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Function {
    Get { attr: String },
    /// Replaces the whole slot. An empty list clears an optional attribute.
    Set { attr: String, values: Vec<Value> },
    Describe,
    Compose { part: ItemRef },
    Invoke { name: String, args: Vec<Value> },
    Instantiate { values: Vec<(String, Value)> },
    AddAttribute { schema: AttributeSchema },
    Donate { to: String },
    Duplicate { to: String, new_name: Option<String> },
    SetGrant { right: Right, scope: Scope, enable: bool },
    SetVisibility { attr: String, visibility: Visibility },
    Inscription,
    RemoveMember { member: String },
    SetOptOut { opt_out: bool },
    Configure { change: RecognitionChange },
    DefineType {
        name: String,
        parent: Option<ItemRef>,
        schemas: Vec<AttributeSchema>,
        functions: Vec<FunctionDecl>,
    },
    Lookup { type_name: String },
    Inbox,
}

impl Function {
    /// Name used in the textual message form.
    pub fn name(&self) -> &str {
        match self {
            Function::Get { .. } => "get",
            Function::Set { .. } => "set",
            Function::Describe => "describe",
            Function::Compose { .. } => "compose",
            Function::Invoke { name, .. } => name,
            Function::Instantiate { .. } => "instantiate",
            Function::AddAttribute { .. } => "addattr",
            Function::Donate { .. } => "donate",
            Function::Duplicate { .. } => "duplicate",
            Function::SetGrant { enable: true, .. } => "grant",
            Function::SetGrant { enable: false, .. } => "revoke",
            Function::SetVisibility { .. } => "attr-vis",
            Function::Inscription => "inscription",
            Function::RemoveMember { .. } => "group-rm",
            Function::SetOptOut { .. } => "opt-out",
            Function::Configure { .. } => "configure",
            Function::DefineType { .. } => "newtype",
            Function::Lookup { .. } => "lookup",
            Function::Inbox => "inbox",
        }
    }

    /// Access mode for functions whose mode does not depend on the target's
    /// declarations. `None` for `Invoke`.
    pub fn builtin_mode(&self) -> Option<Mode> {
        Some(match self {
            Function::Get { .. } | Function::Describe | Function::Lookup { .. } | Function::Inbox => {
                Mode::Read
            }
            Function::Set { .. }
            | Function::Compose { .. }
            | Function::AddAttribute { .. }
            | Function::Donate { .. }
            | Function::Duplicate { .. }
            | Function::SetGrant { .. }
            | Function::SetVisibility { .. }
            | Function::RemoveMember { .. }
            | Function::SetOptOut { .. }
            | Function::Configure { .. } => Mode::Write,
            Function::Instantiate { .. } | Function::Inscription | Function::DefineType { .. } => Mode::Use,
            Function::Invoke { .. } => return None,
        })
    }

    /// Functions addressed to user objects rather than to objects or types.
    pub fn targets_user(&self) -> bool {
        matches!(
            self,
            Function::Inscription
                | Function::RemoveMember { .. }
                | Function::SetOptOut { .. }
                | Function::Configure { .. }
                | Function::DefineType { .. }
                | Function::Lookup { .. }
                | Function::Inbox
        )
    }

    /// Kind of payload an Ok reply carries. `None` means a bare acknowledgement.
    pub fn payload_kind(&self) -> Option<PayloadKind> {
        match self {
            Function::Get { .. } => Some(PayloadKind::Values),
            Function::Describe => Some(PayloadKind::Text),
            Function::Instantiate { .. }
            | Function::Duplicate { .. }
            | Function::DefineType { .. }
            | Function::Lookup { .. } => Some(PayloadKind::Item),
            Function::Inbox => Some(PayloadKind::Inbox),
            _ => None,
        }
    }

    /// Non-value arguments as they appear in trace lines. Values never do.
    fn trace_args(&self) -> Vec<String> {
        match self {
            Function::Get { attr } | Function::Set { attr, .. } => vec![attr.clone()],
            Function::SetVisibility { attr, visibility } => vec![attr.clone(), visibility.as_str().into()],
            Function::Donate { to } | Function::Duplicate { to, .. } => vec![format!("{to:?}")],
            Function::SetGrant { right, scope, .. } => vec![
                match right {
                    Right::Read => "read".into(),
                    Right::Use => "use".into(),
                },
                match scope {
                    Scope::Group => "group".into(),
                    Scope::All => "all".into(),
                },
            ],
            Function::RemoveMember { member } => vec![format!("{member:?}")],
            Function::Configure { change } => vec![change.label().into()],
            Function::DefineType { name, .. } | Function::Lookup { type_name: name } => vec![name.clone()],
            Function::AddAttribute { schema } => vec![schema.name.clone()],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadKind {
    Values,
    Item,
    Text,
    Count,
    Inbox,
}

/// Where the reply to a request goes besides the emitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CopyTarget {
    User(String),
    /// Delivered to the inbox of the item's owner.
    Item(ItemRef),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplySpec {
    pub expects: Option<PayloadKind>,
    /// Copies are delivered without any access check of their own.
    pub copy_to: Vec<CopyTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub target: Target,
    pub function: Function,
    pub reply: ReplySpec,
}

impl Request {
    pub fn new(target: Target, function: Function) -> Self {
        Request { target, function, reply: ReplySpec::default() }
    }

    pub fn to_item(handle: Handle, function: Function) -> Self {
        Request::new(Target::Item(ItemRef::Handle(handle)), function)
    }

    pub fn to_type(name: &str, function: Function) -> Self {
        Request::new(Target::Item(ItemRef::TypeName(name.to_owned())), function)
    }

    pub fn to_user(name: &str, function: Function) -> Self {
        Request::new(Target::User(name.to_owned()), function)
    }

    pub fn with_copy(mut self, to: CopyTarget) -> Self {
        self.reply.copy_to.push(to);
        self
    }

    pub fn expecting(mut self, kind: PayloadKind) -> Self {
        self.reply.expects = Some(kind);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Party {
    User(String),
    Item(Handle),
    Kernel,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::User(n) => write!(f, "{n:?}"),
            Party::Item(h) => h.fmt(f),
            Party::Kernel => f.write_str("kernel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Error(ErrorCode),
}

impl Status {
    pub fn is_ok(self) -> bool {
        self == Status::Ok
    }

    pub fn error(self) -> Option<ErrorCode> {
        match self {
            Status::Ok => None,
            Status::Error(e) => Some(e),
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Error(e) => f.write_str(e.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Values(Vec<Value>),
    Item(Handle),
    Text(String),
    Count(u64),
    Inbox(Vec<Reply>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub from: Party,
    pub to: Party,
    pub status: Status,
    pub payload: Option<Payload>,
}

impl Reply {
    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }

    pub fn error(&self) -> Option<ErrorCode> {
        self.status.error()
    }

    pub fn item(&self) -> Option<Handle> {
        match self.payload {
            Some(Payload::Item(h)) => Some(h),
            _ => None,
        }
    }

    pub fn values(&self) -> Option<&[Value]> {
        match &self.payload {
            Some(Payload::Values(v)) => Some(v),
            _ => None,
        }
    }
}

/// Session-independent parties, used inside the kernel and in inboxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum InnerParty {
    User(String),
    Item(ItemId),
    Kernel,
}

impl fmt::Display for InnerParty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerParty::User(n) => write!(f, "{n:?}"),
            InnerParty::Item(id) => id.fmt(f),
            InnerParty::Kernel => f.write_str("kernel"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum InnerPayload {
    Values(Vec<Plain>),
    Item(ItemId),
    Text(String),
    Count(u64),
    Inbox(Vec<RoutedReply>),
}

/// A reply in kernel form. Inboxes store these so that handles can be
/// issued by whichever session eventually reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutedReply {
    pub(crate) from: InnerParty,
    pub(crate) to: InnerParty,
    pub(crate) status: Status,
    pub(crate) payload: Option<InnerPayload>,
}

impl RoutedReply {
    pub fn status(&self) -> Status {
        self.status
    }
}

/// Kernel-internal status-control message sent to an owner's user object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ControlMessage {
    pub(crate) requester: ObjectId,
    pub(crate) owner_user_object: ObjectId,
}

/// Textual rendering `Mess(<emitter>,<target>,*,<function>[,args])`.
/// The signature position is always the placeholder `*`.
pub(crate) fn render_mess(emitter: &str, target: &str, function: &Function) -> String {
    let mut out = format!("Mess({emitter},{target},*,{}", function.name());
    for a in function.trace_args() {
        out.push(',');
        out.push_str(&a);
    }
    out.push(')');
    out
}

pub(crate) fn render_reply(from: &str, to: &str, status: Status) -> String {
    format!("Mess({from},{to},*,{status})")
}

/// Every public operation of the kernel, for coverage checks by front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operation {
    Login,
    Logout,
    AdminLogin,
    DefineType,
    Instantiate,
    Compose,
    Set,
    Get,
    Describe,
    Invoke,
    AddAttribute,
    Donate,
    Duplicate,
    Grant,
    Revoke,
    SetVisibility,
    Enroll,
    RemoveMember,
    OptOut,
    Configure,
    Lookup,
    Inbox,
    Broadcast,
    SendMessage,
    AnswerInquiry,
    CreateUser,
    BulkTransfer,
    Backup,
    Restore,
}

impl Operation {
    pub const ALL: [Operation; 29] = [
        Operation::Login,
        Operation::Logout,
        Operation::AdminLogin,
        Operation::DefineType,
        Operation::Instantiate,
        Operation::Compose,
        Operation::Set,
        Operation::Get,
        Operation::Describe,
        Operation::Invoke,
        Operation::AddAttribute,
        Operation::Donate,
        Operation::Duplicate,
        Operation::Grant,
        Operation::Revoke,
        Operation::SetVisibility,
        Operation::Enroll,
        Operation::RemoveMember,
        Operation::OptOut,
        Operation::Configure,
        Operation::Lookup,
        Operation::Inbox,
        Operation::Broadcast,
        Operation::SendMessage,
        Operation::AnswerInquiry,
        Operation::CreateUser,
        Operation::BulkTransfer,
        Operation::Backup,
        Operation::Restore,
    ];
}
