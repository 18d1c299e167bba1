//! The dispatcher: the single path by which any session touches the store.
//!
//! Each request is classified into a mode, decided against the target's
//! owner signature and protection bits, checked with the owner's user object
//! when only a group grant applies, and only then executed.

use crate::auth::RecognitionChange;
use crate::error::ErrorCode;
use crate::kernel::Kernel;
use crate::message::{
    render_mess, render_reply, ControlMessage, CopyTarget, Function, InnerParty, InnerPayload, ItemRef,
    Reply, ReplySpec, Request, RoutedReply, Status, Target,
};
use crate::model::interface::{consultation_function, effective_visibility, entry_function, initial_attributes};
use crate::model::value::Plain;
use crate::model::{ItemId, ObjectId, ObjectRecord, RequesterClass, TypeDef, TypeId, Value};
use crate::protection::{decide, AccessDecision, Mode, ProtectionBits, Protected};
use crate::session::{Principal, SessionId, SessionState};
use crate::signature::Signature;

pub(crate) type Outcome = Result<Option<InnerPayload>, ErrorCode>;

/// Protection header of a user object: owned by its user, no grants.
struct UserHeader(Signature);

impl Protected for UserHeader {
    fn owner_signature(&self) -> Signature {
        self.0
    }

    fn protection_bits(&self) -> ProtectionBits {
        ProtectionBits::DENIED
    }
}

/// Who is sending: resolved once per request from the session.
#[derive(Debug, Clone)]
pub(crate) struct Emitter {
    pub(crate) uid: ObjectId,
    pub(crate) name: String,
    pub(crate) signature: Signature,
}

enum Gate {
    Open(Emitter),
    Closed(Reply),
}

impl Kernel {
    /// Deliver one request and return the reply addressed to the emitter.
    pub fn dispatch(&mut self, sid: SessionId, request: Request) -> Reply {
        let emitter = match self.gate(sid, &request.target, &request.function) {
            Gate::Open(e) => e,
            Gate::Closed(reply) => return reply,
        };
        self.metrics.dispatched += 1;
        let target_text = match &request.target {
            Target::User(n) => format!("{n:?}"),
            Target::Item(r) => self.item_text(sid, r),
        };
        self.trace(render_mess(&format!("{:?}", emitter.name), &target_text, &request.function));

        let (from, outcome) = match &request.target {
            Target::User(name) => (InnerParty::User(name.clone()), self.run_user(sid, &emitter, name, &request)),
            Target::Item(r) => match self.resolve_item(sid, r) {
                Ok(item) => (InnerParty::Item(item), self.run_item(sid, &emitter, item, &request.function, &request.reply)),
                Err(e) => (InnerParty::Kernel, Err(e)),
            },
        };
        self.finish(sid, &emitter, from, outcome, &request.reply)
    }

    /// Deliver `function` to every current instance of a type, subtypes
    /// included. Each instance is decided on its own.
    pub fn dispatch_generic(&mut self, sid: SessionId, type_ref: ItemRef, function: Function, spec: ReplySpec) -> Vec<Reply> {
        let emitter = match self.gate(sid, &Target::Item(type_ref.clone()), &function) {
            Gate::Open(e) => e,
            Gate::Closed(reply) => return vec![reply],
        };
        self.metrics.dispatched += 1;
        let type_id = match self.resolve_item(sid, &type_ref) {
            Ok(ItemId::Type(t)) => t,
            Ok(ItemId::Object(_)) => {
                return vec![self.finish(sid, &emitter, InnerParty::Kernel, Err(ErrorCode::UnknownType), &spec)]
            }
            Err(e) => return vec![self.finish(sid, &emitter, InnerParty::Kernel, Err(e), &spec)],
        };
        let type_name = self.store.type_def(type_id).map(|t| t.name.clone()).unwrap_or_default();
        self.trace(render_mess(&format!("{:?}", emitter.name), &format!("all:{type_name}"), &function));
        let instances = self.store.instances_of(type_id);
        let mut replies = Vec::with_capacity(instances.len());
        for id in instances {
            let item = ItemId::Object(id);
            let outcome = self.run_item(sid, &emitter, item, &function, &spec);
            replies.push(self.finish(sid, &emitter, InnerParty::Item(item), outcome, &spec));
        }
        replies
    }

    /// Session checks common to every request.
    fn gate(&mut self, sid: SessionId, target: &Target, function: &Function) -> Gate {
        let closed = |code| {
            Gate::Closed(Reply {
                from: crate::message::Party::Kernel,
                to: crate::message::Party::Kernel,
                status: Status::Error(code),
                payload: None,
            })
        };
        let Some(session) = self.sessions.get(sid) else {
            return closed(ErrorCode::SessionClosed);
        };
        let uid = match session.principal {
            Principal::Admin => {
                self.metrics.admin_refusals += 1;
                self.audit(format!("refused access: {}", function.name()), false);
                return closed(ErrorCode::AdminForbidden);
            }
            Principal::User(uid) => uid,
        };
        let user = self.store.user(uid).expect("live session has a user object");
        match &session.state {
            SessionState::Challenged { .. } => return closed(ErrorCode::InquiryPending),
            SessionState::RotationRequired => {
                let is_rotation = matches!(target, Target::User(n) if *n == user.name)
                    && matches!(function, Function::Configure { change: RecognitionChange::SetSecret(_) });
                if !is_rotation {
                    return closed(ErrorCode::RotationRequired);
                }
            }
            SessionState::Active => {}
            SessionState::Closed => return closed(ErrorCode::SessionClosed),
        }
        Gate::Open(Emitter { uid, name: user.name.clone(), signature: user.signature })
    }

    /// Trace the reply, deliver copies, account errors, and export.
    fn finish(&mut self, sid: SessionId, emitter: &Emitter, from: InnerParty, outcome: Outcome, spec: &ReplySpec) -> Reply {
        let (status, payload) = match outcome {
            Ok(p) => (Status::Ok, p),
            Err(e) => (Status::Error(e), None),
        };
        let to = InnerParty::User(emitter.name.clone());
        self.trace(render_reply(&from.to_string(), &to.to_string(), status));
        let routed = RoutedReply { from, to, status, payload };
        for copy in &spec.copy_to {
            if let Some(uid) = self.copy_recipient(sid, copy) {
                if let Some(u) = self.store.users.get_mut(&uid) {
                    u.inbox.push(routed.clone());
                }
            }
        }
        if let Status::Error(code) = status {
            if code.is_access_denial() {
                self.metrics.denials += 1;
            }
            self.record_error(sid, code);
        }
        self.export_reply(sid, routed)
    }

    fn copy_recipient(&self, sid: SessionId, copy: &CopyTarget) -> Option<ObjectId> {
        match copy {
            CopyTarget::User(name) => self.store.user_id_by_name(name),
            CopyTarget::Item(r) => {
                let owner = self.owner_of(self.resolve_item(sid, r).ok()?)?;
                self.store.user_by_signature(&owner).map(|u| u.object_id)
            }
        }
    }

    fn item_text(&self, sid: SessionId, r: &ItemRef) -> String {
        match self.resolve_item(sid, r) {
            Ok(item) => item.to_string(),
            Err(_) => r.to_string(),
        }
    }

    pub(crate) fn resolve_item(&self, sid: SessionId, r: &ItemRef) -> Result<ItemId, ErrorCode> {
        match r {
            ItemRef::Handle(h) => {
                let item = self
                    .sessions
                    .get(sid)
                    .and_then(|s| s.handles.resolve(*h))
                    .ok_or(ErrorCode::UnknownTarget)?;
                if self.item_exists(item) {
                    Ok(item)
                } else {
                    Err(ErrorCode::UnknownTarget)
                }
            }
            ItemRef::TypeName(name) => {
                self.store.type_by_name(name).map(|t| ItemId::Type(t.type_id)).ok_or(ErrorCode::UnknownType)
            }
        }
    }

    fn item_exists(&self, item: ItemId) -> bool {
        match item {
            ItemId::Object(o) => self.store.object(o).is_some(),
            ItemId::Type(t) => self.store.type_def(t).is_some(),
        }
    }

    pub(crate) fn owner_of(&self, item: ItemId) -> Option<Signature> {
        match item {
            ItemId::Object(o) => self.store.object(o).map(|r| r.owner_signature),
            ItemId::Type(t) => self.store.type_def(t).map(|d| d.owner_signature),
        }
    }

    fn import_value(&self, sid: SessionId, v: &Value) -> Result<Plain, ErrorCode> {
        Ok(match v {
            Value::Text(s) => Plain::Text(s.clone()),
            Value::Integer(n) => Plain::Integer(*n),
            Value::Boolean(b) => Plain::Boolean(*b),
            Value::Counter(n) => Plain::Counter(*n),
            Value::Reference(h) => match self.resolve_item(sid, &ItemRef::Handle(*h))? {
                ItemId::Object(id) => Plain::Reference(id),
                ItemId::Type(_) => return Err(ErrorCode::ArgTypeMismatch),
            },
        })
    }

    /// Access decision plus, when needed, the status-control exchange with
    /// the owner's user object. Returns how the requester was classified.
    pub(crate) fn access(&mut self, emitter: &Emitter, mode: Mode, target: &impl Protected) -> Result<RequesterClass, ErrorCode> {
        match decide(emitter.signature, mode, target) {
            AccessDecision::Allow if emitter.signature == target.owner_signature() => Ok(RequesterClass::Owner),
            AccessDecision::Allow => Ok(RequesterClass::All),
            AccessDecision::Deny(code) => Err(code),
            AccessDecision::NeedsGroupCheck => {
                let owner = self.store.user_by_signature(&target.owner_signature()).map(|u| u.object_id);
                let member = match owner {
                    Some(owner_user_object) => {
                        self.group_check(ControlMessage { requester: emitter.uid, owner_user_object })
                    }
                    // No owner user object: fail closed.
                    None => false,
                };
                if member {
                    Ok(RequesterClass::Group)
                } else {
                    Err(ErrorCode::DeniedGroup)
                }
            }
        }
    }

    /// Ask the owner's user object whether the requester is in its group.
    pub(crate) fn group_check(&mut self, control: ControlMessage) -> bool {
        self.metrics.control_messages += 1;
        let requester = self.store.user(control.requester).map(|u| (u.name.clone(), u.signature));
        let owner = self.store.user(control.owner_user_object);
        let (member, owner_name) = match (requester.as_ref(), owner) {
            (Some((_, sig)), Some(o)) => (o.group_list.contains(sig), o.name.clone()),
            _ => (false, String::new()),
        };
        let requester_name = requester.map(|(n, _)| n).unwrap_or_default();
        self.trace(format!(
            "Ctrl({requester_name:?}->{owner_name:?},status) = {}",
            if member { "member" } else { "non-member" }
        ));
        member
    }

    fn run_item(&mut self, sid: SessionId, emitter: &Emitter, item: ItemId, function: &Function, spec: &ReplySpec) -> Outcome {
        if function.targets_user() {
            return Err(ErrorCode::UnknownFunction);
        }
        if spec.expects.is_some() && spec.expects != function.payload_kind() {
            return Err(ErrorCode::ArgTypeMismatch);
        }
        match item {
            ItemId::Object(id) => self.run_object(sid, emitter, id, function),
            ItemId::Type(id) => self.run_type(sid, emitter, id, function),
        }
    }

    fn run_object(&mut self, sid: SessionId, emitter: &Emitter, id: ObjectId, function: &Function) -> Outcome {
        let record: ObjectRecord = self.store.object(id).cloned().ok_or(ErrorCode::UnknownTarget)?;
        let mode = match function {
            Function::Invoke { name, .. } => {
                self.store.function_of(record.type_id, name).ok_or(ErrorCode::UnknownFunction)?.mode
            }
            Function::Instantiate { .. } | Function::AddAttribute { .. } => return Err(ErrorCode::UnknownFunction),
            f => f.builtin_mode().expect("non-invoke functions have a fixed mode"),
        };
        let class = self.access(emitter, mode, &record)?;
        match function {
            Function::Get { attr } => {
                let values = consultation_function(&self.store, self.cipher.as_ref(), id, attr, class)?;
                Ok(Some(InnerPayload::Values(values)))
            }
            Function::Set { attr, values } => {
                let plain = values.iter().map(|v| self.import_value(sid, v)).collect::<Result<Vec<_>, _>>()?;
                entry_function(&mut self.store, self.cipher.as_ref(), id, attr, plain)?;
                Ok(None)
            }
            Function::Describe => Ok(Some(InnerPayload::Text(self.describe_object(&record, class)))),
            Function::Compose { part } => {
                let part = match self.resolve_item(sid, part)? {
                    ItemId::Object(p) => p,
                    ItemId::Type(_) => return Err(ErrorCode::ArgTypeMismatch),
                };
                self.compose(emitter, id, part)
            }
            Function::Invoke { name, args } => {
                let decl = self.store.function_of(record.type_id, name).cloned().expect("checked above");
                if args.len() != decl.params.len() {
                    return Err(ErrorCode::ArgTypeMismatch);
                }
                for (arg, kind) in args.iter().zip(&decl.params) {
                    kind.conform(self.import_value(sid, arg)?)?;
                }
                Ok(None)
            }
            Function::Donate { to } => self.donate(emitter, ItemId::Object(id), to),
            Function::Duplicate { to, new_name } => self.duplicate(emitter, ItemId::Object(id), to, new_name.as_deref()),
            Function::SetGrant { right, scope, enable } => {
                self.set_grant(ItemId::Object(id), *right, *scope, *enable);
                Ok(None)
            }
            Function::SetVisibility { attr, visibility } => self.set_visibility(id, attr, *visibility),
            _ => Err(ErrorCode::UnknownFunction),
        }
    }

    fn run_type(&mut self, sid: SessionId, emitter: &Emitter, id: TypeId, function: &Function) -> Outcome {
        let def: TypeDef = self.store.type_def(id).cloned().ok_or(ErrorCode::UnknownType)?;
        let mode = match function {
            Function::Describe
            | Function::Instantiate { .. }
            | Function::AddAttribute { .. }
            | Function::Donate { .. }
            | Function::Duplicate { .. }
            | Function::SetGrant { .. } => function.builtin_mode().expect("fixed mode"),
            _ => return Err(ErrorCode::UnknownFunction),
        };
        if def.builtin && mode != Mode::Read {
            return Err(ErrorCode::ImmutableBuiltin);
        }
        self.access(emitter, mode, &def)?;
        match function {
            Function::Describe => Ok(Some(InnerPayload::Text(self.describe_type(&def)))),
            Function::Instantiate { values } => {
                let initial = values
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), self.import_value(sid, v)?)))
                    .collect::<Result<Vec<_>, ErrorCode>>()?;
                let object_id = ObjectId(self.store.alloc_id());
                let attributes =
                    initial_attributes(&self.store, self.cipher.as_ref(), &emitter.signature, object_id, id, initial)?;
                self.store.objects.insert(
                    object_id,
                    ObjectRecord {
                        object_id,
                        type_id: id,
                        owner_signature: emitter.signature,
                        protection_bits: ProtectionBits::DENIED,
                        attributes,
                        parts: Vec::new(),
                        visibility_overrides: Default::default(),
                    },
                );
                Ok(Some(InnerPayload::Item(ItemId::Object(object_id))))
            }
            Function::AddAttribute { schema } => self.add_attribute(id, schema.clone()),
            Function::Donate { to } => self.donate(emitter, ItemId::Type(id), to),
            Function::Duplicate { to, new_name } => self.duplicate(emitter, ItemId::Type(id), to, new_name.as_deref()),
            Function::SetGrant { right, scope, enable } => {
                self.set_grant(ItemId::Type(id), *right, *scope, *enable);
                Ok(None)
            }
            _ => Err(ErrorCode::UnknownFunction),
        }
    }

    fn run_user(&mut self, sid: SessionId, emitter: &Emitter, name: &str, request: &Request) -> Outcome {
        let function = &request.function;
        if request.reply.expects.is_some() && request.reply.expects != function.payload_kind() {
            return Err(ErrorCode::ArgTypeMismatch);
        }
        let target = self.store.user_by_name(name).map(|u| (u.object_id, u.signature)).ok_or(ErrorCode::UnknownUser)?;
        if !function.targets_user() {
            return Err(ErrorCode::UnknownFunction);
        }
        let is_self = target.0 == emitter.uid;
        match function {
            Function::Inscription => return self.enroll(emitter, target.0),
            Function::Configure { .. } if !is_self => return Err(ErrorCode::NotSelf),
            _ if !is_self => {
                let mode = function.builtin_mode().expect("user functions have a fixed mode");
                self.access(emitter, mode, &UserHeader(target.1))?;
            }
            _ => {}
        }
        match function {
            Function::RemoveMember { member } => self.remove_member(emitter, member),
            Function::SetOptOut { opt_out } => {
                self.store.users.get_mut(&emitter.uid).expect("emitter exists").opt_out_enroll = *opt_out;
                Ok(None)
            }
            Function::Configure { change } => {
                let user = self.store.users.get_mut(&emitter.uid).expect("emitter exists");
                user.apply(change.clone(), &mut self.rng)?;
                let rotated = !user.must_rotate_secret;
                if let Some(s) = self.sessions.get_mut(sid) {
                    if s.state == SessionState::RotationRequired && rotated {
                        s.state = SessionState::Active;
                    }
                }
                Ok(None)
            }
            Function::DefineType { name, parent, schemas, functions } => {
                let parent = match parent {
                    None => None,
                    Some(r) => match self.resolve_item(sid, r) {
                        Ok(ItemId::Type(t)) => Some(t),
                        Ok(ItemId::Object(_)) => return Err(ErrorCode::ArgTypeMismatch),
                        Err(ErrorCode::UnknownType) => return Err(ErrorCode::ParentNotAccessible),
                        Err(e) => return Err(e),
                    },
                };
                self.define_type(emitter, name, parent, schemas.clone(), functions.clone())
            }
            Function::Lookup { type_name } => {
                let t = self.store.type_by_name(type_name).ok_or(ErrorCode::UnknownType)?;
                Ok(Some(InnerPayload::Item(ItemId::Type(t.type_id))))
            }
            Function::Inbox => {
                let inbox = std::mem::take(&mut self.store.users.get_mut(&emitter.uid).expect("emitter exists").inbox);
                Ok(Some(InnerPayload::Inbox(inbox)))
            }
            _ => Err(ErrorCode::UnknownFunction),
        }
    }

    fn compose(&mut self, emitter: &Emitter, whole: ObjectId, part: ObjectId) -> Outcome {
        let part_owner = self.store.object(part).map(|o| o.owner_signature).ok_or(ErrorCode::UnknownTarget)?;
        if part_owner != emitter.signature {
            return Err(ErrorCode::NotOwner);
        }
        if whole == part || self.store.reaches(part, whole) {
            return Err(ErrorCode::CycleDetected);
        }
        let record = self.store.objects.get_mut(&whole).expect("resolved target");
        if !record.parts.contains(&part) {
            record.parts.push(part);
        }
        Ok(None)
    }

    fn describe_object(&self, record: &ObjectRecord, class: RequesterClass) -> String {
        let type_name = self.store.type_def(record.type_id).map_or("?", |t| t.name.as_str());
        let visible: Vec<&str> = self
            .store
            .effective_schema(record.type_id)
            .into_iter()
            .filter(|s| {
                effective_visibility(&self.store, record.object_id, &s.name).is_some_and(|v| v.admits(class))
            })
            .map(|s| s.name.as_str())
            .collect();
        format!("{type_name} attrs=[{}] parts={}", visible.join(","), record.parts.len())
    }

    fn describe_type(&self, def: &TypeDef) -> String {
        let parent = def
            .parent
            .and_then(|p| self.store.type_def(p))
            .map_or("-".to_owned(), |p| p.name.clone());
        let attrs: Vec<String> = self.store.effective_schema(def.type_id).iter().map(|s| s.describe()).collect();
        let fns: Vec<String> = def.functions.iter().map(|f| format!("{}:{}", f.name, f.mode.as_str())).collect();
        format!("type {} parent={parent} attrs=[{}] fns=[{}]", def.name, attrs.join(","), fns.join(","))
    }
}
