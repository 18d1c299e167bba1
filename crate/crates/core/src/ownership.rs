//! Owner privileges and group membership.
//!
//! Every function here runs after the dispatcher has allowed a write-class
//! (or, for enrollment, use-class) request, so the emitter is the owner.

use std::collections::{BTreeMap, BTreeSet};

use crate::dispatch::{Emitter, Outcome};
use crate::error::ErrorCode;
use crate::kernel::Kernel;
use crate::message::InnerPayload;
use crate::model::interface::reseal;
use crate::model::{is_reserved_attribute, AttributeSchema, FunctionDecl, ItemId, ObjectId, TypeDef, TypeId, Visibility};
use crate::protection::{Mode, ProtectionBits, Right, Scope};
use crate::signature::Signature;

impl Kernel {
    fn live_user(&self, name: &str) -> Result<(ObjectId, Signature), ErrorCode> {
        self.store.user_by_name(name).map(|u| (u.object_id, u.signature)).ok_or(ErrorCode::UnknownUser)
    }

    /// Restamp one object or type with `new_owner`, clearing its grants.
    pub(crate) fn restamp(&mut self, item: ItemId, new_owner: Signature) {
        match item {
            ItemId::Object(id) => {
                let Some(record) = self.store.objects.get_mut(&id) else {
                    return;
                };
                let old = record.owner_signature;
                record.owner_signature = new_owner;
                record.protection_bits = ProtectionBits::DENIED;
                reseal(&mut self.store, self.cipher.as_ref(), id, id, &old);
            }
            ItemId::Type(id) => {
                if let Some(def) = self.store.types.get_mut(&id) {
                    def.owner_signature = new_owner;
                    def.protection_bits = ProtectionBits::DENIED;
                }
            }
        }
    }

    pub(crate) fn donate(&mut self, emitter: &Emitter, item: ItemId, to: &str) -> Outcome {
        let (_, donee) = self.live_user(to)?;
        if donee != emitter.signature {
            self.restamp(item, donee);
        }
        Ok(None)
    }

    pub(crate) fn duplicate(&mut self, emitter: &Emitter, item: ItemId, to: &str, new_name: Option<&str>) -> Outcome {
        let (_, recipient) = self.live_user(to)?;
        match item {
            ItemId::Object(root) => self.duplicate_object(emitter, root, recipient),
            ItemId::Type(id) => {
                let name = new_name.ok_or(ErrorCode::ConstraintViolation)?;
                self.duplicate_type(id, name, recipient)
            }
        }
    }

    fn duplicate_object(&mut self, emitter: &Emitter, root: ObjectId, recipient: Signature) -> Outcome {
        let originals = self.store.reachable_parts(root);
        if originals.iter().any(|id| self.store.object(*id).map(|o| o.owner_signature) != Some(emitter.signature)) {
            return Err(ErrorCode::NotOwner);
        }
        // Shared parts stay shared in the copy.
        let memo: BTreeMap<ObjectId, ObjectId> =
            originals.iter().map(|old| (*old, ObjectId(self.store.alloc_id()))).collect();
        for old in &originals {
            let mut copy = self.store.object(*old).cloned().expect("reachable part exists");
            let new_id = memo[old];
            copy.object_id = new_id;
            copy.owner_signature = recipient;
            copy.protection_bits = ProtectionBits::DENIED;
            copy.parts = copy.parts.iter().map(|p| memo[p]).collect();
            self.store.objects.insert(new_id, copy);
            reseal(&mut self.store, self.cipher.as_ref(), new_id, *old, &emitter.signature);
        }
        Ok(Some(InnerPayload::Item(ItemId::Object(memo[&root]))))
    }

    fn duplicate_type(&mut self, source: TypeId, name: &str, recipient: Signature) -> Outcome {
        check_name(name)?;
        if self.store.type_by_name(name).is_some() {
            return Err(ErrorCode::DuplicateName);
        }
        let mut copy = self.store.type_def(source).cloned().ok_or(ErrorCode::UnknownType)?;
        let id = TypeId(self.store.alloc_id());
        copy.type_id = id;
        copy.name = name.to_owned();
        copy.owner_signature = recipient;
        copy.protection_bits = ProtectionBits::DENIED;
        copy.builtin = false;
        self.store.types.insert(id, copy);
        Ok(Some(InnerPayload::Item(ItemId::Type(id))))
    }

    pub(crate) fn set_grant(&mut self, item: ItemId, right: Right, scope: Scope, enable: bool) {
        let bits = match item {
            ItemId::Object(id) => self.store.objects.get_mut(&id).map(|o| &mut o.protection_bits),
            ItemId::Type(id) => self.store.types.get_mut(&id).map(|t| &mut t.protection_bits),
        };
        if let Some(bits) = bits {
            bits.set(right, scope, enable);
        }
    }

    pub(crate) fn set_visibility(&mut self, id: ObjectId, attr: &str, visibility: Visibility) -> Outcome {
        if is_reserved_attribute(attr) {
            return Err(ErrorCode::KernelPrivateAttribute);
        }
        let type_id = self.store.object(id).ok_or(ErrorCode::UnknownTarget)?.type_id;
        let schema = self.store.schema_of(type_id, attr).ok_or(ErrorCode::UnknownAttribute)?;
        if schema.visibility == Visibility::Private {
            return Err(ErrorCode::KernelPrivateAttribute);
        }
        let record = self.store.objects.get_mut(&id).expect("checked above");
        record.visibility_overrides.insert(attr.to_owned(), visibility);
        Ok(None)
    }

    /// The two-message enrollment exchange. The member's user object answers
    /// `ok` with its signature unless its user has opted out.
    pub(crate) fn enroll(&mut self, emitter: &Emitter, member: ObjectId) -> Outcome {
        let m = self.store.user(member).expect("resolved member");
        let (member_sig, declined) = (m.signature, m.opt_out_enroll);
        if declined {
            return Err(ErrorCode::DeclinedEnrollment);
        }
        self.store.users.get_mut(&emitter.uid).expect("emitter exists").group_list.insert(member_sig);
        Ok(None)
    }

    pub(crate) fn remove_member(&mut self, emitter: &Emitter, member: &str) -> Outcome {
        let (_, sig) = self.live_user(member)?;
        self.store.users.get_mut(&emitter.uid).expect("emitter exists").group_list.remove(&sig);
        Ok(None)
    }

    pub(crate) fn define_type(
        &mut self,
        emitter: &Emitter,
        name: &str,
        parent: Option<TypeId>,
        schemas: Vec<AttributeSchema>,
        functions: Vec<FunctionDecl>,
    ) -> Outcome {
        check_name(name)?;
        if self.store.type_by_name(name).is_some() {
            return Err(ErrorCode::DuplicateName);
        }
        if let Some(p) = parent {
            let def = self.store.type_def(p).cloned().ok_or(ErrorCode::ParentNotAccessible)?;
            if def.builtin {
                return Err(ErrorCode::ImmutableBuiltin);
            }
            let readable = self.access(emitter, Mode::Read, &def).is_ok() || self.access(emitter, Mode::Use, &def).is_ok();
            if !readable {
                return Err(ErrorCode::ParentNotAccessible);
            }
        }
        let mut names: BTreeSet<String> = match parent {
            Some(p) => self.store.effective_schema(p).iter().map(|s| s.name.clone()).collect(),
            None => BTreeSet::new(),
        };
        for s in &schemas {
            s.check_user_schema()?;
            if !names.insert(s.name.clone()) {
                return Err(ErrorCode::DuplicateName);
            }
        }
        let mut fn_names = BTreeSet::new();
        for f in &functions {
            check_name(&f.name)?;
            if !fn_names.insert(f.name.as_str()) {
                return Err(ErrorCode::DuplicateName);
            }
        }
        let type_id = TypeId(self.store.alloc_id());
        self.store.types.insert(
            type_id,
            TypeDef {
                type_id,
                name: name.to_owned(),
                parent,
                attribute_schemas: schemas,
                functions,
                owner_signature: emitter.signature,
                protection_bits: ProtectionBits::DENIED,
                builtin: false,
            },
        );
        Ok(Some(InnerPayload::Item(ItemId::Type(type_id))))
    }

    /// Extend a type's own schema. Refused when any existing instance, of this
    /// type or a subtype, would stop conforming.
    pub(crate) fn add_attribute(&mut self, id: TypeId, schema: AttributeSchema) -> Outcome {
        schema.check_user_schema()?;
        let clash = self
            .store
            .types
            .values()
            .filter(|t| self.store.is_subtype_of(t.type_id, id) || self.store.is_subtype_of(id, t.type_id))
            .any(|t| t.attribute_schemas.iter().any(|s| s.name == schema.name));
        if clash {
            return Err(ErrorCode::DuplicateName);
        }
        if schema.cardinality.min() > 0 && !self.store.instances_of(id).is_empty() {
            return Err(ErrorCode::ConstraintViolation);
        }
        self.store.types.get_mut(&id).expect("resolved target").attribute_schemas.push(schema);
        Ok(None)
    }
}

fn check_name(name: &str) -> Result<(), ErrorCode> {
    if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '#') {
        return Err(ErrorCode::ConstraintViolation);
    }
    Ok(())
}
