//! Interface functions: the entry function validates and stores attribute
//! values, the consultation function releases them according to the
//! attribute's consultation condition.

use std::collections::BTreeMap;

use super::schema::{AttributeSchema, RequesterClass, Visibility};
use super::value::{Plain, StoredValue};
use super::{is_reserved_attribute, CipherContext, CipherHook, ObjectId, Store, TypeId};
use crate::error::ErrorCode;
use crate::signature::Signature;

pub(crate) fn seal_value(
    cipher: &dyn CipherHook,
    owner: &Signature,
    ctx: &CipherContext<'_>,
    plain: &Plain,
) -> Vec<u8> {
    let bytes = serde_json::to_vec(plain).expect("plain values always serialize");
    cipher.encipher(owner.bytes(), ctx, &bytes)
}

pub(crate) fn open_value(
    cipher: &dyn CipherHook,
    owner: &Signature,
    ctx: &CipherContext<'_>,
    data: &[u8],
) -> Option<Plain> {
    serde_json::from_slice(&cipher.decipher(owner.bytes(), ctx, data)).ok()
}

/// Kind, cardinality and integrity checks for a full attribute slot.
pub(crate) fn check_values(
    store: &Store,
    schema: &AttributeSchema,
    values: Vec<Plain>,
) -> Result<Vec<Plain>, ErrorCode> {
    let values = values
        .into_iter()
        .map(|v| schema.kind.conform(v))
        .collect::<Result<Vec<_>, _>>()?;
    if !schema.cardinality.admits(values.len()) {
        return Err(ErrorCode::ConstraintViolation);
    }
    for v in &values {
        if let Some(pred) = &schema.integrity {
            if !pred.holds(v) {
                return Err(ErrorCode::ConstraintViolation);
            }
        }
        if let Plain::Reference(r) = v {
            if store.object(*r).is_none() {
                return Err(ErrorCode::ConstraintViolation);
            }
        }
    }
    Ok(values)
}

fn encode_slot(
    cipher: &dyn CipherHook,
    owner: &Signature,
    object: ObjectId,
    schema: &AttributeSchema,
    values: Vec<Plain>,
) -> Vec<StoredValue> {
    values
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            if schema.ciphered {
                let ctx = CipherContext { object, attr: &schema.name, index };
                StoredValue::Ciphered(seal_value(cipher, owner, &ctx, &v))
            } else {
                StoredValue::Plain(v)
            }
        })
        .collect()
}

fn decode_slot(
    cipher: &dyn CipherHook,
    owner: &Signature,
    object: ObjectId,
    attr: &str,
    slot: &[StoredValue],
) -> Result<Vec<Plain>, ErrorCode> {
    slot.iter()
        .enumerate()
        .map(|(index, stored)| match stored {
            StoredValue::Plain(p) => Ok(p.clone()),
            StoredValue::Ciphered(bytes) => {
                let ctx = CipherContext { object, attr, index };
                // A slot that fails to open is treated as unreadable.
                open_value(cipher, owner, &ctx, bytes).ok_or(ErrorCode::HiddenAttr)
            }
        })
        .collect()
}

/// Build the attribute map of a new instance of `type_id` from initial values.
pub(crate) fn initial_attributes(
    store: &Store,
    cipher: &dyn CipherHook,
    owner: &Signature,
    object: ObjectId,
    type_id: TypeId,
    initial: Vec<(String, Plain)>,
) -> Result<BTreeMap<String, Vec<StoredValue>>, ErrorCode> {
    let schema: Vec<AttributeSchema> = store.effective_schema(type_id).into_iter().cloned().collect();
    let mut grouped: BTreeMap<String, Vec<Plain>> = BTreeMap::new();
    for (name, value) in initial {
        if is_reserved_attribute(&name) {
            return Err(ErrorCode::KernelPrivateAttribute);
        }
        if !schema.iter().any(|s| s.name == name) {
            return Err(ErrorCode::UnknownAttribute);
        }
        grouped.entry(name).or_default().push(value);
    }
    let mut attributes = BTreeMap::new();
    for s in &schema {
        let values = check_values(store, s, grouped.remove(&s.name).unwrap_or_default())?;
        if !values.is_empty() {
            attributes.insert(s.name.clone(), encode_slot(cipher, owner, object, s, values));
        }
    }
    Ok(attributes)
}

/// Replace the values of `attr`. Invoked only for allowed write-class messages.
pub(crate) fn entry_function(
    store: &mut Store,
    cipher: &dyn CipherHook,
    object: ObjectId,
    attr: &str,
    values: Vec<Plain>,
) -> Result<(), ErrorCode> {
    if is_reserved_attribute(attr) {
        return Err(ErrorCode::KernelPrivateAttribute);
    }
    let record = store.object(object).ok_or(ErrorCode::UnknownTarget)?;
    let owner = record.owner_signature;
    let schema = store
        .schema_of(record.type_id, attr)
        .cloned()
        .ok_or(ErrorCode::UnknownAttribute)?;
    let values = check_values(store, &schema, values)?;
    let slot = encode_slot(cipher, &owner, object, &schema, values);
    let record = store.objects.get_mut(&object).expect("checked above");
    if slot.is_empty() {
        record.attributes.remove(attr);
    } else {
        record.attributes.insert(attr.to_owned(), slot);
    }
    Ok(())
}

/// The consultation condition in force for `attr` on `object`.
pub(crate) fn effective_visibility(store: &Store, object: ObjectId, attr: &str) -> Option<Visibility> {
    let record = store.object(object)?;
    let schema = store.schema_of(record.type_id, attr)?;
    if schema.visibility == Visibility::Private {
        return Some(Visibility::Private);
    }
    Some(record.visibility_overrides.get(attr).copied().unwrap_or(schema.visibility))
}

/// Return the values of `attr` if its consultation condition admits `class`.
pub(crate) fn consultation_function(
    store: &Store,
    cipher: &dyn CipherHook,
    object: ObjectId,
    attr: &str,
    class: RequesterClass,
) -> Result<Vec<Plain>, ErrorCode> {
    if is_reserved_attribute(attr) {
        return Err(ErrorCode::HiddenAttr);
    }
    let record = store.object(object).ok_or(ErrorCode::UnknownTarget)?;
    let visibility = effective_visibility(store, object, attr).ok_or(ErrorCode::UnknownAttribute)?;
    if !visibility.admits(class) {
        return Err(ErrorCode::HiddenAttr);
    }
    let slot = record.attributes.get(attr).map(Vec::as_slice).unwrap_or(&[]);
    decode_slot(cipher, &record.owner_signature, object, attr, slot)
}

/// Re-encipher every ciphered slot of `object` (from the key `old_owner`)
/// under its current owner and position. Called after restamping or copying.
pub(crate) fn reseal(
    store: &mut Store,
    cipher: &dyn CipherHook,
    object: ObjectId,
    source: ObjectId,
    old_owner: &Signature,
) {
    let Some(record) = store.objects.get(&object) else {
        return;
    };
    let new_owner = record.owner_signature;
    let mut rewritten = BTreeMap::new();
    for (attr, slot) in &record.attributes {
        if !slot.iter().any(|v| matches!(v, StoredValue::Ciphered(_))) {
            continue;
        }
        let fresh: Vec<StoredValue> = slot
            .iter()
            .enumerate()
            .map(|(index, stored)| match stored {
                StoredValue::Ciphered(bytes) => {
                    let from = CipherContext { object: source, attr, index };
                    let to = CipherContext { object, attr, index };
                    match open_value(cipher, old_owner, &from, bytes) {
                        Some(plain) => StoredValue::Ciphered(seal_value(cipher, &new_owner, &to, &plain)),
                        None => stored.clone(),
                    }
                }
                plain => plain.clone(),
            })
            .collect();
        rewritten.insert(attr.clone(), fresh);
    }
    let record = store.objects.get_mut(&object).expect("checked above");
    record.attributes.extend(rewritten);
}
