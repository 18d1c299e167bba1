use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::value::StoredValue;
use super::{ObjectId, TypeId, Visibility};
use crate::protection::{ProtectionBits, Protected};
use crate::signature::Signature;

/// An instance. Attribute slots are written only by the entry function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub(crate) object_id: ObjectId,
    pub(crate) type_id: TypeId,
    pub(crate) owner_signature: Signature,
    pub(crate) protection_bits: ProtectionBits,
    pub(crate) attributes: BTreeMap<String, Vec<StoredValue>>,
    pub(crate) parts: Vec<ObjectId>,
    /// Per-object consultation conditions set by the owner.
    pub(crate) visibility_overrides: BTreeMap<String, Visibility>,
}

impl ObjectRecord {
    pub fn object_id(&self) -> ObjectId {
        self.object_id
    }

    pub fn type_id(&self) -> TypeId {
        self.type_id
    }

    pub fn parts(&self) -> &[ObjectId] {
        &self.parts
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    pub fn value_count(&self, attr: &str) -> usize {
        self.attributes.get(attr).map_or(0, Vec::len)
    }

    /// Raw stored bytes of a ciphered slot, for round-trip checks.
    #[cfg(any(test, feature = "inspect"))]
    pub fn ciphered_bytes(&self, attr: &str) -> Vec<Vec<u8>> {
        self.attributes
            .get(attr)
            .into_iter()
            .flatten()
            .filter_map(|v| match v {
                StoredValue::Ciphered(bytes) => Some(bytes.clone()),
                StoredValue::Plain(_) => None,
            })
            .collect()
    }
}

impl Protected for ObjectRecord {
    fn owner_signature(&self) -> Signature {
        self.owner_signature
    }

    fn protection_bits(&self) -> ProtectionBits {
        self.protection_bits
    }
}
