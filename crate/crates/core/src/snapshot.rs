//! Store snapshots for backup and restore.
//!
//! A snapshot file is canonical JSON (sorted keys) followed by one line
//! `#sha256:<hex>` holding the digest of the JSON text. It contains every
//! private attribute, signatures included, and must be guarded accordingly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auth::UserObject;
use crate::error::SnapshotError;
use crate::model::{ObjectId, ObjectRecord, Store, TypeDef, TypeId};
use crate::signature::SignatureRegistry;

pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_PREFIX: &str = "#sha256:";
const NOTICE: &str = "complete store image including private attributes and owner signatures; restrict access";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub format_version: u32,
    notice: String,
    types: BTreeMap<TypeId, TypeDef>,
    objects: BTreeMap<ObjectId, ObjectRecord>,
    users: BTreeMap<ObjectId, UserObject>,
    registry: SignatureRegistry,
    next_id: u64,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl StoreSnapshot {
    pub fn capture(store: &Store) -> Self {
        StoreSnapshot {
            format_version: FORMAT_VERSION,
            notice: NOTICE.to_owned(),
            types: store.types.clone(),
            objects: store.objects.clone(),
            users: store.users.clone(),
            registry: store.registry.clone(),
            next_id: store.next_id,
        }
    }

    pub fn into_store(self) -> Store {
        Store {
            types: self.types,
            objects: self.objects,
            users: self.users,
            registry: self.registry,
            next_id: self.next_id,
        }
    }

    pub fn encode(&self) -> String {
        // Going through `Value` sorts every object's keys.
        let value = serde_json::to_value(self).expect("snapshot serializes");
        let json = serde_json::to_string_pretty(&value).expect("value serializes");
        let digest = hex::encode(Sha256::digest(json.as_bytes()));
        format!("{json}\n{CHECKSUM_PREFIX}{digest}\n")
    }

    pub fn decode(text: &str) -> Result<Self, SnapshotError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let (json, last) = body.rsplit_once('\n').ok_or(SnapshotError::CorruptSnapshot)?;
        let expected = last.strip_prefix(CHECKSUM_PREFIX).ok_or(SnapshotError::CorruptSnapshot)?;
        if hex::encode(Sha256::digest(json.as_bytes())) != expected {
            return Err(SnapshotError::CorruptSnapshot);
        }
        let probe: VersionProbe = serde_json::from_str(json)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(SnapshotError::FormatVersionMismatch { found: probe.format_version, expected: FORMAT_VERSION });
        }
        Ok(serde_json::from_str(json)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_store_round_trips() {
        let store = Store::new();
        let text = StoreSnapshot::capture(&store).encode();
        assert!(text.lines().last().unwrap().starts_with("#sha256:"));
        let back = StoreSnapshot::decode(&text).unwrap().into_store();
        assert_eq!(back, store);
    }

    #[test]
    fn encoding_is_canonical() {
        let store = Store::new();
        assert_eq!(StoreSnapshot::capture(&store).encode(), StoreSnapshot::capture(&store).encode());
    }

    #[test]
    fn any_flipped_byte_is_detected() {
        let text = StoreSnapshot::capture(&Store::new()).encode();
        let json_len = text.rfind(CHECKSUM_PREFIX).unwrap() - 1;
        for i in (0..json_len).step_by(97) {
            let mut bytes = text.clone().into_bytes();
            bytes[i] ^= 0x01;
            let Ok(tampered) = String::from_utf8(bytes) else { continue };
            assert!(matches!(StoreSnapshot::decode(&tampered), Err(SnapshotError::CorruptSnapshot)));
        }
    }

    #[test]
    fn version_is_checked_after_checksum() {
        let text = StoreSnapshot::capture(&Store::new()).encode();
        let json = text.rsplit_once(CHECKSUM_PREFIX).unwrap().0.trim_end().replace(
            &format!("\"format_version\": {FORMAT_VERSION}"),
            "\"format_version\": 99",
        );
        let forged = format!("{json}\n{CHECKSUM_PREFIX}{}\n", hex::encode(Sha256::digest(json.as_bytes())));
        assert!(matches!(
            StoreSnapshot::decode(&forged),
            Err(SnapshotError::FormatVersionMismatch { found: 99, expected: 1 })
        ));
    }

    #[test]
    fn missing_checksum_line_is_corrupt() {
        assert!(matches!(StoreSnapshot::decode("{}"), Err(SnapshotError::CorruptSnapshot)));
        assert!(matches!(StoreSnapshot::decode("{}\n#md5:00\n"), Err(SnapshotError::CorruptSnapshot)));
    }
}
