//! Owner signatures.
//!
//! A signature is a 4-byte mark minted once per user and stamped on every
//! object, type and message that user produces. Nothing outside the kernel
//! can build one: there is no public constructor, `Debug` prints a
//! placeholder, and no reply payload type can carry one.

use std::collections::BTreeSet;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Upper bound on hash retries before the registry gives up.
const MAX_MINT_ATTEMPTS: u32 = 1 << 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature([u8; 4]);

impl Signature {
    /// Encoded length in bytes.
    pub const LEN: usize = 4;
    /// Number of distinct signature values.
    pub const SPACE: u64 = 1 << 32;

    /// Mark carried by the built-in types. Never minted for a user.
    pub(crate) const SYSTEM: Signature = Signature([0; 4]);

    #[cfg(test)]
    pub(crate) fn from_bytes(bytes: [u8; 4]) -> Self {
        Signature(bytes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Raw bytes, for hygiene checks that grep outputs for leaked signatures.
    #[cfg(any(test, feature = "inspect"))]
    pub fn to_bytes(&self) -> [u8; 4] {
        self.0
    }

    pub(crate) fn bytes(&self) -> &[u8; 4] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Signature(*)")
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let raw = hex::decode(&text).map_err(serde::de::Error::custom)?;
        let bytes: [u8; 4] = raw
            .try_into()
            .map_err(|_| serde::de::Error::custom("signature must be exactly 4 bytes"))?;
        Ok(Signature(bytes))
    }
}

/// Hash used to derive candidate signatures from seed material.
pub trait SignatureHasher: Send {
    fn hash(&self, material: &[u8]) -> [u8; 4];
}

/// SHA-256 truncated to its first four bytes.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sha256Hasher;

impl SignatureHasher for Sha256Hasher {
    fn hash(&self, material: &[u8]) -> [u8; 4] {
        let digest = Sha256::digest(material);
        let mut out = [0u8; 4];
        out.copy_from_slice(&digest[..4]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("signature registry exhausted")]
pub struct RegistryExhausted;

/// Every signature ever minted. Live ones belong to current users; retired
/// ones belonged to departed users and are never handed out again.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRegistry {
    live: BTreeSet<Signature>,
    retired: BTreeSet<Signature>,
    minted: u64,
}

impl SignatureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mint a fresh signature from `hash(name ‖ counter ‖ salt)`, drawing a
    /// new salt whenever the candidate is already taken.
    pub fn mint(
        &mut self,
        name: &str,
        hasher: &dyn SignatureHasher,
        rng: &mut dyn RngCore,
    ) -> Result<Signature, RegistryExhausted> {
        // SYSTEM occupies one value.
        let used = self.live.len() as u64 + self.retired.len() as u64 + 1;
        if used >= Signature::SPACE {
            return Err(RegistryExhausted);
        }
        let counter = self.minted;
        for _ in 0..MAX_MINT_ATTEMPTS {
            let mut salt = [0u8; 16];
            rng.fill_bytes(&mut salt);
            let mut material = Vec::with_capacity(name.len() + 1 + 8 + salt.len());
            material.extend_from_slice(name.as_bytes());
            material.push(0);
            material.extend_from_slice(&counter.to_be_bytes());
            material.extend_from_slice(&salt);
            let candidate = Signature(hasher.hash(&material));
            if candidate != Signature::SYSTEM && !self.is_known(&candidate) {
                self.live.insert(candidate);
                self.minted += 1;
                return Ok(candidate);
            }
        }
        Err(RegistryExhausted)
    }

    pub fn is_live(&self, sig: &Signature) -> bool {
        self.live.contains(sig)
    }

    fn is_known(&self, sig: &Signature) -> bool {
        self.live.contains(sig) || self.retired.contains(sig)
    }

    /// Move a signature out of the live set permanently.
    pub fn retire(&mut self, sig: &Signature) {
        if self.live.remove(sig) {
            self.retired.insert(*sig);
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn minted(&self) -> u64 {
        self.minted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::{AtomicU32, Ordering};

    /// Returns a fixed value for the first `collisions` calls, then defers to SHA-256.
    struct CollidingHasher {
        value: [u8; 4],
        collisions: AtomicU32,
    }

    impl SignatureHasher for CollidingHasher {
        fn hash(&self, material: &[u8]) -> [u8; 4] {
            let left = self.collisions.load(Ordering::Relaxed);
            if left > 0 {
                self.collisions.store(left - 1, Ordering::Relaxed);
                self.value
            } else {
                Sha256Hasher.hash(material)
            }
        }
    }

    #[test]
    fn value_space_is_two_to_the_32() {
        assert_eq!(Signature::SPACE, 4_294_967_296);
        assert_eq!(Signature::LEN, 4);
    }

    #[test]
    fn successive_mints_are_distinct() {
        let mut reg = SignatureRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = reg.mint("PAUL", &Sha256Hasher, &mut rng).unwrap();
        let b = reg.mint("PAUL", &Sha256Hasher, &mut rng).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(reg.live_count(), 2);
    }

    #[test]
    fn colliding_hash_is_retried_with_fresh_salt() {
        let mut reg = SignatureRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let first = reg
            .mint(
                "PAUL",
                &CollidingHasher { value: [9, 9, 9, 9], collisions: AtomicU32::new(1) },
                &mut rng,
            )
            .unwrap();
        assert_eq!(first.to_bytes(), [9, 9, 9, 9]);
        // The next three candidates collide with the live value.
        let hasher = CollidingHasher { value: [9, 9, 9, 9], collisions: AtomicU32::new(3) };
        let second = reg.mint("MICHEL", &hasher, &mut rng).unwrap();
        assert_ne!(second, first);
        assert_eq!(hasher.collisions.load(Ordering::Relaxed), 0);
        assert!(reg.is_live(&second));
    }

    #[test]
    fn hash_stuck_on_system_value_exhausts() {
        let mut reg = SignatureRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hasher = CollidingHasher { value: [0, 0, 0, 0], collisions: AtomicU32::new(u32::MAX) };
        assert_eq!(reg.mint("X", &hasher, &mut rng), Err(RegistryExhausted));
    }

    #[test]
    fn retired_signatures_are_never_reissued() {
        let mut reg = SignatureRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = reg
            .mint("A", &CollidingHasher { value: [1, 2, 3, 4], collisions: AtomicU32::new(1) }, &mut rng)
            .unwrap();
        reg.retire(&a);
        assert!(!reg.is_live(&a));
        let hasher = CollidingHasher { value: [1, 2, 3, 4], collisions: AtomicU32::new(2) };
        let b = reg.mint("B", &hasher, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn debug_never_prints_bytes() {
        let sig = Signature::from_bytes([0xde, 0xad, 0xbe, 0xef]);
        let shown = format!("{sig:?}");
        assert!(!shown.contains("de"));
        assert_eq!(shown, "Signature(*)");
    }

    #[test]
    fn serde_round_trips_as_hex() {
        let sig = Signature::from_bytes([0x01, 0xab, 0x00, 0xff]);
        let json = serde_json::to_string(&sig).unwrap();
        assert_eq!(json, "\"01ab00ff\"");
        let back: Signature = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sig);
        assert!(serde_json::from_str::<Signature>("\"01ab00\"").is_err());
    }
}
