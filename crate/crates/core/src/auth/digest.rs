use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Salted SHA-256 of a secret. Only equality is ever needed, so secrets are
/// never stored in a reversible form.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretDigest {
    salt: [u8; 16],
    hash: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("digest must look like sha256$<32 hex salt>$<64 hex hash>")]
pub struct DigestParseError;

impl SecretDigest {
    pub fn new(secret: &str, rng: &mut dyn RngCore) -> Self {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        Self::with_salt(secret, salt)
    }

    pub fn with_salt(secret: &str, salt: [u8; 16]) -> Self {
        SecretDigest { salt, hash: Self::compute(&salt, secret) }
    }

    fn compute(salt: &[u8; 16], secret: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(salt);
        h.update(secret.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }

    pub fn matches(&self, secret: &str) -> bool {
        let candidate = Self::compute(&self.salt, secret);
        candidate.iter().zip(self.hash.iter()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }
}

impl fmt::Debug for SecretDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretDigest(..)")
    }
}

impl fmt::Display for SecretDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sha256${}${}", hex::encode(self.salt), hex::encode(self.hash))
    }
}

impl FromStr for SecretDigest {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('$');
        if parts.next() != Some("sha256") {
            return Err(DigestParseError);
        }
        let salt = parts.next().and_then(|p| hex::decode(p).ok()).ok_or(DigestParseError)?;
        let hash = parts.next().and_then(|p| hex::decode(p).ok()).ok_or(DigestParseError)?;
        if parts.next().is_some() {
            return Err(DigestParseError);
        }
        Ok(SecretDigest {
            salt: salt.try_into().map_err(|_| DigestParseError)?,
            hash: hash.try_into().map_err(|_| DigestParseError)?,
        })
    }
}

impl Serialize for SecretDigest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SecretDigest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}
