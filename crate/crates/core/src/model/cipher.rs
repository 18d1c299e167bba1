//! Cipher hook for attributes declared `ciphered`.
//!
//! The only requirement on a hook is round-trip identity for a given key and
//! context. The default keys a SHA-256 keystream on the owner signature and
//! the slot position, so equal plaintexts in different slots differ.

use sha2::{Digest, Sha256};

use super::ObjectId;

/// Position of a ciphered value.
#[derive(Debug, Clone, Copy)]
pub struct CipherContext<'a> {
    pub object: ObjectId,
    pub attr: &'a str,
    pub index: usize,
}

pub trait CipherHook: Send {
    fn encipher(&self, key: &[u8], context: &CipherContext<'_>, plain: &[u8]) -> Vec<u8>;
    fn decipher(&self, key: &[u8], context: &CipherContext<'_>, data: &[u8]) -> Vec<u8>;
}

/// Byte-wise XOR against a keyed SHA-256 counter-mode stream.
#[derive(Debug, Default, Clone, Copy)]
pub struct KeyedStream;

impl KeyedStream {
    fn apply(key: &[u8], context: &CipherContext<'_>, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(data.len());
        for (block, chunk) in data.chunks(32).enumerate() {
            let mut h = Sha256::new();
            h.update(b"protea-attr-stream");
            h.update((key.len() as u32).to_be_bytes());
            h.update(key);
            h.update(context.object.raw().to_be_bytes());
            h.update((context.attr.len() as u32).to_be_bytes());
            h.update(context.attr.as_bytes());
            h.update((context.index as u64).to_be_bytes());
            h.update((block as u64).to_be_bytes());
            let pad = h.finalize();
            out.extend(chunk.iter().zip(pad.iter()).map(|(b, k)| b ^ k));
        }
        out
    }
}

impl CipherHook for KeyedStream {
    fn encipher(&self, key: &[u8], context: &CipherContext<'_>, plain: &[u8]) -> Vec<u8> {
        Self::apply(key, context, plain)
    }

    fn decipher(&self, key: &[u8], context: &CipherContext<'_>, data: &[u8]) -> Vec<u8> {
        Self::apply(key, context, data)
    }
}
