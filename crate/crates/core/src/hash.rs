use serde::Serialize;
use sha2::{Digest, Sha256};

/// Stable 64-bit digest of a value's JSON form (first 8 bytes of SHA-256).
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> u64 {
    let json = serde_json::to_vec(value).expect("configuration serializes to JSON");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
