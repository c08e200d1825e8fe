//! Stable content hashes for configurations.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration serializes");
    hex::encode(Sha256::digest(&json))
}
