//! Deterministic seed derivation for replica streams.

use sha2::{Digest, Sha256};

/// Child seed for `(master_seed, stream_label, index)`.
///
/// SHA-256 over `master_seed (8 bytes LE) || len(label) (8 bytes LE) || label
/// || index (8 bytes LE)`, truncated to the first 8 bytes read little-endian.
/// The length prefix keeps labels from running into the index bytes.
pub fn seed_schedule(master_seed: u64, stream_label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((stream_label.len() as u64).to_le_bytes());
    hasher.update(stream_label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Environment and process seeds for one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaSeeds {
    pub env_seed: u64,
    pub process_seed: u64,
}

impl ReplicaSeeds {
    pub fn derive(master_seed: u64, index: u64) -> Self {
        Self {
            env_seed: seed_schedule(master_seed, "environment", index),
            process_seed: seed_schedule(master_seed, "process", index),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn deterministic() {
        assert_eq!(seed_schedule(42, "env", 7), seed_schedule(42, "env", 7));
        assert_ne!(seed_schedule(42, "env", 7), seed_schedule(43, "env", 7));
    }

    #[test]
    fn labels_are_separated() {
        assert_ne!(seed_schedule(1, "environment", 0), seed_schedule(1, "process", 0));
        // A label that ends where another one's index starts.
        assert_ne!(seed_schedule(1, "a", 0), seed_schedule(1, "a\0", 0));
    }

    #[test]
    fn million_children_are_distinct() {
        let mut seen = HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(seed_schedule(2024, "process", i)), "duplicate at {i}");
        }
    }

    #[test]
    fn frozen_value() {
        // Guards the byte layout against accidental changes. Expected
        // values come from an independent SHA-256 of the documented layout.
        assert_eq!(seed_schedule(0, "process", 0), 0x0f67_cebc_f791_06d3);
        assert_eq!(seed_schedule(0x5eed_2024, "walk-pair", 7), 0x960b_0ae2_24c4_dd32);
    }
}
