//! Counter-based randomness: every random quantity attached to a lattice
//! object is a keyed hash of the object's fixed-width little-endian encoding.

use std::hash::Hasher;

use siphasher::sip::SipHasher13;

use crate::lattice::{Vertex, MAX_DIM};

/// Domain tags keep the different random fields independent under one seed.
pub(crate) mod domain {
    pub const EDGE: u64 = 0x6564_6765_0000_0001;
    pub const CLOCK: u64 = 0x636c_6f63_6b00_0002;
    pub const RECOVERY_TRIAL: u64 = 0x7265_636f_7600_0003;
    pub const ATTEMPT_TRIAL: u64 = 0x6174_7465_6d70_0004;
}

const MAX_WORDS: usize = MAX_DIM + 2;

/// Hash of `(vertex coordinates, extra words)` under `(seed, domain)`.
///
/// Coordinates are widened to `i64` and every word is written as 8 bytes
/// little-endian, so the value does not depend on the host platform.
#[inline]
pub(crate) fn hash_vertex(seed: u64, domain: u64, v: &Vertex, extra: &[u64]) -> u64 {
    debug_assert!(extra.len() <= 2);
    let mut buf = [0u8; 8 * MAX_WORDS];
    let mut len = 0;
    for &c in v.coords() {
        buf[len..len + 8].copy_from_slice(&(c as i64).to_le_bytes());
        len += 8;
    }
    for &w in extra {
        buf[len..len + 8].copy_from_slice(&w.to_le_bytes());
        len += 8;
    }
    let mut h = SipHasher13::new_with_keys(seed, domain ^ (v.dim() as u64));
    h.write(&buf[..len]);
    h.finish()
}

/// Map a 64-bit value to `[0, 1)` as `u / 2^64`.
#[inline]
pub(crate) fn unit_interval(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map a 64-bit value to `(0, 1]`, safe as the argument of a logarithm.
#[inline]
pub(crate) fn unit_interval_open_low(u: u64) -> f64 {
    ((u >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}
