//! Small stable hashing used for decision-log digests and AN/CN state
//! comparison. FNV-1a, fixed parameters, no platform dependence.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn fnv1a_str(s: &str) -> u64 {
    fnv1a(s.as_bytes())
}

/// 16-byte digest built from two seeded FNV passes. Stand-in for a real
/// key-derivation function; cryptographic strength is out of scope.
pub fn digest16(parts: &[&[u8]]) -> [u8; 16] {
    let mut lo = FNV_OFFSET;
    let mut hi = FNV_OFFSET ^ 0x9e3779b97f4a7c15;
    for part in parts {
        for &b in *part {
            lo ^= b as u64;
            lo = lo.wrapping_mul(FNV_PRIME);
            hi ^= (b ^ 0x5a) as u64;
            hi = hi.wrapping_mul(FNV_PRIME);
        }
        // separator so ["ab","c"] and ["a","bc"] differ
        lo ^= 0xff;
        lo = lo.wrapping_mul(FNV_PRIME);
        hi ^= 0xa5;
        hi = hi.wrapping_mul(FNV_PRIME);
    }
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&lo.to_le_bytes());
    out[8..].copy_from_slice(&hi.to_le_bytes());
    out
}
