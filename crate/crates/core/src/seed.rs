/// Derives a sub-seed from a base seed and a usage tag.
///
/// All randomness in a run flows from one user-facing seed; every consumer
/// (split, sampling, per-model init, dropout, ...) derives its own stream
/// with a stable tag so that adding a consumer never shifts another's stream.
/// FNV-1a is used because std's hasher is not stable across releases.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf29ce484222325;
    const FNV_PRIME: u64 = 0x100000001b3;
    let mut h = FNV_OFFSET;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h.wrapping_add(base.wrapping_mul(0x9e3779b97f4a7c15))
}
