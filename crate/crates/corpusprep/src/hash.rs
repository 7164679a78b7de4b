//! Deterministic 64-bit hashing.
//!
//! Everything that influences output bytes (document ids, split buckets,
//! MinHash permutations, content digests) must reproduce exactly across
//! runs and platforms, so the pipeline never hashes through `RandomState`.
//! The mixer is the splitmix64 finalizer, which passes avalanche tests and
//! costs a handful of arithmetic ops.

/// 2^64 / golden ratio, the usual odd constant for seed spreading.
pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a full-avalanche bijection on u64.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded hash of a byte slice.
///
/// Folds 8-byte little-endian words through `mix64`; the tail word is
/// tagged with its length so "a" and "a\0" differ.
pub fn hash_bytes(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN ^ (bytes.len() as u64));
    let mut chunks = bytes.chunks_exact(8);
    for chunk in &mut chunks {
        let v = u64::from_le_bytes(chunk.try_into().unwrap());
        h = mix64(h ^ v);
    }
    let rem = chunks.remainder();
    if !rem.is_empty() {
        let mut v = rem.len() as u64;
        for (i, &b) in rem.iter().enumerate() {
            v ^= (b as u64) << (8 * (i + 1));
        }
        h = mix64(h ^ v);
    }
    h
}

/// Seeded hash of a string.
#[inline]
pub fn hash_str(seed: u64, s: &str) -> u64 {
    hash_bytes(seed, s.as_bytes())
}

/// Incremental hasher for composite keys.
///
/// Each write is length-framed, so `("ab", "c")` and `("a", "bc")`
/// produce different digests.
#[derive(Debug, Clone)]
pub struct Hasher64 {
    state: u64,
}

impl Hasher64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: mix64(seed ^ GOLDEN),
        }
    }

    pub fn write_u64(&mut self, v: u64) -> &mut Self {
        self.state = mix64(self.state ^ v);
        self
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.state = mix64(self.state ^ hash_bytes(self.state, bytes));
        self
    }

    pub fn write_str(&mut self, s: &str) -> &mut Self {
        self.write_bytes(s.as_bytes())
    }

    pub fn finish(&self) -> u64 {
        mix64(self.state)
    }
}

/// Cheap deterministic RNG (splitmix64 stream) for seeded sampling.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform draw in `[0, bound)`; `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        // Multiply-shift range reduction; bias is negligible for our bounds.
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(hash_str(7, "umuntu"), hash_str(7, "umuntu"));
        assert_ne!(hash_str(7, "umuntu"), hash_str(8, "umuntu"));
        assert_ne!(hash_str(7, "umuntu"), hash_str(7, "umuntu "));
    }

    #[test]
    fn tail_length_matters() {
        assert_ne!(hash_bytes(0, b"a"), hash_bytes(0, b"a\0"));
        assert_ne!(hash_bytes(0, b""), hash_bytes(0, b"\0"));
    }

    #[test]
    fn composite_framing() {
        let mut a = Hasher64::new(1);
        a.write_str("ab").write_str("c");
        let mut b = Hasher64::new(1);
        b.write_str("a").write_str("bc");
        assert_ne!(a.finish(), b.finish());
    }

    #[test]
    fn no_collisions_over_random_strings() {
        // Brute-force collision scan: 10k distinct strings, zero collisions.
        let mut rng = SplitMix64::new(42);
        let mut inputs = HashSet::new();
        while inputs.len() < 10_000 {
            let len = 1 + rng.next_below(40) as usize;
            let s: String = (0..len)
                .map(|_| (b'a' + rng.next_below(26) as u8) as char)
                .collect();
            inputs.insert(s);
        }
        let digests: HashSet<u64> = inputs.iter().map(|s| hash_str(0, s)).collect();
        assert_eq!(digests.len(), inputs.len());
    }

    #[test]
    fn splitmix_uniformity_rough() {
        let mut rng = SplitMix64::new(9);
        let mut buckets = [0u32; 10];
        for _ in 0..100_000 {
            buckets[rng.next_below(10) as usize] += 1;
        }
        for &b in &buckets {
            assert!((9_000..11_000).contains(&b), "bucket count {b} out of range");
        }
    }
}
