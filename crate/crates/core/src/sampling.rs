//! Deterministic, portable random sampling.
//!
//! Every manifest and prompt assignment in this toolkit must be byte-for-byte
//! reproducible from a single u64 seed — including by re-implementations in
//! other languages. We therefore avoid library RNGs whose streams may change
//! between versions and pin the exact algorithm here:
//!
//! - Generator: **SplitMix64** (Steele, Lea & Flood's `splitmix64`), the
//!   public-domain 64-bit mixing sequence. State advances by the golden-ratio
//!   constant `0x9E3779B97F4A7C15`; output is the xor-shift/multiply finalizer.
//! - Bounded draw: `index = ((next() as u128 * n as u128) >> 64)`, the
//!   fixed-point multiply mapping. Its bias is below `n / 2^64` and is
//!   accepted in exchange for a branch-free, portable definition.
//! - Shuffle: Fisher–Yates (Durstenfeld), swapping position `i` with a
//!   bounded draw from `0..=i`, for `i` from `len-1` down to `1`.

/// SplitMix64 pseudo-random generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix(self.state)
    }

    /// Uniform draw from `0..n`. `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }

    /// Draw `count` items from `pool` without replacement, in shuffled order.
    pub fn sample_without_replacement<T: Clone>(&mut self, pool: &[T], count: usize) -> Vec<T> {
        debug_assert!(count <= pool.len());
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        self.shuffle(&mut indices);
        indices
            .into_iter()
            .take(count)
            .map(|i| pool[i].clone())
            .collect()
    }
}

/// The SplitMix64 output finalizer: xor-shift / multiply mixing of a word.
///
/// Also used standalone as a hash when one value must be mapped to an
/// independent stream position (e.g. per-sample prompt picks).
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
