// Copyright 2026 The Tassy Authors
// SPDX-License-Identifier: Apache-2.0

//! Reproducible question ordering.
//!
//! The generator and seeding are fixed so that permutations can be checked
//! against golden values from any implementation: SplitMix64 feeding a
//! descending Fisher–Yates loop, seeded by FNV-1a-64 of
//! `token ++ 0x00 ++ section_id`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Seed for one section's permutation. `token` is the 32-char hex session token.
pub fn section_seed(token: &str, section_id: &str) -> u64 {
    let mut bytes = Vec::with_capacity(token.len() + 1 + section_id.len());
    bytes.extend_from_slice(token.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(section_id.as_bytes());
    fnv1a64(&bytes)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Permutation of `0..n`. Step `i` (from `n-1` down to 1) swaps `i` with
/// `next_u64() mod (i+1)`.
pub fn seeded_shuffle(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}
