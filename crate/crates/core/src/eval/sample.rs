//! Seeded sampling without replacement.
//!
//! The procedure is fixed so other implementations can reproduce a
//! selection from its seed:
//!
//! 1. SplitMix64: `state += 0x9E3779B97F4A7C15`; `z = state`;
//!    `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`;
//!    `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`; output `z ^ (z >> 31)`
//!    (all arithmetic wrapping mod 2^64).
//! 2. Partial Fisher–Yates over indices `0..len`: for `i` in `0..n`, draw
//!    `j = i + next() % (len - i)` and swap positions `i` and `j`. The first
//!    `n` positions are the sample, in that order.

use super::{EvalError, McqItem};

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

    /// Uniform-ish draw in `0..bound` by modulo reduction.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

pub fn sample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if n == 0 || n > len {
        return Err(EvalError::SampleSize { requested: n, available: len });
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = i + rng.below((len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n);
    Ok(idx)
}

pub fn sample_questions(items: &[McqItem], n: usize, seed: u64) -> Result<Vec<McqItem>, EvalError> {
    Ok(sample_indices(items.len(), n, seed)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}
