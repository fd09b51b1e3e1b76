//! SplitMix64: the single seeded PRNG of a run. It is threaded through the
//! traffic generators only; protocol logic never draws randomness. Splitting
//! off a per-flow stream keeps arrival sequences independent of how many
//! flows a scenario defines.

use crate::digest::fnv1a_str;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    /// Independent stream for one named consumer.
    pub fn split(&self, label: &str) -> SplitMix64 {
        let mut child = SplitMix64::new(self.state ^ fnv1a_str(label));
        // scramble once so adjacent labels do not correlate
        child.next_u64();
        SplitMix64 {
            state: child.next_u64(),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in the open interval (0, 1).
    pub fn next_f64_open(&mut self) -> f64 {
        loop {
            let v = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            if v > 0.0 {
                return v;
            }
        }
    }
}
