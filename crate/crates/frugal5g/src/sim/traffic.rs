//! Traffic generation: CBR and Poisson arrival processes, precomputed per
//! flow from a split of the run seed so generation order cannot influence
//! protocol behaviour.

use super::rng::SplitMix64;
use super::scenario::{TrafficKind, TrafficSpec};

/// All packet arrival times of a flow inside `[start_us, stop_us)`.
pub fn arrival_times(spec: &TrafficSpec, run_rng: &SplitMix64) -> Vec<u64> {
    let bits = spec.packet_bytes as u128 * 8;
    match spec.kind {
        TrafficKind::Cbr => {
            let mut out = Vec::new();
            let mut k: u128 = 0;
            loop {
                let t = spec.start_us + (k * bits * 1_000_000 / spec.rate_bps as u128) as u64;
                if t >= spec.stop_us {
                    break;
                }
                out.push(t);
                k += 1;
            }
            out
        }
        TrafficKind::Poisson => {
            let mut rng = run_rng.split(spec.flow_id.as_str());
            let mean_gap_us = bits as f64 * 1_000_000.0 / spec.rate_bps as f64;
            let mut out = Vec::new();
            let mut t = spec.start_us as f64;
            loop {
                let gap = -rng.next_f64_open().ln() * mean_gap_us;
                t += gap.max(1.0);
                let at = t as u64;
                if at >= spec.stop_us {
                    break;
                }
                out.push(at);
            }
            out
        }
    }
}
