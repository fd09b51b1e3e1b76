//! Run metrics: per-flow delivery accounting, AP utilization timelines,
//! sleep time and the decision-log digest. Serialized as structured text
//! with a fixed section and key order so equal runs produce equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ids::{FlowId, NodeId};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bits_delivered: u64,
    pub first_send_us: Option<u64>,
    pub last_delivery_us: Option<u64>,
    latencies_us: Vec<u64>,
}

impl FlowStats {
    pub fn record_sent(&mut self, at_us: u64) {
        self.sent += 1;
        if self.first_send_us.is_none() {
            self.first_send_us = Some(at_us);
        }
    }

    pub fn record_delivered(&mut self, sent_at_us: u64, at_us: u64, bits: u64) {
        self.delivered += 1;
        self.bits_delivered += bits;
        self.latencies_us.push(at_us.saturating_sub(sent_at_us));
        self.last_delivery_us = Some(at_us);
    }

    pub fn record_dropped(&mut self) {
        self.dropped += 1;
    }

    /// Conservation remainder: packets sent but neither delivered nor
    /// explicitly dropped are still in flight.
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }

    pub fn mean_latency_us(&self) -> u64 {
        if self.latencies_us.is_empty() {
            return 0;
        }
        let sum: u64 = self.latencies_us.iter().sum();
        let n = self.latencies_us.len() as u64;
        (sum + n / 2) / n
    }

    pub fn p95_latency_us(&self) -> u64 {
        if self.latencies_us.is_empty() {
            return 0;
        }
        let mut sorted = self.latencies_us.clone();
        sorted.sort_unstable();
        let idx = (sorted.len() * 95).div_ceil(100).max(1) - 1;
        sorted[idx]
    }

    pub fn throughput_bps(&self) -> u64 {
        match (self.first_send_us, self.last_delivery_us) {
            (Some(first), Some(last)) if last > first => {
                (self.bits_delivered as u128 * 1_000_000 / (last - first) as u128) as u64
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsReport {
    pub flows: BTreeMap<FlowId, FlowStats>,
    /// Per-AP (time, delivered-rate) samples, one per report period.
    pub ap_utilization: BTreeMap<NodeId, Vec<(u64, u64)>>,
    pub asleep_node_us: BTreeMap<NodeId, u64>,
    pub handover_count: u64,
    pub decision_digest: u64,
}

impl MetricsReport {
    pub fn flow(&mut self, id: &FlowId) -> &mut FlowStats {
        self.flows.entry(id.clone()).or_default()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "handovers = {}", self.handover_count);
        let _ = writeln!(s, "decision_digest = {:#018x}", self.decision_digest);
        for (id, f) in &self.flows {
            let _ = writeln!(s, "\n[flow.{id}]");
            let _ = writeln!(s, "sent = {}", f.sent);
            let _ = writeln!(s, "delivered = {}", f.delivered);
            let _ = writeln!(s, "dropped = {}", f.dropped);
            let _ = writeln!(s, "in_flight = {}", f.in_flight());
            let _ = writeln!(s, "mean_latency_us = {}", f.mean_latency_us());
            let _ = writeln!(s, "p95_latency_us = {}", f.p95_latency_us());
            let _ = writeln!(s, "throughput_bps = {}", f.throughput_bps());
        }
        for (ap, samples) in &self.ap_utilization {
            let _ = writeln!(s, "\n[ap.{ap}]");
            let joined: Vec<String> = samples
                .iter()
                .map(|(t, bps)| format!("{t}:{bps}"))
                .collect();
            let _ = writeln!(s, "utilization = \"{}\"", joined.join(" "));
        }
        if !self.asleep_node_us.is_empty() {
            let _ = writeln!(s, "\n[energy]");
            for (node, us) in &self.asleep_node_us {
                let _ = writeln!(s, "{node}_asleep_us = {us}");
            }
        }
        s
    }
}
