//! Line-oriented, append-only trace. One record per line:
//! `t_us <TAB> seq <TAB> node <TAB> kind <TAB> key=val <TAB> ...`
//! Chosen over a binary format so conformance tests can diff traces
//! directly. The full format is documented in `docs/trace-format.md`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceKind {
    Rrc,
    Mgmt,
    Data,
    Mrb,
    Ctrl,
    Auth,
    Sync,
    Drop,
    Boundary,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Rrc => "rrc",
            TraceKind::Mgmt => "mgmt",
            TraceKind::Data => "data",
            TraceKind::Mrb => "mrb",
            TraceKind::Ctrl => "ctrl",
            TraceKind::Auth => "auth",
            TraceKind::Sync => "sync",
            TraceKind::Drop => "drop",
            TraceKind::Boundary => "boundary",
        }
    }

    pub fn parse(s: &str) -> Option<TraceKind> {
        Some(match s {
            "rrc" => TraceKind::Rrc,
            "mgmt" => TraceKind::Mgmt,
            "data" => TraceKind::Data,
            "mrb" => TraceKind::Mrb,
            "ctrl" => TraceKind::Ctrl,
            "auth" => TraceKind::Auth,
            "sync" => TraceKind::Sync,
            "drop" => TraceKind::Drop,
            "boundary" => TraceKind::Boundary,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub t_us: u64,
    pub seq: u64,
    pub node: NodeId,
    pub kind: TraceKind,
    pub fields: Vec<(String, String)>,
}

impl TraceRecord {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{}\t{}\t{}\t{}",
            self.t_us,
            self.seq,
            self.node,
            self.kind.as_str()
        );
        for (k, v) in &self.fields {
            s.push('\t');
            s.push_str(k);
            s.push('=');
            s.push_str(v);
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    pub fn push(
        &mut self,
        t_us: u64,
        node: &NodeId,
        kind: TraceKind,
        fields: Vec<(String, String)>,
    ) {
        let seq = self.records.len() as u64;
        self.records.push(TraceRecord {
            t_us,
            seq,
            node: node.clone(),
            kind,
            fields,
        });
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.line());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| TraceParseError {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split('\t');
            let t_us = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("missing or invalid time"))?;
            let seq = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("missing or invalid seq"))?;
            let node = parts.next().ok_or_else(|| err("missing node"))?;
            let kind = parts
                .next()
                .and_then(TraceKind::parse)
                .ok_or_else(|| err("missing or unknown kind"))?;
            let mut fields = Vec::new();
            for kv in parts {
                let (k, v) = kv.split_once('=').ok_or_else(|| err("field without '='"))?;
                fields.push((k.to_string(), v.to_string()));
            }
            records.push(TraceRecord {
                t_us,
                seq,
                node: NodeId::from(node),
                kind,
                fields,
            });
        }
        Ok(Trace { records })
    }

    /// Projection used by the conformance tooling: keep records matching the
    /// node and kind filters (empty filter = keep all).
    pub fn filter(
        &self,
        nodes: &BTreeSet<NodeId>,
        kinds: &BTreeSet<TraceKind>,
    ) -> Vec<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| nodes.is_empty() || nodes.contains(&r.node))
            .filter(|r| kinds.is_empty() || kinds.contains(&r.kind))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let mut trace = Trace::new();
        trace.push(
            1500,
            &NodeId::from("ue1"),
            TraceKind::Mgmt,
            vec![
                ("frame".into(), "probe-request".into()),
                ("dir".into(), "tx".into()),
            ],
        );
        trace.push(2000, &NodeId::from("enb"), TraceKind::Rrc, vec![]);
        let parsed = Trace::parse(&trace.to_text()).unwrap();
        assert_eq!(parsed, trace);
    }

    #[test]
    fn filter_by_node_and_kind() {
        let mut trace = Trace::new();
        trace.push(0, &NodeId::from("a"), TraceKind::Mgmt, vec![]);
        trace.push(1, &NodeId::from("b"), TraceKind::Mgmt, vec![]);
        trace.push(2, &NodeId::from("a"), TraceKind::Data, vec![]);
        let nodes: BTreeSet<NodeId> = [NodeId::from("a")].into();
        let kinds: BTreeSet<TraceKind> = [TraceKind::Mgmt].into();
        let hits = trace.filter(&nodes, &kinds);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].t_us, 0);
        assert_eq!(trace.filter(&BTreeSet::new(), &BTreeSet::new()).len(), 3);
    }

    #[test]
    fn bad_lines_are_rejected_with_position() {
        let e = Trace::parse("5\t0\tue1\tnot-a-kind").unwrap_err();
        assert_eq!(e.line, 1);
    }
}
