//! Run metrics and their flat `key=value` file format.

use std::fs;
use std::path::Path;

use crate::sched::RunSummary;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunMetrics {
    pub edges_ingested: u64,
    pub edges_discarded: u64,
    pub reports_emitted: u64,
    pub peak_partial_matches: usize,
    pub peak_msnode_count: usize,
    /// Edges handled per second of wall time.
    pub throughput: f64,
}

impl RunMetrics {
    pub fn from_summary(s: &RunSummary) -> Self {
        let secs = s.elapsed.as_secs_f64().max(1e-9);
        RunMetrics {
            edges_ingested: s.edges_ingested,
            edges_discarded: s.edges_discarded,
            reports_emitted: s.reports_emitted,
            peak_partial_matches: s.peak_stored_matches,
            peak_msnode_count: s.peak_nodes,
            throughput: s.edges_ingested as f64 / secs,
        }
    }

    pub fn to_lines(&self) -> String {
        format!(
            "edges_ingested={}\nedges_discarded={}\nreports_emitted={}\n\
             peak_partial_matches={}\npeak_msnode_count={}\nthroughput={:.3}\n",
            self.edges_ingested,
            self.edges_discarded,
            self.reports_emitted,
            self.peak_partial_matches,
            self.peak_msnode_count,
            self.throughput
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_lines())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_lines_are_flat_key_values() {
        let m = RunMetrics {
            edges_ingested: 10,
            edges_discarded: 3,
            reports_emitted: 1,
            peak_partial_matches: 7,
            peak_msnode_count: 9,
            throughput: 123.456,
        };
        let text = m.to_lines();
        assert!(m.edges_discarded <= m.edges_ingested);
        for line in text.lines() {
            assert!(line.contains('='), "line `{}` is not key=value", line);
        }
        assert!(text.contains("edges_ingested=10"));
        assert!(text.contains("throughput=123.456"));
    }
}
