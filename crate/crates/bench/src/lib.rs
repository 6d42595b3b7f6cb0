//! Workload builders shared by the benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tcmatch_core::io::{self, TimingMode};
use tcmatch_core::model::{QueryGraph, StreamEdge};

/// Random labelled stream in the same shape the test corpus uses: a small
/// vertex population with fixed per-vertex labels, mostly-increasing
/// timestamps, no self-loops.
pub fn synth_stream(n_edges: usize, n_vertices: u64, n_labels: u32, seed: u64) -> Vec<StreamEdge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = (0..n_vertices).map(|_| rng.random_range(0..n_labels)).collect();
    let mut t = 1i64;
    (1..=n_edges as u64)
        .map(|seq| {
            if rng.random_bool(0.8) {
                t += 1;
            }
            let src = rng.random_range(0..n_vertices);
            let mut dst = rng.random_range(0..n_vertices);
            while dst == src {
                dst = rng.random_range(0..n_vertices);
            }
            StreamEdge {
                seq,
                timestamp: t,
                src_id: src,
                dst_id: dst,
                src_label: labels[src as usize],
                dst_label: labels[dst as usize],
                edge_label: None,
            }
        })
        .collect()
}

pub fn synth_query(stream: &[StreamEdge], size: usize, seed: u64) -> QueryGraph {
    io::generate_query(stream, size, TimingMode::Random, seed).expect("query")
}
