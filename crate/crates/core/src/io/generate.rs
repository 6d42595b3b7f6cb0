//! Random-walk query generator.
//!
//! A query is a weakly connected subgraph extracted by a random walk over
//! the undirected view of the whole stream file's graph (edge directions
//! are kept in the result, the walk just ignores them). Its timing order is
//! derived from the subgraph's own edge timestamps, so a generated query is
//! always satisfiable by its own embedding:
//!
//! * `full` — every pair ordered by the embedding's `(timestamp, seq)`;
//! * `empty` — no constraints;
//! * `random` — draw a random permutation of the edges and order a pair iff
//!   the permutation and the embedding timestamps agree on it.

use std::collections::HashMap;

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ModelError, QueryGraph, QueryGraphBuilder, StreamEdge, VertexId};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("stream is empty")]
    EmptyStream,
    #[error("size must be at least 1")]
    SizeZero,
    #[error("no weakly connected subgraph of {0} edges found in {1} walk restarts")]
    NoConnectedSubgraph(usize, usize),
    #[error("generated subgraph was rejected: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    Full,
    Empty,
    Random,
}

impl std::str::FromStr for TimingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(TimingMode::Full),
            "empty" => Ok(TimingMode::Empty),
            "random" => Ok(TimingMode::Random),
            other => Err(format!("unknown timing mode `{}`", other)),
        }
    }
}

pub const DEFAULT_WALK_RESTARTS: usize = 1000;

/// Extracts a `size`-edge weakly connected subgraph by random walk and
/// turns it into a query with the requested timing mode. Deterministic for
/// a fixed seed.
pub fn generate_query(
    stream: &[StreamEdge],
    size: usize,
    mode: TimingMode,
    seed: u64,
) -> Result<QueryGraph, GenError> {
    generate_query_with_restarts(stream, size, mode, seed, DEFAULT_WALK_RESTARTS)
}

pub fn generate_query_with_restarts(
    stream: &[StreamEdge],
    size: usize,
    mode: TimingMode,
    seed: u64,
    restarts: usize,
) -> Result<QueryGraph, GenError> {
    if stream.is_empty() {
        return Err(GenError::EmptyStream);
    }
    if size == 0 {
        return Err(GenError::SizeZero);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut incident: HashMap<VertexId, Vec<usize>> = HashMap::new();
    for (i, e) in stream.iter().enumerate() {
        incident.entry(e.src_id).or_default().push(i);
        incident.entry(e.dst_id).or_default().push(i);
    }
    let mut chosen = walk(stream, &incident, size, &mut rng, restarts)?;
    chosen.sort_by_key(|&i| stream[i].order_key());
    let picked: Vec<StreamEdge> = chosen.iter().map(|&i| stream[i]).collect();

    let mut b = QueryGraphBuilder::new();
    let mut vmap: HashMap<VertexId, u64> = HashMap::new();
    let mut next_v = 0u64;
    for e in &picked {
        for (id, label) in [(e.src_id, e.src_label), (e.dst_id, e.dst_label)] {
            vmap.entry(id).or_insert_with(|| {
                next_v += 1;
                b.vertex(next_v, label);
                next_v
            });
        }
    }
    for (x, e) in picked.iter().enumerate() {
        b.edge((x + 1) as u32, vmap[&e.src_id], vmap[&e.dst_id], e.edge_label);
    }
    match mode {
        TimingMode::Empty => {}
        TimingMode::Full => {
            // Edges are already in (timestamp, seq) order.
            for i in 0..picked.len() {
                for j in (i + 1)..picked.len() {
                    b.timing((i + 1) as u32, (j + 1) as u32);
                }
            }
        }
        TimingMode::Random => {
            let mut perm: Vec<usize> = (0..picked.len()).collect();
            // Fisher-Yates under the seeded generator.
            for i in (1..perm.len()).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut pos = vec![0usize; perm.len()];
            for (p, &x) in perm.iter().enumerate() {
                pos[x] = p;
            }
            for i in 0..picked.len() {
                for j in 0..picked.len() {
                    if pos[i] < pos[j] && picked[i].order_key() < picked[j].order_key() {
                        b.timing((i + 1) as u32, (j + 1) as u32);
                    }
                }
            }
        }
    }
    Ok(b.build()?)
}

fn walk(
    stream: &[StreamEdge],
    incident: &HashMap<VertexId, Vec<usize>>,
    size: usize,
    rng: &mut ChaCha8Rng,
    restarts: usize,
) -> Result<Vec<usize>, GenError> {
    for _ in 0..restarts {
        let start = rng.random_range(0..stream.len());
        let mut chosen = vec![start];
        let mut at = if rng.random_bool(0.5) {
            stream[start].src_id
        } else {
            stream[start].dst_id
        };
        let budget = size.saturating_mul(50).max(200);
        for _ in 0..budget {
            if chosen.len() == size {
                return Ok(chosen);
            }
            let Some(next) = incident[&at].choose(rng).copied() else {
                break;
            };
            if !chosen.contains(&next) {
                chosen.push(next);
            }
            let e = &stream[next];
            at = if e.src_id == at { e.dst_id } else { e.src_id };
        }
        if chosen.len() == size {
            return Ok(chosen);
        }
    }
    Err(GenError::NoConnectedSubgraph(size, restarts))
}
