//! Incremental time-constrained subgraph matching over streaming graphs.
//!
//! A continuous query engine that reports every occurrence of a labelled
//! directed pattern — together with a strict partial order over the arrival
//! times of its edges — inside a sliding window over an unbounded edge
//! stream. Instead of re-running subgraph isomorphism per snapshot, the
//! engine decomposes the query into timing-connected subqueries, maintains
//! partial matches incrementally in trie-compressed match stores, and
//! schedules insert/expiry transactions under a fine-grained lock protocol
//! that keeps concurrent execution equivalent to strict chronological
//! processing.
//!
//! Module map:
//!
//! * [`model`] — streams, windows, query graphs, partial matches, timing closure
//! * [`analysis`] — timing-connected subquery enumeration, greedy decomposition,
//!   join ordering, cost model
//! * [`mstree`] — the match-store tree (trie variant with parent links and
//!   per-level sibling lists)
//! * [`engine`] — expansion lists, the incremental insert/expire algorithms,
//!   and the uncompressed baseline store
//! * [`sched`] — item locks, chronological wait-lists, and the transaction
//!   runner
//! * [`oracle`] — brute-force per-snapshot reference matcher for differential
//!   testing
//! * [`io`] — file formats, the random-walk query generator, and run metrics

pub mod analysis;
pub mod engine;
pub mod io;
pub mod model;
pub mod mstree;
pub mod oracle;
pub mod sched;

pub use model::{
    LabelId, LabelInterner, PartialMatch, QueryGraph, SlidingWindow, StreamEdge, Timestamp,
    TimingClosure, VertexId,
};
