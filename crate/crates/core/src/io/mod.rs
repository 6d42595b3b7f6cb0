//! File formats, the random-walk query generator, run metrics, and the
//! engine/reference differential used by the `check` command.

pub mod check;
pub mod format;
pub mod generate;
pub mod metrics;

pub use check::{differential_run, DiffOutcome};
pub use format::{
    parse_query_str, parse_stream_str, read_query, read_stream, serialize_query, serialize_stream,
    FormatError,
};
pub use generate::{generate_query, GenError, TimingMode};
pub use metrics::RunMetrics;
