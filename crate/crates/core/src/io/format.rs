//! Plain-text formats for streams and queries.
//!
//! Stream files start with the header `#stream v1`; each following line is
//! one edge, whitespace-separated:
//!
//! ```text
//! <timestamp> <src-id> <src-label> <dst-id> <dst-label> [<edge-label>]
//! ```
//!
//! Timestamps must be non-decreasing; arrival seq is assigned by line
//! order, starting at 1. `#` starts a comment.
//!
//! Query files have three line kinds (any order, `#` comments allowed):
//!
//! ```text
//! v <id> <label>
//! e <idx> <src-id> <dst-id> [<edge-label>|*]
//! t <idx> < <idx>
//! ```
//!
//! An edge label of `*` (or none) matches any stream edge label. Timing
//! lines declare that matches of the first edge must arrive strictly before
//! matches of the second.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{LabelInterner, ModelError, QueryGraph, QueryGraphBuilder, StreamEdge, Timestamp};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("line {0}: timestamp {1} is earlier than a previous edge")]
    TimestampRegression(usize, Timestamp),
    #[error("line {0}: self-loop on vertex {1}")]
    SelfLoop(usize, u64),
    #[error("missing `#stream v1` header")]
    MissingHeader,
    #[error("query invalid: {0}")]
    Query(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const STREAM_HEADER: &str = "#stream v1";

fn content(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Parses a whole stream file body. Edges get arrival seq 1, 2, ... in line
/// order.
pub fn parse_stream_str(
    text: &str,
    labels: &mut LabelInterner,
) -> Result<Vec<StreamEdge>, FormatError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(FormatError::MissingHeader),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.trim(),
        }
    };
    if header != STREAM_HEADER {
        return Err(FormatError::MissingHeader);
    }
    let mut out = Vec::new();
    let mut last_ts: Option<Timestamp> = None;
    let mut seq = 0u64;
    for (i, raw) in lines {
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(FormatError::Parse(
                no,
                format!("expected 5 or 6 fields, found {}", fields.len()),
            ));
        }
        let timestamp: Timestamp = fields[0]
            .parse()
            .map_err(|_| FormatError::Parse(no, format!("bad timestamp `{}`", fields[0])))?;
        if let Some(prev) = last_ts {
            if timestamp < prev {
                return Err(FormatError::TimestampRegression(no, timestamp));
            }
        }
        last_ts = Some(timestamp);
        let src_id: u64 = fields[1]
            .parse()
            .map_err(|_| FormatError::Parse(no, format!("bad source id `{}`", fields[1])))?;
        let dst_id: u64 = fields[3]
            .parse()
            .map_err(|_| FormatError::Parse(no, format!("bad target id `{}`", fields[3])))?;
        if src_id == dst_id {
            return Err(FormatError::SelfLoop(no, src_id));
        }
        let edge_label = match fields.get(5) {
            None => None,
            Some(&"*") => {
                return Err(FormatError::Parse(
                    no,
                    "`*` is reserved for query edge labels".into(),
                ))
            }
            Some(l) => Some(labels.intern(l)),
        };
        seq += 1;
        out.push(StreamEdge {
            seq,
            timestamp,
            src_id,
            dst_id,
            src_label: labels.intern(fields[2]),
            dst_label: labels.intern(fields[4]),
            edge_label,
        });
    }
    Ok(out)
}

pub fn read_stream(
    path: impl AsRef<Path>,
    labels: &mut LabelInterner,
) -> Result<Vec<StreamEdge>, FormatError> {
    parse_stream_str(&fs::read_to_string(path)?, labels)
}

pub fn serialize_stream(edges: &[StreamEdge], labels: &LabelInterner) -> String {
    let mut out = String::from(STREAM_HEADER);
    out.push('\n');
    for e in edges {
        out.push_str(&format!(
            "{} {} {} {} {}",
            e.timestamp,
            e.src_id,
            labels.name(e.src_label),
            e.dst_id,
            labels.name(e.dst_label)
        ));
        if let Some(l) = e.edge_label {
            out.push(' ');
            out.push_str(labels.name(l));
        }
        out.push('\n');
    }
    out
}

/// Parses a query file into a validated query graph.
pub fn parse_query_str(
    text: &str,
    labels: &mut LabelInterner,
) -> Result<QueryGraph, FormatError> {
    let mut b = QueryGraphBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = content(raw);
        if line.is_empty() {
            continue;
        }
        let no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "v" => {
                if fields.len() != 3 {
                    return Err(FormatError::Parse(no, "expected `v <id> <label>`".into()));
                }
                let id: u64 = fields[1]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad vertex id `{}`", fields[1])))?;
                b.vertex(id, labels.intern(fields[2]));
            }
            "e" => {
                if fields.len() != 4 && fields.len() != 5 {
                    return Err(FormatError::Parse(
                        no,
                        "expected `e <idx> <src> <dst> [<label>|*]`".into(),
                    ));
                }
                let num: u32 = fields[1]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad edge index `{}`", fields[1])))?;
                let src: u64 = fields[2]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad source id `{}`", fields[2])))?;
                let dst: u64 = fields[3]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad target id `{}`", fields[3])))?;
                let label = match fields.get(4) {
                    None | Some(&"*") => None,
                    Some(l) => Some(labels.intern(l)),
                };
                b.edge(num, src, dst, label);
            }
            "t" => {
                // `t <a> < <b>`
                if fields.len() != 4 || fields[2] != "<" {
                    return Err(FormatError::Parse(no, "expected `t <idx> < <idx>`".into()));
                }
                let a: u32 = fields[1]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad edge index `{}`", fields[1])))?;
                let c: u32 = fields[3]
                    .parse()
                    .map_err(|_| FormatError::Parse(no, format!("bad edge index `{}`", fields[3])))?;
                b.timing(a, c);
            }
            other => {
                return Err(FormatError::Parse(
                    no,
                    format!("unknown line kind `{}`", other),
                ));
            }
        }
    }
    Ok(b.build()?)
}

pub fn read_query(
    path: impl AsRef<Path>,
    labels: &mut LabelInterner,
) -> Result<QueryGraph, FormatError> {
    parse_query_str(&fs::read_to_string(path)?, labels)
}

pub fn serialize_query(q: &QueryGraph, labels: &LabelInterner) -> String {
    let mut out = String::new();
    for v in q.vertices() {
        out.push_str(&format!("v {} {}\n", v.id, labels.name(v.label)));
    }
    for e in q.edges() {
        out.push_str(&format!(
            "e {} {} {}",
            e.num,
            q.vertices()[e.src].id,
            q.vertices()[e.dst].id
        ));
        if let Some(l) = e.edge_label {
            out.push(' ');
            out.push_str(labels.name(l));
        }
        out.push('\n');
    }
    for &(a, bb) in q.timing() {
        out.push_str(&format!(
            "t {} < {}\n",
            q.edges()[a].num,
            q.edges()[bb].num
        ));
    }
    out
}
