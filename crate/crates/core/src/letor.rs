//! LETOR / SVMlight ranking text format:
//! `<rel> qid:<id> <fid>:<val> ... [# comment]`, feature ids 1-based.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{Query, QueryDataset};

struct Row {
    rel: f64,
    features: Vec<(usize, f64)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<(String, Row)>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut tokens = content.split_whitespace();
    let rel_tok = tokens.next().expect("non-empty line has a token");
    let rel: f64 = rel_tok.parse().map_err(|_| parse_err(line_no, format!("invalid relevance `{rel_tok}`")))?;
    if !rel.is_finite() {
        return Err(parse_err(line_no, "relevance must be finite"));
    }
    let qid = match tokens.next() {
        Some(t) => t
            .strip_prefix("qid:")
            .filter(|id| !id.is_empty())
            .ok_or_else(|| parse_err(line_no, format!("expected `qid:<id>`, found `{t}`")))?,
        None => return Err(parse_err(line_no, "missing qid")),
    };
    let mut features: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (fid, val) =
            tok.split_once(':').ok_or_else(|| parse_err(line_no, format!("expected `<fid>:<val>`, found `{tok}`")))?;
        let fid: usize = fid.parse().map_err(|_| parse_err(line_no, format!("invalid feature id `{fid}`")))?;
        if fid == 0 {
            return Err(parse_err(line_no, "feature ids are 1-based"));
        }
        let val: f64 = val.parse().map_err(|_| parse_err(line_no, format!("invalid feature value `{val}`")))?;
        if !val.is_finite() {
            return Err(parse_err(line_no, format!("feature {fid} is not finite")));
        }
        if features.iter().any(|&(f, _)| f == fid) {
            return Err(parse_err(line_no, format!("duplicate feature id {fid}")));
        }
        features.push((fid, val));
    }
    Ok(Some((qid.to_string(), Row { rel, features })))
}

/// Parses LETOR text. Lines are grouped by qid in order of first
/// appearance; every query gets dense features of width equal to the
/// largest feature id in the file, missing ids reading as 0.
pub fn letor_parse(text: &str) -> Result<QueryDataset> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    let mut d = 0;
    for (idx, line) in text.lines().enumerate() {
        if let Some((qid, row)) = parse_line(idx + 1, line)? {
            d = row.features.iter().map(|&(f, _)| f).fold(d, usize::max);
            groups
                .entry(qid.clone())
                .or_insert_with(|| {
                    order.push(qid);
                    Vec::new()
                })
                .push(row);
        }
    }
    let queries = order
        .into_iter()
        .map(|id| {
            let rows = groups.remove(&id).expect("grouped qid");
            let mut x = DMatrix::zeros(rows.len(), d);
            for (i, row) in rows.iter().enumerate() {
                for &(f, v) in &row.features {
                    x[(i, f - 1)] = v;
                }
            }
            let rel = rows.iter().map(|r| r.rel).collect();
            Query { id, features: x, judgments: Vec::new(), relevances: Some(rel) }
        })
        .collect();
    QueryDataset::new(queries)
}

/// Writes every feature with an explicit id. Queries without relevances
/// are written with relevance 0. Judgments are not part of the format.
pub fn letor_serialize(data: &QueryDataset) -> String {
    let mut out = String::new();
    for q in data.queries() {
        for i in 0..q.m() {
            let rel = q.relevances.as_ref().map_or(0.0, |r| r[i]);
            write!(out, "{rel} qid:{}", q.id).expect("write to String");
            for (c, v) in q.features.row(i).iter().enumerate() {
                write!(out, " {}:{v}", c + 1).expect("write to String");
            }
            out.push('\n');
        }
    }
    out
}
