//! Text fixture format for allow-lists:
//!
//! ```text
//! geom <T> <N1> <N2>
//! <keys of row 0, space separated>
//! <keys of row 1>
//! ...
//! ```
//!
//! One line per query row, possibly empty. Random families are sampled with
//! SplitMix64 (see [`crate::rng`]), stream = 1-based source frame.

use std::fmt::Write as _;

use super::{AllowList, Geometry};
use crate::error::{Error, Result};

pub fn write_allow_list(a: &AllowList) -> String {
    let g = a.geometry();
    let mut out = format!("geom {} {} {}\n", g.t, g.n1, g.n2);
    for row in a.rows() {
        let mut first = true;
        for k in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{k}").expect("write to String");
        }
        out.push('\n');
    }
    out
}

/// Every row, including the last, must be newline-terminated.
pub fn parse_allow_list(text: &str) -> Result<AllowList> {
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| Error::Format("allow-list text must end with a newline".into()))?;
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split_whitespace().collect();
    let g = match fields[..] {
        ["geom", t, n1, n2] => {
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad header {header:?}")))
            };
            Geometry::new(p(t)?, p(n1)?, p(n2)?)?
        }
        _ => return Err(Error::Format(format!("bad header {header:?}"))),
    };
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Format(format!("row {i}: bad index {s:?}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != g.total() {
        return Err(Error::Format(format!(
            "{} rows for {} queries",
            rows.len(),
            g.total()
        )));
    }
    AllowList::new(g, rows)
}
