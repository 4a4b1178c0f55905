//! Schedule tables in the row orientation used for side-by-side comparison:
//! one column per rank, one row per round.

use std::fmt::Write as _;

use circulant_bcast::{recv_schedule, send_schedule, Block, SkipTable};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RankSchedule {
    pub r: usize,
    pub b: usize,
    pub recv: Vec<Block>,
    pub send: Vec<Block>,
}

impl RankSchedule {
    pub fn compute(table: &SkipTable, r: usize) -> circulant_bcast::Result<Self> {
        let recv = recv_schedule(table, r)?;
        let send = send_schedule(table, r)?;
        Ok(RankSchedule {
            r,
            b: recv.baseblock,
            recv: recv.blocks,
            send: send.blocks,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct FamilyJson<'a> {
    pub p: usize,
    pub q: usize,
    pub skips: &'a [usize],
    pub ranks: &'a [RankSchedule],
}

pub fn text(table: &SkipTable, ranks: &[RankSchedule]) -> String {
    let q = table.q();
    let mut rows: Vec<(String, Vec<String>)> = Vec::with_capacity(2 * q + 2);
    rows.push(("r".into(), ranks.iter().map(|s| s.r.to_string()).collect()));
    rows.push(("b".into(), ranks.iter().map(|s| s.b.to_string()).collect()));
    for k in 0..q {
        rows.push((format!("recv[{k}]"), ranks.iter().map(|s| s.recv[k].to_string()).collect()));
    }
    for k in 0..q {
        rows.push((format!("send[{k}]"), ranks.iter().map(|s| s.send[k].to_string()).collect()));
    }

    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0) + 1;
    let cell_w = rows
        .iter()
        .flat_map(|(_, cells)| cells.iter().map(String::len))
        .max()
        .unwrap_or(1);
    let mut out = String::new();
    for (i, (label, cells)) in rows.iter().enumerate() {
        let _ = write!(out, "{:>label_w$}", format!("{label}:"));
        for c in cells {
            let _ = write!(out, " {c:>cell_w$}");
        }
        out.push('\n');
        if i == 1 || i == 1 + q {
            let _ = writeln!(out, "{}", "-".repeat(label_w + ranks.len() * (cell_w + 1)));
        }
    }
    out
}

pub fn csv(table: &SkipTable, ranks: &[RankSchedule]) -> String {
    let q = table.q();
    let mut out = String::from("r,b");
    for k in 0..q {
        let _ = write!(out, ",recv{k}");
    }
    for k in 0..q {
        let _ = write!(out, ",send{k}");
    }
    out.push('\n');
    for s in ranks {
        let _ = write!(out, "{},{}", s.r, s.b);
        for v in s.recv.iter().chain(&s.send) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses the text rendering back into rows of integers, keyed by label.
#[cfg(test)]
fn parse_text(text: &str) -> Vec<(String, Vec<i64>)> {
    text.lines()
        .filter_map(|line| {
            let (label, rest) = line.split_once(':')?;
            let cells = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<Vec<i64>, _>>()
                .ok()?;
            Some((label.trim().to_string(), cells))
        })
        .collect()
}
