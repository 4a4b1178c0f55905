//! Timing of full schedule computations for a processor count.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::recv::{recv_blocks_into, DfsCounters};
use crate::send::send_blocks_into;
use crate::skips::SkipTable;
use crate::{Block, MAX_Q};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub p: usize,
    pub q: usize,
    pub total_s: f64,
    /// Worker-time per processor: `total_s * workers / p`, in microseconds.
    pub per_proc_us: f64,
}

fn schedules_for(table: &SkipTable, r: usize) -> Block {
    let mut recv = [0 as Block; MAX_Q];
    let mut send = [0 as Block; MAX_Q];
    let mut counters = DfsCounters::default();
    recv_blocks_into(table, r, &mut recv, &mut counters);
    send_blocks_into(table, r, &mut send);
    black_box(&recv);
    black_box(&send);
    recv[0] ^ send[0]
}

/// Computes receive and send schedules for every rank of `p` processors.
/// With `workers > 1` ranks are spread over the current rayon pool.
pub fn bench_schedules(p: usize, workers: usize) -> Result<BenchRow> {
    let table = SkipTable::new(p)?;
    let start = Instant::now();
    let sink = if workers > 1 {
        (0..p)
            .into_par_iter()
            .map(|r| schedules_for(&table, r))
            .reduce(|| 0, |a, b| a ^ b)
    } else {
        (0..p).fold(0, |acc, r| acc ^ schedules_for(&table, r))
    };
    black_box(sink);
    let total_s = start.elapsed().as_secs_f64();
    Ok(BenchRow {
        p,
        q: table.q(),
        total_s,
        per_proc_us: total_s * workers.max(1) as f64 * 1e6 / p as f64,
    })
}
