//! Exhaustive checking of complete schedule families.
//!
//! A family holds the receive and send schedules of every rank for one
//! processor count. Four conditions make a family usable for broadcast:
//!
//! 1. `recv[k]` of `r` equals `send[k]` of its round-`k` from-processor.
//! 2. `send[k]` of `r` equals `recv[k]` of its round-`k` to-processor.
//! 3. The `q` receive blocks of `r` are `{-1, ..., -q} \ {b - q} ∪ {b}`
//!    (`{-1, ..., -q}` for the root).
//! 4. Every `send[k]` of a non-root rank is `b - q` or some `recv[j]`
//!    with `j < k`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::recv::{recv_blocks_into, DfsCounters};
use crate::send::send_blocks_into;
use crate::skips::SkipTable;
use crate::{Block, MAX_SEND_VIOLATIONS};

/// Receive and send schedules of all ranks for one processor count.
///
/// Entries are stored as `i8`; every schedule entry lies in `[-q, q]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleFamily {
    p: usize,
    q: usize,
    baseblocks: Vec<u8>,
    recv: Vec<i8>,
    send: Vec<i8>,
}

/// Instrumentation gathered while computing a family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FamilyStats {
    /// Per-field maximum over all ranks.
    pub max_dfs: DfsCounters,
    pub max_violations: u32,
    /// `violation_histogram[v]` counts ranks with exactly `v` violations.
    pub violation_histogram: Vec<u64>,
}

impl FamilyStats {
    fn single(dfs: DfsCounters, violations: u32) -> Self {
        let mut violation_histogram = vec![0; violations as usize + 1];
        violation_histogram[violations as usize] = 1;
        FamilyStats {
            max_dfs: dfs,
            max_violations: violations,
            violation_histogram,
        }
    }

    fn merge(mut self, other: FamilyStats) -> Self {
        self.max_dfs = self.max_dfs.max(other.max_dfs);
        self.max_violations = self.max_violations.max(other.max_violations);
        if self.violation_histogram.len() < other.violation_histogram.len() {
            self.violation_histogram
                .resize(other.violation_histogram.len(), 0);
        }
        for (a, b) in self
            .violation_histogram
            .iter_mut()
            .zip(&other.violation_histogram)
        {
            *a += b;
        }
        self
    }
}

impl ScheduleFamily {
    /// Computes every rank's schedules, in parallel over ranks.
    pub fn compute(table: &SkipTable) -> (Self, FamilyStats) {
        let (p, q) = (table.p(), table.q());
        let mut family = ScheduleFamily {
            p,
            q,
            baseblocks: vec![0; p],
            recv: vec![0; p * q],
            send: vec![0; p * q],
        };
        if q == 0 {
            family.baseblocks[0] = 0;
            return (family, FamilyStats::single(DfsCounters::default(), 0));
        }
        let stats = family
            .recv
            .par_chunks_mut(q)
            .zip(family.send.par_chunks_mut(q))
            .zip(family.baseblocks.par_iter_mut())
            .enumerate()
            .map(|(r, ((recv, send), base))| {
                let mut buf = [0 as Block; crate::MAX_Q];
                let mut counters = DfsCounters::default();
                *base = recv_blocks_into(table, r, &mut buf, &mut counters) as u8;
                for (dst, &v) in recv.iter_mut().zip(&buf[..q]) {
                    *dst = v as i8;
                }
                let violations = send_blocks_into(table, r, &mut buf);
                for (dst, &v) in send.iter_mut().zip(&buf[..q]) {
                    *dst = v as i8;
                }
                FamilyStats::single(counters, violations)
            })
            .reduce(FamilyStats::default, FamilyStats::merge);
        (family, stats)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn baseblock(&self, r: usize) -> usize {
        self.baseblocks[r] as usize
    }

    pub fn recv(&self, r: usize, k: usize) -> Block {
        self.recv[r * self.q + k] as Block
    }

    pub fn send(&self, r: usize, k: usize) -> Block {
        self.send[r * self.q + k] as Block
    }

    pub fn set_recv(&mut self, r: usize, k: usize, v: Block) {
        self.recv[r * self.q + k] = v as i8;
    }

    pub fn set_send(&mut self, r: usize, k: usize, v: Block) {
        self.send[r * self.q + k] = v as i8;
    }

    pub fn recv_row(&self, r: usize) -> Vec<Block> {
        (0..self.q).map(|k| self.recv(r, k)).collect()
    }

    pub fn send_row(&self, r: usize) -> Vec<Block> {
        (0..self.q).map(|k| self.send(r, k)).collect()
    }
}

/// Coordinates of the first violation of a condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub r: usize,
    pub k: usize,
    /// `None` for condition 4, where several values would be acceptable.
    pub expected: Option<Block>,
    pub actual: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionOutcome {
    pub condition: u8,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
}

impl ConditionOutcome {
    fn from_first(condition: u8, first: Option<Counterexample>) -> Self {
        ConditionOutcome {
            condition,
            passed: first.is_none(),
            counterexample: first,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyStats {
    pub max_violations: u32,
    pub max_dfs_calls: u32,
    pub max_dfs_inadmissible: u32,
    pub violation_histogram: Vec<u64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub p: usize,
    pub q: usize,
    pub pass: bool,
    pub conditions: [ConditionOutcome; 4],
    pub stats: VerifyStats,
}

impl VerificationReport {
    pub fn first_counterexample(&self) -> Option<(u8, Counterexample)> {
        self.conditions
            .iter()
            .find_map(|c| c.counterexample.map(|cx| (c.condition, cx)))
    }

    /// Recursive calls within `2q` and violations within four.
    pub fn within_bounds(&self) -> bool {
        self.stats.max_dfs_calls as usize <= 2 * self.q
            && self.stats.max_violations <= MAX_SEND_VIOLATIONS
    }
}

fn first_in_ranks<F>(p: usize, f: F) -> Option<Counterexample>
where
    F: Fn(usize) -> Option<Counterexample> + Sync + Send,
{
    (0..p).into_par_iter().find_map_first(f)
}

fn check_matching(family: &ScheduleFamily, table: &SkipTable) -> [ConditionOutcome; 2] {
    let q = family.q;
    let c1 = first_in_ranks(family.p, |r| {
        (0..q).find_map(|k| {
            let expected = family.send(table.from_proc(r, k), k);
            let actual = family.recv(r, k);
            (expected != actual).then_some(Counterexample {
                r,
                k,
                expected: Some(expected),
                actual,
            })
        })
    });
    let c2 = first_in_ranks(family.p, |r| {
        (0..q).find_map(|k| {
            let expected = family.recv(table.to_proc(r, k), k);
            let actual = family.send(r, k);
            (expected != actual).then_some(Counterexample {
                r,
                k,
                expected: Some(expected),
                actual,
            })
        })
    });
    [
        ConditionOutcome::from_first(1, c1),
        ConditionOutcome::from_first(2, c2),
    ]
}

fn check_block_set(family: &ScheduleFamily) -> ConditionOutcome {
    let q = family.q as Block;
    let first = first_in_ranks(family.p, |r| {
        let b = family.baseblock(r) as Block;
        // Expected set as a bitmask over offsets v + q in [0, 2q).
        let mut expected: u128 = 0;
        for v in -q..0 {
            expected |= 1 << (v + q);
        }
        if r != 0 {
            expected &= !(1 << (b - q + q));
            expected |= 1 << (b + q);
        }
        let mut seen: u128 = 0;
        for k in 0..family.q {
            let actual = family.recv(r, k);
            let bit = actual + q;
            let ok = (0..2 * q).contains(&bit) && expected & (1 << bit) != 0 && seen & (1 << bit) == 0;
            if !ok {
                let missing = (expected & !seen).trailing_zeros() as Block - q;
                return Some(Counterexample {
                    r,
                    k,
                    expected: Some(missing),
                    actual,
                });
            }
            seen |= 1 << bit;
        }
        None
    });
    ConditionOutcome::from_first(3, first)
}

fn check_received_before(family: &ScheduleFamily) -> ConditionOutcome {
    let q = family.q;
    // The root owns every block.
    let first = first_in_ranks(family.p, |r| {
        if r == 0 {
            return None;
        }
        let owned = family.baseblock(r) as Block - q as Block;
        (0..q).find_map(|k| {
            let actual = family.send(r, k);
            let ok = actual == owned || (0..k).any(|j| family.recv(r, j) == actual);
            (!ok).then_some(Counterexample {
                r,
                k,
                expected: None,
                actual,
            })
        })
    });
    ConditionOutcome::from_first(4, first)
}

/// Checks all four conditions on an arbitrary family.
pub fn check_family(table: &SkipTable, family: &ScheduleFamily) -> VerificationReport {
    assert_eq!(table.p(), family.p, "family and table disagree on p");
    let [c1, c2] = check_matching(family, table);
    let c3 = check_block_set(family);
    let c4 = check_received_before(family);
    let conditions = [c1, c2, c3, c4];
    VerificationReport {
        p: family.p,
        q: family.q,
        pass: conditions.iter().all(|c| c.passed),
        conditions,
        stats: VerifyStats::default(),
    }
}

/// Computes and checks the schedules of every rank for `p` processors.
pub fn verify_all(p: usize) -> Result<VerificationReport> {
    let start = Instant::now();
    let table = SkipTable::new(p)?;
    let (family, stats) = ScheduleFamily::compute(&table);
    let mut report = check_family(&table, &family);
    report.stats = VerifyStats {
        max_violations: stats.max_violations,
        max_dfs_calls: stats.max_dfs.calls,
        max_dfs_inadmissible: stats.max_dfs.inadmissible,
        violation_histogram: stats.violation_histogram,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    debug!("p={p} pass={} in {:.3}s", report.pass, report.stats.wall_time_s);
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct RangeOptions {
    /// Keep going after a failing `p`.
    pub keep_going: bool,
    /// Text file holding the last completed `p`; read on start, rewritten
    /// after every chunk.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RangeSummary {
    pub lo: usize,
    pub hi: usize,
    /// First `p` actually checked, later than `lo` when resuming.
    pub start: usize,
    pub checked: usize,
    pub passed: usize,
    pub max_violations: u32,
    /// Largest `calls - 2q` seen; never positive when the bound holds.
    pub max_calls_over_2q: i64,
    pub max_dfs_calls: u32,
    pub violation_histogram: Vec<u64>,
    pub failures: Vec<usize>,
    pub first_failure: Option<VerificationReport>,
    pub wall_time_s: f64,
}

impl RangeSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn absorb(&mut self, report: &VerificationReport) {
        self.checked += 1;
        self.max_violations = self.max_violations.max(report.stats.max_violations);
        self.max_dfs_calls = self.max_dfs_calls.max(report.stats.max_dfs_calls);
        let over = report.stats.max_dfs_calls as i64 - 2 * report.q as i64;
        self.max_calls_over_2q = if self.checked == 1 {
            over
        } else {
            self.max_calls_over_2q.max(over)
        };
        let hist = &report.stats.violation_histogram;
        if self.violation_histogram.len() < hist.len() {
            self.violation_histogram.resize(hist.len(), 0);
        }
        for (a, b) in self.violation_histogram.iter_mut().zip(hist) {
            *a += b;
        }
        if report.pass {
            self.passed += 1;
        } else {
            self.failures.push(report.p);
            if self.first_failure.is_none() {
                self.first_failure = Some(report.clone());
            }
        }
    }
}

/// Reads the last completed `p` from a checkpoint file, if present.
pub fn read_checkpoint(path: &Path) -> Result<Option<usize>> {
    match fs::read_to_string(path) {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Checkpoint(format!("{}: not a processor count", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::Checkpoint(format!("{}: {e}", path.display()))),
    }
}

pub fn write_checkpoint(path: &Path, done: usize) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| Error::Checkpoint(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    writeln!(f, "{done}").map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

// Ranks per chunk; bounds memory and checkpoint granularity.
const CHUNK_RANKS: usize = 1 << 22;

/// Verifies every `p` in `lo..=hi`, handing each report to `on_report` in
/// increasing order of `p`.
pub fn verify_range<F>(lo: usize, hi: usize, opts: &RangeOptions, mut on_report: F) -> Result<RangeSummary>
where
    F: FnMut(&VerificationReport),
{
    if lo == 0 || lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    SkipTable::new(hi)?;
    let start_time = Instant::now();
    let mut start = lo;
    if let Some(path) = &opts.checkpoint {
        if let Some(done) = read_checkpoint(path)? {
            if done >= lo {
                start = done + 1;
                info!("resuming at p={start} from {}", path.display());
            }
        }
    }
    let mut summary = RangeSummary {
        lo,
        hi,
        start,
        ..Default::default()
    };

    let mut next = start;
    while next <= hi {
        let mut end = next;
        let mut ranks = next;
        while end < hi && ranks + end + 1 <= CHUNK_RANKS {
            end += 1;
            ranks += end;
        }
        // Large families parallelise internally; small ones across p.
        let reports: Vec<VerificationReport> = if next >= 1 << 16 {
            (next..=end).map(verify_all).collect::<Result<_>>()?
        } else {
            (next..=end)
                .into_par_iter()
                .map(verify_all)
                .collect::<Result<_>>()?
        };
        for report in &reports {
            summary.absorb(report);
            on_report(report);
        }
        if let Some(path) = &opts.checkpoint {
            write_checkpoint(path, end)?;
        }
        if !summary.all_passed() && !opts.keep_going {
            break;
        }
        next = end + 1;
    }
    summary.wall_time_s = start_time.elapsed().as_secs_f64();
    Ok(summary)
}
