use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::recv::recv_schedule;
use crate::sim::{adjust_schedule, slot, token, virtual_rounds, LoggedMessage, SimFailure, SimOptions, SimResult, Tally};
use crate::skips::SkipTable;
use crate::Block;

/// How `m` input elements are spread over the `p` contributing processors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeShape {
    /// `m / p` elements each.
    Uniform,
    /// `(i mod 3) * m / p` elements for processor `i`.
    Mod3,
    /// Processor 0 contributes all `m`, everyone else nothing.
    Degenerate,
}

impl SizeShape {
    pub fn sizes(self, p: usize, m: usize) -> Vec<usize> {
        match self {
            SizeShape::Uniform => vec![m / p; p],
            SizeShape::Mod3 => (0..p).map(|i| (i % 3) * m / p).collect(),
            SizeShape::Degenerate => {
                let mut v = vec![0; p];
                v[0] = m;
                v
            }
        }
    }
}

impl FromStr for SizeShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SizeShape::Uniform),
            "mod3" => Ok(SizeShape::Mod3),
            "degenerate" => Ok(SizeShape::Degenerate),
            _ => Err(format!("unknown size shape `{s}` (uniform, mod3, degenerate)")),
        }
    }
}

impl fmt::Display for SizeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeShape::Uniform => "uniform",
            SizeShape::Mod3 => "mod3",
            SizeShape::Degenerate => "degenerate",
        })
    }
}

/// Elements in block `i` when `m` elements are cut into `n` blocks.
fn block_elems(m: usize, n: usize, i: usize) -> usize {
    m / n + usize::from(i < m % n)
}

#[derive(Debug, Clone)]
struct Proc {
    // Row j holds the schedule for root j; flat p x q.
    recvblocks: Vec<Block>,
    sendblocks: Vec<Block>,
    // Row j holds the n blocks of root j; flat p x n.
    buffers: Vec<Option<u64>>,
}

struct Packed {
    from: usize,
    payload: Vec<u64>,
}

/// All `p` processors broadcasting their own `n` blocks simultaneously.
#[derive(Debug, Clone)]
pub struct AllgatherWorld {
    table: SkipTable,
    n: usize,
    sizes: Vec<usize>,
    procs: Vec<Proc>,
    round: usize,
    end: usize,
    tally: Tally,
}

impl AllgatherWorld {
    pub fn new(p: usize, n: usize, sizes: &[usize], opts: &SimOptions) -> Result<Self> {
        let table = SkipTable::new(p)?;
        if n == 0 {
            return Err(Error::ZeroBlocks);
        }
        if sizes.len() != p {
            return Err(Error::SizesLength {
                got: sizes.len(),
                expected: p,
            });
        }
        let q = table.q();
        let x = virtual_rounds(n, q);
        // The receive schedule of virtual rank v, shared by every processor
        // that needs it.
        let by_virtual: Vec<Vec<Block>> = (0..p)
            .map(|v| recv_schedule(&table, v).map(|s| s.blocks))
            .collect::<Result<_>>()?;

        let procs = (0..p)
            .map(|r| {
                let mut recvblocks = Vec::with_capacity(p * q);
                for j in 0..p {
                    recvblocks.extend_from_slice(&by_virtual[(r + p - j) % p]);
                }
                let mut sendblocks = vec![0; p * q];
                for j in 0..p {
                    for k in 0..q {
                        let f = table.from_proc(j, k);
                        sendblocks[j * q + k] = recvblocks[f * q + k];
                    }
                }
                if q > 0 {
                    for j in 0..p {
                        adjust_schedule(&mut recvblocks[j * q..(j + 1) * q], x);
                        adjust_schedule(&mut sendblocks[j * q..(j + 1) * q], x);
                    }
                }
                let mut buffers = vec![None; p * n];
                for (b, cell) in buffers[r * n..(r + 1) * n].iter_mut().enumerate() {
                    *cell = Some(token(r, b));
                }
                Proc {
                    recvblocks,
                    sendblocks,
                    buffers,
                }
            })
            .collect();
        let end = if q == 0 { x } else { n + q - 1 + x };
        Ok(AllgatherWorld {
            table,
            n,
            sizes: sizes.to_vec(),
            procs,
            round: x,
            end,
            tally: Tally::new(opts),
        })
    }

    pub fn p(&self) -> usize {
        self.table.p()
    }

    pub fn is_done(&self) -> bool {
        self.round >= self.end
    }

    pub fn step(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        let (p, q, n) = (self.p(), self.table.q(), self.n);
        let k = self.round % q;
        let round = self.round;
        let total: usize = self.sizes.iter().sum();

        let mut inbox: Vec<Option<Packed>> = (0..p).map(|_| None).collect();
        let mut sent = 0;
        for r in 0..p {
            let to = self.table.to_proc(r, k);
            let proc = &self.procs[r];
            let mut payload = Vec::new();
            let mut elems = 0;
            for j in (0..p).filter(|&j| j != to && self.sizes[j] > 0) {
                let Some(block) = slot(proc.sendblocks[j * q + k], n) else {
                    continue;
                };
                match proc.buffers[j * n + block] {
                    Some(tok) => {
                        payload.push(tok);
                        elems += block_elems(self.sizes[j], n, block);
                    }
                    None => self.tally.failures.push(SimFailure::SendMissing { round, rank: r, block }),
                }
            }
            debug_assert!(elems <= total - self.sizes[to]);
            if payload.is_empty() {
                continue;
            }
            if inbox[to].is_some() {
                self.tally.failures.push(SimFailure::PortConflict { round, rank: to });
            }
            self.tally.record(LoggedMessage {
                round,
                from: r,
                to,
                entries: payload.len(),
            });
            inbox[to] = Some(Packed { from: r, payload });
            sent += 1;
        }

        for (r, msg) in inbox.into_iter().enumerate() {
            let proc = &mut self.procs[r];
            let wanted: Vec<(usize, usize)> = (0..p)
                .filter(|&j| j != r && self.sizes[j] > 0)
                .filter_map(|j| slot(proc.recvblocks[j * q + k], n).map(|b| (j, b)))
                .collect();
            let payload = match msg {
                Some(m) if wanted.is_empty() => {
                    self.tally.failures.push(SimFailure::Unexpected {
                        round,
                        rank: r,
                        from: m.from,
                    });
                    continue;
                }
                Some(m) => m.payload,
                None => Vec::new(),
            };
            if payload.len() != wanted.len() {
                self.tally.failures.push(SimFailure::PackMismatch {
                    round,
                    rank: r,
                    sent: payload.len(),
                    expected: wanted.len(),
                });
                if payload.is_empty() {
                    for &(_, block) in &wanted {
                        self.tally.failures.push(SimFailure::NothingReceived { round, rank: r, block });
                    }
                }
            }
            for (&(root, block), tok) in wanted.iter().zip(payload) {
                if tok != token(root, block) {
                    self.tally.failures.push(SimFailure::WrongBlock { round, rank: r, root, block });
                }
                let cell = &mut proc.buffers[root * n + block];
                match cell {
                    Some(old) if *old != tok => {
                        self.tally.failures.push(SimFailure::Overwrite { round, rank: r, root, block });
                    }
                    _ => *cell = Some(tok),
                }
            }
        }

        let q_b = q as Block;
        for proc in &mut self.procs {
            for j in 0..p {
                proc.sendblocks[j * q + k] += q_b;
                proc.recvblocks[j * q + k] += q_b;
            }
        }
        self.tally.round_messages.push(sent);
        self.round += 1;
        true
    }

    pub fn finish(mut self) -> SimResult {
        while self.step() {}
        let n = self.n;
        for (r, proc) in self.procs.iter().enumerate() {
            for root in (0..self.p()).filter(|&j| self.sizes[j] > 0) {
                for block in 0..n {
                    if proc.buffers[root * n + block] != Some(token(root, block)) {
                        self.tally.failures.push(SimFailure::Incomplete { rank: r, root, block });
                    }
                }
            }
        }
        SimResult {
            kind: "allgatherv",
            p: self.p(),
            n,
            root: None,
            rounds: self.tally.active_rounds(),
            messages_total: self.tally.messages_total,
            correct: self.tally.failures.is_empty(),
            failures: self.tally.failures,
            round_messages: self.tally.round_messages,
            log: self.tally.log,
        }
    }
}

/// All-to-all broadcast of `n` blocks per processor; `sizes[j]` is the
/// element count contributed by processor `j`.
pub fn run_allgatherv(p: usize, n: usize, sizes: &[usize], opts: &SimOptions) -> Result<SimResult> {
    Ok(AllgatherWorld::new(p, n, sizes, opts)?.finish())
}
