use crate::error::{Error, Result};
use crate::recv::recv_schedule;
use crate::send::send_schedule;
use crate::sim::{adjust_schedule, slot, token, virtual_rounds, LoggedMessage, SimFailure, SimOptions, SimResult, Tally};
use crate::skips::SkipTable;
use crate::Block;

#[derive(Debug, Clone)]
struct Proc {
    recv: Vec<Block>,
    send: Vec<Block>,
    baseblock: usize,
    buffer: Vec<Option<u64>>,
}

/// `p` processors broadcasting `n` blocks from `root`.
///
/// Ranks are renumbered so that the root is virtual rank 0; schedules are
/// those of the virtual rank, communication partners are actual ranks.
#[derive(Debug, Clone)]
pub struct SimWorld {
    table: SkipTable,
    n: usize,
    root: usize,
    procs: Vec<Proc>,
    round: usize,
    end: usize,
    tally: Tally,
}

impl SimWorld {
    pub fn new(p: usize, n: usize, root: usize, opts: &SimOptions) -> Result<Self> {
        let table = SkipTable::new(p)?;
        if n == 0 {
            return Err(Error::ZeroBlocks);
        }
        table.check_rank(root)?;
        let q = table.q();
        let x = virtual_rounds(n, q);
        let procs = (0..p)
            .map(|r| {
                let v = (r + p - root) % p;
                let mut recv = recv_schedule(&table, v)?;
                let mut send = send_schedule(&table, v)?;
                adjust_schedule(&mut recv.blocks, x);
                adjust_schedule(&mut send.blocks, x);
                let buffer = if r == root {
                    (0..n).map(|j| Some(token(root, j))).collect()
                } else {
                    vec![None; n]
                };
                Ok(Proc {
                    recv: recv.blocks,
                    send: send.blocks,
                    baseblock: recv.baseblock,
                    buffer,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let end = if q == 0 { x } else { n + q - 1 + x };
        Ok(SimWorld {
            table,
            n,
            root,
            procs,
            round: x,
            end,
            tally: Tally::new(opts),
        })
    }

    pub fn p(&self) -> usize {
        self.table.p()
    }

    pub fn q(&self) -> usize {
        self.table.q()
    }

    /// Schedule-relative round index, starting at the number of virtual rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_done(&self) -> bool {
        self.round >= self.end
    }

    /// Baseblock of actual rank `r` (that of its virtual rank).
    pub fn baseblock(&self, r: usize) -> usize {
        self.procs[r].baseblock
    }

    /// Block indices currently held by actual rank `r`.
    pub fn holdings(&self, r: usize) -> Vec<usize> {
        let proc = &self.procs[r];
        (0..self.n).filter(|&j| proc.buffer[j].is_some()).collect()
    }

    /// Runs one communication round; returns false once finished.
    pub fn step(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        let (p, q, n) = (self.p(), self.q(), self.n);
        let k = self.round % q;
        let round = self.round;

        let mut inbox: Vec<Option<(usize, u64)>> = vec![None; p];
        let mut sent = 0;
        for r in 0..p {
            let to = self.table.to_proc(r, k);
            let proc = &self.procs[r];
            if to == self.root {
                continue;
            }
            let Some(block) = slot(proc.send[k], n) else {
                continue;
            };
            let Some(payload) = proc.buffer[block] else {
                self.tally.failures.push(SimFailure::SendMissing { round, rank: r, block });
                continue;
            };
            if inbox[to].is_some() {
                self.tally.failures.push(SimFailure::PortConflict { round, rank: to });
            }
            inbox[to] = Some((r, payload));
            sent += 1;
            self.tally.record(LoggedMessage {
                round,
                from: r,
                to,
                entries: 1,
            });
        }

        for (r, msg) in inbox.into_iter().enumerate() {
            let expected = if r == self.root {
                None
            } else {
                slot(self.procs[r].recv[k], n)
            };
            match (expected, msg) {
                (None, None) => {}
                (None, Some((from, _))) => {
                    self.tally.failures.push(SimFailure::Unexpected { round, rank: r, from });
                }
                (Some(block), None) => {
                    self.tally.failures.push(SimFailure::NothingReceived { round, rank: r, block });
                }
                (Some(block), Some((_, payload))) => {
                    let want = token(self.root, block);
                    let cell = &mut self.procs[r].buffer[block];
                    if payload != want {
                        self.tally.failures.push(SimFailure::WrongBlock {
                            round,
                            rank: r,
                            root: self.root,
                            block,
                        });
                    }
                    match cell {
                        Some(old) if *old != payload => {
                            self.tally.failures.push(SimFailure::Overwrite {
                                round,
                                rank: r,
                                root: self.root,
                                block,
                            });
                        }
                        _ => *cell = Some(payload),
                    }
                }
            }
        }

        let q_b = q as Block;
        for proc in &mut self.procs {
            proc.send[k] += q_b;
            proc.recv[k] += q_b;
        }
        self.tally.round_messages.push(sent);
        self.round += 1;
        true
    }

    /// Runs the remaining rounds and checks every buffer.
    pub fn finish(mut self) -> SimResult {
        while self.step() {}
        for (r, proc) in self.procs.iter().enumerate() {
            for (block, cell) in proc.buffer.iter().enumerate() {
                if *cell != Some(token(self.root, block)) {
                    self.tally.failures.push(SimFailure::Incomplete {
                        rank: r,
                        root: self.root,
                        block,
                    });
                }
            }
        }
        SimResult {
            kind: "broadcast",
            p: self.p(),
            n: self.n,
            root: Some(self.root),
            rounds: self.tally.active_rounds(),
            messages_total: self.tally.messages_total,
            correct: self.tally.failures.is_empty(),
            failures: self.tally.failures,
            round_messages: self.tally.round_messages,
            log: self.tally.log,
        }
    }
}

/// Broadcasts `n` blocks from `root` over `p` processors.
pub fn run_broadcast(p: usize, n: usize, root: usize, opts: &SimOptions) -> Result<SimResult> {
    Ok(SimWorld::new(p, n, root, opts)?.finish())
}
