//! Send schedules computed directly from the skip structure.
//!
//! Walking the rounds from `q - 1` down to `1`, processor `r` tracks a
//! virtual rank `r'` and an exclusive upper bound `e` with `r' < e`. In
//! round `k` the range `[0, e)` splits into a lower part `[0, skips[k])`
//! and an upper part `[skips[k], e)`. Most rounds send the block `c`
//! carried from the previous round. When the block the destination is
//! missing cannot be inferred locally, the destination's receive schedule
//! is computed instead; such a round is a violation, and there are at
//! most four per processor.

use serde::Serialize;

use crate::error::Result;
use crate::recv::{recv_blocks_into, DfsCounters};
use crate::skips::SkipTable;
use crate::{Block, MAX_Q};

/// Blocks sent by one processor in the rounds of the first phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SendSchedule {
    pub rank: usize,
    pub baseblock: usize,
    pub blocks: Vec<Block>,
    pub violations: u32,
}

/// Which branch produced a send block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// The carried block `c` was sent.
    Carried,
    /// Special geometries where `skips[2] = 3` or `skips[3] = 5`.
    ViolationSmallSkips,
    /// Lower part, destination beyond the bound: `r' + skips[k] >= e`.
    ViolationLower,
    /// Upper part, `r' = skips[k]` and `r' + skips[k] > e`.
    ViolationUpper,
}

impl Branch {
    pub fn is_violation(self) -> bool {
        self != Branch::Carried
    }
}

/// Loop state of the send schedule computation for one processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SendState<'a> {
    table: &'a SkipTable,
    pub rank: usize,
    pub baseblock: usize,
    /// Virtual rank `r'`.
    pub virtual_rank: usize,
    /// Exclusive upper bound on `r'`.
    pub bound: usize,
    /// Block carried from the previous round.
    pub carried: Block,
    pub violations: u32,
}

impl<'a> SendState<'a> {
    /// State before round `q - 1` for a non-root rank.
    pub fn new(table: &'a SkipTable, r: usize) -> Self {
        debug_assert!(r > 0 && r < table.p());
        let baseblock = table.baseblock(r);
        SendState {
            table,
            rank: r,
            baseblock,
            virtual_rank: r,
            bound: table.p(),
            carried: baseblock as Block,
            violations: 0,
        }
    }

    fn neighbour_block(&mut self, k: usize) -> Block {
        let t = self.table.to_proc(self.rank, k);
        let mut blocks = [0 as Block; MAX_Q];
        let mut counters = DfsCounters::default();
        recv_blocks_into(self.table, t, &mut blocks, &mut counters);
        self.violations += 1;
        blocks[k]
    }

    /// Round `k` with the virtual rank in the lower part, `r' < skips[k]`.
    pub fn lower_step(&mut self, k: usize) -> (Block, Branch) {
        let s = self.table.skips();
        let (rp, e, c) = (self.virtual_rank, self.bound, self.carried);
        debug_assert!(k >= 1 && rp < s[k]);

        let branch = if e < s[k - 1] || (k == 1 && self.baseblock > 0) {
            Branch::Carried
        } else if rp == 0 && k == 2 {
            if e == 2 && s[2] == 3 {
                Branch::ViolationSmallSkips
            } else {
                Branch::Carried
            }
        } else if rp == 0 && s[k] == 5 {
            if e == 3 {
                Branch::ViolationSmallSkips
            } else {
                Branch::Carried
            }
        } else if rp + s[k] >= e {
            Branch::ViolationLower
        } else {
            Branch::Carried
        };
        let block = if branch.is_violation() {
            self.neighbour_block(k)
        } else {
            c
        };

        if self.bound > s[k] {
            self.bound = s[k];
        }
        (block, branch)
    }

    /// Round `k` with the virtual rank in the upper part, `r' >= skips[k]`.
    pub fn upper_step(&mut self, k: usize) -> (Block, Branch) {
        let s = self.table.skips();
        let q = self.table.q() as Block;
        debug_assert!(k >= 1 && self.virtual_rank >= s[k]);

        self.carried = k as Block - q;
        let (rp, e, c) = (self.virtual_rank, self.bound, self.carried);

        let branch = if k == 1 || rp > s[k] || e - s[k] < s[k - 1] {
            Branch::Carried
        } else if k == 2 {
            if s[2] == 3 && e == 5 {
                Branch::ViolationSmallSkips
            } else {
                Branch::Carried
            }
        } else if s[k] == 5 {
            if e == 8 {
                Branch::ViolationSmallSkips
            } else {
                Branch::Carried
            }
        } else if rp + s[k] > e {
            Branch::ViolationUpper
        } else {
            Branch::Carried
        };
        let block = if branch.is_violation() {
            self.neighbour_block(k)
        } else {
            c
        };

        self.virtual_rank -= s[k];
        self.bound -= s[k];
        (block, branch)
    }

    /// Dispatches round `k` to the lower or upper part.
    pub fn step(&mut self, k: usize) -> (Block, Branch) {
        debug_assert!(self.virtual_rank < self.bound);
        if self.virtual_rank < self.table.skip(k) {
            self.lower_step(k)
        } else {
            self.upper_step(k)
        }
    }
}

/// Computes the send blocks of `r` into `out[0..q]` and returns the number
/// of violations.
pub fn send_blocks_into(table: &SkipTable, r: usize, out: &mut [Block]) -> u32 {
    let q = table.q();
    debug_assert!(r < table.p());
    if r == 0 {
        for (k, dst) in out[..q].iter_mut().enumerate() {
            *dst = k as Block;
        }
        return 0;
    }
    let mut state = SendState::new(table, r);
    for k in (1..q).rev() {
        out[k] = state.step(k).0;
    }
    out[0] = state.baseblock as Block - q as Block;
    state.violations
}

pub fn send_schedule(table: &SkipTable, r: usize) -> Result<SendSchedule> {
    table.check_rank(r)?;
    let mut blocks = vec![0; table.q()];
    let violations = send_blocks_into(table, r, &mut blocks);
    Ok(SendSchedule {
        rank: r,
        baseblock: table.baseblock(r),
        blocks,
        violations,
    })
}
