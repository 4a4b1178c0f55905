//! Round-lockstep simulation of the schedule-driven broadcast and
//! all-to-all broadcast.
//!
//! Every round is atomic: all processors decide what to send, all messages
//! are delivered, then all processors advance their schedules by `q`.
//! Messages carry payload tokens only; the receiver picks the slot from its
//! own receive schedule.

mod allgather;
mod broadcast;

use serde::Serialize;

use crate::Block;

pub use allgather::{run_allgatherv, AllgatherWorld, SizeShape};
pub use broadcast::{run_broadcast, SimWorld};

/// Payload token of block `block` contributed by `root`.
pub fn token(root: usize, block: usize) -> u64 {
    // splitmix64 finaliser over the packed coordinates.
    let mut z = (root as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(block as u64)
        .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Number of leading rounds without communication so that the
/// `n - 1 + q` real rounds end on a phase boundary.
pub fn virtual_rounds(n: usize, q: usize) -> usize {
    if q == 0 {
        return 0;
    }
    (q - (n - 1 + q) % q) % q
}

/// Shifts a schedule as if `x` virtual rounds had already run: entries
/// before position `x` move one phase ahead.
pub fn adjust_schedule(blocks: &mut [Block], x: usize) {
    let q = blocks.len() as Block;
    let x_b = x as Block;
    debug_assert!(x == 0 || x_b < q);
    for (i, v) in blocks.iter_mut().enumerate() {
        if i < x {
            *v += q - x_b;
        } else {
            *v -= x_b;
        }
    }
}

/// Maps a schedule entry to a buffer slot: negative entries are skipped and
/// entries past the last block use the last block.
#[inline]
pub(crate) fn slot(block: Block, n: usize) -> Option<usize> {
    (block >= 0).then(|| (block as usize).min(n - 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimFailure {
    /// A processor was scheduled to send a block it does not hold.
    SendMissing { round: usize, rank: usize, block: usize },
    /// A processor expected a block and nothing arrived.
    NothingReceived { round: usize, rank: usize, block: usize },
    /// A message arrived that the receiver's schedule does not expect.
    Unexpected { round: usize, rank: usize, from: usize },
    /// Two messages for one receiver in one round.
    PortConflict { round: usize, rank: usize },
    /// The payload is not the block the receiver's schedule names.
    WrongBlock { round: usize, rank: usize, root: usize, block: usize },
    /// A filled slot would be overwritten with a different payload.
    Overwrite { round: usize, rank: usize, root: usize, block: usize },
    /// Packed and unpacked entry counts disagree.
    PackMismatch { round: usize, rank: usize, sent: usize, expected: usize },
    /// A slot is empty or wrong after the final round.
    Incomplete { rank: usize, root: usize, block: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoggedMessage {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    /// Payload entries carried; 1 for broadcast.
    pub entries: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Keep every message in `SimResult::log`.
    pub keep_log: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimResult {
    pub kind: &'static str,
    pub p: usize,
    pub n: usize,
    pub root: Option<usize>,
    /// Rounds in which at least one message was sent.
    pub rounds: usize,
    pub messages_total: usize,
    pub correct: bool,
    pub failures: Vec<SimFailure>,
    pub round_messages: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<LoggedMessage>>,
}

/// Per-round bookkeeping shared by both worlds.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    pub round_messages: Vec<usize>,
    pub messages_total: usize,
    pub failures: Vec<SimFailure>,
    pub log: Option<Vec<LoggedMessage>>,
}

impl Tally {
    pub fn new(opts: &SimOptions) -> Self {
        Tally {
            log: opts.keep_log.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn record(&mut self, msg: LoggedMessage) {
        self.messages_total += 1;
        if let Some(log) = &mut self.log {
            log.push(msg);
        }
    }

    pub fn active_rounds(&self) -> usize {
        self.round_messages.iter().filter(|&&m| m > 0).count()
    }
}
