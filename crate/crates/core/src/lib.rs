//! Round-optimal broadcast and all-to-all broadcast schedules on
//! ⌈log₂ p⌉-regular circulant graphs.
//!
//! Every processor computes its own receive and send schedule of `q`
//! entries in O(log p) steps, without communication. Block indices in a
//! schedule are relative to the first phase: negative entries are blocks
//! that arrive one phase later and are shifted by `q` per phase.
//!
//! Ranks and skips are `usize`; the search works on virtual ranks up to
//! `3p`, so processor counts are limited to [`MAX_PROCS`].

pub mod bench;
pub mod error;
pub mod recv;
pub mod send;
pub mod sim;
pub mod skips;
pub mod verify;

pub use error::{Error, Result};
pub use recv::{dfs_blocks, recv_schedule, DfsCounters, RecvSchedule, SkipIndexList};
pub use send::{send_schedule, Branch, SendSchedule, SendState};
pub use sim::{run_allgatherv, run_broadcast, SimOptions, SimResult, SizeShape};
pub use skips::{SkipSequence, SkipTable};
pub use verify::{verify_all, verify_range, RangeOptions, RangeSummary, VerificationReport};

/// Schedule entry: a block index relative to the first phase.
pub type Block = i64;

/// Largest supported processor count (2⁶² on 64-bit targets).
pub const MAX_PROCS: usize = usize::MAX >> 2;

/// Largest round count, ⌈log₂ MAX_PROCS⌉.
pub const MAX_Q: usize = usize::BITS as usize - 2;

/// Upper bound on receive-schedule fallbacks per send schedule.
pub const MAX_SEND_VIOLATIONS: u32 = 4;
