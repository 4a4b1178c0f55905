//! Receive schedules by depth-first search with removal over skip indices.
//!
//! For processor `r` the search runs on the virtual rank `p + r` so that
//! `r - skips[k]` never goes negative. For each round `k` it greedily finds
//! the largest canonical path sum `r' <= p + r - skips[k]` that still
//! reaches `p + r` through `skips[k + 1]`, using only skip indices not
//! accepted in an earlier round. The smallest index of that path is the
//! block for round `k` and is unlinked from the index list.

use serde::Serialize;

use crate::error::Result;
use crate::skips::SkipTable;
use crate::{Block, MAX_Q};

const NIL: i8 = -1;

/// Live skip indices `0..=q` kept in decreasing order.
///
/// `next` goes towards smaller indices and `prev` towards larger ones, with
/// `-1` acting as the sentinel at both ends. Unlinked nodes keep their own
/// links, so a scan that is positioned on a removed index can still step
/// off it.
#[derive(Clone)]
pub struct SkipIndexList {
    // Slot 0 holds the sentinel, slot e + 1 holds index e.
    next: [i8; MAX_Q + 2],
    prev: [i8; MAX_Q + 2],
    q: usize,
    unlinks: u32,
}

impl SkipIndexList {
    pub fn new(q: usize) -> Self {
        assert!(q <= MAX_Q, "q = {q} exceeds {MAX_Q}");
        let mut next = [NIL; MAX_Q + 2];
        let mut prev = [NIL; MAX_Q + 2];
        for e in 0..=q {
            next[e + 1] = e as i8 - 1;
            prev[e + 1] = e as i8 + 1;
        }
        prev[q + 1] = NIL;
        next[0] = q as i8;
        prev[0] = 0;
        SkipIndexList {
            next,
            prev,
            q,
            unlinks: 0,
        }
    }

    #[inline]
    fn slot(e: i8) -> usize {
        (e + 1) as usize
    }

    #[inline]
    fn decode(v: i8) -> Option<usize> {
        (v >= 0).then_some(v as usize)
    }

    /// Largest live index.
    #[inline]
    pub fn first(&self) -> Option<usize> {
        Self::decode(self.next[0])
    }

    /// Largest live index below `e`.
    #[inline]
    pub fn next(&self, e: usize) -> Option<usize> {
        Self::decode(self.next[e + 1])
    }

    /// Smallest live index above `e`.
    #[inline]
    pub fn prev(&self, e: usize) -> Option<usize> {
        Self::decode(self.prev[e + 1])
    }

    /// Removes `e` in O(1). `e` must be live.
    #[inline]
    pub fn unlink(&mut self, e: usize) {
        let n = self.next[e + 1];
        let p = self.prev[e + 1];
        self.next[Self::slot(p)] = n;
        self.prev[Self::slot(n)] = p;
        self.unlinks += 1;
    }

    /// Number of `unlink` calls so far.
    pub fn unlinks(&self) -> u32 {
        self.unlinks
    }

    pub fn max_index(&self) -> usize {
        self.q
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.first(), move |&e| self.next(e))
    }

    /// Checks that forward and backward links agree for every live index.
    pub fn is_consistent(&self) -> bool {
        let mut last = NIL;
        let mut cur = self.next[0];
        let mut steps = 0;
        while cur != NIL {
            if self.prev[Self::slot(cur)] != last || (last != NIL && cur >= last) {
                return false;
            }
            steps += 1;
            if steps > self.q + 1 {
                return false;
            }
            last = cur;
            cur = self.next[Self::slot(cur)];
        }
        self.prev[0] == last
    }
}

/// Work done by one receive schedule computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DfsCounters {
    /// Recursive calls, the top-level call excluded.
    pub calls: u32,
    /// While-loop iterations over all calls.
    pub iterations: u32,
    /// Iterations where the skip index was not admissible.
    pub inadmissible: u32,
    /// Skip indices accepted as a receive block.
    pub accepted: u32,
}

impl DfsCounters {
    pub fn max(self, other: DfsCounters) -> DfsCounters {
        DfsCounters {
            calls: self.calls.max(other.calls),
            iterations: self.iterations.max(other.iterations),
            inadmissible: self.inadmissible.max(other.inadmissible),
            accepted: self.accepted.max(other.accepted),
        }
    }
}

struct Search<'a> {
    skips: &'a [usize],
    target: usize,
    // Sum of the skips on the most recently accepted path.
    last_sum: usize,
    list: &'a mut SkipIndexList,
    out: &'a mut [usize],
    counters: &'a mut DfsCounters,
}

impl Search<'_> {
    /// `r' <= target - skips[k + 1]`, false once `k + 1` runs past `q`.
    #[inline]
    fn reaches_through_next(&self, path: usize, k: usize) -> bool {
        match self.skips.get(k + 1) {
            Some(&s) => path + s <= self.target,
            None => false,
        }
    }

    fn dfs(&mut self, path: usize, start: usize, mut k: usize) -> usize {
        if !self.reaches_through_next(path, k) {
            return k;
        }
        let mut e = Some(start);
        while let Some(idx) = e {
            self.counters.iterations += 1;
            let extended = path + self.skips[idx];
            if extended + self.skips[k] <= self.target {
                self.counters.calls += 1;
                k = self.dfs(extended, idx, k);
                if self.reaches_through_next(path, k) && self.last_sum > extended {
                    self.last_sum = extended;
                    self.out[k] = idx;
                    k += 1;
                    self.counters.accepted += 1;
                    self.list.unlink(idx);
                }
            } else {
                self.counters.inadmissible += 1;
            }
            e = self.list.next(idx);
        }
        k
    }
}

/// Runs the search for virtual rank `virtual_rank = p + r` with the
/// baseblock of `r` already unlinked from `list`.
///
/// Fills `raw[0..q]` with skip indices from `{0..=q}` minus the baseblock
/// and returns the final round counter, which is `q` for valid input.
pub fn dfs_blocks(
    table: &SkipTable,
    virtual_rank: usize,
    list: &mut SkipIndexList,
    raw: &mut [usize],
    counters: &mut DfsCounters,
) -> usize {
    let q = table.q();
    let mut search = Search {
        skips: table.skips(),
        target: virtual_rank,
        last_sum: table.p() + table.p(),
        list,
        out: raw,
        counters,
    };
    search.dfs(0, q, 0)
}

/// Computes the receive blocks of `r` into `out[0..q]` and returns its
/// baseblock. `r` must be a valid rank.
pub fn recv_blocks_into(
    table: &SkipTable,
    r: usize,
    out: &mut [Block],
    counters: &mut DfsCounters,
) -> usize {
    let q = table.q();
    debug_assert!(r < table.p());
    debug_assert!(out.len() >= q);
    let b = table.baseblock(r);
    if q == 0 {
        return b;
    }
    let mut list = SkipIndexList::new(q);
    list.unlink(b);
    let mut raw = [0usize; MAX_Q];
    let k = dfs_blocks(table, table.p() + r, &mut list, &mut raw[..q], counters);
    debug_assert_eq!(k, q, "search for r={r} ended at round {k}");
    for (dst, &e) in out.iter_mut().zip(&raw[..q]) {
        *dst = if e == q { b as Block } else { e as Block - q as Block };
    }
    b
}

/// Blocks received by one processor in the rounds of the first phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecvSchedule {
    pub rank: usize,
    pub baseblock: usize,
    pub blocks: Vec<Block>,
    pub counters: DfsCounters,
}

pub fn recv_schedule(table: &SkipTable, r: usize) -> Result<RecvSchedule> {
    table.check_rank(r)?;
    let mut blocks = vec![0; table.q()];
    let mut counters = DfsCounters::default();
    let baseblock = recv_blocks_into(table, r, &mut blocks, &mut counters);
    Ok(RecvSchedule {
        rank: r,
        baseblock,
        blocks,
        counters,
    })
}
