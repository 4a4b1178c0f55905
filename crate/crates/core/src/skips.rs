//! Skips (jumps) of the ⌈log₂ p⌉-regular circulant graph and the
//! arithmetic derived from them.
//!
//! The skips are obtained by repeated halving of `p` with rounding up, so
//! `skips[q] = p` and `skips[0] = 1`. Every rank `0 <= r < p` is a sum of
//! distinct skips; the greedy decomposition from the largest skip down is
//! the canonical one, and its smallest index is the rank's baseblock.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::MAX_PROCS;

/// Skip table for a fixed processor count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipTable {
    p: usize,
    q: usize,
    skips: Vec<usize>,
}

impl SkipTable {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::ZeroProcessors);
        }
        if p > MAX_PROCS {
            return Err(Error::TooManyProcessors(p));
        }
        let q = ceil_log2(p);
        let mut skips = vec![0; q + 1];
        skips[q] = p;
        for k in (0..q).rev() {
            skips[k] = skips[k + 1] - skips[k + 1] / 2;
        }
        Ok(SkipTable { p, q, skips })
    }

    /// Number of processors.
    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of rounds per phase, ⌈log₂ p⌉.
    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    /// `skips[k]` for `0 <= k <= q`.
    #[inline]
    pub fn skip(&self, k: usize) -> usize {
        self.skips[k]
    }

    /// All `q + 1` skips, `skips[q] = p` included.
    pub fn skips(&self) -> &[usize] {
        &self.skips
    }

    pub fn is_power_of_two(&self) -> bool {
        self.p.is_power_of_two()
    }

    pub fn check_rank(&self, r: usize) -> Result<()> {
        if r < self.p {
            Ok(())
        } else {
            Err(Error::RankOutOfRange { rank: r, p: self.p })
        }
    }

    /// Processor that `r` sends to in round `k`.
    #[inline]
    pub fn to_proc(&self, r: usize, k: usize) -> usize {
        let t = r + self.skips[k];
        if t >= self.p {
            t - self.p
        } else {
            t
        }
    }

    /// Processor that `r` receives from in round `k`.
    #[inline]
    pub fn from_proc(&self, r: usize, k: usize) -> usize {
        let s = self.skips[k];
        if r >= s {
            r - s
        } else {
            r + self.p - s
        }
    }

    /// Smallest skip index in the canonical skip sequence of `r`, or `q`
    /// for the root `r = 0`.
    pub fn baseblock(&self, r: usize) -> usize {
        debug_assert!(r < self.p);
        let mut r = r;
        let mut k = self.q;
        while k > 0 {
            k -= 1;
            let s = self.skips[k];
            if s == r {
                return k;
            } else if s < r {
                r -= s;
            }
        }
        self.q
    }

    /// Greedy decomposition of `r` into distinct skips, smallest index first.
    pub fn canonical_skip_sequence(&self, r: usize) -> SkipSequence {
        debug_assert!(r < self.p);
        let mut indices = Vec::new();
        let mut rest = r;
        for k in (0..self.q).rev() {
            if rest == 0 {
                break;
            }
            if self.skips[k] <= rest {
                rest -= self.skips[k];
                indices.push(k);
            }
        }
        debug_assert_eq!(rest, 0);
        indices.reverse();
        SkipSequence { indices, target: r }
    }
}

/// Strictly increasing skip indices summing to `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipSequence {
    pub indices: Vec<usize>,
    pub target: usize,
}

impl SkipSequence {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.indices.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn sum(&self, table: &SkipTable) -> usize {
        self.indices.iter().map(|&e| table.skip(e)).sum()
    }
}

/// ⌈log₂ p⌉ with `ceil_log2(1) = 0`.
pub fn ceil_log2(p: usize) -> usize {
    debug_assert!(p >= 1);
    (usize::BITS - (p - 1).leading_zeros()) as usize
}
