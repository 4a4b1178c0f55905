use circulant_bcast::recv::recv_blocks_into;
use circulant_bcast::send::send_blocks_into;
use circulant_bcast::{
    recv_schedule, send_schedule, Block, DfsCounters, SendState, SkipIndexList, SkipTable, MAX_Q,
};
use proptest::prelude::*;

fn recv_of(t: &SkipTable, r: usize) -> (Vec<Block>, usize, DfsCounters) {
    let mut out = vec![0; t.q()];
    let mut c = DfsCounters::default();
    let b = recv_blocks_into(t, r, &mut out, &mut c);
    (out, b, c)
}

fn check_recv_invariants(t: &SkipTable, r: usize, blocks: &[Block], b: usize, c: &DfsCounters) {
    let q = t.q();
    let qb = q as Block;
    let mut got = blocks.to_vec();
    got.sort_unstable();
    let mut want: Vec<Block> = (-qb..0).collect();
    if r != 0 {
        want.retain(|&v| v != b as Block - qb);
        want.push(b as Block);
    }
    want.sort_unstable();
    assert_eq!(got, want, "p={} r={r}", t.p());
    assert_eq!(c.accepted as usize, q);
    assert!(c.calls as usize <= 2 * q, "p={} r={r} calls={}", t.p(), c.calls);
    assert!(c.inadmissible as usize <= 2 * q, "p={} r={r} inadmissible={}", t.p(), c.inadmissible);
    if r > 0 {
        let e = t.canonical_skip_sequence(r).last().unwrap();
        assert_eq!(blocks[e], b as Block, "baseblock arrives in round e, p={} r={r}", t.p());
    }
}

fn check_send_against_oracle(t: &SkipTable, r: usize) -> u32 {
    let mut send = vec![0; t.q()];
    let v = send_blocks_into(t, r, &mut send);
    for k in 0..t.q() {
        let (nb, _, _) = recv_of(t, t.to_proc(r, k));
        assert_eq!(send[k], nb[k], "p={} r={r} k={k}", t.p());
    }
    if r > 0 {
        assert_eq!(send[0], t.baseblock(r) as Block - t.q() as Block);
    }
    assert!(v <= 4, "p={} r={r} violations={v}", t.p());
    v
}

#[test]
fn recv_invariants_exhaustive_small() {
    for p in 1..=1100 {
        let t = SkipTable::new(p).unwrap();
        for r in 0..p {
            let (blocks, b, c) = recv_of(&t, r);
            check_recv_invariants(&t, r, &blocks, b, &c);
        }
    }
}

#[test]
fn send_matches_neighbour_recv_exhaustive_small() {
    let mut hist = [0u64; 5];
    for p in 1..=700 {
        let t = SkipTable::new(p).unwrap();
        for r in 0..p {
            hist[check_send_against_oracle(&t, r) as usize] += 1;
        }
    }
    assert!(hist[3] > 0, "some ranks need three fallbacks: {hist:?}");
}

#[test]
fn inadmissible_iterations_can_exceed_q() {
    // The loose "at most q non-admissible iterations" does not hold; 2q does.
    let t = SkipTable::new(2052).unwrap();
    let (_, _, c) = recv_of(&t, 2);
    assert_eq!(t.q(), 12);
    assert_eq!(c.inadmissible, 22);
}

#[test]
fn root_receives_only_next_phase_blocks() {
    for p in [2, 3, 17, 100, 1 << 12, 5000] {
        let t = SkipTable::new(p).unwrap();
        let (blocks, b, _) = recv_of(&t, 0);
        assert_eq!(b, t.q());
        assert!(blocks.iter().all(|&v| v < 0));
    }
}

/// Closed form for powers of two: the block sent in round k is the next set bit of
/// `r | p` at or above bit k; bit q stands for the processor's baseblock.
fn power_of_two_send(q: usize, r: usize, k: usize) -> Block {
    if r == 0 {
        return k as Block;
    }
    let bits = r | (1 << q);
    let bit = (k..=q).find(|i| bits >> i & 1 == 1).unwrap();
    if bit == q {
        r.trailing_zeros() as Block
    } else {
        bit as Block - q as Block
    }
}

#[test]
fn power_of_two_closed_form() {
    for q in 1..=14 {
        let t = SkipTable::new(1 << q).unwrap();
        for r in 0..t.p() {
            let s = send_schedule(&t, r).unwrap();
            assert_eq!(s.violations, 0, "q={q} r={r}");
            let want: Vec<Block> = (0..q).map(|k| power_of_two_send(q, r, k)).collect();
            assert_eq!(s.blocks, want, "q={q} r={r}");
        }
    }
}

#[test]
fn power_of_two_bound_stays_a_power_of_two() {
    let t = SkipTable::new(16).unwrap();
    for r in 1..16 {
        let mut st = SendState::new(&t, r);
        for k in (1..4).rev() {
            assert!(st.bound.is_power_of_two(), "r={r} k={k} e={}", st.bound);
            let (_, br) = st.step(k);
            assert!(!br.is_violation());
        }
    }
}

#[test]
fn loop_invariant_virtual_rank_below_bound() {
    for p in 2..=2000 {
        let t = SkipTable::new(p).unwrap();
        for r in 1..p {
            let mut st = SendState::new(&t, r);
            for k in (1..t.q()).rev() {
                assert!(st.virtual_rank < st.bound, "p={p} r={r} k={k}");
                st.step(k);
            }
            assert!(st.violations <= 4);
        }
    }
}

#[test]
fn send_schedule_examples() {
    let t = SkipTable::new(17).unwrap();
    assert_eq!(send_schedule(&t, 0).unwrap().blocks, [0, 1, 2, 3, 4]);
    assert_eq!(send_schedule(&t, 1).unwrap().blocks, [-5, -5, 0, 0, 0]);
    assert_eq!(send_schedule(&t, 8).unwrap().blocks, [-3, -3, -3, -2, -3]);
    assert!(send_schedule(&t, 17).is_err());
}

#[test]
fn recv_schedule_examples() {
    let t = SkipTable::new(17).unwrap();
    let s = recv_schedule(&t, 9).unwrap();
    assert_eq!((s.baseblock, s.blocks.as_slice()), (4, &[-3, -4, -2, -5, 4][..]));
    assert!(recv_schedule(&t, 100).is_err());
}

#[test]
fn sixteen_recv_agrees_with_sends() {
    let t = SkipTable::new(16).unwrap();
    let r5 = recv_schedule(&t, 5).unwrap();
    for k in 0..4 {
        let from = t.from_proc(5, k);
        assert_eq!(r5.blocks[k], send_schedule(&t, from).unwrap().blocks[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn schedules_for_random_large_p(p in 2usize..(1 << 36), r_frac in 0.0f64..1.0) {
        let t = SkipTable::new(p).unwrap();
        let r = ((p as f64) * r_frac) as usize % p;
        let (blocks, b, c) = recv_of(&t, r);
        check_recv_invariants(&t, r, &blocks, b, &c);
        check_send_against_oracle(&t, r);
    }

    #[test]
    fn list_stays_consistent(q in 0usize..=MAX_Q, picks in proptest::collection::vec(0usize..1000, 0..70)) {
        let mut list = SkipIndexList::new(q);
        let mut live: Vec<usize> = (0..=q).rev().collect();
        for pick in picks {
            if live.is_empty() {
                break;
            }
            let e = live.remove(pick % live.len());
            list.unlink(e);
            prop_assert!(list.is_consistent());
            prop_assert_eq!(list.iter().collect::<Vec<_>>(), live.clone());
            for w in live.windows(2) {
                prop_assert_eq!(list.next(w[0]), Some(w[1]));
                prop_assert_eq!(list.prev(w[1]), Some(w[0]));
            }
        }
    }
}
