//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use circulant_bcast::bench::bench_schedules;
use circulant_bcast::sim::{run_allgatherv, run_broadcast, SimOptions, SizeShape};
use circulant_bcast::skips::ceil_log2;
use circulant_bcast::verify::{check_family, verify_range, RangeOptions, RangeSummary, ScheduleFamily};
use circulant_bcast::{SkipTable, MAX_SEND_VIOLATIONS};

type Outcome = Result<String, String>;

// Reference schedule for 17 processors: rows b, recv[0..5], send[0..5].
const TABLE_P17: [[i64; 17]; 11] = [
    [5, 0, 1, 2, 0, 3, 0, 1, 2, 4, 0, 1, 2, 0, 3, 0, 1],
    [-4, 0, -5, -4, -3, -5, -2, -5, -4, -3, -1, -5, -4, -3, -5, -2, -5],
    [-5, -4, 1, -5, -4, -3, -3, -2, -5, -4, -3, -1, -5, -4, -3, -3, -2],
    [-2, -2, -2, 2, 0, -4, -4, -3, -2, -2, -4, -3, -1, -1, -4, -4, -3],
    [-1, -3, -3, -2, -2, 3, 0, 1, 2, -5, -2, -2, -2, -2, -1, -1, -1],
    [-3, -1, -1, -1, -1, -1, -1, -1, -1, 4, 0, 1, 2, 0, 3, 0, 1],
    [0, -5, -4, -3, -5, -2, -5, -4, -3, -1, -5, -4, -3, -5, -2, -5, -4],
    [1, -5, -4, -3, -3, -2, -5, -4, -3, -1, -5, -4, -3, -3, -2, -5, -4],
    [2, 0, -4, -4, -3, -2, -2, -4, -3, -1, -1, -4, -4, -3, -2, -2, -2],
    [3, 0, 1, 2, -5, -2, -2, -2, -2, -1, -1, -1, -1, -3, -3, -2, -2],
    [4, 0, 1, 2, 0, 3, 0, 1, -3, -1, -1, -1, -1, -1, -1, -1, -1],
];

// Reference for 16 processors: baseblocks and blocks sent in round 0.
const TABLE_P16_BASEBLOCK: [i64; 16] = [4, 0, 1, 0, 2, 0, 1, 0, 3, 0, 1, 0, 2, 0, 1, 0];
const TABLE_P16_ROUND0: [i64; 16] = [4, 0, 1, 0, 2, 0, 1, 0, 3, 0, 1, 0, 2, 0, 1, 0];

fn cbcast(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cbcast"))
        .args(args)
        .output()
        .expect("run cbcast");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn parse_rows(text: &str) -> Vec<(String, Vec<i64>)> {
    text.lines()
        .filter_map(|line| {
            let (label, rest) = line.split_once(':')?;
            let cells = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<Vec<i64>, _>>()
                .ok()?;
            Some((label.trim().to_string(), cells))
        })
        .collect()
}

fn golden_tables() -> Outcome {
    let start = Instant::now();
    let (code, text) = cbcast(&["schedule", "--p", "17"]);
    if code != 0 {
        return Err(format!("schedule --p 17 exited {code}"));
    }
    let rows = parse_rows(&text);
    let labels: Vec<String> = ["b"]
        .into_iter()
        .map(String::from)
        .chain((0..5).map(|k| format!("recv[{k}]")))
        .chain((0..5).map(|k| format!("send[{k}]")))
        .collect();
    if rows.len() != 12 || rows[0].1 != (0..17).collect::<Vec<i64>>() {
        return Err(format!("unexpected layout: {} rows", rows.len()));
    }
    let mut cells = 0;
    for (i, (label, want)) in labels.iter().zip(TABLE_P17.iter()).enumerate() {
        let (got_label, got) = &rows[i + 1];
        if got_label != label {
            return Err(format!("row {i}: label {got_label} != {label}"));
        }
        for (r, (g, w)) in got.iter().zip(want).enumerate() {
            if g != w {
                return Err(format!("p=17 {label} r={r}: got {g}, want {w}"));
            }
            cells += 1;
        }
    }
    if cells != 11 * 17 {
        return Err(format!("compared {cells} cells"));
    }

    let (code, text) = cbcast(&["schedule", "--p", "16"]);
    if code != 0 {
        return Err(format!("schedule --p 16 exited {code}"));
    }
    let rows = parse_rows(&text);
    let find = |l: &str| rows.iter().find(|(x, _)| x == l).map(|(_, v)| v.clone());
    let b = find("b").ok_or("no b row for p=16")?;
    let send0: Vec<i64> = find("send[0]")
        .ok_or("no send[0] row for p=16")?
        .iter()
        .map(|v| v + 4)
        .collect();
    if b != TABLE_P16_BASEBLOCK {
        return Err(format!("p=16 baseblocks {b:?}"));
    }
    if send0 != TABLE_P16_ROUND0 {
        return Err(format!("p=16 round-0 sends (+q) {send0:?}"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("187 cells of p=17 and 32 cells of p=16 match in {elapsed:.2?}"))
}

fn sweep(lo: usize, hi: usize) -> Result<RangeSummary, String> {
    let summary = verify_range(lo, hi, &RangeOptions::default(), |_| {}).map_err(|e| e.to_string())?;
    if let Some(f) = &summary.first_failure {
        return Err(format!(
            "p={} fails: {:?}",
            f.p,
            f.first_counterexample()
        ));
    }
    if summary.checked != hi - lo + 1 {
        return Err(format!("checked {} of {}", summary.checked, hi - lo + 1));
    }
    Ok(summary)
}

fn exhaustive_and_bounds() -> (Outcome, Outcome) {
    let ranges = [
        (1, 4096),
        ((1 << 16) - 64, (1 << 16) + 64),
        ((1 << 20) - 8, (1 << 20) + 8),
    ];
    let start = Instant::now();
    let mut summaries = Vec::new();
    for (lo, hi) in ranges {
        match sweep(lo, hi) {
            Ok(s) => summaries.push(s),
            Err(e) => return (Err(format!("[{lo}, {hi}]: {e}")), Err("sweep incomplete".into())),
        }
    }
    let checked: usize = summaries.iter().map(|s| s.checked).sum();
    let c2 = Ok(format!(
        "{checked} processor counts pass all four conditions in {:.1?}",
        start.elapsed()
    ));

    let over = summaries.iter().map(|s| s.max_calls_over_2q).max().unwrap();
    let max_calls = summaries.iter().map(|s| s.max_dfs_calls).max().unwrap();
    let max_viol = summaries.iter().map(|s| s.max_violations).max().unwrap();
    let mut hist = vec![0u64; 5];
    for s in &summaries {
        for (i, c) in s.violation_histogram.iter().enumerate() {
            if i >= hist.len() {
                hist.resize(i + 1, 0);
            }
            hist[i] += c;
        }
    }
    let c3 = if over <= 0 && max_viol <= MAX_SEND_VIOLATIONS {
        Ok(format!(
            "max(calls - 2q) = {over}, max calls = {max_calls}, max violations = {max_viol}, violations histogram {hist:?}"
        ))
    } else {
        Err(format!("max(calls - 2q) = {over}, max violations = {max_viol}"))
    };
    (c2, c3)
}

fn round_optimality() -> Outcome {
    let ps = [2, 3, 4, 5, 7, 8, 9, 16, 17, 31, 32, 33, 64, 127, 128, 129, 1000];
    let ns = [1, 2, 3, 7, 8, 9, 64];
    let opts = SimOptions::default();
    let mut runs = 0;
    for p in ps {
        for n in ns {
            for root in [0, 1, p - 1] {
                let res = run_broadcast(p, n, root, &opts).map_err(|e| e.to_string())?;
                let want = n - 1 + ceil_log2(p);
                if !res.correct || res.rounds != want {
                    return Err(format!(
                        "p={p} n={n} root={root}: correct={} rounds={} want {want}; {:?}",
                        res.correct,
                        res.rounds,
                        res.failures.first()
                    ));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} broadcasts correct in exactly n-1+q rounds"))
}

fn allgather_shapes() -> Outcome {
    let opts = SimOptions::default();
    let mut runs = 0;
    for shape in [SizeShape::Uniform, SizeShape::Mod3, SizeShape::Degenerate] {
        for p in [8, 17, 64] {
            for n in [1, 4, 9] {
                let sizes = shape.sizes(p, 36 * p);
                let res = run_allgatherv(p, n, &sizes, &opts).map_err(|e| e.to_string())?;
                if !res.correct {
                    return Err(format!("{shape} p={p} n={n}: {:?}", res.failures.first()));
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} all-to-all broadcasts deliver every buffer"))
}

/// Average per-processor time over `ps`, each the best of `reps` runs.
fn per_proc_us(ps: impl IntoIterator<Item = usize>, reps: usize) -> f64 {
    let (mut sum, mut count) = (0.0, 0);
    for p in ps {
        let best = (0..reps)
            .map(|_| bench_schedules(p, 1).unwrap().per_proc_us)
            .fold(f64::INFINITY, f64::min);
        sum += best;
        count += 1;
    }
    sum / count as f64
}

fn scaling() -> Outcome {
    let start = Instant::now();
    // Warm up.
    per_proc_us(1000..1010, 1);
    let small = per_proc_us(1000..=1063, 5);
    let large = per_proc_us([1_048_000, 1_048_576, 1_049_000], 2);
    let ratio = large / small;
    let msg = format!(
        "per-proc {small:.3}us at p~2^10, {large:.3}us at p~2^20, ratio {ratio:.2} (limit 3.00) in {:.1?}",
        start.elapsed()
    );
    if ratio <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fault_sensitivity() -> Outcome {
    let t = SkipTable::new(17).unwrap();
    let q = t.q() as i64;
    let (family, _) = ScheduleFamily::compute(&t);
    let mut mutations = 0;
    for r in 0..17 {
        for k in 0..t.q() {
            for is_recv in [true, false] {
                let orig = if is_recv { family.recv(r, k) } else { family.send(r, k) };
                for v in (-q - 1..=q).filter(|&v| v != orig) {
                    let mut bad = family.clone();
                    if is_recv {
                        bad.set_recv(r, k, v);
                    } else {
                        bad.set_send(r, k, v);
                    }
                    let rep = check_family(&t, &bad);
                    // Condition 1 pins a receive entry, condition 2 a send entry.
                    let cond = if is_recv { 0 } else { 1 };
                    let cx = rep.conditions[cond].counterexample;
                    let ok = !rep.pass
                        && cx.is_some_and(|c| c.r == r && c.k == k && c.actual == v && c.expected == Some(orig));
                    if !ok {
                        return Err(format!(
                            "{} r={r} k={k} {orig}->{v}: pass={} cx={cx:?}",
                            if is_recv { "recv" } else { "send" },
                            rep.pass
                        ));
                    }
                    mutations += 1;
                }
            }
        }
    }
    Ok(format!("{} entries x {} values: {mutations} mutations all caught at the mutated coordinate", 17 * 5 * 2, 2 * q + 1))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "golden tables", golden_tables()));
    let (c2, c3) = exhaustive_and_bounds();
    results.push((2, "exhaustive correctness", c2));
    results.push((3, "instrumentation bounds", c3));
    results.push((4, "round optimality", round_optimality()));
    results.push((5, "all-to-all correctness", allgather_shapes()));
    results.push((6, "scaling", scaling()));
    results.push((7, "fault sensitivity", fault_sensitivity()));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {n} ({name}): PASS - {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL - {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
