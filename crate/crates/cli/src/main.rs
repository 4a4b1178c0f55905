mod render;

use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use circulant_bcast::bench::bench_schedules;
use circulant_bcast::sim::{run_allgatherv, run_broadcast, SimOptions, SizeShape};
use circulant_bcast::verify::{check_family, verify_range, RangeOptions, ScheduleFamily, VerificationReport};
use circulant_bcast::SkipTable;

use render::{FamilyJson, RankSchedule};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cbcast", version, about = "Round-optimal circulant broadcast schedules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the circulant skips for p processors.
    Skips {
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print baseblocks and receive/send schedules.
    Schedule {
        #[arg(long)]
        p: usize,
        /// Single rank; all ranks when omitted.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check the four schedule conditions for every p in a range.
    Verify(VerifyArgs),
    /// Simulate an n-block broadcast.
    Simulate {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        root: usize,
        /// Include every message in the output.
        #[arg(long)]
        log: bool,
    },
    /// Simulate an n-block all-to-all broadcast.
    Allgather {
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = SizeShape::Uniform)]
        sizes: SizeShape,
        /// Total input elements m spread according to --sizes.
        #[arg(long)]
        elements: Option<usize>,
        #[arg(long)]
        log: bool,
    },
    /// Time schedule computation for all ranks; CSV on stdout.
    Bench {
        /// Comma separated processor counts or lo:hi ranges.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<PSpec>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Inclusive range lo:hi.
    #[arg(long)]
    range: Range,
    #[arg(long)]
    jobs: Option<usize>,
    /// File holding the last completed p; resumes from it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue past failing p.
    #[arg(long)]
    keep_going: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Overwrite recv[k] of rank r with a wrong value before checking.
    #[arg(long, hide = true, value_name = "R:K")]
    inject_fault: Option<Range>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Range {
    lo: usize,
    hi: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
        Ok(Range {
            lo: parse(lo)?,
            hi: parse(hi)?,
        })
    }
}

/// One processor count or an inclusive range of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PSpec(Range);

impl FromStr for PSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            s.parse().map(PSpec)
        } else {
            let p = s.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"))?;
            Ok(PSpec(Range { lo: p, hi: p }))
        }
    }
}

enum Failure {
    Usage(String),
    Failed,
}

impl From<circulant_bcast::Error> for Failure {
    fn from(e: circulant_bcast::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("output: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn set_jobs(jobs: usize) -> CmdResult {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn json_line<T: serde::Serialize>(out: &mut impl io::Write, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)
}

fn cmd_skips(p: usize, format: Format) -> CmdResult {
    let t = SkipTable::new(p)?;
    let mut out = io::stdout().lock();
    match format {
        Format::Json => json_line(&mut out, &t)?,
        Format::Csv => {
            writeln!(out, "k,skip")?;
            for (k, s) in t.skips().iter().enumerate() {
                writeln!(out, "{k},{s}")?;
            }
        }
        Format::Text => {
            let s: Vec<String> = t.skips().iter().map(ToString::to_string).collect();
            writeln!(out, "p={} q={} skips=[{}]", t.p(), t.q(), s.join(","))?;
        }
    }
    Ok(())
}

fn cmd_schedule(p: usize, r: Option<usize>, format: Format) -> CmdResult {
    let t = SkipTable::new(p)?;
    let ranks: Vec<RankSchedule> = match r {
        Some(r) => vec![RankSchedule::compute(&t, r)?],
        None => (0..p)
            .map(|r| RankSchedule::compute(&t, r))
            .collect::<Result<_, _>>()?,
    };
    let mut out = io::stdout().lock();
    match (format, r) {
        (Format::Text, _) => out.write_all(render::text(&t, &ranks).as_bytes())?,
        (Format::Csv, _) => out.write_all(render::csv(&t, &ranks).as_bytes())?,
        (Format::Json, Some(_)) => json_line(&mut out, &ranks[0])?,
        (Format::Json, None) => json_line(
            &mut out,
            &FamilyJson {
                p,
                q: t.q(),
                skips: t.skips(),
                ranks: &ranks,
            },
        )?,
    }
    Ok(())
}

fn report_line(report: &VerificationReport) -> String {
    let mut line = format!(
        "p={} q={} {} max_violations={} max_dfs_calls={} time={:.3}s",
        report.p,
        report.q,
        if report.pass { "pass" } else { "FAIL" },
        report.stats.max_violations,
        report.stats.max_dfs_calls,
        report.stats.wall_time_s,
    );
    if let Some((cond, cx)) = report.first_counterexample() {
        line.push_str(&format!(
            " condition={cond} r={} k={} expected={} actual={}",
            cx.r,
            cx.k,
            cx.expected.map_or_else(|| "-".to_string(), |v| v.to_string()),
            cx.actual
        ));
    }
    line
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let Range { lo, hi } = args.range;
    if lo == 0 || lo > hi {
        return Err(Failure::Usage(format!("invalid range {lo}:{hi}")));
    }
    if let Some(jobs) = args.jobs {
        set_jobs(jobs)?;
    }
    let mut out = io::stdout().lock();
    let mut io_err = None;
    let mut emit = |report: &VerificationReport| {
        let res = match args.format {
            Format::Json => json_line(&mut out, report),
            _ => writeln!(out, "{}", report_line(report)),
        };
        if let Err(e) = res {
            io_err.get_or_insert(e);
        }
    };

    let all_passed = if let Some(Range { lo: fr, hi: fk }) = args.inject_fault {
        let mut ok = true;
        for p in lo..=hi {
            let t = SkipTable::new(p)?;
            let (mut family, _) = ScheduleFamily::compute(&t);
            if fr < p && fk < t.q() {
                let v = family.recv(fr, fk);
                family.set_recv(fr, fk, if v < 0 { -v } else { -v - 1 });
            }
            let report = check_family(&t, &family);
            ok &= report.pass;
            emit(&report);
            if !ok && !args.keep_going {
                break;
            }
        }
        ok
    } else {
        let opts = RangeOptions {
            keep_going: args.keep_going,
            checkpoint: args.checkpoint.clone(),
        };
        let summary = verify_range(lo, hi, &opts, &mut emit)?;
        info!(
            "checked {} values of p in {:.1}s, max violations {}, max calls - 2q {}",
            summary.checked, summary.wall_time_s, summary.max_violations, summary.max_calls_over_2q
        );
        eprintln!(
            "verified p={}..={}: {}/{} pass, max_violations={} violation_histogram={:?}",
            summary.start, hi, summary.passed, summary.checked, summary.max_violations, summary.violation_histogram
        );
        summary.all_passed()
    };
    if let Some(e) = io_err {
        return Err(e.into());
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Failed)
    }
}

fn emit_sim(result: &circulant_bcast::SimResult) -> CmdResult {
    let mut out = io::stdout().lock();
    json_line(&mut out, result)?;
    if result.correct {
        Ok(())
    } else {
        Err(Failure::Failed)
    }
}

fn cmd_bench(specs: &[PSpec], jobs: usize) -> CmdResult {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    if jobs > 1 {
        set_jobs(jobs)?;
    }
    for PSpec(Range { lo, hi }) in specs {
        if *lo == 0 || lo > hi {
            return Err(Failure::Usage(format!("invalid processor count {lo}:{hi}")));
        }
        SkipTable::new(*hi)?;
    }
    let mut out = io::stdout().lock();
    writeln!(out, "p,q,total_s,per_proc_us")?;
    for PSpec(Range { lo, hi }) in specs {
        for p in *lo..=*hi {
            let row = bench_schedules(p, jobs)?;
            writeln!(out, "{},{},{:.6},{:.4}", row.p, row.q, row.total_s, row.per_proc_us)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Skips { p, format } => cmd_skips(p, format),
        Command::Schedule { p, r, format } => cmd_schedule(p, r, format),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate { p, n, root, log } => {
            let res = run_broadcast(p, n, root, &SimOptions { keep_log: log })?;
            emit_sim(&res)
        }
        Command::Allgather {
            p,
            n,
            sizes,
            elements,
            log,
        } => {
            let m = elements.unwrap_or(16 * p.max(1));
            let res = run_allgatherv(p, n, &sizes.sizes(p.max(1), m), &SimOptions { keep_log: log })?;
            emit_sim(&res)
        }
        Command::Bench { p, jobs } => cmd_bench(&p, jobs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed) => ExitCode::from(EXIT_FAILURE),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
