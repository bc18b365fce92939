//! The `matshare` command line: `deal`, `run` and `attack` over a workspace
//! directory (see [`crate::files`] for its layout).
//!
//! Exit codes: 0 success, 1 I/O or malformed data, 2 forgery detected,
//! 3 integrity failure, 4 guardrail refusal, 64 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::algebra::{rng_from_seed, Matrix, Seed};
use crate::attack::{
    count_search_space, exhaustive_search_with, ratio_analysis, CountMode, SearchMode,
    SearchOptions, SearchProblem, GUARDRAIL,
};
use crate::dealer::{generate_instance, DealerParams, DEFAULT_ENTRY_BOUND};
use crate::error::{usage, Error, Result};
use crate::exec::Execution;
use crate::files::{AttackReport, RatioHitRecord, SpaceCounts, Workspace};
use crate::protocol::{freivalds_audit, CheaterSpec, Session};
use crate::transport::ParticipantId;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_FORGERY: i32 = 2;
pub const EXIT_INTEGRITY: i32 = 3;
pub const EXIT_GUARDRAIL: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "matshare", version, about = "Matrix-product secret sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and write bulletin, shares and dealer record.
    Deal(DealArgs),
    /// Verify from a start position, then reconstruct the secret.
    Run(RunArgs),
    /// Search the public set for selections matching the secret.
    Attack(AttackArgs),
}

#[derive(Args, Debug)]
struct WorkspaceArg {
    #[arg(short = 'w', long = "workspace", visible_alias = "out", default_value = ".")]
    path: PathBuf,
}

#[derive(Args, Debug)]
struct DealArgs {
    #[command(flatten)]
    workspace: WorkspaceArg,
    /// Matrix dimension.
    #[arg(long)]
    r: usize,
    /// Size of the public matrix set.
    #[arg(long)]
    k: usize,
    /// Number of participants.
    #[arg(long)]
    n: usize,
    /// Entries are drawn from 0..entry-bound.
    #[arg(long, default_value_t = DEFAULT_ENTRY_BOUND)]
    entry_bound: u64,
    #[arg(long, env = "MATSHARE_SEED", default_value_t = 0)]
    seed: Seed,
}

/// `position:forge-seed`
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheatArg {
    pub position: usize,
    pub forge_seed: Seed,
}

impl FromStr for CheatArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (p, f) = s
            .split_once(':')
            .ok_or_else(|| format!("expected position:forge-seed, got {s:?}"))?;
        Ok(CheatArg {
            position: p.parse().map_err(|e| format!("bad position {p:?}: {e}"))?,
            forge_seed: f.parse().map_err(|e| format!("bad forge seed {f:?}: {e}"))?,
        })
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    workspace: WorkspaceArg,
    /// Ring position that starts both rounds.
    #[arg(long, default_value_t = 1)]
    start: usize,
    /// Substitute a random forged shadow for one participant.
    #[arg(long, value_name = "POSITION:FORGE_SEED")]
    cheat: Option<CheatArg>,
    /// Freivalds iterations used by the transcript audit.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    t: u32,
    #[arg(long, env = "MATSHARE_SEED", default_value_t = 0)]
    seed: Seed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    OrderedDistinct,
    OrderedRep,
}

impl ModeArg {
    fn search_mode(self) -> SearchMode {
        match self {
            ModeArg::OrderedDistinct => SearchMode::OrderedDistinct,
            ModeArg::OrderedRep => SearchMode::OrderedWithRepetition,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::OrderedDistinct => "ordered-distinct",
            ModeArg::OrderedRep => "ordered-rep",
        }
    }
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    workspace: WorkspaceArg,
    #[arg(long, value_enum, default_value = "ordered-distinct")]
    mode: ModeArg,
    /// Keep at most this many solutions.
    #[arg(long)]
    limit: Option<usize>,
    /// Report the search space sizes without enumerating.
    #[arg(long)]
    count_only: bool,
    /// Enumerate even when the space exceeds the guardrail.
    #[arg(long)]
    override_guardrail: bool,
    /// Run the search on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Deal(a) => cmd_deal(&a, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Attack(a) => cmd_attack(&a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "matshare: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::IntegrityFailure(_) => EXIT_INTEGRITY,
        Error::Guardrail { .. } => EXIT_GUARDRAIL,
        _ => EXIT_FAILURE,
    }
}

/// SHA-256 of the compact JSON encoding of `m`, hex encoded.
pub fn matrix_digest(m: &Matrix) -> String {
    let json = serde_json::to_vec(m).expect("matrices always serialize");
    hex::encode(Sha256::digest(&json))
}

fn cmd_deal(a: &DealArgs, out: &mut dyn Write) -> Result<i32> {
    let params = DealerParams::new(a.r, a.k, a.n, a.seed).with_entry_bound(a.entry_bound);
    let deal = generate_instance(&params)?;
    let ws = Workspace::new(&a.workspace.path);
    ws.write_deal(&deal)?;
    writeln!(
        out,
        "dealt r={} k={} n={} into {}",
        a.r,
        a.k,
        a.n,
        ws.root().display()
    )?;
    Ok(EXIT_OK)
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let ws = Workspace::new(&a.workspace.path);
    let bulletin = ws.read_bulletin()?;
    let n = bulletin.n;
    if !(1..=n).contains(&a.start) {
        return Err(usage(format!("start must be in 1..={n}, got {}", a.start)));
    }
    let shares = ws.read_shares(n)?;
    let mut session = Session::resume(bulletin, shares, ws.read_transcript()?)?;
    let start = ParticipantId(a.start);

    let cheater = match a.cheat {
        None => None,
        Some(c) => {
            if !(1..=n).contains(&c.position) {
                return Err(usage(format!("cheat position must be in 1..={n}, got {}", c.position)));
            }
            let position = ParticipantId(c.position);
            let own = session.states[position.index()].shadow().clone();
            let mut rng = rng_from_seed(c.forge_seed);
            Some(CheaterSpec::random(position, &own, DEFAULT_ENTRY_BOUND, &mut rng)?)
        }
    };

    let verdict = session.verify(start, cheater.as_ref())?;
    if !verdict {
        ws.write_transcript(&session.transcript())?;
        writeln!(out, "FORGERY DETECTED at verification")?;
        return Ok(EXIT_FORGERY);
    }

    let mut rng = rng_from_seed(a.seed);
    let recovered = session.reconstruct(start, &mut rng);
    let transcript = session.transcript();
    ws.write_transcript(&transcript)?;
    let secret = recovered?;
    if !freivalds_audit(&transcript, &session.bulletin, a.t, a.seed) {
        return Err(Error::IntegrityFailure(
            "transcript failed the Freivalds audit".into(),
        ));
    }
    writeln!(out, "recovered secret sha256 {}", matrix_digest(&secret))?;
    Ok(EXIT_OK)
}

fn cmd_attack(a: &AttackArgs, out: &mut dyn Write) -> Result<i32> {
    let ws = Workspace::new(&a.workspace.path);
    let bulletin = ws.read_bulletin()?;
    let (k, n) = (bulletin.k, bulletin.n);
    let mut report = AttackReport {
        mode: a.mode.name().to_string(),
        space: SpaceCounts {
            multiset: count_search_space(k, n, CountMode::Multiset).to_string(),
            ordered_distinct: count_search_space(k, n, CountMode::OrderedDistinct).to_string(),
            ordered_rep: count_search_space(k, n, CountMode::OrderedWithRepetition).to_string(),
        },
        solutions: Vec::new(),
        ratio_hits: Vec::new(),
        enumerated: false,
        nodes_explored: 0,
        elapsed_ms: 0,
    };

    let transcript = ws.read_transcript()?;
    let view = transcript.eavesdropper_view();
    report.ratio_hits = ratio_analysis(&view, &bulletin)
        .hits
        .into_iter()
        .map(|h| RatioHitRecord {
            position: h.position.0,
            matrix_index: h.matrix_index,
        })
        .collect();

    if a.count_only {
        ws.write_report(&report)?;
        writeln!(
            out,
            "space multiset={} ordered-distinct={} ordered-rep={}",
            report.space.multiset, report.space.ordered_distinct, report.space.ordered_rep
        )?;
        return Ok(EXIT_OK);
    }

    let instance = ws
        .read_instance(&bulletin)?
        .ok_or_else(|| usage("attack needs instance.json for the target secret"))?;
    let problem = SearchProblem::new(bulletin.matrices.clone(), n, instance.secret.clone())?;
    let execution = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let opts = SearchOptions::new(a.mode.search_mode())
        .limit(a.limit)
        .override_guardrail(a.override_guardrail)
        .execution(execution);
    let result = match exhaustive_search_with(&problem, &opts) {
        Ok(r) => r,
        Err(e @ Error::Guardrail { .. }) => {
            ws.write_report(&report)?;
            writeln!(out, "refusing to enumerate beyond {GUARDRAIL} sequences")?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    report.enumerated = true;
    report.solutions = result.solutions;
    report.nodes_explored = result.nodes_explored;
    report.elapsed_ms = result.elapsed.as_millis() as u64;
    ws.write_report(&report)?;
    writeln!(
        out,
        "{} solution(s) among {} sequences",
        report.solutions.len(),
        report.nodes_explored
    )?;
    Ok(EXIT_OK)
}
