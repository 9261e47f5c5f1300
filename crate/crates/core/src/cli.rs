//! The `defcal` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::bisim::{
    accepts_weak_trace, branching_bisimilar, check_r_is_bisimulation, has_tau_cycle, relabel,
    BisimVerdict, Granularity,
};
use crate::explore::{
    check_preservation, check_progress, explore, run, ExploreBounds, Lts, Outcome, SchedulerPolicy,
    DEFAULT_MAX_DEPTH, MAX_STATES_ENV,
};
use crate::parser::parse_program_with;
use crate::pretty::pretty;
use crate::runtime::{classify, Status};
use crate::stats::{compare, format_chain_table, list_sum_table};
use crate::syntax::{Dialect, Program};
use crate::transform::fwd_elim;
use crate::typecheck::{check_program, ForwardMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DialectArg {
    Def,
    #[value(name = "def+f")]
    DefF,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[default]
    Strict,
    Flexible,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum LabelsArg {
    #[default]
    Fine,
    Coarse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    #[default]
    RoundRobin,
    Random,
}

#[derive(Debug, Parser)]
#[command(
    name = "defcal",
    version,
    about = "Parse, run, explore and compare DeF / DeF+F programs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Force the dialect instead of inferring it from the source.
    #[arg(long, global = true, value_enum)]
    pub dialect: Option<DialectArg>,
    /// Typing and semantics of synchronous forward*.
    #[arg(long, global = true, value_enum, default_value_t)]
    pub mode: ModeArg,
    /// Whether observable labels carry the acting future.
    #[arg(long, global = true, value_enum, default_value_t)]
    pub labels: LabelsArg,
    #[arg(long, global = true, value_enum, default_value_t)]
    pub format: FormatArg,
    /// Seed for the random scheduler.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_steps: usize,
    #[arg(long, global = true, env = MAX_STATES_ENV)]
    pub max_states: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    /// Write the main artifact (LTS, trace, program) to this file.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and typecheck a program.
    Check { file: PathBuf },
    /// Execute one interleaving.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        policy: PolicyArg,
        /// Emit every step as JSON lines.
        #[arg(long)]
        trace: bool,
        /// Treat deadlock or the step bound as a negative verdict.
        #[arg(long)]
        expect_terminate: bool,
    },
    /// Explore every interleaving.
    Explore {
        file: PathBuf,
        #[arg(long)]
        check_preservation: bool,
        #[arg(long)]
        strict_bounds: bool,
    },
    /// Replace every forward* by return.
    Fwdelim { file: PathBuf },
    /// Compare a DeF+F program with its forward elimination.
    Bisim {
        file: PathBuf,
        /// Compare against this program instead of the forward elimination.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Also check the relation R and its lemmas on every reachable pair.
        #[arg(long)]
        check_r: bool,
        #[arg(long)]
        strict_bounds: bool,
    },
    /// Step counts with forward* and after forward elimination.
    Stats {
        #[arg(required_unless_present = "list_sum", conflicts_with = "list_sum")]
        file: Option<PathBuf>,
        /// Use the generated list summation for these chain lengths.
        #[arg(long, value_delimiter = ',')]
        list_sum: Vec<u32>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

struct Ctx<'a> {
    g: &'a GlobalOpts,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|e| CliError::io(Path::new("<stdout>"), e))?
    };
}

impl Ctx<'_> {
    fn mode(&self) -> ForwardMode {
        match self.g.mode {
            ModeArg::Strict => ForwardMode::Strict,
            ModeArg::Flexible => ForwardMode::Flexible,
        }
    }

    fn bounds(&self) -> ExploreBounds {
        let mut b = ExploreBounds::from_env();
        if let Some(n) = self.g.max_states {
            b.max_states = n;
        }
        b.max_depth = self.g.max_depth;
        b
    }

    fn granularity(&self) -> Granularity {
        match self.g.labels {
            LabelsArg::Fine => Granularity::Fine,
            LabelsArg::Coarse => Granularity::Coarse,
        }
    }

    fn json(&self) -> bool {
        self.g.format == FormatArg::Json
    }

    /// Writes `text` to `-o` when given, else to standard output.
    fn artifact(&mut self, text: &str) -> Result<(), CliError> {
        match &self.g.output {
            Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
            None => self
                .out
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
        }
    }

    /// Parses and typechecks `file`, reporting errors. `None` means the
    /// program was rejected and the errors have been printed.
    fn load(&mut self, file: &Path) -> Result<Option<Program>, CliError> {
        let source = fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
        let dialect = self.g.dialect.map(|d| match d {
            DialectArg::Def => Dialect::DeF,
            DialectArg::DefF => Dialect::DeFPlusF,
        });
        let p = match parse_program_with(&source, dialect) {
            Ok(p) => p,
            Err(errors) => {
                for e in errors {
                    say!(self.err, "{}:{e}", file.display());
                }
                return Ok(None);
            }
        };
        if let Err(errors) = check_program(&p, self.mode()) {
            for e in errors {
                say!(self.err, "{}:{e}", file.display());
            }
            return Ok(None);
        }
        Ok(Some(p))
    }
}

fn outcome_json(outcome: &Outcome) -> serde_json::Value {
    match outcome {
        Outcome::Terminated(v) => json!({"outcome": "terminated", "value": v}),
        Outcome::Deadlocked(edges) => json!({
            "outcome": "deadlocked",
            "wait_for": edges.iter().map(|(a, b)| [a.0, b.0]).collect::<Vec<_>>(),
        }),
        Outcome::DepthExceeded => json!({"outcome": "step_bound"}),
    }
}

fn outcome_text(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Terminated(Some(v)) => format!("terminated: {v}"),
        Outcome::Terminated(None) => "terminated".into(),
        Outcome::Deadlocked(edges) => {
            let es: Vec<String> = edges
                .iter()
                .map(|(a, b)| format!("f{} -> f{}", a.0, b.0))
                .collect();
            format!("deadlocked: {}", es.join(", "))
        }
        Outcome::DepthExceeded => "step bound reached".into(),
    }
}

fn cmd_check(cx: &mut Ctx, file: &Path) -> Result<i32, CliError> {
    let Some(p) = cx.load(file)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let env = check_program(&p, cx.mode()).expect("checked by load");
    if cx.json() {
        say!(
            cx.out,
            "{}",
            json!({"status": "ok", "dialect": p.dialect, "mode": cx.mode(), "environment": env.summary().lines().collect::<Vec<_>>()})
        );
    } else {
        say!(cx.out, "ok");
        write!(cx.out, "{}", env.summary()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    }
    Ok(EXIT_OK)
}

fn cmd_run(
    cx: &mut Ctx,
    file: &Path,
    policy: PolicyArg,
    trace: bool,
    expect: bool,
) -> Result<i32, CliError> {
    let Some(p) = cx.load(file)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let scheduler = match (policy, cx.g.seed) {
        (PolicyArg::RoundRobin, Some(_)) => {
            return Err(CliError::Usage("--seed needs --policy random".into()))
        }
        (PolicyArg::RoundRobin, None) => SchedulerPolicy::RoundRobin,
        (PolicyArg::Random, seed) => SchedulerPolicy::SeededRandom(seed.unwrap_or(0)),
    };
    let t = match run(&p, scheduler, cx.mode(), cx.g.max_steps) {
        Ok(t) => t,
        Err(e) => {
            say!(cx.err, "{}: runtime error: {e}", file.display());
            return Ok(EXIT_NEGATIVE);
        }
    };
    if trace {
        let lines = t.to_json_lines();
        cx.artifact(&lines)?;
    }
    let seed = match scheduler {
        SchedulerPolicy::SeededRandom(s) => Some(s),
        SchedulerPolicy::RoundRobin => None,
    };
    // With the trace on standard output the summary goes to standard error.
    let summary: &mut dyn Write = if trace && cx.g.output.is_none() {
        &mut *cx.err
    } else {
        &mut *cx.out
    };
    if cx.g.format == FormatArg::Json {
        let mut v = outcome_json(&t.outcome);
        v["steps"] = json!(t.steps.len());
        v["seed"] = json!(seed);
        say!(summary, "{v}");
    } else {
        if let Some(s) = seed {
            say!(summary, "seed: {s}");
        }
        say!(summary, "{}", outcome_text(&t.outcome));
        say!(summary, "steps: {}", t.steps.len());
    }
    let terminated = matches!(t.outcome, Outcome::Terminated(_));
    Ok(if expect && !terminated {
        EXIT_NEGATIVE
    } else {
        EXIT_OK
    })
}

fn leaf_counts(lts: &Lts) -> (usize, usize) {
    let (mut terminated, mut deadlocked) = (0, 0);
    for i in lts.leaves() {
        if !lts.expanded[i] {
            continue;
        }
        match classify(&lts.states[i]) {
            Status::Terminated => terminated += 1,
            Status::Deadlocked(_) => deadlocked += 1,
            Status::Running => {}
        }
    }
    (terminated, deadlocked)
}

fn explore_or_report(cx: &mut Ctx, file: &Path, p: &Program) -> Result<Option<Lts>, CliError> {
    match explore(p, cx.bounds(), cx.mode()) {
        Ok(lts) => Ok(Some(lts)),
        Err(e) => {
            say!(cx.err, "{}: runtime error: {e}", file.display());
            Ok(None)
        }
    }
}

fn cmd_explore(
    cx: &mut Ctx,
    file: &Path,
    preservation: bool,
    strict_bounds: bool,
) -> Result<i32, CliError> {
    let Some(p) = cx.load(file)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let Some(lts) = explore_or_report(cx, file, &p)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let (terminated, deadlocked) = leaf_counts(&lts);
    let progress = check_progress(&lts);
    let tau_cycle = has_tau_cycle(&relabel(&lts, Granularity::Coarse));
    let preserved = preservation.then(|| check_preservation(&p, &lts));
    let mut code = EXIT_OK;
    if progress.is_err() || matches!(preserved, Some(Err(_))) {
        code = EXIT_NEGATIVE;
    } else if strict_bounds && lts.truncated {
        code = EXIT_TRUNCATED;
    }
    if let Some(path) = cx.g.output.clone() {
        let text = serde_json::to_string(&lts.to_json()).expect("LTS serializes");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    if cx.json() {
        let mut v = json!({
            "states": lts.states.len(),
            "edges": lts.edges.len(),
            "truncated": lts.truncated,
            "terminated_leaves": terminated,
            "deadlocked_leaves": deadlocked,
            "progress": progress.is_ok(),
            "tau_cycle": tau_cycle,
        });
        if let Some(r) = &preserved {
            v["preservation"] = json!(r.is_ok());
        }
        if cx.g.output.is_none() {
            v["lts"] = lts.to_json();
        }
        say!(cx.out, "{v}");
    } else {
        say!(cx.out, "states: {}", lts.states.len());
        say!(cx.out, "edges: {}", lts.edges.len());
        say!(cx.out, "truncated: {}", lts.truncated);
        say!(
            cx.out,
            "leaves: {terminated} terminated, {deadlocked} deadlocked"
        );
        say!(
            cx.out,
            "tau-cycle: {}",
            if tau_cycle { "present" } else { "absent" }
        );
        match progress {
            Ok(()) => say!(cx.out, "progress: ok"),
            Err(i) => say!(cx.out, "progress: violated at state {i}"),
        }
        match &preserved {
            Some(Ok(())) => say!(cx.out, "preservation: ok"),
            Some(Err((i, errors))) => {
                say!(cx.out, "preservation: violated at state {i}");
                for e in errors {
                    say!(cx.out, "  {e}");
                }
            }
            None => {}
        }
    }
    Ok(code)
}

fn cmd_fwdelim(cx: &mut Ctx, file: &Path) -> Result<i32, CliError> {
    let Some(p) = cx.load(file)? else {
        return Ok(EXIT_NEGATIVE);
    };
    match fwd_elim(&p) {
        Ok(q) => {
            cx.artifact(&pretty(&q))?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            say!(cx.err, "{}:{e}", file.display());
            Ok(EXIT_NEGATIVE)
        }
    }
}

fn cmd_bisim(
    cx: &mut Ctx,
    file: &Path,
    against: Option<&Path>,
    check_r: bool,
    strict_bounds: bool,
) -> Result<i32, CliError> {
    let Some(pf) = cx.load(file)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let (pd, dfile) = match against {
        Some(other) => match cx.load(other)? {
            Some(q) => (q, other.to_path_buf()),
            None => return Ok(EXIT_NEGATIVE),
        },
        None => match fwd_elim(&pf) {
            Ok(q) => (q, file.to_path_buf()),
            Err(e) => {
                say!(cx.err, "{}:{e}", file.display());
                return Ok(EXIT_NEGATIVE);
            }
        },
    };
    let Some(lf) = explore_or_report(cx, file, &pf)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let Some(ld) = explore_or_report(cx, &dfile, &pd)? else {
        return Ok(EXIT_NEGATIVE);
    };
    let (of, od) = (
        relabel(&lf, cx.granularity()),
        relabel(&ld, cx.granularity()),
    );
    let report = match branching_bisimilar(&of, &od) {
        Ok(r) => r,
        Err(e) => {
            say!(cx.err, "{e}");
            return Ok(EXIT_USAGE);
        }
    };
    let r_check = check_r.then(|| check_r_is_bisimulation(&lf, &ld, cx.bounds().max_states));
    if cx.json() {
        let mut v = report.to_json();
        if let Some(r) = &r_check {
            v["relation"] = match r {
                Ok(c) => json!({"ok": true, "pairs": c.pairs, "unchecked": c.unchecked}),
                Err(c) => json!({"ok": false, "counterexample": c.to_string()}),
            };
        }
        say!(cx.out, "{v}");
    } else {
        match &report.verdict {
            BisimVerdict::Bisimilar => say!(cx.out, "bisimilar"),
            BisimVerdict::NotBisimilar { pair, witness } => {
                say!(cx.out, "not bisimilar");
                say!(cx.out, "pair: ({}, {})", pair.0, pair.1);
                if witness.is_empty() {
                    say!(
                        cx.out,
                        "witness: none (same weak traces, different branching)"
                    );
                } else {
                    let w: Vec<String> = witness.iter().map(|l| l.to_string()).collect();
                    let side = if accepts_weak_trace(&of, witness) {
                        "first"
                    } else {
                        "second"
                    };
                    say!(
                        cx.out,
                        "witness: {} (possible for the {side} program only)",
                        w.join(" ")
                    );
                }
            }
        }
        if report.advisory {
            say!(cx.out, "advisory: exploration was truncated");
        }
        match &r_check {
            Some(Ok(c)) => say!(
                cx.out,
                "relation R: ok ({} pairs, {} unchecked)",
                c.pairs,
                c.unchecked
            ),
            Some(Err(c)) => say!(cx.out, "relation R: {c}"),
            None => {}
        }
    }
    if !report.is_bisimilar() || matches!(r_check, Some(Err(_))) {
        Ok(EXIT_NEGATIVE)
    } else if strict_bounds && report.advisory {
        Ok(EXIT_TRUNCATED)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_stats(cx: &mut Ctx, file: Option<&Path>, list_sum: &[u32]) -> Result<i32, CliError> {
    if let Some(file) = file {
        let Some(p) = cx.load(file)? else {
            return Ok(EXIT_NEGATIVE);
        };
        return match compare(&p, cx.mode(), cx.g.max_steps) {
            Ok(r) => {
                if cx.json() {
                    say!(
                        cx.out,
                        "{}",
                        serde_json::to_string(&r).expect("report serializes")
                    );
                } else {
                    say!(cx.out, "{r}");
                }
                Ok(EXIT_OK)
            }
            Err(e) => {
                say!(cx.err, "{}:{e}", file.display());
                Ok(EXIT_NEGATIVE)
            }
        };
    }
    match list_sum_table(list_sum, cx.g.max_steps) {
        Ok(rows) => {
            if cx.json() {
                say!(
                    cx.out,
                    "{}",
                    serde_json::to_string(&rows).expect("rows serialize")
                );
            } else {
                write!(cx.out, "{}", format_chain_table(&rows))
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            say!(cx.err, "{e}");
            Ok(EXIT_NEGATIVE)
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut cx = Ctx {
        g: &cli.global,
        out,
        err,
    };
    match &cli.command {
        Command::Check { file } => cmd_check(&mut cx, file),
        Command::Run {
            file,
            policy,
            trace,
            expect_terminate,
        } => cmd_run(&mut cx, file, *policy, *trace, *expect_terminate),
        Command::Explore {
            file,
            check_preservation,
            strict_bounds,
        } => cmd_explore(&mut cx, file, *check_preservation, *strict_bounds),
        Command::Fwdelim { file } => cmd_fwdelim(&mut cx, file),
        Command::Bisim {
            file,
            against,
            check_r,
            strict_bounds,
        } => cmd_bisim(&mut cx, file, against.as_deref(), *check_r, *strict_bounds),
        Command::Stats { file, list_sum } => cmd_stats(&mut cx, file.as_deref(), list_sum),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "defcal: {e}");
            EXIT_USAGE
        }
    }
}
