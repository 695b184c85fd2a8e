//! The `chrv` command line.
//!
//! Exit codes: 0 on quiescence (or success), 1 on usage, input or I/O
//! errors, 2 when the run ends in Fail (or a simulated action is not
//! possible), 3 when the transition budget runs out.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::driver::server::Server;
use crate::driver::{Command, Driver, DriverConfig, DriverError, FilterQuery, Mailbox, SessionStatus};
use crate::engine::{EngineError, Outcome, DEFAULT_BUDGET};
use crate::lang::{parse_program, parse_query, Program, Query};
use crate::os_sim::script::{parse_events, parse_script};
use crate::os_sim::{builtin_spec, events_to_xml, extraction, replay, run_script};
use crate::rebuilder::{check_faithful, rebuild, RebuildError};
use crate::tracer::{from_xml, run_traced, to_xml, ActualTraceEvent, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chrv", version, about = "Trace CHR programs and fluent-calculus specifications")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a program on a query and write its trace
    Run(RunConfig),
    /// Rebuild the states of a run from its trace and compare them with the engine's
    Verify {
        program: PathBuf,
        #[arg(short, long, default_value = "")]
        query: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Rebuild the partial virtual states recorded in an XML trace
    Replay { trace: PathBuf },
    /// Serve the driver protocol over TCP
    Serve {
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Run a shipped simulator spec (fibonacci, robots) on a script or an event list
    Ossim {
        spec: String,
        /// One action per line: `Name arg...`
        #[arg(long, required_unless_present = "replay", conflicts_with = "replay")]
        script: Option<PathBuf>,
        /// One observed event per line: `[chrono] kind value...`
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Also write the events as XML to this file
        #[arg(long)]
        xml: Option<PathBuf>,
    },
    /// Check an XML trace against the schema and the chrono rules
    Validate { file: PathBuf },
}

#[derive(Clone, Copy, Debug, Args)]
pub struct Budget {
    /// Maximum number of transitions
    #[arg(long = "budget", env = "CHR_TRACE_BUDGET", default_value_t = DEFAULT_BUDGET, value_parser = positive)]
    pub value: usize,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("budget must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Xml,
    Jsonl,
    Pretty,
}

#[derive(Clone, Debug, Args)]
pub struct RunConfig {
    pub program: PathBuf,
    #[arg(short, long, default_value = "")]
    pub query: String,
    #[command(flatten)]
    pub budget: Budget,
    #[arg(long, value_enum, default_value_t = Format::Xml)]
    pub output: Format,
    /// Write the trace here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Only show matching events, e.g. `kinds=apply; rule~r2`
    #[arg(long)]
    pub filter: Option<String>,
    /// Step interactively: Enter steps, `c` continues, `f QUERY` sets the filter, `q` quits
    #[arg(long)]
    pub step: bool,
}

/// An exit code and the message printed before exiting with it.
#[derive(Debug)]
pub struct Failure(pub i32, pub String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_ERROR, e.to_string())
    }
}

pub type CmdResult = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_ERROR
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, input, out, err) {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn dispatch(cmd: Cmd, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Cmd::Run(cfg) => cmd_run(&cfg, input, out, err),
        Cmd::Verify { program, query, budget } => cmd_verify(&program, &query, budget.value, out),
        Cmd::Replay { trace } => cmd_replay(&trace, out),
        Cmd::Serve { port, host, budget } => cmd_serve(&host, port, budget.value, err),
        Cmd::Ossim { spec, script, replay, xml } => cmd_ossim(&spec, script, replay, xml, out, err),
        Cmd::Validate { file } => cmd_validate(&file, out),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn load(path: &Path, query: &str) -> Result<(Program, Query), Failure> {
    let program = parse_program(&read(path)?).map_err(|e| Failure(EXIT_ERROR, format!("{}: {e}", path.display())))?;
    let query = parse_query(query).map_err(|e| Failure(EXIT_ERROR, format!("query: {e}")))?;
    Ok((program, query))
}

/// Writes `events` in `format`. XML always carries the whole trace.
pub fn write_trace(trace: &Trace, format: Format, filter: &FilterQuery, w: &mut dyn Write) -> io::Result<()> {
    let mut shown = trace.events.iter().filter(|e| filter.matches(e));
    match format {
        Format::Xml => w.write_all(to_xml(trace).as_bytes()),
        Format::Jsonl => shown.try_for_each(|e| writeln!(w, "{}", serde_json::to_string(e).expect("events serialize"))),
        Format::Pretty => shown.try_for_each(|e| writeln!(w, "{e}")),
    }
}

fn with_output(path: Option<&Path>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(
                fs::File::create(p).map_err(|e| Failure(EXIT_ERROR, format!("{}: {e}", p.display())))?,
            );
            f(&mut file)?;
            file.flush()?;
        }
        None => f(out)?,
    }
    Ok(())
}

pub fn cmd_run(cfg: &RunConfig, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let filter = match &cfg.filter {
        Some(text) => text.parse::<FilterQuery>()?,
        None => FilterQuery::all(),
    };
    if cfg.filter.is_some() && cfg.output == Format::Xml && !cfg.step {
        return Err(Failure(
            EXIT_ERROR,
            "--filter applies to jsonl and pretty output; XML traces are always complete".into(),
        ));
    }
    let (program, query) = load(&cfg.program, &cfg.query)?;
    if cfg.step {
        return step_interactively(cfg, program, query, filter, input, out, err);
    }
    let run = run_traced(&program, &query, cfg.budget.value);
    with_output(cfg.out.as_deref(), out, |w| write_trace(&run.trace, cfg.output, &filter, w))?;
    log::info!("{} events", run.trace.len());
    match run.result {
        Ok(fin) if fin.outcome == Outcome::Quiescent => Ok(EXIT_OK),
        Ok(_) => {
            let _ = writeln!(err, "run failed: the builtin store is inconsistent");
            Ok(EXIT_FAIL)
        }
        Err(e @ EngineError::BudgetExceeded { .. }) => {
            let _ = writeln!(err, "{e}");
            Ok(EXIT_BUDGET)
        }
        Err(e) => Err(e.into()),
    }
}

const CLI_ANALYZER: &str = "cli";

fn step_interactively(
    cfg: &RunConfig,
    program: Program,
    query: Query,
    filter: FilterQuery,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let mut driver = Driver::new(DriverConfig {
        step_by_step: true,
        budget: cfg.budget.value,
    })?;
    let mailbox = Mailbox::new();
    driver.register_analyzer(CLI_ANALYZER, filter, mailbox.clone())?;
    driver.load(program, query)?;
    let show = |out: &mut dyn Write, events: Vec<ActualTraceEvent>| -> io::Result<()> {
        events.iter().try_for_each(|e| writeln!(out, "{e}"))
    };
    let mut line = String::new();
    while !driver.status().is_terminal() {
        write!(err, "[{}] step> ", driver.status().as_str())?;
        err.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            driver.control(Command::End)?;
            break;
        }
        let cmd = line.trim();
        match cmd.split_once(char::is_whitespace).map_or((cmd, ""), |(c, r)| (c, r.trim())) {
            ("", _) | ("s", _) => loop {
                match driver.new_step() {
                    Ok(Some(_)) if mailbox.chronos().is_empty() => continue,
                    Ok(_) | Err(DriverError::Engine(EngineError::BudgetExceeded { .. })) => break,
                    Err(e) => return Err(e.into()),
                }
            },
            ("c", _) => {
                driver.control(Command::Continue)?;
            }
            ("f", text) => {
                let q = if text.is_empty() { FilterQuery::all() } else { text.parse()? };
                writeln!(err, "filter: {q}")?;
                driver.update_filter(CLI_ANALYZER, q)?;
            }
            ("q", _) => {
                driver.control(Command::End)?;
            }
            _ => writeln!(err, "commands: Enter or s = step, c = continue, f QUERY = filter, q = quit")?,
        }
        show(out, mailbox.take())?;
    }
    show(out, mailbox.take())?;
    let status = driver.status();
    writeln!(err, "{}", status.as_str())?;
    if let (Some(path), Some(trace)) = (&cfg.out, driver.trace()) {
        with_output(Some(path), out, |w| write_trace(trace, cfg.output, &FilterQuery::all(), w))?;
    }
    Ok(match status {
        SessionStatus::Failed => EXIT_FAIL,
        SessionStatus::Exhausted => EXIT_BUDGET,
        _ => EXIT_OK,
    })
}

pub fn cmd_verify(program: &Path, query: &str, budget: usize, out: &mut dyn Write) -> CmdResult {
    let (program, query) = load(program, query)?;
    match check_faithful(&program, &query, budget) {
        Ok(report) => {
            writeln!(out, "{report}")?;
            Ok(if report.is_faithful() { EXIT_OK } else { EXIT_ERROR })
        }
        Err(RebuildError::Engine(e @ EngineError::BudgetExceeded { .. })) => Err(Failure(EXIT_BUDGET, e.to_string())),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_replay(path: &Path, out: &mut dyn Write) -> CmdResult {
    let trace = from_xml(&read(path)?)?;
    for (e, state) in trace.events.iter().zip(rebuild(&trace)?) {
        writeln!(out, "{} {} {state}", e.chrono, e.kind)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> CmdResult {
    let trace = from_xml(&read(path)?)?;
    writeln!(out, "valid: {} events", trace.len())?;
    Ok(EXIT_OK)
}

pub fn cmd_serve(host: &str, port: u16, budget: usize, err: &mut dyn Write) -> CmdResult {
    let server = Server::bind((host, port), DriverConfig { step_by_step: false, budget })?;
    writeln!(err, "listening on {}", server.local_addr()?)?;
    server.run()?;
    Ok(EXIT_OK)
}

pub fn cmd_ossim(
    spec: &str,
    script: Option<PathBuf>,
    replay_from: Option<PathBuf>,
    xml: Option<PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let os = builtin_spec(spec).ok_or_else(|| Failure(EXIT_ERROR, format!("unknown spec `{spec}` (try fibonacci or robots)")))?;
    let (sit, failure) = match (script, replay_from) {
        (Some(path), _) => {
            let (sit, f) = run_script(&os, &parse_script(&read(&path)?)?);
            (sit, f.map(|f| format!("step {}: {}", f.index + 1, f.error)))
        }
        (None, Some(path)) => {
            let events = parse_events(&read(&path)?)?;
            let (sit, at) = replay(&os, &events);
            let describe = |i: usize| {
                let (kind, values) = &events[i];
                let values: Vec<_> = values.iter().map(|v| v.to_string()).collect();
                format!("event {}: no possible action extracts `{kind} {}`", i + 1, values.join(" "))
            };
            (sit, at.map(describe))
        }
        (None, None) => return Err(Failure(EXIT_ERROR, "give --script or --replay".into())),
    };
    let events = extraction(&sit);
    for e in &events {
        writeln!(out, "{}", serde_json::to_string(e)?)?;
    }
    if let Some(path) = xml {
        fs::write(&path, events_to_xml(&os.name, &events)).map_err(|e| Failure(EXIT_ERROR, format!("{}: {e}", path.display())))?;
    }
    match failure {
        None => Ok(EXIT_OK),
        Some(why) => {
            writeln!(err, "not possible at {why}")?;
            Ok(EXIT_FAIL)
        }
    }
}
