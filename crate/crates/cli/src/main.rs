//! `mimosa`: check, run, format and inspect Mimosa programs.

use std::collections::BTreeMap;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mimosa_core::analysis::{check_program_with, CheckOptions, CheckedProgram};
use mimosa_core::ast::Program;
use mimosa_core::diag::{Diagnostic, LineIndex, Severity};
use mimosa_core::parser::{parse_duration, parse_program, parse_value};
use mimosa_core::pretty::program_to_string;
use mimosa_core::sim::{self, builtin_hosts, ConstSeq, Printer, Schedule, SimConfig, ValueSeq};

#[derive(Parser)]
#[command(
    name = "mimosa",
    version,
    about = "Check, simulate and format Mimosa programs"
)]
struct Cli {
    /// Diagnostic output format.
    #[arg(long, global = true, value_enum, default_value_t = DiagFormat::Text)]
    diag_format: DiagFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Deterministic,
    Randomized,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and run the static checks.
    Check {
        file: PathBuf,
        /// Accept channels that lack a writer or a reader.
        #[arg(long)]
        allow_open: bool,
    },
    /// Simulate a closed network.
    Run {
        file: PathBuf,
        /// Simulated time, e.g. `200ms` or `2s`.
        #[arg(long = "for", value_name = "DURATION", value_parser = duration)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Deterministic)]
        schedule: ScheduleArg,
        /// Write the trace as CSV; `-` for standard output.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Include idle rewrites in the trace.
        #[arg(long)]
        verbose_idle: bool,
        /// Bind a prototype: `step=values.txt`, `step=builtin:print` or
        /// `step=builtin:const:<literal>`.
        #[arg(long = "stub", value_name = "STEP=SOURCE")]
        stubs: Vec<String>,
    },
    /// Print a program in canonical form.
    Fmt {
        file: PathBuf,
        /// Exit with status 1 if the file is not already formatted.
        #[arg(long)]
        check: bool,
    },
    /// Summarize a trace CSV file by channel.
    ExplainTrace { trace: PathBuf },
}

fn duration(s: &str) -> Result<u64, String> {
    match parse_duration(s) {
        Ok(0) => Err("the duration must be positive".into()),
        Ok(us) => Ok(us),
        Err(e) => Err(e.message),
    }
}

/// Failure that has already been reported on stderr.
struct Reported;

struct Ctx {
    format: DiagFormat,
    color: bool,
}

impl Ctx {
    fn diagnostics(&self, file: &Path, source: &str, diags: &[Diagnostic]) {
        let name = file.display().to_string();
        let index = LineIndex::new(source);
        let mut err = std::io::stderr().lock();
        match self.format {
            DiagFormat::Text => {
                for d in diags {
                    let (line, col) = index.line_col(d.span.start);
                    let severity = match (self.color, d.severity) {
                        (true, Severity::Error) => "\x1b[1;31merror\x1b[0m".to_string(),
                        (true, Severity::Warning) => "\x1b[1;33mwarning\x1b[0m".to_string(),
                        (false, s) => s.to_string(),
                    };
                    let _ = writeln!(err, "{name}:{line}:{col}: {severity}: {}", d.message);
                }
            }
            DiagFormat::Json => {
                let items: Vec<serde_json::Value> = diags
                    .iter()
                    .map(|d| {
                        let (line, col) = index.line_col(d.span.start);
                        serde_json::json!({
                            "file": name,
                            "line": line,
                            "column": col,
                            "severity": d.severity.to_string(),
                            "code": d.code,
                            "message": d.message,
                        })
                    })
                    .collect();
                let _ = writeln!(err, "{}", serde_json::Value::Array(items));
            }
        }
    }

    fn error(&self, message: impl std::fmt::Display) -> Reported {
        let label = if self.color {
            "\x1b[1;31merror\x1b[0m"
        } else {
            "error"
        };
        eprintln!("{label}: {message}");
        Reported
    }

    fn read(&self, file: &Path) -> Result<String, Reported> {
        std::fs::read_to_string(file)
            .map_err(|e| self.error(format!("cannot read `{}`: {e}", file.display())))
    }

    fn parse(&self, file: &Path, source: &str) -> Result<Program, Reported> {
        parse_program(source).map_err(|errs| {
            let diags: Vec<Diagnostic> = errs.into_iter().map(Diagnostic::from).collect();
            self.diagnostics(file, source, &diags);
            Reported
        })
    }

    fn check(&self, file: &Path, opts: CheckOptions) -> Result<CheckedProgram, Reported> {
        let source = self.read(file)?;
        let program = self.parse(file, &source)?;
        check_program_with(&program, opts).map_err(|diags| {
            self.diagnostics(file, &source, &diags);
            Reported
        })
    }
}

fn bind_stub(hosts: &mut sim::HostRegistry, binding: &str) -> Result<(), String> {
    let (step, source) = binding
        .split_once('=')
        .ok_or_else(|| format!("`{binding}` is not of the form STEP=SOURCE"))?;
    if let Some(kind) = source.strip_prefix("builtin:") {
        if kind == "print" {
            hosts.bind(step, Printer);
        } else if let Some(lit) = kind.strip_prefix("const:") {
            let v = parse_value(lit).map_err(|e| format!("stub `{step}`: {e}"))?;
            hosts.bind(step, ConstSeq(v));
        } else {
            return Err(format!(
                "unknown builtin `{kind}`; expected `print` or `const:<literal>`"
            ));
        }
    } else {
        hosts.bind(step, ValueSeq::from_file(Path::new(source))?);
    }
    Ok(())
}

fn explain(rows: &[sim::TraceRecord]) -> String {
    let mut channels: BTreeMap<&str, Vec<&sim::TraceRecord>> = BTreeMap::new();
    let mut idle: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        if r.channel.is_empty() {
            *idle.entry(&r.node).or_default() += 1;
        } else {
            channels.entry(&r.channel).or_default().push(r);
        }
    }
    let mut out = String::new();
    for (channel, writes) in &channels {
        let writers: Vec<&str> = {
            let mut w: Vec<&str> = writes.iter().map(|r| r.node.as_str()).collect();
            w.dedup();
            w
        };
        let plural = if writes.len() == 1 { "" } else { "s" };
        out.push_str(&format!(
            "{channel}: {} write{plural} by {}\n",
            writes.len(),
            writers.join(", ")
        ));
        for r in writes {
            out.push_str(&format!(
                "  {:>10}  {}\n",
                sim::format_time(r.time),
                r.value
            ));
        }
    }
    for (node, n) in &idle {
        out.push_str(&format!(
            "{node}: idle {n} time{}\n",
            if *n == 1 { "" } else { "s" }
        ));
    }
    if rows.is_empty() {
        out.push_str("empty trace\n");
    }
    out
}

fn execute(ctx: &Ctx, command: Command) -> Result<(), Reported> {
    match command {
        Command::Check { file, allow_open } => {
            let opts = CheckOptions {
                closed_network: !allow_open,
                ..CheckOptions::default()
            };
            ctx.check(&file, opts)?;
            Ok(())
        }
        Command::Run {
            file,
            horizon,
            seed,
            schedule,
            trace,
            verbose_idle,
            stubs,
        } => {
            let cp = ctx.check(&file, CheckOptions::default())?;
            let mut hosts = builtin_hosts();
            for binding in &stubs {
                bind_stub(&mut hosts, binding).map_err(|e| ctx.error(e))?;
            }
            let to_stdout = trace.as_deref().is_some_and(|p| p.as_os_str() == "-");
            let cfg = SimConfig {
                horizon,
                seed,
                schedule: match schedule {
                    ScheduleArg::Deterministic => Schedule::Deterministic,
                    ScheduleArg::Randomized => Schedule::Randomized,
                },
                trace_path: trace,
                verbose_idle,
            };
            let outcome = sim::run(&cp, &cfg, hosts).map_err(|e| ctx.error(e))?;
            // keep a trace on stdout machine-readable
            let lines = outcome.host_output.join("\n");
            if !lines.is_empty() {
                if to_stdout {
                    eprintln!("{lines}");
                } else {
                    println!("{lines}");
                }
            }
            Ok(())
        }
        Command::Fmt { file, check } => {
            let source = ctx.read(&file)?;
            let formatted = program_to_string(&ctx.parse(&file, &source)?);
            if check {
                if formatted != source {
                    return Err(ctx.error(format!("`{}` is not formatted", file.display())));
                }
            } else {
                print!("{formatted}");
            }
            Ok(())
        }
        Command::ExplainTrace { trace } => {
            let file = std::fs::File::open(&trace)
                .map_err(|e| ctx.error(format!("cannot read `{}`: {e}", trace.display())))?;
            let rows = sim::read_trace_csv(file)
                .map_err(|e| ctx.error(format!("{}: {e}", trace.display())))?;
            print!("{}", explain(&rows));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let color = match std::env::var("MIMOSA_COLOR").as_deref() {
        Ok("0") => false,
        Ok(_) => true,
        Err(_) => std::io::stderr().is_terminal(),
    };
    let ctx = Ctx {
        format: cli.diag_format,
        color: color && cli.diag_format == DiagFormat::Text,
    };
    match execute(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Reported) => ExitCode::from(1),
    }
}
