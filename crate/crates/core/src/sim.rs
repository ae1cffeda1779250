//! Discrete-event driver: picks which node to rewrite next, runs host steps
//! and records the timed trace.
//!
//! A node activated at `t` with period `p` is rewritten only while
//! `t + p <= horizon`, so a run covers exactly the periods that end within
//! the horizon. The deterministic schedule always takes the enabled node with
//! the earliest activation, ties going to the node declared first; that node
//! can never be blocked, because every writer it waits for is at least as
//! late. Host side effects are reported ordered by activation time and then
//! declaration order whatever the schedule.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::CheckedProgram;
use crate::ast::*;
use crate::coord::{self, Activity, CoordError, Enabled, NetworkState, RuleVariant, Time};
use crate::eval::HostDispatch;
use crate::parser::parse_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Deterministic,
    /// Uniform choice among the enabled nodes, for confluence testing.
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Microseconds; must be positive.
    pub horizon: Time,
    pub seed: u64,
    pub schedule: Schedule,
    /// CSV destination; `-` means standard output.
    pub trace_path: Option<PathBuf>,
    /// Also write idle rewrites to the trace file.
    pub verbose_idle: bool,
}

impl SimConfig {
    pub fn new(horizon: Time) -> Self {
        SimConfig {
            horizon,
            seed: 0,
            schedule: Schedule::Deterministic,
            trace_path: None,
            verbose_idle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    /// Tag of the written value.
    pub time: Time,
    pub channel: Name,
    pub value: Value,
    pub node: Name,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}us {} {} ({})",
            self.time, self.channel, self.value, self.node
        )
    }
}

/// Line of output produced by a host step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostLine {
    pub time: Time,
    pub node: usize,
    pub text: String,
}

/// What a host step sees of the activation that calls it.
pub struct HostCtx<'a> {
    /// Activation time of the calling node.
    pub time: Time,
    pub node: &'a str,
    pub node_index: usize,
    output: &'a mut Vec<HostLine>,
}

impl HostCtx<'_> {
    /// Emits a line of host output for this activation.
    pub fn emit(&mut self, text: impl Into<String>) {
        self.output.push(HostLine {
            time: self.time,
            node: self.node_index,
            text: text.into(),
        });
    }
}

/// Implementation of a prototype step.
pub trait HostStep {
    fn call(&mut self, ctx: &mut HostCtx<'_>, arg: Value) -> Result<Value, String>;
}

impl<F> HostStep for F
where
    F: FnMut(&mut HostCtx<'_>, Value) -> Result<Value, String>,
{
    fn call(&mut self, ctx: &mut HostCtx<'_>, arg: Value) -> Result<Value, String> {
        self(ctx, arg)
    }
}

#[derive(Default)]
pub struct HostRegistry {
    hosts: BTreeMap<Name, Box<dyn HostStep>>,
}

impl HostRegistry {
    pub fn new() -> Self {
        HostRegistry::default()
    }

    pub fn bind(&mut self, step: impl Into<Name>, host: impl HostStep + 'static) -> &mut Self {
        self.hosts.insert(step.into(), Box::new(host));
        self
    }

    pub fn contains(&self, step: &str) -> bool {
        self.hosts.contains_key(step)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.hosts.keys().map(String::as_str)
    }
}

impl fmt::Debug for HostRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.hosts.keys()).finish()
    }
}

/// Formats an activation time for host output: milliseconds when exact.
pub fn format_time(t: Time) -> String {
    if t.is_multiple_of(1_000) {
        format!("{}ms", t / 1_000)
    } else {
        format!("{t}us")
    }
}

/// Prints its argument as `<time>: <value>` and returns unit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Printer;

impl HostStep for Printer {
    fn call(&mut self, ctx: &mut HostCtx<'_>, arg: Value) -> Result<Value, String> {
        ctx.emit(format!("{}: {arg}", format_time(ctx.time)));
        Ok(Value::unit())
    }
}

/// Returns successive values on each activation of a node, then keeps
/// returning the last one. Each node has its own position.
#[derive(Debug, Clone)]
pub struct ValueSeq {
    values: Vec<Value>,
    cursors: BTreeMap<usize, usize>,
}

impl ValueSeq {
    pub fn new(values: Vec<Value>) -> Result<Self, String> {
        if values.is_empty() {
            return Err("a value sequence needs at least one value".into());
        }
        Ok(ValueSeq {
            values,
            cursors: BTreeMap::new(),
        })
    }

    /// One literal per line; blank lines and `--` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split("--").next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            values.push(parse_value(line).map_err(|e| format!("line {}: {e}", i + 1))?);
        }
        ValueSeq::new(values)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read `{}`: {e}", path.display()))?;
        ValueSeq::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

impl HostStep for ValueSeq {
    fn call(&mut self, ctx: &mut HostCtx<'_>, _arg: Value) -> Result<Value, String> {
        let cursor = self.cursors.entry(ctx.node_index).or_insert(0);
        let v = self.values[(*cursor).min(self.values.len() - 1)].clone();
        *cursor += 1;
        Ok(v)
    }
}

/// Returns the same value forever.
#[derive(Debug, Clone)]
pub struct ConstSeq(pub Value);

impl HostStep for ConstSeq {
    fn call(&mut self, _ctx: &mut HostCtx<'_>, _arg: Value) -> Result<Value, String> {
        Ok(self.0.clone())
    }
}

/// Registry binding `print_int` and `print` to [`Printer`].
pub fn builtin_hosts() -> HostRegistry {
    let mut r = HostRegistry::new();
    r.bind("print_int", Printer).bind("print", Printer);
    r
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("no host implementation bound for prototype `{0}`")]
    UnboundPrototype(Name),
    #[error("the horizon must be positive")]
    ZeroHorizon,
    #[error(transparent)]
    Coord(#[from] CoordError),
    #[error("no node can make progress at {time}us although {pending} node(s) are still due")]
    Livelock { time: Time, pending: usize },
    #[error("cannot write trace: {0}")]
    Io(String),
}

struct Dispatch<'a> {
    hosts: &'a mut HostRegistry,
    time: Time,
    node: &'a str,
    node_index: usize,
    output: &'a mut Vec<HostLine>,
}

impl HostDispatch for Dispatch<'_> {
    fn call(&mut self, name: &str, arg: Value) -> Result<Value, String> {
        let host = self
            .hosts
            .hosts
            .get_mut(name)
            .ok_or_else(|| format!("no implementation bound for `{name}`"))?;
        let mut ctx = HostCtx {
            time: self.time,
            node: self.node,
            node_index: self.node_index,
            output: self.output,
        };
        host.call(&mut ctx, arg)
    }
}

/// An incremental simulation.
pub struct Simulation {
    net: NetworkState,
    hosts: HostRegistry,
    schedule: Schedule,
    rng: ChaCha8Rng,
    host_output: Vec<HostLine>,
}

impl Simulation {
    pub fn new(
        cp: &CheckedProgram,
        hosts: HostRegistry,
        schedule: Schedule,
        seed: u64,
    ) -> Result<Self, SimError> {
        for s in &cp.steps {
            if s.is_prototype() && !hosts.contains(&s.name) {
                return Err(SimError::UnboundPrototype(s.name.clone()));
            }
        }
        Ok(Simulation {
            net: coord::init_network(cp)?,
            hosts,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            host_output: Vec::new(),
        })
    }

    #[doc(hidden)]
    pub fn set_rule_variant(&mut self, variant: RuleVariant) {
        self.net.set_rule_variant(variant);
    }

    pub fn network(&self) -> &NetworkState {
        &self.net
    }

    /// Applies rewrites until no node has a period ending at or before
    /// `horizon`. Later calls continue from where this one stopped.
    pub fn run_until(&mut self, horizon: Time) -> Result<(), SimError> {
        loop {
            let due: Vec<usize> = (0..self.net.nodes.len())
                .filter(|&n| {
                    let node = &self.net.nodes[n];
                    node.activation + node.period <= horizon
                })
                .collect();
            if due.is_empty() {
                return Ok(());
            }
            let ready: Vec<(usize, Enabled)> = due
                .iter()
                .map(|&n| (n, self.net.node_enabled(n)))
                .filter(|(_, e)| *e != Enabled::Blocked)
                .collect();
            let pick = match self.schedule {
                Schedule::Deterministic => ready
                    .iter()
                    .min_by_key(|(n, _)| (self.net.nodes[*n].activation, *n))
                    .copied(),
                Schedule::Randomized if ready.is_empty() => None,
                Schedule::Randomized => Some(ready[self.rng.random_range(0..ready.len())]),
            };
            let Some((n, status)) = pick else {
                let time = due
                    .iter()
                    .map(|&n| self.net.nodes[n].activation)
                    .min()
                    .unwrap();
                return Err(SimError::Livelock {
                    time,
                    pending: due.len(),
                });
            };
            match status {
                Enabled::Fire => {
                    let node = &self.net.nodes[n];
                    let name = node.name.clone();
                    let mut dispatch = Dispatch {
                        hosts: &mut self.hosts,
                        time: node.activation,
                        node: &name,
                        node_index: n,
                        output: &mut self.host_output,
                    };
                    coord::fire_node(&mut self.net, n, &mut dispatch)?;
                }
                Enabled::Idle => coord::idle_node(&mut self.net, n)?,
                Enabled::Blocked => unreachable!(),
            }
        }
    }

    /// Committed writes so far, ordered by tag and then commit order.
    pub fn trace(&self) -> Vec<TraceEvent> {
        let mut events: Vec<TraceEvent> = self
            .net
            .trace
            .iter()
            .map(|w| TraceEvent {
                time: w.time,
                channel: self.net.channels[w.channel].name.clone(),
                value: w.value.clone(),
                node: self.net.nodes[w.node].name.clone(),
            })
            .collect();
        events.sort_by_key(|e| e.time);
        events
    }

    pub fn activity(&self) -> &[Activity] {
        &self.net.activity
    }

    /// Host output ordered by activation time, then node declaration order.
    pub fn host_output(&self) -> Vec<String> {
        let mut lines = self.host_output.clone();
        lines.sort_by_key(|l| (l.time, l.node));
        lines.into_iter().map(|l| l.text).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Vec<TraceEvent>,
    pub activity: Vec<Activity>,
    pub host_output: Vec<String>,
    pub violations: Vec<coord::Violation>,
    /// Node names, indexed like the node ids in `activity`.
    pub nodes: Vec<Name>,
}

impl SimOutcome {
    /// Values written to `channel`, in order.
    pub fn values(&self, channel: &str) -> Vec<Value> {
        self.trace
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.value.clone())
            .collect()
    }

    /// `(tag, value)` history of every channel that received a write.
    pub fn histories(&self) -> BTreeMap<Name, Vec<(Time, Value)>> {
        let mut out: BTreeMap<Name, Vec<(Time, Value)>> = BTreeMap::new();
        for e in &self.trace {
            out.entry(e.channel.clone())
                .or_default()
                .push((e.time, e.value.clone()));
        }
        out
    }
}

/// Simulates `cp` up to `cfg.horizon`, writing the trace file if one is configured.
pub fn run(
    cp: &CheckedProgram,
    cfg: &SimConfig,
    hosts: HostRegistry,
) -> Result<SimOutcome, SimError> {
    run_variant(cp, cfg, hosts, RuleVariant::Faithful)
}

#[doc(hidden)]
pub fn run_variant(
    cp: &CheckedProgram,
    cfg: &SimConfig,
    hosts: HostRegistry,
    variant: RuleVariant,
) -> Result<SimOutcome, SimError> {
    if cfg.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let mut sim = Simulation::new(cp, hosts, cfg.schedule, cfg.seed)?;
    sim.set_rule_variant(variant);
    sim.run_until(cfg.horizon)?;
    let outcome = SimOutcome {
        trace: sim.trace(),
        activity: sim.activity().to_vec(),
        host_output: sim.host_output(),
        violations: sim.network().violations.clone(),
        nodes: sim.network().nodes.iter().map(|n| n.name.clone()).collect(),
    };
    if let Some(path) = &cfg.trace_path {
        let idle = cfg.verbose_idle.then_some(outcome.activity.as_slice());
        let result = if path.as_os_str() == "-" {
            write_trace_csv(io::stdout().lock(), &outcome.trace, idle, &outcome.nodes)
        } else {
            std::fs::File::create(path)
                .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
                .and_then(|f| {
                    write_trace_csv(io::BufWriter::new(f), &outcome.trace, idle, &outcome.nodes)
                })
        };
        result?;
    }
    Ok(outcome)
}

/// Writes `time_us,channel,value,node` rows. Idle rewrites, if given, appear
/// at their activation time with an empty channel and the value `idle`.
pub fn write_trace_csv<W: io::Write>(
    w: W,
    trace: &[TraceEvent],
    idle: Option<&[Activity]>,
    nodes: &[Name],
) -> Result<(), SimError> {
    let io_err = |e: csv::Error| SimError::Io(e.to_string());
    let mut rows: Vec<(Time, String, String, String)> = trace
        .iter()
        .map(|e| {
            (
                e.time,
                e.channel.clone(),
                e.value.to_string(),
                e.node.clone(),
            )
        })
        .collect();
    if let Some(activity) = idle {
        for a in activity {
            if let Activity::Idle { node, time } = a {
                rows.push((*time, String::new(), "idle".into(), nodes[*node].clone()));
            }
        }
        rows.sort_by_key(|r| r.0);
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time_us", "channel", "value", "node"])
        .map_err(io_err)?;
    for (time, channel, value, node) in rows {
        out.write_record([time.to_string(), channel, value, node])
            .map_err(io_err)?;
    }
    out.flush().map_err(|e| SimError::Io(e.to_string()))
}

/// A row of a trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Time,
    pub channel: String,
    pub value: String,
    pub node: String,
}

pub fn read_trace_csv<R: io::Read>(r: R) -> Result<Vec<TraceRecord>, String> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_us", "channel", "value", "node"] {
        return Err("expected the header `time_us,channel,value,node`".into());
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let field = |k: usize| record.get(k).unwrap_or("").to_string();
        let time = field(0).parse().map_err(|_| {
            format!(
                "row {}: `{}` is not a time in microseconds",
                i + 2,
                field(0)
            )
        })?;
        out.push(TraceRecord {
            time,
            channel: field(1),
            value: field(2),
            node: field(3),
        });
    }
    Ok(out)
}

/// Where a randomized run first differed from the deterministic one.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub seed: u64,
    pub channel: Name,
    pub index: usize,
    pub expected: Option<(Time, Value)>,
    pub found: Option<(Time, Value)>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |x: &Option<(Time, Value)>| match x {
            Some((t, v)) => format!("{v}@{t}us"),
            None => "nothing".into(),
        };
        write!(
            f,
            "seed {}: channel `{}` write #{} is {} instead of {}",
            self.seed,
            self.channel,
            self.index,
            show(&self.found),
            show(&self.expected)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub runs: usize,
    pub divergence: Option<Divergence>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.divergence.is_none()
    }
}

fn first_divergence(
    seed: u64,
    expected: &BTreeMap<Name, Vec<(Time, Value)>>,
    found: &BTreeMap<Name, Vec<(Time, Value)>>,
) -> Option<Divergence> {
    let channels: std::collections::BTreeSet<&Name> = expected.keys().chain(found.keys()).collect();
    let empty = Vec::new();
    for channel in channels {
        let a = expected.get(channel).unwrap_or(&empty);
        let b = found.get(channel).unwrap_or(&empty);
        for i in 0..a.len().max(b.len()) {
            if a.get(i) != b.get(i) {
                return Some(Divergence {
                    seed,
                    channel: channel.clone(),
                    index: i,
                    expected: a.get(i).cloned(),
                    found: b.get(i).cloned(),
                });
            }
        }
    }
    None
}

/// Runs the deterministic schedule once and `k` randomized schedules (seeds
/// `cfg.seed`, `cfg.seed + 1`, …) and compares per-channel histories.
/// `hosts` must build fresh, deterministic host steps for every run.
pub fn run_randomized_equivalence(
    cp: &CheckedProgram,
    cfg: &SimConfig,
    hosts: &dyn Fn() -> HostRegistry,
    k: usize,
) -> Result<EquivalenceReport, SimError> {
    run_randomized_equivalence_variant(cp, cfg, hosts, k, RuleVariant::Faithful)
}

#[doc(hidden)]
pub fn run_randomized_equivalence_variant(
    cp: &CheckedProgram,
    cfg: &SimConfig,
    hosts: &dyn Fn() -> HostRegistry,
    k: usize,
    variant: RuleVariant,
) -> Result<EquivalenceReport, SimError> {
    let base = SimConfig {
        schedule: Schedule::Deterministic,
        trace_path: None,
        ..cfg.clone()
    };
    let reference = run_variant(cp, &base, hosts(), variant)?.histories();
    for i in 0..k {
        let seed = cfg.seed.wrapping_add(i as u64);
        let randomized = SimConfig {
            schedule: Schedule::Randomized,
            seed,
            ..base.clone()
        };
        let histories = run_variant(cp, &randomized, hosts(), variant)?.histories();
        if let Some(d) = first_divergence(seed, &reference, &histories) {
            return Ok(EquivalenceReport {
                runs: i + 1,
                divergence: Some(d),
            });
        }
    }
    Ok(EquivalenceReport {
        runs: k,
        divergence: None,
    })
}
