//! Coordination layer: timed FIFO channels and periodic nodes.
//!
//! A channel holds time-tagged values plus a validity time, a lower bound on
//! the tag of any value still to be written. A node activated at `t` with
//! period `p` either fires (consumes its inputs, evaluates its step, writes
//! results tagged `t + p`) or idles (skips the period because some mandatory
//! input is decidably empty). Both push the validity of its outputs to
//! `t + 2p` and move its activation to `t + p`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::analysis::{CheckedProgram, PortKind, PortRef, Type};
use crate::ast::*;
use crate::eval::{eval_with, EvalError, HostDispatch};

/// Virtual time in microseconds.
pub type Time = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: Name,
    /// Oldest first.
    pub queue: VecDeque<(Value, Time)>,
    pub validity: Time,
    pub elem_type: Type,
    pub writer: usize,
    pub reader: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PortStatus {
    /// The oldest value is visible at the given time.
    Available(Value),
    /// Nothing can be read at this time, and nothing will become readable.
    DecidablyAbsent,
    /// The writer may still produce a value visible at this time.
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enabled {
    Fire,
    Idle,
    Blocked,
}

/// Mutations of the rewriting rules, used to check that the confluence tests
/// can tell a broken rule set apart from the real one.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RuleVariant {
    #[default]
    Faithful,
    /// Idling does not advance output validity.
    IdleKeepsValidity,
    /// An empty channel counts as decidably empty whatever its validity.
    EmptyMeansAbsent,
}

pub fn port_status(ch: &Channel, t: Time) -> PortStatus {
    port_status_with(ch, t, RuleVariant::Faithful)
}

fn port_status_with(ch: &Channel, t: Time, variant: RuleVariant) -> PortStatus {
    match ch.queue.front() {
        Some((v, tag)) if *tag <= t => PortStatus::Available(v.clone()),
        Some(_) => PortStatus::DecidablyAbsent,
        None if ch.validity > t || variant == RuleVariant::EmptyMeansAbsent => {
            PortStatus::DecidablyAbsent
        }
        None => PortStatus::Undecided,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub name: Name,
    pub period: Time,
    pub activation: Time,
    /// The step as rewritten by its previous activations.
    pub func: Expr,
    pub inputs: Vec<PortRef>,
    pub outputs: Vec<PortRef>,
}

/// A committed write.
#[derive(Debug, Clone, PartialEq)]
pub struct Write {
    pub time: Time,
    pub channel: usize,
    pub value: Value,
    pub node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Fire { node: usize, time: Time },
    Idle { node: usize, time: Time },
}

impl Activity {
    pub fn node(&self) -> usize {
        match self {
            Activity::Fire { node, .. } | Activity::Idle { node, .. } => *node,
        }
    }

    pub fn time(&self) -> Time {
        match self {
            Activity::Fire { time, .. } | Activity::Idle { time, .. } => *time,
        }
    }
}

/// A broken channel invariant, recorded after the rewrite that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub channel: Name,
    pub node: Name,
    pub time: Time,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "channel `{}` after `{}` at {}us: {}",
            self.channel, self.node, self.time, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoordError {
    #[error("channel `{0}` needs exactly one writer and one reader before it can be simulated")]
    OpenNetwork(Name),
    #[error("node `{node}` is {status:?} at {time}us and cannot {rule}")]
    NotEnabled {
        node: Name,
        time: Time,
        status: Enabled,
        rule: &'static str,
    },
    #[error("node `{node}` at {time}us: {error}")]
    Eval {
        node: Name,
        time: Time,
        error: EvalError,
    },
    #[error("node `{node}` at {time}us: {message}")]
    Output {
        node: Name,
        time: Time,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    pub channels: Vec<Channel>,
    /// Committed writes in commit order.
    pub trace: Vec<Write>,
    /// Every fire and idle rewrite in the order applied.
    pub activity: Vec<Activity>,
    pub violations: Vec<Violation>,
    globals: Arc<BTreeMap<Name, Value>>,
    variant: RuleVariant,
}

/// Initial configuration: every node activated at 0, every channel valid up
/// to its writer's first possible write, initial values tagged 0.
pub fn init_network(cp: &CheckedProgram) -> Result<NetworkState, CoordError> {
    let channels = cp
        .channels
        .iter()
        .map(|c| {
            let (Some(writer), Some(reader)) = (c.writer, c.reader) else {
                return Err(CoordError::OpenNetwork(c.name.clone()));
            };
            Ok(Channel {
                name: c.name.clone(),
                queue: c.init.iter().map(|v| (v.clone(), 0)).collect(),
                validity: cp.nodes[writer].period,
                elem_type: c.elem_type.clone(),
                writer,
                reader,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let nodes = cp
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| NodeState {
            id,
            name: n.name.clone(),
            period: n.period,
            activation: 0,
            func: Expr::var(cp.steps[n.step].name.clone()),
            inputs: n.inputs.clone(),
            outputs: n.outputs.clone(),
        })
        .collect();
    Ok(NetworkState {
        nodes,
        channels,
        trace: Vec::new(),
        activity: Vec::new(),
        violations: Vec::new(),
        globals: crate::eval::program_globals(cp),
        variant: RuleVariant::Faithful,
    })
}

impl NetworkState {
    #[doc(hidden)]
    pub fn set_rule_variant(&mut self, variant: RuleVariant) {
        self.variant = variant;
    }

    pub fn node_enabled(&self, n: usize) -> Enabled {
        node_enabled(self, n)
    }

    fn status(&self, port: &PortRef, t: Time) -> PortStatus {
        port_status_with(&self.channels[port.channel], t, self.variant)
    }

    fn check_channel(
        &mut self,
        c: usize,
        node: usize,
        validity_before: Time,
        written: Option<Time>,
    ) {
        let ch = &self.channels[c];
        let mut problems = Vec::new();
        if let Some((_, tag)) = ch.queue.iter().find(|(_, tag)| *tag > ch.validity) {
            problems.push(format!("tag {tag} exceeds validity {}", ch.validity));
        }
        if ch
            .queue
            .iter()
            .zip(ch.queue.iter().skip(1))
            .any(|(a, b)| a.1 > b.1)
        {
            problems.push("tags are out of order".to_string());
        }
        if ch.validity < validity_before {
            problems.push(format!(
                "validity went back from {validity_before} to {}",
                ch.validity
            ));
        }
        if let Some(tag) = written {
            if tag < validity_before {
                problems.push(format!(
                    "write tagged {tag} below the previous validity {validity_before}"
                ));
            }
        }
        for message in problems {
            if self.variant == RuleVariant::Faithful {
                debug_assert!(false, "channel `{}`: {message}", ch.name);
            }
            self.violations.push(Violation {
                channel: ch.name.clone(),
                node: self.nodes[node].name.clone(),
                time: self.nodes[node].activation,
                message,
            });
        }
    }
}

/// Whether node `n` can fire, must idle, or has to wait for a writer.
pub fn node_enabled(ns: &NetworkState, n: usize) -> Enabled {
    let node = &ns.nodes[n];
    let t = node.activation;
    let mut all_mandatory_available = true;
    for port in &node.inputs {
        match ns.status(port, t) {
            PortStatus::Undecided => return Enabled::Blocked,
            PortStatus::DecidablyAbsent if port.kind == PortKind::Mandatory => {
                all_mandatory_available = false
            }
            _ => {}
        }
    }
    if all_mandatory_available {
        Enabled::Fire
    } else {
        Enabled::Idle
    }
}

fn not_enabled(ns: &NetworkState, n: usize, status: Enabled, rule: &'static str) -> CoordError {
    CoordError::NotEnabled {
        node: ns.nodes[n].name.clone(),
        time: ns.nodes[n].activation,
        status,
        rule,
    }
}

/// Fires node `n`: consumes its inputs, evaluates its step and writes the
/// results tagged `t + p`.
pub fn fire_node(
    ns: &mut NetworkState,
    n: usize,
    hosts: &mut dyn HostDispatch,
) -> Result<(), CoordError> {
    let status = node_enabled(ns, n);
    if status != Enabled::Fire {
        return Err(not_enabled(ns, n, status, "fire"));
    }
    let t = ns.nodes[n].activation;
    let p = ns.nodes[n].period;
    let node_name = ns.nodes[n].name.clone();
    let output_error = |message: String| CoordError::Output {
        node: node_name.clone(),
        time: t,
        message,
    };

    let mut args = Vec::with_capacity(ns.nodes[n].inputs.len());
    for port in ns.nodes[n].inputs.clone() {
        let arg = match (ns.status(&port, t), port.kind) {
            (PortStatus::Available(v), kind) => {
                ns.channels[port.channel].queue.pop_front();
                match kind {
                    PortKind::Mandatory => v,
                    PortKind::Optional => Value::some(v),
                }
            }
            (_, PortKind::Optional) => Value::None,
            (_, PortKind::Mandatory) => unreachable!("fire requires every mandatory input"),
        };
        args.push(arg);
    }
    let arg = match args.len() {
        0 => Value::unit(),
        1 => args.pop().unwrap(),
        _ => Value::Tuple(args),
    };

    let node = &ns.nodes[n];
    let call = Expr::apply(node.func.clone(), arg.to_expr(node.func.span));
    let env = crate::eval::Env::with_globals(ns.globals.clone());
    let result = eval_with(&env, &call, hosts).map_err(|error| CoordError::Eval {
        node: node_name.clone(),
        time: t,
        error,
    })?;
    let ExprKind::Apply(next_func, _) = result.next.kind else {
        unreachable!("an application rewrites to an application")
    };

    let outputs = ns.nodes[n].outputs.clone();
    let values = match (outputs.len(), result.value) {
        (0, _) => Vec::new(),
        (1, v) => vec![v],
        (k, Value::Tuple(vs)) if vs.len() == k => vs,
        (k, other) => {
            return Err(output_error(format!(
                "step returned `{other}` for {k} output ports"
            )))
        }
    };
    let mut writes = Vec::new();
    for (port, v) in outputs.iter().zip(values) {
        let v = match (port.kind, v) {
            (PortKind::Optional, Value::None) => continue,
            (PortKind::Optional, Value::Some(inner)) => *inner,
            (PortKind::Optional, other) => {
                return Err(output_error(format!(
                    "optional output `{}` received `{other}`, not an option",
                    ns.channels[port.channel].name
                )))
            }
            (PortKind::Mandatory, v) => v,
        };
        if v.contains_undef() {
            return Err(output_error(format!(
                "undefined value written to channel `{}`",
                ns.channels[port.channel].name
            )));
        }
        if !v.is_first_order() {
            return Err(output_error(format!(
                "`{v}` cannot be written to channel `{}`",
                ns.channels[port.channel].name
            )));
        }
        writes.push((port.channel, v));
    }

    ns.nodes[n].func = *next_func;
    ns.activity.push(Activity::Fire { node: n, time: t });
    let before: Vec<Time> = outputs
        .iter()
        .map(|o| ns.channels[o.channel].validity)
        .collect();
    for (c, v) in writes {
        ns.channels[c].queue.push_back((v.clone(), t + p));
        ns.trace.push(Write {
            time: t + p,
            channel: c,
            value: v,
            node: n,
        });
    }
    for o in &outputs {
        ns.channels[o.channel].validity = t + 2 * p;
    }
    for (o, validity_before) in outputs.iter().zip(before) {
        let written = ns.channels[o.channel]
            .queue
            .back()
            .filter(|(_, tag)| *tag == t + p)
            .map(|(_, tag)| *tag);
        ns.check_channel(o.channel, n, validity_before, written);
    }
    for i in ns.nodes[n].inputs.clone() {
        let v = ns.channels[i.channel].validity;
        ns.check_channel(i.channel, n, v, None);
    }
    ns.nodes[n].activation = t + p;
    Ok(())
}

/// Idles node `n`: nothing is consumed or written, but its outputs become
/// valid up to `t + 2p` and its activation moves to `t + p`.
pub fn idle_node(ns: &mut NetworkState, n: usize) -> Result<(), CoordError> {
    let status = node_enabled(ns, n);
    if status != Enabled::Idle {
        return Err(not_enabled(ns, n, status, "idle"));
    }
    let t = ns.nodes[n].activation;
    let p = ns.nodes[n].period;
    ns.activity.push(Activity::Idle { node: n, time: t });
    for o in ns.nodes[n].outputs.clone() {
        let before = ns.channels[o.channel].validity;
        if ns.variant != RuleVariant::IdleKeepsValidity {
            ns.channels[o.channel].validity = t + 2 * p;
        }
        ns.check_channel(o.channel, n, before, None);
    }
    ns.nodes[n].activation = t + p;
    Ok(())
}
