#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use mimosa_core::analysis::{check_program, CheckedProgram, Type};
use mimosa_core::ast::Value;
use mimosa_core::coord::{Channel, NetworkState, Time};
use mimosa_core::eval::HostDispatch;
use mimosa_core::parser::parse_program;
use mimosa_core::sim::{builtin_hosts, HostRegistry, ValueSeq};
use rand::Rng;

pub fn program_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/programs")
        .join(name)
}

pub fn source(name: &str) -> String {
    std::fs::read_to_string(program_path(name)).unwrap()
}

pub fn checked(name: &str) -> CheckedProgram {
    let p = parse_program(&source(name)).unwrap_or_else(|e| panic!("{name}: {e:?}"));
    check_program(&p).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

/// The edge detector's input: F, F, T, T, F, F, then F forever.
pub const EDGE_INPUT: [bool; 6] = [false, false, true, true, false, false];

pub fn fib_hosts() -> HostRegistry {
    builtin_hosts()
}

pub fn edge_hosts() -> HostRegistry {
    let mut r = builtin_hosts();
    r.bind(
        "pin",
        ValueSeq::new(EDGE_INPUT.map(Value::boolean).to_vec()).unwrap(),
    );
    r
}

/// Host steps for driving `coord` directly: `pin` replays [`EDGE_INPUT`],
/// everything else returns unit.
#[derive(Default)]
pub struct TestHosts {
    pin_calls: usize,
}

impl HostDispatch for TestHosts {
    fn call(&mut self, name: &str, _arg: Value) -> Result<Value, String> {
        if name == "pin" {
            let v = EDGE_INPUT[self.pin_calls.min(EDGE_INPUT.len() - 1)];
            self.pin_calls += 1;
            Ok(Value::boolean(v))
        } else {
            Ok(Value::unit())
        }
    }
}

/// Channel invariants, checked from the outside against the previous state.
pub fn invariant_problems(
    before: &[Channel],
    after: &[Channel],
    new_writes: &[(usize, Time)],
) -> Vec<String> {
    let mut out = Vec::new();
    for (b, a) in before.iter().zip(after) {
        for (_, tag) in &a.queue {
            if *tag > a.validity {
                out.push(format!("{}: tag {tag} > validity {}", a.name, a.validity));
            }
        }
        let tags: Vec<Time> = a.queue.iter().map(|(_, t)| *t).collect();
        if tags.windows(2).any(|w| w[0] > w[1]) {
            out.push(format!("{}: unsorted tags {tags:?}", a.name));
        }
        if a.validity < b.validity {
            out.push(format!(
                "{}: validity {} -> {}",
                a.name, b.validity, a.validity
            ));
        }
    }
    for &(c, tag) in new_writes {
        if tag < before[c].validity {
            out.push(format!(
                "{}: write tag {tag} < validity {}",
                before[c].name, before[c].validity
            ));
        }
    }
    out
}

/// Random well-typed expressions over `x, y : int`, `b : bool`, `o : int?`.
pub struct ExprGen<R> {
    pub rng: R,
}

pub fn expr_env_types() -> BTreeMap<String, Type> {
    BTreeMap::from([
        ("x".to_string(), Type::Int),
        ("y".to_string(), Type::Int),
        ("b".to_string(), Type::Bool),
        ("o".to_string(), Type::option(Type::Int)),
    ])
}

pub fn expr_env_values() -> Vec<(&'static str, Value)> {
    vec![
        ("x", Value::int(3)),
        ("y", Value::int(-2)),
        ("b", Value::boolean(true)),
        ("o", Value::some(Value::int(7))),
    ]
}

#[derive(Clone, Copy)]
pub enum Ty {
    Int,
    Bool,
    OptInt,
}

impl<R: Rng> ExprGen<R> {
    pub fn expr(&mut self, ty: Ty, depth: u32) -> String {
        // temporal operators work at every type
        if depth > 0 && self.rng.random_bool(0.3) {
            return match self.rng.random_range(0..3) {
                0 => format!("(pre {})", self.expr(ty, depth - 1)),
                1 => format!(
                    "({} -> {})",
                    self.expr(ty, depth - 1),
                    self.expr(ty, depth - 1)
                ),
                _ => format!(
                    "({} fby {})",
                    self.expr(ty, depth - 1),
                    self.expr(ty, depth - 1)
                ),
            };
        }
        if depth > 0 && self.rng.random_bool(0.15) {
            return format!(
                "(if {} then {} else {})",
                self.expr(Ty::Bool, depth - 1),
                self.expr(ty, depth - 1),
                self.expr(ty, depth - 1)
            );
        }
        let leaf = depth == 0 || self.rng.random_bool(0.2);
        match ty {
            Ty::Int if leaf => match self.rng.random_range(0..3) {
                0 => self.rng.random_range(-5..20).to_string(),
                1 => "x".into(),
                _ => "y".into(),
            },
            Ty::Int => match self.rng.random_range(0..4) {
                0 => format!(
                    "({} + {})",
                    self.expr(Ty::Int, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
                1 => format!(
                    "({} - {})",
                    self.expr(Ty::Int, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
                2 => format!(
                    "({} * {})",
                    self.expr(Ty::Int, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
                _ => format!(
                    "(either {} otherwise {})",
                    self.expr(Ty::OptInt, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
            },
            Ty::Bool if leaf => match self.rng.random_range(0..3) {
                0 => "true".into(),
                1 => "false".into(),
                _ => "b".into(),
            },
            Ty::Bool => match self.rng.random_range(0..4) {
                0 => format!(
                    "({} < {})",
                    self.expr(Ty::Int, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
                1 => format!(
                    "({} == {})",
                    self.expr(Ty::Int, depth - 1),
                    self.expr(Ty::Int, depth - 1)
                ),
                2 => format!("(!{})", self.expr(Ty::Bool, depth - 1)),
                _ => format!(
                    "({} && {})",
                    self.expr(Ty::Bool, depth - 1),
                    self.expr(Ty::Bool, depth - 1)
                ),
            },
            Ty::OptInt if leaf => match self.rng.random_range(0..3) {
                0 => "None".into(),
                1 => "o".into(),
                _ => format!("(Some {})", self.rng.random_range(0..10)),
            },
            Ty::OptInt => format!("(Some {})", self.expr(Ty::Int, depth - 1)),
        }
    }

    pub fn any(&mut self, depth: u32) -> String {
        let ty = [Ty::Int, Ty::Bool, Ty::OptInt][self.rng.random_range(0..3)];
        if self.rng.random_bool(0.2) {
            format!("({}, {})", self.expr(ty, depth), self.expr(Ty::Int, depth))
        } else {
            self.expr(ty, depth)
        }
    }
}

/// Applies rewrites to `ns` until every node has passed `horizon`, choosing
/// among enabled nodes with `pick` and checking channel invariants after each
/// rewrite. Returns the problems found.
pub fn drive(
    ns: &mut NetworkState,
    horizon: Time,
    hosts: &mut dyn HostDispatch,
    mut pick: impl FnMut(&NetworkState, &[usize]) -> usize,
) -> Vec<String> {
    use mimosa_core::coord::{fire_node, idle_node, Enabled};
    let mut problems = Vec::new();
    loop {
        let ready: Vec<usize> = (0..ns.nodes.len())
            .filter(|&n| ns.nodes[n].activation + ns.nodes[n].period <= horizon)
            .filter(|&n| ns.node_enabled(n) != Enabled::Blocked)
            .collect();
        if ready.is_empty() {
            return problems;
        }
        let n = ready[pick(ns, &ready)];
        let before = ns.channels.clone();
        let writes_before = ns.trace.len();
        match ns.node_enabled(n) {
            Enabled::Fire => fire_node(ns, n, hosts).unwrap(),
            _ => idle_node(ns, n).unwrap(),
        }
        let writes: Vec<(usize, Time)> = ns.trace[writes_before..]
            .iter()
            .map(|w| (w.channel, w.time))
            .collect();
        problems.extend(invariant_problems(&before, &ns.channels, &writes));
    }
}
