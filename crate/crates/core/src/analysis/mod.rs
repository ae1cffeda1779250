//! Static checks: wiring, types, causality and initialization.

pub mod causality;
pub mod init;
pub mod network;
pub mod types;

use std::collections::BTreeMap;

pub use causality::{order_equations, order_indices};
pub use init::{check_initialization, InitType};
pub use network::{check_wiring, step_order, Wiring};
pub use types::{infer_expr_type, infer_types, Scheme, Type};

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::parser::literal_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortKind {
    Mandatory,
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortRef {
    pub channel: usize,
    pub kind: PortKind,
}

#[derive(Debug, Clone)]
pub struct CheckedStep {
    pub name: Name,
    pub scheme: Scheme,
    pub input: Pattern,
    pub output: Pattern,
    /// Equations in dependency order; `None` for prototypes.
    pub body: Option<Vec<Equation>>,
    /// Initialization type of every input and equation variable.
    pub init: BTreeMap<Name, InitType>,
    pub locals: BTreeMap<Name, Type>,
}

impl CheckedStep {
    pub fn is_prototype(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct CheckedChannel {
    pub name: Name,
    pub elem_type: Type,
    /// Initial contents, oldest first.
    pub init: Vec<Value>,
    /// Node indices; always present once the network check has run.
    pub writer: Option<usize>,
    pub reader: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CheckedNode {
    pub name: Name,
    pub step: usize,
    /// Microseconds.
    pub period: u64,
    pub inputs: Vec<PortRef>,
    pub outputs: Vec<PortRef>,
}

#[derive(Debug, Clone)]
pub struct CheckedProgram {
    pub program: Program,
    /// Indexed like `program.steps`.
    pub steps: Vec<CheckedStep>,
    pub channels: Vec<CheckedChannel>,
    pub nodes: Vec<CheckedNode>,
    /// Step indices with callees before callers.
    pub step_order: Vec<usize>,
}

impl CheckedProgram {
    pub fn step(&self, name: &str) -> Option<&CheckedStep> {
        self.steps.iter().find(|s| s.name == name)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Whether every channel has a writer and a reader, as simulation requires.
    pub fn is_closed(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.writer.is_some() && c.reader.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Require exactly one writer and one reader per channel.
    pub closed_network: bool,
    pub initialization: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            closed_network: true,
            initialization: true,
        }
    }
}

/// Runs every check with the default options.
pub fn check_program(p: &Program) -> Result<CheckedProgram, Vec<Diagnostic>> {
    check_program_with(p, CheckOptions::default())
}

/// Runs the checks phase by phase (wiring and recursion, types, causality,
/// initialization), stopping after the first phase that reports errors.
pub fn check_program_with(
    p: &Program,
    opts: CheckOptions,
) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let order = step_order(p).map_err(|d| diags.extend(d)).ok();
    let wiring = check_wiring(p, opts.closed_network)
        .map_err(|d| diags.extend(d))
        .ok();
    let (Some(order), Some(wiring)) = (order, wiring) else {
        return Err(diags);
    };

    let types = infer_types(p, &order)?;

    let mut bodies = Vec::with_capacity(p.steps.len());
    for s in &p.steps {
        match &s.body {
            None => bodies.push(None),
            Some(body) => match order_equations(body) {
                Ok(ordered) => bodies.push(Some(ordered)),
                Err(d) => {
                    diags.push(d);
                    bodies.push(None);
                }
            },
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let step_names = p.steps.iter().map(|s| s.name.clone()).collect();
    let mut inits = Vec::with_capacity(p.steps.len());
    for (s, body) in p.steps.iter().zip(&bodies) {
        let init = match body {
            Some(body) if opts.initialization => {
                match check_initialization(&s.input, &s.output, body, &step_names) {
                    Ok(env) => env,
                    Err(d) => {
                        diags.extend(d);
                        BTreeMap::new()
                    }
                }
            }
            _ => BTreeMap::new(),
        };
        inits.push(init);
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    let steps = p
        .steps
        .iter()
        .zip(bodies)
        .zip(inits)
        .zip(types.steps)
        .map(|(((s, body), init), t)| CheckedStep {
            name: s.name.clone(),
            scheme: t.scheme,
            input: s.input.clone(),
            output: s.output.clone(),
            body,
            init,
            locals: t.locals,
        })
        .collect();
    let channels = p
        .channels
        .iter()
        .zip(types.channels)
        .enumerate()
        .map(|(i, (c, ty))| CheckedChannel {
            name: c.name.clone(),
            elem_type: ty,
            init: c
                .init
                .iter()
                .map(|e| literal_value(e).expect("initializers are literals"))
                .collect(),
            writer: wiring.writer[i],
            reader: wiring.reader[i],
        })
        .collect();
    let port_refs = |ports: &[Port]| -> Vec<PortRef> {
        ports
            .iter()
            .map(|port| PortRef {
                channel: p
                    .channels
                    .iter()
                    .position(|c| c.name == port.channel)
                    .unwrap(),
                kind: if port.optional {
                    PortKind::Optional
                } else {
                    PortKind::Mandatory
                },
            })
            .collect()
    };
    let nodes = p
        .nodes
        .iter()
        .zip(&wiring.node_steps)
        .map(|(n, &step)| CheckedNode {
            name: n.name.clone(),
            step,
            period: n.period,
            inputs: port_refs(&n.inputs),
            outputs: port_refs(&n.outputs),
        })
        .collect();
    Ok(CheckedProgram {
        program: p.clone(),
        steps,
        channels,
        nodes,
        step_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    const FIB: &str = "step print_int (_ : int) --> ()
step add (x, y) --> z { z = x + y }
step split inp --> (o1, o2, o3) { o1, o2, o3 = inp, inp, inp }

channel a : int = { 1 }
channel b : int = { 0 }
channel c : int
channel d : int

node add implements add (a, c) --> (b) every 10ms
node split implements split (b) --> (a, d, c) every 10ms
node print implements print_int (d) --> () every 10ms";

    #[test]
    fn fibonacci_network() {
        let cp = check_program(&parse_program(FIB).unwrap()).unwrap();
        assert_eq!(
            cp.step("add").unwrap().scheme.to_string(),
            "(int, int) -> int"
        );
        assert_eq!(
            cp.step("print_int").unwrap().scheme.to_string(),
            "int -> unit"
        );
        let b = cp.channel_index("b").unwrap();
        assert_eq!(cp.channels[b].writer, cp.node_index("add"));
        assert_eq!(cp.channels[b].reader, cp.node_index("split"));
        assert_eq!(cp.channels[0].init, vec![Value::int(1)]);
        assert!(cp.is_closed());
    }

    #[test]
    fn phases_stop_at_first_failure() {
        // the type error is not reported while the wiring is broken
        let src = "step f x --> y { y = x + true }\nchannel a : int\nnode n implements g (a) --> () every 1ms";
        let errs = check_program(&parse_program(src).unwrap()).unwrap_err();
        assert!(errs.iter().all(|d| d.code == "network"), "{errs:?}");
    }

    #[test]
    fn initialization_can_be_disabled() {
        let p = parse_program("step s () --> x { x = 0 -> 0 -> pre pre x }").unwrap();
        assert_eq!(check_program(&p).unwrap_err()[0].code, "init");
        let opts = CheckOptions {
            initialization: false,
            ..CheckOptions::default()
        };
        assert!(check_program_with(&p, opts).is_ok());
    }
}
