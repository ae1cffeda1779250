//! Step call graph and channel wiring.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::ast::*;
use crate::diag::Diagnostic;

/// Steps called from the body of `step`, as indices into `p.steps`.
pub fn callees(p: &Program, step: &StepDecl) -> BTreeSet<usize> {
    let Some(body) = &step.body else {
        return BTreeSet::new();
    };
    let mut locals: BTreeSet<&str> = step.input.binders().into_iter().collect();
    for eq in body {
        locals.extend(eq.lhs.binders());
    }
    body.iter()
        .flat_map(|eq| free_variables(&eq.rhs).into_keys())
        .filter(|x| !locals.contains(x.as_str()))
        .filter_map(|x| p.steps.iter().position(|s| s.name == x))
        .collect()
}

/// Step indices with every callee before its callers, ties broken by
/// declaration order. Fails if steps call each other recursively.
pub fn step_order(p: &Program) -> Result<Vec<usize>, Vec<Diagnostic>> {
    let n = p.steps.len();
    let calls: Vec<BTreeSet<usize>> = p.steps.iter().map(|s| callees(p, s)).collect();
    let mut remaining: Vec<usize> = calls.iter().map(BTreeSet::len).collect();
    let mut callers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, cs) in calls.iter().enumerate() {
        for &c in cs {
            callers[c].push(i);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| remaining[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &k in &callers[i] {
            remaining[k] -= 1;
            if remaining[k] == 0 {
                ready.push(Reverse(k));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    let mut graph: DiGraph<usize, ()> = DiGraph::new();
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for (i, cs) in calls.iter().enumerate() {
        for &c in cs {
            graph.add_edge(nodes[i], nodes[c], ());
        }
    }
    let mut diags = Vec::new();
    let mut sccs = tarjan_scc(&graph);
    sccs.iter_mut()
        .for_each(|scc| scc.sort_by_key(|n| graph[*n]));
    sccs.sort_by_key(|scc| graph[scc[0]]);
    for scc in sccs {
        let members: Vec<usize> = scc.iter().map(|n| graph[*n]).collect();
        let first = &p.steps[members[0]];
        if members.len() == 1 {
            if calls[members[0]].contains(&members[0]) {
                diags.push(Diagnostic::error(
                    "network",
                    first.span,
                    format!(
                        "step `{}` calls itself; recursive steps are not allowed",
                        first.name
                    ),
                ));
            }
        } else {
            let names: Vec<&str> = members.iter().map(|&i| p.steps[i].name.as_str()).collect();
            diags.push(Diagnostic::error(
                "network",
                first.span,
                format!(
                    "steps `{}` are mutually recursive; recursive steps are not allowed",
                    names.join("`, `")
                ),
            ));
        }
    }
    Err(diags)
}

/// Resolved wiring: which node writes and reads each channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wiring {
    /// Indexed like `Program::nodes`.
    pub node_steps: Vec<usize>,
    /// Indexed like `Program::channels`.
    pub writer: Vec<Option<usize>>,
    pub reader: Vec<Option<usize>>,
}

/// Resolves node steps and port channels. With `closed`, every channel must
/// also have exactly one writer and one reader.
pub fn check_wiring(p: &Program, closed: bool) -> Result<Wiring, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut node_steps = Vec::new();
    let mut writer: Vec<Option<usize>> = vec![None; p.channels.len()];
    let mut reader: Vec<Option<usize>> = vec![None; p.channels.len()];
    for (ni, node) in p.nodes.iter().enumerate() {
        match p.steps.iter().position(|s| s.name == node.step) {
            Some(si) => node_steps.push(si),
            None => {
                node_steps.push(usize::MAX);
                diags.push(Diagnostic::error(
                    "network",
                    node.span,
                    format!(
                        "node `{}` implements unknown step `{}`",
                        node.name, node.step
                    ),
                ));
            }
        }
        for (ports, slots, role) in [
            (&node.inputs, &mut reader, "read"),
            (&node.outputs, &mut writer, "written"),
        ] {
            for port in ports {
                let Some(ci) = p.channels.iter().position(|c| c.name == port.channel) else {
                    diags.push(Diagnostic::error(
                        "network",
                        port.span,
                        format!(
                            "node `{}` uses unknown channel `{}`",
                            node.name, port.channel
                        ),
                    ));
                    continue;
                };
                match slots[ci] {
                    Some(other) => diags.push(Diagnostic::error(
                        "network",
                        port.span,
                        format!(
                            "channel `{}` is {role} by both `{}` and `{}`",
                            port.channel, p.nodes[other].name, node.name
                        ),
                    )),
                    None => slots[ci] = Some(ni),
                }
            }
        }
    }
    if closed {
        for (ci, c) in p.channels.iter().enumerate() {
            if writer[ci].is_none() {
                diags.push(Diagnostic::error(
                    "network",
                    c.span,
                    format!("channel `{}` has no writing node", c.name),
                ));
            }
            if reader[ci].is_none() {
                diags.push(Diagnostic::error(
                    "network",
                    c.span,
                    format!("channel `{}` has no reading node", c.name),
                ));
            }
        }
    }
    if diags.is_empty() {
        Ok(Wiring {
            node_steps,
            writer,
            reader,
        })
    } else {
        Err(diags)
    }
}
