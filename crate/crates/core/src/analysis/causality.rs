//! Orders equations so every undelayed reference points to an earlier equation.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::ast::{free_variables, Dependency, Equation};
use crate::diag::Diagnostic;

/// Indices of `eqs` in dependency order. Among equations that are ready at the
/// same time the one written first comes first, so the order is deterministic.
pub fn order_indices(eqs: &[Equation]) -> Result<Vec<usize>, Diagnostic> {
    let mut binder: HashMap<&str, usize> = HashMap::new();
    for (i, eq) in eqs.iter().enumerate() {
        for x in eq.lhs.binders() {
            binder.insert(x, i);
        }
    }
    let mut graph: DiGraph<usize, ()> = DiGraph::new();
    let nodes: Vec<_> = (0..eqs.len()).map(|i| graph.add_node(i)).collect();
    let mut indegree = vec![0usize; eqs.len()];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); eqs.len()];
    for (i, eq) in eqs.iter().enumerate() {
        let deps: BTreeSet<usize> = free_variables(&eq.rhs)
            .into_iter()
            .filter(|(_, dep)| *dep == Dependency::Causal)
            .filter_map(|(x, _)| binder.get(x.as_str()).copied())
            .collect();
        for j in deps {
            graph.add_edge(nodes[j], nodes[i], ());
            indegree[i] += 1;
            users[j].push(i);
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> = (0..eqs.len())
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(eqs.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &k in &users[i] {
            indegree[k] -= 1;
            if indegree[k] == 0 {
                ready.push(Reverse(k));
            }
        }
    }
    if order.len() == eqs.len() {
        return Ok(order);
    }

    // report the strongly connected component holding the earliest stuck equation
    let stuck = (0..eqs.len()).find(|i| !order.contains(i)).unwrap();
    let cycle = tarjan_scc(&graph)
        .into_iter()
        .find(|scc| scc.iter().any(|n| graph[*n] == stuck))
        .unwrap_or_default();
    let mut members: Vec<usize> = cycle.iter().map(|n| graph[*n]).collect();
    members.sort_unstable();
    let mut names: Vec<&str> = members.iter().flat_map(|&i| eqs[i].lhs.binders()).collect();
    names.dedup();
    let message = if members.len() == 1 {
        format!(
            "`{}` depends on itself without an intervening `pre`",
            names.join("`, `")
        )
    } else {
        format!(
            "causality cycle between `{}`; break it with `pre`",
            names.join("`, `")
        )
    };
    Err(Diagnostic::error(
        "causality",
        eqs[members.first().copied().unwrap_or(stuck)].span,
        message,
    ))
}

/// The equations of `eqs` in dependency order.
pub fn order_equations(eqs: &[Equation]) -> Result<Vec<Equation>, Diagnostic> {
    Ok(order_indices(eqs)?
        .into_iter()
        .map(|i| eqs[i].clone())
        .collect())
}
