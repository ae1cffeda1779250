//! Canonical concrete syntax. Printing then re-parsing yields an equal tree
//! for everything the parser can produce.

use std::fmt::Write;

use crate::ast::*;
use crate::parser::format_duration;

// Binding strength of each syntactic form; higher binds tighter.
const TUPLE: u8 = 0;
const ARROW: u8 = 1;
const FBY: u8 = 2;
const EITHER: u8 = 3;
const IF: u8 = 4;
const PREFIX: u8 = 10;
const APPLY: u8 = 11;
const ATOM: u8 = 12;

fn binop_level(p: Prim) -> u8 {
    match p {
        Prim::Or => 5,
        Prim::And => 6,
        Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge | Prim::Eq | Prim::Ne => 7,
        Prim::Add | Prim::Sub => 8,
        Prim::Mul | Prim::Div => 9,
        Prim::Neg | Prim::Not => PREFIX,
    }
}

fn level(e: &Expr) -> u8 {
    if let Some((p, _, _)) = e.as_binop() {
        return binop_level(p);
    }
    if e.as_unop().is_some() {
        return PREFIX;
    }
    match &e.kind {
        ExprKind::Arrow(..) => ARROW,
        ExprKind::Fby(..) => FBY,
        ExprKind::Either(..) => EITHER,
        ExprKind::If(..) => IF,
        ExprKind::Pre(_) | ExprKind::Some(_) => PREFIX,
        ExprKind::Const(Literal::Int(i)) if *i < 0 => PREFIX,
        ExprKind::Const(Literal::Real(r)) if r.is_sign_negative() => PREFIX,
        ExprKind::Apply(..) => APPLY,
        _ => ATOM,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, TUPLE);
    out
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    if level(e) < min {
        out.push('(');
        write_expr(out, e, TUPLE);
        out.push(')');
        return;
    }
    if let Some((p, a, b)) = e.as_binop() {
        let l = binop_level(p);
        write_expr(out, a, l);
        let _ = write!(out, " {} ", p.symbol());
        write_expr(out, b, l + 1);
        return;
    }
    if let Some((p, a)) = e.as_unop() {
        out.push_str(p.symbol());
        let mut operand = String::new();
        let literal = matches!(a.kind, ExprKind::Const(Literal::Int(_) | Literal::Real(_)));
        if p == Prim::Neg && literal && level(a) == ATOM {
            // `-3` would read back as a negative literal
            let _ = write!(operand, "({})", expr_to_string(a));
        } else {
            write_expr(&mut operand, a, PREFIX);
        }
        if operand.starts_with('-') {
            out.push(' ');
        }
        out.push_str(&operand);
        return;
    }
    match &e.kind {
        ExprKind::Var(x) => out.push_str(x),
        ExprKind::Const(c) => {
            let _ = write!(out, "{c}");
        }
        ExprKind::Prim(p) => out.push_str(p.name()),
        ExprKind::Tuple(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, item, ARROW);
            }
            out.push(')');
        }
        ExprKind::Pre(a) => {
            out.push_str("pre ");
            write_expr(out, a, PREFIX);
        }
        ExprKind::Some(a) => {
            out.push_str("Some ");
            write_expr(out, a, PREFIX);
        }
        ExprKind::Arrow(a, b) => {
            write_expr(out, a, FBY);
            out.push_str(" -> ");
            write_expr(out, b, ARROW);
        }
        ExprKind::Fby(a, b) => {
            write_expr(out, a, EITHER);
            out.push_str(" fby ");
            write_expr(out, b, FBY);
        }
        ExprKind::Either(a, b) => {
            out.push_str("either ");
            write_expr(out, a, ARROW);
            out.push_str(" otherwise ");
            write_expr(out, b, EITHER);
        }
        ExprKind::If(c, t, f) => {
            out.push_str("if ");
            write_expr(out, c, ARROW);
            out.push_str(" then ");
            write_expr(out, t, ARROW);
            out.push_str(" else ");
            write_expr(out, f, IF);
        }
        ExprKind::Apply(f, a) => {
            write_expr(out, f, APPLY);
            out.push(' ');
            write_expr(out, a, ATOM);
        }
        ExprKind::NoneLit => out.push_str("None"),
        ExprKind::Lambda(lam) => {
            let _ = write!(
                out,
                "<fun {} --> {} {{ {} }}>",
                pattern_elem_to_string(&lam.input),
                pattern_elem_to_string(&lam.output),
                lam.body
                    .iter()
                    .map(equation_to_string)
                    .collect::<Vec<_>>()
                    .join("; ")
            );
        }
        ExprKind::Undef => out.push('⊥'),
        ExprKind::Hole(id) => {
            let _ = write!(out, "<hole {id}>");
        }
    }
}

/// Equation in `lhs = rhs` form, with top-level tuples written without parentheses.
pub fn equation_to_string(eq: &Equation) -> String {
    let mut out = match &eq.lhs.kind {
        PatternKind::Tuple(items) if eq.lhs.ty.is_none() => items
            .iter()
            .map(pattern_to_string)
            .collect::<Vec<_>>()
            .join(", "),
        _ => pattern_to_string(&eq.lhs),
    };
    out.push_str(" = ");
    match &eq.rhs.kind {
        ExprKind::Tuple(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(&mut out, item, ARROW);
            }
        }
        _ => write_expr(&mut out, &eq.rhs, TUPLE),
    }
    out
}

pub fn pattern_to_string(p: &Pattern) -> String {
    let mut out = match &p.kind {
        PatternKind::Var(x) => x.clone(),
        PatternKind::Wildcard => "_".to_string(),
        PatternKind::Unit => "()".to_string(),
        PatternKind::Tuple(items) => format!(
            "({})",
            items
                .iter()
                .map(pattern_to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    if let Some(ty) = &p.ty {
        let _ = write!(out, " : {}", type_to_string(ty));
    }
    out
}

/// Pattern as it appears in a step signature: annotated patterns get parentheses.
pub fn pattern_elem_to_string(p: &Pattern) -> String {
    if p.ty.is_some() {
        format!("({})", pattern_to_string(p))
    } else {
        pattern_to_string(p)
    }
}

pub fn type_to_string(t: &TypeExpr) -> String {
    match &t.kind {
        TypeExprKind::Int => "int".into(),
        TypeExprKind::Bool => "bool".into(),
        TypeExprKind::Real => "real".into(),
        TypeExprKind::Unit => "unit".into(),
        TypeExprKind::Option(inner) => format!("{}?", type_to_string(inner)),
        TypeExprKind::Tuple(items) => format!(
            "({})",
            items
                .iter()
                .map(type_to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn ports_to_string(ports: &[Port]) -> String {
    let items: Vec<String> = ports
        .iter()
        .map(|p| format!("{}{}", p.channel, if p.optional { "?" } else { "" }))
        .collect();
    format!("({})", items.join(", "))
}

/// Whole program: steps, then channels, then nodes, each group separated by
/// a blank line.
pub fn program_to_string(p: &Program) -> String {
    let mut groups = Vec::new();
    if !p.steps.is_empty() {
        let mut g = String::new();
        for s in &p.steps {
            let _ = write!(
                g,
                "step {} {} --> {}",
                s.name,
                pattern_elem_to_string(&s.input),
                pattern_elem_to_string(&s.output)
            );
            if let Some(body) = &s.body {
                g.push_str(" {\n");
                for eq in body {
                    let _ = writeln!(g, "    {};", equation_to_string(eq));
                }
                g.push('}');
            }
            g.push('\n');
        }
        groups.push(g);
    }
    if !p.channels.is_empty() {
        let mut g = String::new();
        for c in &p.channels {
            let _ = write!(g, "channel {} : {}", c.name, type_to_string(&c.ty));
            if !c.init.is_empty() {
                let items: Vec<String> = c.init.iter().map(expr_to_string).collect();
                let _ = write!(g, " = {{ {} }}", items.join(", "));
            }
            g.push('\n');
        }
        groups.push(g);
    }
    if !p.nodes.is_empty() {
        let mut g = String::new();
        for n in &p.nodes {
            let _ = writeln!(
                g,
                "node {} implements {} {} --> {} every {}",
                n.name,
                n.step,
                ports_to_string(&n.inputs),
                ports_to_string(&n.outputs),
                format_duration(n.period)
            );
        }
        groups.push(g);
    }
    groups.join("\n")
}
