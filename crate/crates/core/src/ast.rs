//! Abstract syntax of Mimosa programs and runtime values.
//!
//! Every syntax node carries a [`Span`]. Equality on expressions, patterns
//! and equations ignores spans, so two trees parsed from differently
//! formatted sources compare equal when their structure matches.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub type Name = String;

/// Byte range into a source buffer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span {
            start: start as u32,
            end: end as u32,
        }
    }

    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Real(f64),
    Unit,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Real(r) => f.write_str(&format_real(*r)),
            Literal::Unit => f.write_str("()"),
        }
    }
}

/// Formats a real so that it lexes back as a real literal.
pub fn format_real(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains(['.', 'e', 'E', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// Standard-library operations targeted by the infix and prefix operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Not,
}

impl Prim {
    pub const ALL: [Prim; 14] = [
        Prim::Add,
        Prim::Sub,
        Prim::Mul,
        Prim::Div,
        Prim::Neg,
        Prim::Lt,
        Prim::Le,
        Prim::Gt,
        Prim::Ge,
        Prim::Eq,
        Prim::Ne,
        Prim::And,
        Prim::Or,
        Prim::Not,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Prim::Add => "add",
            Prim::Sub => "sub",
            Prim::Mul => "mul",
            Prim::Div => "div",
            Prim::Neg => "neg",
            Prim::Lt => "lt",
            Prim::Le => "le",
            Prim::Gt => "gt",
            Prim::Ge => "ge",
            Prim::Eq => "eq",
            Prim::Ne => "ne",
            Prim::And => "and",
            Prim::Or => "or",
            Prim::Not => "not",
        }
    }

    pub fn from_name(name: &str) -> Option<Prim> {
        Prim::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Infix spelling, for binary operations.
    pub fn symbol(self) -> &'static str {
        match self {
            Prim::Add => "+",
            Prim::Sub | Prim::Neg => "-",
            Prim::Mul => "*",
            Prim::Div => "/",
            Prim::Lt => "<",
            Prim::Le => "<=",
            Prim::Gt => ">",
            Prim::Ge => ">=",
            Prim::Eq => "==",
            Prim::Ne => "!=",
            Prim::And => "&&",
            Prim::Or => "||",
            Prim::Not => "!",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, Prim::Neg | Prim::Not)
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Var(Name),
    Const(Literal),
    /// A standard-library operation; operators desugar to applications of these.
    Prim(Prim),
    Tuple(Vec<Expr>),
    Pre(Box<Expr>),
    Fby(Box<Expr>, Box<Expr>),
    Arrow(Box<Expr>, Box<Expr>),
    Apply(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    NoneLit,
    Some(Box<Expr>),
    Either(Box<Expr>, Box<Expr>),
    Lambda(Arc<Lambda>),
    /// The undefined value, only produced when a `pre` result is re-embedded.
    Undef,
    #[doc(hidden)]
    Hole(u32),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn var(name: impl Into<Name>) -> Self {
        Expr::new(ExprKind::Var(name.into()), Span::default())
    }

    pub fn int(i: i64) -> Self {
        Expr::new(ExprKind::Const(Literal::Int(i)), Span::default())
    }

    pub fn boolean(b: bool) -> Self {
        Expr::new(ExprKind::Const(Literal::Bool(b)), Span::default())
    }

    pub fn pre(e: Expr) -> Self {
        let span = e.span;
        Expr::new(ExprKind::Pre(Box::new(e)), span)
    }

    pub fn arrow(a: Expr, b: Expr) -> Self {
        let span = a.span.join(b.span);
        Expr::new(ExprKind::Arrow(Box::new(a), Box::new(b)), span)
    }

    pub fn fby(a: Expr, b: Expr) -> Self {
        let span = a.span.join(b.span);
        Expr::new(ExprKind::Fby(Box::new(a), Box::new(b)), span)
    }

    pub fn apply(f: Expr, arg: Expr) -> Self {
        let span = f.span.join(arg.span);
        Expr::new(ExprKind::Apply(Box::new(f), Box::new(arg)), span)
    }

    pub fn binop(op: Prim, a: Expr, b: Expr) -> Self {
        let span = a.span.join(b.span);
        let args = Expr::new(ExprKind::Tuple(vec![a, b]), span);
        Expr::apply(Expr::new(ExprKind::Prim(op), span), args)
    }

    pub fn if_then_else(c: Expr, t: Expr, e: Expr) -> Self {
        let span = c.span.join(e.span);
        Expr::new(ExprKind::If(Box::new(c), Box::new(t), Box::new(e)), span)
    }

    /// If this is an application of a binary standard-library operation to a
    /// pair, returns the operation and both operands.
    pub fn as_binop(&self) -> Option<(Prim, &Expr, &Expr)> {
        if let ExprKind::Apply(f, arg) = &self.kind {
            if let (ExprKind::Prim(p), ExprKind::Tuple(items)) = (&f.kind, &arg.kind) {
                if !p.is_unary() && items.len() == 2 {
                    return Some((*p, &items[0], &items[1]));
                }
            }
        }
        None
    }

    pub fn as_unop(&self) -> Option<(Prim, &Expr)> {
        if let ExprKind::Apply(f, arg) = &self.kind {
            if let ExprKind::Prim(p) = f.kind {
                if p.is_unary() {
                    return Some((p, arg));
                }
            }
        }
        None
    }
}

/// Structural equality ignoring source spans.
pub fn equal_expr(a: &Expr, b: &Expr) -> bool {
    a == b
}

/// How a free variable is referenced by an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dependency {
    /// Only referenced underneath a `pre`.
    Delayed,
    /// Referenced at least once outside any `pre`.
    Causal,
}

/// Variables referenced by `e` that are not bound by an enclosing lambda.
pub fn free_variables(e: &Expr) -> BTreeMap<Name, Dependency> {
    let mut out = BTreeMap::new();
    collect_free(e, false, &mut Vec::new(), &mut out);
    out
}

fn note(out: &mut BTreeMap<Name, Dependency>, name: &str, dep: Dependency) {
    let slot = out.entry(name.to_string()).or_insert(dep);
    if dep > *slot {
        *slot = dep;
    }
}

fn collect_free(
    e: &Expr,
    delayed: bool,
    bound: &mut Vec<Name>,
    out: &mut BTreeMap<Name, Dependency>,
) {
    use ExprKind::*;
    match &e.kind {
        Var(x) => {
            if !bound.iter().any(|b| b == x) {
                let dep = if delayed {
                    Dependency::Delayed
                } else {
                    Dependency::Causal
                };
                note(out, x, dep);
            }
        }
        Const(_) | Prim(_) | NoneLit | Undef | Hole(_) => {}
        Tuple(items) => {
            for item in items {
                collect_free(item, delayed, bound, out);
            }
        }
        Pre(inner) => collect_free(inner, true, bound, out),
        Some(inner) => collect_free(inner, delayed, bound, out),
        Fby(a, b) | Arrow(a, b) | Apply(a, b) | Either(a, b) => {
            collect_free(a, delayed, bound, out);
            collect_free(b, delayed, bound, out);
        }
        If(c, t, f) => {
            collect_free(c, delayed, bound, out);
            collect_free(t, delayed, bound, out);
            collect_free(f, delayed, bound, out);
        }
        Lambda(lam) => {
            let depth = bound.len();
            bound.extend(lam.input.binders().into_iter().map(str::to_string));
            for eq in &lam.body {
                bound.extend(eq.lhs.binders().into_iter().map(str::to_string));
            }
            for eq in &lam.body {
                collect_free(&eq.rhs, delayed, bound, out);
            }
            bound.truncate(depth);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda {
    pub input: Pattern,
    pub output: Pattern,
    pub body: Vec<Equation>,
}

#[derive(Debug, Clone)]
pub struct Pattern {
    pub kind: PatternKind,
    pub ty: Option<TypeExpr>,
    pub span: Span,
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.ty == other.ty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    Var(Name),
    Wildcard,
    Tuple(Vec<Pattern>),
    Unit,
}

impl Pattern {
    pub fn new(kind: PatternKind, span: Span) -> Self {
        Pattern {
            kind,
            ty: None,
            span,
        }
    }

    pub fn var(name: impl Into<Name>) -> Self {
        Pattern::new(PatternKind::Var(name.into()), Span::default())
    }

    pub fn wildcard() -> Self {
        Pattern::new(PatternKind::Wildcard, Span::default())
    }

    pub fn tuple(items: Vec<Pattern>) -> Self {
        Pattern::new(PatternKind::Tuple(items), Span::default())
    }

    /// Variable names bound by this pattern, left to right.
    pub fn binders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_binders(&mut out);
        out
    }

    fn collect_binders<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            PatternKind::Var(x) => out.push(x),
            PatternKind::Tuple(items) => items.iter().for_each(|p| p.collect_binders(out)),
            PatternKind::Wildcard | PatternKind::Unit => {}
        }
    }

    /// Returns the first name bound twice, if any.
    pub fn duplicate_binder(&self) -> Option<&str> {
        let names = self.binders();
        names
            .iter()
            .enumerate()
            .find(|(i, n)| names[..*i].contains(n))
            .map(|(_, n)| *n)
    }

    pub fn contains_wildcard(&self) -> bool {
        match &self.kind {
            PatternKind::Wildcard => true,
            PatternKind::Tuple(items) => items.iter().any(Pattern::contains_wildcard),
            _ => false,
        }
    }
}

/// Syntactic type annotation.
#[derive(Debug, Clone)]
pub struct TypeExpr {
    pub kind: TypeExprKind,
    pub span: Span,
}

impl PartialEq for TypeExpr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeExprKind {
    Int,
    Bool,
    Real,
    Unit,
    Option(Box<TypeExpr>),
    Tuple(Vec<TypeExpr>),
}

#[derive(Debug, Clone)]
pub struct Equation {
    pub lhs: Pattern,
    pub rhs: Expr,
    pub span: Span,
}

impl PartialEq for Equation {
    fn eq(&self, other: &Self) -> bool {
        self.lhs == other.lhs && self.rhs == other.rhs
    }
}

impl Equation {
    pub fn new(lhs: Pattern, rhs: Expr) -> Self {
        let span = lhs.span.join(rhs.span);
        Equation { lhs, rhs, span }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub steps: Vec<StepDecl>,
    pub channels: Vec<ChannelDecl>,
    pub nodes: Vec<NodeDecl>,
}

impl Program {
    pub fn step(&self, name: &str) -> Option<&StepDecl> {
        self.steps.iter().find(|s| s.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelDecl> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct StepDecl {
    pub name: Name,
    pub input: Pattern,
    pub output: Pattern,
    /// `None` for prototypes, whose implementation is provided by the host.
    pub body: Option<Vec<Equation>>,
    pub span: Span,
}

impl PartialEq for StepDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.input == other.input
            && self.output == other.output
            && self.body == other.body
    }
}

impl StepDecl {
    pub fn is_prototype(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelDecl {
    pub name: Name,
    pub ty: TypeExpr,
    /// Initial contents, oldest first. Each entry is a constant expression.
    pub init: Vec<Expr>,
    pub span: Span,
}

impl PartialEq for ChannelDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty && self.init == other.init
    }
}

#[derive(Debug, Clone)]
pub struct Port {
    pub channel: Name,
    pub optional: bool,
    pub span: Span,
}

impl PartialEq for Port {
    fn eq(&self, other: &Self) -> bool {
        self.channel == other.channel && self.optional == other.optional
    }
}

#[derive(Debug, Clone)]
pub struct NodeDecl {
    pub name: Name,
    pub step: Name,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    /// Period in microseconds.
    pub period: u64,
    pub span: Span,
}

impl PartialEq for NodeDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.step == other.step
            && self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.period == other.period
    }
}

/// Runtime value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Const(Literal),
    Tuple(Vec<Value>),
    None,
    Some(Box<Value>),
    Closure(Arc<Lambda>),
    Prim(Prim),
    /// A prototype step implemented by the host.
    Host(Name),
    /// The undefined value yielded by `pre` on its first evaluation.
    Undef,
}

impl Value {
    pub fn int(i: i64) -> Self {
        Value::Const(Literal::Int(i))
    }

    pub fn boolean(b: bool) -> Self {
        Value::Const(Literal::Bool(b))
    }

    pub fn real(r: f64) -> Self {
        Value::Const(Literal::Real(r))
    }

    pub fn unit() -> Self {
        Value::Const(Literal::Unit)
    }

    pub fn some(v: Value) -> Self {
        Value::Some(Box::new(v))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Const(Literal::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn contains_undef(&self) -> bool {
        match self {
            Value::Undef => true,
            Value::Tuple(items) => items.iter().any(Value::contains_undef),
            Value::Some(v) => v.contains_undef(),
            _ => false,
        }
    }

    /// True for data that may travel through a channel.
    pub fn is_first_order(&self) -> bool {
        match self {
            Value::Const(_) | Value::None => true,
            Value::Tuple(items) => items.iter().all(Value::is_first_order),
            Value::Some(v) => v.is_first_order(),
            _ => false,
        }
    }

    /// Embeds the value back into the expression language.
    pub fn to_expr(&self, span: Span) -> Expr {
        let kind = match self {
            Value::Const(c) => ExprKind::Const(*c),
            Value::Tuple(items) => ExprKind::Tuple(items.iter().map(|v| v.to_expr(span)).collect()),
            Value::None => ExprKind::NoneLit,
            Value::Some(v) => ExprKind::Some(Box::new(v.to_expr(span))),
            Value::Closure(lam) => ExprKind::Lambda(lam.clone()),
            Value::Prim(p) => ExprKind::Prim(*p),
            Value::Host(name) => ExprKind::Var(name.clone()),
            Value::Undef => ExprKind::Undef,
        };
        Expr::new(kind, span)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Const(c) => write!(f, "{c}"),
            Value::Tuple(items) => {
                f.write_str("(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            Value::None => f.write_str("None"),
            Value::Some(v) => match **v {
                Value::Tuple(_) | Value::Const(_) | Value::None | Value::Undef => {
                    write!(f, "Some {v}")
                }
                _ => write!(f, "Some ({v})"),
            },
            Value::Closure(_) => f.write_str("<closure>"),
            Value::Prim(p) => write!(f, "<{}>", p.name()),
            Value::Host(name) => write!(f, "<host {name}>"),
            Value::Undef => f.write_str("⊥"),
        }
    }
}
