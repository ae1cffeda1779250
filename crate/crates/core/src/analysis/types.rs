//! Hindley-Milner inference with let-polymorphism at step boundaries only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::ast::*;
use crate::diag::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Bool,
    Real,
    Unit,
    Option(Box<Type>),
    Tuple(Vec<Type>),
    Func(Box<Type>, Box<Type>),
    Var(u32),
}

impl Type {
    pub fn option(t: Type) -> Type {
        Type::Option(Box::new(t))
    }

    pub fn func(a: Type, b: Type) -> Type {
        Type::Func(Box::new(a), Box::new(b))
    }

    pub fn pair(a: Type, b: Type) -> Type {
        Type::Tuple(vec![a, b])
    }

    /// Builds the type carried by a list of ports: unit for none, the element
    /// itself for one, a tuple otherwise.
    pub fn from_components(mut items: Vec<Type>) -> Type {
        match items.len() {
            0 => Type::Unit,
            1 => items.pop().unwrap(),
            _ => Type::Tuple(items),
        }
    }

    pub fn from_annotation(t: &TypeExpr) -> Type {
        match &t.kind {
            TypeExprKind::Int => Type::Int,
            TypeExprKind::Bool => Type::Bool,
            TypeExprKind::Real => Type::Real,
            TypeExprKind::Unit => Type::Unit,
            TypeExprKind::Option(inner) => Type::option(Type::from_annotation(inner)),
            TypeExprKind::Tuple(items) => {
                Type::Tuple(items.iter().map(Type::from_annotation).collect())
            }
        }
    }

    pub fn is_first_order(&self) -> bool {
        match self {
            Type::Func(..) => false,
            Type::Option(t) => t.is_first_order(),
            Type::Tuple(items) => items.iter().all(Type::is_first_order),
            _ => true,
        }
    }

    fn vars(&self, out: &mut Vec<u32>) {
        match self {
            Type::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Type::Option(t) => t.vars(out),
            Type::Tuple(items) => items.iter().for_each(|t| t.vars(out)),
            Type::Func(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            _ => {}
        }
    }

    fn option_of_func(&self) -> bool {
        match self {
            Type::Option(t) => matches!(**t, Type::Func(..)) || t.option_of_func(),
            Type::Tuple(items) => items.iter().any(Type::option_of_func),
            Type::Func(a, b) => a.option_of_func() || b.option_of_func(),
            _ => false,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names = Vec::new();
        self.vars(&mut names);
        write_type(f, self, &names, false)
    }
}

fn var_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    if i < 26 {
        format!("'{letter}")
    } else {
        format!("'{letter}{}", i / 26)
    }
}

fn write_type(f: &mut fmt::Formatter<'_>, t: &Type, names: &[u32], in_arg: bool) -> fmt::Result {
    match t {
        Type::Int => f.write_str("int"),
        Type::Bool => f.write_str("bool"),
        Type::Real => f.write_str("real"),
        Type::Unit => f.write_str("unit"),
        Type::Var(v) => {
            let i = names.iter().position(|n| n == v).unwrap_or(*v as usize);
            f.write_str(&var_name(i))
        }
        Type::Option(inner) => {
            if matches!(**inner, Type::Func(..)) {
                f.write_str("(")?;
                write_type(f, inner, names, false)?;
                f.write_str(")?")
            } else {
                write_type(f, inner, names, false)?;
                f.write_str("?")
            }
        }
        Type::Tuple(items) => {
            f.write_str("(")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_type(f, item, names, false)?;
            }
            f.write_str(")")
        }
        Type::Func(a, b) => {
            if in_arg {
                f.write_str("(")?;
            }
            write_type(f, a, names, true)?;
            f.write_str(" -> ")?;
            write_type(f, b, names, false)?;
            if in_arg {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

const NUM: u8 = 1;
const EQ: u8 = 2;

/// A type closed over its variables. Variables may carry the `EQ` constraint
/// (instantiated only with first-order types).
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub vars: Vec<(u32, u8)>,
    pub ty: Type,
}

impl Scheme {
    pub fn mono(ty: Type) -> Self {
        Scheme {
            vars: Vec::new(),
            ty,
        }
    }

    pub fn input(&self) -> Option<&Type> {
        match &self.ty {
            Type::Func(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn output(&self) -> Option<&Type> {
        match &self.ty {
            Type::Func(_, b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ty)
    }
}

fn prim_scheme(p: Prim) -> Scheme {
    let a = Type::Var(0);
    let (flags, ty) = match p {
        Prim::Add | Prim::Sub | Prim::Mul | Prim::Div => {
            (NUM, Type::func(Type::pair(a.clone(), a.clone()), a))
        }
        Prim::Neg => (NUM, Type::func(a.clone(), a)),
        Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge => {
            (NUM, Type::func(Type::pair(a.clone(), a), Type::Bool))
        }
        Prim::Eq | Prim::Ne => (EQ, Type::func(Type::pair(a.clone(), a), Type::Bool)),
        Prim::And | Prim::Or => {
            return Scheme::mono(Type::func(Type::pair(Type::Bool, Type::Bool), Type::Bool))
        }
        Prim::Not => return Scheme::mono(Type::func(Type::Bool, Type::Bool)),
    };
    Scheme {
        vars: vec![(0, flags)],
        ty,
    }
}

/// Type of a standard-library operation, as shown to users.
pub fn prim_type(p: Prim) -> Scheme {
    let mut s = prim_scheme(p);
    if s.vars.iter().any(|(_, f)| f & NUM != 0) {
        // numeric operations are shown at their default instance
        s.ty = substitute(&s.ty, &|_| Some(Type::Int));
        s.vars.clear();
    }
    s
}

fn substitute(t: &Type, f: &dyn Fn(u32) -> Option<Type>) -> Type {
    match t {
        Type::Var(v) => f(*v).unwrap_or(Type::Var(*v)),
        Type::Option(inner) => Type::option(substitute(inner, f)),
        Type::Tuple(items) => Type::Tuple(items.iter().map(|i| substitute(i, f)).collect()),
        Type::Func(a, b) => Type::func(substitute(a, f), substitute(b, f)),
        other => other.clone(),
    }
}

enum UnifyError {
    Mismatch,
    Occurs,
    NotNumeric(Type),
    NotComparable(Type),
}

/// Substitution plus per-variable constraints.
#[derive(Default)]
pub(crate) struct Unifier {
    subst: Vec<Option<Type>>,
    flags: Vec<u8>,
}

impl Unifier {
    fn fresh(&mut self) -> Type {
        self.fresh_with(0)
    }

    fn fresh_with(&mut self, flags: u8) -> Type {
        self.subst.push(None);
        self.flags.push(flags);
        Type::Var(self.subst.len() as u32 - 1)
    }

    fn shallow(&self, t: &Type) -> Type {
        let mut t = t.clone();
        while let Type::Var(v) = t {
            match &self.subst[v as usize] {
                Some(next) => t = next.clone(),
                None => break,
            }
        }
        t
    }

    pub(crate) fn resolve(&self, t: &Type) -> Type {
        match self.shallow(t) {
            Type::Option(inner) => Type::option(self.resolve(&inner)),
            Type::Tuple(items) => Type::Tuple(items.iter().map(|i| self.resolve(i)).collect()),
            Type::Func(a, b) => Type::func(self.resolve(&a), self.resolve(&b)),
            other => other,
        }
    }

    fn occurs(&self, v: u32, t: &Type) -> bool {
        match self.shallow(t) {
            Type::Var(w) => v == w,
            Type::Option(inner) => self.occurs(v, &inner),
            Type::Tuple(items) => items.iter().any(|i| self.occurs(v, i)),
            Type::Func(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Type, b: &Type) -> Result<(), UnifyError> {
        let a = self.shallow(a);
        let b = self.shallow(b);
        match (&a, &b) {
            (Type::Var(x), Type::Var(y)) if x == y => Ok(()),
            (Type::Var(x), _) => self.bind(*x, &b),
            (_, Type::Var(y)) => self.bind(*y, &a),
            (Type::Int, Type::Int)
            | (Type::Bool, Type::Bool)
            | (Type::Real, Type::Real)
            | (Type::Unit, Type::Unit) => Ok(()),
            (Type::Option(x), Type::Option(y)) => self.unify(x, y),
            (Type::Tuple(xs), Type::Tuple(ys)) if xs.len() == ys.len() => {
                for (x, y) in xs.iter().zip(ys) {
                    self.unify(x, y)?;
                }
                Ok(())
            }
            (Type::Func(a1, b1), Type::Func(a2, b2)) => {
                self.unify(a1, a2)?;
                self.unify(b1, b2)
            }
            _ => Err(UnifyError::Mismatch),
        }
    }

    fn bind(&mut self, v: u32, t: &Type) -> Result<(), UnifyError> {
        if self.occurs(v, t) {
            return Err(UnifyError::Occurs);
        }
        let flags = self.flags[v as usize];
        if let Type::Var(w) = t {
            self.flags[*w as usize] |= flags;
        } else {
            if flags & NUM != 0 && !matches!(t, Type::Int | Type::Real) {
                return Err(UnifyError::NotNumeric(self.resolve(t)));
            }
            if flags & EQ != 0 {
                self.require_first_order(t)?;
            }
        }
        self.subst[v as usize] = Some(t.clone());
        Ok(())
    }

    fn require_first_order(&mut self, t: &Type) -> Result<(), UnifyError> {
        match self.shallow(t) {
            Type::Var(w) => {
                self.flags[w as usize] |= EQ;
                Ok(())
            }
            Type::Func(..) => Err(UnifyError::NotComparable(self.resolve(t))),
            Type::Option(inner) => self.require_first_order(&inner),
            Type::Tuple(items) => items.iter().try_for_each(|i| self.require_first_order(i)),
            _ => Ok(()),
        }
    }

    fn instantiate(&mut self, s: &Scheme) -> Type {
        let fresh: HashMap<u32, Type> = s
            .vars
            .iter()
            .map(|(v, flags)| (*v, self.fresh_with(*flags)))
            .collect();
        substitute(&s.ty, &|v| fresh.get(&v).cloned())
    }

    /// Defaults numeric variables to `int` and closes over the rest.
    fn generalize(&mut self, t: &Type) -> Scheme {
        let mut vars = Vec::new();
        self.resolve(t).vars(&mut vars);
        for v in &vars {
            if self.flags[*v as usize] & NUM != 0 {
                self.subst[*v as usize] = Some(Type::Int);
            }
        }
        let ty = self.resolve(t);
        let mut vars = Vec::new();
        ty.vars(&mut vars);
        Scheme {
            vars: vars.iter().map(|v| (*v, self.flags[*v as usize])).collect(),
            ty,
        }
    }

    /// Remaining numeric variables anywhere default to `int`.
    fn default_numeric(&mut self) {
        for v in 0..self.subst.len() {
            if self.subst[v].is_none() && self.flags[v] & NUM != 0 {
                self.subst[v] = Some(Type::Int);
            }
        }
    }
}

/// Inferred types of one step.
#[derive(Debug, Clone)]
pub struct StepTypes {
    pub scheme: Scheme,
    /// Monomorphic types of the inputs and equation-bound variables.
    pub locals: BTreeMap<Name, Type>,
}

#[derive(Debug, Clone)]
pub struct ProgramTypes {
    /// Indexed like `Program::steps`.
    pub steps: Vec<StepTypes>,
    /// Element type of each channel, indexed like `Program::channels`.
    pub channels: Vec<Type>,
}

struct StepCx<'a> {
    u: &'a mut Unifier,
    schemes: &'a HashMap<Name, Scheme>,
    locals: HashMap<Name, Type>,
    diags: Vec<Diagnostic>,
}

impl StepCx<'_> {
    fn mismatch(&mut self, span: Span, err: UnifyError, what: &str, expected: &Type, found: &Type) {
        let message = match err {
            UnifyError::Mismatch => format!(
                "{what}: expected `{}`, found `{}`",
                self.u.resolve(expected),
                self.u.resolve(found)
            ),
            UnifyError::Occurs => format!(
                "{what}: `{}` and `{}` would form an infinite type",
                self.u.resolve(expected),
                self.u.resolve(found)
            ),
            UnifyError::NotNumeric(t) => format!("{what}: `{t}` is not a numeric type"),
            UnifyError::NotComparable(t) => {
                format!("{what}: values of type `{t}` cannot be compared")
            }
        };
        self.diags.push(Diagnostic::error("type", span, message));
    }

    fn unify(&mut self, span: Span, what: &str, expected: &Type, found: &Type) {
        if let Err(err) = self.u.unify(expected, found) {
            self.mismatch(span, err, what, expected, found);
        }
    }

    /// Type of a pattern; binders get fresh types (or their existing local ones).
    fn pattern(&mut self, p: &Pattern, declare: bool) -> Type {
        let t = match &p.kind {
            PatternKind::Var(x) => {
                if declare {
                    let t = self.u.fresh();
                    self.locals.insert(x.clone(), t.clone());
                    t
                } else {
                    self.locals
                        .get(x)
                        .cloned()
                        .unwrap_or_else(|| self.u.fresh())
                }
            }
            PatternKind::Wildcard => self.u.fresh(),
            PatternKind::Unit => Type::Unit,
            PatternKind::Tuple(items) => {
                Type::Tuple(items.iter().map(|i| self.pattern(i, declare)).collect())
            }
        };
        if let Some(ann) = &p.ty {
            let expected = Type::from_annotation(ann);
            self.unify(ann.span, "type annotation", &expected, &t);
        }
        t
    }

    fn expr(&mut self, e: &Expr) -> Type {
        match &e.kind {
            ExprKind::Var(x) => {
                if let Some(t) = self.locals.get(x) {
                    t.clone()
                } else if let Some(s) = self.schemes.get(x) {
                    self.u.instantiate(s)
                } else if let Some(p) = Prim::from_name(x) {
                    self.u.instantiate(&prim_scheme(p))
                } else {
                    self.diags.push(Diagnostic::error(
                        "type",
                        e.span,
                        format!("unknown identifier `{x}`"),
                    ));
                    self.u.fresh()
                }
            }
            ExprKind::Const(c) => match c {
                Literal::Int(_) => Type::Int,
                Literal::Bool(_) => Type::Bool,
                Literal::Real(_) => Type::Real,
                Literal::Unit => Type::Unit,
            },
            ExprKind::Prim(p) => self.u.instantiate(&prim_scheme(*p)),
            ExprKind::Tuple(items) => Type::Tuple(items.iter().map(|i| self.expr(i)).collect()),
            ExprKind::Pre(a) => self.expr(a),
            ExprKind::Fby(a, b) | ExprKind::Arrow(a, b) => {
                let ta = self.expr(a);
                let tb = self.expr(b);
                let what = if matches!(e.kind, ExprKind::Fby(..)) {
                    "operands of `fby`"
                } else {
                    "operands of `->`"
                };
                self.unify(b.span, what, &ta, &tb);
                ta
            }
            ExprKind::Apply(f, a) => {
                let tf = self.expr(f);
                let ta = self.expr(a);
                let result = self.u.fresh();
                match self.u.shallow(&tf) {
                    Type::Func(param, ret) => match self.u.unify(&param, &ta) {
                        Ok(()) => self.unify(e.span, "application", &ret, &result),
                        Err(err) => {
                            let what = match &f.kind {
                                ExprKind::Prim(p) if p.is_unary() => {
                                    format!("operand of `{}`", p.symbol())
                                }
                                ExprKind::Prim(p) => format!("operands of `{}`", p.symbol()),
                                _ => "argument".to_string(),
                            };
                            self.mismatch(a.span, err, &what, &param, &ta)
                        }
                    },
                    Type::Var(_) => {
                        self.unify(f.span, "application", &tf, &Type::func(ta, result.clone()))
                    }
                    other => self.diags.push(Diagnostic::error(
                        "type",
                        f.span,
                        format!(
                            "`{}` is not a step and cannot be applied",
                            self.u.resolve(&other)
                        ),
                    )),
                }
                result
            }
            ExprKind::If(c, t, f) => {
                let tc = self.expr(c);
                self.unify(c.span, "condition", &Type::Bool, &tc);
                let tt = self.expr(t);
                let tf = self.expr(f);
                self.unify(f.span, "branches of `if`", &tt, &tf);
                tt
            }
            ExprKind::NoneLit => Type::option(self.u.fresh()),
            ExprKind::Some(a) => Type::option(self.expr(a)),
            ExprKind::Either(a, b) => {
                let ta = self.expr(a);
                let tb = self.expr(b);
                let payload = self.u.fresh();
                self.unify(
                    a.span,
                    "scrutinee of `either`",
                    &Type::option(payload.clone()),
                    &ta,
                );
                self.unify(b.span, "fallback of `either`", &payload, &tb);
                payload
            }
            ExprKind::Lambda(lam) => {
                let saved = self.locals.clone();
                let tin = self.pattern(&lam.input, true);
                for eq in &lam.body {
                    self.pattern(&eq.lhs, true);
                }
                for eq in &lam.body {
                    let tr = self.expr(&eq.rhs);
                    let tl = self.pattern(&eq.lhs, false);
                    self.unify(eq.rhs.span, "equation", &tl, &tr);
                }
                let tout = self.pattern(&lam.output, false);
                self.locals = saved;
                Type::func(tin, tout)
            }
            ExprKind::Undef | ExprKind::Hole(_) => self.u.fresh(),
        }
    }
}

/// Type of a constant expression (channel initializer).
fn literal_type(u: &mut Unifier, e: &Expr) -> Type {
    match &e.kind {
        ExprKind::Const(Literal::Int(_)) => Type::Int,
        ExprKind::Const(Literal::Bool(_)) => Type::Bool,
        ExprKind::Const(Literal::Real(_)) => Type::Real,
        ExprKind::Const(Literal::Unit) => Type::Unit,
        ExprKind::Tuple(items) => Type::Tuple(items.iter().map(|i| literal_type(u, i)).collect()),
        ExprKind::NoneLit => Type::option(u.fresh()),
        ExprKind::Some(inner) => Type::option(literal_type(u, inner)),
        _ => u.fresh(),
    }
}

/// Checks equation binders within one step body: no variable bound twice,
/// inputs never redefined, outputs fully defined and free of wildcards.
fn check_binders(step: &StepDecl, body: &[Equation], diags: &mut Vec<Diagnostic>) {
    let inputs: BTreeSet<&str> = step.input.binders().into_iter().collect();
    let mut defined: BTreeSet<&str> = BTreeSet::new();
    for eq in body {
        for x in eq.lhs.binders() {
            if inputs.contains(x) {
                diags.push(Diagnostic::error(
                    "type",
                    eq.lhs.span,
                    format!(
                        "`{x}` is an input of step `{}` and cannot be redefined",
                        step.name
                    ),
                ));
            } else if !defined.insert(x) {
                diags.push(Diagnostic::error(
                    "type",
                    eq.lhs.span,
                    format!("`{x}` is defined more than once in step `{}`", step.name),
                ));
            }
        }
    }
    if step.output.contains_wildcard() {
        diags.push(Diagnostic::error(
            "type",
            step.output.span,
            format!("output of step `{}` may not contain `_`", step.name),
        ));
    }
    for x in step.output.binders() {
        if !defined.contains(x) && !inputs.contains(x) {
            diags.push(Diagnostic::error(
                "type",
                step.output.span,
                format!("output `{x}` of step `{}` is never defined", step.name),
            ));
        }
    }
}

/// Infers step schemes in `order` (callees before callers), then checks
/// channel initializers and node wiring.
pub fn infer_types(p: &Program, order: &[usize]) -> Result<ProgramTypes, Vec<Diagnostic>> {
    let mut u = Unifier::default();
    let mut schemes: HashMap<Name, Scheme> = HashMap::new();
    let mut results: Vec<Option<StepTypes>> = vec![None; p.steps.len()];
    let mut diags = Vec::new();

    for &i in order {
        let step = &p.steps[i];
        let mut cx = StepCx {
            u: &mut u,
            schemes: &schemes,
            locals: HashMap::new(),
            diags: Vec::new(),
        };
        let tin = cx.pattern(&step.input, true);
        let tout = match &step.body {
            None => cx.pattern(&step.output, true),
            Some(body) => {
                check_binders(step, body, &mut cx.diags);
                for eq in body {
                    cx.pattern(&eq.lhs, true);
                }
                for eq in body {
                    let tr = cx.expr(&eq.rhs);
                    let tl = cx.pattern(&eq.lhs, false);
                    cx.unify(eq.rhs.span, "equation", &tl, &tr);
                }
                cx.pattern(&step.output, false)
            }
        };
        let locals = std::mem::take(&mut cx.locals);
        let mut step_diags = std::mem::take(&mut cx.diags);
        let scheme = u.generalize(&Type::func(tin, tout));
        let locals: BTreeMap<Name, Type> = locals
            .into_iter()
            .map(|(k, t)| (k, u.resolve(&t)))
            .collect();
        for (name, t) in &locals {
            if t.option_of_func() {
                step_diags.push(Diagnostic::error(
                    "type",
                    step.span,
                    format!("`{name}` has type `{t}`; options of steps are not supported"),
                ));
            }
        }
        diags.extend(step_diags);
        schemes.insert(step.name.clone(), scheme.clone());
        results[i] = Some(StepTypes { scheme, locals });
    }

    let channels: Vec<Type> = p
        .channels
        .iter()
        .map(|c| Type::from_annotation(&c.ty))
        .collect();
    for (c, ty) in p.channels.iter().zip(&channels) {
        for init in &c.init {
            let t = literal_type(&mut u, init);
            if u.unify(ty, &t).is_err() {
                diags.push(Diagnostic::error(
                    "type",
                    init.span,
                    format!(
                        "initial value `{}` of channel `{}` does not have type `{ty}`",
                        crate::pretty::expr_to_string(init),
                        c.name
                    ),
                ));
            }
        }
    }

    for node in &p.nodes {
        let Some(scheme) = schemes.get(&node.step) else {
            continue;
        };
        let port_types = |ports: &[Port]| -> Option<Vec<Type>> {
            ports
                .iter()
                .map(|port| {
                    let i = p.channels.iter().position(|c| c.name == port.channel)?;
                    let t = channels[i].clone();
                    Some(if port.optional { Type::option(t) } else { t })
                })
                .collect()
        };
        let (Some(ins), Some(outs)) = (port_types(&node.inputs), port_types(&node.outputs)) else {
            continue;
        };
        let (n_in, n_out) = (ins.len(), outs.len());
        let expected_in = Type::from_components(ins);
        let expected_out = Type::from_components(outs);
        let Type::Func(step_in, step_out) = u.instantiate(scheme) else {
            unreachable!()
        };
        for (side, expected, actual, count) in [
            ("input", expected_in, *step_in, n_in),
            ("output", expected_out, *step_out, n_out),
        ] {
            if u.unify(&expected, &actual).is_err() {
                let actual = u.resolve(&actual);
                let arity = match &actual {
                    Type::Tuple(items) => items.len(),
                    Type::Unit => 0,
                    _ => 1,
                };
                let message = if arity != count && !matches!(actual, Type::Var(_)) {
                    format!(
                        "node `{}` connects {count} {side} port(s) but step `{}` has {arity} {side}(s)",
                        node.name, node.step
                    )
                } else {
                    format!(
                        "node `{}`: the {side} ports carry `{}` but step `{}` has {side} type `{actual}`",
                        node.name,
                        u.resolve(&expected),
                        node.step
                    )
                };
                diags.push(Diagnostic::error("type", node.span, message));
            }
        }
    }
    u.default_numeric();

    if diags.is_empty() {
        Ok(ProgramTypes {
            steps: results
                .into_iter()
                .map(|s| s.expect("every step is ordered"))
                .collect(),
            channels,
        })
    } else {
        Err(diags)
    }
}

/// Infers the type of a standalone expression whose free variables have the
/// given types; returns the resolved type with numeric variables defaulted.
pub fn infer_expr_type(e: &Expr, env: &BTreeMap<Name, Type>) -> Result<Type, Vec<Diagnostic>> {
    let mut u = Unifier::default();
    let schemes = HashMap::new();
    let mut cx = StepCx {
        u: &mut u,
        schemes: &schemes,
        locals: env.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        diags: Vec::new(),
    };
    let t = cx.expr(e);
    let diags = std::mem::take(&mut cx.diags);
    if !diags.is_empty() {
        return Err(diags);
    }
    u.default_numeric();
    Ok(u.resolve(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expression, parse_program};

    fn schemes(src: &str) -> Vec<String> {
        let p = parse_program(src).unwrap();
        let order: Vec<usize> = (0..p.steps.len()).collect();
        let t = infer_types(&p, &order).unwrap_or_else(|d| panic!("{d:?}"));
        t.steps.iter().map(|s| s.scheme.to_string()).collect()
    }

    #[test]
    fn numeric_steps_default_to_int() {
        assert_eq!(
            schemes("step add (x, y) --> z { z = x + y }"),
            vec!["(int, int) -> int"]
        );
    }

    #[test]
    fn polymorphic_steps() {
        assert_eq!(
            schemes("step split inp --> (o1, o2, o3) { o1, o2, o3 = inp, inp, inp }"),
            vec!["'a -> ('a, 'a, 'a)"]
        );
    }

    #[test]
    fn option_output() {
        let src = "step edge_detect (in : bool) --> (out : bool?) {
            pre_in = in -> pre in;
            out = if !pre_in && in then (Some true) else if pre_in && !in then (Some false) else None;
        }";
        assert_eq!(schemes(src), vec!["bool -> bool?"]);
    }

    #[test]
    fn generalization_per_step() {
        let src = "step id x --> y { y = x }
                   step use (a : int, b : bool) --> (c, d) { c = id a; d = id b }";
        assert_eq!(schemes(src), vec!["'a -> 'a", "(int, bool) -> (int, bool)"]);
    }

    #[test]
    fn equality_on_steps_is_rejected() {
        let p = parse_program("step f x --> y { y = x }\nstep g a --> b { b = f == f }").unwrap();
        let errs = infer_types(&p, &[0, 1]).unwrap_err();
        assert!(errs[0].message.contains("cannot be compared"), "{:?}", errs);
    }

    #[test]
    fn mismatches_are_reported() {
        let p = parse_program("step f x --> y { y = if x then 1 else true }").unwrap();
        let errs = infer_types(&p, &[0]).unwrap_err();
        assert_eq!(
            errs[0].message,
            "branches of `if`: expected `int`, found `bool`"
        );
        let p = parse_program("step f x --> y { y = x + true }").unwrap();
        assert!(infer_types(&p, &[0]).is_err());
        let p = parse_program("step f x --> y { y = z }").unwrap();
        assert_eq!(
            infer_types(&p, &[0]).unwrap_err()[0].message,
            "unknown identifier `z`"
        );
    }

    #[test]
    fn occurs_check() {
        let p = parse_program("step f x --> y { y = x x }").unwrap();
        let errs = infer_types(&p, &[0]).unwrap_err();
        assert!(errs[0].message.contains("infinite type"), "{errs:?}");
    }

    #[test]
    fn optional_output_port_needs_option_type() {
        let src = "step f (x : bool) --> (y : bool) { y = x }
                   channel a : bool
                   channel b : bool
                   node n implements f (a) --> (b?) every 10ms";
        let p = parse_program(src).unwrap();
        let errs = infer_types(&p, &[0]).unwrap_err();
        assert!(errs[0].message.contains("bool?"), "{errs:?}");
    }

    #[test]
    fn port_arity_mismatch() {
        let src = "step f (x, y) --> z { z = x + y }
                   channel a : int
                   channel b : int
                   node n implements f (a) --> (b) every 10ms";
        let p = parse_program(src).unwrap();
        let errs = infer_types(&p, &[0]).unwrap_err();
        assert_eq!(
            errs[0].message,
            "node `n` connects 1 input port(s) but step `f` has 2 input(s)"
        );
    }

    #[test]
    fn channel_initializers_are_checked() {
        let p = parse_program("channel a : int = { true }").unwrap();
        assert!(infer_types(&p, &[]).is_err());
        let p = parse_program("channel a : (int, bool?) = { (1, None), (2, Some true) }").unwrap();
        assert!(infer_types(&p, &[]).is_ok());
    }

    #[test]
    fn standalone_expressions() {
        let env: BTreeMap<Name, Type> = [("x".to_string(), Type::Int)].into_iter().collect();
        let t = infer_expr_type(&parse_expression("0 -> pre x + 1").unwrap(), &env).unwrap();
        assert_eq!(t, Type::Int);
        let t = infer_expr_type(
            &parse_expression("either None otherwise 1.5").unwrap(),
            &env,
        )
        .unwrap();
        assert_eq!(t, Type::Real);
    }

    #[test]
    fn type_display() {
        let t = Type::func(
            Type::func(Type::Var(7), Type::Int),
            Type::option(Type::Var(3)),
        );
        assert_eq!(t.to_string(), "('a -> int) -> 'b?");
    }
}
