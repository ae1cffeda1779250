//! Big-step evaluation of step expressions.
//!
//! `eval` computes a value together with the *next* expression, which carries
//! all state into the following cycle: `pre e` evaluates to ⊥ and rewrites to
//! `v -> pre e'`, `e1 fby e2` rewrites to `e2`, and an application of a step
//! rewrites to an application of that step's updated equations.
//!
//! Equation lists are solved in two phases. The value of `pre e` is always ⊥,
//! so phase 1 can compute every equation in dependency order while setting
//! `pre` operands aside. Phase 2 evaluates those operands under the final
//! environment, which is what lets `x = 0 -> pre x` remember the value of `x`
//! that the same cycle defined.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::analysis::CheckedProgram;
use crate::ast::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(Name),
    #[error("`_` cannot be read")]
    WildcardProjection,
    #[error("value `{value}` does not match pattern `{pattern}`")]
    ShapeMismatch { pattern: String, value: String },
    #[error("condition of `if` is undefined")]
    UndefinedCondition { span: Span },
    #[error("scrutinee of `either` is undefined")]
    UndefinedScrutinee { span: Span },
    #[error("condition of `if` is `{value}`, not a boolean")]
    NotBoolean { span: Span, value: String },
    #[error("scrutinee of `either` is `{value}`, not an option")]
    NotOption { span: Span, value: String },
    #[error("`{value}` is not a step and cannot be applied")]
    NotAFunction { span: Span, value: String },
    #[error("`{op}` cannot be applied to `{value}`")]
    BadOperand {
        span: Span,
        op: &'static str,
        value: String,
    },
    #[error("integer overflow in `{op}`")]
    Overflow { span: Span, op: &'static str },
    #[error("division by zero")]
    DivisionByZero { span: Span },
    #[error("host step `{name}` received an undefined argument")]
    UndefinedHostArgument { name: Name },
    #[error("host step `{name}` failed: {message}")]
    Host { name: Name, message: String },
}

impl EvalError {
    pub fn span(&self) -> Option<Span> {
        match self {
            EvalError::UndefinedCondition { span }
            | EvalError::UndefinedScrutinee { span }
            | EvalError::NotBoolean { span, .. }
            | EvalError::NotOption { span, .. }
            | EvalError::NotAFunction { span, .. }
            | EvalError::BadOperand { span, .. }
            | EvalError::Overflow { span, .. }
            | EvalError::DivisionByZero { span } => Some(*span),
            _ => None,
        }
    }
}

/// Variable bindings. Locals come from patterns; globals hold the program's
/// steps and are shared between all environments of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    locals: BTreeMap<Name, Value>,
    globals: Arc<BTreeMap<Name, Value>>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn with_globals(globals: Arc<BTreeMap<Name, Value>>) -> Self {
        Env {
            locals: BTreeMap::new(),
            globals,
        }
    }

    pub fn from_bindings<I, S>(bindings: I) -> Self
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<Name>,
    {
        Env {
            locals: bindings.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            globals: Arc::default(),
        }
    }

    /// Local bindings first, then globals, then standard-library operations.
    pub fn get(&self, x: &str) -> Option<Value> {
        self.locals
            .get(x)
            .or_else(|| self.globals.get(x))
            .cloned()
            .or_else(|| Prim::from_name(x).map(Value::Prim))
    }

    pub fn bind(&mut self, x: impl Into<Name>, v: Value) {
        self.locals.insert(x.into(), v);
    }

    pub fn locals(&self) -> &BTreeMap<Name, Value> {
        &self.locals
    }

    /// An environment with the same globals and no locals.
    pub fn scope(&self) -> Env {
        Env::with_globals(self.globals.clone())
    }
}

/// `Γ ⇓ p`: the value of the names in `p`, shaped like `p`.
pub fn project(env: &Env, p: &Pattern) -> Result<Value, EvalError> {
    match &p.kind {
        PatternKind::Var(x) => env.get(x).ok_or_else(|| EvalError::Unbound(x.clone())),
        PatternKind::Wildcard => Err(EvalError::WildcardProjection),
        PatternKind::Unit => Ok(Value::unit()),
        PatternKind::Tuple(items) => Ok(Value::Tuple(
            items
                .iter()
                .map(|i| project(env, i))
                .collect::<Result<_, _>>()?,
        )),
    }
}

/// `Γ ⇑ₚᵛ`: rebinds the names in `p` to the matching parts of `v`. An
/// undefined value spreads to every component.
pub fn update(env: &Env, p: &Pattern, v: &Value) -> Result<Env, EvalError> {
    let mut out = env.clone();
    update_in_place(&mut out, p, v)?;
    Ok(out)
}

fn update_in_place(env: &mut Env, p: &Pattern, v: &Value) -> Result<(), EvalError> {
    match (&p.kind, v) {
        (PatternKind::Var(x), _) => {
            env.bind(x.clone(), v.clone());
            Ok(())
        }
        (PatternKind::Wildcard, _) => Ok(()),
        (PatternKind::Unit, Value::Const(Literal::Unit) | Value::Undef) => Ok(()),
        (PatternKind::Tuple(ps), Value::Tuple(vs)) if ps.len() == vs.len() => {
            for (p, v) in ps.iter().zip(vs) {
                update_in_place(env, p, v)?;
            }
            Ok(())
        }
        (PatternKind::Tuple(ps), Value::Undef) => {
            for p in ps {
                update_in_place(env, p, &Value::Undef)?;
            }
            Ok(())
        }
        _ => Err(EvalError::ShapeMismatch {
            pattern: crate::pretty::pattern_to_string(p),
            value: v.to_string(),
        }),
    }
}

/// Implementations of prototype steps.
pub trait HostDispatch {
    fn call(&mut self, name: &str, arg: Value) -> Result<Value, String>;
}

/// Dispatcher for programs without prototypes; every call fails.
pub struct NoHosts;

impl HostDispatch for NoHosts {
    fn call(&mut self, name: &str, _arg: Value) -> Result<Value, String> {
        Err(format!("no implementation bound for `{name}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: Value,
    pub next: Expr,
}

/// `Γ ⊢ e ⇒ v, e'` for an expression with no prototype calls.
pub fn eval(env: &Env, e: &Expr) -> Result<EvalResult, EvalError> {
    eval_with(env, e, &mut NoHosts)
}

pub fn eval_with(
    env: &Env,
    e: &Expr,
    hosts: &mut dyn HostDispatch,
) -> Result<EvalResult, EvalError> {
    let mut ev = Evaluator::new(hosts);
    let (value, next) = ev.expr(env, e)?;
    Ok(EvalResult { value, next })
}

/// Evaluates equations given in dependency order. Returns the rewritten
/// equations and `Γ'`, the input environment extended with every equation.
pub fn eval_equations(env: &Env, eqs: &[Equation]) -> Result<(Vec<Equation>, Env), EvalError> {
    eval_equations_with(env, eqs, &mut NoHosts)
}

pub fn eval_equations_with(
    env: &Env,
    eqs: &[Equation],
    hosts: &mut dyn HostDispatch,
) -> Result<(Vec<Equation>, Env), EvalError> {
    Evaluator::new(hosts).equations(env, eqs)
}

/// Global environment binding every step of a checked program: prototypes to
/// host references, other steps to closures over their ordered equations.
pub fn program_globals(cp: &CheckedProgram) -> Arc<BTreeMap<Name, Value>> {
    Arc::new(
        cp.steps
            .iter()
            .map(|s| {
                let v = match &s.body {
                    None => Value::Host(s.name.clone()),
                    Some(body) => Value::Closure(Arc::new(Lambda {
                        input: s.input.clone(),
                        output: s.output.clone(),
                        body: body.clone(),
                    })),
                };
                (s.name.clone(), v)
            })
            .collect(),
    )
}

struct Deferred {
    id: u32,
    operand: Expr,
    span: Span,
}

struct Evaluator<'h> {
    hosts: &'h mut dyn HostDispatch,
    /// `pre` operands set aside by the innermost equation list in phase 1.
    deferred: Option<Vec<Deferred>>,
    next_hole: u32,
}

impl<'h> Evaluator<'h> {
    fn new(hosts: &'h mut dyn HostDispatch) -> Self {
        Evaluator {
            hosts,
            deferred: None,
            next_hole: 0,
        }
    }

    fn equations(
        &mut self,
        env: &Env,
        eqs: &[Equation],
    ) -> Result<(Vec<Equation>, Env), EvalError> {
        let outer = self.deferred.replace(Vec::new());
        let mut gamma = env.clone();
        let mut rhs_next = Vec::with_capacity(eqs.len());
        let phase1 = (|| {
            for eq in eqs {
                let (v, next) = self.expr(&gamma, &eq.rhs)?;
                update_in_place(&mut gamma, &eq.lhs, &v)?;
                rhs_next.push(next);
            }
            Ok(())
        })();
        let deferred = std::mem::replace(&mut self.deferred, outer).unwrap_or_default();
        phase1?;

        // phase 2: every set-aside operand sees the final environment
        let saved = self.deferred.take();
        let mut filled = BTreeMap::new();
        let mut result = Ok(());
        for d in deferred {
            match self.expr(&gamma, &d.operand) {
                Ok((v, operand_next)) => {
                    let e = Expr::new(
                        ExprKind::Arrow(
                            Box::new(v.to_expr(d.span)),
                            Box::new(Expr::new(ExprKind::Pre(Box::new(operand_next)), d.span)),
                        ),
                        d.span,
                    );
                    filled.insert(d.id, e);
                }
                Err(err) => {
                    result = Err(err);
                    break;
                }
            }
        }
        self.deferred = saved;
        result?;

        let next = eqs
            .iter()
            .zip(rhs_next)
            .map(|(eq, rhs)| Equation {
                lhs: eq.lhs.clone(),
                rhs: fill_holes(rhs, &mut filled),
                span: eq.span,
            })
            .collect();
        Ok((next, gamma))
    }

    fn expr(&mut self, env: &Env, e: &Expr) -> Result<(Value, Expr), EvalError> {
        let span = e.span;
        let mk = |kind| Expr::new(kind, span);
        Ok(match &e.kind {
            ExprKind::Var(x) => {
                let v = env.get(x).ok_or_else(|| EvalError::Unbound(x.clone()))?;
                (v, e.clone())
            }
            ExprKind::Const(c) => (Value::Const(*c), e.clone()),
            ExprKind::Prim(p) => (Value::Prim(*p), e.clone()),
            ExprKind::NoneLit => (Value::None, e.clone()),
            ExprKind::Undef => (Value::Undef, e.clone()),
            ExprKind::Lambda(lam) => (Value::Closure(lam.clone()), e.clone()),
            ExprKind::Hole(_) => unreachable!("holes never escape an equation list"),
            ExprKind::Tuple(items) => {
                let mut vs = Vec::with_capacity(items.len());
                let mut ns = Vec::with_capacity(items.len());
                for item in items {
                    let (v, n) = self.expr(env, item)?;
                    vs.push(v);
                    ns.push(n);
                }
                (Value::Tuple(vs), mk(ExprKind::Tuple(ns)))
            }
            ExprKind::Pre(operand) => {
                if let Some(deferred) = &mut self.deferred {
                    let id = self.next_hole;
                    self.next_hole += 1;
                    deferred.push(Deferred {
                        id,
                        operand: (**operand).clone(),
                        span,
                    });
                    (Value::Undef, mk(ExprKind::Hole(id)))
                } else {
                    let (v, n) = self.expr(env, operand)?;
                    let next = ExprKind::Arrow(
                        Box::new(v.to_expr(span)),
                        Box::new(mk(ExprKind::Pre(Box::new(n)))),
                    );
                    (Value::Undef, mk(next))
                }
            }
            ExprKind::Fby(a, b) => {
                let (v, _) = self.expr(env, a)?;
                (v, (**b).clone())
            }
            ExprKind::Arrow(a, b) => {
                let (v, _) = self.expr(env, a)?;
                let (_, nb) = self.expr(env, b)?;
                (v, nb)
            }
            ExprKind::If(c, t, f) => {
                let (vc, nc) = self.expr(env, c)?;
                let taken = match vc {
                    Value::Const(Literal::Bool(b)) => b,
                    Value::Undef => return Err(EvalError::UndefinedCondition { span: c.span }),
                    other => {
                        return Err(EvalError::NotBoolean {
                            span: c.span,
                            value: other.to_string(),
                        })
                    }
                };
                if taken {
                    let (v, nt) = self.expr(env, t)?;
                    (v, mk(ExprKind::If(Box::new(nc), Box::new(nt), f.clone())))
                } else {
                    let (v, nf) = self.expr(env, f)?;
                    (v, mk(ExprKind::If(Box::new(nc), t.clone(), Box::new(nf))))
                }
            }
            ExprKind::Some(a) => {
                let (v, n) = self.expr(env, a)?;
                (Value::some(v), mk(ExprKind::Some(Box::new(n))))
            }
            ExprKind::Either(a, b) => {
                let (va, na) = self.expr(env, a)?;
                match va {
                    Value::Some(v) => (*v, mk(ExprKind::Either(Box::new(na), b.clone()))),
                    Value::None => {
                        let (vb, nb) = self.expr(env, b)?;
                        (vb, mk(ExprKind::Either(Box::new(na), Box::new(nb))))
                    }
                    Value::Undef => return Err(EvalError::UndefinedScrutinee { span: a.span }),
                    other => {
                        return Err(EvalError::NotOption {
                            span: a.span,
                            value: other.to_string(),
                        })
                    }
                }
            }
            ExprKind::Apply(f, a) => {
                let (vf, _) = self.expr(env, f)?;
                let (va, na) = self.expr(env, a)?;
                match vf {
                    Value::Closure(lam) => {
                        let callee = update(&env.scope(), &lam.input, &va)?;
                        let (body, gamma) = self.equations(&callee, &lam.body)?;
                        let out = project(&gamma, &lam.output)?;
                        let updated = Lambda {
                            input: lam.input.clone(),
                            output: lam.output.clone(),
                            body,
                        };
                        let nf = Expr::new(ExprKind::Lambda(Arc::new(updated)), f.span);
                        (out, mk(ExprKind::Apply(Box::new(nf), Box::new(na))))
                    }
                    Value::Prim(p) => {
                        let out = apply_prim(p, &va, span)?;
                        (out, mk(ExprKind::Apply(f.clone(), Box::new(na))))
                    }
                    Value::Host(name) => {
                        if va.contains_undef() {
                            return Err(EvalError::UndefinedHostArgument { name });
                        }
                        let out =
                            self.hosts
                                .call(&name, va)
                                .map_err(|message| EvalError::Host {
                                    name: name.clone(),
                                    message,
                                })?;
                        (out, mk(ExprKind::Apply(f.clone(), Box::new(na))))
                    }
                    other => {
                        return Err(EvalError::NotAFunction {
                            span: f.span,
                            value: other.to_string(),
                        })
                    }
                }
            }
        })
    }
}

fn fill_holes(e: Expr, filled: &mut BTreeMap<u32, Expr>) -> Expr {
    let span = e.span;
    let boxed = |b: Box<Expr>, filled: &mut BTreeMap<u32, Expr>| Box::new(fill_holes(*b, filled));
    let kind = match e.kind {
        ExprKind::Hole(id) => return filled.remove(&id).expect("every hole is filled"),
        ExprKind::Tuple(items) => {
            ExprKind::Tuple(items.into_iter().map(|i| fill_holes(i, filled)).collect())
        }
        ExprKind::Pre(a) => ExprKind::Pre(boxed(a, filled)),
        ExprKind::Some(a) => ExprKind::Some(boxed(a, filled)),
        ExprKind::Fby(a, b) => ExprKind::Fby(boxed(a, filled), boxed(b, filled)),
        ExprKind::Arrow(a, b) => ExprKind::Arrow(boxed(a, filled), boxed(b, filled)),
        ExprKind::Apply(a, b) => ExprKind::Apply(boxed(a, filled), boxed(b, filled)),
        ExprKind::Either(a, b) => ExprKind::Either(boxed(a, filled), boxed(b, filled)),
        ExprKind::If(c, t, f) => ExprKind::If(boxed(c, filled), boxed(t, filled), boxed(f, filled)),
        other => other,
    };
    Expr::new(kind, span)
}

fn operands(p: Prim, v: &Value, span: Span) -> Result<(&Value, &Value), EvalError> {
    match v {
        Value::Tuple(items) if items.len() == 2 => Ok((&items[0], &items[1])),
        _ => Err(EvalError::BadOperand {
            span,
            op: p.name(),
            value: v.to_string(),
        }),
    }
}

/// Applies a standard-library operation. Operations are strict: an undefined
/// operand gives an undefined result.
pub fn apply_prim(p: Prim, arg: &Value, span: Span) -> Result<Value, EvalError> {
    use Literal::*;
    if arg.contains_undef() {
        return Ok(Value::Undef);
    }
    let bad = || EvalError::BadOperand {
        span,
        op: p.name(),
        value: arg.to_string(),
    };
    let overflow = || EvalError::Overflow { span, op: p.name() };
    match p {
        Prim::Not => match arg {
            Value::Const(Bool(b)) => Ok(Value::boolean(!b)),
            _ => Err(bad()),
        },
        Prim::Neg => match arg {
            Value::Const(Int(i)) => i.checked_neg().map(Value::int).ok_or_else(overflow),
            Value::Const(Real(r)) => Ok(Value::real(-r)),
            _ => Err(bad()),
        },
        Prim::Eq | Prim::Ne => {
            let (a, b) = operands(p, arg, span)?;
            if !a.is_first_order() || !b.is_first_order() {
                return Err(bad());
            }
            Ok(Value::boolean((a == b) == (p == Prim::Eq)))
        }
        Prim::And | Prim::Or => match operands(p, arg, span)? {
            (Value::Const(Bool(a)), Value::Const(Bool(b))) => {
                Ok(Value::boolean(if p == Prim::And {
                    *a && *b
                } else {
                    *a || *b
                }))
            }
            _ => Err(bad()),
        },
        Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge => {
            let ord = match operands(p, arg, span)? {
                (Value::Const(Int(a)), Value::Const(Int(b))) => a.partial_cmp(b),
                (Value::Const(Real(a)), Value::Const(Real(b))) => a.partial_cmp(b),
                _ => return Err(bad()),
            };
            use std::cmp::Ordering::*;
            let holds = match (p, ord) {
                (_, None) => false,
                (Prim::Lt, Some(o)) => o == Less,
                (Prim::Le, Some(o)) => o != Greater,
                (Prim::Gt, Some(o)) => o == Greater,
                (_, Some(o)) => o != Less,
            };
            Ok(Value::boolean(holds))
        }
        Prim::Add | Prim::Sub | Prim::Mul | Prim::Div => match operands(p, arg, span)? {
            (Value::Const(Int(a)), Value::Const(Int(b))) => {
                let r = match p {
                    Prim::Add => a.checked_add(*b),
                    Prim::Sub => a.checked_sub(*b),
                    Prim::Mul => a.checked_mul(*b),
                    _ => {
                        if *b == 0 {
                            return Err(EvalError::DivisionByZero { span });
                        }
                        a.checked_div(*b)
                    }
                };
                r.map(Value::int).ok_or_else(overflow)
            }
            (Value::Const(Real(a)), Value::Const(Real(b))) => Ok(Value::real(match p {
                Prim::Add => a + b,
                Prim::Sub => a - b,
                Prim::Mul => a * b,
                _ => a / b,
            })),
            _ => Err(bad()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_equation, parse_expression};
    use crate::pretty::{equation_to_string, expr_to_string};

    fn xy() -> Env {
        Env::from_bindings([("x", Value::int(1)), ("y", Value::int(2))])
    }

    fn run(env: &Env, src: &str) -> (Value, String) {
        let r = eval(env, &parse_expression(src).unwrap()).unwrap();
        (r.value, expr_to_string(&r.next))
    }

    #[test]
    fn projection() {
        let env = xy();
        assert_eq!(project(&env, &Pattern::var("x")).unwrap(), Value::int(1));
        let xy_pat = Pattern::tuple(vec![Pattern::var("x"), Pattern::var("y")]);
        assert_eq!(
            project(&env, &xy_pat).unwrap(),
            Value::Tuple(vec![Value::int(1), Value::int(2)])
        );
        assert_eq!(
            project(&env, &Pattern::wildcard()),
            Err(EvalError::WildcardProjection)
        );
    }

    #[test]
    fn updating() {
        let env = update(&xy(), &Pattern::var("z"), &Value::int(3)).unwrap();
        assert_eq!(env.locals().len(), 3);
        assert_eq!(env.get("z"), Some(Value::int(3)));
        let xy_pat = Pattern::tuple(vec![Pattern::var("x"), Pattern::var("y")]);
        let env = update(
            &xy(),
            &xy_pat,
            &Value::Tuple(vec![Value::int(3), Value::int(4)]),
        )
        .unwrap();
        assert_eq!(env.get("x"), Some(Value::int(3)));
        assert_eq!(env.get("y"), Some(Value::int(4)));
        let env = update(
            &Env::from_bindings([("x", Value::int(1))]),
            &Pattern::wildcard(),
            &Value::int(5),
        )
        .unwrap();
        assert_eq!(env, Env::from_bindings([("x", Value::int(1))]));
        assert!(update(&xy(), &xy_pat, &Value::int(1)).is_err());
    }

    #[test]
    fn basic_rules() {
        assert_eq!(run(&xy(), "x"), (Value::int(1), "x".into()));
        assert_eq!(run(&xy(), "1 fby 2"), (Value::int(1), "2".into()));
        assert_eq!(run(&xy(), "pre 7"), (Value::Undef, "7 -> pre 7".into()));
        assert_eq!(
            run(&xy(), "if true then 1 else pre y"),
            (Value::int(1), "if true then 1 else pre y".into())
        );
        assert_eq!(
            run(&xy(), "0 -> pre x"),
            (Value::int(0), "1 -> pre x".into())
        );
        assert_eq!(
            run(&xy(), "(x, Some y)"),
            (
                Value::Tuple(vec![Value::int(1), Value::some(Value::int(2))]),
                "(x, Some y)".into()
            )
        );
    }

    #[test]
    fn only_the_taken_branch_advances() {
        let (v, next) = run(&xy(), "if false then pre x else pre y");
        assert_eq!(v, Value::Undef);
        assert_eq!(next, "if false then pre x else (2 -> pre y)");
    }

    #[test]
    fn either_rules() {
        assert_eq!(
            run(&xy(), "either Some x otherwise pre y"),
            (Value::int(1), "either Some x otherwise pre y".into())
        );
        assert_eq!(
            run(&xy(), "either None otherwise pre y"),
            (Value::Undef, "either None otherwise (2 -> pre y)".into())
        );
    }

    #[test]
    fn undefined_condition_is_an_error() {
        let err = eval(&xy(), &parse_expression("if pre x then 1 else 2").unwrap()).unwrap_err();
        assert!(matches!(err, EvalError::UndefinedCondition { .. }));
    }

    #[test]
    fn primitives() {
        assert_eq!(run(&xy(), "x + y * 3").0, Value::int(7));
        assert_eq!(run(&xy(), "-x").0, Value::int(-1));
        assert_eq!(run(&xy(), "x < y && !(x == y)").0, Value::boolean(true));
        assert_eq!(run(&xy(), "1.5 / 2.0").0, Value::real(0.75));
        assert_eq!(run(&xy(), "pre x + 1").0, Value::Undef);
        assert!(matches!(
            eval(&xy(), &parse_expression("x / 0").unwrap()),
            Err(EvalError::DivisionByZero { .. })
        ));
        assert!(matches!(
            eval(&xy(), &parse_expression("9223372036854775807 + x").unwrap()),
            Err(EvalError::Overflow { .. })
        ));
    }

    #[test]
    fn constant_stream_equation() {
        let eq = parse_equation("x = 0 -> pre x").unwrap();
        let (next, gamma) = eval_equations(&Env::new(), std::slice::from_ref(&eq)).unwrap();
        assert_eq!(gamma.get("x"), Some(Value::int(0)));
        assert_eq!(next, vec![eq]);
    }

    #[test]
    fn counter_equation() {
        let mut eqs = vec![parse_equation("n = 0 -> pre n + 1").unwrap()];
        let mut seen = Vec::new();
        for _ in 0..4 {
            let (next, gamma) = eval_equations(&Env::new(), &eqs).unwrap();
            seen.push(gamma.get("n").unwrap());
            eqs = next;
        }
        assert_eq!(seen, [0, 1, 2, 3].map(Value::int));
        assert_eq!(equation_to_string(&eqs[0]), "n = (3 -> pre n) + 1");
    }

    #[test]
    fn pre_sees_later_equations() {
        // `a` is defined first but its `pre` remembers `b` of the same cycle
        let eqs = vec![
            parse_equation("a = 0 -> pre b").unwrap(),
            parse_equation("b = a + 10").unwrap(),
        ];
        let (eqs, g1) = eval_equations(&Env::new(), &eqs).unwrap();
        let (_, g2) = eval_equations(&Env::new(), &eqs).unwrap();
        assert_eq!(
            (g1.get("a"), g1.get("b")),
            (Some(Value::int(0)), Some(Value::int(10)))
        );
        assert_eq!(
            (g2.get("a"), g2.get("b")),
            (Some(Value::int(10)), Some(Value::int(20)))
        );
    }

    #[test]
    fn fby_then_pre_is_undefined_on_second_cycle() {
        let eqs = vec![parse_equation("x = 0 fby pre x").unwrap()];
        let (eqs, g1) = eval_equations(&Env::new(), &eqs).unwrap();
        assert_eq!(g1.get("x"), Some(Value::int(0)));
        assert_eq!(equation_to_string(&eqs[0]), "x = pre x");
        let (_, g2) = eval_equations(&Env::new(), &eqs).unwrap();
        assert_eq!(g2.get("x"), Some(Value::Undef));
    }

    #[test]
    fn applications_carry_callee_state() {
        let counter = Lambda {
            input: Pattern::var("i"),
            output: Pattern::var("n"),
            body: vec![parse_equation("n = i -> pre n + i").unwrap()],
        };
        let globals: BTreeMap<Name, Value> =
            [("acc".to_string(), Value::Closure(Arc::new(counter)))]
                .into_iter()
                .collect();
        let env = Env::with_globals(Arc::new(globals));
        let mut e = parse_expression("(acc 1, acc 2)").unwrap();
        let mut out = Vec::new();
        for _ in 0..3 {
            let r = eval(&env, &e).unwrap();
            out.push(r.value.to_string());
            e = r.next;
        }
        // each call site keeps its own memory
        assert_eq!(out, ["(1, 2)", "(2, 4)", "(3, 6)"]);
    }

    #[test]
    fn evaluation_leaves_the_environment_alone() {
        let env = xy();
        let before = env.clone();
        eval_equations(&env, &[parse_equation("z = 0 -> pre x").unwrap()]).unwrap();
        assert_eq!(env, before);
    }

    struct Recorder(Vec<Value>);

    impl HostDispatch for Recorder {
        fn call(&mut self, name: &str, arg: Value) -> Result<Value, String> {
            assert_eq!(name, "probe");
            self.0.push(arg);
            Ok(Value::int(self.0.len() as i64))
        }
    }

    #[test]
    fn host_calls_happen_once_per_evaluation() {
        let globals: BTreeMap<Name, Value> = [("probe".to_string(), Value::Host("probe".into()))]
            .into_iter()
            .collect();
        let env = Env::with_globals(Arc::new(globals));
        let eqs = vec![
            parse_equation("a = 0 -> pre (probe b)").unwrap(),
            parse_equation("b = probe 7").unwrap(),
        ];
        let mut hosts = Recorder(Vec::new());
        let (_, gamma) = eval_equations_with(&env, &eqs, &mut hosts).unwrap();
        assert_eq!(hosts.0, vec![Value::int(7), Value::int(1)]);
        assert_eq!(gamma.get("b"), Some(Value::int(1)));
    }
}
