//! Initialization analysis: proves that the undefined value produced by the
//! first evaluation of a `pre` never reaches a step output.
//!
//! Every expression gets an [`InitType`]: `I` if its value is defined on every
//! cycle, `U` if it may be undefined on the first cycle it is evaluated.
//! Because `if` and `either` evaluate only the branch they take, a branch may
//! be evaluated for the first time on any later cycle. Each branch must
//! therefore be `I` by itself; a `U` branch hidden under `->` would surface as
//! soon as it is first taken after the first cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::*;
use crate::diag::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitType {
    I,
    U,
    Tuple(Vec<InitType>),
}

impl InitType {
    pub fn is_initialized(&self) -> bool {
        match self {
            InitType::I => true,
            InitType::U => false,
            InitType::Tuple(items) => items.iter().all(InitType::is_initialized),
        }
    }

    /// Greatest lower bound, pointwise over tuples.
    pub fn meet(&self, other: &InitType) -> InitType {
        match (self, other) {
            (InitType::Tuple(a), InitType::Tuple(b)) if a.len() == b.len() => {
                InitType::Tuple(a.iter().zip(b).map(|(x, y)| x.meet(y)).collect())
            }
            _ if self.is_initialized() && other.is_initialized() => InitType::I,
            _ => InitType::U,
        }
    }
}

impl fmt::Display for InitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitType::I => f.write_str("I"),
            InitType::U => f.write_str("U"),
            InitType::Tuple(items) => {
                f.write_str("(")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Cx<'a> {
    env: BTreeMap<Name, InitType>,
    steps: &'a BTreeSet<Name>,
    diags: Option<Vec<Diagnostic>>,
}

impl Cx<'_> {
    fn require(&mut self, t: &InitType, span: Span, message: impl FnOnce() -> String) {
        if !t.is_initialized() {
            if let Some(diags) = &mut self.diags {
                diags.push(Diagnostic::error("init", span, message()));
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> InitType {
        match &e.kind {
            // names that are not local denote steps or operations
            ExprKind::Var(x) => self.env.get(x).cloned().unwrap_or(InitType::I),
            ExprKind::Const(_) | ExprKind::Prim(_) | ExprKind::NoneLit | ExprKind::Lambda(_) => {
                InitType::I
            }
            ExprKind::Undef | ExprKind::Hole(_) => InitType::U,
            ExprKind::Tuple(items) => InitType::Tuple(items.iter().map(|i| self.expr(i)).collect()),
            ExprKind::Some(a) => self.expr(a),
            ExprKind::Pre(a) => {
                let t = self.expr(a);
                self.require(&t, a.span, || {
                    format!(
                        "operand of `pre` may be undefined: `{}` has no value on the first cycle",
                        crate::pretty::expr_to_string(a)
                    )
                });
                InitType::U
            }
            ExprKind::Arrow(a, b) => {
                let ta = self.expr(a);
                self.require(&ta, a.span, || {
                    "left operand of `->` must be initialized".into()
                });
                self.expr(b);
                InitType::I
            }
            ExprKind::Fby(a, b) => {
                let ta = self.expr(a);
                self.require(&ta, a.span, || {
                    "left operand of `fby` must be initialized".into()
                });
                let tb = self.expr(b);
                self.require(&tb, b.span, || {
                    "right operand of `fby` must be initialized: it is first evaluated on the second cycle"
                        .into()
                });
                InitType::I
            }
            ExprKind::If(c, t, f) => {
                let tc = self.expr(c);
                self.require(&tc, c.span, || {
                    "condition of `if` must be initialized".into()
                });
                for branch in [t, f] {
                    let tb = self.expr(branch);
                    self.require(&tb, branch.span, || {
                        "branch of `if` may be undefined the first time it is taken".into()
                    });
                }
                InitType::I
            }
            ExprKind::Either(a, b) => {
                let ta = self.expr(a);
                self.require(&ta, a.span, || {
                    "scrutinee of `either` must be initialized".into()
                });
                let tb = self.expr(b);
                self.require(&tb, b.span, || {
                    "fallback of `either` may be undefined the first time it is taken".into()
                });
                InitType::I
            }
            ExprKind::Apply(f, a) => {
                self.expr(f);
                let ta = self.expr(a);
                if self.is_operation(f) {
                    // operations are strict: an undefined operand gives an
                    // undefined result and nothing is remembered
                    if ta.is_initialized() {
                        InitType::I
                    } else {
                        InitType::U
                    }
                } else {
                    self.require(&ta, a.span, || {
                        "argument of a step must be initialized".into()
                    });
                    InitType::I
                }
            }
        }
    }

    fn is_operation(&self, f: &Expr) -> bool {
        match &f.kind {
            ExprKind::Prim(_) => true,
            ExprKind::Var(x) => {
                !self.env.contains_key(x) && !self.steps.contains(x) && Prim::from_name(x).is_some()
            }
            _ => false,
        }
    }

    fn assign(&mut self, p: &Pattern, t: &InitType) {
        match (&p.kind, t) {
            (PatternKind::Var(x), _) => {
                self.env.insert(x.clone(), t.clone());
            }
            (PatternKind::Tuple(ps), InitType::Tuple(ts)) if ps.len() == ts.len() => {
                for (p, t) in ps.iter().zip(ts) {
                    self.assign(p, t);
                }
            }
            (PatternKind::Tuple(ps), _) => {
                let leaf = if t.is_initialized() {
                    InitType::I
                } else {
                    InitType::U
                };
                for p in ps {
                    self.assign(p, &leaf);
                }
            }
            (PatternKind::Wildcard | PatternKind::Unit, _) => {}
        }
    }

    fn project(&self, p: &Pattern) -> InitType {
        match &p.kind {
            PatternKind::Var(x) => self.env.get(x).cloned().unwrap_or(InitType::I),
            PatternKind::Tuple(ps) => InitType::Tuple(ps.iter().map(|p| self.project(p)).collect()),
            PatternKind::Wildcard | PatternKind::Unit => InitType::I,
        }
    }
}

/// Initialization types of the inputs and equation variables of a step whose
/// body is in dependency order. Inputs are assumed initialized; every output
/// must be. `steps` names the program's steps, which take precedence over
/// standard-library operations of the same name.
pub fn check_initialization(
    input: &Pattern,
    output: &Pattern,
    body: &[Equation],
    steps: &BTreeSet<Name>,
) -> Result<BTreeMap<Name, InitType>, Vec<Diagnostic>> {
    let mut cx = Cx {
        env: BTreeMap::new(),
        steps,
        diags: None,
    };
    cx.assign(input, &InitType::I);
    // start optimistic and weaken until stable; each variable can only move
    // from I to U, so this terminates
    for eq in body {
        cx.assign(&eq.lhs, &InitType::I);
    }
    loop {
        let before = cx.env.clone();
        for eq in body {
            let t = cx.expr(&eq.rhs);
            cx.assign(&eq.lhs, &t);
        }
        if cx.env == before {
            break;
        }
    }
    cx.diags = Some(Vec::new());
    for eq in body {
        cx.expr(&eq.rhs);
    }
    for x in output.binders() {
        let t = cx.env.get(x).cloned().unwrap_or(InitType::I);
        cx.require(&t, output.span, || {
            format!("output `{x}` may be undefined on the first cycle")
        });
    }
    let diags = cx.diags.take().unwrap();
    if diags.is_empty() {
        Ok(cx.env)
    } else {
        Err(diags)
    }
}

/// Initialization type of a lone expression whose free variables are initialized.
pub fn expr_init_type(e: &Expr) -> (InitType, Vec<Diagnostic>) {
    let steps = BTreeSet::new();
    let mut cx = Cx {
        env: BTreeMap::new(),
        steps: &steps,
        diags: Some(Vec::new()),
    };
    let t = cx.expr(e);
    (t, cx.diags.unwrap())
}

/// Whether the whole output pattern is initialized given the analysed variables.
pub fn output_init_type(env: &BTreeMap<Name, InitType>, output: &Pattern) -> InitType {
    Cx {
        env: env.clone(),
        steps: &BTreeSet::new(),
        diags: None,
    }
    .project(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expression, parse_program};

    fn check(src: &str) -> Result<BTreeMap<Name, InitType>, Vec<Diagnostic>> {
        let p = parse_program(src).unwrap();
        let s = &p.steps[0];
        let body = crate::analysis::causality::order_equations(s.body.as_ref().unwrap()).unwrap();
        let steps = p.steps.iter().map(|s| s.name.clone()).collect();
        check_initialization(&s.input, &s.output, &body, &steps)
    }

    #[test]
    fn nested_pre_is_rejected() {
        let errs = check("step s () --> x { x = 0 -> 0 -> pre pre x }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("`pre x`"), "{}", errs[0].message);
    }

    #[test]
    fn alternating_arrow_and_pre_is_accepted() {
        let env = check("step s () --> x { x = 0 -> pre (0 -> pre x) }").unwrap();
        assert_eq!(env["x"], InitType::I);
    }

    #[test]
    fn uninitialized_output_is_rejected() {
        let errs = check("step s y --> x { x = pre y }").unwrap_err();
        assert_eq!(
            errs[0].message,
            "output `x` may be undefined on the first cycle"
        );
    }

    #[test]
    fn intermediate_variables_may_be_uninitialized() {
        let env = check("step s y --> x { p = pre y; x = 0 -> p }").unwrap();
        assert_eq!(env["p"], InitType::U);
        assert_eq!(env["x"], InitType::I);
    }

    #[test]
    fn fby_needs_an_initialized_tail() {
        assert!(check("step s () --> x { x = 0 fby pre x }").is_err());
        assert!(check("step s () --> x { x = 0 fby (1 -> pre x) }").is_ok());
    }

    #[test]
    fn branches_are_checked_separately() {
        // the `pre` would first run whenever `c` first becomes true
        assert!(check("step s (c, y) --> x { x = 0 -> if c then pre y else 1 }").is_err());
        assert!(check("step s (c, y) --> x { x = if c then 0 -> pre y else 1 }").is_ok());
    }

    #[test]
    fn operations_propagate_undefined_operands() {
        let env = check("step s () --> x { x = 0 -> pre x + 1 }").unwrap();
        assert_eq!(env["x"], InitType::I);
        assert!(check("step s () --> x { x = pre x + 1 }").is_err());
        // a user step named like an operation is a step, and its argument must be defined
        assert!(check(
            "step s () --> x { x = 0 -> add (pre x, 1) }\nstep add (a, b) --> c { c = a }"
        )
        .is_err());
    }

    #[test]
    fn tuple_components() {
        let env = check("step s y --> b { a, b = pre y, y }").unwrap();
        assert_eq!(env["a"], InitType::U);
        assert_eq!(env["b"], InitType::I);
    }

    #[test]
    fn lone_expressions() {
        let (t, d) = expr_init_type(&parse_expression("0 -> pre (0 -> pre x)").unwrap());
        assert_eq!(t, InitType::I);
        assert!(d.is_empty());
        let (t, _) = expr_init_type(&parse_expression("(pre x, 1)").unwrap());
        assert_eq!(t, InitType::Tuple(vec![InitType::U, InitType::I]));
    }

    #[test]
    fn meet_is_pointwise() {
        let a = InitType::Tuple(vec![InitType::I, InitType::U]);
        let b = InitType::Tuple(vec![InitType::I, InitType::I]);
        assert_eq!(a.meet(&b), a);
        assert_eq!(InitType::I.meet(&InitType::U), InitType::U);
    }
}
