//! Recursive-descent parser for `.mim` sources.
//!
//! Operator precedence, loosest first: `,` (tuples), `->`, `fby`,
//! `either .. otherwise`, `if`, `||`, `&&`, comparisons, `+ -`, `* /`,
//! prefix `! - pre Some`, application, atoms. `->` and `fby` associate to the
//! right, binary operators to the left. See `docs/grammar.md`.

mod lexer;

use std::fmt;

pub use lexer::{format_duration, parse_duration, tokenize, Keyword, Op, Punct, Token, TokenKind};

use crate::ast::*;
use crate::diag::Diagnostic;

const MAX_ERRORS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub span: Span,
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

impl ParseError {
    pub fn new(span: Span, expected: Vec<String>, found: String, message: String) -> Self {
        ParseError {
            span,
            expected,
            found,
            message,
        }
    }

    fn custom(span: Span, message: impl Into<String>) -> Self {
        ParseError::new(span, Vec::new(), String::new(), message.into())
    }
}

impl From<ParseError> for Diagnostic {
    fn from(e: ParseError) -> Self {
        Diagnostic::error("parse", e.span, e.message)
    }
}

type PResult<T> = Result<T, ParseError>;

/// Parses a whole program. On failure returns the errors found, at most ten,
/// resynchronizing at the next top-level keyword after each one.
pub fn parse_program(source: &str) -> Result<Program, Vec<ParseError>> {
    let tokens = tokenize(source).map_err(|e| vec![e])?;
    let mut p = Parser::new(tokens);
    let mut program = Program::default();
    let mut errors = Vec::new();
    loop {
        let result = match p.peek() {
            TokenKind::Eof => break,
            TokenKind::Keyword(Keyword::Step) => p.step().map(|s| program.steps.push(s)),
            TokenKind::Keyword(Keyword::Channel) => p.channel().map(|c| program.channels.push(c)),
            TokenKind::Keyword(Keyword::Node) => p.node().map(|n| program.nodes.push(n)),
            _ => Err(p.unexpected(&["`step`", "`channel`", "`node`"])),
        };
        if let Err(e) = result {
            errors.push(e);
            if errors.len() >= MAX_ERRORS {
                break;
            }
            p.recover();
        }
    }
    check_duplicates(&program, &mut errors);
    errors.truncate(MAX_ERRORS);
    if errors.is_empty() {
        Ok(program)
    } else {
        Err(errors)
    }
}

fn check_duplicates(program: &Program, errors: &mut Vec<ParseError>) {
    fn scan<'a>(
        what: &str,
        items: impl Iterator<Item = (&'a str, Span)>,
        errors: &mut Vec<ParseError>,
    ) {
        let mut seen: Vec<&str> = Vec::new();
        for (name, span) in items {
            if seen.contains(&name) {
                errors.push(ParseError::custom(
                    span,
                    format!("{what} `{name}` is defined more than once"),
                ));
            } else {
                seen.push(name);
            }
        }
    }
    scan(
        "step",
        program.steps.iter().map(|s| (s.name.as_str(), s.span)),
        errors,
    );
    scan(
        "channel",
        program.channels.iter().map(|c| (c.name.as_str(), c.span)),
        errors,
    );
    scan(
        "node",
        program.nodes.iter().map(|n| (n.name.as_str(), n.span)),
        errors,
    );
}

/// Parses a single expression.
pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(tokenize(source)?);
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a single equation such as `x = 0 -> pre x`.
pub fn parse_equation(source: &str) -> Result<Equation, ParseError> {
    let mut p = Parser::new(tokenize(source)?);
    let eq = p.equation()?;
    p.expect_eof()?;
    Ok(eq)
}

/// Parses a literal value (`1`, `-2.5`, `true`, `(1, Some false)`, `None`, `()`).
pub fn parse_value(source: &str) -> Result<Value, ParseError> {
    let mut p = Parser::new(tokenize(source)?);
    let e = p.literal()?;
    p.expect_eof()?;
    Ok(literal_value(&e).expect("literal parser only builds constants"))
}

/// Evaluates a constant expression built from literals, tuples and options.
pub fn literal_value(e: &Expr) -> Option<Value> {
    Some(match &e.kind {
        ExprKind::Const(c) => Value::Const(*c),
        ExprKind::Tuple(items) => {
            Value::Tuple(items.iter().map(literal_value).collect::<Option<_>>()?)
        }
        ExprKind::NoneLit => Value::None,
        ExprKind::Some(inner) => Value::some(literal_value(inner)?),
        _ => return None,
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, p: Punct) -> bool {
        *self.peek() == TokenKind::Punct(p)
    }

    fn at_op(&self, o: Op) -> bool {
        *self.peek() == TokenKind::Op(o)
    }

    fn at_kw(&self, k: Keyword) -> bool {
        *self.peek() == TokenKind::Keyword(k)
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = self.peek().to_string();
        let message = match expected {
            [] => format!("unexpected {found}"),
            [one] => format!("expected {one}, found {found}"),
            many => format!("expected one of {}, found {found}", many.join(", ")),
        };
        ParseError::new(
            self.span(),
            expected.iter().map(|s| s.to_string()).collect(),
            found,
            message,
        )
    }

    fn expect_punct(&mut self, p: Punct) -> PResult<Span> {
        if self.at_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[&format!("`{}`", lexer::punct_str(p))]))
        }
    }

    fn expect_kw(&mut self, k: Keyword, spelled: &str) -> PResult<Span> {
        if self.at_kw(k) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[&format!("`{spelled}`")]))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }

    fn recover(&mut self) {
        self.bump();
        while !matches!(
            self.peek(),
            TokenKind::Eof | TokenKind::Keyword(Keyword::Step | Keyword::Channel | Keyword::Node)
        ) {
            self.bump();
        }
    }

    // ---- declarations ----------------------------------------------------

    fn step(&mut self) -> PResult<StepDecl> {
        let start = self.expect_kw(Keyword::Step, "step")?;
        let (name, _) = self.expect_ident()?;
        let input = self.pattern_elem()?;
        if let Some(dup) = input.duplicate_binder() {
            return Err(ParseError::custom(
                input.span,
                format!("`{dup}` is bound more than once in the input of step `{name}`"),
            ));
        }
        self.expect_punct(Punct::LongArrow)?;
        let output = self.pattern_elem()?;
        let mut end = output.span;
        let body = if self.eat_punct(Punct::LBrace) {
            let mut eqs = Vec::new();
            while !self.at_punct(Punct::RBrace) {
                eqs.push(self.equation()?);
                if !self.eat_punct(Punct::Semi) {
                    break;
                }
            }
            if eqs.is_empty() {
                return Err(ParseError::new(
                    self.span(),
                    vec!["equation".into()],
                    self.peek().to_string(),
                    format!("step `{name}` has an empty body; a step needs at least one equation"),
                ));
            }
            end = self.expect_punct(Punct::RBrace)?;
            Some(eqs)
        } else {
            None
        };
        Ok(StepDecl {
            name,
            input,
            output,
            body,
            span: start.join(end),
        })
    }

    fn channel(&mut self) -> PResult<ChannelDecl> {
        let start = self.expect_kw(Keyword::Channel, "channel")?;
        let (name, _) = self.expect_ident()?;
        self.expect_punct(Punct::Colon)?;
        let ty = self.type_expr()?;
        let mut end = ty.span;
        let mut init = Vec::new();
        if self.eat_punct(Punct::Equals) {
            self.expect_punct(Punct::LBrace)?;
            if !self.at_punct(Punct::RBrace) {
                init.push(self.literal()?);
                while self.eat_punct(Punct::Comma) {
                    init.push(self.literal()?);
                }
            }
            end = self.expect_punct(Punct::RBrace)?;
        }
        Ok(ChannelDecl {
            name,
            ty,
            init,
            span: start.join(end),
        })
    }

    fn node(&mut self) -> PResult<NodeDecl> {
        let start = self.expect_kw(Keyword::Node, "node")?;
        let (name, _) = self.expect_ident()?;
        self.expect_kw(Keyword::Implements, "implements")?;
        let (step, _) = self.expect_ident()?;
        let inputs = self.ports()?;
        self.expect_punct(Punct::LongArrow)?;
        let outputs = self.ports()?;
        self.expect_kw(Keyword::Every, "every")?;
        let (period, end) = match self.peek() {
            TokenKind::Duration(us) => {
                let us = *us;
                (us, self.bump().span)
            }
            _ => return Err(self.unexpected(&["duration (e.g. `10ms`)"])),
        };
        Ok(NodeDecl {
            name,
            step,
            inputs,
            outputs,
            period,
            span: start.join(end),
        })
    }

    fn ports(&mut self) -> PResult<Vec<Port>> {
        self.expect_punct(Punct::LParen)?;
        let mut ports = Vec::new();
        if !self.at_punct(Punct::RParen) {
            loop {
                let (channel, span) = self.expect_ident()?;
                let optional = self.eat_punct(Punct::Question);
                let span = if optional {
                    span.join(self.prev_span())
                } else {
                    span
                };
                ports.push(Port {
                    channel,
                    optional,
                    span,
                });
                if !self.eat_punct(Punct::Comma) {
                    break;
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        Ok(ports)
    }

    // ---- patterns and types ----------------------------------------------

    /// Equation left-hand side: elements separated by commas, no parentheses needed.
    fn pattern(&mut self) -> PResult<Pattern> {
        let first = self.pattern_elem()?;
        if !self.at_punct(Punct::Comma) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_punct(Punct::Comma) {
            items.push(self.pattern_elem()?);
        }
        let span = items[0].span.join(items[items.len() - 1].span);
        Ok(Pattern::new(PatternKind::Tuple(items), span))
    }

    fn pattern_elem(&mut self) -> PResult<Pattern> {
        let mut p = self.pattern_atom()?;
        if self.eat_punct(Punct::Colon) {
            if p.ty.is_some() {
                return Err(ParseError::custom(
                    self.prev_span(),
                    "pattern already has a type annotation",
                ));
            }
            let ty = self.type_expr()?;
            p.span = p.span.join(ty.span);
            p.ty = Some(ty);
        }
        Ok(p)
    }

    fn pattern_atom(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.bump().span;
                Ok(Pattern::new(PatternKind::Var(name), span))
            }
            TokenKind::Punct(Punct::Underscore) => {
                let span = self.bump().span;
                Ok(Pattern::new(PatternKind::Wildcard, span))
            }
            TokenKind::Punct(Punct::LParen) => {
                let start = self.bump().span;
                if self.at_punct(Punct::RParen) {
                    let end = self.bump().span;
                    return Ok(Pattern::new(PatternKind::Unit, start.join(end)));
                }
                let mut items = vec![self.pattern_elem()?];
                while self.eat_punct(Punct::Comma) {
                    items.push(self.pattern_elem()?);
                }
                let end = self.expect_punct(Punct::RParen)?;
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Pattern::new(PatternKind::Tuple(items), start.join(end)))
                }
            }
            _ => Err(self.unexpected(&["pattern"])),
        }
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let mut ty = self.type_atom()?;
        while self.at_punct(Punct::Question) {
            let end = self.bump().span;
            let span = ty.span.join(end);
            ty = TypeExpr {
                kind: TypeExprKind::Option(Box::new(ty)),
                span,
            };
        }
        Ok(ty)
    }

    fn type_atom(&mut self) -> PResult<TypeExpr> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.span();
                let kind = match name.as_str() {
                    "int" => TypeExprKind::Int,
                    "bool" => TypeExprKind::Bool,
                    "real" => TypeExprKind::Real,
                    "unit" => TypeExprKind::Unit,
                    _ => {
                        return Err(ParseError::new(
                            span,
                            vec!["`int`, `bool`, `real` or `unit`".into()],
                            format!("`{name}`"),
                            format!("unknown type `{name}`"),
                        ))
                    }
                };
                self.bump();
                Ok(TypeExpr { kind, span })
            }
            TokenKind::Punct(Punct::LParen) => {
                let start = self.bump().span;
                if self.at_punct(Punct::RParen) {
                    let end = self.bump().span;
                    return Ok(TypeExpr {
                        kind: TypeExprKind::Unit,
                        span: start.join(end),
                    });
                }
                let mut items = vec![self.type_expr()?];
                while self.eat_punct(Punct::Comma) {
                    items.push(self.type_expr()?);
                }
                let end = self.expect_punct(Punct::RParen)?;
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(TypeExpr {
                        kind: TypeExprKind::Tuple(items),
                        span: start.join(end),
                    })
                }
            }
            _ => Err(self.unexpected(&["type"])),
        }
    }

    // ---- equations and expressions ---------------------------------------

    fn equation(&mut self) -> PResult<Equation> {
        let lhs = self.pattern()?;
        if let Some(dup) = lhs.duplicate_binder() {
            return Err(ParseError::custom(
                lhs.span,
                format!("`{dup}` is bound more than once in this pattern"),
            ));
        }
        self.expect_punct(Punct::Equals)?;
        let rhs = self.expr()?;
        Ok(Equation::new(lhs, rhs))
    }

    /// Top level: a comma-separated tuple without parentheses.
    fn expr(&mut self) -> PResult<Expr> {
        let first = self.arrow()?;
        if !self.at_punct(Punct::Comma) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_punct(Punct::Comma) {
            items.push(self.arrow()?);
        }
        let span = items[0].span.join(items[items.len() - 1].span);
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn arrow(&mut self) -> PResult<Expr> {
        let lhs = self.fby()?;
        if self.at_op(Op::Arrow) {
            self.bump();
            let rhs = self.arrow()?;
            return Ok(Expr::arrow(lhs, rhs));
        }
        Ok(lhs)
    }

    fn fby(&mut self) -> PResult<Expr> {
        let lhs = self.either()?;
        if self.eat_kw(Keyword::Fby) {
            let rhs = self.fby()?;
            return Ok(Expr::fby(lhs, rhs));
        }
        Ok(lhs)
    }

    fn either(&mut self) -> PResult<Expr> {
        if self.at_kw(Keyword::Either) {
            let start = self.bump().span;
            let scrutinee = self.arrow()?;
            self.expect_kw(Keyword::Otherwise, "otherwise")?;
            let fallback = self.either()?;
            let span = start.join(fallback.span);
            return Ok(Expr::new(
                ExprKind::Either(Box::new(scrutinee), Box::new(fallback)),
                span,
            ));
        }
        self.conditional()
    }

    fn conditional(&mut self) -> PResult<Expr> {
        if self.at_kw(Keyword::If) {
            let start = self.bump().span;
            let c = self.arrow()?;
            self.expect_kw(Keyword::Then, "then")?;
            let t = self.arrow()?;
            self.expect_kw(Keyword::Else, "else")?;
            let e = self.conditional()?;
            let span = start.join(e.span);
            return Ok(Expr::new(
                ExprKind::If(Box::new(c), Box::new(t), Box::new(e)),
                span,
            ));
        }
        self.binary(0)
    }

    /// Left-associative binary operator levels, loosest first.
    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: [&[(Op, Prim)]; 5] = [
            &[(Op::OrOr, Prim::Or)],
            &[(Op::AndAnd, Prim::And)],
            &[
                (Op::Lt, Prim::Lt),
                (Op::Le, Prim::Le),
                (Op::Gt, Prim::Gt),
                (Op::Ge, Prim::Ge),
                (Op::EqEq, Prim::Eq),
                (Op::Ne, Prim::Ne),
            ],
            &[(Op::Plus, Prim::Add), (Op::Minus, Prim::Sub)],
            &[(Op::Star, Prim::Mul), (Op::Slash, Prim::Div)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                TokenKind::Op(o) => LEVELS[level].iter().find(|(t, _)| t == o).map(|(_, p)| *p),
                _ => None,
            };
            let Some(prim) = op else { break };
            let op_span = self.bump().span;
            let rhs = self.binary(level + 1)?;
            let mut e = Expr::binop(prim, lhs, rhs);
            if let ExprKind::Apply(f, _) = &mut e.kind {
                f.span = op_span;
            }
            lhs = e;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            TokenKind::Op(Op::Bang) => {
                let start = self.bump().span;
                let operand = self.unary()?;
                Ok(prefix_prim(Prim::Not, start, operand))
            }
            TokenKind::Op(Op::Minus) => {
                let start = self.bump().span;
                match self.peek().clone() {
                    TokenKind::Int(n) => {
                        let end = self.bump().span;
                        let value = if n == 1u64 << 63 {
                            i64::MIN
                        } else {
                            -i64::try_from(n).map_err(|_| {
                                ParseError::custom(
                                    end,
                                    format!("integer literal `{n}` is too large"),
                                )
                            })?
                        };
                        Ok(Expr::new(
                            ExprKind::Const(Literal::Int(value)),
                            start.join(end),
                        ))
                    }
                    TokenKind::Real(r) => {
                        let end = self.bump().span;
                        Ok(Expr::new(
                            ExprKind::Const(Literal::Real(-r)),
                            start.join(end),
                        ))
                    }
                    _ => {
                        let operand = self.unary()?;
                        Ok(prefix_prim(Prim::Neg, start, operand))
                    }
                }
            }
            TokenKind::Keyword(Keyword::Pre) => {
                let start = self.bump().span;
                let operand = self.unary()?;
                let span = start.join(operand.span);
                Ok(Expr::new(ExprKind::Pre(Box::new(operand)), span))
            }
            TokenKind::Keyword(Keyword::Some) => {
                let start = self.bump().span;
                let operand = self.unary()?;
                let span = start.join(operand.span);
                Ok(Expr::new(ExprKind::Some(Box::new(operand)), span))
            }
            _ => self.application(),
        }
    }

    fn application(&mut self) -> PResult<Expr> {
        let mut f = self.atom()?;
        while self.at_atom_start() {
            let arg = self.atom()?;
            f = Expr::apply(f, arg);
        }
        Ok(f)
    }

    fn at_atom_start(&self) -> bool {
        matches!(
            self.peek(),
            TokenKind::Ident(_)
                | TokenKind::Int(_)
                | TokenKind::Real(_)
                | TokenKind::Bool(_)
                | TokenKind::Punct(Punct::LParen)
                | TokenKind::Keyword(Keyword::None)
        )
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            TokenKind::Ident(name) => ExprKind::Var(name),
            TokenKind::Int(n) => ExprKind::Const(Literal::Int(i64::try_from(n).map_err(|_| {
                ParseError::custom(span, format!("integer literal `{n}` is too large"))
            })?)),
            TokenKind::Real(r) => ExprKind::Const(Literal::Real(r)),
            TokenKind::Bool(b) => ExprKind::Const(Literal::Bool(b)),
            TokenKind::Keyword(Keyword::None) => ExprKind::NoneLit,
            TokenKind::Punct(Punct::LParen) => {
                self.bump();
                if self.at_punct(Punct::RParen) {
                    let end = self.bump().span;
                    return Ok(Expr::new(ExprKind::Const(Literal::Unit), span.join(end)));
                }
                let mut inner = self.expr()?;
                let end = self.expect_punct(Punct::RParen)?;
                if matches!(inner.kind, ExprKind::Tuple(_)) {
                    inner.span = span.join(end);
                }
                return Ok(inner);
            }
            _ => return Err(self.unexpected(&["expression"])),
        };
        self.bump();
        Ok(Expr::new(kind, span))
    }

    /// Channel initializers and stub data: constants, tuples and options only.
    fn literal(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            TokenKind::Int(_) | TokenKind::Real(_) | TokenKind::Bool(_) => self.atom(),
            TokenKind::Op(Op::Minus)
                if matches!(self.peek_at(1), TokenKind::Int(_) | TokenKind::Real(_)) =>
            {
                self.unary()
            }
            TokenKind::Keyword(Keyword::None) => {
                self.bump();
                Ok(Expr::new(ExprKind::NoneLit, start))
            }
            TokenKind::Keyword(Keyword::Some) => {
                self.bump();
                let inner = self.literal()?;
                let span = start.join(inner.span);
                Ok(Expr::new(ExprKind::Some(Box::new(inner)), span))
            }
            TokenKind::Punct(Punct::LParen) => {
                self.bump();
                if self.at_punct(Punct::RParen) {
                    let end = self.bump().span;
                    return Ok(Expr::new(ExprKind::Const(Literal::Unit), start.join(end)));
                }
                let mut items = vec![self.literal()?];
                while self.eat_punct(Punct::Comma) {
                    items.push(self.literal()?);
                }
                let end = self.expect_punct(Punct::RParen)?;
                if items.len() == 1 {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Expr::new(ExprKind::Tuple(items), start.join(end)))
                }
            }
            _ => Err(self.unexpected(&["literal value"])),
        }
    }
}

fn prefix_prim(prim: Prim, op_span: Span, operand: Expr) -> Expr {
    let span = op_span.join(operand.span);
    Expr::new(
        ExprKind::Apply(
            Box::new(Expr::new(ExprKind::Prim(prim), op_span)),
            Box::new(operand),
        ),
        span,
    )
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(src: &str) -> Expr {
        parse_expression(src).unwrap_or_else(|err| panic!("{src}: {err}"))
    }

    #[test]
    fn arrow_of_pre() {
        assert_eq!(
            e("in -> pre in"),
            Expr::arrow(Expr::var("in"), Expr::pre(Expr::var("in")))
        );
    }

    #[test]
    fn operators_desugar_to_primitives() {
        assert_eq!(
            e("x + y"),
            Expr::binop(Prim::Add, Expr::var("x"), Expr::var("y"))
        );
        assert_eq!(
            e("a + b * c"),
            Expr::binop(
                Prim::Add,
                Expr::var("a"),
                Expr::binop(Prim::Mul, Expr::var("b"), Expr::var("c"))
            )
        );
        assert_eq!(
            e("a - b - c"),
            Expr::binop(
                Prim::Sub,
                Expr::binop(Prim::Sub, Expr::var("a"), Expr::var("b")),
                Expr::var("c")
            )
        );
    }

    #[test]
    fn edge_detector_conditional() {
        let got = e(
            "if !pre_in && in then (Some true) else if pre_in && !in then (Some false) else None",
        );
        let not = |x: Expr| prefix_prim(Prim::Not, Span::default(), x);
        let some = |b| Expr::new(ExprKind::Some(Box::new(Expr::boolean(b))), Span::default());
        let expected = Expr::if_then_else(
            Expr::binop(Prim::And, not(Expr::var("pre_in")), Expr::var("in")),
            some(true),
            Expr::if_then_else(
                Expr::binop(Prim::And, Expr::var("pre_in"), not(Expr::var("in"))),
                some(false),
                Expr::new(ExprKind::NoneLit, Span::default()),
            ),
        );
        assert_eq!(got, expected);
    }

    #[test]
    fn arrow_and_fby_are_right_associative() {
        assert_eq!(
            e("0 -> 0 -> pre pre x"),
            Expr::arrow(
                Expr::int(0),
                Expr::arrow(Expr::int(0), Expr::pre(Expr::pre(Expr::var("x"))))
            )
        );
        assert_eq!(
            e("1 fby 2 fby 3"),
            Expr::fby(Expr::int(1), Expr::fby(Expr::int(2), Expr::int(3)))
        );
    }

    #[test]
    fn application_binds_tighter_than_prefix() {
        assert_eq!(
            e("pre f x"),
            Expr::pre(Expr::apply(Expr::var("f"), Expr::var("x")))
        );
        assert_eq!(
            e("f x y"),
            Expr::apply(Expr::apply(Expr::var("f"), Expr::var("x")), Expr::var("y"))
        );
    }

    #[test]
    fn either_keyword_form() {
        assert_eq!(
            e("either x otherwise 0"),
            Expr::new(
                ExprKind::Either(Box::new(Expr::var("x")), Box::new(Expr::int(0))),
                Span::default()
            )
        );
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(e("-3"), Expr::int(-3));
        assert_eq!(e("-9223372036854775808"), Expr::int(i64::MIN));
        assert_eq!(
            e("x - 3"),
            Expr::binop(Prim::Sub, Expr::var("x"), Expr::int(3))
        );
        assert!(matches!(e("-x").as_unop(), Some((Prim::Neg, _))));
    }

    #[test]
    fn top_level_tuples() {
        let eq = parse_equation("o1, o2, o3 = inp, inp, inp").unwrap();
        assert_eq!(eq.lhs.binders(), vec!["o1", "o2", "o3"]);
        assert!(matches!(&eq.rhs.kind, ExprKind::Tuple(items) if items.len() == 3));
    }

    #[test]
    fn empty_body_is_rejected() {
        let errs = parse_program("step f x --> y { }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(
            errs[0].message.contains("empty body"),
            "{}",
            errs[0].message
        );
    }

    #[test]
    fn duplicate_declarations_are_rejected() {
        let errs = parse_program("channel a : int\nchannel a : bool").unwrap_err();
        assert!(errs[0]
            .message
            .contains("channel `a` is defined more than once"));
    }

    #[test]
    fn duplicate_binders_are_rejected() {
        assert!(parse_equation("x, x = 1, 2").is_err());
        assert!(parse_program("step f (a, a) --> b { b = a }").is_err());
    }

    #[test]
    fn recovery_reports_several_errors() {
        let src = "step f x --> { }\nchannel a int\nnode n implements f (a) --> () every 10ms\nstep g --> y";
        let errs = parse_program(src).unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn error_count_is_capped() {
        let src = "channel ;\n".repeat(25);
        assert_eq!(parse_program(&src).unwrap_err().len(), 10);
    }

    #[test]
    fn errors_carry_expected_and_found() {
        let err = parse_expression("if x then 1").unwrap_err();
        assert_eq!(err.expected, vec!["`else`".to_string()]);
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn literal_values() {
        assert_eq!(parse_value("-2").unwrap(), Value::int(-2));
        assert_eq!(
            parse_value("(1, Some false)").unwrap(),
            Value::Tuple(vec![Value::int(1), Value::some(Value::boolean(false))])
        );
        assert_eq!(parse_value("None").unwrap(), Value::None);
        assert!(parse_value("x").is_err());
    }

    #[test]
    fn multi_element_channel_initializer() {
        let p = parse_program("channel a : int = { 1, 2 }").unwrap();
        assert_eq!(p.channels[0].init, vec![Expr::int(1), Expr::int(2)]);
    }

    #[test]
    fn optional_ports_on_both_sides() {
        let p = parse_program("node n implements f (a?, b) --> (c?) every 5ms").unwrap();
        let n = &p.nodes[0];
        assert!(n.inputs[0].optional && !n.inputs[1].optional && n.outputs[0].optional);
        assert_eq!(n.period, 5_000);
    }
}
