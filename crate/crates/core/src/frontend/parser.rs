use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, SourceSpan};
use crate::ir::{ArithOp, Assignment, CmpOp, Command, Expr, Program, StochUpdate, VarDecl};
use crate::scalar::parse_decimal;

pub(crate) struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    cf_var: &'a str,
    declared: BTreeSet<String>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &str, cf_var: &'a str) -> PResult<Self> {
        Ok(Parser {
            tokens: tokenize(text)?,
            pos: 0,
            cf_var,
            declared: BTreeSet::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            message: message.into(),
            span: self.span(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.unexpected(&format!("`{sym}`"))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_reserved(&name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let negative = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => self.unexpected("integer literal"),
        }
    }

    pub(crate) fn program(&mut self) -> PResult<Program> {
        self.expect_keyword("dtmc")?;
        self.expect_keyword("module")?;
        let (module_name, module_span) = self.ident()?;

        let mut cf_domain = None;
        let mut decls = Vec::new();
        let mut commands = Vec::new();
        while !self.is_keyword("endmodule") {
            if self.is_sym("[") {
                let id = commands.len();
                commands.push(self.command(id)?);
            } else if matches!(self.peek(), Tok::Ident(_)) {
                let span = self.span();
                let decl = self.declaration()?;
                if decl.name == self.cf_var {
                    if cf_domain.is_some() {
                        return Err(ParseError::new("control-flow variable declared twice", span));
                    }
                    if decl.init != 0 {
                        return Err(ParseError::new(
                            format!("control-flow variable `{}` must start at location 0", decl.name),
                            span,
                        ));
                    }
                    cf_domain = Some((decl.lo, decl.hi));
                } else {
                    if self.declared.contains(&decl.name) {
                        return Err(ParseError::new(
                            format!("variable `{}` declared twice", decl.name),
                            span,
                        ));
                    }
                    self.declared.insert(decl.name.clone());
                    decls.push(decl);
                }
            } else {
                return self.unexpected("declaration, command, or `endmodule`");
            }
        }
        self.bump();

        let mut labels = BTreeMap::new();
        while self.is_keyword("label") {
            self.bump();
            let span = self.span();
            let name = match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    s
                }
                _ => return self.unexpected("quoted label name"),
            };
            self.expect_sym("=")?;
            let expr = self.expr()?;
            self.expect_sym(";")?;
            if labels.insert(name.clone(), expr).is_some() {
                return Err(ParseError::new(format!("label \"{name}\" defined twice"), span));
            }
        }
        if *self.peek() != Tok::Eof {
            return self.unexpected("`label` or end of input");
        }

        let cf_domain = cf_domain.ok_or_else(|| {
            ParseError::new(
                format!("control-flow variable `{}` is not declared", self.cf_var),
                module_span,
            )
        })?;
        let program = Program {
            module_name,
            cf_var: self.cf_var.to_owned(),
            cf_domain,
            decls,
            commands,
            labels,
        };
        let diags = program.well_formed();
        if !diags.is_empty() {
            return Err(ParseError::new(diags.join("; "), module_span));
        }
        Ok(program)
    }

    fn declaration(&mut self) -> PResult<VarDecl> {
        let (name, _) = self.ident()?;
        self.expect_sym(":")?;
        self.expect_sym("[")?;
        let lo = self.signed_int()?;
        self.expect_sym("..")?;
        let hi = self.signed_int()?;
        self.expect_sym("]")?;
        let init = if self.is_keyword("init") {
            self.bump();
            self.signed_int()?
        } else {
            lo
        };
        self.expect_sym(";")?;
        Ok(VarDecl { name, lo, hi, init })
    }

    fn command(&mut self, id: usize) -> PResult<Command> {
        let start = self.span();
        self.expect_sym("[")?;
        if !self.is_sym("]") {
            return self.error("synchronizing action labels are not supported; use `[]`");
        }
        self.bump();
        let guard = self.expr()?;
        let (location, guard) = self.split_location(guard, start)?;
        self.expect_sym("->")?;
        let mut updates = vec![self.update()?];
        while self.eat_sym("+") {
            updates.push(self.update()?);
        }
        self.expect_sym(";")?;
        Ok(Command {
            id,
            location,
            guard,
            updates,
        })
    }

    /// Removes the `cf = <int>` conjunct from the left spine of the guard.
    fn split_location(&self, guard: Expr, start: SourceSpan) -> PResult<(i64, Expr)> {
        let mut spine = Vec::new();
        let mut cur = guard;
        loop {
            match cur {
                Expr::And(l, r) => {
                    spine.push(*r);
                    cur = *l;
                }
                other => {
                    spine.push(other);
                    break;
                }
            }
        }
        spine.reverse();
        let mut location = None;
        let mut rest = Vec::new();
        for conjunct in spine {
            match self.location_literal(&conjunct) {
                Some(l) if location.is_none() => location = Some(l),
                Some(_) => {
                    return Err(ParseError::new(
                        "guard fixes the control-flow location more than once",
                        start,
                    ))
                }
                None => rest.push(conjunct),
            }
        }
        let location = location.ok_or_else(|| {
            ParseError::new(
                format!(
                    "non-control-flow command: guard lacks a `{}=<int>` conjunct",
                    self.cf_var
                ),
                start,
            )
        })?;
        Ok((location, Expr::conjunction(rest)))
    }

    fn location_literal(&self, e: &Expr) -> Option<i64> {
        match e {
            Expr::Cmp(CmpOp::Eq, l, r) => match (l.as_ref(), r.as_ref()) {
                (Expr::Var(v), Expr::Int(n)) | (Expr::Int(n), Expr::Var(v)) if v == self.cf_var => Some(*n),
                _ => None,
            },
            _ => None,
        }
    }

    fn update(&mut self) -> PResult<StochUpdate> {
        let starts_assignments =
            self.is_sym("(") && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Sym("'"));
        let prob = if starts_assignments {
            Expr::Prob(BigRational::from_integer(BigInt::from(1)))
        } else {
            let p = self.probability()?;
            self.expect_sym(":")?;
            p
        };
        let span = self.span();
        let mut target = None;
        let mut assigns = Vec::new();
        loop {
            self.expect_sym("(")?;
            let (name, name_span) = match self.peek().clone() {
                Tok::Ident(n) => (n, self.bump().span),
                _ => return self.unexpected("assigned variable"),
            };
            self.expect_sym("'")?;
            self.expect_sym("=")?;
            if name == self.cf_var {
                let value_span = self.span();
                let value = self.expr()?;
                match value {
                    Expr::Int(l) if target.is_none() => target = Some(l),
                    Expr::Int(_) => return Err(ParseError::new("control-flow variable assigned twice", name_span)),
                    _ => {
                        return Err(ParseError::new(
                            format!("control-flow target must be an integer literal, found `{value}`"),
                            value_span,
                        ))
                    }
                }
            } else {
                if !self.declared.contains(&name) {
                    return Err(ParseError::new(format!("unknown variable `{name}`"), name_span));
                }
                let expr = self.expr()?;
                assigns.push(Assignment { target: name, expr });
            }
            self.expect_sym(")")?;
            if !self.eat_sym("&") {
                break;
            }
        }
        let target = target.ok_or_else(|| {
            ParseError::new(
                format!("update does not assign the control-flow variable `{}`", self.cf_var),
                span,
            )
        })?;
        Ok(StochUpdate { prob, target, assigns })
    }

    fn probability(&mut self) -> PResult<Expr> {
        if let Tok::Decimal(text) = self.peek().clone() {
            let span = self.bump().span;
            return parse_decimal(&text)
                .map(Expr::Prob)
                .ok_or_else(|| ParseError::new(format!("malformed decimal `{text}`"), span));
        }
        let num = self.additive()?;
        if self.eat_sym("/") {
            let span = self.span();
            let den = self.additive()?;
            if let (Expr::Int(n), Expr::Int(d)) = (&num, &den) {
                if *d == 0 {
                    return Err(ParseError::new("zero denominator in probability", span));
                }
                return Ok(Expr::Prob(BigRational::new(BigInt::from(*n), BigInt::from(*d))));
            }
            return Ok(Expr::ratio(num, den));
        }
        match num {
            Expr::Int(n) => Ok(Expr::Prob(BigRational::from_integer(BigInt::from(n)))),
            other => Ok(other),
        }
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.conjunction()?;
        while self.eat_sym("|") {
            lhs = Expr::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Expr> {
        let mut lhs = self.negation()?;
        while self.eat_sym("&") {
            lhs = Expr::and(lhs, self.negation()?);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") {
            Ok(Expr::not(self.negation()?))
        } else {
            self.comparison()
        }
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => ArithOp::Add,
                Tok::Sym("-") => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::arith(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.eat_sym("*") {
            lhs = Expr::arith(ArithOp::Mul, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Int(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) if name == "true" || name == "false" => {
                self.bump();
                Ok(Expr::Bool(name == "true"))
            }
            Tok::Ident(name) if !is_reserved(&name) => {
                self.bump();
                if name != self.cf_var && !self.declared.contains(&name) {
                    return Err(ParseError::new(format!("unknown variable `{name}`"), span));
                }
                Ok(Expr::Var(name))
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Tok::Decimal(_) => self.error("decimal literals are only allowed as probabilities"),
            _ => self.unexpected("expression"),
        }
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(
        word,
        "dtmc" | "module" | "endmodule" | "init" | "label" | "true" | "false"
    )
}
