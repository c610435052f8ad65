use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::LangError;

const KEYWORDS: &[&str] = &[
    "ctmc",
    "const",
    "double",
    "module",
    "endmodule",
    "init",
    "formula",
    "rewards",
    "endrewards",
    "true",
    "false",
];

/// Parses a model source into a [`ModelSpec`].
///
/// `formula` definitions are inlined and every identifier is checked to
/// resolve to a constant or a module variable.
pub fn parse(text: &str) -> Result<ModelSpec, LangError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let raw = p.model()?;
    finish(raw)
}

/// Parses a standalone expression, e.g. a state predicate used as a metric.
pub fn parse_expression(text: &str) -> Result<Expr, LangError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    p.expect(&Tok::Eof, "end of expression")?;
    Ok(e)
}

struct RawModel {
    saw_ctmc: bool,
    constants: Vec<Constant>,
    formulas: Vec<(String, Expr, Token)>,
    modules: Vec<ModuleSpec>,
    rewards: Vec<RewardStructure>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, LangError> {
        let t = self.here();
        Err(LangError::syntax(t.line, t.col, msg))
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Token, LangError> {
        if self.peek() == tok {
            Ok(self.bump())
        } else {
            self.error(alloc::format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), LangError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(alloc::format!("expected '{kw}', found {}", describe(self.peek())))
        }
    }

    fn name(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(alloc::format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn integer(&mut self) -> Result<i64, LangError> {
        let neg = if self.peek() == &Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match *self.peek() {
            Tok::Num(v) if libm::trunc(v) == v && libm::fabs(v) < 1e15 => {
                self.bump();
                let v = v as i64;
                Ok(if neg { -v } else { v })
            }
            ref other => {
                let d = describe(other);
                self.error(alloc::format!("expected integer, found {d}"))
            }
        }
    }

    fn model(&mut self) -> Result<RawModel, LangError> {
        let mut m = RawModel {
            saw_ctmc: false,
            constants: Vec::new(),
            formulas: Vec::new(),
            modules: Vec::new(),
            rewards: Vec::new(),
        };
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "ctmc" => {
                        if m.saw_ctmc {
                            return self.error("duplicate model type declaration");
                        }
                        self.bump();
                        m.saw_ctmc = true;
                    }
                    "const" => m.constants.push(self.constant()?),
                    "formula" => {
                        let at = self.here().clone();
                        self.bump();
                        let name = self.name()?;
                        self.expect(&Tok::Eq, "'='")?;
                        let e = self.expr()?;
                        self.expect(&Tok::Semi, "';'")?;
                        m.formulas.push((name, e, at));
                    }
                    "module" => m.modules.push(self.module()?),
                    "rewards" => m.rewards.push(self.rewards()?),
                    other => {
                        return self.error(alloc::format!("unexpected '{other}' at top level"));
                    }
                },
                other => {
                    return self.error(alloc::format!("unexpected {} at top level", describe(&other)));
                }
            }
        }
        if !m.saw_ctmc {
            let t = &self.tokens[0];
            return Err(LangError::syntax(t.line, t.col, "missing 'ctmc' model type"));
        }
        Ok(m)
    }

    fn constant(&mut self) -> Result<Constant, LangError> {
        self.expect_keyword("const")?;
        self.expect_keyword("double")?;
        let name = self.name()?;
        let value = if self.peek() == &Tok::Eq {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(&Tok::Semi, "';'")?;
        Ok(Constant { name, value })
    }

    fn module(&mut self) -> Result<ModuleSpec, LangError> {
        self.expect_keyword("module")?;
        let name = self.name()?;
        let mut variables = Vec::new();
        let mut commands = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(s) if s == "endmodule" => {
                    self.bump();
                    break;
                }
                Tok::LBracket => commands.push(self.command()?),
                Tok::Ident(_) if self.peek_at(1) == &Tok::Colon => variables.push(self.variable()?),
                Tok::Eof => return self.error("missing 'endmodule'"),
                other => {
                    let d = describe(other);
                    return self.error(alloc::format!("expected variable or command, found {d}"));
                }
            }
        }
        Ok(ModuleSpec {
            name,
            variables,
            commands,
        })
    }

    fn variable(&mut self) -> Result<Variable, LangError> {
        let name = self.name()?;
        self.expect(&Tok::Colon, "':'")?;
        self.expect(&Tok::LBracket, "'['")?;
        let low = self.integer()?;
        self.expect(&Tok::DotDot, "'..'")?;
        let high = self.integer()?;
        self.expect(&Tok::RBracket, "']'")?;
        if high < low {
            return self.error(alloc::format!("empty range [{low}..{high}] for '{name}'"));
        }
        let init = if self.is_keyword("init") {
            self.bump();
            self.integer()?
        } else {
            low
        };
        self.expect(&Tok::Semi, "';'")?;
        if init < low || init > high {
            return Err(LangError::InitOutOfRange {
                variable: name,
                init,
                low,
                high,
            });
        }
        Ok(Variable { name, low, high, init })
    }

    fn command(&mut self) -> Result<Command, LangError> {
        self.expect(&Tok::LBracket, "'['")?;
        let label = if self.peek() == &Tok::RBracket {
            None
        } else {
            Some(self.name()?)
        };
        self.expect(&Tok::RBracket, "']'")?;
        let guard = self.expr()?;
        self.expect(&Tok::Arrow, "'->'")?;
        let mut branches = alloc::vec![self.branch()?];
        while self.peek() == &Tok::Plus {
            self.bump();
            branches.push(self.branch()?);
        }
        self.expect(&Tok::Semi, "';'")?;
        Ok(Command { label, guard, branches })
    }

    fn starts_update(&self) -> bool {
        self.peek() == &Tok::LParen && matches!(self.peek_at(1), Tok::Ident(_)) && self.peek_at(2) == &Tok::Prime
    }

    fn branch(&mut self) -> Result<Branch, LangError> {
        let rate = if self.starts_update() {
            None
        } else {
            let r = self.expr()?;
            self.expect(&Tok::Colon, "':' after rate")?;
            Some(r)
        };
        let mut updates = alloc::vec![self.update()?];
        while self.peek() == &Tok::Amp {
            self.bump();
            updates.push(self.update()?);
        }
        Ok(Branch { rate, updates })
    }

    fn update(&mut self) -> Result<Update, LangError> {
        self.expect(&Tok::LParen, "'('")?;
        let variable = self.name()?;
        self.expect(&Tok::Prime, "'''")?;
        self.expect(&Tok::Eq, "'='")?;
        let value = self.expr()?;
        self.expect(&Tok::RParen, "')'")?;
        Ok(Update { variable, value })
    }

    fn rewards(&mut self) -> Result<RewardStructure, LangError> {
        self.expect_keyword("rewards")?;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            other => {
                return self.error(alloc::format!(
                    "expected reward name string, found {}",
                    describe(&other)
                ))
            }
        };
        let mut items = Vec::new();
        loop {
            if self.is_keyword("endrewards") {
                self.bump();
                break;
            }
            if self.peek() == &Tok::Eof {
                return self.error("missing 'endrewards'");
            }
            let guard = self.expr()?;
            self.expect(&Tok::Colon, "':'")?;
            let value = self.expr()?;
            self.expect(&Tok::Semi, "';'")?;
            items.push(RewardItem { guard, value });
        }
        Ok(RewardStructure { name, items })
    }

    // expression grammar, loosest binding first

    fn expr(&mut self) -> Result<Expr, LangError> {
        let c = self.or()?;
        if self.peek() == &Tok::Question {
            self.bump();
            let a = self.expr()?;
            self.expect(&Tok::Colon, "':' in conditional")?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn or(&mut self) -> Result<Expr, LangError> {
        let mut e = self.and()?;
        while self.peek() == &Tok::Bar {
            self.bump();
            e = Expr::binary(BinaryOp::Or, e, self.and()?);
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr, LangError> {
        let mut e = self.not()?;
        while self.peek() == &Tok::Amp {
            self.bump();
            e = Expr::binary(BinaryOp::And, e, self.not()?);
        }
        Ok(e)
    }

    fn not(&mut self) -> Result<Expr, LangError> {
        if self.peek() == &Tok::Bang {
            self.bump();
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.not()?)));
        }
        self.relational()
    }

    fn relational(&mut self) -> Result<Expr, LangError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, LangError> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(e),
            };
            // inside a command, '+' followed by an update starts the next branch
            if op == BinaryOp::Add && self.peek_at(1) == &Tok::LParen && self.update_follows(2) {
                return Ok(e);
            }
            self.bump();
            e = Expr::binary(op, e, self.multiplicative()?);
        }
    }

    fn update_follows(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Ident(_)) && self.peek_at(k + 1) == &Tok::Prime
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::binary(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.peek() == &Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(_) => Ok(Expr::Ident(self.name()?)),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            other => self.error(alloc::format!("expected expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => alloc::format!("'{s}'"),
        Tok::Num(v) => alloc::format!("number {v}"),
        Tok::Str(s) => alloc::format!("string \"{s}\""),
        Tok::Eof => "end of input".to_string(),
        other => alloc::format!("{other:?}"),
    }
}

/// Inlines formulas and checks name uniqueness and identifier resolution.
fn finish(raw: RawModel) -> Result<ModelSpec, LangError> {
    let mut names: BTreeSet<String> = BTreeSet::new();
    for c in &raw.constants {
        if !names.insert(c.name.clone()) {
            return Err(LangError::Duplicate(alloc::format!("constant '{}'", c.name)));
        }
    }
    let mut module_names = BTreeSet::new();
    for m in &raw.modules {
        if !module_names.insert(m.name.clone()) {
            return Err(LangError::Duplicate(alloc::format!("module '{}'", m.name)));
        }
        for v in &m.variables {
            if !names.insert(v.name.clone()) {
                return Err(LangError::DuplicateVariable(v.name.clone()));
            }
        }
    }
    let mut formulas: BTreeMap<String, Expr> = BTreeMap::new();
    for (name, e, _) in &raw.formulas {
        if names.contains(name) || formulas.insert(name.clone(), e.clone()).is_some() {
            return Err(LangError::Duplicate(alloc::format!("formula '{name}'")));
        }
    }
    let mut reward_names = BTreeSet::new();
    for r in &raw.rewards {
        if !reward_names.insert(r.name.clone()) {
            return Err(LangError::Duplicate(alloc::format!("reward structure \"{}\"", r.name)));
        }
    }

    let inliner = Inliner { formulas: &formulas };
    let constant_names: BTreeSet<&str> = raw.constants.iter().map(|c| c.name.as_str()).collect();
    let all_names: BTreeSet<&str> = names.iter().map(String::as_str).collect();

    let mut constants = Vec::with_capacity(raw.constants.len());
    for c in &raw.constants {
        let value = match &c.value {
            Some(e) => {
                let e = inliner.inline(e, &mut Vec::new())?;
                check_idents(&e, &constant_names, "constant definition")?;
                Some(e)
            }
            None => None,
        };
        constants.push(Constant {
            name: c.name.clone(),
            value,
        });
    }

    let mut modules = Vec::with_capacity(raw.modules.len());
    for m in &raw.modules {
        let own: BTreeSet<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
        let mut commands = Vec::with_capacity(m.commands.len());
        for cmd in &m.commands {
            let guard = inliner.inline(&cmd.guard, &mut Vec::new())?;
            check_idents(&guard, &all_names, "guard")?;
            let mut branches = Vec::with_capacity(cmd.branches.len());
            for b in &cmd.branches {
                let rate = match &b.rate {
                    Some(r) => {
                        let r = inliner.inline(r, &mut Vec::new())?;
                        check_idents(&r, &all_names, "rate")?;
                        Some(r)
                    }
                    None => None,
                };
                let mut updates = Vec::with_capacity(b.updates.len());
                for u in &b.updates {
                    if !own.contains(u.variable.as_str()) {
                        return Err(LangError::UndeclaredIdentifier {
                            name: u.variable.clone(),
                            context: alloc::format!("update target in module '{}'", m.name),
                        });
                    }
                    let value = inliner.inline(&u.value, &mut Vec::new())?;
                    check_idents(&value, &all_names, "update")?;
                    updates.push(Update {
                        variable: u.variable.clone(),
                        value,
                    });
                }
                branches.push(Branch { rate, updates });
            }
            commands.push(Command {
                label: cmd.label.clone(),
                guard,
                branches,
            });
        }
        modules.push(ModuleSpec {
            name: m.name.clone(),
            variables: m.variables.clone(),
            commands,
        });
    }

    let mut rewards = Vec::with_capacity(raw.rewards.len());
    for r in &raw.rewards {
        let mut items = Vec::with_capacity(r.items.len());
        for it in &r.items {
            let guard = inliner.inline(&it.guard, &mut Vec::new())?;
            check_idents(&guard, &all_names, "reward guard")?;
            let value = inliner.inline(&it.value, &mut Vec::new())?;
            check_idents(&value, &all_names, "reward value")?;
            items.push(RewardItem { guard, value });
        }
        rewards.push(RewardStructure {
            name: r.name.clone(),
            items,
        });
    }

    Ok(ModelSpec {
        constants,
        modules,
        rewards,
    })
}

struct Inliner<'a> {
    formulas: &'a BTreeMap<String, Expr>,
}

impl Inliner<'_> {
    fn inline(&self, e: &Expr, stack: &mut Vec<String>) -> Result<Expr, LangError> {
        Ok(match e {
            Expr::Ident(name) => match self.formulas.get(name) {
                Some(body) => {
                    if stack.contains(name) {
                        return Err(LangError::Cyclic(name.clone()));
                    }
                    stack.push(name.clone());
                    let out = self.inline(body, stack)?;
                    stack.pop();
                    out
                }
                None => e.clone(),
            },
            Expr::Num(_) | Expr::Bool(_) => e.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.inline(a, stack)?)),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(self.inline(a, stack)?), Box::new(self.inline(b, stack)?))
            }
            Expr::Cond(c, a, b) => Expr::Cond(
                Box::new(self.inline(c, stack)?),
                Box::new(self.inline(a, stack)?),
                Box::new(self.inline(b, stack)?),
            ),
        })
    }
}

fn check_idents(e: &Expr, known: &BTreeSet<&str>, context: &str) -> Result<(), LangError> {
    let mut missing = None;
    e.for_each_ident(&mut |name| {
        if missing.is_none() && !known.contains(name) {
            missing = Some(name.to_string());
        }
    });
    match missing {
        Some(name) => Err(LangError::UndeclaredIdentifier {
            name,
            context: context.to_string(),
        }),
        None => Ok(()),
    }
}
