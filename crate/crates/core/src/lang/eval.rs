//! Constant resolution and expression evaluation over a variable assignment.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{BinaryOp, Expr, ModelSpec, UnaryOp};
use super::LangError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn as_num(self) -> Result<f64, LangError> {
        match self {
            Value::Num(v) => Ok(v),
            Value::Bool(_) => Err(LangError::Type("expected a number, found a boolean".into())),
        }
    }

    pub fn as_bool(self) -> Result<bool, LangError> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(LangError::Type("expected a boolean, found a number".into())),
        }
    }
}

/// Resolves every constant of `spec` to a number.
///
/// `bindings` must cover exactly the unbound constants; binding a name that
/// is unknown or already defined is an error.
pub fn resolve_constants(
    spec: &ModelSpec,
    bindings: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, LangError> {
    for name in bindings.keys() {
        match spec.constant(name) {
            None => return Err(LangError::UnknownBinding(name.clone())),
            Some(c) if c.value.is_some() => {
                return Err(LangError::UnknownBinding(alloc::format!("{name} (already defined)")))
            }
            Some(_) => {}
        }
    }
    let mut done: BTreeMap<String, f64> = BTreeMap::new();
    let mut stack = Vec::new();
    for c in &spec.constants {
        resolve_one(spec, &c.name, bindings, &mut done, &mut stack)?;
    }
    Ok(done)
}

fn resolve_one(
    spec: &ModelSpec,
    name: &str,
    bindings: &BTreeMap<String, f64>,
    done: &mut BTreeMap<String, f64>,
    stack: &mut Vec<String>,
) -> Result<f64, LangError> {
    if let Some(v) = done.get(name) {
        return Ok(*v);
    }
    let c = spec.constant(name).ok_or_else(|| LangError::UndeclaredIdentifier {
        name: name.to_string(),
        context: "constant definition".into(),
    })?;
    let value = match &c.value {
        None => *bindings
            .get(name)
            .ok_or_else(|| LangError::UnboundParameter(name.to_string()))?,
        Some(e) => {
            if stack.iter().any(|s| s == name) {
                return Err(LangError::Cyclic(name.to_string()));
            }
            stack.push(name.to_string());
            let mut deps = Vec::new();
            e.for_each_ident(&mut |d| deps.push(d.to_string()));
            for d in deps {
                resolve_one(spec, &d, bindings, done, stack)?;
            }
            stack.pop();
            let compiled = compile(e, done, &BTreeMap::new())?;
            compiled.eval(&[])?.as_num()?
        }
    };
    done.insert(name.to_string(), value);
    Ok(value)
}

/// Expression with constants folded to literals and variables resolved to
/// positions in the global state vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Num(f64),
    Bool(bool),
    Var(usize),
    Unary(UnaryOp, Box<Compiled>),
    Binary(BinaryOp, Box<Compiled>, Box<Compiled>),
    Cond(Box<Compiled>, Box<Compiled>, Box<Compiled>),
}

pub fn compile(
    e: &Expr,
    constants: &BTreeMap<String, f64>,
    variables: &BTreeMap<String, usize>,
) -> Result<Compiled, LangError> {
    Ok(match e {
        Expr::Num(v) => Compiled::Num(*v),
        Expr::Bool(b) => Compiled::Bool(*b),
        Expr::Ident(name) => {
            if let Some(v) = constants.get(name) {
                Compiled::Num(*v)
            } else if let Some(i) = variables.get(name) {
                Compiled::Var(*i)
            } else {
                return Err(LangError::UndeclaredIdentifier {
                    name: name.clone(),
                    context: "expression".into(),
                });
            }
        }
        Expr::Unary(op, a) => Compiled::Unary(*op, Box::new(compile(a, constants, variables)?)),
        Expr::Binary(op, a, b) => Compiled::Binary(
            *op,
            Box::new(compile(a, constants, variables)?),
            Box::new(compile(b, constants, variables)?),
        ),
        Expr::Cond(c, a, b) => Compiled::Cond(
            Box::new(compile(c, constants, variables)?),
            Box::new(compile(a, constants, variables)?),
            Box::new(compile(b, constants, variables)?),
        ),
    })
}

impl Compiled {
    pub fn eval(&self, state: &[i64]) -> Result<Value, LangError> {
        Ok(match self {
            Compiled::Num(v) => Value::Num(*v),
            Compiled::Bool(b) => Value::Bool(*b),
            Compiled::Var(i) => Value::Num(state[*i] as f64),
            Compiled::Unary(UnaryOp::Neg, a) => Value::Num(-a.eval(state)?.as_num()?),
            Compiled::Unary(UnaryOp::Not, a) => Value::Bool(!a.eval(state)?.as_bool()?),
            Compiled::Binary(op, a, b) => {
                let x = a.eval(state)?;
                match op {
                    BinaryOp::And => {
                        return Ok(Value::Bool(x.as_bool()? && b.eval(state)?.as_bool()?));
                    }
                    BinaryOp::Or => {
                        return Ok(Value::Bool(x.as_bool()? || b.eval(state)?.as_bool()?));
                    }
                    _ => {}
                }
                let y = b.eval(state)?;
                match op {
                    BinaryOp::Eq => Value::Bool(equal(x, y)?),
                    BinaryOp::Ne => Value::Bool(!equal(x, y)?),
                    _ => {
                        let (x, y) = (x.as_num()?, y.as_num()?);
                        match op {
                            BinaryOp::Add => Value::Num(x + y),
                            BinaryOp::Sub => Value::Num(x - y),
                            BinaryOp::Mul => Value::Num(x * y),
                            BinaryOp::Div => Value::Num(x / y),
                            BinaryOp::Lt => Value::Bool(x < y),
                            BinaryOp::Le => Value::Bool(x <= y),
                            BinaryOp::Gt => Value::Bool(x > y),
                            BinaryOp::Ge => Value::Bool(x >= y),
                            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::And | BinaryOp::Or => unreachable!(),
                        }
                    }
                }
            }
            Compiled::Cond(c, a, b) => {
                if c.eval(state)?.as_bool()? {
                    a.eval(state)?
                } else {
                    b.eval(state)?
                }
            }
        })
    }
}

fn equal(x: Value, y: Value) -> Result<bool, LangError> {
    match (x, y) {
        (Value::Num(a), Value::Num(b)) => Ok(a == b),
        (Value::Bool(a), Value::Bool(b)) => Ok(a == b),
        _ => Err(LangError::Type("cannot compare a number with a boolean".into())),
    }
}
