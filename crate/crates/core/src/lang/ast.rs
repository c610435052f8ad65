use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
        }
    }
}

/// Expression tree shared by guards, rates, updates, constants and rewards.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// `cond ? then : otherwise`
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Calls `f` on every identifier in the tree.
    pub fn for_each_ident<F: FnMut(&str)>(&self, f: &mut F) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Ident(name) => f(name),
            Expr::Unary(_, e) => e.for_each_ident(f),
            Expr::Binary(_, a, b) => {
                a.for_each_ident(f);
                b.for_each_ident(f);
            }
            Expr::Cond(c, a, b) => {
                c.for_each_ident(f);
                a.for_each_ident(f);
                b.for_each_ident(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub name: String,
    /// `None` for an externally bound parameter.
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub low: i64,
    pub high: i64,
    pub init: i64,
}

impl Variable {
    pub fn range_size(&self) -> usize {
        (self.high - self.low + 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub variable: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// `None` when the rate is omitted, which counts as 1.
    pub rate: Option<Expr>,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub label: Option<String>,
    pub guard: Expr,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSpec {
    pub name: String,
    pub variables: Vec<Variable>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    pub items: Vec<RewardItem>,
}

/// A parsed continuous-time stochastic-module system with `formula`
/// definitions already inlined.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub constants: Vec<Constant>,
    pub modules: Vec<ModuleSpec>,
    pub rewards: Vec<RewardStructure>,
}

impl ModelSpec {
    pub fn constant(&self, name: &str) -> Option<&Constant> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn module(&self, name: &str) -> Option<&ModuleSpec> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Names of constants without a definition, in declaration order.
    pub fn unbound_constants(&self) -> impl Iterator<Item = &str> {
        self.constants
            .iter()
            .filter(|c| c.value.is_none())
            .map(|c| c.name.as_str())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.modules.iter().flat_map(|m| m.variables.iter())
    }

    pub fn reward_structure(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }
}
