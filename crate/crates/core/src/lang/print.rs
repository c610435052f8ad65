use core::fmt::{self, Display, Formatter};

use super::ast::*;

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            // Debug keeps a decimal point and round-trips exactly
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(s) => f.write_str(s),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "-({e})"),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "(!{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Cond(c, a, b) => write!(f, "({c} ? {a} : {b})"),
        }
    }
}

impl Display for ModelSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "ctmc")?;
        writeln!(f)?;
        for c in &self.constants {
            match &c.value {
                Some(e) => writeln!(f, "const double {} = {e};", c.name)?,
                None => writeln!(f, "const double {};", c.name)?,
            }
        }
        for m in &self.modules {
            writeln!(f)?;
            writeln!(f, "module {}", m.name)?;
            for v in &m.variables {
                writeln!(f, "    {} : [{}..{}] init {};", v.name, v.low, v.high, v.init)?;
            }
            for c in &m.commands {
                write!(f, "    [{}] {} -> ", c.label.as_deref().unwrap_or(""), c.guard)?;
                for (k, b) in c.branches.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    if let Some(r) = &b.rate {
                        write!(f, "{r} : ")?;
                    }
                    for (u, upd) in b.updates.iter().enumerate() {
                        if u > 0 {
                            f.write_str(" & ")?;
                        }
                        write!(f, "({}'={})", upd.variable, upd.value)?;
                    }
                }
                writeln!(f, ";")?;
            }
            writeln!(f, "endmodule")?;
        }
        for r in &self.rewards {
            writeln!(f)?;
            writeln!(f, "rewards \"{}\"", r.name)?;
            for it in &r.items {
                writeln!(f, "    {} : {};", it.guard, it.value)?;
            }
            writeln!(f, "endrewards")?;
        }
        Ok(())
    }
}
