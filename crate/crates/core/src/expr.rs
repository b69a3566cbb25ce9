//! Closed-form expressions for profiles and fields read from config files.
//!
//! Expressions use ordinary infix notation (`2 + cos(t)`, `sin(v)^2`) with
//! the usual elementary functions and the constants `pi` and `e`.

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables,
    DefaultNumericTypes, EvalexprError, Function, HashMapContext, Node, Value,
};

use crate::error::{Error, Result};

type Ctx = HashMapContext<DefaultNumericTypes>;

/// A parsed expression in a fixed list of variables.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    node: Node<DefaultNumericTypes>,
    base: Ctx,
}

fn unary(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |arg: &Value<DefaultNumericTypes>| Ok(Value::from_float(f(arg.as_number()?))))
}

type Unary = fn(f64) -> f64;

fn base_context() -> Ctx {
    let mut ctx = Ctx::new();
    let fns: [(&str, Unary); 14] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("sinh", f64::sinh),
        ("cosh", f64::cosh),
        ("tanh", f64::tanh),
        ("asin", f64::asin),
        ("acos", f64::acos),
        ("atan", f64::atan),
        ("log10", f64::log10),
    ];
    for (name, f) in fns {
        ctx.set_function(name.into(), unary(f))
            .expect("hash map context accepts functions");
    }
    ctx.set_value("pi".into(), Value::from_float(std::f64::consts::PI))
        .expect("hash map context accepts values");
    ctx.set_value("e".into(), Value::from_float(std::f64::consts::E))
        .expect("hash map context accepts values");
    ctx
}

fn wrap(e: EvalexprError<DefaultNumericTypes>) -> Error {
    Error::Expression(e.to_string())
}

impl Expr {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let node = build_operator_tree::<DefaultNumericTypes>(source).map_err(wrap)?;
        let expr = Self {
            source: source.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            node,
            base: base_context(),
        };
        // Surface unknown identifiers at parse time.
        expr.eval(&vec![0.5; vars.len()])?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        let mut ctx = self.base.clone();
        for (name, &x) in self.vars.iter().zip(values) {
            ctx.set_value(name.clone(), Value::from_float(x)).map_err(wrap)?;
        }
        self.node.eval_number_with_context(&ctx).map_err(wrap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_elementary_functions() {
        let e = Expr::parse("2 + cos(t) * sin(pi / 2)", &["t"]).unwrap();
        assert!((e.eval(&[0.3]).unwrap() - (2.0 + 0.3f64.cos())).abs() < 1e-15);
        let f = Expr::parse("sin(u) * v^2", &["u", "v"]).unwrap();
        assert!((f.eval(&[1.0, 3.0]).unwrap() - 9.0 * 1.0f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn rejects_unknown_identifiers() {
        assert!(Expr::parse("sin(w)", &["u", "v"]).is_err());
        assert!(Expr::parse("2 +", &["t"]).is_err());
    }
}
