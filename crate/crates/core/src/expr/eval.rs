use std::collections::HashMap;

use super::{Expr, ExprError, Func, Node, Number, Symbol};

/// Numeric values for the free symbols of an expression.
#[derive(Clone, Debug, Default)]
pub struct Binding {
    values: HashMap<Symbol, f64>,
}

impl Binding {
    pub fn new() -> Binding {
        Binding::default()
    }

    pub fn from_pairs(pairs: &[(Symbol, f64)]) -> Binding {
        let mut b = Binding::new();
        for (s, v) in pairs {
            b.set(s, *v);
        }
        b
    }

    pub fn set(&mut self, s: &Symbol, v: f64) {
        self.values.insert(s.clone(), v);
    }

    pub fn with(mut self, s: &Symbol, v: f64) -> Binding {
        self.set(s, v);
        self
    }

    pub fn get(&self, s: &Symbol) -> Option<f64> {
        self.values.get(s).copied()
    }

    pub fn extend(&mut self, other: &Binding) {
        for (s, v) in &other.values {
            self.values.insert(s.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, f64)> {
        self.values.iter().map(|(s, v)| (s, *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Expr {
    /// Numeric value at `b`. Fails on unbound symbols, arguments outside a
    /// function's domain, or any non-finite intermediate.
    pub fn evaluate(&self, b: &Binding) -> Result<f64, ExprError> {
        let v = match self.node() {
            Node::Const(n) => n.to_f64(),
            Node::Sym(s) => b.get(s).ok_or_else(|| ExprError::Unbound(s.name().to_string()))?,
            Node::Sum(xs) => {
                let mut acc = 0.0;
                for x in xs {
                    acc += x.evaluate(b)?;
                }
                acc
            }
            Node::Product(xs) => {
                let mut acc = 1.0;
                for x in xs {
                    acc *= x.evaluate(b)?;
                }
                acc
            }
            Node::Pow(base, exp) => {
                let bv = base.evaluate(b)?;
                match exp.as_number() {
                    Some(n) if n.as_integer().is_some() => {
                        let k = n.as_integer().unwrap();
                        if bv == 0.0 && k < 0 {
                            return Err(ExprError::Domain(format!("division by zero in {self}")));
                        }
                        if let Ok(k32) = i32::try_from(k) {
                            bv.powi(k32)
                        } else {
                            bv.powf(k as f64)
                        }
                    }
                    Some(Number::Rational(r)) if *r.denom() == 2 => {
                        if bv < 0.0 {
                            return Err(ExprError::Domain(format!(
                                "negative base {bv} under a square root in {self}"
                            )));
                        }
                        bv.sqrt().powi(*r.numer() as i32)
                    }
                    _ => {
                        let ev = exp.evaluate(b)?;
                        if bv < 0.0 && ev.fract() != 0.0 {
                            return Err(ExprError::Domain(format!(
                                "negative base {bv} with non-integer exponent {ev} in {self}"
                            )));
                        }
                        if bv == 0.0 && ev < 0.0 {
                            return Err(ExprError::Domain(format!("division by zero in {self}")));
                        }
                        bv.powf(ev)
                    }
                }
            }
            Node::Apply(f, arg) => {
                let a = arg.evaluate(b)?;
                apply_func(*f, a).ok_or_else(|| {
                    ExprError::Domain(format!("{}({a}) is undefined", f.name()))
                })?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite value while evaluating {self}")))
        }
    }
}

pub(crate) fn apply_func(f: Func, a: f64) -> Option<f64> {
    Some(match f {
        Func::Sqrt if a < 0.0 => return None,
        Func::Sqrt => a.sqrt(),
        Func::Atanh if a.abs() >= 1.0 => return None,
        Func::Atanh => a.atanh(),
        Func::Tanh => a.tanh(),
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Ln if a <= 0.0 => return None,
        Func::Ln => a.ln(),
        Func::Abs => a.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolTable};

    #[test]
    fn lapse_squared() {
        let t = SymbolTable::new(&["t", "r"], &[]).unwrap();
        let e = parse("tdot^2 - rdot^2", &t).unwrap();
        let b = Binding::new().with(t.velocity(0), 2.0).with(t.velocity(1), 1.0);
        assert_eq!(e.evaluate(&b).unwrap(), 3.0);
    }

    #[test]
    fn atanh_at_one_is_domain_error() {
        let t = SymbolTable::new(&["t", "r"], &["alpha"]).unwrap();
        let e = parse("-alpha*r^2*atanh(rdot/tdot)", &t).unwrap();
        let b = Binding::new()
            .with(t.parameter("alpha").unwrap(), 1.0)
            .with(t.coordinate(1), 1.0)
            .with(t.velocity(1), 1.0)
            .with(t.velocity(0), 1.0);
        assert!(matches!(e.evaluate(&b), Err(ExprError::Domain(_))));
    }

    #[test]
    fn bubble_potential_value() {
        let t = SymbolTable::new(&["t", "r"], &["alpha", "beta", "q"]).unwrap();
        let v = parse("-2*alpha*r*tdot - beta*q^2*tdot/r", &t).unwrap();
        let b = Binding::new()
            .with(t.parameter("alpha").unwrap(), 1.0)
            .with(t.parameter("beta").unwrap(), 1.0)
            .with(t.parameter("q").unwrap(), 1.0)
            .with(t.coordinate(1), 2.0)
            .with(t.velocity(0), 1.0);
        assert_eq!(v.evaluate(&b).unwrap(), -4.5);
    }

    #[test]
    fn unbound_and_domain() {
        let t = SymbolTable::new(&["x"], &[]).unwrap();
        let b = Binding::new().with(t.coordinate(0), -1.0);
        assert!(matches!(parse("xdot", &t).unwrap().evaluate(&b), Err(ExprError::Unbound(_))));
        assert!(parse("sqrt(x)", &t).unwrap().evaluate(&b).is_err());
        assert!(parse("ln(x)", &t).unwrap().evaluate(&b).is_err());
        assert!(parse("x^(1/2)", &t).unwrap().evaluate(&b).is_err());
        assert!(parse("1/(x+1)", &t).unwrap().evaluate(&b).is_err());
        assert_eq!(parse("x^(3/2)", &t).unwrap().evaluate(&b.clone().with(t.coordinate(0), 4.0)).unwrap(), 8.0);
    }
}
