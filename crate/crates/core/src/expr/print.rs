//! Infix rendering that the parser reads back.

use std::fmt;

use super::{Expr, Node, Number};

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn number_prec(n: &Number) -> u8 {
    if n.is_negative() {
        PREC_UNARY
    } else if n.as_integer().is_some() {
        PREC_ATOM
    } else {
        match n {
            Number::Rational(_) => PREC_PRODUCT,
            Number::Real(_) => PREC_ATOM,
        }
    }
}

/// Split a product into (numeric coefficient, numerator factors, denominator factors).
fn split_fraction(e: &Expr) -> (Number, Vec<Expr>, Vec<Expr>) {
    let factors: Vec<Expr> = match e.node() {
        Node::Product(xs) => xs.clone(),
        _ => vec![e.clone()],
    };
    let mut coeff = Number::ONE;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in factors {
        match f.node() {
            Node::Const(c) => coeff = coeff.mul(*c),
            Node::Pow(b, x) if is_reciprocal(b, x) => {
                let pos = x.as_number().unwrap().neg();
                if pos.is_one() {
                    den.push(b.clone());
                } else {
                    den.push(b.pow(Expr::num(pos)));
                }
            }
            _ => num.push(f),
        }
    }
    (coeff, num, den)
}

/// Negative numeric exponent on a symbolic base prints as a denominator.
/// Numeric bases keep the power so that `0^(-1)` reads back unchanged.
fn is_reciprocal(b: &Expr, x: &Expr) -> bool {
    b.as_number().is_none() && x.as_number().is_some_and(|n| n.is_negative())
}

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(n) => number_prec(n),
        Node::Sym(_) | Node::Apply(..) => PREC_ATOM,
        Node::Sum(_) => PREC_SUM,
        Node::Product(_) => {
            let (c, num, den) = split_fraction(e);
            if c.is_negative() {
                PREC_UNARY
            } else if num.len() == 1 && den.is_empty() && c.is_one() {
                prec(&num[0])
            } else {
                PREC_PRODUCT
            }
        }
        Node::Pow(b, x) if is_reciprocal(b, x) => PREC_PRODUCT,
        Node::Pow(..) => PREC_POWER,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_factors(f: &mut fmt::Formatter<'_>, xs: &[Expr]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str("*")?;
        }
        write_wrapped(f, x, PREC_POWER)?;
    }
    Ok(())
}

fn write_product(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    let (coeff, num, den) = split_fraction(e);
    let mut coeff = coeff;
    if coeff.is_negative() {
        f.write_str("-")?;
        coeff = coeff.neg();
    }
    // An exact fraction coefficient goes into the numerator and denominator.
    let (cn, cd) = match coeff {
        Number::Rational(r) => (Number::int(*r.numer()), Number::int(*r.denom())),
        Number::Real(_) => (coeff, Number::ONE),
    };
    let mut wrote = false;
    if !cn.is_one() || num.is_empty() {
        write!(f, "{cn}")?;
        wrote = true;
    }
    if !num.is_empty() {
        if wrote {
            f.write_str("*")?;
        }
        write_factors(f, &num)?;
    }
    let mut den_items: Vec<Expr> = Vec::new();
    if !cd.is_one() {
        den_items.push(Expr::num(cd));
    }
    den_items.extend(den);
    // Successive divisions, so a denominator never regroups as a product.
    for d in &den_items {
        f.write_str("/")?;
        write_wrapped(f, d, PREC_POWER)?;
    }
    Ok(())
}

/// True when the term prints with a leading minus sign.
fn is_negative_term(e: &Expr) -> bool {
    match e.node() {
        Node::Const(n) => n.is_negative(),
        Node::Product(xs) => xs
            .first()
            .and_then(Expr::as_number)
            .is_some_and(|n| n.is_negative()),
        _ => false,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(n) => write!(f, "{n}"),
            Node::Sym(s) => f.write_str(s.name()),
            Node::Sum(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i == 0 {
                        write_wrapped(f, x, PREC_UNARY.min(PREC_SUM + 1))?;
                        continue;
                    }
                    if is_negative_term(x) {
                        f.write_str(" - ")?;
                        let flipped = (-x).simplify();
                        write_wrapped(f, &flipped, PREC_PRODUCT)?;
                    } else {
                        f.write_str(" + ")?;
                        write_wrapped(f, x, PREC_PRODUCT)?;
                    }
                }
                Ok(())
            }
            Node::Product(_) => write_product(f, self),
            Node::Pow(b, x) => {
                if is_reciprocal(b, x) {
                    return write_product(f, self);
                }
                write_wrapped(f, b, PREC_ATOM)?;
                f.write_str("^")?;
                write_wrapped(f, x, PREC_ATOM)
            }
            Node::Apply(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
