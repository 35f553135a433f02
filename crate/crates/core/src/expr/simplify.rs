//! Rule-based normal form: flattened sums and products, folded constants,
//! like terms and like powers collected, integer powers pushed through
//! products. Each `make_*` builder assumes simplified children and returns a
//! simplified node, which is what makes [`Expr::simplify`] idempotent.

use std::collections::BTreeMap;

use super::eval::apply_func;
use super::{Expr, Func, Node, Number};

impl Expr {
    pub fn simplify(&self) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Sym(_) => self.clone(),
            Node::Sum(xs) => make_sum(xs.iter().map(Expr::simplify).collect()),
            Node::Product(xs) => make_product(xs.iter().map(Expr::simplify).collect()),
            Node::Pow(b, e) => make_pow(b.simplify(), e.simplify()),
            Node::Apply(f, a) => make_apply(*f, a.simplify()),
        }
    }
}

impl Expr {
    /// Distribute products over sums and expand small positive integer
    /// powers of sums. Negative powers keep their (expanded) base.
    pub fn expand(&self) -> Expr {
        expand_simplified(&self.simplify())
    }
}

const EXPAND_POWER_LIMIT: i64 = 6;

fn sum_terms(e: &Expr) -> Vec<Expr> {
    match e.node() {
        Node::Sum(xs) => xs.clone(),
        _ => vec![e.clone()],
    }
}

fn multiply_out(a: &Expr, b: &Expr) -> Expr {
    let (ta, tb) = (sum_terms(a), sum_terms(b));
    let mut terms = Vec::with_capacity(ta.len() * tb.len());
    for x in &ta {
        for y in &tb {
            terms.push(make_product(vec![x.clone(), y.clone()]));
        }
    }
    make_sum(terms)
}

fn expand_simplified(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(_) | Node::Sym(_) => e.clone(),
        Node::Sum(xs) => make_sum(xs.iter().map(expand_simplified).collect()),
        Node::Product(xs) => xs
            .iter()
            .map(expand_simplified)
            .fold(Expr::one(), |acc, f| multiply_out(&acc, &f)),
        Node::Pow(b, x) => {
            let base = expand_simplified(b);
            match x.as_number().and_then(|n| n.as_integer()) {
                Some(k) if (2..=EXPAND_POWER_LIMIT).contains(&k) && matches!(base.node(), Node::Sum(_)) => {
                    (1..k).fold(base.clone(), |acc, _| multiply_out(&acc, &base))
                }
                _ => make_pow(base, x.clone()),
            }
        }
        Node::Apply(f, a) => make_apply(*f, expand_simplified(a)),
    }
}

/// Numeric coefficient and the remaining factor of a simplified term.
pub(crate) fn split_coefficient(term: &Expr) -> (Number, Expr) {
    if let Node::Product(xs) = term.node() {
        if let Some(c) = xs[0].as_number() {
            let rest = if xs.len() == 2 {
                xs[1].clone()
            } else {
                Expr::new(Node::Product(xs[1..].to_vec()))
            };
            return (c, rest);
        }
    }
    (Number::ONE, term.clone())
}

fn with_coefficient(c: Number, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    match rest.node() {
        Node::Product(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::num(c));
            v.extend(fs.iter().cloned());
            Expr::new(Node::Product(v))
        }
        _ => Expr::new(Node::Product(vec![Expr::num(c), rest])),
    }
}

pub(crate) fn make_sum(terms: Vec<Expr>) -> Expr {
    let mut constant = Number::ZERO;
    let mut groups: BTreeMap<Expr, Number> = BTreeMap::new();
    let mut stack = terms;
    while let Some(t) = stack.pop() {
        match t.node() {
            Node::Sum(xs) => stack.extend(xs.iter().cloned()),
            Node::Const(n) => constant = constant.add(*n),
            _ => {
                let (c, rest) = split_coefficient(&t);
                let slot = groups.entry(rest).or_insert(Number::ZERO);
                *slot = slot.add(c);
            }
        }
    }
    let mut out: Vec<Expr> = Vec::with_capacity(groups.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::num(constant));
    }
    for (rest, c) in groups {
        if !c.is_zero() {
            out.push(with_coefficient(c, rest));
        }
    }
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::new(Node::Sum(out)),
    }
}

pub(crate) fn make_product(factors: Vec<Expr>) -> Expr {
    let mut coeff = Number::ONE;
    let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        match f.node() {
            Node::Const(n) => coeff = coeff.mul(*n),
            Node::Product(xs) => stack.extend(xs.iter().cloned()),
            Node::Pow(b, e) => bases.entry(b.clone()).or_default().push(e.clone()),
            _ => bases.entry(f.clone()).or_default().push(Expr::one()),
        }
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    let mut out = Vec::with_capacity(bases.len());
    let mut needs_pass = false;
    for (base, mut exps) in bases {
        let exp = if exps.len() == 1 {
            exps.pop().unwrap()
        } else {
            make_sum(exps)
        };
        let p = make_pow(base, exp);
        match p.node() {
            Node::Const(n) => coeff = coeff.mul(*n),
            Node::Product(_) => {
                needs_pass = true;
                out.push(p);
            }
            _ => out.push(p),
        }
    }
    if needs_pass {
        out.push(Expr::num(coeff));
        return make_product(out);
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    out.sort();
    if !coeff.is_one() {
        if out.is_empty() {
            return Expr::num(coeff);
        }
        // A bare numeric multiple of a sum is distributed: c(a + b) -> ca + cb.
        if let [single] = out.as_slice() {
            if let Node::Sum(terms) = single.node() {
                let c = Expr::num(coeff);
                return make_sum(terms.iter().map(|t| make_product(vec![c.clone(), t.clone()])).collect());
            }
        }
        out.insert(0, Expr::num(coeff));
    }
    match out.len() {
        0 => Expr::one(),
        1 => out.pop().unwrap(),
        _ => Expr::new(Node::Product(out)),
    }
}

fn fold_number_power(b: Number, e: Number) -> Option<Number> {
    if let Some(k) = e.as_integer() {
        return b.powi(k);
    }
    match (b, e) {
        (Number::Rational(_), Number::Rational(r)) => {
            if b.is_negative() {
                return None;
            }
            let root = b.exact_root(u32::try_from(*r.denom()).ok()?)?;
            root.powi(*r.numer())
        }
        _ => {
            let (bv, ev) = (b.to_f64(), e.to_f64());
            if bv < 0.0 || (bv == 0.0 && ev < 0.0) {
                return None;
            }
            let v = bv.powf(ev);
            v.is_finite().then_some(Number::Real(v))
        }
    }
}

pub(crate) fn make_pow(b: Expr, e: Expr) -> Expr {
    let en = e.as_number();
    if let Some(n) = en {
        if n.is_zero() {
            return Expr::one();
        }
        if n.is_one() {
            return b;
        }
    }
    if b.is_one() {
        return Expr::one();
    }
    if let (Some(bn), Some(n)) = (b.as_number(), en) {
        if bn.is_zero() && !n.is_negative() {
            return Expr::zero();
        }
        if let Some(v) = fold_number_power(bn, n) {
            return Expr::num(v);
        }
        return Expr::new(Node::Pow(b, e));
    }
    let integer_exponent = en.is_some_and(|n| n.as_integer().is_some());
    match b.node() {
        Node::Pow(bb, be) if integer_exponent => {
            make_pow(bb.clone(), make_product(vec![be.clone(), e]))
        }
        Node::Product(fs) if integer_exponent => {
            make_product(fs.iter().map(|f| make_pow(f.clone(), e.clone())).collect())
        }
        _ => Expr::new(Node::Pow(b, e)),
    }
}

pub(crate) fn make_apply(f: Func, a: Expr) -> Expr {
    if f == Func::Sqrt {
        return make_pow(a, Expr::ratio(1, 2));
    }
    if let Some(n) = a.as_number() {
        let exact = match f {
            Func::Atanh | Func::Tanh | Func::Sin if n.is_zero() => Some(Number::ZERO),
            Func::Cos | Func::Exp if n.is_zero() => Some(Number::ONE),
            Func::Ln if n.is_one() => Some(Number::ZERO),
            Func::Abs => Some(n.abs()),
            _ => None,
        };
        if let Some(v) = exact {
            return Expr::num(v);
        }
        if !n.is_exact() {
            if let Some(v) = apply_func(f, n.to_f64()).filter(|v| v.is_finite()) {
                return Expr::num(Number::Real(v));
            }
        }
        return Expr::apply(f, a);
    }
    if f == Func::Abs {
        if let Node::Apply(Func::Abs, _) = a.node() {
            return a;
        }
    }
    Expr::apply(f, a)
}
