//! Rational-function normal form used as a symbolic zero test.
//!
//! An expression is mapped to `num/den` with both sides multivariate
//! polynomials over opaque atoms (symbols, function applications and roots).
//! No GCDs are taken, so the form is not canonical, but a zero numerator is
//! a proof that the expression vanishes identically wherever it is defined.
//! A nonzero numerator proves nothing on its own: atoms are not independent
//! (`sqrt(x)^2 = x` is caught, `sin^2 + cos^2 = 1` is not).

use std::collections::{BTreeMap, HashMap};

use super::simplify::{make_pow, make_product, make_sum};
use super::{Expr, Node, Number, Symbol};

/// Real coefficients at or below this magnitude count as zero.
pub const REAL_ZERO: f64 = 1e-12;

/// Past this many monomials the conversion gives up.
const TERM_LIMIT: usize = 20_000;

type Monomial = Vec<(usize, u32)>;

#[derive(Clone, Debug, PartialEq)]
struct Poly(BTreeMap<Monomial, Number>);

impl Poly {
    fn constant(c: Number) -> Poly {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(Vec::new(), c);
        }
        Poly(m)
    }

    fn atom(id: usize) -> Poly {
        let mut m = BTreeMap::new();
        m.insert(vec![(id, 1)], Number::ONE);
        Poly(m)
    }

    fn is_zero(&self) -> bool {
        self.0.values().all(|c| c.to_f64().abs() <= REAL_ZERO && (!c.is_exact() || c.is_zero()))
    }

    fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0.get(&Vec::new()).is_some_and(|c| c.is_one())
    }

    fn add(&self, other: &Poly) -> Poly {
        let mut out = self.0.clone();
        for (m, c) in &other.0 {
            let slot = out.entry(m.clone()).or_insert(Number::ZERO);
            *slot = slot.add(*c);
        }
        out.retain(|_, c| !c.is_zero());
        Poly(out)
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.0.len().saturating_mul(other.0.len()) > TERM_LIMIT {
            return None;
        }
        let mut out: BTreeMap<Monomial, Number> = BTreeMap::new();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let m = merge(ma, mb);
                let slot = out.entry(m).or_insert(Number::ZERO);
                *slot = slot.add(ca.mul(*cb));
            }
        }
        out.retain(|_, c| !c.is_zero());
        Some(Poly(out))
    }

    fn pow(&self, k: u32) -> Option<Poly> {
        let mut acc = Poly::constant(Number::ONE);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Some(acc)
    }
}

fn merge(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

#[derive(Clone, Debug)]
struct Frac {
    num: Poly,
    den: Poly,
}

#[derive(Default)]
struct Atoms {
    list: Vec<Expr>,
    ids: HashMap<Expr, usize>,
}

impl Atoms {
    fn id(&mut self, e: &Expr) -> usize {
        if let Some(&i) = self.ids.get(e) {
            return i;
        }
        self.list.push(e.clone());
        self.ids.insert(e.clone(), self.list.len() - 1);
        self.list.len() - 1
    }
}

fn convert(e: &Expr, atoms: &mut Atoms) -> Option<Frac> {
    let one = || Poly::constant(Number::ONE);
    Some(match e.node() {
        Node::Const(c) => Frac {
            num: Poly::constant(*c),
            den: one(),
        },
        Node::Sym(_) | Node::Apply(..) => Frac {
            num: Poly::atom(atoms.id(e)),
            den: one(),
        },
        Node::Sum(xs) => {
            let mut acc = Frac {
                num: Poly::constant(Number::ZERO),
                den: one(),
            };
            for x in xs {
                let f = convert(x, atoms)?;
                acc = if f.den == acc.den {
                    Frac {
                        num: acc.num.add(&f.num),
                        den: acc.den,
                    }
                } else {
                    Frac {
                        num: acc.num.mul(&f.den)?.add(&f.num.mul(&acc.den)?),
                        den: acc.den.mul(&f.den)?,
                    }
                };
            }
            acc
        }
        Node::Product(xs) => {
            let mut acc = Frac { num: one(), den: one() };
            for x in xs {
                let f = convert(x, atoms)?;
                acc = Frac {
                    num: acc.num.mul(&f.num)?,
                    den: acc.den.mul(&f.den)?,
                };
            }
            acc
        }
        Node::Pow(b, x) => match x.as_number() {
            Some(Number::Rational(r)) => {
                let (p, q) = (*r.numer(), *r.denom());
                let base = if q == 1 {
                    convert(b, atoms)?
                } else {
                    let root = make_pow(b.clone(), Expr::ratio(1, q));
                    Frac {
                        num: Poly::atom(atoms.id(&root)),
                        den: one(),
                    }
                };
                let k = u32::try_from(p.unsigned_abs()).ok().filter(|k| *k <= 64)?;
                let (num, den) = (base.num.pow(k)?, base.den.pow(k)?);
                if p >= 0 {
                    Frac { num, den }
                } else {
                    Frac { num: den, den: num }
                }
            }
            _ => Frac {
                num: Poly::atom(atoms.id(e)),
                den: one(),
            },
        },
    })
}

/// True when `e` is provably identically zero. `false` means "not proven".
pub fn is_identically_zero(e: &Expr) -> bool {
    let e = e.simplify();
    if e.is_zero() {
        return true;
    }
    let mut atoms = Atoms::default();
    match convert(&e, &mut atoms) {
        Some(f) => f.num.is_zero(),
        None => false,
    }
}

fn poly_to_expr(p: &Poly, atoms: &Atoms) -> Expr {
    let terms = p
        .0
        .iter()
        .map(|(m, c)| {
            let mut factors = vec![Expr::num(*c)];
            for (id, k) in m {
                factors.push(make_pow(atoms.list[*id].clone(), Expr::int(i64::from(*k))));
            }
            make_product(factors)
        })
        .collect();
    make_sum(terms)
}

/// Coefficients `[c0, c1, ...]` of `e = Σ c_k v^k` when `e` is a polynomial
/// in `v` whose coefficients do not involve `v`; `None` otherwise.
pub fn polynomial_coefficients(e: &Expr, v: &Symbol) -> Option<Vec<Expr>> {
    let e = e.simplify();
    let mut atoms = Atoms::default();
    let f = convert(&e, &mut atoms)?;
    let v_expr = Expr::sym(v);
    let vid = atoms.ids.get(&v_expr).copied();
    for (i, a) in atoms.list.iter().enumerate() {
        if Some(i) != vid && a.depends_on(v) {
            return None;
        }
    }
    let den_has_v = |m: &Monomial| vid.is_some_and(|id| m.iter().any(|(a, _)| *a == id));
    if f.den.0.keys().any(den_has_v) {
        return None;
    }
    let mut by_degree: BTreeMap<u32, Poly> = BTreeMap::new();
    for (m, c) in &f.num.0 {
        let mut rest = Vec::with_capacity(m.len());
        let mut degree = 0;
        for &(a, k) in m {
            if Some(a) == vid {
                degree = k;
            } else {
                rest.push((a, k));
            }
        }
        let slot = by_degree.entry(degree).or_insert_with(|| Poly(BTreeMap::new()));
        slot.0.insert(rest, *c);
    }
    let top = by_degree.keys().next_back().copied().unwrap_or(0);
    let den = if f.den.is_one() {
        Expr::one()
    } else {
        make_pow(poly_to_expr(&f.den, &atoms), Expr::int(-1))
    };
    Some(
        (0..=top)
            .map(|k| match by_degree.get(&k) {
                Some(p) => make_product(vec![poly_to_expr(p, &atoms), den.clone()]),
                None => Expr::zero(),
            })
            .collect(),
    )
}
