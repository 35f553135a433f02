use super::simplify::{make_apply, make_pow, make_product, make_sum};
use super::{Expr, ExprError, Func, Node, Symbol, SymbolKind, SymbolTable, MAX_DERIVATIVE_ORDER};

impl Expr {
    /// Partial derivative with respect to `s`, simplified.
    pub fn diff(&self, s: &Symbol) -> Expr {
        if !self.depends_on(s) {
            return Expr::zero();
        }
        diff_simplified(&self.simplify(), s)
    }

    /// Total τ-derivative
    /// `∂/∂τ + Σ_μ Σ_k q^(k+1)_μ ∂/∂q^(k)_μ`.
    ///
    /// Fails with `CapExceeded` when the expression already depends on an
    /// order-`cap` symbol, since its derivative would not be representable.
    pub fn total_derivative(&self, cap: usize, table: &SymbolTable) -> Result<Expr, ExprError> {
        let cap = cap.min(MAX_DERIVATIVE_ORDER);
        let e = self.simplify();
        let mut terms = Vec::new();
        for s in e.free_symbols() {
            match s.kind() {
                SymbolKind::Parameter => {}
                SymbolKind::Time => terms.push(diff_simplified(&e, &s)),
                SymbolKind::Momentum | SymbolKind::HigherMomentum => {
                    return Err(ExprError::Domain(format!(
                        "total derivative of phase-space symbol '{}' is not defined",
                        s.name()
                    )))
                }
                kind => {
                    let order = kind.derivative_order().expect("configuration kind");
                    if order >= cap {
                        return Err(ExprError::CapExceeded { cap });
                    }
                    let mu = s.index().expect("indexed symbol");
                    let next = table.derivative(order + 1, mu).expect("order below cap");
                    terms.push(make_product(vec![diff_simplified(&e, &s), Expr::sym(next)]));
                }
            }
        }
        Ok(make_sum(terms))
    }
}

fn diff_simplified(e: &Expr, s: &Symbol) -> Expr {
    if !e.depends_on(s) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Sym(t) => {
            if t == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(xs) => make_sum(xs.iter().map(|x| diff_simplified(x, s)).collect()),
        Node::Product(xs) => {
            let mut terms = Vec::new();
            for (i, x) in xs.iter().enumerate() {
                let dx = diff_simplified(x, s);
                if dx.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = xs.clone();
                factors[i] = dx;
                terms.push(make_product(factors));
            }
            make_sum(terms)
        }
        Node::Pow(b, x) => {
            let db = diff_simplified(b, s);
            if !x.depends_on(s) {
                // x b^(x-1) b'
                let lowered = make_pow(b.clone(), make_sum(vec![x.clone(), Expr::int(-1)]));
                return make_product(vec![x.clone(), lowered, db]);
            }
            // b^x (x' ln b + x b'/b)
            let dx = diff_simplified(x, s);
            let log_term = make_product(vec![dx, make_apply(Func::Ln, b.clone())]);
            let base_term = make_product(vec![x.clone(), db, make_pow(b.clone(), Expr::int(-1))]);
            make_product(vec![e.clone(), make_sum(vec![log_term, base_term])])
        }
        Node::Apply(f, a) => {
            let da = diff_simplified(a, s);
            let outer = match f {
                Func::Sqrt => make_product(vec![
                    Expr::ratio(1, 2),
                    make_pow(a.clone(), Expr::ratio(-1, 2)),
                ]),
                Func::Atanh => make_pow(
                    make_sum(vec![
                        Expr::one(),
                        make_product(vec![Expr::int(-1), make_pow(a.clone(), Expr::int(2))]),
                    ]),
                    Expr::int(-1),
                ),
                Func::Tanh => make_sum(vec![
                    Expr::one(),
                    make_product(vec![Expr::int(-1), make_pow(e.clone(), Expr::int(2))]),
                ]),
                Func::Sin => make_apply(Func::Cos, a.clone()),
                Func::Cos => make_product(vec![Expr::int(-1), make_apply(Func::Sin, a.clone())]),
                Func::Exp => e.clone(),
                Func::Ln => make_pow(a.clone(), Expr::int(-1)),
                Func::Abs => make_product(vec![a.clone(), make_pow(e.clone(), Expr::int(-1))]),
            };
            make_product(vec![outer, da])
        }
    }
}
