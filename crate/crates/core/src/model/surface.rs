//! Boundary function `Λ` with `K_μ = ∂Λ/∂ẋ^μ` and the split of `L` into a
//! dynamic part and a total derivative.

use super::derive::{check_affine_symmetry, snap};
use super::{AffineModel, ModelError};
use crate::expr::rational::polynomial_coefficients;
use crate::expr::{equal_probabilistic, Expr, Func, Node, Number, Symbol, DEFAULT_TOL, DEFAULT_TRIALS};

#[derive(Clone, Debug)]
pub struct SurfaceSplit {
    pub lambda: Expr,
    /// `Λ = g(x) h(ẋ)` when the factors separate.
    pub separable: Option<(Expr, Expr)>,
    /// `L_d = V − (∂Λ/∂x^μ) ẋ^μ`.
    pub l_d: Expr,
    /// `L_s = dΛ/dτ`.
    pub l_s: Expr,
    /// `∂L_d/∂ẋ^μ`.
    pub p_bold: Vec<Expr>,
    /// `∂Λ/∂x^μ`.
    pub p_frak: Vec<Expr>,
}

pub fn surface_decompose(m: &AffineModel, seed: u64) -> Result<SurfaceSplit, ModelError> {
    if !check_affine_symmetry(m, seed)?.symmetric {
        return Err(ModelError::SymmetryViolated);
    }
    let n = m.dimension();
    let t = m.table();
    let mut sampler = m.sampler(seed);
    let mut lambda = Expr::zero();
    for mu in 0..n {
        let v = t.velocity(mu);
        let remainder = snap(&(&m.k()[mu] - lambda.diff(v)));
        if remainder.is_zero()
            || equal_probabilistic(&remainder, &Expr::zero(), &mut sampler, DEFAULT_TRIALS, DEFAULT_TOL)?
        {
            continue;
        }
        lambda = (lambda + antiderivative(&remainder, v)?).simplify();
    }
    for mu in 0..n {
        let v = t.velocity(mu);
        let residual = snap(&(&m.k()[mu] - lambda.diff(v)));
        if !residual.is_zero()
            && !equal_probabilistic(&residual, &Expr::zero(), &mut sampler, DEFAULT_TRIALS, DEFAULT_TOL)?
        {
            return Err(ModelError::AntiderivativeResidual {
                component: mu,
                variable: v.name().to_string(),
            });
        }
    }
    let p_frak: Vec<Expr> = (0..n).map(|mu| lambda.diff(t.coordinate(mu))).collect();
    let mut l_d_terms = vec![m.v().clone()];
    for (mu, pf) in p_frak.iter().enumerate() {
        l_d_terms.push(-(pf * Expr::sym(t.velocity(mu))));
    }
    let l_d = snap(&Expr::sum(l_d_terms));
    let p_bold = (0..n).map(|mu| snap(&l_d.diff(t.velocity(mu)))).collect();
    let l_s = lambda.total_derivative(2, t)?;
    Ok(SurfaceSplit {
        separable: separate(&lambda),
        lambda,
        l_d,
        l_s,
        p_bold,
        p_frak,
    })
}

fn separate(lambda: &Expr) -> Option<(Expr, Expr)> {
    let factors: Vec<Expr> = match lambda.node() {
        Node::Product(xs) => xs.clone(),
        Node::Sum(_) | Node::Const(_) => return None,
        _ => vec![lambda.clone()],
    };
    let mut g = Vec::new();
    let mut h = Vec::new();
    for f in factors {
        let syms = f.free_symbols();
        let has_x = syms.iter().any(|s| s.kind() == crate::expr::SymbolKind::Coordinate);
        let has_v = syms.iter().any(|s| s.kind() == crate::expr::SymbolKind::Velocity);
        match (has_x, has_v) {
            (true, true) => return None,
            (false, true) => h.push(f),
            (_, false) if syms.is_empty() => h.push(f),
            _ => g.push(f),
        }
    }
    if h.is_empty() {
        return None;
    }
    Some((Expr::product(g).simplify(), Expr::product(h).simplify()))
}

fn not_found(term: &Expr, v: &Symbol) -> ModelError {
    ModelError::AntiderivativeNotFound {
        term: term.to_string(),
        variable: v.name().to_string(),
    }
}

/// `Q = s v² + r` with no linear term.
fn quadratic(q: &Expr, v: &Symbol) -> Option<(Expr, Expr)> {
    let c = polynomial_coefficients(q, v)?;
    (c.len() == 3 && snap(&c[1]).is_zero()).then(|| (c[2].clone(), c[0].clone()))
}

/// Square root for expressions that are visibly perfect squares.
fn exact_sqrt(e: &Expr) -> Option<Expr> {
    match e.node() {
        Node::Const(n) if !n.is_negative() => n.exact_root(2).map(Expr::num),
        Node::Pow(b, k) => {
            let k = k.as_number()?.as_integer()?;
            (k % 2 == 0).then(|| b.powi(k / 2).simplify())
        }
        Node::Product(xs) => {
            let roots = xs.iter().map(exact_sqrt).collect::<Option<Vec<_>>>()?;
            Some(Expr::product(roots).simplify())
        }
        _ => None,
    }
}

/// Rule-table antiderivative in `v`.
fn antiderivative(e: &Expr, v: &Symbol) -> Result<Expr, ModelError> {
    let e = e.simplify();
    let vx = Expr::sym(v);
    if !e.depends_on(v) {
        return Ok((e * vx).simplify());
    }
    if let Node::Sum(terms) = e.node() {
        let parts = terms.iter().map(|t| antiderivative(t, v)).collect::<Result<Vec<_>, _>>()?;
        return Ok(Expr::sum(parts).simplify());
    }
    if let Some(coeffs) = polynomial_coefficients(&e, v) {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * vx.powi(k as i64 + 1) * Expr::ratio(1, k as i64 + 1))
            .collect();
        return Ok(Expr::sum(terms).simplify());
    }
    let factors: Vec<Expr> = match e.node() {
        Node::Product(xs) => xs.clone(),
        _ => vec![e.clone()],
    };
    let (dep, indep): (Vec<Expr>, Vec<Expr>) = factors.into_iter().partition(|f| f.depends_on(v));
    let coeff = Expr::product(indep);
    let primitive = match dep.as_slice() {
        [f] => primitive_single(f, v),
        [a, b] => primitive_v_times_power(a, b, v).or_else(|| primitive_v_times_power(b, a, v)),
        _ => None,
    }
    .ok_or_else(|| not_found(&e, v))?;
    Ok((coeff * primitive).simplify())
}

fn numeric_exponent(e: &Expr) -> Option<(Expr, Number)> {
    match e.node() {
        Node::Pow(b, k) => Some((b.clone(), k.as_number()?)),
        _ => Some((e.clone(), Number::ONE)),
    }
}

fn primitive_single(f: &Expr, v: &Symbol) -> Option<Expr> {
    let vx = Expr::sym(v);
    let (base, k) = numeric_exponent(f)?;
    if base == vx {
        if k == Number::MINUS_ONE {
            return Some(Expr::apply(Func::Ln, Expr::apply(Func::Abs, vx)));
        }
        let k1 = k.add(Number::ONE);
        return Some(vx.pow(Expr::num(k1)) * Expr::num(k1.recip()?));
    }
    if k != Number::MINUS_ONE {
        return None;
    }
    let (s, r) = quadratic(&base, v)?;
    let s = s.as_number()?;
    if s.is_zero() {
        return None;
    }
    if !s.is_negative() {
        // 1/(s v² − s w²) = (1/s)/(v² − w²)  ->  −atanh(w/v)/(s w)
        let w = exact_sqrt(&(-r * Expr::num(s.recip()?)).simplify())?;
        Some(-Expr::apply(Func::Atanh, &w / &vx) * (Expr::num(s) * w).recip())
    } else {
        // 1/(σ w² − σ v²) = (1/σ)/(w² − v²)  ->  atanh(v/w)/(σ w)
        let sigma = s.neg();
        let w = exact_sqrt(&(r * Expr::num(sigma.recip()?)).simplify())?;
        Some(Expr::apply(Func::Atanh, &vx / &w) * (Expr::num(sigma) * w).recip())
    }
}

/// `v · Q^k` with `Q = s v² + r`.
fn primitive_v_times_power(lin: &Expr, power: &Expr, v: &Symbol) -> Option<Expr> {
    if *lin != Expr::sym(v) {
        return None;
    }
    let (q, k) = numeric_exponent(power)?;
    let (s, _) = quadratic(&q, v)?;
    let two_s = Expr::int(2) * s;
    if k == Number::MINUS_ONE {
        return Some(Expr::apply(Func::Ln, Expr::apply(Func::Abs, q)) * two_s.recip());
    }
    let k1 = k.add(Number::ONE);
    Some(q.pow(Expr::num(k1)) * (two_s * Expr::num(k1)).recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Binding, SymbolTable};

    fn check(text: &str, var: &str) {
        let t = SymbolTable::new(&["t", "r"], &["alpha"]).unwrap();
        let e = parse(text, &t).unwrap();
        let v = t.lookup(var).unwrap();
        let a = antiderivative(&e, v).unwrap();
        let back = a.diff(v);
        let b = Binding::new()
            .with(t.parameter("alpha").unwrap(), 0.7)
            .with(t.coordinate(0), 0.3)
            .with(t.coordinate(1), 1.1)
            .with(t.velocity(0), 1.9)
            .with(t.velocity(1), 0.6);
        let (x, y) = (back.evaluate(&b).unwrap(), e.evaluate(&b).unwrap());
        assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()), "{text}: {a} -> {back}");
    }

    #[test]
    fn rule_table() {
        check("alpha*r", "tdot");
        check("3*tdot^2 + r*tdot - 1", "tdot");
        check("alpha*r^2*rdot/(tdot^2 - rdot^2)", "tdot");
        check("alpha*r^2*tdot/(tdot^2 - rdot^2)", "rdot");
        check("1/(4*rdot^2 - tdot^2)", "rdot");
        check("tdot*(tdot^2 + r^2)^(-3/2)", "tdot");
        check("tdot/(tdot^2 + 1)", "tdot");
        check("1/tdot", "tdot");
        check("tdot^(1/2)", "tdot");
    }

    #[test]
    fn unmatched_form_is_reported() {
        let t = SymbolTable::new(&["t", "r"], &[]).unwrap();
        let e = parse("sin(tdot)", &t).unwrap();
        assert!(matches!(
            antiderivative(&e, t.velocity(0)),
            Err(ModelError::AntiderivativeNotFound { .. })
        ));
    }
}
