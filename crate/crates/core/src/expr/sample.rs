use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse, Binding, Expr, ExprError, Symbol, SymbolTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuardOp {
    Greater,
    GreaterEq,
    Less,
    LessEq,
}

impl GuardOp {
    fn symbol(self) -> &'static str {
        match self {
            GuardOp::Greater => ">",
            GuardOp::GreaterEq => ">=",
            GuardOp::Less => "<",
            GuardOp::LessEq => "<=",
        }
    }
}

/// Admissibility condition `lhs op rhs`, stored as `lhs - rhs op 0`.
#[derive(Clone, Debug)]
pub struct Guard {
    text: String,
    expr: Expr,
    op: GuardOp,
}

impl Guard {
    pub fn parse(text: &str, table: &SymbolTable) -> Result<Guard, ExprError> {
        let (pos, op, width) = [(">=", GuardOp::GreaterEq), ("<=", GuardOp::LessEq), (">", GuardOp::Greater), ("<", GuardOp::Less)]
            .iter()
            .filter_map(|(s, op)| text.find(s).map(|p| (p, *op, s.len())))
            .min_by_key(|(p, _, w)| (*p, std::cmp::Reverse(*w)))
            .ok_or_else(|| ExprError::Syntax {
                column: 1,
                message: format!("guard '{text}' has no comparison operator"),
            })?;
        let shift = |err: ExprError, offset: usize| match err {
            ExprError::Syntax { column, message } => ExprError::Syntax {
                column: column + offset,
                message,
            },
            ExprError::UnknownSymbol { name, column } => ExprError::UnknownSymbol {
                name,
                column: column + offset,
            },
            other => other,
        };
        let lhs = parse(&text[..pos], table).map_err(|e| shift(e, 0))?;
        let rhs = parse(&text[pos + width..], table).map_err(|e| shift(e, pos + width))?;
        Ok(Guard {
            text: text.trim().to_string(),
            expr: (lhs - rhs).simplify(),
            op,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn op(&self) -> GuardOp {
        self.op
    }

    /// `lhs - rhs`.
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Whether the point is admissible. Symbols the binding lacks make the
    /// guard vacuous; domain errors make the point inadmissible.
    pub fn holds(&self, b: &Binding) -> bool {
        match self.expr.evaluate(b) {
            Ok(v) => match self.op {
                GuardOp::Greater => v > 0.0,
                GuardOp::GreaterEq => v >= 0.0,
                GuardOp::Less => v < 0.0,
                GuardOp::LessEq => v <= 0.0,
            },
            Err(ExprError::Unbound(_)) => true,
            Err(_) => false,
        }
    }

    pub fn substitute(&self, map: &HashMap<Symbol, Expr>) -> Guard {
        Guard {
            text: self.text.clone(),
            expr: self.expr.substitute(map),
            op: self.op,
        }
    }
}

impl std::fmt::Display for Guard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} 0", self.expr, self.op.symbol())
    }
}

pub const DEFAULT_BOX: (f64, f64) = (-2.0, 2.0);
pub const DEFAULT_TRIALS: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-9;
const ATTEMPTS_PER_POINT: usize = 2000;

/// Seeded rejection sampler over a box, filtered by guards.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
    default_box: (f64, f64),
    bounds: HashMap<Symbol, (f64, f64)>,
    guards: Vec<Guard>,
    fixed: Binding,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            default_box: DEFAULT_BOX,
            bounds: HashMap::new(),
            guards: Vec::new(),
            fixed: Binding::new(),
        }
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Sampler {
        self.default_box = (lo, hi);
        self
    }

    pub fn with_bounds(mut self, s: &Symbol, lo: f64, hi: f64) -> Sampler {
        self.bounds.insert(s.clone(), (lo, hi));
        self
    }

    pub fn with_guards(mut self, guards: Vec<Guard>) -> Sampler {
        self.guards = guards;
        self
    }

    /// Values held fixed at every point, typically the parameters.
    pub fn with_fixed(mut self, fixed: Binding) -> Sampler {
        self.fixed = fixed;
        self
    }

    pub fn fixed(&self) -> &Binding {
        &self.fixed
    }

    fn draw(&mut self, symbols: &[Symbol]) -> Binding {
        let mut b = self.fixed.clone();
        for s in symbols {
            if self.fixed.get(s).is_some() {
                continue;
            }
            let (lo, hi) = self.bounds.get(s).copied().unwrap_or(self.default_box);
            b.set(s, self.rng.gen_range(lo..=hi));
        }
        b
    }

    /// `n` admissible points over `symbols`.
    pub fn sample(&mut self, symbols: &[Symbol], n: usize) -> Result<Vec<Binding>, ExprError> {
        self.sample_where(symbols, n, |_| true)
    }

    /// Like [`Sampler::sample`] with an extra acceptance test, used to drop
    /// points where the quantities under study cannot be evaluated.
    pub fn sample_where(
        &mut self,
        symbols: &[Symbol],
        n: usize,
        mut accept: impl FnMut(&Binding) -> bool,
    ) -> Result<Vec<Binding>, ExprError> {
        let max_attempts = ATTEMPTS_PER_POINT * n.max(1);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            if attempts == max_attempts {
                return Err(ExprError::SamplerExhausted {
                    wanted: n,
                    accepted: out.len(),
                    attempts,
                });
            }
            attempts += 1;
            let b = self.draw(symbols);
            if self.guards.iter().all(|g| g.holds(&b)) && accept(&b) {
                out.push(b);
            }
        }
        Ok(out)
    }
}

/// Probabilistic equality: `|a - b| <= tol (1 + |a|)` at `trials` admissible
/// points where both sides evaluate.
pub fn equal_probabilistic(
    a: &Expr,
    b: &Expr,
    sampler: &mut Sampler,
    trials: usize,
    tol: f64,
) -> Result<bool, ExprError> {
    let mut symbols: Vec<Symbol> = a.free_symbols().union(&b.free_symbols()).cloned().collect();
    symbols.retain(|s| sampler.fixed().get(s).is_none());
    let points = sampler.sample_where(&symbols, trials, |p| a.evaluate(p).is_ok() && b.evaluate(p).is_ok())?;
    Ok(points.iter().all(|p| {
        let (va, vb) = (a.evaluate(p).unwrap(), b.evaluate(p).unwrap());
        (va - vb).abs() <= tol * (1.0 + va.abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SymbolTable {
        SymbolTable::new(&["t", "r"], &["alpha"]).unwrap()
    }

    #[test]
    fn guards_parse_and_filter() {
        let t = table();
        let g = Guard::parse("tdot^2 - rdot^2 > 0", &t).unwrap();
        assert_eq!(g.op(), GuardOp::Greater);
        let g2 = Guard::parse("r >= 1/2", &t).unwrap();
        assert_eq!(g2.op(), GuardOp::GreaterEq);
        let syms = [t.velocity(0).clone(), t.velocity(1).clone(), t.coordinate(1).clone()];
        let mut s = Sampler::new(7).with_guards(vec![g.clone(), g2.clone()]);
        for p in s.sample(&syms, 50).unwrap() {
            assert!(p.get(t.velocity(0)).unwrap().abs() > p.get(t.velocity(1)).unwrap().abs());
            assert!(p.get(t.coordinate(1)).unwrap() >= 0.5);
        }
        assert!(Guard::parse("r", &t).is_err());
        match Guard::parse("r > zz", &t) {
            Err(ExprError::UnknownSymbol { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn same_seed_same_points() {
        let t = table();
        let syms = [t.coordinate(0).clone()];
        let a = Sampler::new(3).sample(&syms, 5).unwrap();
        let b = Sampler::new(3).sample(&syms, 5).unwrap();
        let va: Vec<_> = a.iter().map(|p| p.get(t.coordinate(0))).collect();
        let vb: Vec<_> = b.iter().map(|p| p.get(t.coordinate(0))).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn exhaustion_is_reported() {
        let t = table();
        let g = Guard::parse("r > 10", &t).unwrap();
        let mut s = Sampler::new(0).with_guards(vec![g]);
        assert!(matches!(
            s.sample(&[t.coordinate(1).clone()], 2),
            Err(ExprError::SamplerExhausted { wanted: 2, accepted: 0, .. })
        ));
    }

    #[test]
    fn probabilistic_equality() {
        let t = table();
        let a = parse("(tdot + rdot)*(tdot - rdot)", &t).unwrap();
        let b = parse("tdot^2 - rdot^2", &t).unwrap();
        let c = parse("tdot^2 + rdot^2", &t).unwrap();
        let mut s = Sampler::new(0);
        assert!(equal_probabilistic(&a, &b, &mut s, DEFAULT_TRIALS, DEFAULT_TOL).unwrap());
        assert!(!equal_probabilistic(&a, &c, &mut s, DEFAULT_TRIALS, DEFAULT_TOL).unwrap());
    }
}
