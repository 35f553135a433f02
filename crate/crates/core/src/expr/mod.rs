//! Immutable symbolic expressions over coordinates, their τ-derivatives,
//! phase-space momenta and named parameters.
//!
//! Trees are shared through `Arc`, so cloning an [`Expr`] is cheap and
//! expressions can be handed to concurrent evaluators freely.

mod diff;
mod eval;
mod number;
mod parse;
mod print;
pub mod rational;
mod sample;
mod simplify;

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use eval::Binding;
pub use number::{Number, Rational};
pub use parse::parse;
pub use sample::{equal_probabilistic, Guard, GuardOp, Sampler, DEFAULT_BOX, DEFAULT_TOL, DEFAULT_TRIALS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown symbol '{name}' at column {column}")]
    UnknownSymbol { name: String, column: usize },
    #[error("no value bound for symbol '{0}'")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("total derivative would exceed order cap {cap}: expression already contains order-{cap} symbols")]
    CapExceeded { cap: usize },
    #[error("sampler exhausted: only {accepted} of {wanted} admissible points after {attempts} candidates")]
    SamplerExhausted {
        wanted: usize,
        accepted: usize,
        attempts: usize,
    },
}

/// What a symbol stands for. Coordinate-like kinds carry an index μ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Parameter,
    Time,
    Coordinate,
    Velocity,
    Acceleration,
    Jerk,
    Momentum,
    HigherMomentum,
}

impl SymbolKind {
    /// τ-derivative order for configuration-space kinds.
    pub fn derivative_order(self) -> Option<usize> {
        match self {
            SymbolKind::Coordinate => Some(0),
            SymbolKind::Velocity => Some(1),
            SymbolKind::Acceleration => Some(2),
            SymbolKind::Jerk => Some(3),
            _ => None,
        }
    }

    pub fn with_derivative_order(order: usize) -> Option<SymbolKind> {
        match order {
            0 => Some(SymbolKind::Coordinate),
            1 => Some(SymbolKind::Velocity),
            2 => Some(SymbolKind::Acceleration),
            3 => Some(SymbolKind::Jerk),
            _ => None,
        }
    }

    pub fn is_indexed(self) -> bool {
        !matches!(self, SymbolKind::Parameter | SymbolKind::Time)
    }
}

/// Highest τ-derivative order a symbol table provides.
pub const MAX_DERIVATIVE_ORDER: usize = 3;

#[derive(Clone, Debug)]
pub struct Symbol {
    name: Arc<str>,
    kind: SymbolKind,
    index: Option<usize>,
}

impl Symbol {
    fn new(name: &str, kind: SymbolKind, index: Option<usize>) -> Symbol {
        Symbol {
            name: Arc::from(name),
            kind,
            index,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn index(&self) -> Option<usize> {
        self.index
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.index == other.index && self.name == other.name
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
        match self.index {
            Some(i) => i.hash(state),
            None => self.name.hash(state),
        }
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then(self.index.cmp(&other.index))
            .then_with(|| self.name.cmp(&other.name))
    }
}

/// Frozen name → symbol map for one model.
///
/// For a coordinate named `x` the table provides `x`, `xdot`, `xddot`,
/// `xdddot`, the Ostrogradski momenta `p_x` and `P_x`, plus the evolution
/// parameter `tau` and every declared parameter.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    coordinates: Vec<String>,
    by_name: HashMap<String, Symbol>,
    // [coordinate, velocity, acceleration, jerk, momentum, higher momentum] per index
    indexed: Vec<[Symbol; 6]>,
    parameters: Vec<Symbol>,
    time: Symbol,
}

pub const TIME_NAME: &str = "tau";

impl SymbolTable {
    pub fn new<S: AsRef<str>>(coordinates: &[S], parameters: &[S]) -> Result<SymbolTable, String> {
        let mut by_name = HashMap::new();
        let mut indexed = Vec::with_capacity(coordinates.len());
        let insert = |sym: Symbol, by_name: &mut HashMap<String, Symbol>| {
            if !is_identifier(sym.name()) {
                return Err(format!("'{}' is not a valid identifier", sym.name()));
            }
            if parse::FUNCTION_NAMES.contains(&sym.name()) {
                return Err(format!("'{}' clashes with a built-in function", sym.name()));
            }
            if by_name.insert(sym.name().to_string(), sym.clone()).is_some() {
                return Err(format!("duplicate symbol name '{}'", sym.name()));
            }
            Ok(sym)
        };
        for (i, c) in coordinates.iter().enumerate() {
            let c = c.as_ref();
            let syms = [
                Symbol::new(c, SymbolKind::Coordinate, Some(i)),
                Symbol::new(&format!("{c}dot"), SymbolKind::Velocity, Some(i)),
                Symbol::new(&format!("{c}ddot"), SymbolKind::Acceleration, Some(i)),
                Symbol::new(&format!("{c}dddot"), SymbolKind::Jerk, Some(i)),
                Symbol::new(&format!("p_{c}"), SymbolKind::Momentum, Some(i)),
                Symbol::new(&format!("P_{c}"), SymbolKind::HigherMomentum, Some(i)),
            ];
            for s in &syms {
                insert(s.clone(), &mut by_name)?;
            }
            indexed.push(syms);
        }
        let time = insert(Symbol::new(TIME_NAME, SymbolKind::Time, None), &mut by_name)?;
        let mut params = Vec::new();
        for p in parameters {
            params.push(insert(
                Symbol::new(p.as_ref(), SymbolKind::Parameter, None),
                &mut by_name,
            )?);
        }
        Ok(SymbolTable {
            coordinates: coordinates.iter().map(|c| c.as_ref().to_string()).collect(),
            by_name,
            indexed,
            parameters: params,
            time,
        })
    }

    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinate_names(&self) -> &[String] {
        &self.coordinates
    }

    pub fn lookup(&self, name: &str) -> Option<&Symbol> {
        self.by_name.get(name)
    }

    pub fn coordinate(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][0]
    }

    pub fn velocity(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][1]
    }

    pub fn acceleration(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][2]
    }

    pub fn jerk(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][3]
    }

    pub fn momentum(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][4]
    }

    pub fn higher_momentum(&self, mu: usize) -> &Symbol {
        &self.indexed[mu][5]
    }

    /// Symbol for the `order`-th τ-derivative of coordinate `mu`.
    pub fn derivative(&self, order: usize, mu: usize) -> Option<&Symbol> {
        (order <= MAX_DERIVATIVE_ORDER).then(|| &self.indexed[mu][order])
    }

    pub fn time(&self) -> &Symbol {
        &self.time
    }

    pub fn parameters(&self) -> &[Symbol] {
        &self.parameters
    }

    pub fn parameter(&self, name: &str) -> Option<&Symbol> {
        self.lookup(name).filter(|s| s.kind() == SymbolKind::Parameter)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sqrt,
    Atanh,
    Tanh,
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Atanh => "atanh",
            Func::Tanh => "tanh",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "atanh" => Func::Atanh,
            "tanh" => Func::Tanh,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Const(Number),
    Sym(Symbol),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, Expr),
    Apply(Func, Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(n: Number) -> Expr {
        Expr::new(Node::Const(n))
    }

    pub fn int(n: i64) -> Expr {
        Expr::num(Number::int(n))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::num(Number::ratio(n, d))
    }

    pub fn real(v: f64) -> Expr {
        Expr::num(Number::from_f64(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(s: &Symbol) -> Expr {
        Expr::new(Node::Sym(s.clone()))
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::new(Node::Sum(terms)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::new(Node::Product(factors)),
        }
    }

    pub fn pow(&self, exponent: Expr) -> Expr {
        Expr::new(Node::Pow(self.clone(), exponent))
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Expr::int(n))
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        Expr::new(Node::Apply(f, arg))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn as_number(&self) -> Option<Number> {
        match self.node() {
            Node::Const(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Literal zero (structural, not semantic).
    pub fn is_zero(&self) -> bool {
        self.as_number().is_some_and(Number::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_number().is_some_and(Number::is_one)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Sym(_) => vec![],
            Node::Sum(xs) | Node::Product(xs) => xs.iter().collect(),
            Node::Pow(b, e) => vec![b, e],
            Node::Apply(_, a) => vec![a],
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        if let Node::Sym(s) = self.node() {
            out.insert(s.clone());
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Sym(t) => t == s,
            _ => self.children().into_iter().any(|c| c.depends_on(s)),
        }
    }

    pub fn contains_kind(&self, kind: SymbolKind) -> bool {
        match self.node() {
            Node::Sym(t) => t.kind() == kind,
            _ => self.children().into_iter().any(|c| c.contains_kind(kind)),
        }
    }

    /// Highest τ-derivative order among the configuration symbols present.
    pub fn max_derivative_order(&self) -> Option<usize> {
        self.free_symbols()
            .iter()
            .filter_map(|s| s.kind().derivative_order())
            .max()
    }

    /// Replace symbols by expressions; the result is simplified.
    pub fn substitute(&self, map: &HashMap<Symbol, Expr>) -> Expr {
        self.substitute_raw(map).simplify()
    }

    fn substitute_raw(&self, map: &HashMap<Symbol, Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Sym(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(xs) => Expr::sum(xs.iter().map(|x| x.substitute_raw(map)).collect()),
            Node::Product(xs) => {
                Expr::product(xs.iter().map(|x| x.substitute_raw(map)).collect())
            }
            Node::Pow(b, e) => b.substitute_raw(map).pow(e.substitute_raw(map)),
            Node::Apply(f, a) => Expr::apply(*f, a.substitute_raw(map)),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    fn rank(&self) -> u8 {
        match self.node() {
            Node::Const(_) => 0,
            Node::Sym(_) => 1,
            Node::Pow(..) => 2,
            Node::Apply(..) => 3,
            Node::Product(_) => 4,
            Node::Sum(_) => 5,
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used to sort operands into canonical position.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        // A bare symbol sorts next to its own powers.
        let key = |e: &Expr| -> (Expr, Expr) {
            match e.node() {
                Node::Pow(b, x) if matches!(b.node(), Node::Sym(_)) => (b.clone(), x.clone()),
                Node::Sym(_) => (e.clone(), Expr::one()),
                _ => (e.clone(), Expr::one()),
            }
        };
        let (a_sym, b_sym) = (
            matches!(self.node(), Node::Sym(_)) || matches!(self.node(), Node::Pow(b, _) if matches!(b.node(), Node::Sym(_))),
            matches!(other.node(), Node::Sym(_)) || matches!(other.node(), Node::Pow(b, _) if matches!(b.node(), Node::Sym(_))),
        );
        if a_sym && b_sym {
            let (ab, ae) = key(self);
            let (bb, be) = key(other);
            let (Node::Sym(sa), Node::Sym(sb)) = (ab.node(), bb.node()) else {
                unreachable!()
            };
            return sa
                .cmp(sb)
                .then_with(|| ae.cmp(&be))
                .then(self.rank().cmp(&other.rank()));
        }
        self.rank().cmp(&other.rank()).then_with(|| match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.total_cmp(b),
            (Node::Sym(a), Node::Sym(b)) => a.cmp(b),
            (Node::Sum(a), Node::Sum(b)) | (Node::Product(a), Node::Product(b)) => {
                a.len().cmp(&b.len()).then_with(|| a.cmp(b))
            }
            (Node::Pow(ab, ae), Node::Pow(bb, be)) => ab.cmp(bb).then_with(|| ae.cmp(be)),
            (Node::Apply(fa, a), Node::Apply(fb, b)) => fa.cmp(fb).then_with(|| a.cmp(b)),
            _ => Ordering::Equal,
        })
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum(vec![a, b]));
binop!(Sub, sub, |a, b| Expr::sum(vec![a, Expr::product(vec![Expr::int(-1), b])]));
binop!(Mul, mul, |a, b| Expr::product(vec![a, b]));
binop!(Div, div, |a, b| Expr::product(vec![a, b.recip()]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product(vec![Expr::int(-1), self])
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}
