use super::{AffineModel, ModelError};
use crate::expr::rational::is_identically_zero;
use crate::expr::{equal_probabilistic, Expr, DEFAULT_TOL, DEFAULT_TRIALS};

/// Simplify, keep the expanded form when it is smaller, and replace
/// provable zeros by a literal 0.
pub(crate) fn snap(e: &Expr) -> Expr {
    let s = e.simplify();
    if s.is_zero() || is_identically_zero(&s) {
        return Expr::zero();
    }
    let x = s.expand();
    if x.size() < s.size() {
        x
    } else {
        s
    }
}

fn antisymmetric(n: usize, entry: impl Fn(usize, usize) -> Expr) -> Vec<Vec<Expr>> {
    let mut out = vec![vec![Expr::zero(); n]; n];
    for mu in 0..n {
        for nu in mu + 1..n {
            let e = snap(&entry(mu, nu));
            out[nu][mu] = (-&e).simplify();
            out[mu][nu] = e;
        }
    }
    out
}

/// The symbolic package built from `(K, V)`.
#[derive(Clone, Debug)]
pub struct DerivedTensors {
    /// `P_μ = K_μ`.
    pub higher_momenta: Vec<Expr>,
    /// `p_μ = ∂V/∂ẋ^μ − (∂K_μ/∂x^ν) ẋ^ν`.
    pub momenta: Vec<Expr>,
    /// `M_μν = ∂P_ν/∂x^μ − ∂p_μ/∂ẋ^ν`.
    pub mass: Vec<Vec<Expr>>,
    /// `F_μ = (∂p_μ/∂x^ν) ẋ^ν − ∂V/∂x^μ`.
    pub force: Vec<Expr>,
    /// `N_μν = ∂K_ν/∂ẋ^μ − ∂K_μ/∂ẋ^ν`.
    pub n_curl: Vec<Vec<Expr>>,
    /// `X_μν = ∂p_ν/∂x^μ − ∂p_μ/∂x^ν`.
    pub x_curl: Vec<Vec<Expr>>,
    /// `Θ_μν = ∂P_μ/∂x^ν − ∂P_ν/∂x^μ`.
    pub theta: Vec<Vec<Expr>>,
    /// `E1 = −ẋ^μ K_μ`.
    pub e1: Expr,
    /// `E2 = (∂V/∂ẋ^μ) ẋ^μ − V − (∂K_μ/∂x^ν) ẋ^ν ẋ^μ`.
    pub e2: Expr,
    /// `H0 = p_μ ẋ^μ − V` with `p_μ` the phase-space momentum symbols.
    pub h0: Expr,
    /// `H0` with the momentum formula substituted.
    pub h0_lagrangian: Expr,
}

impl DerivedTensors {
    pub fn dimension(&self) -> usize {
        self.momenta.len()
    }
}

pub fn derive(m: &AffineModel) -> DerivedTensors {
    let n = m.dimension();
    let t = m.table();
    let x = |mu: usize| t.coordinate(mu);
    let xd = |mu: usize| t.velocity(mu);
    let xd_expr = |mu: usize| Expr::sym(t.velocity(mu));
    let k = m.k();
    let v = m.v();

    let higher_momenta: Vec<Expr> = k.to_vec();
    let dv_dxd: Vec<Expr> = (0..n).map(|mu| v.diff(xd(mu))).collect();
    let momenta: Vec<Expr> = (0..n)
        .map(|mu| {
            let mut terms = vec![dv_dxd[mu].clone()];
            for nu in 0..n {
                terms.push(-(k[mu].diff(x(nu)) * xd_expr(nu)));
            }
            snap(&Expr::sum(terms))
        })
        .collect();
    let mass: Vec<Vec<Expr>> = (0..n)
        .map(|mu| {
            (0..n)
                .map(|nu| snap(&(higher_momenta[nu].diff(x(mu)) - momenta[mu].diff(xd(nu)))))
                .collect()
        })
        .collect();
    let force: Vec<Expr> = (0..n)
        .map(|mu| {
            let mut terms: Vec<Expr> = (0..n).map(|nu| momenta[mu].diff(x(nu)) * xd_expr(nu)).collect();
            terms.push(-v.diff(x(mu)));
            snap(&Expr::sum(terms))
        })
        .collect();
    let n_curl = antisymmetric(n, |mu, nu| k[nu].diff(xd(mu)) - k[mu].diff(xd(nu)));
    let x_curl = antisymmetric(n, |mu, nu| momenta[nu].diff(x(mu)) - momenta[mu].diff(x(nu)));
    let theta = antisymmetric(n, |mu, nu| higher_momenta[mu].diff(x(nu)) - higher_momenta[nu].diff(x(mu)));

    let e1 = snap(&-Expr::sum((0..n).map(|mu| xd_expr(mu) * &k[mu]).collect()));
    let mut e2_terms = vec![-v.clone()];
    for mu in 0..n {
        e2_terms.push(&dv_dxd[mu] * xd_expr(mu));
        for nu in 0..n {
            e2_terms.push(-(k[mu].diff(x(nu)) * xd_expr(nu) * xd_expr(mu)));
        }
    }
    let e2 = snap(&Expr::sum(e2_terms));
    let mut h0_terms = vec![-v.clone()];
    let mut h0l_terms = vec![-v.clone()];
    for mu in 0..n {
        h0_terms.push(Expr::sym(t.momentum(mu)) * xd_expr(mu));
        h0l_terms.push(&momenta[mu] * xd_expr(mu));
    }
    DerivedTensors {
        higher_momenta,
        momenta,
        mass,
        force,
        n_curl,
        x_curl,
        theta,
        e1,
        e2,
        h0: Expr::sum(h0_terms).simplify(),
        h0_lagrangian: snap(&Expr::sum(h0l_terms)),
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub symmetric: bool,
    /// `∂K_μ/∂ẋ^ν − ∂K_ν/∂ẋ^μ`.
    pub residual: Vec<Vec<Expr>>,
    pub seed: u64,
}

/// Whether `∂K_μ/∂ẋ^ν` is symmetric. Entries not provably zero are decided
/// by probabilistic comparison against zero.
pub fn check_affine_symmetry(m: &AffineModel, seed: u64) -> Result<SymmetryReport, ModelError> {
    let n = m.dimension();
    let t = m.table();
    let residual = antisymmetric(n, |mu, nu| m.k()[mu].diff(t.velocity(nu)) - m.k()[nu].diff(t.velocity(mu)));
    let mut symmetric = true;
    let mut sampler = m.sampler(seed);
    'outer: for row in &residual {
        for e in row {
            if e.is_zero() {
                continue;
            }
            if !equal_probabilistic(e, &Expr::zero(), &mut sampler, DEFAULT_TRIALS, DEFAULT_TOL)? {
                symmetric = false;
                break 'outer;
            }
        }
    }
    Ok(SymmetryReport {
        symmetric,
        residual,
        seed,
    })
}
