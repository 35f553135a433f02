//! Helmholtz integrability checks and finite-difference cross-validation
//! of the derived tensors.

mod fd;
mod helmholtz;

use std::fmt;

use thiserror::Error;

use crate::expr::{Binding, ExprError};
use crate::model::{AffineModel, ModelError};

pub use fd::{fd_crosscheck, fd_tensors_at, FdPolicy, FdTensors, FdValue};
pub use helmholtz::{helmholtz_suite, perturb_potential, HELMHOLTZ_ABS_TOL, HELMHOLTZ_REL_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] ExprError),
    #[error("only {found} of {wanted} sample points were usable after {attempts} candidates")]
    NotEnoughPoints { wanted: usize, found: usize, attempts: usize },
}

/// Worst entry of an identity over the sampled points.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstEntry {
    pub indices: Vec<usize>,
    pub point: usize,
    pub abs: f64,
    pub rel: f64,
}

/// Outcome of one identity over a sample of points.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub samples: usize,
    /// Points dropped because a perturbed evaluation failed.
    pub skipped: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub worst: Option<WorstEntry>,
    pub tolerance: String,
    pub passed: bool,
    /// Informational reports do not affect the overall verdict.
    pub required: bool,
    pub seed: u64,
    pub note: Option<String>,
}

impl IdentityReport {
    pub(crate) fn new(name: &str, required: bool, tolerance: String, seed: u64) -> IdentityReport {
        IdentityReport {
            name: name.to_string(),
            samples: 0,
            skipped: 0,
            max_abs: 0.0,
            max_rel: 0.0,
            worst: None,
            tolerance,
            passed: true,
            required,
            seed,
            note: None,
        }
    }

    /// Fold one entry's residual into the report. The worst entry is the
    /// largest relative residual, preferring failing entries.
    pub(crate) fn record(&mut self, indices: &[usize], point: usize, abs: f64, rel: f64, ok: bool) {
        self.max_abs = self.max_abs.max(abs);
        self.max_rel = self.max_rel.max(rel);
        let replace = match &self.worst {
            None => true,
            Some(_) if self.passed && !ok => true,
            Some(_) if !self.passed && ok => false,
            Some(w) => rel > w.rel || (rel == w.rel && abs > w.abs),
        };
        if replace {
            self.worst = Some(WorstEntry {
                indices: indices.to_vec(),
                point,
                abs,
                rel,
            });
        }
        self.passed &= ok;
    }

    pub fn verdict(&self) -> &'static str {
        match (self.passed, self.required) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "fails (informational)",
        }
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity: {}", self.name)?;
        writeln!(f, "  samples: {} (skipped {}, seed {})", self.samples, self.skipped, self.seed)?;
        write!(f, "  worst residual: abs {:.3e}, rel {:.3e}", self.max_abs, self.max_rel)?;
        if let Some(w) = &self.worst {
            write!(f, " at {:?} (point {})", w.indices, w.point)?;
        }
        writeln!(f)?;
        if let Some(n) = &self.note {
            writeln!(f, "  note: {n}")?;
        }
        writeln!(f, "  verdict: {} ({})", self.verdict(), self.tolerance)
    }
}

/// Whether every required report passed.
pub fn all_passed(reports: &[IdentityReport]) -> bool {
    reports.iter().filter(|r| r.required).all(|r| r.passed)
}

/// `count` admissible configuration points where `usable` holds.
pub(crate) fn sample_points(
    m: &AffineModel,
    count: usize,
    seed: u64,
    usable: impl FnMut(&Binding) -> bool,
) -> Result<Vec<Binding>, VerifyError> {
    let mut sampler = m.sampler(seed);
    sampler
        .sample_where(&m.configuration_symbols(1), count, usable)
        .map_err(|e| match e {
            ExprError::SamplerExhausted { wanted, accepted, attempts } => VerifyError::NotEnoughPoints {
                wanted,
                found: accepted,
                attempts,
            },
            other => other.into(),
        })
}

/// `f` over `items` on up to `jobs` scoped threads, results in input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("verification worker panicked"))
            .collect()
    })
}
