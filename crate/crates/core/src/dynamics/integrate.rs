use std::fmt::Write as _;
use std::path::Path;

use super::{pack, unpack, DynamicsError, Flow};
use crate::constraints::{eval_dvector, PhaseState};
use crate::expr::Binding;
use crate::model::AffineModel;

/// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step magnitude; chosen from the derivative scale if absent.
    pub initial_step: Option<f64>,
    /// Smallest step magnitude relative to `max(1, |span|)`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: None,
            min_step: 1e-14,
            max_steps: 200_000,
        }
    }
}

/// Per-sample monitor values.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub e1: f64,
    pub e2: f64,
    /// `max_μ |C_μ|`.
    pub c_max: f64,
    /// `max_μ |𝒞_μ|`.
    pub s_max: f64,
    /// Multipliers, i.e. the accelerations.
    pub u: Vec<f64>,
    /// Step that produced this sample (0 for the initial point).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub diagnostics: Vec<Diagnostics>,
    pub rejected: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectories hold the initial state")
    }

    pub fn max_constraint_drift(&self) -> (f64, f64) {
        self.diagnostics
            .iter()
            .fold((0.0, 0.0), |(c, s), d| (c.max(d.c_max), s.max(d.s_max)))
    }

    /// `max |E2(τ) − E2(0)|`.
    pub fn e2_drift(&self) -> f64 {
        let e0 = self.diagnostics[0].e2;
        self.diagnostics.iter().map(|d| (d.e2 - e0).abs()).fold(0.0, f64::max)
    }

    /// Phase symbols, `ẍ = u` and `τ` at sample `i`.
    pub fn binding(&self, i: usize, m: &AffineModel) -> Binding {
        let t = m.table();
        let mut b = self.states[i].binding(m);
        for (mu, v) in self.diagnostics[i].u.iter().enumerate() {
            b.set(t.acceleration(mu), *v);
        }
        b.set(t.time(), self.times[i]);
        b
    }

    /// Samples with jerks estimated by differentiating `u` over neighbours
    /// (second order on a non-uniform grid, one-sided at the ends).
    pub fn samples_with_jerk(&self, m: &AffineModel) -> Vec<Binding> {
        let t = m.table();
        let n = m.dimension();
        let len = self.len();
        (0..len)
            .map(|i| {
                let mut b = self.binding(i, m);
                for mu in 0..n {
                    let u = |k: usize| self.diagnostics[k].u[mu];
                    let tm = |k: usize| self.times[k];
                    let j = if len < 2 {
                        0.0
                    } else if i == 0 {
                        (u(1) - u(0)) / (tm(1) - tm(0))
                    } else if i == len - 1 {
                        (u(i) - u(i - 1)) / (tm(i) - tm(i - 1))
                    } else {
                        let (h0, h1) = (tm(i) - tm(i - 1), tm(i + 1) - tm(i));
                        (-h1 / (h0 * (h0 + h1))) * u(i - 1) + ((h1 - h0) / (h0 * h1)) * u(i) + (h0 / (h1 * (h0 + h1))) * u(i + 1)
                    };
                    b.set(t.jerk(mu), j);
                }
                b
            })
            .collect()
    }

    /// CSV text: `tau, x0…, xdot0…, p0…, P0…, E1, E2, Cmax, Smax, u0…`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.x.len());
        let mut out = String::from("tau");
        for prefix in ["x", "xdot", "p", "P"] {
            for mu in 0..n {
                let _ = write!(out, ",{prefix}{mu}");
            }
        }
        out.push_str(",E1,E2,Cmax,Smax");
        for mu in 0..n {
            let _ = write!(out, ",u{mu}");
        }
        out.push('\n');
        for (i, s) in self.states.iter().enumerate() {
            let d = &self.diagnostics[i];
            let values = std::iter::once(self.times[i])
                .chain(s.x.iter().chain(&s.xdot).chain(&s.p).chain(&s.big_p).copied())
                .chain([d.e1, d.e2, d.c_max, d.s_max])
                .chain(d.u.iter().copied());
            let row: Vec<String> = values.map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Write the CSV atomically: a sibling temporary file renamed on success.
    pub fn write_csv(&self, path: &Path) -> Result<(), DynamicsError> {
        let file_name = path
            .file_name()
            .ok_or_else(|| DynamicsError::Io(format!("{}: not a file path", path.display())))?;
        let tmp = path.with_file_name(format!(".{}.partial", file_name.to_string_lossy()));
        let io = |e: std::io::Error| DynamicsError::Io(format!("{}: {e}", path.display()));
        std::fs::write(&tmp, self.to_csv()).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            io(e)
        })
    }
}

fn diagnostics(flow: &Flow<'_>, s: &PhaseState, u: &[f64], step: f64) -> Result<Diagnostics, DynamicsError> {
    let b = s.binding(flow.model);
    let c = eval_dvector(&flow.constraints.primary, &b)?;
    let sc = eval_dvector(&flow.constraints.secondary, &b)?;
    Ok(Diagnostics {
        e1: flow.tensors.e1.evaluate(&b)?,
        e2: flow.tensors.e2.evaluate(&b)?,
        c_max: c.amax(),
        s_max: sc.amax(),
        u: u.to_vec(),
        step,
    })
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], o: &IntegrateOptions) -> f64 {
    let sum: f64 = (0..y.len())
        .map(|i| {
            let sc = o.atol + o.rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / y.len() as f64).sqrt()
}

/// Adaptive Dormand–Prince integration from `tau0` to `tau1` (either
/// direction). Stages that leave the guarded domain or fail to evaluate
/// reject the step and halve it.
pub fn integrate(
    flow: &Flow<'_>,
    s0: &PhaseState,
    tau0: f64,
    tau1: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    if !tau0.is_finite() || !tau1.is_finite() || tau0 == tau1 {
        return Err(DynamicsError::Span(format!("[{tau0}, {tau1}]")));
    }
    let n = flow.dimension();
    s0.admissible_binding(flow.model)?;
    let dir = (tau1 - tau0).signum();
    let span = (tau1 - tau0).abs();
    let h_min = opts.min_step * span.max(1.0);

    let (mut k_first, u0) = flow.rhs(s0, tau0)?;
    let mut traj = Trajectory {
        times: vec![tau0],
        states: vec![s0.clone()],
        diagnostics: vec![diagnostics(flow, s0, u0.as_slice(), 0.0)?],
        rejected: 0,
    };
    let mut y = pack(s0);
    let mut tau = tau0;
    let mut h = opts.initial_step.unwrap_or_else(|| {
        let d0 = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let d1 = k_first.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-4
        } else {
            0.01 * d0 / d1
        }
    });
    h = h.min(span);
    let mut steps = 0;
    while (tau1 - tau) * dir > 0.0 {
        if steps == opts.max_steps {
            return Err(DynamicsError::StepLimit { tau, limit: opts.max_steps });
        }
        steps += 1;
        let remaining = (tau1 - tau).abs();
        let last_step = h >= remaining;
        let hs = if last_step { remaining } else { h } * dir;

        let attempt = (|| -> Result<(Vec<f64>, Vec<f64>, PhaseState, Vec<f64>, Vec<f64>), DynamicsError> {
            let mut k: Vec<Vec<f64>> = vec![k_first.clone()];
            for stage in 1..7 {
                let yi: Vec<f64> = (0..y.len())
                    .map(|j| y[j] + hs * (0..stage).map(|l| A[stage][l] * k[l][j]).sum::<f64>())
                    .collect();
                let si = unpack(&yi, n);
                si.admissible_binding(flow.model)?;
                k.push(flow.rhs(&si, tau + C[stage] * hs)?.0);
            }
            let y_new: Vec<f64> = (0..y.len()).map(|j| y[j] + hs * (0..7).map(|l| B[l] * k[l][j]).sum::<f64>()).collect();
            let err: Vec<f64> = (0..y.len())
                .map(|j| hs * (0..7).map(|l| (B[l] - B_LOW[l]) * k[l][j]).sum::<f64>())
                .collect();
            let s_new = unpack(&y_new, n);
            s_new.admissible_binding(flow.model)?;
            let (k_last, u) = flow.rhs(&s_new, tau + hs)?;
            Ok((y_new, err, s_new, k_last, u.as_slice().to_vec()))
        })();

        let reject = |h: &mut f64, reason: String, rejected: &mut usize| -> Result<(), DynamicsError> {
            *rejected += 1;
            *h *= 0.5;
            if *h < h_min {
                return Err(DynamicsError::StepUnderflow {
                    tau,
                    step: *h,
                    reason,
                    last: Box::new(unpack(&y, n)),
                });
            }
            Ok(())
        };

        match attempt {
            Ok((y_new, err, s_new, k_last, u)) => {
                let e = error_norm(&y, &y_new, &err, opts);
                if e <= 1.0 {
                    tau = if last_step { tau1 } else { tau + hs };
                    y = y_new;
                    k_first = k_last;
                    traj.times.push(tau);
                    traj.diagnostics.push(diagnostics(flow, &s_new, &u, hs)?);
                    traj.states.push(s_new);
                    let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h = hs.abs() * factor;
                } else {
                    let factor = (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
                    traj.rejected += 1;
                    h = hs.abs() * factor;
                    if h < h_min {
                        return Err(DynamicsError::StepUnderflow {
                            tau,
                            step: h,
                            reason: format!("error estimate {e:.3e} does not decrease"),
                            last: Box::new(unpack(&y, n)),
                        });
                    }
                }
            }
            Err(e @ (DynamicsError::Constraint(_) | DynamicsError::GaugeRequired { .. })) => {
                h = hs.abs();
                reject(&mut h, e.to_string(), &mut traj.rejected)?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}
