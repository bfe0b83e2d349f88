//! Damped Newton iteration with sparse direct solves, and implicit midpoint stepping.

use super::disc::{EulerDisc, EulerField};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, SparseLu};
use crate::study::EntropyRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Relative reduction of the residual norm.
    pub rel_tol: f64,
    /// Absolute floor on the residual norm.
    pub abs_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { rel_tol: 1e-12, abs_tol: 1e-12, max_iter: 30, max_halvings: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Residual 2-norm before each iteration and after the last.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton's method for `R(u) = 0`.
///
/// Steps that produce an inadmissible state or a larger residual are halved.
pub fn newton_solve(
    residual: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    jacobian: &dyn Fn(&[f64]) -> Result<CsrMatrix>,
    u0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let mut u = u0.to_vec();
    let mut r = residual(&u)?;
    let r0 = norm(&r);
    let target = (opts.rel_tol * r0).max(opts.abs_tol);
    let mut history = vec![r0];
    let mut rn = r0;
    for it in 0..opts.max_iter {
        if rn <= target {
            return Ok(NewtonReport { u, iterations: it, history });
        }
        let lu = SparseLu::factor(&jacobian(&u)?)?;
        let du = lu.solve(&r)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - t * b).collect();
            match residual(&trial) {
                Ok(rt) => {
                    let n = norm(&rt);
                    if n.is_finite() && n < rn {
                        accepted = Some((trial, rt, n));
                        break;
                    }
                }
                Err(Error::Inadmissible { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        let Some((nu, nr, n)) = accepted else {
            return Err(Error::NoConvergence { what: "Newton line search", iterations: it + 1, residual: rn });
        };
        u = nu;
        r = nr;
        rn = n;
        history.push(rn);
    }
    if rn <= target {
        return Ok(NewtonReport { u, iterations: opts.max_iter, history });
    }
    Err(Error::NoConvergence { what: "Newton", iterations: opts.max_iter, residual: rn })
}

/// Steady solve of the discrete residual.
pub fn solve_steady(disc: &EulerDisc, u0: &EulerField, opts: &NewtonOptions) -> Result<(EulerField, NewtonReport)> {
    let rep = newton_solve(&|u| disc.residual(u), &|u| disc.jacobian(u), &u0.u, opts)?;
    Ok((EulerField { u: rep.u.clone(), time: u0.time }, rep))
}

/// One implicit midpoint step for `M du/dt = -r(u)` with diagonal mass `M`.
///
/// Solves for the midpoint state `m`: `M (m - u) + dt/2 r(m) = 0`, then returns `2m - u`.
pub fn midpoint_step(
    r: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    jac: &dyn Fn(&[f64]) -> Result<CsrMatrix>,
    mass: &[f64],
    u: &[f64],
    dt: f64,
    newton: &NewtonOptions,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let res = |m: &[f64]| -> Result<Vec<f64>> {
        let rm = r(m)?;
        Ok((0..m.len()).map(|k| mass[k] * (m[k] - u[k]) + 0.5 * dt * rm[k]).collect())
    };
    let jm = |m: &[f64]| -> Result<CsrMatrix> {
        let j = jac(m)?;
        let mut trip: Vec<(usize, usize, f64)> = j.triplets().map(|(r, c, v)| (r, c, 0.5 * dt * v)).collect();
        trip.extend((0..m.len()).map(|k| (k, k, mass[k])));
        Ok(CsrMatrix::from_triplets(m.len(), m.len(), &trip))
    };
    let rep = newton_solve(&res, &jm, u, newton)?;
    Ok(rep.u.iter().zip(u).map(|(m, a)| 2.0 * m - a).collect())
}

/// Implicit midpoint rule `U+ = U + dt rhs((U + U+)/2)` with one entropy-trace row per step.
pub fn implicit_midpoint_advance(
    disc: &EulerDisc,
    field: &mut EulerField,
    dt: f64,
    steps: usize,
    newton: &NewtonOptions,
) -> Result<Vec<EntropyRow>> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let h4: Vec<f64> = (0..field.u.len()).map(|k| disc.h[k / 4]).collect();
    let mut s_prev = disc.nodal_entropy(field)?;
    let mut trace = Vec::with_capacity(steps);
    for step in 1..=steps {
        field.u = midpoint_step(&|u| disc.residual(u), &|u| disc.jacobian(u), &h4, &field.u, dt, newton).map_err(|e| match e {
            Error::NoConvergence { residual, .. } => Error::NoConvergence { what: "implicit midpoint step", iterations: step, residual },
            other => other,
        })?;
        field.time += dt;
        // nodal differences first: the total is O(1) while its change can be near round-off
        let s = disc.nodal_entropy(field)?;
        let delta = s.iter().zip(&s_prev).zip(&disc.h).map(|((a, b), h)| h * (a - b)).sum();
        let total = s.iter().zip(&disc.h).map(|(a, h)| h * a).sum();
        trace.push(EntropyRow { step, time: field.time, total_entropy: total, delta_entropy: delta });
        s_prev = s;
    }
    Ok(trace)
}
