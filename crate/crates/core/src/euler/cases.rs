//! Steady vortex, discontinuous periodic initial condition and the associated studies.

use serde::{Deserialize, Serialize};

use super::disc::{BcKind, EulerDisc, EulerField, EulerOptions};
use super::newton::{implicit_midpoint_advance, solve_steady, NewtonOptions};
use super::thermo::{EulerThermo, Primitive, State};
use crate::error::{invalid, Error, Result};
use crate::mesh::{quarter_annulus_mesh, warped_periodic_mesh};
use crate::study::{EntropyRow, VortexRow};
use crate::tri_sbp::SbpTri;

pub const VORTEX_R_IN: f64 = 1.0;
pub const VORTEX_RHO_IN: f64 = 2.0;
pub const VORTEX_MACH_IN: f64 = 0.95;

/// Isentropic vortex with circular streamlines.
///
/// Pressure follows `p = rho^gamma / gamma`, so the sound speed at the inner
/// radius is `rho_in^((gamma - 1)/2)`; the tangential speed decays like `1/r`.
pub fn vortex_exact(th: &EulerThermo, r: f64) -> Result<Primitive> {
    if !(r >= VORTEX_R_IN) {
        return invalid(format!("vortex radius must be at least {VORTEX_R_IN}, got {r}"));
    }
    let g = th.gamma;
    let m2 = VORTEX_MACH_IN * VORTEX_MACH_IN;
    let rho = VORTEX_RHO_IN * (1.0 + 0.5 * (g - 1.0) * m2 * (1.0 - (VORTEX_R_IN / r).powi(2))).powf(1.0 / (g - 1.0));
    let p = rho.powf(g) / g;
    let a_in = VORTEX_RHO_IN.powf(0.5 * (g - 1.0));
    let speed = VORTEX_MACH_IN * a_in * VORTEX_R_IN / r;
    Ok(Primitive { rho, u: speed, v: 0.0, p })
}

/// Vortex state at a point, rotating counter-clockwise.
pub fn vortex_state(th: &EulerThermo, x: [f64; 2]) -> State {
    let r = x[0].hypot(x[1]).max(VORTEX_R_IN);
    let w = vortex_exact(th, r).expect("radius clamped to the domain");
    let (s, c) = (x[1] / r, x[0] / r);
    th.conservative(&Primitive { rho: w.rho, u: -w.u * s, v: w.u * c, p: w.p })
}

/// Pressure force `int p n_x dGamma` on the inner arc for the exact vortex.
///
/// The fluid's outward normal on `r = 1` is `-(cos, sin)`, and the pressure is
/// constant there, so the integral is `-p_in`.
pub fn vortex_exact_drag(th: &EulerThermo) -> f64 {
    let p_in = vortex_exact(th, VORTEX_R_IN).unwrap().p;
    // composite Gauss-Legendre on the arc as an independent check of the closed form
    let rule = crate::ref1d::lgl_rule(12).expect("LGL rule");
    let half = 0.25 * std::f64::consts::PI;
    let mut s = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let th_ = half * (x + 1.0);
        s += w * half * p_in * (-th_.cos()) * VORTEX_R_IN;
    }
    s
}

/// Piecewise-constant state at rest: denser, higher-energy square in the middle third.
pub fn discontinuous_ic(x: f64, y: f64) -> State {
    let inside = (1.0 / 3.0..=2.0 / 3.0).contains(&x) && (1.0 / 3.0..=2.0 / 3.0).contains(&y);
    if inside {
        [1.1, 0.0, 0.0, 5.1]
    } else {
        [1.0, 0.0, 0.0, 5.0]
    }
}

/// Discretization of the vortex on the `n x n` quarter annulus.
pub fn vortex_disc(op: &SbpTri, n: usize, opts: EulerOptions) -> Result<EulerDisc> {
    let (mesh, map) = quarter_annulus_mesh(n, op.p)?;
    let th = opts.thermo;
    let exterior = move |x: [f64; 2]| vortex_state(&th, x);
    EulerDisc::new(
        &mesh,
        &map,
        op,
        opts,
        &[("inner", BcKind::Slip), ("outer", BcKind::Characteristic), ("side", BcKind::Characteristic)],
        Some(&exterior),
    )
}

/// Runs the steady vortex on each `n` and reports density and drag errors.
pub fn vortex_study(op: &SbpTri, ns: &[usize], opts: EulerOptions, newton: &NewtonOptions) -> Result<Vec<VortexRow>> {
    let th = opts.thermo;
    let drag_exact = vortex_exact_drag(&th);
    let exact = move |x: [f64; 2]| vortex_state(&th, x);
    let mut rows: Vec<VortexRow> = Vec::new();
    for &n in ns {
        let disc = vortex_disc(op, n, opts)?;
        let u0 = disc.interpolate(&exact);
        let (sol, rep) = solve_steady(&disc, &u0, newton)?;
        let density_error = disc.density_l2_error(&sol, &exact);
        let drag = disc.pressure_force_x(&sol, "inner")?;
        let drag_error = (drag - drag_exact).abs();
        let h = 1.0 / n as f64;
        let (density_rate, drag_rate) = match rows.last() {
            Some(prev) => {
                let lr = (prev.h / h).ln();
                (Some((prev.density_error / density_error).ln() / lr), Some((prev.drag_error / drag_error).ln() / lr))
            }
            None => (None, None),
        };
        rows.push(VortexRow {
            n,
            h,
            n_dof: 4 * disc.n_nodes(),
            newton_iterations: rep.iterations,
            residual: *rep.history.last().unwrap(),
            density_error,
            drag,
            drag_error,
            density_rate,
            drag_rate,
        });
    }
    Ok(rows)
}

/// Periodic warped-square discretization without boundary conditions.
pub fn periodic_disc(op: &SbpTri, opts: EulerOptions) -> Result<EulerDisc> {
    let (mesh, map) = warped_periodic_mesh(op.p)?;
    EulerDisc::new(&mesh, &map, op, opts, &[], None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub cfl: f64,
    pub final_time: f64,
}

/// Entropy trace of the discontinuous problem on the warped periodic mesh.
///
/// `dt = cfl * h_min / sigma_max` with `h_min` the smallest element inradius
/// and `sigma_max` the largest initial wave speed.
pub fn entropy_trace(op: &SbpTri, opts: EulerOptions, cfg: &TraceConfig, newton: &NewtonOptions) -> Result<(Vec<EntropyRow>, f64)> {
    let (mesh, map) = warped_periodic_mesh(op.p)?;
    let disc = EulerDisc::new(&mesh, &map, op, opts, &[], None)?;
    let mut field: EulerField = disc.interpolate(&|x| discontinuous_ic(x[0], x[1]));
    let h_min = EulerDisc::min_inradius(&mesh);
    let sigma = disc.max_wave_speed(&field)?;
    let dt0 = cfg.cfl * h_min / sigma;
    if !(dt0 > 0.0) || !(cfg.final_time > 0.0) {
        return Err(Error::InvalidArgument("CFL and final time must be positive".into()));
    }
    let steps = (cfg.final_time / dt0).ceil() as usize;
    let dt = cfg.final_time / steps as f64;
    let trace = implicit_midpoint_advance(&disc, &mut field, dt, steps, newton)?;
    Ok((trace, dt))
}
