//! Constant-coefficient linear advection on periodic affine meshes.

use nalgebra::DMatrix;

use crate::assembly::{
    all_element_operators, assemble_blocks, assemble_norm, build_global_numbering, global_coordinates, GlobalNumbering,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{complex_eigenvalues, CsrMatrix};
use crate::lps::projector_exact;
use crate::mesh::{compute_metrics, kernel_square_mesh, Kernel, LagrangeMap, MetricData, TriMesh};
use crate::study::{fill_rates, ConvergenceRow};
use crate::tri_sbp::SbpTri;

/// Smooth bell of height 2 centred in the unit square, equal to 1 outside radius 1/2.
pub fn bell_ic(x: f64, y: f64) -> f64 {
    let rho2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
    if rho2 < 0.25 {
        1.0 - (4.0 * rho2 - 1.0).powi(5)
    } else {
        1.0
    }
}

pub struct AdvectionProblem {
    pub lambda: [f64; 2],
    pub lps_enabled: bool,
    pub numbering: GlobalNumbering,
    pub metrics: MetricData,
    pub h: Vec<f64>,
    /// Reference-space advection speed per element.
    pub lps_scale: Vec<f64>,
    /// Per-element `lambda_x Q_x + lambda_y Q_y (+ P^T H A P)`.
    blocks: Vec<DMatrix<f64>>,
}

impl AdvectionProblem {
    pub fn new(mesh: &TriMesh, op: &SbpTri, lambda: [f64; 2], lps_enabled: bool) -> Result<Self> {
        let numbering = build_global_numbering(mesh, &op.cubature)?;
        let metrics = compute_metrics(&LagrangeMap::affine(mesh, 1), op)?;
        let elems = all_element_operators(op, &metrics);
        let h = assemble_norm(&numbering, &elems)?;
        let proj = projector_exact(&op.basis.l, &op.h)?;
        let n = op.n_k();
        let mut lps_scale = Vec::with_capacity(elems.len());
        let mut blocks = Vec::with_capacity(elems.len());
        for (e, el) in elems.iter().enumerate() {
            // affine elements: metrics are constant, use the first node
            let m = &metrics.nodes[e][0];
            let lxi = lambda[0] * m.dy_deta - lambda[1] * m.dx_deta;
            let leta = -lambda[0] * m.dy_dxi + lambda[1] * m.dx_dxi;
            let a = lxi.hypot(leta);
            lps_scale.push(a);
            let mut b = el.q(0) * lambda[0] + el.q(1) * lambda[1];
            if lps_enabled {
                let ha = DMatrix::from_fn(n, n, |i, j| if i == j { op.h[i] * a } else { 0.0 });
                b += proj.p.transpose() * ha * &proj.p;
            }
            blocks.push(b);
        }
        Ok(AdvectionProblem { lambda, lps_enabled, numbering, metrics, h, lps_scale, blocks })
    }

    pub fn n_dof(&self) -> usize {
        self.numbering.n
    }

    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let num = &self.numbering;
        let mut out = vec![0.0; num.n];
        for (e, b) in self.blocks.iter().enumerate() {
            let ids = &num.elem_to_global[e];
            for r in 0..ids.len() {
                let mut acc = 0.0;
                for c in 0..ids.len() {
                    acc += b[(r, c)] * u[ids[c]];
                }
                out[ids[r]] -= acc;
            }
        }
        for (o, h) in out.iter_mut().zip(&self.h) {
            *o /= h;
        }
        out
    }

    /// Sparse spatial operator `-H^{-1} sum R^T B R`.
    pub fn operator(&self) -> CsrMatrix {
        let mut a = assemble_blocks(&self.numbering, &self.blocks);
        for r in 0..a.nrows {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                a.values[k] = -a.values[k] / self.h[r];
            }
        }
        a
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.h).map(|(v, h)| h * v * v).sum()
    }

    /// `sqrt(sum_k (u_k - u*_k)^T J_k H_k (u_k - u*_k))` computed element by element.
    pub fn l2_error(&self, op: &SbpTri, u: &[f64], exact: &dyn Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (e, ids) in self.numbering.elem_to_global.iter().enumerate() {
            for (i, &g) in ids.iter().enumerate() {
                let m = &self.metrics.nodes[e][i];
                // each element-local copy carries its own share J_k H_k of the node weight
                let d = u[g] - exact(m.x[0], m.x[1]);
                s += m.jac * op.h[i] * d * d;
            }
        }
        s.sqrt()
    }

    pub fn interpolate(&self, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        global_coordinates(&self.numbering, &self.metrics).iter().map(|x| f(x[0], x[1])).collect()
    }
}

pub struct ScalarField {
    pub u: Vec<f64>,
    pub time: f64,
}

/// Classical four-stage Runge-Kutta for `du/dt = f(u)`.
pub fn rk4_advance(f: &dyn Fn(&[f64]) -> Vec<f64>, field: &mut ScalarField, dt: f64, steps: usize) -> Result<()> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let n = field.u.len();
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let u = &field.u;
        let k1 = f(u);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        let k2 = f(&tmp);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        let k3 = f(&tmp);
        for i in 0..n {
            tmp[i] = u[i] + dt * k3[i];
        }
        let k4 = f(&tmp);
        for i in 0..n {
            field.u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        field.time += dt;
        if field.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: step + 1, time: field.time });
        }
    }
    Ok(())
}

/// Complex eigenvalues of the dense spatial operator and its spectral radius.
pub fn operator_spectrum(problem: &AdvectionProblem, max_size: usize) -> Result<(Vec<(f64, f64)>, f64)> {
    let n = problem.n_dof();
    if n > max_size {
        return invalid(format!("{n} unknowns exceed the dense eigensolver cap of {max_size}"));
    }
    let ev = complex_eigenvalues(&problem.operator().to_dense())?;
    let rho = ev.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max);
    Ok((ev, rho))
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub levels: Vec<usize>,
    pub lps_enabled: bool,
    pub lambda: [f64; 2],
    pub final_time: f64,
    /// `dt = cfl / rho`.
    pub cfl: f64,
    pub kernel: Kernel,
    /// Refinement factor of the spectral radius per level.
    pub radius_growth: f64,
    pub max_dense: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            levels: vec![1, 2, 3],
            lps_enabled: true,
            lambda: [1.0, 1.0],
            final_time: 1.0,
            cfl: 1.0,
            kernel: Kernel::uniform(),
            radius_growth: 3.0,
            max_dense: 4000,
        }
    }
}

/// Exact solution of the bell problem at time `t` (periodic translation).
pub fn bell_exact(lambda: [f64; 2], t: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| bell_ic((x - lambda[0] * t).rem_euclid(1.0), (y - lambda[1] * t).rem_euclid(1.0))
}

/// Runs the bell problem on each level of the kernel-refined periodic square.
///
/// The spectral radius is measured on the first level and scaled by
/// `radius_growth` per additional level.
pub fn convergence_study(op: &SbpTri, cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.levels.len() < 2 {
        return invalid("a convergence study needs at least two levels");
    }
    let mut rows = Vec::new();
    let mut rho0 = None;
    let lev0 = cfg.levels[0];
    for &lev in &cfg.levels {
        let mesh = kernel_square_mesh(lev, cfg.kernel)?;
        let prob = AdvectionProblem::new(&mesh, op, cfg.lambda, cfg.lps_enabled)?;
        if rho0.is_none() {
            rho0 = Some(operator_spectrum(&prob, cfg.max_dense)?.1);
        }
        let rho = rho0.unwrap() * cfg.radius_growth.powi((lev - lev0) as i32);
        let steps = (cfg.final_time * rho / cfg.cfl).ceil().max(1.0) as usize;
        let dt = cfg.final_time / steps as f64;
        let mut field = ScalarField { u: prob.interpolate(&bell_ic), time: 0.0 };
        rk4_advance(&|u| prob.rhs(u), &mut field, dt, steps)?;
        let exact = bell_exact(cfg.lambda, field.time);
        let err = prob.l2_error(op, &field.u, &exact);
        rows.push(ConvergenceRow {
            lev,
            h_ref: 3f64.powi(-(lev as i32)),
            n_dof: prob.n_dof(),
            dt,
            l2_error: err,
            rate: None,
        });
    }
    fill_rates(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tri_sbp::build_sbp_tri;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn bell_values() {
        assert_eq!(bell_ic(0.9, 0.9), 1.0);
        assert_eq!(bell_ic(0.5, 0.5), 2.0);
        assert_abs_diff_eq!(bell_ic(0.5 + 0.5 - 1e-9, 0.5), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rk4_scalar_decay() {
        let mut f = ScalarField { u: vec![1.0], time: 0.0 };
        let dt: f64 = 0.1;
        rk4_advance(&|u| vec![-u[0]], &mut f, dt, 1).unwrap();
        let taylor = 1.0 - dt + dt * dt / 2.0 - dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
        assert_abs_diff_eq!(f.u[0], taylor, epsilon = 1e-15);
        assert!((f.u[0] - (-dt).exp()).abs() < dt.powi(5));
        let mut g = ScalarField { u: vec![3.0, 4.0], time: 0.0 };
        rk4_advance(&|u| vec![0.0; u.len()], &mut g, 0.5, 3).unwrap();
        assert_eq!(g.u, vec![3.0, 4.0]);
        assert!(rk4_advance(&|u| u.to_vec(), &mut g, 0.0, 1).is_err());
    }

    #[test]
    fn blow_up_detected() {
        let mut f = ScalarField { u: vec![1.0], time: 0.0 };
        let err = rk4_advance(&|u| vec![u[0] * u[0] * 1e200], &mut f, 1.0, 5).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn energy_identity_and_dissipation() {
        let op = build_sbp_tri(2).unwrap();
        let mesh = kernel_square_mesh(1, Kernel::perturbed()).unwrap();
        let off = AdvectionProblem::new(&mesh, &op, [1.0, 0.7], false).unwrap();
        let on = AdvectionProblem::new(&mesh, &op, [1.0, 0.7], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let u: Vec<f64> = (0..off.n_dof()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = off.energy(&u);
            let r0 = off.rhs(&u);
            let r1 = on.rhs(&u);
            let d0: f64 = u.iter().zip(&r0).zip(&off.h).map(|((a, b), h)| a * b * h).sum();
            let d1: f64 = u.iter().zip(&r1).zip(&on.h).map(|((a, b), h)| a * b * h).sum();
            assert!(d0.abs() <= 1e-12 * e);
            assert!(d1 <= 1e-12 * e);
            assert!(d1 < 0.0);
        }
        let c = vec![2.5; off.n_dof()];
        assert!(on.rhs(&c).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lps_vanishes_on_polynomials() {
        let op = build_sbp_tri(2).unwrap();
        let (mesh, _) = crate::mesh::structured_mesh(2, 2, &|x| x, false, false, ["b", "r", "t", "l"], "square").unwrap();
        let off = AdvectionProblem::new(&mesh, &op, [1.0, 1.0], false).unwrap();
        let on = AdvectionProblem::new(&mesh, &op, [1.0, 1.0], true).unwrap();
        let u = off.interpolate(&|x, y| 1.0 + x * y - 2.0 * y * y);
        let d = off.rhs(&u).iter().zip(on.rhs(&u)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-11);
    }

    #[test]
    fn spectrum_structure() {
        let op = build_sbp_tri(1).unwrap();
        let mesh = kernel_square_mesh(1, Kernel::uniform()).unwrap();
        let off = AdvectionProblem::new(&mesh, &op, [1.0, 1.0], false).unwrap();
        let (ev, rho) = operator_spectrum(&off, 2000).unwrap();
        assert_eq!(ev.len(), off.n_dof());
        assert!(ev.iter().all(|(re, _)| re.abs() <= 1e-8 * rho));
        let on = AdvectionProblem::new(&mesh, &op, [1.0, 1.0], true).unwrap();
        let (ev, rho) = operator_spectrum(&on, 2000).unwrap();
        assert!(ev.iter().all(|(re, _)| *re <= 1e-10 * rho));
        assert!(operator_spectrum(&on, 10).is_err());
    }

    #[test]
    fn l2_error_of_constant_offset() {
        let op = build_sbp_tri(2).unwrap();
        let mesh = kernel_square_mesh(1, Kernel::uniform()).unwrap();
        let prob = AdvectionProblem::new(&mesh, &op, [1.0, 1.0], true).unwrap();
        // periodic profile, so every element copy of a shared node sees the same value
        let f = |x: f64, y: f64| (2.0 * PI * x).sin() * (2.0 * PI * y).cos();
        let u = prob.interpolate(&|x, y| f(x, y) + 0.25);
        assert_abs_diff_eq!(prob.l2_error(&op, &u, &f), 0.25, epsilon = 1e-12);
        let v = prob.interpolate(&bell_ic);
        // exact = numerical, evaluated at each element's own coordinates
        assert!(prob.l2_error(&op, &v, &bell_ic) < 1e-12);
    }
}
