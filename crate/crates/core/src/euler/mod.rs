//! Two-dimensional Euler equations: entropy-conservative flux differencing,
//! entropy-stable LPS, boundary conditions, Newton and implicit midpoint solvers.

pub mod cases;
pub mod disc;
pub mod newton;
pub mod thermo;

pub use cases::{
    discontinuous_ic, entropy_trace, periodic_disc, vortex_disc, vortex_exact, vortex_exact_drag, vortex_state, vortex_study,
    TraceConfig,
};
pub use disc::{BcKind, EulerDisc, EulerField, EulerOptions};
pub use newton::{implicit_midpoint_advance, midpoint_step, newton_solve, solve_steady, NewtonOptions, NewtonReport};
pub use thermo::{log_mean, roe_flux, wall_flux, EulerThermo, Primitive, State, TwoPointFlux};

use rand::Rng;

/// Random admissible field: each node gets an independent state near a reference.
pub fn random_field<R: Rng>(disc: &EulerDisc, rng: &mut R) -> EulerField {
    let th = disc.opts.thermo;
    let mut u = Vec::with_capacity(4 * disc.n_nodes());
    for _ in 0..disc.n_nodes() {
        let w = Primitive {
            rho: rng.random_range(0.5..2.0),
            u: rng.random_range(-0.8..0.8),
            v: rng.random_range(-0.8..0.8),
            p: rng.random_range(0.5..2.0),
        };
        u.extend_from_slice(&th.conservative(&w));
    }
    EulerField { u, time: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{all_element_operators, build_global_numbering};
    use crate::linalg::CsrMatrix;
    use crate::mesh::{compute_metrics, structured_mesh, LagrangeMap};
    use crate::tri_sbp::build_sbp_tri;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts(lps: bool, flux: TwoPointFlux) -> EulerOptions {
        EulerOptions { thermo: EulerThermo::default(), flux, lps_enabled: lps }
    }

    #[test]
    fn entropy_conservation_and_stability_on_warped_mesh() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in 1..=2 {
            let op = build_sbp_tri(p).unwrap();
            for flux in [TwoPointFlux::IsmailRoe, TwoPointFlux::Chandrashekar] {
                let disc = periodic_disc(&op, opts(true, flux)).unwrap();
                for _ in 0..3 {
                    let f = random_field(&disc, &mut rng);
                    let ec = disc.rhs_ec(&f).unwrap();
                    let lps = disc.rhs_lps(&f).unwrap();
                    let w = f.entropy_vars(&disc.opts.thermo).unwrap();
                    let scale: f64 = w.iter().zip(&ec).enumerate().map(|(k, (a, b))| disc.h[k / 4] * (a * b).abs()).sum();
                    let d_ec = disc.entropy_product(&f, &ec).unwrap();
                    let d_lps = disc.entropy_product(&f, &lps).unwrap();
                    assert!(d_ec.abs() <= 1e-11 * scale, "p={p} {flux:?}: {d_ec:e} vs {scale:e}");
                    assert!(d_lps < 0.0);
                    assert!(d_ec + d_lps <= 1e-11 * scale);
                }
            }
        }
    }

    #[test]
    fn free_stream_preserved() {
        let th = EulerThermo::default();
        for p in 1..=3 {
            let op = build_sbp_tri(p).unwrap();
            let disc = periodic_disc(&op, opts(true, TwoPointFlux::IsmailRoe)).unwrap();
            let q = th.conservative(&Primitive { rho: 1.2, u: 0.4, v: -0.3, p: 0.9 });
            let f = disc.interpolate(&|_| q);
            let r = disc.rhs(&f).unwrap();
            let fx = th.flux(&q, [1.0, 0.0]).unwrap();
            let scale = fx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(rmax <= 1e-11 * scale, "p={p}: {rmax:e}");
        }
    }

    #[test]
    fn stencil_matches_dense_hadamard_oracle() {
        let op = build_sbp_tri(1).unwrap();
        let (mesh, _) = structured_mesh(1, 1, &|x| x, true, true, ["b", "r", "t", "l"], "torus").unwrap();
        let map = LagrangeMap::affine(&mesh, 2);
        let disc = EulerDisc::new(&mesh, &map, &op, opts(false, TwoPointFlux::IsmailRoe), &[], None).unwrap();
        let num = build_global_numbering(&mesh, &op.cubature).unwrap();
        let elems = all_element_operators(&op, &compute_metrics(&map, &op).unwrap());
        let n = num.n;
        let mut s: [DMatrix<f64>; 2] = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        for (e, el) in elems.iter().enumerate() {
            let ids = &num.elem_to_global[e];
            for d in 0..2 {
                for r in 0..ids.len() {
                    for c in 0..ids.len() {
                        s[d][(ids[r], ids[c])] += el.s[d][(r, c)];
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&disc, &mut rng);
        let th = disc.opts.thermo;
        let mut dense = vec![0.0; 4 * n];
        for i in 0..n {
            for j in 0..n {
                let fx = TwoPointFlux::IsmailRoe.eval_states(&th, &f.state(i), &f.state(j), [1.0, 0.0]).unwrap();
                let fy = TwoPointFlux::IsmailRoe.eval_states(&th, &f.state(i), &f.state(j), [0.0, 1.0]).unwrap();
                for c in 0..4 {
                    dense[4 * i + c] += 2.0 * (s[0][(i, j)] * fx[c] + s[1][(i, j)] * fy[c]);
                }
            }
        }
        let r = disc.residual(&f.u).unwrap();
        for k in 0..4 * n {
            assert_abs_diff_eq!(r[k], dense[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_directional_differences() {
        let op = build_sbp_tri(1).unwrap();
        let disc = vortex_disc(&op, 2, EulerOptions::default()).unwrap();
        let th = disc.opts.thermo;
        let u = disc.interpolate(&|x| vortex_state(&th, x)).u;
        let j = disc.jacobian(&u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jv = j.matvec(&v);
        let eps = 1e-7;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
        let rp = disc.residual(&up).unwrap();
        let rm = disc.residual(&um).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let err = fd.iter().zip(&jv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nrm = jv.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * nrm, "{err:e} vs {nrm:e}");
    }

    #[test]
    fn newton_solves_linear_problem_in_one_step() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0), (2, 0, -1.0), (2, 2, 2.0)]);
        let star = [1.0, -2.0, 0.5];
        let res = |u: &[f64]| -> crate::Result<Vec<f64>> {
            let d: Vec<f64> = u.iter().zip(&star).map(|(x, s)| x - s).collect();
            Ok(a.matvec(&d))
        };
        let jac = |_: &[f64]| -> crate::Result<CsrMatrix> { Ok(a.clone()) };
        let rep = newton_solve(&res, &jac, &[0.0; 3], &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        for k in 0..3 {
            assert_abs_diff_eq!(rep.u[k], star[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let jac = |_: &[f64]| -> crate::Result<CsrMatrix> { Ok(CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)])) };
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut u = vec![1.0];
            for _ in 0..steps {
                u = midpoint_step(&|u| Ok(u.to_vec()), &jac, &[1.0], &u, dt, &NewtonOptions::default()).unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let rate = (err(0.1) / err(0.05)).log2();
        assert!((rate - 2.0).abs() < 0.05, "{rate}");
        // one step equals the trapezoidal value for a linear problem
        let u = midpoint_step(&|u| Ok(u.to_vec()), &jac, &[1.0], &[1.0], 0.2, &NewtonOptions::default()).unwrap();
        assert_abs_diff_eq!(u[0], 0.9 / 1.1, epsilon = 1e-14);
    }

    #[test]
    fn vortex_values() {
        let th = EulerThermo::default();
        let w = vortex_exact(&th, 1.0).unwrap();
        assert_abs_diff_eq!(w.rho, 2.0, epsilon = 1e-15);
        let far = vortex_exact(&th, 1e8).unwrap();
        assert_abs_diff_eq!(far.rho, 2.0 * (1.0 + 0.2 * 0.9025f64).powf(2.5), epsilon = 1e-10);
        let s0 = th.physical_entropy(&w);
        for r in [1.3, 2.0, 2.9] {
            let wr = vortex_exact(&th, r).unwrap();
            assert_abs_diff_eq!(th.physical_entropy(&wr), s0, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(w.u / th.sound_speed(&w), 0.95, epsilon = 1e-14);
        assert!(vortex_exact(&th, 0.5).is_err());
        assert_abs_diff_eq!(vortex_exact_drag(&th), -w.p, epsilon = 1e-13);
    }

    #[test]
    fn drag_of_uniform_pressure() {
        let th = EulerThermo::default();
        let op = build_sbp_tri(2).unwrap();
        let disc = vortex_disc(&op, 3, EulerOptions::default()).unwrap();
        let q = th.conservative(&Primitive { rho: 1.0, u: 0.0, v: 0.0, p: 0.7 });
        let f = disc.interpolate(&|_| q);
        assert_abs_diff_eq!(disc.pressure_force_x(&f, "inner").unwrap(), -0.7, epsilon = 1e-9);
    }

    #[test]
    fn discontinuous_states() {
        assert_eq!(discontinuous_ic(0.5, 0.5), [1.1, 0.0, 0.0, 5.1]);
        assert_eq!(discontinuous_ic(0.1, 0.9), [1.0, 0.0, 0.0, 5.0]);
        let th = EulerThermo::default();
        assert!(th.primitive(&discontinuous_ic(0.5, 0.5)).unwrap().p > 0.0);
        assert_abs_diff_eq!(th.pressure(&discontinuous_ic(0.0, 0.0)), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lps_blocks_and_uniform_flow() {
        let th = EulerThermo::default();
        let op = build_sbp_tri(2).unwrap();
        let disc = periodic_disc(&op, opts(true, TwoPointFlux::IsmailRoe)).unwrap();
        let q = th.conservative(&Primitive { rho: 0.9, u: 0.1, v: 0.2, p: 1.1 });
        let f = disc.interpolate(&|_| q);
        assert!(disc.rhs_lps(&f).unwrap().iter().all(|v| v.abs() < 1e-12));
        let (sx, se) = disc.wave_speeds(0, 0, &q).unwrap();
        assert!(sx > 0.0 && se > 0.0);
    }

    #[test]
    fn vortex_newton_converges_on_coarse_mesh() {
        let op = build_sbp_tri(1).unwrap();
        let rows = vortex_study(&op, &[2, 4], EulerOptions::default(), &NewtonOptions::default()).unwrap();
        for r in &rows {
            assert!(r.residual <= 1e-10, "{r:?}");
        }
        assert!(rows[1].density_error < rows[0].density_error);
    }

    #[test]
    fn boundary_tags_must_be_known() {
        let op = build_sbp_tri(1).unwrap();
        let (mesh, map) = crate::mesh::quarter_annulus_mesh(2, 1).unwrap();
        assert!(EulerDisc::new(&mesh, &map, &op, EulerOptions::default(), &[("inner", BcKind::Slip)], None).is_err());
    }
}
