//! Hadamard-form entropy-conservative discretization with entropy-variable LPS.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::thermo::{roe_flux, wall_flux, EulerThermo, Primitive, State, TwoPointFlux};
use crate::assembly::{
    all_element_operators, assemble_norm, build_global_numbering, global_coordinates, scaled_normal, GlobalNumbering,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;
use crate::lps::projector_exact;
use crate::mesh::{compute_metrics, FaceLink, LagrangeMap, MetricData, TriMesh};
use crate::tri_sbp::SbpTri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    /// Pressure-only wall flux.
    Slip,
    /// Roe upwind flux against a prescribed exterior state.
    Characteristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerOptions {
    pub thermo: EulerThermo,
    pub flux: TwoPointFlux,
    pub lps_enabled: bool,
}

impl Default for EulerOptions {
    fn default() -> Self {
        EulerOptions { thermo: EulerThermo::default(), flux: TwoPointFlux::IsmailRoe, lps_enabled: true }
    }
}

/// Conservative variables at every global node plus the current time.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerField {
    pub u: Vec<f64>,
    pub time: f64,
}

impl EulerField {
    pub fn n_nodes(&self) -> usize {
        self.u.len() / 4
    }

    pub fn state(&self, i: usize) -> State {
        [self.u[4 * i], self.u[4 * i + 1], self.u[4 * i + 2], self.u[4 * i + 3]]
    }

    pub fn entropy_vars(&self, th: &EulerThermo) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.u.len());
        for i in 0..self.n_nodes() {
            out.extend_from_slice(&th.entropy_vars(&self.state(i))?);
        }
        Ok(out)
    }

    /// Nodal entropy and potential fluxes.
    pub fn entropy_and_potentials(&self, th: &EulerThermo) -> Result<Vec<(f64, f64, f64)>> {
        (0..self.n_nodes()).map(|i| th.entropy_and_potentials(&self.state(i))).collect()
    }
}

#[derive(Debug, Clone)]
struct BoundaryNode {
    node: usize,
    /// Face weight times scaled outward normal.
    n: [f64; 2],
    kind: BcKind,
    exterior: Option<State>,
}

/// Per-element operator data for the Euler residual.
pub struct EulerDisc {
    pub op: SbpTri,
    pub opts: EulerOptions,
    pub numbering: GlobalNumbering,
    pub metrics: MetricData,
    pub h: Vec<f64>,
    pub coords: Vec<[f64; 2]>,
    /// `(i, j, 2 (S_x, S_y)_ij)` for `i < j`.
    pairs: Vec<Vec<(usize, usize, [f64; 2])>>,
    boundary: Vec<Vec<BoundaryNode>>,
    proj: DMatrix<f64>,
    /// `(element, face, tag)` of boundary faces.
    pub boundary_faces: Vec<(usize, usize, String)>,
}

impl EulerDisc {
    /// `bcs` maps boundary tags to conditions; `exterior` supplies the state for
    /// characteristic faces.
    pub fn new(
        mesh: &TriMesh,
        map: &LagrangeMap,
        op: &SbpTri,
        opts: EulerOptions,
        bcs: &[(&str, BcKind)],
        exterior: Option<&dyn Fn([f64; 2]) -> State>,
    ) -> Result<Self> {
        let numbering = build_global_numbering(mesh, &op.cubature)?;
        let metrics = compute_metrics(map, op)?;
        let elems = all_element_operators(op, &metrics);
        let h = assemble_norm(&numbering, &elems)?;
        let coords = global_coordinates(&numbering, &metrics);
        let n = op.n_k();
        let mut pairs = Vec::with_capacity(elems.len());
        for el in &elems {
            let mut v = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    let sx = el.s[0][(i, j)];
                    let sy = el.s[1][(i, j)];
                    if sx != 0.0 || sy != 0.0 {
                        v.push((i, j, [2.0 * sx, 2.0 * sy]));
                    }
                }
            }
            pairs.push(v);
        }
        let mut boundary = vec![Vec::new(); elems.len()];
        let mut boundary_faces = Vec::new();
        for (e, adj) in mesh.adjacency.iter().enumerate() {
            for (g, link) in adj.iter().enumerate() {
                let FaceLink::Boundary(tag) = link else { continue };
                let Some(&(_, kind)) = bcs.iter().find(|(t, _)| t == tag) else {
                    return Err(Error::Mesh(format!("no boundary condition for tag `{tag}`")));
                };
                if kind == BcKind::Characteristic && exterior.is_none() {
                    return invalid("characteristic boundaries need an exterior state");
                }
                boundary_faces.push((e, g, tag.clone()));
                for (k, &i) in op.face_ids(g).iter().enumerate() {
                    let m = &metrics.nodes[e][i];
                    let sn = scaled_normal(op, m, g);
                    let b = op.face_rules[g].b[k];
                    let ext = match kind {
                        BcKind::Characteristic => Some(exterior.unwrap()(m.x)),
                        BcKind::Slip => None,
                    };
                    boundary[e].push(BoundaryNode { node: i, n: [b * sn[0], b * sn[1]], kind, exterior: ext });
                }
            }
        }
        let proj = projector_exact(&op.basis.l, &op.h)?.p;
        Ok(EulerDisc { op: op.clone(), opts, numbering, metrics, h, coords, pairs, boundary, proj, boundary_faces })
    }

    pub fn n_nodes(&self) -> usize {
        self.numbering.n
    }

    pub fn interpolate(&self, f: &dyn Fn([f64; 2]) -> State) -> EulerField {
        let mut u = Vec::with_capacity(4 * self.n_nodes());
        for x in &self.coords {
            u.extend_from_slice(&f(*x));
        }
        EulerField { u, time: 0.0 }
    }

    fn primitives(&self, e: usize, local: &[f64]) -> Result<Vec<Primitive>> {
        let th = &self.opts.thermo;
        (0..local.len() / 4)
            .map(|i| th.primitive_at(&[local[4 * i], local[4 * i + 1], local[4 * i + 2], local[4 * i + 3]], e, i))
            .collect()
    }

    /// Element contribution `R_k^T r_k`: volume flux differencing and boundary fluxes,
    /// plus the LPS term when `with_lps`.
    pub fn element_residual(&self, e: usize, local: &[f64], out: &mut [f64], with_ec: bool, with_lps: bool) -> Result<()> {
        let th = &self.opts.thermo;
        let prim = self.primitives(e, local)?;
        if with_ec {
            for &(i, j, n) in &self.pairs[e] {
                let f = self.opts.flux.eval(th, &prim[i], &prim[j], n);
                for c in 0..4 {
                    out[4 * i + c] += f[c];
                    out[4 * j + c] -= f[c];
                }
            }
            for bn in &self.boundary[e] {
                let i = bn.node;
                let q = [local[4 * i], local[4 * i + 1], local[4 * i + 2], local[4 * i + 3]];
                let f = match bn.kind {
                    BcKind::Slip => wall_flux(th, &q, bn.n)?,
                    BcKind::Characteristic => roe_flux(th, &q, bn.exterior.as_ref().unwrap(), bn.n)?,
                };
                for c in 0..4 {
                    out[4 * i + c] += f[c];
                }
            }
        }
        if with_lps {
            self.lps_residual(e, &prim, out);
        }
        Ok(())
    }

    /// `P^T H A P w` with `A_i = (sigma_xi + sigma_eta) / 2 dU/dW` at each node.
    fn lps_residual(&self, e: usize, prim: &[Primitive], out: &mut [f64]) {
        let th = &self.opts.thermo;
        let n = prim.len();
        let w: Vec<State> = prim.iter().map(|p| th.entropy_vars_prim(p)).collect();
        let p = &self.proj;
        let mut t = vec![[0.0; 4]; n];
        for i in 0..n {
            let mut v = [0.0; 4];
            for j in 0..n {
                let pij = p[(i, j)];
                for c in 0..4 {
                    v[c] += pij * w[j][c];
                }
            }
            let m = &self.metrics.nodes[e][i];
            let sigma = 0.5 * (th.spectral_radius(&prim[i], m.j_grad_xi()) + th.spectral_radius(&prim[i], m.j_grad_eta()));
            let a = th.dudw_prim(&prim[i]);
            let scale = self.op.h[i] * sigma;
            for r in 0..4 {
                t[i][r] = scale * (0..4).map(|c| a[r][c] * v[c]).sum::<f64>();
            }
        }
        for j in 0..n {
            for i in 0..n {
                let pij = p[(i, j)];
                for c in 0..4 {
                    out[4 * j + c] += pij * t[i][c];
                }
            }
        }
    }

    /// Nodal `(sigma_xi, sigma_eta)` of a state at element `e`, node `i`.
    pub fn wave_speeds(&self, e: usize, i: usize, q: &State) -> Result<(f64, f64)> {
        let th = &self.opts.thermo;
        let w = th.primitive_at(q, e, i)?;
        let m = &self.metrics.nodes[e][i];
        Ok((th.spectral_radius(&w, m.j_grad_xi()), th.spectral_radius(&w, m.j_grad_eta())))
    }

    fn assemble_residual(&self, u: &[f64], with_ec: bool, with_lps: bool) -> Result<Vec<f64>> {
        if u.len() != 4 * self.n_nodes() {
            return invalid(format!("state has length {}, expected {}", u.len(), 4 * self.n_nodes()));
        }
        let mut out = vec![0.0; u.len()];
        let mut local = Vec::new();
        for e in 0..self.numbering.n_elements() {
            self.numbering.gather(e, 4, u, &mut local);
            let mut r = vec![0.0; local.len()];
            self.element_residual(e, &local, &mut r, with_ec, with_lps)?;
            self.numbering.scatter_add(e, 4, &r, &mut out);
        }
        Ok(out)
    }

    /// Spatial residual `r` with `dU/dt = -H^{-1} r`; includes LPS when enabled.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.assemble_residual(u, true, self.opts.lps_enabled)
    }

    fn scale_by_h(&self, mut r: Vec<f64>) -> Vec<f64> {
        for (i, v) in r.iter_mut().enumerate() {
            *v = -*v / self.h[i / 4];
        }
        r
    }

    /// Entropy-conservative right-hand side.
    pub fn rhs_ec(&self, field: &EulerField) -> Result<Vec<f64>> {
        Ok(self.scale_by_h(self.assemble_residual(&field.u, true, false)?))
    }

    /// LPS contribution to the right-hand side.
    pub fn rhs_lps(&self, field: &EulerField) -> Result<Vec<f64>> {
        Ok(self.scale_by_h(self.assemble_residual(&field.u, false, true)?))
    }

    /// Full right-hand side (EC plus LPS when enabled).
    pub fn rhs(&self, field: &EulerField) -> Result<Vec<f64>> {
        Ok(self.scale_by_h(self.residual(&field.u)?))
    }

    /// `W^T H v` for a global vector `v`.
    pub fn entropy_product(&self, field: &EulerField, v: &[f64]) -> Result<f64> {
        let w = field.entropy_vars(&self.opts.thermo)?;
        Ok(w.iter().zip(v).enumerate().map(|(k, (a, b))| self.h[k / 4] * a * b).sum())
    }

    /// Nodal entropy `s_h`.
    pub fn nodal_entropy(&self, field: &EulerField) -> Result<Vec<f64>> {
        let th = &self.opts.thermo;
        (0..self.n_nodes()).map(|i| th.entropy(&field.state(i))).collect()
    }

    /// `1^T H s_h`.
    pub fn total_entropy(&self, field: &EulerField) -> Result<f64> {
        Ok(self.nodal_entropy(field)?.iter().zip(&self.h).map(|(s, h)| h * s).sum())
    }

    /// Sparse Jacobian of [`Self::residual`] from central differences of element blocks.
    pub fn jacobian(&self, u: &[f64]) -> Result<CsrMatrix> {
        let nk = self.op.n_k();
        let m = 4 * nk;
        let with_lps = self.opts.lps_enabled;
        let mut trip = Vec::with_capacity(self.numbering.n_elements() * m * m);
        let mut local = Vec::new();
        let mut rp = vec![0.0; m];
        let mut rm = vec![0.0; m];
        for e in 0..self.numbering.n_elements() {
            self.numbering.gather(e, 4, u, &mut local);
            let ids = &self.numbering.elem_to_global[e];
            for col in 0..m {
                let base = local[col];
                let step = f64::EPSILON.cbrt() * base.abs().max(1.0);
                local[col] = base + step;
                rp.iter_mut().for_each(|v| *v = 0.0);
                self.element_residual(e, &local, &mut rp, true, with_lps)?;
                local[col] = base - step;
                rm.iter_mut().for_each(|v| *v = 0.0);
                self.element_residual(e, &local, &mut rm, true, with_lps)?;
                local[col] = base;
                let gc = 4 * ids[col / 4] + col % 4;
                for row in 0..m {
                    let d = (rp[row] - rm[row]) / (2.0 * step);
                    if d != 0.0 {
                        trip.push((4 * ids[row / 4] + row % 4, gc, d));
                    }
                }
            }
        }
        let n = 4 * self.n_nodes();
        Ok(CsrMatrix::from_triplets(n, n, &trip))
    }

    /// `sqrt(sum_k (rho - rho*)^T J_k H_k (rho - rho*))` over elements.
    pub fn density_l2_error(&self, field: &EulerField, exact: &dyn Fn([f64; 2]) -> State) -> f64 {
        let mut s = 0.0;
        for (e, ids) in self.numbering.elem_to_global.iter().enumerate() {
            for (i, &g) in ids.iter().enumerate() {
                let m = &self.metrics.nodes[e][i];
                let d = field.u[4 * g] - exact(m.x)[0];
                s += m.jac * self.op.h[i] * d * d;
            }
        }
        s.sqrt()
    }

    /// Pressure force `sum p n_x dGamma` over boundary faces with `tag`.
    pub fn pressure_force_x(&self, field: &EulerField, tag: &str) -> Result<f64> {
        let th = &self.opts.thermo;
        let mut f = 0.0;
        for (e, g, t) in &self.boundary_faces {
            if t != tag {
                continue;
            }
            for (k, &i) in self.op.face_ids(*g).iter().enumerate() {
                let m = &self.metrics.nodes[*e][i];
                let sn = scaled_normal(&self.op, m, *g);
                let q = field.state(self.numbering.elem_to_global[*e][i]);
                f += self.op.face_rules[*g].b[k] * th.primitive_at(&q, *e, i)?.p * sn[0];
            }
        }
        Ok(f)
    }

    /// Smallest inradius over the straight-sided elements.
    pub fn min_inradius(mesh: &TriMesh) -> f64 {
        (0..mesh.n_elements())
            .map(|e| {
                let v = mesh.element_vertices(e);
                let len = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
                let per = len(v[0], v[1]) + len(v[1], v[2]) + len(v[2], v[0]);
                2.0 * mesh.signed_area(e).abs() / per
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest physical wave speed `|u| + a` over nodes.
    pub fn max_wave_speed(&self, field: &EulerField) -> Result<f64> {
        let th = &self.opts.thermo;
        let mut s = 0.0f64;
        for i in 0..self.n_nodes() {
            let w = th.primitive(&field.state(i))?;
            s = s.max(w.u.hypot(w.v) + th.sound_speed(&w));
        }
        Ok(s)
    }
}
