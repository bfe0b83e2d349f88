//! Shared-node global numbering, element operators in physical coordinates,
//! assembled global operators and the element-loop contract.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{FaceLink, MetricData, NodeMetric, TriMesh, UnionFind};
use crate::tri_cubature::TriCubature;
use crate::tri_sbp::SbpTri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Vertex,
    Face,
    Interior,
}

/// Restriction operators stored as index arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalNumbering {
    pub n: usize,
    pub elem_to_global: Vec<Vec<usize>>,
    /// Class of each local node of the reference element.
    pub node_class: Vec<NodeClass>,
}

/// Local index on the partner face matching index `k` of a face with `n` nodes.
pub fn reversed_face_index(k: usize, n: usize) -> usize {
    match k {
        0 => 1,
        1 => 0,
        _ => n - 1 - (k - 2),
    }
}

pub fn build_global_numbering(mesh: &TriMesh, c: &TriCubature) -> Result<GlobalNumbering> {
    let n_k = c.n_k();
    let ne = mesh.n_elements();
    let mut node_class = vec![NodeClass::Interior; n_k];
    for g in 0..3 {
        for (k, &i) in c.face_node_ids[g].iter().enumerate() {
            node_class[i] = if k < 2 { NodeClass::Vertex } else { NodeClass::Face };
        }
    }
    let nf = c.face_node_ids[0].len();
    if c.face_node_ids.iter().any(|f| f.len() != nf) {
        return Err(Error::Mesh("faces carry different node counts".into()));
    }
    let mut uf = UnionFind::new(ne * n_k);
    for e in 0..ne {
        for g in 0..3 {
            if let FaceLink::Neighbor { elem, face, .. } = mesh.adjacency[e][g] {
                let a = &c.face_node_ids[g];
                let b = &c.face_node_ids[face];
                for k in 0..nf {
                    uf.union(e * n_k + a[k], elem * n_k + b[reversed_face_index(k, nf)]);
                }
            }
        }
    }
    let mut id = vec![usize::MAX; ne * n_k];
    let mut n = 0;
    let mut elem_to_global = Vec::with_capacity(ne);
    for e in 0..ne {
        let mut row = Vec::with_capacity(n_k);
        for i in 0..n_k {
            let r = uf.find(e * n_k + i);
            if id[r] == usize::MAX {
                id[r] = n;
                n += 1;
            }
            row.push(id[r]);
        }
        elem_to_global.push(row);
    }
    Ok(GlobalNumbering { n, elem_to_global, node_class })
}

impl GlobalNumbering {
    pub fn n_elements(&self) -> usize {
        self.elem_to_global.len()
    }

    /// Number of element-local copies of each global node.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.n];
        for row in &self.elem_to_global {
            for &g in row {
                m[g] += 1;
            }
        }
        m
    }

    /// Gathers the `ncomp` components of element `e` (node-major layout).
    pub fn gather(&self, e: usize, ncomp: usize, u: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for &g in &self.elem_to_global[e] {
            out.extend_from_slice(&u[g * ncomp..(g + 1) * ncomp]);
        }
    }

    pub fn scatter_add(&self, e: usize, ncomp: usize, local: &[f64], out: &mut [f64]) {
        for (i, &g) in self.elem_to_global[e].iter().enumerate() {
            for c in 0..ncomp {
                out[g * ncomp + c] += local[i * ncomp + c];
            }
        }
    }
}

/// Gathers, applies `kernel` and scatter-adds element by element in ascending order.
pub fn element_loop_apply<F>(num: &GlobalNumbering, ncomp: usize, u: &[f64], mut kernel: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> Result<()>,
{
    if u.len() != num.n * ncomp {
        return invalid(format!("global vector has length {}, expected {}", u.len(), num.n * ncomp));
    }
    let mut out = vec![0.0; u.len()];
    let mut local = Vec::new();
    let mut res = Vec::new();
    for e in 0..num.n_elements() {
        num.gather(e, ncomp, u, &mut local);
        res.clear();
        res.resize(local.len(), 0.0);
        kernel(e, &local, &mut res)?;
        num.scatter_add(e, ncomp, &res, &mut out);
    }
    Ok(out)
}

/// Element operators in physical coordinates.
///
/// `S_x = 1/2 sum_j (Lambda_j S_j + S_j Lambda_j)` with `Lambda_xi = diag(y_eta)`,
/// `Lambda_eta = diag(-y_xi)` (and the analogous `y` metrics); `E_x` collects the
/// face quadrature weighted by the scaled normal at each face node.
#[derive(Debug, Clone)]
pub struct ElementOps {
    /// `J H` at each node.
    pub jh: Vec<f64>,
    pub s: [DMatrix<f64>; 2],
    pub e: [Vec<f64>; 2],
}

impl ElementOps {
    pub fn q(&self, dir: usize) -> DMatrix<f64> {
        let mut q = self.s[dir].clone();
        for i in 0..self.jh.len() {
            q[(i, i)] += 0.5 * self.e[dir][i];
        }
        q
    }
}

/// Contravariant metric entries `Lambda[phys_dir][ref_dir]` at a node.
pub fn contravariant(m: &NodeMetric) -> [[f64; 2]; 2] {
    [[m.dy_deta, -m.dy_dxi], [-m.dx_deta, m.dx_dxi]]
}

/// Scaled outward normal `(n_x, n_y) dGamma / dGamma_ref` at a node of reference face `g`.
pub fn scaled_normal(op: &SbpTri, m: &NodeMetric, g: usize) -> [f64; 2] {
    let lam = contravariant(m);
    let n = op.normals[g];
    [lam[0][0] * n[0] + lam[0][1] * n[1], lam[1][0] * n[0] + lam[1][1] * n[1]]
}

pub fn element_operators(op: &SbpTri, metrics: &[NodeMetric]) -> ElementOps {
    let n = op.n_k();
    let jh = metrics.iter().zip(&op.h).map(|(m, h)| m.jac * h).collect();
    let lam: Vec<[[f64; 2]; 2]> = metrics.iter().map(contravariant).collect();
    let mut s = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (d, sd) in s.iter_mut().enumerate() {
        for j in 0..2 {
            let sr = &op.s[j];
            for r in 0..n {
                for c in 0..n {
                    sd[(r, c)] += 0.5 * (lam[r][d][j] + lam[c][d][j]) * sr[(r, c)];
                }
            }
        }
    }
    let mut e = [vec![0.0; n], vec![0.0; n]];
    for g in 0..3 {
        for (k, &i) in op.face_ids(g).iter().enumerate() {
            let sn = scaled_normal(op, &metrics[i], g);
            for d in 0..2 {
                e[d][i] += op.face_rules[g].b[k] * sn[d];
            }
        }
    }
    ElementOps { jh, s, e }
}

pub fn all_element_operators(op: &SbpTri, md: &MetricData) -> Vec<ElementOps> {
    md.nodes.iter().map(|m| element_operators(op, m)).collect()
}

/// Assembled global norm and (optionally) first-derivative operators.
#[derive(Debug, Clone)]
pub struct GlobalOperator {
    pub h: Vec<f64>,
    pub q: Option<[CsrMatrix; 2]>,
}

impl GlobalOperator {
    /// `D = H^{-1} Q` for direction `dir`.
    pub fn d(&self, dir: usize) -> Option<CsrMatrix> {
        let q = self.q.as_ref()?[dir].clone();
        let mut d = q;
        for r in 0..d.nrows {
            for k in d.row_ptr[r]..d.row_ptr[r + 1] {
                d.values[k] /= self.h[r];
            }
        }
        Some(d)
    }
}

pub fn assemble_norm(num: &GlobalNumbering, elems: &[ElementOps]) -> Result<Vec<f64>> {
    let mut h = vec![0.0; num.n];
    for (e, el) in elems.iter().enumerate() {
        for (i, &g) in num.elem_to_global[e].iter().enumerate() {
            h[g] += el.jh[i];
        }
    }
    if let Some(g) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Inconsistent(format!("global norm entry {g} is not positive")));
    }
    Ok(h)
}

/// Sparse `sum_k R_k^T B_k R_k` from per-element dense blocks.
pub fn assemble_blocks(num: &GlobalNumbering, blocks: &[DMatrix<f64>]) -> CsrMatrix {
    let mut trip = Vec::new();
    for (e, b) in blocks.iter().enumerate() {
        let ids = &num.elem_to_global[e];
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                let v = b[(r, c)];
                if v != 0.0 {
                    trip.push((ids[r], ids[c], v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(num.n, num.n, &trip)
}

pub fn assemble_global(num: &GlobalNumbering, elems: &[ElementOps], with_q: bool) -> Result<GlobalOperator> {
    let h = assemble_norm(num, elems)?;
    let q = if with_q {
        let qx: Vec<DMatrix<f64>> = elems.iter().map(|e| e.q(0)).collect();
        let qy: Vec<DMatrix<f64>> = elems.iter().map(|e| e.q(1)).collect();
        Some([assemble_blocks(num, &qx), assemble_blocks(num, &qy)])
    } else {
        None
    };
    Ok(GlobalOperator { h, q })
}

/// Physical coordinates of each global node (first element occurrence).
pub fn global_coordinates(num: &GlobalNumbering, md: &MetricData) -> Vec<[f64; 2]> {
    let mut x = vec![[f64::NAN; 2]; num.n];
    for (e, row) in num.elem_to_global.iter().enumerate() {
        for (i, &g) in row.iter().enumerate() {
            if x[g][0].is_nan() {
                x[g] = md.nodes[e][i].x;
            }
        }
    }
    x
}
