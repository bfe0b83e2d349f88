//! Diagonal-norm SBP operators on the reference triangle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::min_norm_solve;
use crate::ref1d::{legendre, lgl_rule};
use crate::tri_cubature::{build_tri_cubature, face_rule, ref_face_geometry, FaceRule, TriCubature, REF_VERTICES};

/// Orthonormal total-degree-`p` basis at the cubature nodes.
///
/// The basis is obtained from Legendre products `P_i(xi) P_j(eta)`, ordered by
/// total degree, and orthonormalized under the cubature inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct PkdBasis {
    pub p: usize,
    pub n_p: usize,
    pub l: DMatrix<f64>,
    pub lxi: DMatrix<f64>,
    pub leta: DMatrix<f64>,
    /// Maps seed-basis values to orthonormal-basis values.
    coef: DMatrix<f64>,
}

fn seed_indices(p: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::new();
    for d in 0..=p {
        for j in 0..=d {
            idx.push((d - j, j));
        }
    }
    idx
}

fn seed_row(p: usize, x: [f64; 2]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let px: Vec<(f64, f64)> = (0..=p).map(|k| legendre(k, x[0])).collect();
    let py: Vec<(f64, f64)> = (0..=p).map(|k| legendre(k, x[1])).collect();
    let mut v = Vec::new();
    let mut dx = Vec::new();
    let mut dy = Vec::new();
    for (i, j) in seed_indices(p) {
        v.push(px[i].0 * py[j].0);
        dx.push(px[i].1 * py[j].0);
        dy.push(px[i].0 * py[j].1);
    }
    (v, dx, dy)
}

impl PkdBasis {
    /// Basis values and derivatives at an arbitrary point.
    pub fn eval(&self, x: [f64; 2]) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (v, dx, dy) = seed_row(self.p, x);
        let tr = self.coef.transpose();
        (
            &tr * DVector::from_vec(v),
            &tr * DVector::from_vec(dx),
            &tr * DVector::from_vec(dy),
        )
    }
}

pub fn pkd_basis(c: &TriCubature, p: usize) -> Result<PkdBasis> {
    let n = c.n_k();
    let n_p = (p + 1) * (p + 2) / 2;
    if n < n_p {
        return invalid(format!("{n} nodes cannot carry a degree-{p} basis"));
    }
    let mut v = DMatrix::zeros(n, n_p);
    let mut vx = DMatrix::zeros(n, n_p);
    let mut vy = DMatrix::zeros(n, n_p);
    for (i, x) in c.nodes.iter().enumerate() {
        let (a, b, d) = seed_row(p, *x);
        for k in 0..n_p {
            v[(i, k)] = a[k];
            vx[(i, k)] = b[k];
            vy[(i, k)] = d[k];
        }
    }
    let hm = DMatrix::from_diagonal(&DVector::from_column_slice(&c.weights));
    // G = R^T R with R upper triangular; the orthonormal basis is V R^{-1}.
    // A second pass removes the rounding left by the first.
    let mut coef = DMatrix::identity(n_p, n_p);
    for _ in 0..2 {
        let l = &v * &coef;
        let chol = (l.transpose() * &hm * &l)
            .cholesky()
            .ok_or_else(|| Error::Inconsistent("basis Gram matrix is not positive definite".into()))?;
        let rinv = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Inconsistent("singular basis Gram factor".into()))?;
        coef = coef * rinv;
    }
    let l = &v * &coef;
    let err = (l.transpose() * &hm * &l - DMatrix::identity(n_p, n_p)).abs().max();
    if err > 1e-10 {
        return Err(Error::Inconsistent(format!("basis orthonormality error {err:e}")));
    }
    Ok(PkdBasis { p, n_p, lxi: &vx * &coef, leta: &vy * &coef, l, coef })
}

/// Diagonal boundary operator for direction `dir` (0 = xi, 1 = eta).
pub fn build_e(c: &TriCubature, dir: usize) -> Result<Vec<f64>> {
    if dir > 1 {
        return invalid("direction must be 0 (xi) or 1 (eta)");
    }
    let mut e = vec![0.0; c.n_k()];
    for g in 0..3 {
        let (nrm, len) = ref_face_geometry(g);
        let fr = face_rule(c.p, len)?;
        if fr.b.len() != c.face_node_ids[g].len() {
            return Err(Error::Inconsistent(format!("face {g} rule and node list differ in size")));
        }
        for (k, &i) in c.face_node_ids[g].iter().enumerate() {
            e[i] += nrm[dir] * fr.b[k];
        }
    }
    Ok(e)
}

/// Index of the unknown for the strictly lower entry `(i, j)`, `i > j`.
fn lower_index(i: usize, j: usize) -> usize {
    j + i * (i - 1) / 2
}

/// Constraint matrix of `S L = b` in terms of the strict lower triangle of skew `S`.
///
/// Row `r * n_p + c` holds equation `(S L)_{r c}`.
pub fn minnorm_constraints(n: usize, l: &DMatrix<f64>) -> DMatrix<f64> {
    let n_p = l.ncols();
    let mut a = DMatrix::zeros(n * n_p, n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            let m = lower_index(i, j);
            for c in 0..n_p {
                a[(i * n_p + c, m)] += l[(j, c)];
                a[(j * n_p + c, m)] -= l[(i, c)];
            }
        }
    }
    a
}

/// Compatibility residual `L^T H L' + L'^T H L - L^T E L`.
pub fn compatibility_residual(h: &[f64], e: &[f64], l: &DMatrix<f64>, lder: &DMatrix<f64>) -> f64 {
    let hm = DMatrix::from_diagonal(&DVector::from_column_slice(h));
    let em = DMatrix::from_diagonal(&DVector::from_column_slice(e));
    let hl = l.transpose() * &hm * lder;
    (&hl + hl.transpose() - l.transpose() * em * l).abs().max()
}

/// Skew-symmetric `S` of least `||H^{-1} S||_F` with `S L = H L' - E L / 2`.
pub fn build_s_minnorm(h: &[f64], e: &[f64], l: &DMatrix<f64>, lder: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.len();
    let n_p = l.ncols();
    if l.nrows() != n || lder.shape() != l.shape() || e.len() != n {
        return invalid("inconsistent operator dimensions");
    }
    if n < n_p {
        return invalid(format!("{n} nodes cannot support {n_p} basis functions"));
    }
    let compat = compatibility_residual(h, e, l, lder);
    if compat > 1e-10 {
        return Err(Error::Inconsistent(format!(
            "compatibility residual {compat:e}: the nodal norm is not exact enough for this degree"
        )));
    }
    let a = minnorm_constraints(n, l);
    let mut b = DVector::zeros(n * n_p);
    for r in 0..n {
        for c in 0..n_p {
            b[r * n_p + c] = h[r] * lder[(r, c)] - 0.5 * e[r] * l[(r, c)];
        }
    }
    // scale unknowns so the weighted norm becomes the Euclidean norm
    let mut scale = DVector::zeros(a.ncols());
    for i in 1..n {
        for j in 0..i {
            scale[lower_index(i, j)] = 1.0 / (1.0 / (h[i] * h[i]) + 1.0 / (h[j] * h[j])).sqrt();
        }
    }
    let mut aw = a.clone();
    for (m, mut col) in aw.column_iter_mut().enumerate() {
        col *= scale[m];
    }
    let (mut st, _rank) = min_norm_solve(&aw, &b, 1e-12);
    // iterative refinement; corrections stay in the row space, so minimality is kept
    for _ in 0..3 {
        let r = &b - &aw * &st;
        st += min_norm_solve(&aw, &r, 1e-12).0;
    }
    let s_vec = st.component_mul(&scale);
    let resid = (&a * &s_vec - &b).abs().max();
    let bscale = b.abs().max().max(1.0);
    if resid > 1e-11 * bscale {
        return Err(Error::Inconsistent(format!("skew solve leaves residual {resid:e}")));
    }
    let mut s = DMatrix::zeros(n, n);
    for i in 1..n {
        for j in 0..i {
            let v = s_vec[lower_index(i, j)];
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    Ok(s)
}

/// SBP operator bundle on the reference triangle.
#[derive(Debug, Clone)]
pub struct SbpTri {
    pub p: usize,
    pub cubature: TriCubature,
    pub basis: PkdBasis,
    pub h: Vec<f64>,
    /// Boundary diagonals for xi and eta.
    pub e: [Vec<f64>; 2],
    /// Skew parts for xi and eta.
    pub s: [DMatrix<f64>; 2],
    pub face_rules: [FaceRule; 3],
    pub normals: [[f64; 2]; 3],
}

impl SbpTri {
    pub fn n_k(&self) -> usize {
        self.h.len()
    }

    pub fn face_ids(&self, g: usize) -> &[usize] {
        &self.cubature.face_node_ids[g]
    }

    pub fn q(&self, dir: usize) -> DMatrix<f64> {
        let mut q = self.s[dir].clone();
        for i in 0..self.n_k() {
            q[(i, i)] += 0.5 * self.e[dir][i];
        }
        q
    }

    pub fn d(&self, dir: usize) -> DMatrix<f64> {
        let q = self.q(dir);
        DMatrix::from_fn(self.n_k(), self.n_k(), |i, j| q[(i, j)] / self.h[i])
    }

    pub fn h_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.h))
    }

    pub fn to_bundle(&self) -> TriBundle {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        TriBundle {
            p: self.p,
            n: self.n_k(),
            nodes: self.cubature.nodes.clone(),
            h_diag: self.h.clone(),
            q_rows: [rows(&self.q(0)), rows(&self.q(1))],
            e_diag: self.e.clone(),
            face_node_ids: self.cubature.face_node_ids.clone(),
            normals: self.normals,
        }
    }
}

/// JSON form of a triangle operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriBundle {
    pub p: usize,
    pub n: usize,
    pub nodes: Vec<[f64; 2]>,
    #[serde(rename = "H_diag")]
    pub h_diag: Vec<f64>,
    #[serde(rename = "Q_rows")]
    pub q_rows: [Vec<Vec<f64>>; 2],
    #[serde(rename = "E_diag")]
    pub e_diag: [Vec<f64>; 2],
    pub face_node_ids: [Vec<usize>; 3],
    pub normals: [[f64; 2]; 3],
}

pub fn build_sbp_tri(p: usize) -> Result<SbpTri> {
    let cubature = build_tri_cubature(p)?;
    sbp_from_cubature(cubature)
}

pub fn sbp_from_cubature(cubature: TriCubature) -> Result<SbpTri> {
    let p = cubature.p;
    let basis = pkd_basis(&cubature, p)?;
    let h = cubature.weights.clone();
    let e = [build_e(&cubature, 0)?, build_e(&cubature, 1)?];
    let s = [
        build_s_minnorm(&h, &e[0], &basis.l, &basis.lxi)?,
        build_s_minnorm(&h, &e[1], &basis.l, &basis.leta)?,
    ];
    let mut normals = [[0.0; 2]; 3];
    let mut rules = Vec::with_capacity(3);
    for (g, nrm) in normals.iter_mut().enumerate() {
        let (n, len) = ref_face_geometry(g);
        *nrm = n;
        rules.push(face_rule(p, len)?);
    }
    let face_rules: [FaceRule; 3] = rules.try_into().expect("three faces");
    let op = SbpTri { p, cubature, basis, h, e, s, face_rules, normals };
    let report = verify_sbp(&op);
    if !report.passed() {
        return Err(Error::Inconsistent(format!("operator self-check failed: {report:?}")));
    }
    Ok(op)
}

/// Residuals of the three defining SBP conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpReport {
    /// max |D L - L'| over both directions.
    pub accuracy: f64,
    /// Smallest norm entry.
    pub h_min: f64,
    /// max |S + S^T| over both directions.
    pub skew: f64,
    /// max |L^T E L - boundary integral| over both directions.
    pub boundary: f64,
    /// E has entries only at face nodes and 1^T E 1 = 0.
    pub e_closure: f64,
}

impl SbpReport {
    /// Accuracy is judged after scaling by `h_min`, since `D = H^{-1} Q` amplifies
    /// rounding in `Q` by `1 / h_min`.
    pub fn passed(&self) -> bool {
        self.h_min > 0.0 && self.accuracy * self.h_min <= 1e-12 && self.skew <= 1e-13 && self.boundary <= 1e-12 && self.e_closure <= 1e-13
    }
}

/// Boundary integrals of basis products computed with a Gauss rule on each face.
fn boundary_integrals(op: &SbpTri) -> [DMatrix<f64>; 2] {
    let n_p = op.basis.n_p;
    let gauss = lgl_rule(op.p + 3).expect("valid LGL size");
    let mut out = [DMatrix::zeros(n_p, n_p), DMatrix::zeros(n_p, n_p)];
    for g in 0..3 {
        let a = REF_VERTICES[g];
        let b = REF_VERTICES[(g + 1) % 3];
        let (nrm, len) = ref_face_geometry(g);
        for (t, w) in gauss.nodes.iter().zip(&gauss.weights) {
            let s = 0.5 * (t + 1.0);
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let (v, _, _) = op.basis.eval(x);
            let vv = &v * v.transpose();
            for dir in 0..2 {
                out[dir] += &vv * (0.5 * len * w * nrm[dir]);
            }
        }
    }
    out
}

pub fn verify_sbp(op: &SbpTri) -> SbpReport {
    let l = &op.basis.l;
    let ders = [&op.basis.lxi, &op.basis.leta];
    let bint = boundary_integrals(op);
    let mut accuracy: f64 = 0.0;
    let mut skew: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    let mut e_closure: f64 = 0.0;
    let on_face: Vec<bool> = (0..op.n_k()).map(|i| op.cubature.face_node_ids.iter().any(|f| f.contains(&i))).collect();
    for dir in 0..2 {
        let d = op.d(dir);
        accuracy = accuracy.max((d * l - ders[dir]).abs().max());
        skew = skew.max((&op.s[dir] + op.s[dir].transpose()).abs().max());
        let em = DMatrix::from_diagonal(&DVector::from_column_slice(&op.e[dir]));
        boundary = boundary.max((l.transpose() * em * l - &bint[dir]).abs().max());
        e_closure = e_closure.max(op.e[dir].iter().sum::<f64>().abs());
        for (i, &f) in on_face.iter().enumerate() {
            if !f {
                e_closure = e_closure.max(op.e[dir][i].abs());
            }
        }
    }
    let h_min = op.h.iter().copied().fold(f64::INFINITY, f64::min);
    SbpReport { accuracy, h_min, skew, boundary, e_closure }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_is_orthonormal() {
        for p in 0..=4 {
            let c = build_tri_cubature(p).unwrap();
            let b = pkd_basis(&c, p).unwrap();
            assert_eq!(b.n_p, (p + 1) * (p + 2) / 2);
            let hm = DMatrix::from_diagonal(&DVector::from_column_slice(&c.weights));
            assert!((b.l.transpose() * hm * &b.l - DMatrix::identity(b.n_p, b.n_p)).abs().max() < 1e-12);
            for i in 0..c.n_k() {
                assert_abs_diff_eq!(b.l[(i, 0)].abs(), 1.0 / 2f64.sqrt(), epsilon = 1e-13);
                assert_abs_diff_eq!(b.lxi[(i, 0)], 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn e_matches_hand_assembly_for_p1() {
        let c = build_tri_cubature(1).unwrap();
        let e = build_e(&c, 0).unwrap();
        // bottom face: normal (0,-1); hypotenuse: normal (1,1)/sqrt2, length 2 sqrt2; left: (-1,0)
        let s2 = 2f64.sqrt();
        let hyp = |w: f64| (1.0 / s2) * s2 * w;
        assert_abs_diff_eq!(e[0], -(1.0 / 3.0), epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], hyp(1.0 / 3.0), epsilon = 1e-14);
        assert_abs_diff_eq!(e[2], hyp(1.0 / 3.0) - 1.0 / 3.0, epsilon = 1e-14);
        for g in 0..3 {
            let mid = c.face_node_ids[g][2];
            let expect = [0.0, hyp(4.0 / 3.0), -4.0 / 3.0][g];
            assert_abs_diff_eq!(e[mid], expect, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(e[6], 0.0);
        assert_abs_diff_eq!(e.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn compatibility_and_counts() {
        for p in 0..=4 {
            let c = build_tri_cubature(p).unwrap();
            let b = pkd_basis(&c, p).unwrap();
            for (dir, der) in [&b.lxi, &b.leta].into_iter().enumerate() {
                let e = build_e(&c, dir).unwrap();
                let scale = b.l.abs().max() * der.abs().max();
                let r = compatibility_residual(&c.weights, &e, &b.l, der);
                assert!(r <= 1e-13 * scale, "p={p}: {r:e} vs {scale:e}");
            }
            let n = c.n_k();
            assert!(n * (n - 1) / 2 >= n * b.n_p - b.n_p * (b.n_p + 1) / 2);
        }
    }

    #[test]
    fn operators_differentiate_polynomials() {
        for p in 0..=4 {
            let op = build_sbp_tri(p).unwrap();
            let nodes = &op.cubature.nodes;
            let dxi = op.d(0);
            let deta = op.d(1);
            for d in 0..=p {
                for a in 0..=d {
                    let b = d - a;
                    let f = DVector::from_fn(nodes.len(), |i, _| nodes[i][0].powi(a as i32) * nodes[i][1].powi(b as i32));
                    let fx = DVector::from_fn(nodes.len(), |i, _| {
                        if a == 0 { 0.0 } else { a as f64 * nodes[i][0].powi(a as i32 - 1) * nodes[i][1].powi(b as i32) }
                    });
                    let fy = DVector::from_fn(nodes.len(), |i, _| {
                        if b == 0 { 0.0 } else { b as f64 * nodes[i][0].powi(a as i32) * nodes[i][1].powi(b as i32 - 1) }
                    });
                    assert!((&dxi * &f - fx).abs().max() < 1e-11, "p = {p}, a = {a}, b = {b}");
                    assert!((&deta * &f - fy).abs().max() < 1e-11, "p = {p}, a = {a}, b = {b}");
                }
            }
        }
    }

    #[test]
    fn report_flags_injected_faults() {
        let op = build_sbp_tri(2).unwrap();
        assert!(verify_sbp(&op).passed());
        let mut bad = op.clone();
        bad.h[3] = -bad.h[3];
        let r = verify_sbp(&bad);
        assert!(!r.passed() && r.h_min < 0.0);
        let mut bad = op.clone();
        bad.s[0] = (&bad.s[0] + bad.s[0].transpose()) * 0.5 + DMatrix::identity(bad.n_k(), bad.n_k()) * 0.1;
        assert!(verify_sbp(&bad).skew > 1e-3);
    }

    #[test]
    fn s_is_weighted_minimal() {
        let op = build_sbp_tri(2).unwrap();
        let n = op.n_k();
        let a = minnorm_constraints(n, &op.basis.l);
        // null-space basis from the SVD of A
        let svd = a.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax).count();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let norm = |s: &DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| s[(i, j)] / op.h[i]).norm();
        let base = norm(&op.s[0]);
        let ncols = a.ncols();
        let all_rows = vt.nrows();
        assert!(all_rows == ncols || rank < all_rows);
        for _ in 0..20 {
            let mut z = DVector::zeros(ncols);
            for k in rank..all_rows {
                z.axpy(rng.random_range(-1.0..1.0), &vt.row(k).transpose(), 1.0);
            }
            if z.norm() == 0.0 {
                continue;
            }
            assert!((&a * &z).abs().max() < 1e-10);
            let mut pert = op.s[0].clone();
            for i in 1..n {
                for j in 0..i {
                    let v = 1e-3 * z[lower_index(i, j)];
                    pert[(i, j)] += v;
                    pert[(j, i)] -= v;
                }
            }
            assert!(norm(&pert) >= base - 1e-10);
        }
    }

    #[test]
    fn bundle_serializes() {
        let op = build_sbp_tri(1).unwrap();
        let json = serde_json::to_string(&op.to_bundle()).unwrap();
        let back: TriBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n, 7);
    }
}
