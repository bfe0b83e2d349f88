//! One-dimensional LGL rules, diagonal-norm SBP operators and the two dissipation
//! families built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::sym_eigen;
use crate::tri_sbp::build_s_minnorm;

/// Legendre polynomial `P_k(x)` and its derivative.
pub fn legendre(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for j in 1..k {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        let d2 = d0 + (2.0 * jf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Legendre polynomial scaled to unit L2 norm on [-1, 1], with derivative.
pub fn legendre_normalized(k: usize, x: f64) -> (f64, f64) {
    let c = ((2 * k + 1) as f64 / 2.0).sqrt();
    let (p, d) = legendre(k, x);
    (c * p, c * d)
}

/// Second derivative of `P_k`, from the Legendre differential equation
/// away from the endpoints.
fn legendre_dd(k: usize, x: f64) -> f64 {
    let (p, d) = legendre(k, x);
    let kf = k as f64;
    (2.0 * x * d - kf * (kf + 1.0) * p) / (1.0 - x * x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lgl1D {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Lgl1D {
    /// Largest monomial moment error over degrees `0..=deg`.
    pub fn moment_error(&self, deg: usize) -> f64 {
        (0..=deg)
            .map(|k| {
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                let q: f64 = self.nodes.iter().zip(&self.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                (q - exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Root of `P_N'` in the bracket `[a, b]` (sign change assumed), Newton with bisection fallback.
fn lgl_interior_root(nn: usize, guess: f64, mut a: f64, mut b: f64) -> Result<f64> {
    let f = |x: f64| legendre(nn, x).1;
    let mut fa = f(a);
    let mut x = guess;
    for it in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let dfx = legendre_dd(nn, x);
        let mut next = x - fx / dfx;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 || (b - a) <= 1e-15 {
            return Ok(x);
        }
        if it > 0 && step < 1e-14 {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { what: "LGL node iteration", iterations: 200, residual: f(x).abs() })
}

/// The `n`-point Legendre-Gauss-Lobatto rule on [-1, 1].
pub fn lgl_rule(n: usize) -> Result<Lgl1D> {
    if n < 2 {
        return invalid(format!("LGL rule needs at least 2 nodes, got {n}"));
    }
    let nn = n - 1;
    let mut nodes = vec![-1.0; n];
    nodes[nn] = 1.0;
    // P_N' has N-1 simple roots interlaced by the Chebyshev-Gauss-Lobatto points.
    let cgl: Vec<f64> = (0..=nn).map(|j| -(std::f64::consts::PI * j as f64 / nn as f64).cos()).collect();
    for k in 1..nn {
        let guess = -(std::f64::consts::PI * (k as f64 - 0.25) / (nn as f64 + 0.5)).cos();
        let (lo, hi) = bracket(nn, &cgl, k);
        let g = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
        nodes[k] = lgl_interior_root(nn, g, lo, hi)?;
    }
    // symmetrize to remove round-off asymmetry
    for k in 0..n / 2 {
        let v = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        nodes[k] = -v;
        nodes[n - 1 - k] = v;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let nf = nn as f64;
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = legendre(nn, x).0;
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    let rule = Lgl1D { n, nodes, weights };
    let err = rule.moment_error(2 * n - 3);
    if err > 1e-13 {
        return Err(Error::NoConvergence { what: "LGL moment check", iterations: 0, residual: err });
    }
    Ok(rule)
}

/// Bracket around the `k`-th interior root of `P_N'` found by scanning a fine grid.
fn bracket(nn: usize, cgl: &[f64], k: usize) -> (f64, f64) {
    let f = |x: f64| legendre(nn, x).1;
    let sub = 64;
    let mut found = Vec::new();
    for j in 0..cgl.len() - 1 {
        let (a, b) = (cgl[j], cgl[j + 1]);
        let mut xa = a;
        let mut fa = f(xa);
        for s in 1..=sub {
            let xb = a + (b - a) * s as f64 / sub as f64;
            let fb = f(xb);
            if xa > -1.0 && xb < 1.0 && fa * fb < 0.0 {
                found.push((xa, xb));
            } else if fb == 0.0 && xb > -1.0 && xb < 1.0 {
                found.push((xb - 1e-15, xb + 1e-15));
            }
            xa = xb;
            fa = fb;
        }
    }
    found[k - 1]
}

/// Normalized Legendre values and derivatives at a set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Vandermonde1D {
    pub p: usize,
    pub l: DMatrix<f64>,
    pub lp: DMatrix<f64>,
}

pub fn legendre_vandermonde(p: usize, nodes: &[f64], h: &[f64]) -> Result<Vandermonde1D> {
    let n = nodes.len();
    let l = DMatrix::from_fn(n, p + 1, |i, j| legendre_normalized(j, nodes[i]).0);
    let lp = DMatrix::from_fn(n, p + 1, |i, j| legendre_normalized(j, nodes[i]).1);
    let hm = DMatrix::from_diagonal(&DVector::from_column_slice(h));
    let gram = l.transpose() * &hm * &l;
    let err = (gram - DMatrix::identity(p + 1, p + 1)).abs().max();
    if err > 1e-12 {
        return Err(Error::Inconsistent(format!(
            "Legendre basis loses orthonormality under the nodal weights (error {err:e})"
        )));
    }
    Ok(Vandermonde1D { p, l, lp })
}

/// Diagonal-norm SBP first-derivative operator on the LGL nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sbp1D {
    pub p: usize,
    pub n: usize,
    pub nodes: Vec<f64>,
    pub h: Vec<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub e: Vec<f64>,
}

impl Sbp1D {
    pub fn h_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.h))
    }

    /// `D = H^{-1} Q`.
    pub fn d(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.q[(i, j)] / self.h[i])
    }

    pub fn to_bundle(&self) -> SbpBundle {
        SbpBundle {
            p: self.p,
            n: self.n,
            nodes: self.nodes.clone(),
            h_diag: self.h.clone(),
            q_rows: (0..self.n).map(|i| self.q.row(i).iter().copied().collect()).collect(),
            e_diag: self.e.clone(),
        }
    }
}

/// JSON form of a 1D operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpBundle {
    pub p: usize,
    pub n: usize,
    pub nodes: Vec<f64>,
    #[serde(rename = "H_diag")]
    pub h_diag: Vec<f64>,
    #[serde(rename = "Q_rows")]
    pub q_rows: Vec<Vec<f64>>,
    #[serde(rename = "E_diag")]
    pub e_diag: Vec<f64>,
}

pub fn build_sbp_1d(p: usize, n: usize) -> Result<Sbp1D> {
    if n < p + 1 {
        return invalid(format!("a degree-{p} operator needs at least {} nodes, got {n}", p + 1));
    }
    let rule = lgl_rule(n)?;
    let h = rule.weights.clone();
    let mut e = vec![0.0; n];
    e[0] = -1.0;
    e[n - 1] = 1.0;
    // The LGL rule is only 2n-3 exact, so orthonormality may fail when n = p+1;
    // the accuracy conditions do not need it.
    let l = DMatrix::from_fn(n, p + 1, |i, j| legendre_normalized(j, rule.nodes[i]).0);
    let lp = DMatrix::from_fn(n, p + 1, |i, j| legendre_normalized(j, rule.nodes[i]).1);
    let s = build_s_minnorm(&h, &e, &l, &lp)?;
    let q = &s + DMatrix::from_diagonal(&DVector::from_column_slice(&e)) * 0.5;
    let op = Sbp1D { p, n, nodes: rule.nodes, h, q, s, e };
    let resid = (op.d() * &l - &lp).abs().max();
    if resid > 1e-10 {
        return Err(Error::Inconsistent(format!("1D accuracy residual {resid:e}")));
    }
    Ok(op)
}

/// Result of building a derivative-based dissipation operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Dissipation {
    Operator(DMatrix<f64>),
    /// Too few nodes: `D^s` vanishes identically.
    Trivial,
}

fn diag_scaling(a: &[f64], n: usize) -> Result<()> {
    if a.len() != n {
        return invalid(format!("scaling has {} entries, expected {n}", a.len()));
    }
    if a.iter().any(|&x| !(x >= 0.0)) {
        return invalid("scaling entries must be nonnegative");
    }
    Ok(())
}

/// `(D^s)^T H A D^s` with `D^s` the `s`-fold power of the first-derivative operator.
pub fn derivative_dissipation_1d(op: &Sbp1D, s: usize, a: &[f64]) -> Result<Dissipation> {
    if s != op.p + 1 {
        return invalid(format!("derivative order must be p+1 = {}, got {s}", op.p + 1));
    }
    diag_scaling(a, op.n)?;
    if op.n < s + 1 {
        return Ok(Dissipation::Trivial);
    }
    let d = op.d();
    let mut ds = d.clone();
    for _ in 1..s {
        ds = &d * ds;
    }
    let ha = DMatrix::from_fn(op.n, op.n, |i, j| if i == j { op.h[i] * a[i] } else { 0.0 });
    let m = ds.transpose() * ha * &ds;
    Ok(Dissipation::Operator((&m + m.transpose()) * 0.5))
}

/// `P^T H A P` with the L2 projector complement `P = I - L L^T H`.
pub fn lps_dissipation_1d(op: &Sbp1D, v: &Vandermonde1D, a: &[f64]) -> Result<DMatrix<f64>> {
    diag_scaling(a, op.n)?;
    let n = op.n;
    let hm = op.h_matrix();
    let gram = v.l.transpose() * &hm * &v.l;
    if (gram - DMatrix::identity(v.p + 1, v.p + 1)).abs().max() > 1e-12 {
        return Err(Error::Inconsistent("projection needs a 2p-exact quadrature".into()));
    }
    let proj = DMatrix::identity(n, n) - &v.l * v.l.transpose() * &hm;
    let ha = DMatrix::from_fn(n, n, |i, j| if i == j { op.h[i] * a[i] } else { 0.0 });
    let m = proj.transpose() * ha * &proj;
    Ok((&m + m.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub m: DVector<f64>,
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub alpha: f64,
}

/// Dominant eigenpair of a symmetric matrix, checking that the matrix has rank one.
fn rank_one(a: &DMatrix<f64>, label: &str) -> Result<(f64, DVector<f64>)> {
    let (vals, vecs) = sym_eigen(a);
    let n = vals.len();
    let top = vals[n - 1];
    if !(top > 0.0) {
        return Err(Error::Inconsistent(format!("{label} has no positive eigenvalue")));
    }
    let rest = vals[..n - 1].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if rest > 1e-10 * top {
        return Err(Error::Inconsistent(format!(
            "{label} is not rank one (second eigenvalue {rest:e} vs {top:e})"
        )));
    }
    let mut m: DVector<f64> = vecs.column(n - 1).into_owned();
    let lead = m.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
    if lead < 0.0 {
        m = -m;
    }
    Ok((top, m))
}

pub fn rank_one_equivalence(dis: &DMatrix<f64>, lps: &DMatrix<f64>) -> Result<RankOne> {
    let (lambda_d, md) = rank_one(dis, "derivative dissipation")?;
    let (lambda_p, mp) = rank_one(lps, "projection dissipation")?;
    let agree = md.dot(&mp).abs();
    if (1.0 - agree).abs() > 1e-10 {
        return Err(Error::Inconsistent(format!("rank-one vectors differ (|cos| = {agree})")));
    }
    Ok(RankOne { m: md, lambda_d, lambda_p, alpha: lambda_d / lambda_p })
}

/// Dissipation pair on `p+2` LGL nodes with unit scaling, as used by the equivalence check.
pub fn equivalence_for_degree(p: usize) -> Result<RankOne> {
    let n = p + 2;
    let op = build_sbp_1d(p, n)?;
    let v = legendre_vandermonde(p, &op.nodes, &op.h)?;
    let ones = vec![1.0; n];
    let dis = match derivative_dissipation_1d(&op, p + 1, &ones)? {
        Dissipation::Operator(m) => m,
        Dissipation::Trivial => return Err(Error::Inconsistent("trivial derivative operator".into())),
    };
    let lps = lps_dissipation_1d(&op, &v, &ones)?;
    rank_one_equivalence(&dis, &lps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Bisection on a sign change, used as an independent root oracle.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa0 = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa0 > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn lgl_small_rules() {
        let r2 = lgl_rule(2).unwrap();
        assert_eq!(r2.nodes, vec![-1.0, 1.0]);
        assert_abs_diff_eq!(r2.weights[0], 1.0, epsilon = 1e-15);
        let r3 = lgl_rule(3).unwrap();
        assert_abs_diff_eq!(r3.nodes[1], 0.0, epsilon = 1e-15);
        for (w, e) in r3.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-14);
        }
        let r5 = lgl_rule(5).unwrap();
        // P_4'(x) is proportional to 35x^3 - 15x
        let root = bisect(|x| 35.0 * x.powi(3) - 15.0 * x, 0.1, 0.99);
        assert_abs_diff_eq!(root, (3.0f64 / 7.0).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(r5.nodes[3], (3.0f64 / 7.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(r5.nodes[1], -(3.0f64 / 7.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn lgl_rejects_single_node() {
        assert!(lgl_rule(1).is_err());
    }

    #[test]
    fn lgl_exactness_up_to_many_nodes() {
        for n in 2..=12 {
            let r = lgl_rule(n).unwrap();
            assert!(r.moment_error(2 * n - 3) < 1e-13, "n = {n}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn two_node_operator() {
        let op = build_sbp_1d(1, 2).unwrap();
        let d = op.d();
        for i in 0..2 {
            assert_abs_diff_eq!(d[(i, 0)], -0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(d[(i, 1)], 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn three_node_middle_row_is_central_difference() {
        let op = build_sbp_1d(1, 3).unwrap();
        let d = op.d();
        assert_abs_diff_eq!(d[(1, 0)], -0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(d[(1, 1)], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d[(1, 2)], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn sbp_properties_hold() {
        for p in 0..=4 {
            for n in (p + 1).max(2)..=p + 4 {
                let op = build_sbp_1d(p, n).unwrap();
                let qt = &op.q + op.q.transpose();
                let e = DMatrix::from_diagonal(&DVector::from_column_slice(&op.e));
                assert!((qt - e).abs().max() < 1e-13);
                let d = op.d();
                for k in 0..=p {
                    let f = DVector::from_fn(n, |i, _| op.nodes[i].powi(k as i32));
                    let df = DVector::from_fn(n, |i, _| {
                        if k == 0 { 0.0 } else { k as f64 * op.nodes[i].powi(k as i32 - 1) }
                    });
                    assert!((&d * f - df).abs().max() < 1e-11, "p = {p}, n = {n}, k = {k}");
                }
            }
        }
    }

    #[test]
    fn vandermonde_columns() {
        let r = lgl_rule(4).unwrap();
        let v = legendre_vandermonde(2, &r.nodes, &r.weights).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(v.l[(i, 0)], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(v.l[(i, 1)], (1.5f64).sqrt() * r.nodes[i], epsilon = 1e-15);
            assert_abs_diff_eq!(v.lp[(i, 1)], (1.5f64).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn vandermonde_flags_inexact_rule() {
        let r = lgl_rule(2).unwrap();
        assert!(legendre_vandermonde(1, &r.nodes, &r.weights).is_err());
    }

    #[test]
    fn trivial_dissipation_flagged() {
        let op = build_sbp_1d(1, 2).unwrap();
        assert_eq!(derivative_dissipation_1d(&op, 2, &[1.0, 1.0]).unwrap(), Dissipation::Trivial);
        assert!(derivative_dissipation_1d(&op, 3, &[1.0, 1.0]).is_err());
    }

    fn unit(v: &[f64]) -> DVector<f64> {
        let d = DVector::from_column_slice(v);
        let n = d.norm();
        d / n
    }

    #[test]
    fn rank_one_decompositions() {
        let s5 = 5f64.sqrt();
        let cases: [(usize, Vec<f64>, f64, f64); 4] = [
            (0, vec![1.0, -1.0], 1.0, 1.0),
            // the three-node operator is unique, so (D^2)^T H D^2 = 12 m m^T
            (1, vec![1.0, -2.0, 1.0], 12.0, 2.0 / 3.0),
            (2, vec![1.0, -s5, s5, -1.0], 675.0 / 2.0, 0.5),
            (3, vec![3.0, -7.0, 8.0, -7.0, 3.0], 17640.0, 0.4),
        ];
        for (p, m, ld, lp) in cases {
            let r = equivalence_for_degree(p).unwrap();
            let m = unit(&m);
            assert!((&r.m - &m).abs().max() < 1e-10, "p = {p}: {}", r.m);
            assert!((r.lambda_d / ld - 1.0).abs() < 1e-9, "p = {p}: {}", r.lambda_d);
            assert!((r.lambda_p / lp - 1.0).abs() < 1e-9, "p = {p}: {}", r.lambda_p);
        }
    }

    #[test]
    fn alpha_grows_with_degree() {
        let a: Vec<f64> = (0..=3).map(|p| equivalence_for_degree(p).unwrap().alpha).collect();
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dissipation_annihilates_polynomials_and_is_psd() {
        for p in 0..=3 {
            let n = p + 3;
            let op = build_sbp_1d(p, n).unwrap();
            let v = legendre_vandermonde(p, &op.nodes, &op.h).unwrap();
            let a: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
            let Dissipation::Operator(dis) = derivative_dissipation_1d(&op, p + 1, &a).unwrap() else {
                panic!("unexpected trivial operator");
            };
            let lps = lps_dissipation_1d(&op, &v, &a).unwrap();
            for m in [&dis, &lps] {
                assert!((m * &v.l).abs().max() < 1e-9 * m.abs().max().max(1.0));
                let (ev, _) = sym_eigen(m);
                assert!(ev[0] >= -1e-12 * ev[ev.len() - 1].abs());
            }
        }
    }

    #[test]
    fn bundle_round_trip() {
        let op = build_sbp_1d(2, 4).unwrap();
        let json = serde_json::to_string(&op.to_bundle()).unwrap();
        assert!(json.contains("\"H_diag\""));
        let back: SbpBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op.to_bundle());
    }
}
