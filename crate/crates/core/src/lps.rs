//! Projection operators, local projection stabilization matrices, the
//! derivative-based alternative on triangles, and their spectra.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{h_eigenvalues, sym_eigen};
use crate::tri_sbp::SbpTri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectorVariant {
    /// `I - L L^T H`, requires a 2p-exact norm.
    Exact2p,
    /// `I - L (L^T H L)^{-1} L^T H`, usable with a less exact norm.
    Approx2pMinus1,
    /// Uniform-grid neighbour averaging with extrapolated end values.
    FdReconstruction,
}

/// `P = I - (reconstruction)`; `P u` is the fluctuation removed by the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub p: DMatrix<f64>,
    pub variant: ProjectorVariant,
    /// Highest polynomial degree annihilated.
    pub degree: usize,
}

fn check_dims(l: &DMatrix<f64>, h: &[f64]) -> Result<DMatrix<f64>> {
    if l.nrows() != h.len() {
        return invalid(format!("basis has {} rows, norm has {} entries", l.nrows(), h.len()));
    }
    if h.iter().any(|&x| !(x > 0.0)) {
        return invalid("norm entries must be positive");
    }
    Ok(DMatrix::from_diagonal(&DVector::from_column_slice(h)))
}

fn degree_of(n_p: usize) -> usize {
    let mut p = 0;
    while (p + 2) * (p + 3) / 2 <= n_p {
        p += 1;
    }
    p
}

pub fn projector_exact(l: &DMatrix<f64>, h: &[f64]) -> Result<Projector> {
    let hm = check_dims(l, h)?;
    let n_p = l.ncols();
    let err = (l.transpose() * &hm * l - DMatrix::identity(n_p, n_p)).abs().max();
    if err > 1e-10 {
        return Err(Error::Inconsistent(format!("basis is not orthonormal under the norm (error {err:e})")));
    }
    let n = h.len();
    let p = DMatrix::identity(n, n) - l * l.transpose() * hm;
    Ok(Projector { p, variant: ProjectorVariant::Exact2p, degree: degree_of(n_p) })
}

/// Spectral condition number of the basis Gram matrix `L^T H L`.
pub fn gram_condition(l: &DMatrix<f64>, h: &[f64]) -> Result<f64> {
    let hm = check_dims(l, h)?;
    let (ev, _) = sym_eigen(&(l.transpose() * hm * l));
    Ok(ev[ev.len() - 1] / ev[0])
}

pub fn projector_approx(l: &DMatrix<f64>, h: &[f64]) -> Result<Projector> {
    let hm = check_dims(l, h)?;
    let gram = l.transpose() * &hm * l;
    let cond = gram_condition(l, h)?;
    if !(cond.is_finite() && cond < 1e12) {
        return Err(Error::Inconsistent(format!("basis Gram matrix is singular (condition {cond:e})")));
    }
    let ginv = gram
        .try_inverse()
        .ok_or_else(|| Error::Inconsistent("basis Gram matrix is singular".into()))?;
    let n = h.len();
    let p = DMatrix::identity(n, n) - l * ginv * l.transpose() * hm;
    Ok(Projector { p, variant: ProjectorVariant::Approx2pMinus1, degree: degree_of(l.ncols()) })
}

pub fn projector_fd(n: usize) -> Result<Projector> {
    if n < 4 {
        return invalid(format!("finite-difference projector needs at least 4 nodes, got {n}"));
    }
    let mut r = DMatrix::zeros(n, n);
    r[(0, 1)] = 2.0;
    r[(0, 2)] = -1.0;
    r[(n - 1, n - 2)] = 2.0;
    r[(n - 1, n - 3)] = -1.0;
    for i in 1..n - 1 {
        r[(i, i - 1)] = 0.5;
        r[(i, i + 1)] = 0.5;
    }
    Ok(Projector { p: DMatrix::identity(n, n) - r, variant: ProjectorVariant::FdReconstruction, degree: 1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpsMatrix {
    pub m: DMatrix<f64>,
    pub scaling_desc: String,
}

/// `M = P^T H A P`; `H A` must be symmetric positive semidefinite.
pub fn lps_matrix(proj: &Projector, h: &[f64], a: &DMatrix<f64>, scaling_desc: &str) -> Result<LpsMatrix> {
    let n = h.len();
    if proj.p.nrows() != n || a.shape() != (n, n) {
        return invalid("projector, norm and scaling sizes differ");
    }
    let ha = DMatrix::from_fn(n, n, |i, j| h[i] * a[(i, j)]);
    let asym = (&ha - ha.transpose()).abs().max();
    let scale = ha.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return invalid(format!("H A is not symmetric (asymmetry {asym:e})"));
    }
    let (ev, _) = sym_eigen(&ha);
    if ev[0] < -1e-12 * scale {
        return invalid(format!("H A is not positive semidefinite (eigenvalue {:e})", ev[0]));
    }
    let m = proj.p.transpose() * ha * &proj.p;
    Ok(LpsMatrix { m: (&m + m.transpose()) * 0.5, scaling_desc: scaling_desc.to_string() })
}

/// `sum_dir (D_dir^s)^T H A_dir D_dir^s` on the triangle.
pub fn derivative_dissipation_tri(op: &SbpTri, s: usize, a_xi: &[f64], a_eta: &[f64]) -> Result<DMatrix<f64>> {
    if s != op.p + 1 {
        return invalid(format!("derivative order must be p+1 = {}, got {s}", op.p + 1));
    }
    let n = op.n_k();
    if a_xi.len() != n || a_eta.len() != n || a_xi.iter().chain(a_eta).any(|&x| !(x >= 0.0)) {
        return invalid("scalings must be nonnegative with one entry per node");
    }
    let mut out = DMatrix::zeros(n, n);
    for (dir, a) in [a_xi, a_eta].into_iter().enumerate() {
        let d = op.d(dir);
        let mut ds = d.clone();
        for _ in 1..s {
            ds = &d * ds;
        }
        let ha = DMatrix::from_fn(n, n, |i, j| if i == j { op.h[i] * a[i] } else { 0.0 });
        out += ds.transpose() * ha * &ds;
    }
    Ok((&out + out.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpectrum {
    /// Eigenvalues of `H^{-1} M`, ascending.
    pub eigenvalues: Vec<f64>,
    pub zero_count: usize,
    /// Largest over smallest nonzero eigenvalue.
    pub ratio: f64,
}

pub fn dissipation_spectrum(m: &DMatrix<f64>, h: &[f64]) -> DissipationSpectrum {
    let eigenvalues = h_eigenvalues(m, h);
    let top = eigenvalues.last().copied().unwrap_or(0.0);
    let cut = 1e-10 * top.abs();
    let nonzero: Vec<f64> = eigenvalues.iter().copied().filter(|v| v.abs() > cut).collect();
    let zero_count = eigenvalues.len() - nonzero.len();
    let ratio = match (nonzero.first(), nonzero.last()) {
        (Some(lo), Some(hi)) => hi / lo,
        _ => f64::NAN,
    };
    DissipationSpectrum { eigenvalues, zero_count, ratio }
}

/// Spectra of the derivative-based and projection-based dissipation on one
/// reference element with unit scaling.
pub fn reference_spectra(op: &SbpTri) -> Result<(DissipationSpectrum, DissipationSpectrum)> {
    let ones = vec![1.0; op.n_k()];
    let dis = derivative_dissipation_tri(op, op.p + 1, &ones, &ones)?;
    let proj = projector_exact(&op.basis.l, &op.h)?;
    let n = op.n_k();
    let lps = lps_matrix(&proj, &op.h, &DMatrix::identity(n, n), "identity")?;
    Ok((dissipation_spectrum(&dis, &op.h), dissipation_spectrum(&lps.m, &op.h)))
}

pub fn write_spectrum_csv<W: Write>(spec: &DissipationSpectrum, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", "eigenvalue"])?;
    for (i, v) in spec.eigenvalues.iter().enumerate() {
        wr.write_record([i.to_string(), format!("{v:.16e}")])?;
    }
    wr.flush()?;
    Ok(())
}
