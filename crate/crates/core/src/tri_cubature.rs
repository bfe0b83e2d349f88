//! Symmetric cubature rules on the reference triangle with vertex nodes and
//! LGL face nodes, plus the matching face quadrature.
//!
//! The reference triangle has vertices (-1,-1), (1,-1), (-1,1). Face `g` runs
//! from vertex `g` to vertex `g+1 (mod 3)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::min_norm_solve;
use crate::ref1d::lgl_rule;

pub const REF_VERTICES: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
pub const REF_AREA: f64 = 2.0;
pub const MAX_DEGREE: usize = 4;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Exact integral of `xi^a eta^b` over the reference triangle.
pub fn monomial_moment(a: usize, b: usize) -> f64 {
    // shift to x = xi + 1, y = eta + 1 on the simplex x, y >= 0, x + y <= 2
    let mut s = 0.0;
    for i in 0..=a {
        for j in 0..=b {
            let sign = if (a - i + b - j) % 2 == 0 { 1.0 } else { -1.0 };
            s += binom(a, i) * binom(b, j) * sign * 2f64.powi((i + j + 2) as i32) * factorial(i) * factorial(j)
                / factorial(i + j + 2);
        }
    }
    s
}

/// Outward unit normal and length of reference face `g`.
pub fn ref_face_geometry(g: usize) -> ([f64; 2], f64) {
    let a = REF_VERTICES[g];
    let b = REF_VERTICES[(g + 1) % 3];
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = t[0].hypot(t[1]);
    ([t[1] / len, -t[0] / len], len)
}

/// LGL face quadrature ordered as (start, end, interior nodes from start to end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRule {
    pub p: usize,
    pub nodes: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn face_rule(p: usize, face_length: f64) -> Result<FaceRule> {
    if !(face_length > 0.0) {
        return invalid(format!("face length must be positive, got {face_length}"));
    }
    let r = lgl_rule(p + 2)?;
    let n = r.n;
    let order: Vec<usize> = std::iter::once(0).chain(std::iter::once(n - 1)).chain(1..n - 1).collect();
    Ok(FaceRule {
        p,
        nodes: order.iter().map(|&k| r.nodes[k]).collect(),
        b: order.iter().map(|&k| 0.5 * face_length * r.weights[k]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriCubature {
    pub p: usize,
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub vertex_ids: [usize; 3],
    pub face_node_ids: [Vec<usize>; 3],
}

impl TriCubature {
    pub fn n_k(&self) -> usize {
        self.nodes.len()
    }

    /// Checks every structural requirement and the degree-2p moment residual.
    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p > MAX_DEGREE {
            return Err(Error::BadCubature(format!("degree {p} out of range")));
        }
        let n = self.nodes.len();
        if self.weights.len() != n {
            return Err(Error::BadCubature("weights and nodes differ in length".into()));
        }
        if let Some(w) = self.weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::BadCubature(format!("non-positive weight {w}")));
        }
        for (v, &id) in self.vertex_ids.iter().enumerate() {
            let x = self.nodes.get(id).ok_or_else(|| Error::BadCubature("vertex id out of range".into()))?;
            if (x[0] - REF_VERTICES[v][0]).abs() > 1e-14 || (x[1] - REF_VERTICES[v][1]).abs() > 1e-14 {
                return Err(Error::BadCubature(format!("node {id} is not vertex {v}")));
            }
        }
        let lgl = lgl_rule(p + 2)?;
        let fr = face_rule(p, 2.0)?;
        for g in 0..3 {
            let ids = &self.face_node_ids[g];
            if ids.len() != p + 2 {
                return Err(Error::BadCubature(format!("face {g} has {} nodes", ids.len())));
            }
            if ids[0] != self.vertex_ids[g] || ids[1] != self.vertex_ids[(g + 1) % 3] {
                return Err(Error::BadCubature(format!("face {g} does not start and end at its vertices")));
            }
            let a = REF_VERTICES[g];
            let b = REF_VERTICES[(g + 1) % 3];
            for (k, &id) in ids.iter().enumerate() {
                let s = 0.5 * (fr.nodes[k] + 1.0);
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let y = self.nodes.get(id).ok_or_else(|| Error::BadCubature("face id out of range".into()))?;
                if (x[0] - y[0]).abs() > 1e-13 || (x[1] - y[1]).abs() > 1e-13 {
                    return Err(Error::BadCubature(format!("face {g} node {k} is off its LGL position")));
                }
            }
        }
        drop(lgl);
        let err = verify_cubature(self, 2 * p);
        if err > 1e-12 {
            return Err(Error::BadCubature(format!("moment residual {err:e} at degree {}", 2 * p)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: TriCubature = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Largest error over monomials of total degree at most `q`.
pub fn verify_cubature(c: &TriCubature, q: usize) -> f64 {
    let mut err: f64 = 0.0;
    for d in 0..=q {
        for a in 0..=d {
            let b = d - a;
            let s: f64 = c
                .nodes
                .iter()
                .zip(&c.weights)
                .map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32))
                .sum();
            err = err.max((s - monomial_moment(a, b)).abs());
        }
    }
    err
}

/// Symmetric interior orbit in barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteriorOrbit {
    /// The centroid.
    Centroid,
    /// Permutations of (1-2a, a, a).
    S21,
    /// Permutations of (a, b, 1-a-b).
    S111,
}

impl InteriorOrbit {
    fn n_params(self) -> usize {
        match self {
            InteriorOrbit::Centroid => 0,
            InteriorOrbit::S21 => 1,
            InteriorOrbit::S111 => 2,
        }
    }
}

const S111_PERMS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 0, 1], [1, 2, 0], [2, 1, 0]];

/// Orbit structure of the rule for one degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitLayout {
    pub p: usize,
    pub interior: Vec<InteriorOrbit>,
    /// Degree up to which the orbit equations are solved (at least 2p).
    pub solve_degree: usize,
}

/// Orbit structures for p = 0..4.
///
/// The boundary part (vertices plus LGL face nodes) is fixed by p; interior
/// orbits are added until the free parameters match the number of
/// symmetric moment equations. For p = 1 the square system is reached at
/// degree 3, which pins the otherwise free weights. For p = 4 the smaller
/// layouts only admit rules with a negative weight, so an S111 orbit is used.
pub fn orbit_layout(p: usize) -> Result<OrbitLayout> {
    use InteriorOrbit::*;
    let (interior, solve_degree) = match p {
        0 => (vec![], 0),
        1 => (vec![Centroid], 3),
        2 => (vec![S21], 4),
        3 => (vec![S21, S21], 6),
        4 => (vec![S111, S21, S21], 8),
        _ => return invalid(format!("cubature degree must be in 0..=4, got {p}")),
    };
    Ok(OrbitLayout { p, interior, solve_degree })
}

struct Geometry {
    /// For each node: weight group index.
    group: Vec<usize>,
    n_groups: usize,
    boundary_nodes: Vec<[f64; 2]>,
    vertex_ids: [usize; 3],
    face_node_ids: [Vec<usize>; 3],
}

fn bary_to_xy(l: [f64; 3]) -> [f64; 2] {
    let mut x = [0.0; 2];
    for k in 0..3 {
        x[0] += l[k] * REF_VERTICES[k][0];
        x[1] += l[k] * REF_VERTICES[k][1];
    }
    x
}

fn boundary_geometry(p: usize) -> Result<Geometry> {
    let fr = face_rule(p, 2.0)?;
    let mut nodes: Vec<[f64; 2]> = REF_VERTICES.to_vec();
    let mut group = vec![0usize; 3];
    let n_face = p + 2;
    let mut face_node_ids: [Vec<usize>; 3] = Default::default();
    for g in 0..3 {
        face_node_ids[g] = vec![g, (g + 1) % 3];
        let a = REF_VERTICES[g];
        let b = REF_VERTICES[(g + 1) % 3];
        // interior face nodes, ascending parameter = moving from start to end
        for k in 2..n_face {
            let s = 0.5 * (fr.nodes[k] + 1.0);
            nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            let j = k - 2;
            group.push(1 + j.min(p - 1 - j));
            face_node_ids[g].push(nodes.len() - 1);
        }
    }
    let n_groups = 1 + (p + 1) / 2;
    Ok(Geometry { group, n_groups, boundary_nodes: nodes, vertex_ids: [0, 1, 2], face_node_ids })
}

/// Nodes of the interior orbits and their derivatives with respect to the
/// orbit parameters.
fn interior_points(layout: &OrbitLayout, params: &[f64]) -> Vec<(usize, [f64; 2], Vec<(usize, [f64; 2])>)> {
    let mut out = Vec::new();
    let mut k = 0;
    for (o, orbit) in layout.interior.iter().enumerate() {
        match orbit {
            InteriorOrbit::Centroid => out.push((o, bary_to_xy([1.0 / 3.0; 3]), vec![])),
            InteriorOrbit::S21 => {
                let a = params[k];
                for v in 0..3 {
                    let mut l = [a; 3];
                    l[v] = 1.0 - 2.0 * a;
                    let mut dl = [1.0; 3];
                    dl[v] = -2.0;
                    out.push((o, bary_to_xy(l), vec![(k, bary_to_xy_lin(dl))]));
                }
            }
            InteriorOrbit::S111 => {
                let (a, b) = (params[k], params[k + 1]);
                let t = [a, b, 1.0 - a - b];
                let da = [1.0, 0.0, -1.0];
                let db = [0.0, 1.0, -1.0];
                for perm in S111_PERMS {
                    let l = [t[perm[0]], t[perm[1]], t[perm[2]]];
                    let la = [da[perm[0]], da[perm[1]], da[perm[2]]];
                    let lb = [db[perm[0]], db[perm[1]], db[perm[2]]];
                    out.push((o, bary_to_xy(l), vec![(k, bary_to_xy_lin(la)), (k + 1, bary_to_xy_lin(lb))]));
                }
            }
        }
        k += orbit.n_params();
    }
    out
}

/// Linear part of the barycentric map (for derivatives).
fn bary_to_xy_lin(dl: [f64; 3]) -> [f64; 2] {
    let mut x = [0.0; 2];
    for k in 0..3 {
        x[0] += dl[k] * REF_VERTICES[k][0];
        x[1] += dl[k] * REF_VERTICES[k][1];
    }
    x
}

struct OrbitSystem {
    layout: OrbitLayout,
    geo: Geometry,
    n_pos: usize,
    monomials: Vec<(usize, usize)>,
    exact: Vec<f64>,
}

impl OrbitSystem {
    fn new(layout: OrbitLayout) -> Result<Self> {
        let geo = boundary_geometry(layout.p)?;
        let n_pos = layout.interior.iter().map(|o| o.n_params()).sum();
        let mut monomials = Vec::new();
        for d in 0..=layout.solve_degree {
            for a in 0..=d {
                monomials.push((a, d - a));
            }
        }
        let exact = monomials.iter().map(|&(a, b)| monomial_moment(a, b)).collect();
        Ok(OrbitSystem { layout, geo, n_pos, monomials, exact })
    }

    fn n_unknowns(&self) -> usize {
        self.n_pos + self.geo.n_groups + self.layout.interior.len()
    }

    /// All nodes with their weight-group index.
    fn nodes(&self, z: &[f64]) -> Vec<([f64; 2], usize)> {
        let mut out: Vec<([f64; 2], usize)> =
            self.geo.boundary_nodes.iter().zip(&self.geo.group).map(|(x, &g)| (*x, g)).collect();
        for (o, x, _) in interior_points(&self.layout, &z[..self.n_pos]) {
            out.push((x, self.geo.n_groups + o));
        }
        out
    }

    fn residual_and_jacobian(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let nm = self.monomials.len();
        let mut r = DVector::from_fn(nm, |i, _| -self.exact[i]);
        let mut jac = DMatrix::zeros(nm, self.n_unknowns());
        let wz = &z[self.n_pos..];
        let mono = |a: usize, b: usize, x: [f64; 2]| x[0].powi(a as i32) * x[1].powi(b as i32);
        for (x, g) in self.geo.boundary_nodes.iter().zip(&self.geo.group) {
            for (i, &(a, b)) in self.monomials.iter().enumerate() {
                let f = mono(a, b, *x);
                r[i] += wz[*g] * f;
                jac[(i, self.n_pos + g)] += f;
            }
        }
        for (o, x, dx) in interior_points(&self.layout, &z[..self.n_pos]) {
            let g = self.geo.n_groups + o;
            for (i, &(a, b)) in self.monomials.iter().enumerate() {
                let f = mono(a, b, x);
                r[i] += wz[g] * f;
                jac[(i, self.n_pos + g)] += f;
                let fx = if a > 0 { a as f64 * x[0].powi(a as i32 - 1) * x[1].powi(b as i32) } else { 0.0 };
                let fy = if b > 0 { b as f64 * x[0].powi(a as i32) * x[1].powi(b as i32 - 1) } else { 0.0 };
                for &(k, d) in &dx {
                    jac[(i, k)] += wz[g] * (fx * d[0] + fy * d[1]);
                }
            }
        }
        (r, jac)
    }

    /// Damped Gauss-Newton; returns the converged unknowns or `None`.
    fn newton(&self, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let (mut r, mut jac) = self.residual_and_jacobian(&z);
        let mut rn = r.norm();
        for _ in 0..200 {
            if rn < 1e-15 {
                break;
            }
            let (step, _) = min_norm_solve(&jac, &(-&r), 1e-13);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
                let (rt, jt) = self.residual_and_jacobian(&trial);
                let rtn = rt.norm();
                if rtn.is_finite() && rtn < rn {
                    z = trial;
                    r = rt;
                    jac = jt;
                    accepted = rn - rtn > 0.0;
                    rn = rtn;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if rn < 1e-13 {
            Some(z)
        } else {
            None
        }
    }

    fn admissible(&self, z: &[f64]) -> bool {
        if z[self.n_pos..].iter().any(|&w| !(w > 0.0)) {
            return false;
        }
        let mut k = 0;
        for orbit in &self.layout.interior {
            match orbit {
                InteriorOrbit::Centroid => {}
                InteriorOrbit::S21 => {
                    let a = z[k];
                    if !(a > 1e-8 && a < 0.5 - 1e-8) || (a - 1.0 / 3.0).abs() < 1e-8 {
                        return false;
                    }
                }
                InteriorOrbit::S111 => {
                    let (a, b) = (z[k], z[k + 1]);
                    let c = 1.0 - a - b;
                    if [a, b, c].iter().any(|&v| v < 1e-8) {
                        return false;
                    }
                    if (a - b).abs() < 1e-8 || (a - c).abs() < 1e-8 || (b - c).abs() < 1e-8 {
                        return false;
                    }
                }
            }
            k += orbit.n_params();
        }
        // distinct orbits
        let pts: Vec<[f64; 2]> = self.nodes(z).into_iter().map(|(x, _)| x).collect();
        for i in 0..pts.len() {
            for j in 0..i {
                if (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) < 1e-8 {
                    return false;
                }
            }
        }
        true
    }

    fn uniform_start(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.n_unknowns());
        let n_s21 = self.layout.interior.iter().filter(|o| **o == InteriorOrbit::S21).count();
        let mut s21_seen = 0;
        for orbit in &self.layout.interior {
            match orbit {
                InteriorOrbit::Centroid => {}
                InteriorOrbit::S21 => {
                    s21_seen += 1;
                    z.push(0.5 * s21_seen as f64 / (n_s21 + 1) as f64);
                }
                InteriorOrbit::S111 => {
                    z.push(0.1);
                    z.push(0.3);
                }
            }
        }
        let n_nodes = self.nodes(&z_pad(&z, self.n_unknowns())).len();
        let w0 = REF_AREA / n_nodes as f64;
        z.resize(self.n_unknowns(), w0);
        z
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.n_unknowns());
        for orbit in &self.layout.interior {
            match orbit {
                InteriorOrbit::Centroid => {}
                InteriorOrbit::S21 => z.push(rng.random_range(0.02..0.48)),
                InteriorOrbit::S111 => {
                    z.push(rng.random_range(0.02..0.6));
                    z.push(rng.random_range(0.02..0.35));
                }
            }
        }
        while z.len() < self.n_unknowns() {
            z.push(rng.random_range(0.01..0.3));
        }
        z
    }

    fn assemble(&self, z: &[f64]) -> TriCubature {
        let wz = &z[self.n_pos..];
        let nodes = self.nodes(z);
        TriCubature {
            p: self.layout.p,
            weights: nodes.iter().map(|(_, g)| wz[*g]).collect(),
            nodes: nodes.into_iter().map(|(x, _)| x).collect(),
            vertex_ids: self.geo.vertex_ids,
            face_node_ids: self.geo.face_node_ids.clone(),
        }
    }
}

fn z_pad(z: &[f64], n: usize) -> Vec<f64> {
    let mut v = z.to_vec();
    v.resize(n, 0.0);
    v
}

/// Number of starts tried by the orbit solver before falling back to stored rules.
const MAX_STARTS: usize = 400;

/// Solves the orbit moment equations for `layout` without any fallback.
pub fn solve_orbits(layout: &OrbitLayout) -> Result<TriCubature> {
    let sys = OrbitSystem::new(layout.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0b_a7e0 + layout.p as u64);
    let mut last_resid = f64::INFINITY;
    for start in 0..MAX_STARTS {
        let z0 = if start == 0 { sys.uniform_start() } else { sys.random_start(&mut rng) };
        if let Some(z) = sys.newton(z0) {
            if sys.admissible(&z) {
                let c = sys.assemble(&z);
                if c.validate().is_ok() {
                    return Ok(c);
                }
            }
            last_resid = last_resid.min(0.0);
        }
    }
    Err(Error::NoConvergence { what: "cubature orbit solve", iterations: MAX_STARTS, residual: last_resid })
}

const STORED: [&str; 5] = [
    include_str!("../data/cubature_p0.json"),
    include_str!("../data/cubature_p1.json"),
    include_str!("../data/cubature_p2.json"),
    include_str!("../data/cubature_p3.json"),
    include_str!("../data/cubature_p4.json"),
];

/// Stored rule for degree `p`, re-verified on load.
pub fn stored_cubature(p: usize) -> Result<TriCubature> {
    if p > MAX_DEGREE {
        return invalid(format!("cubature degree must be in 0..=4, got {p}"));
    }
    TriCubature::from_json(STORED[p])
}

/// Cubature rule of degree `2p` for `p` in 0..=4.
pub fn build_tri_cubature(p: usize) -> Result<TriCubature> {
    let layout = orbit_layout(p)?;
    match solve_orbits(&layout) {
        Ok(c) => Ok(c),
        Err(_) => stored_cubature(p),
    }
}

/// Permutation of node indices induced by mapping vertex `k` to vertex `perm[k]`.
pub fn symmetry_permutation(c: &TriCubature, perm: [usize; 3]) -> Option<Vec<usize>> {
    let map = |x: [f64; 2]| -> [f64; 2] {
        // barycentric coordinates of x
        let l1 = 0.5 * (x[0] + 1.0);
        let l2 = 0.5 * (x[1] + 1.0);
        let l = [1.0 - l1 - l2, l1, l2];
        let mut m = [0.0; 3];
        for k in 0..3 {
            m[perm[k]] = l[k];
        }
        bary_to_xy(m)
    };
    c.nodes
        .iter()
        .map(|&x| {
            let y = map(x);
            c.nodes.iter().position(|z| (z[0] - y[0]).abs() < 1e-12 && (z[1] - y[1]).abs() < 1e-12)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent moment oracle: tensor Gauss rule on the collapsed square.
    fn collapsed_moment(a: usize, b: usize) -> f64 {
        let g = gauss_legendre(12);
        let mut s = 0.0;
        for (u, wu) in &g {
            for (v, wv) in &g {
                // xi = (1+u)(1-v)/2 - 1, eta = v
                let xi = 0.5 * (1.0 + u) * (1.0 - v) - 1.0;
                let eta = *v;
                s += wu * wv * 0.5 * (1.0 - v) * xi.powi(a as i32) * eta.powi(b as i32);
            }
        }
        s
    }

    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|k| {
                let mut x = -(std::f64::consts::PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, d) = crate::ref1d::legendre(n, x);
                    x -= p / d;
                }
                let d = crate::ref1d::legendre(n, x).1;
                (x, 2.0 / ((1.0 - x * x) * d * d))
            })
            .collect()
    }

    #[test]
    fn moments_match_collapsed_quadrature() {
        for a in 0..=8 {
            for b in 0..=8 - a {
                assert_abs_diff_eq!(monomial_moment(a, b), collapsed_moment(a, b), epsilon = 1e-13);
            }
        }
        assert_abs_diff_eq!(monomial_moment(0, 0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn face_rules() {
        let f = face_rule(1, 1.0).unwrap();
        for (b, e) in f.b.iter().zip([1.0 / 6.0, 1.0 / 6.0, 4.0 / 6.0]) {
            assert_abs_diff_eq!(*b, e, epsilon = 1e-15);
        }
        let f0 = face_rule(0, 3.0).unwrap();
        assert_eq!(f0.b, vec![1.5, 1.5]);
        for p in 0..=4 {
            let f = face_rule(p, 2.5).unwrap();
            assert_abs_diff_eq!(f.b.iter().sum::<f64>(), 2.5, epsilon = 1e-14);
        }
        assert!(face_rule(1, 0.0).is_err());
    }

    #[test]
    fn reference_faces() {
        let (n0, l0) = ref_face_geometry(0);
        assert_eq!((n0, l0), ([0.0, -1.0], 2.0));
        let (n1, l1) = ref_face_geometry(1);
        assert_abs_diff_eq!(n1[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(l1, 8f64.sqrt(), epsilon = 1e-15);
        assert_eq!(ref_face_geometry(2).0, [-1.0, 0.0]);
    }

    #[test]
    fn low_degree_rules() {
        let c0 = build_tri_cubature(0).unwrap();
        assert_eq!(c0.n_k(), 3);
        for w in &c0.weights {
            assert_abs_diff_eq!(*w, 2.0 / 3.0, epsilon = 1e-14);
        }
        let c1 = build_tri_cubature(1).unwrap();
        assert_eq!(c1.n_k(), 7);
        assert_abs_diff_eq!(c1.nodes[6][0], -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c1.weights[0], 0.1, epsilon = 1e-13);
        assert_abs_diff_eq!(c1.weights[3], 4.0 / 15.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c1.weights[6], 0.9, epsilon = 1e-13);
    }

    #[test]
    fn all_rules_valid_and_symmetric() {
        for p in 0..=4 {
            let c = build_tri_cubature(p).unwrap();
            c.validate().unwrap();
            assert!(verify_cubature(&c, 2 * p) <= 1e-12);
            assert!((verify_cubature(&c, 0) - 0.0).abs() <= 1e-14);
            for perm in [[1, 2, 0], [0, 2, 1], [2, 1, 0]] {
                let sigma = symmetry_permutation(&c, perm).expect("node set not symmetric");
                for (i, &j) in sigma.iter().enumerate() {
                    assert_abs_diff_eq!(c.weights[i], c.weights[j], epsilon = 1e-12);
                }
            }
            for g in 0..3 {
                let a = &c.face_node_ids[g];
                let b = &c.face_node_ids[(g + 1) % 3];
                let shared: Vec<_> = a.iter().filter(|i| b.contains(i)).collect();
                assert_eq!(shared.len(), 1);
            }
        }
    }

    #[test]
    fn solver_matches_stored_rules() {
        for p in 0..=4 {
            let solved = solve_orbits(&orbit_layout(p).unwrap()).unwrap();
            let stored = stored_cubature(p).unwrap();
            assert_eq!(solved.n_k(), stored.n_k());
            for (a, b) in solved.nodes.iter().zip(&stored.nodes) {
                assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
                assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
            }
            for (a, b) in solved.weights.iter().zip(&stored.weights) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn p2_rule_is_not_exact_beyond_design_degree() {
        let c = build_tri_cubature(2).unwrap();
        assert!(verify_cubature(&c, 4) <= 1e-12);
        assert!(verify_cubature(&c, 6) > 1e-8);
    }

    #[test]
    fn loader_rejects_corrupted_rule() {
        let mut c = build_tri_cubature(2).unwrap();
        c.weights[5] += 1e-6;
        let s = serde_json::to_string(&c).unwrap();
        assert!(TriCubature::from_json(&s).is_err());
        c.weights[5] = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_out_of_range_degree() {
        assert!(build_tri_cubature(5).is_err());
    }
}
