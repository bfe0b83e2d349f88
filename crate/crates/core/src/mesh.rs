//! Triangular meshes, kernel refinement, curvilinear Lagrange maps and metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tri_sbp::SbpTri;

/// Neighbour information for one element face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FaceLink {
    /// Shared face. Consistently oriented elements traverse a shared face in
    /// opposite directions, so the partner's face nodes run in reverse.
    Neighbor { elem: usize, face: usize, periodic: bool },
    Boundary(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMeta {
    pub description: String,
    pub split_diagonal: String,
    pub kernel: String,
}

/// Conforming triangle mesh; face `g` of an element joins its vertices `g` and `g+1 (mod 3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub adjacency: Vec<[FaceLink; 3]>,
    pub periodic_pairs: Vec<[(usize, usize); 2]>,
    pub meta: MeshMeta,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriMesh {
    /// Builds adjacency from vertex sharing plus explicit boundary tags and
    /// periodic face identifications (given as vertex pairs).
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        boundary: &[((usize, usize), String)],
        periodic: &[((usize, usize), (usize, usize))],
        meta: MeshMeta,
    ) -> Result<Self> {
        let mut owners: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            for g in 0..3 {
                owners.entry(edge_key(el[g], el[(g + 1) % 3])).or_default().push((e, g));
            }
        }
        let mut adjacency: Vec<[Option<FaceLink>; 3]> = vec![[None, None, None]; elements.len()];
        for list in owners.values() {
            match list.as_slice() {
                [a, b] => {
                    adjacency[a.0][a.1] = Some(FaceLink::Neighbor { elem: b.0, face: b.1, periodic: false });
                    adjacency[b.0][b.1] = Some(FaceLink::Neighbor { elem: a.0, face: a.1, periodic: false });
                }
                [_] => {}
                _ => return Err(Error::Mesh("face shared by more than two elements".into())),
            }
        }
        let single = |k: (usize, usize)| -> Result<(usize, usize)> {
            match owners.get(&edge_key(k.0, k.1)).map(|v| v.as_slice()) {
                Some([a]) => Ok(*a),
                _ => Err(Error::Mesh(format!("face {k:?} is not a boundary face"))),
            }
        };
        let mut periodic_pairs = Vec::new();
        for &(a, b) in periodic {
            let fa = single(a)?;
            let fb = single(b)?;
            adjacency[fa.0][fa.1] = Some(FaceLink::Neighbor { elem: fb.0, face: fb.1, periodic: true });
            adjacency[fb.0][fb.1] = Some(FaceLink::Neighbor { elem: fa.0, face: fa.1, periodic: true });
            periodic_pairs.push([fa, fb]);
        }
        for (k, tag) in boundary {
            let f = single(*k)?;
            if adjacency[f.0][f.1].is_some() {
                return Err(Error::Mesh(format!("boundary face {k:?} is already matched")));
            }
            adjacency[f.0][f.1] = Some(FaceLink::Boundary(tag.clone()));
        }
        let mut adj = Vec::with_capacity(elements.len());
        for (e, a) in adjacency.into_iter().enumerate() {
            let [a0, a1, a2] = a;
            let unwrap = |x: Option<FaceLink>, g: usize| {
                x.ok_or_else(|| Error::Mesh(format!("face {g} of element {e} is unmatched")))
            };
            adj.push([unwrap(a0, 0)?, unwrap(a1, 1)?, unwrap(a2, 2)?]);
        }
        let mesh = TriMesh { vertices, elements, adjacency: adj, periodic_pairs, meta };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let el = self.elements[e];
        [self.vertices[el[0]], self.vertices[el[1]], self.vertices[el[2]]]
    }

    pub fn signed_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_vertices(e);
        signed_area(a, b, c)
    }

    /// Orientation, involution and shared-face orientation checks.
    pub fn check(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let area = self.signed_area(e);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!("element {e} has non-positive signed area {area:e}")));
            }
            for g in 0..3 {
                if let FaceLink::Neighbor { elem, face, periodic } = self.adjacency[e][g] {
                    match &self.adjacency[elem][face] {
                        FaceLink::Neighbor { elem: e2, face: g2, .. } if *e2 == e && *g2 == g => {}
                        _ => return Err(Error::Mesh(format!("adjacency of element {e} face {g} is not involutive"))),
                    }
                    if !periodic {
                        let a = self.elements[e];
                        let b = self.elements[elem];
                        if a[g] != b[(face + 1) % 3] || a[(g + 1) % 3] != b[face] {
                            return Err(Error::Mesh(format!("element {e} face {g} has inconsistent orientation")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.signed_area(e)).sum()
    }

    /// Distinct vertices after periodic identification (topological count).
    pub fn identified_vertex_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for pair in &self.periodic_pairs {
            let [(e1, g1), (e2, g2)] = *pair;
            let a = self.elements[e1];
            let b = self.elements[e2];
            uf.union(a[g1], b[(g2 + 1) % 3]);
            uf.union(a[(g1 + 1) % 3], b[g2]);
        }
        let used: std::collections::HashSet<usize> = self.elements.iter().flatten().map(|&v| uf.find(v)).collect();
        used.len()
    }

    /// Unique faces after pairing.
    pub fn face_count(&self) -> usize {
        let mut n = 0;
        for e in 0..self.n_elements() {
            for g in 0..3 {
                match self.adjacency[e][g] {
                    FaceLink::Neighbor { elem, face, .. } if (elem, face) < (e, g) => {}
                    _ => n += 1,
                }
            }
        }
        n
    }

    pub fn boundary_faces(&self) -> Vec<(usize, usize, &str)> {
        let mut out = Vec::new();
        for e in 0..self.n_elements() {
            for g in 0..3 {
                if let FaceLink::Boundary(tag) = &self.adjacency[e][g] {
                    out.push((e, g, tag.as_str()));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TriMesh = serde_json::from_str(s)?;
        m.check()?;
        Ok(m)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Structured `nx x ny` grid of quads on the unit parameter square, each split
/// along its lower-left to upper-right diagonal.
///
/// Side tags are `bottom`, `right`, `top`, `left` unless made periodic.
pub fn structured_mesh(
    nx: usize,
    ny: usize,
    map: &dyn Fn([f64; 2]) -> [f64; 2],
    periodic_x: bool,
    periodic_y: bool,
    tags: [&str; 4],
    description: &str,
) -> Result<(TriMesh, Vec<[f64; 2]>)> {
    if nx == 0 || ny == 0 {
        return invalid("structured mesh needs at least one cell per direction");
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut param = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            param.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let vertices: Vec<[f64; 2]> = param.iter().map(|&x| map(x)).collect();
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            elements.push([ll, lr, ur]);
            elements.push([ll, ur, ul]);
        }
    }
    let mut boundary = Vec::new();
    let mut periodic = Vec::new();
    for i in 0..nx {
        let bottom = (vid(i, 0), vid(i + 1, 0));
        let top = (vid(i, ny), vid(i + 1, ny));
        if periodic_y {
            periodic.push((bottom, top));
        } else {
            boundary.push((bottom, tags[0].to_string()));
            boundary.push((top, tags[2].to_string()));
        }
    }
    for j in 0..ny {
        let left = (vid(0, j), vid(0, j + 1));
        let right = (vid(nx, j), vid(nx, j + 1));
        if periodic_x {
            periodic.push((left, right));
        } else {
            boundary.push((right, tags[1].to_string()));
            boundary.push((left, tags[3].to_string()));
        }
    }
    let meta = MeshMeta {
        description: description.to_string(),
        split_diagonal: "lower-left to upper-right".into(),
        kernel: "none".into(),
    };
    let mesh = TriMesh::from_parts(vertices, elements, &boundary, &periodic, meta)?;
    Ok((mesh, param))
}

/// Periodic unit square split into `n x n` quads (two triangles each).
pub fn unit_square_periodic_mesh(n: usize) -> Result<TriMesh> {
    Ok(structured_mesh(n, n, &|x| x, true, true, ["bottom", "right", "top", "left"], "periodic unit square")?.0)
}

/// Subdivision pattern applied to every triangle during refinement.
///
/// Each edge carries two new points at parameters `edge_param` and
/// `1 - edge_param` from its start; one interior point is placed at the given
/// barycentric coordinates; nine triangles result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub edge_param: f64,
    pub interior: [f64; 3],
}

impl Kernel {
    pub fn uniform() -> Self {
        Kernel { edge_param: 1.0 / 3.0, interior: [1.0 / 3.0; 3] }
    }

    /// A non-uniform variant that keeps element sizes from varying smoothly.
    pub fn perturbed() -> Self {
        Kernel { edge_param: 0.3, interior: [0.36, 0.32, 0.32] }
    }

    fn label(&self) -> String {
        if *self == Kernel::uniform() {
            "uniform trisection".into()
        } else {
            format!("trisection at {} with interior point {:?}", self.edge_param, self.interior)
        }
    }
}

// Local point labels: A B C, P1 P2 on AB, Q1 Q2 on BC, R1 R2 on CA, G interior.
const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const P1: usize = 3;
const P2: usize = 4;
const Q1: usize = 5;
const Q2: usize = 6;
const R1: usize = 7;
const R2: usize = 8;
const G: usize = 9;

const KERNEL_TRIS: [[usize; 3]; 9] = [
    [A, P1, R2],
    [P1, P2, G],
    [P2, B, Q1],
    [R2, G, R1],
    [G, Q1, Q2],
    [R1, Q2, C],
    [P1, G, R2],
    [P2, Q1, G],
    [G, Q2, R1],
];

/// Child (triangle, face) covering segment `i` (from the start) of parent face `g`.
const KERNEL_FACE_SEGMENTS: [[(usize, usize); 3]; 3] =
    [[(0, 0), (1, 0), (2, 0)], [(2, 1), (4, 1), (5, 1)], [(5, 2), (3, 2), (0, 2)]];

/// Applies `levels` rounds of kernel subdivision.
pub fn kernel_refine(mesh: &TriMesh, levels: usize, kernel: Kernel) -> Result<TriMesh> {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = refine_once(&m, kernel)?;
    }
    Ok(m)
}

fn refine_once(mesh: &TriMesh, kernel: Kernel) -> Result<TriMesh> {
    let t = kernel.edge_param;
    if !(t > 0.0 && t < 0.5) {
        return invalid("kernel edge parameter must lie in (0, 1/2)");
    }
    let mut vertices = mesh.vertices.clone();
    let ne = mesh.n_elements();
    // new edge points per (element, face), ordered from the face start
    let mut edge_pts: Vec<[[usize; 2]; 3]> = vec![[[usize::MAX; 2]; 3]; ne];
    for e in 0..ne {
        let el = mesh.elements[e];
        for g in 0..3 {
            if let FaceLink::Neighbor { elem, face, periodic: false } = mesh.adjacency[e][g] {
                if elem < e || (elem == e && face < g) {
                    let [a, b] = edge_pts[elem][face];
                    edge_pts[e][g] = [b, a];
                    continue;
                }
            }
            let xa = mesh.vertices[el[g]];
            let xb = mesh.vertices[el[(g + 1) % 3]];
            let mut ids = [0; 2];
            for (k, s) in [t, 1.0 - t].into_iter().enumerate() {
                vertices.push([xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])]);
                ids[k] = vertices.len() - 1;
            }
            edge_pts[e][g] = ids;
        }
    }
    let mut elements = Vec::with_capacity(9 * ne);
    for e in 0..ne {
        let el = mesh.elements[e];
        let [xa, xb, xc] = mesh.element_vertices(e);
        let l = kernel.interior;
        vertices.push([
            l[0] * xa[0] + l[1] * xb[0] + l[2] * xc[0],
            l[0] * xa[1] + l[1] * xb[1] + l[2] * xc[1],
        ]);
        let local = [
            el[0],
            el[1],
            el[2],
            edge_pts[e][0][0],
            edge_pts[e][0][1],
            edge_pts[e][1][0],
            edge_pts[e][1][1],
            edge_pts[e][2][0],
            edge_pts[e][2][1],
            vertices.len() - 1,
        ];
        for tri in KERNEL_TRIS {
            elements.push([local[tri[0]], local[tri[1]], local[tri[2]]]);
        }
    }
    let child_face = |e: usize, g: usize, i: usize| -> (usize, usize) {
        let (c, f) = KERNEL_FACE_SEGMENTS[g][i];
        (9 * e + c, f)
    };
    let face_verts = |elements: &Vec<[usize; 3]>, (c, f): (usize, usize)| {
        let el = elements[c];
        (el[f], el[(f + 1) % 3])
    };
    let mut boundary = Vec::new();
    let mut periodic = Vec::new();
    for e in 0..ne {
        for g in 0..3 {
            match &mesh.adjacency[e][g] {
                FaceLink::Boundary(tag) => {
                    for i in 0..3 {
                        boundary.push((face_verts(&elements, child_face(e, g, i)), tag.clone()));
                    }
                }
                FaceLink::Neighbor { elem, face, periodic: true } if (*elem, *face) > (e, g) => {
                    for i in 0..3 {
                        let a = face_verts(&elements, child_face(e, g, i));
                        let b = face_verts(&elements, child_face(*elem, *face, 2 - i));
                        periodic.push((a, b));
                    }
                }
                _ => {}
            }
        }
    }
    let meta = MeshMeta { kernel: kernel.label(), ..mesh.meta.clone() };
    TriMesh::from_parts(vertices, elements, &boundary, &periodic, meta)
}

/// Periodic unit square built from two triangles and refined `level` times,
/// giving `2 * 9^level` elements of nominal size `(1/3)^level`.
pub fn kernel_square_mesh(level: usize, kernel: Kernel) -> Result<TriMesh> {
    let base = unit_square_periodic_mesh(1)?;
    kernel_refine(&base, level, kernel)
}

/// Per-element Lagrange control nodes of degree `degree` on uniform lattices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeMap {
    pub degree: usize,
    pub control_nodes: Vec<Vec<[f64; 2]>>,
}

/// Lattice index pairs `(i, j)` with barycentric weights `(i/q)` on vertex 1 and `(j/q)` on vertex 2.
pub fn lattice(q: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((q + 1) * (q + 2) / 2);
    for j in 0..=q {
        for i in 0..=q - j {
            out.push((i, j));
        }
    }
    out
}

/// Product `prod_{m < k} (q l - m)/(m + 1)` and its derivative in `l`.
fn silvester(q: usize, k: usize, l: f64) -> (f64, f64) {
    let mut v = 1.0;
    let mut d = 0.0;
    for m in 0..k {
        let f = (q as f64 * l - m as f64) / (m + 1) as f64;
        let df = q as f64 / (m + 1) as f64;
        d = d * f + v * df;
        v *= f;
    }
    (v, d)
}

/// Values and reference derivatives of the degree-`q` uniform Lagrange basis at `x`.
pub fn lagrange_basis(q: usize, x: [f64; 2]) -> Vec<(f64, f64, f64)> {
    let l1 = 0.5 * (x[0] + 1.0);
    let l2 = 0.5 * (x[1] + 1.0);
    let l0 = 1.0 - l1 - l2;
    lattice(q)
        .into_iter()
        .map(|(i, j)| {
            let k = q - i - j;
            let (a, da) = silvester(q, i, l1);
            let (b, db) = silvester(q, j, l2);
            let (c, dc) = silvester(q, k, l0);
            let v = a * b * c;
            // dl1/dxi = 1/2, dl2/deta = 1/2, dl0/dxi = dl0/deta = -1/2
            let dxi = 0.5 * (da * b * c - a * b * dc);
            let deta = 0.5 * (a * db * c - a * b * dc);
            (v, dxi, deta)
        })
        .collect()
}

impl LagrangeMap {
    /// Control nodes from parameter-space element vertices pushed through `map`.
    pub fn from_param(elements: &[[usize; 3]], param: &[[f64; 2]], degree: usize, map: &dyn Fn([f64; 2]) -> [f64; 2]) -> Self {
        let lat = lattice(degree);
        let control_nodes = elements
            .iter()
            .map(|el| {
                let (p0, p1, p2) = (param[el[0]], param[el[1]], param[el[2]]);
                lat.iter()
                    .map(|&(i, j)| {
                        let (s, t) = (i as f64 / degree as f64, j as f64 / degree as f64);
                        map([
                            p0[0] + s * (p1[0] - p0[0]) + t * (p2[0] - p0[0]),
                            p0[1] + s * (p1[1] - p0[1]) + t * (p2[1] - p0[1]),
                        ])
                    })
                    .collect()
            })
            .collect();
        LagrangeMap { degree, control_nodes }
    }

    /// Straight-sided map of the given mesh.
    pub fn affine(mesh: &TriMesh, degree: usize) -> Self {
        LagrangeMap::from_param(&mesh.elements, &mesh.vertices, degree.max(1), &|x| x)
    }

    /// Physical position and Jacobian matrix `[[x_xi, x_eta], [y_xi, y_eta]]` at reference point `x`.
    pub fn eval(&self, e: usize, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let basis = lagrange_basis(self.degree, x);
        let mut pos = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for ((v, dxi, deta), c) in basis.into_iter().zip(&self.control_nodes[e]) {
            for d in 0..2 {
                pos[d] += v * c[d];
                jac[d][0] += dxi * c[d];
                jac[d][1] += deta * c[d];
            }
        }
        (pos, jac)
    }
}

/// Mapping data at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMetric {
    pub x: [f64; 2],
    pub dx_dxi: f64,
    pub dx_deta: f64,
    pub dy_dxi: f64,
    pub dy_deta: f64,
    pub jac: f64,
}

impl NodeMetric {
    /// `J grad(xi)`, i.e. `(y_eta, -x_eta)`.
    pub fn j_grad_xi(&self) -> [f64; 2] {
        [self.dy_deta, -self.dx_deta]
    }

    /// `J grad(eta)`, i.e. `(-y_xi, x_xi)`.
    pub fn j_grad_eta(&self) -> [f64; 2] {
        [-self.dy_dxi, self.dx_dxi]
    }
}

/// Metrics at the SBP nodes of every element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricData {
    pub nodes: Vec<Vec<NodeMetric>>,
}

pub fn compute_metrics(map: &LagrangeMap, op: &SbpTri) -> Result<MetricData> {
    let mut nodes = Vec::with_capacity(map.control_nodes.len());
    for e in 0..map.control_nodes.len() {
        let mut row = Vec::with_capacity(op.n_k());
        for xi in &op.cubature.nodes {
            let (x, j) = map.eval(e, *xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(Error::NonPositiveJacobian { element: e, det });
            }
            row.push(NodeMetric { x, dx_dxi: j[0][0], dx_deta: j[0][1], dy_dxi: j[1][0], dy_deta: j[1][1], jac: det });
        }
        nodes.push(row);
    }
    Ok(MetricData { nodes })
}

/// Radius range and angle range of the quarter annulus.
pub const ANNULUS_R: (f64, f64) = (1.0, 3.0);

pub fn annulus_map(x: [f64; 2]) -> [f64; 2] {
    let r = ANNULUS_R.0 + (ANNULUS_R.1 - ANNULUS_R.0) * x[0];
    let th = 0.5 * std::f64::consts::PI * x[1];
    [r * th.cos(), r * th.sin()]
}

/// Quarter annulus `1 <= r <= 3`, `0 <= theta <= pi/2` from an `n x n` polar grid.
///
/// Tags: `inner` (r = 1), `outer` (r = 3), `side` (theta = 0 and pi/2).
pub fn quarter_annulus_mesh(n: usize, p: usize) -> Result<(TriMesh, LagrangeMap)> {
    if !(1..=4).contains(&p) {
        return invalid(format!("degree must be in 1..=4, got {p}"));
    }
    let (mesh, param) = structured_mesh(n, n, &annulus_map, false, false, ["side", "outer", "side", "inner"], "quarter annulus")?;
    let map = LagrangeMap::from_param(&mesh.elements, &param, p + 1, &annulus_map);
    Ok((mesh, map))
}

pub fn warp_map(x: [f64; 2]) -> [f64; 2] {
    let pi3 = 3.0 * std::f64::consts::PI;
    let d = (pi3 * x[0]).sin() * (pi3 * x[1]).sin() / 20.0;
    [x[0] + d, x[1] - d]
}

/// Periodic unit square on a 6 x 6 quad grid with a sinusoidal interior warp.
pub fn warped_periodic_mesh(p: usize) -> Result<(TriMesh, LagrangeMap)> {
    if !(1..=4).contains(&p) {
        return invalid(format!("degree must be in 1..=4, got {p}"));
    }
    let (mesh, param) = structured_mesh(6, 6, &warp_map, true, true, ["bottom", "right", "top", "left"], "warped periodic square")?;
    let map = LagrangeMap::from_param(&mesh.elements, &param, p + 1, &warp_map);
    Ok((mesh, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tri_sbp::build_sbp_tri;
    use approx::assert_abs_diff_eq;

    fn euler_characteristic(m: &TriMesh) -> i64 {
        m.identified_vertex_count() as i64 - m.face_count() as i64 + m.n_elements() as i64
    }

    #[test]
    fn periodic_square_is_a_torus() {
        for n in 1..=4 {
            let m = unit_square_periodic_mesh(n).unwrap();
            assert!(m.boundary_faces().is_empty());
            assert_abs_diff_eq!(m.total_area(), 1.0, epsilon = 1e-14);
            assert_eq!(euler_characteristic(&m), 0);
        }
    }

    #[test]
    fn refinement_counts() {
        for kernel in [Kernel::uniform(), Kernel::perturbed()] {
            let base = unit_square_periodic_mesh(1).unwrap();
            assert_eq!(kernel_refine(&base, 0, kernel).unwrap(), base);
            for lev in 1..=2 {
                let m = kernel_square_mesh(lev, kernel).unwrap();
                assert_eq!(m.n_elements(), 2 * 9usize.pow(lev as u32));
                assert_abs_diff_eq!(m.total_area(), 1.0, epsilon = 1e-13);
                assert_eq!(euler_characteristic(&m), 0);
                assert!(m.boundary_faces().is_empty());
            }
        }
    }

    #[test]
    fn refinement_preserves_boundary_tags() {
        let (m, _) = structured_mesh(2, 1, &|x| x, false, true, ["b", "r", "t", "l"], "strip").unwrap();
        let r = kernel_refine(&m, 1, Kernel::uniform()).unwrap();
        let tags: Vec<&str> = r.boundary_faces().into_iter().map(|(_, _, t)| t).collect();
        assert_eq!(tags.iter().filter(|t| **t == "r").count(), 3);
        assert_eq!(tags.iter().filter(|t| **t == "l").count(), 3);
        assert_eq!(r.periodic_pairs.len(), 6);
    }

    #[test]
    fn lagrange_basis_partition_of_unity() {
        for q in 1..=5 {
            for x in [[-1.0, -1.0], [-0.2, -0.3], [0.0, -1.0], [-0.5, 0.4]] {
                let b = lagrange_basis(q, x);
                let (s, sx, sy) = b.iter().fold((0.0, 0.0, 0.0), |a, v| (a.0 + v.0, a.1 + v.1, a.2 + v.2));
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(sx, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(sy, 0.0, epsilon = 1e-12);
            }
            // cardinal property at the lattice
            for (k, &(i, j)) in lattice(q).iter().enumerate() {
                let x = [-1.0 + 2.0 * i as f64 / q as f64, -1.0 + 2.0 * j as f64 / q as f64];
                for (m, v) in lagrange_basis(q, x).iter().enumerate() {
                    assert_abs_diff_eq!(v.0, if m == k { 1.0 } else { 0.0 }, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_and_affine_metrics() {
        let op = build_sbp_tri(2).unwrap();
        let mesh = TriMesh::from_parts(
            vec![[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]],
            vec![[0, 1, 2]],
            &[((0, 1), "b".into()), ((1, 2), "b".into()), ((2, 0), "b".into())],
            &[],
            MeshMeta { description: "ref".into(), split_diagonal: "none".into(), kernel: "none".into() },
        )
        .unwrap();
        let md = compute_metrics(&LagrangeMap::affine(&mesh, 3), &op).unwrap();
        for m in &md.nodes[0] {
            assert_abs_diff_eq!(m.jac, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(m.dx_dxi, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(m.dx_deta, 0.0, epsilon = 1e-13);
        }
        let scaled = LagrangeMap::from_param(&mesh.elements, &mesh.vertices, 3, &|x| [2.0 * x[0], 3.0 * x[1]]);
        let md = compute_metrics(&scaled, &op).unwrap();
        for m in &md.nodes[0] {
            assert_abs_diff_eq!(m.jac, 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn warped_mesh_properties() {
        assert_eq!(warp_map([0.0, 0.0]), [0.0, 0.0]);
        let w = warp_map([1.0 / 6.0, 1.0 / 6.0]);
        assert_abs_diff_eq!(w[0], 1.0 / 6.0 + 1.0 / 20.0, epsilon = 1e-15);
        for p in 1..=3 {
            let (mesh, map) = warped_periodic_mesh(p).unwrap();
            assert_eq!(mesh.n_elements(), 72);
            let op = build_sbp_tri(p).unwrap();
            let md = compute_metrics(&map, &op).unwrap();
            let area: f64 = md.nodes.iter().map(|el| el.iter().zip(&op.h).map(|(m, h)| m.jac * h).sum::<f64>()).sum();
            assert_abs_diff_eq!(area, 1.0, epsilon = 1e-12);
            // finite-difference check of x_xi
            let e = 17;
            let x = op.cubature.nodes[4];
            let hstep = 1e-6;
            let fp = map.eval(e, [x[0] + hstep, x[1]]).0;
            let fm = map.eval(e, [x[0] - hstep, x[1]]).0;
            assert_abs_diff_eq!((fp[0] - fm[0]) / (2.0 * hstep), md.nodes[e][4].dx_dxi, epsilon = 1e-6);
        }
    }

    #[test]
    fn annulus_properties() {
        let (mesh, map) = quarter_annulus_mesh(4, 2).unwrap();
        assert_eq!(mesh.n_elements(), 32);
        let op = build_sbp_tri(2).unwrap();
        let md = compute_metrics(&map, &op).unwrap();
        let area: f64 = md.nodes.iter().map(|el| el.iter().zip(&op.h).map(|(m, h)| m.jac * h).sum::<f64>()).sum();
        assert_abs_diff_eq!(area, 2.0 * std::f64::consts::PI, epsilon = 1e-4);
        let inner = mesh.boundary_faces().into_iter().filter(|f| f.2 == "inner").count();
        assert_eq!(inner, 4);
        assert!(quarter_annulus_mesh(4, 0).is_err());
    }

    #[test]
    fn shared_faces_are_watertight() {
        for (mesh, map) in [warped_periodic_mesh(3).unwrap(), quarter_annulus_mesh(3, 3).unwrap()] {
            let op = build_sbp_tri(3).unwrap();
            for e in 0..mesh.n_elements() {
                for g in 0..3 {
                    if let FaceLink::Neighbor { elem, face, periodic: false } = mesh.adjacency[e][g] {
                        let a = op.face_ids(g);
                        let b = op.face_ids(face);
                        let n = a.len();
                        for k in 0..n {
                            // partner index under reversal
                            let kk = match k {
                                0 => 1,
                                1 => 0,
                                _ => 2 + (n - 3) - (k - 2),
                            };
                            let xa = map.eval(e, op.cubature.nodes[a[k]]).0;
                            let xb = map.eval(elem, op.cubature.nodes[b[kk]]).0;
                            assert!((xa[0] - xb[0]).abs() < 1e-12 && (xa[1] - xb[1]).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = kernel_square_mesh(1, Kernel::uniform()).unwrap();
        let back = TriMesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
