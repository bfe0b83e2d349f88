//! Ideal-gas state functions, entropy variables and two-point fluxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conservative state `[rho, rho u, rho v, e]`.
pub type State = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerThermo {
    pub gamma: f64,
}

impl Default for EulerThermo {
    fn default() -> Self {
        EulerThermo { gamma: 1.4 }
    }
}

/// Primitive variables of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl EulerThermo {
    pub fn pressure(&self, q: &State) -> f64 {
        (self.gamma - 1.0) * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / q[0])
    }

    /// Primitive variables, or an inadmissibility error tagged with `(element, node)`.
    pub fn primitive_at(&self, q: &State, element: usize, node: usize) -> Result<Primitive> {
        let rho = q[0];
        let p = if rho > 0.0 { self.pressure(q) } else { f64::NAN };
        if !(rho > 0.0 && p > 0.0) || !rho.is_finite() || !p.is_finite() {
            return Err(Error::Inadmissible { element, node, rho, p });
        }
        Ok(Primitive { rho, u: q[1] / rho, v: q[2] / rho, p })
    }

    pub fn primitive(&self, q: &State) -> Result<Primitive> {
        self.primitive_at(q, usize::MAX, usize::MAX)
    }

    pub fn conservative(&self, w: &Primitive) -> State {
        [w.rho, w.rho * w.u, w.rho * w.v, w.p / (self.gamma - 1.0) + 0.5 * w.rho * (w.u * w.u + w.v * w.v)]
    }

    pub fn sound_speed(&self, w: &Primitive) -> f64 {
        (self.gamma * w.p / w.rho).sqrt()
    }

    /// Physical entropy `s = ln(p / rho^gamma)`.
    pub fn physical_entropy(&self, w: &Primitive) -> f64 {
        (w.p / w.rho.powf(self.gamma)).ln()
    }

    /// Mathematical entropy `-rho s / (gamma - 1)`.
    pub fn entropy(&self, q: &State) -> Result<f64> {
        let w = self.primitive(q)?;
        Ok(-w.rho * self.physical_entropy(&w) / (self.gamma - 1.0))
    }

    /// Entropy and the potential fluxes `(psi_x, psi_y) = (rho u, rho v)`.
    pub fn entropy_and_potentials(&self, q: &State) -> Result<(f64, f64, f64)> {
        Ok((self.entropy(q)?, q[1], q[2]))
    }

    pub fn entropy_vars(&self, q: &State) -> Result<State> {
        let w = self.primitive(q)?;
        Ok(self.entropy_vars_prim(&w))
    }

    pub fn entropy_vars_prim(&self, w: &Primitive) -> State {
        let g = self.gamma;
        let s = self.physical_entropy(w);
        let b = w.rho / w.p;
        [(g - s) / (g - 1.0) - 0.5 * b * (w.u * w.u + w.v * w.v), b * w.u, b * w.v, -b]
    }

    /// Inverse of the entropy-variable map.
    pub fn state_from_entropy_vars(&self, wv: &State) -> Result<State> {
        let g = self.gamma;
        let b = -wv[3];
        if !(b > 0.0) {
            return Err(Error::InvalidArgument(format!("last entropy variable must be negative, got {}", wv[3])));
        }
        let u = wv[1] / b;
        let v = wv[2] / b;
        // s from the first entry, then rho from p = rho / b and s = ln(p / rho^g)
        let s = g - (g - 1.0) * (wv[0] + 0.5 * b * (u * u + v * v));
        let rho = ((-s - b.ln()) / (g - 1.0)).exp();
        let p = rho / b;
        Ok(self.conservative(&Primitive { rho, u, v, p }))
    }

    /// `dU/dW`, the inverse Hessian of the entropy.
    pub fn dudw(&self, q: &State) -> Result<[[f64; 4]; 4]> {
        let w = self.primitive(q)?;
        Ok(self.dudw_prim(&w))
    }

    pub fn dudw_prim(&self, w: &Primitive) -> [[f64; 4]; 4] {
        let g = self.gamma;
        let (r, u, v, p) = (w.rho, w.u, w.v, w.p);
        let e = p / (g - 1.0) + 0.5 * r * (u * u + v * v);
        let h = (e + p) / r;
        let a2 = g * p / r;
        [
            [r, r * u, r * v, e],
            [r * u, r * u * u + p, r * u * v, r * u * h],
            [r * v, r * u * v, r * v * v + p, r * v * h],
            [e, r * u * h, r * v * h, r * h * h - a2 * p / (g - 1.0)],
        ]
    }

    /// Physical flux in the (not necessarily unit) direction `n`.
    pub fn flux(&self, q: &State, n: [f64; 2]) -> Result<State> {
        let w = self.primitive(q)?;
        Ok(self.flux_prim(&w, q[3], n))
    }

    fn flux_prim(&self, w: &Primitive, e: f64, n: [f64; 2]) -> State {
        let un = w.u * n[0] + w.v * n[1];
        [w.rho * un, w.rho * un * w.u + w.p * n[0], w.rho * un * w.v + w.p * n[1], (e + w.p) * un]
    }

    /// `sigma = |n . (u, v)| + a |n|`.
    pub fn spectral_radius(&self, w: &Primitive, n: [f64; 2]) -> f64 {
        (w.u * n[0] + w.v * n[1]).abs() + self.sound_speed(w) * n[0].hypot(n[1])
    }
}

/// Logarithmic mean `(a - b) / (ln a - ln b)` evaluated without cancellation.
pub fn log_mean(a: f64, b: f64) -> f64 {
    // |f| keeps the result bitwise symmetric in (a, b)
    let f = (a - b).abs() / (a + b);
    let u = f * f;
    // ln(a/b) = 2 atanh(f)
    let g = if u < 1e-4 { 1.0 + u / 3.0 + u * u / 5.0 + u * u * u / 7.0 } else { f.atanh() / f };
    0.5 * (a + b) / g
}

/// Entropy-conservative two-point flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TwoPointFlux {
    #[default]
    IsmailRoe,
    Chandrashekar,
}

impl TwoPointFlux {
    pub fn name(&self) -> &'static str {
        match self {
            TwoPointFlux::IsmailRoe => "ismail-roe",
            TwoPointFlux::Chandrashekar => "chandrashekar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ismail-roe" => Some(TwoPointFlux::IsmailRoe),
            "chandrashekar" => Some(TwoPointFlux::Chandrashekar),
            _ => None,
        }
    }

    /// Flux between two admissible states in direction `n`.
    pub fn eval(&self, th: &EulerThermo, l: &Primitive, r: &Primitive, n: [f64; 2]) -> State {
        match self {
            TwoPointFlux::IsmailRoe => ismail_roe(th, l, r, n),
            TwoPointFlux::Chandrashekar => chandrashekar(th, l, r, n),
        }
    }

    pub fn eval_states(&self, th: &EulerThermo, ql: &State, qr: &State, n: [f64; 2]) -> Result<State> {
        Ok(self.eval(th, &th.primitive(ql)?, &th.primitive(qr)?, n))
    }
}

fn ismail_roe(th: &EulerThermo, l: &Primitive, r: &Primitive, n: [f64; 2]) -> State {
    let g = th.gamma;
    let z = |w: &Primitive| {
        let z1 = (w.rho / w.p).sqrt();
        [z1, z1 * w.u, z1 * w.v, (w.rho * w.p).sqrt()]
    };
    let zl = z(l);
    let zr = z(r);
    let avg = |k: usize| 0.5 * (zl[k] + zr[k]);
    let z1_ln = log_mean(zl[0], zr[0]);
    let z4_ln = log_mean(zl[3], zr[3]);
    let rho = avg(0) * z4_ln;
    let u = avg(1) / avg(0);
    let v = avg(2) / avg(0);
    let p1 = avg(3) / avg(0);
    let p2 = (g + 1.0) / (2.0 * g) * z4_ln / z1_ln + (g - 1.0) / (2.0 * g) * avg(3) / avg(0);
    let a2 = g * p2 / rho;
    let h = a2 / (g - 1.0) + 0.5 * (u * u + v * v);
    let mass = rho * (u * n[0] + v * n[1]);
    [mass, mass * u + p1 * n[0], mass * v + p1 * n[1], mass * h]
}

fn chandrashekar(th: &EulerThermo, l: &Primitive, r: &Primitive, n: [f64; 2]) -> State {
    let g = th.gamma;
    let bl = 0.5 * l.rho / l.p;
    let br = 0.5 * r.rho / r.p;
    let rho_ln = log_mean(l.rho, r.rho);
    let b_ln = log_mean(bl, br);
    let u = 0.5 * (l.u + r.u);
    let v = 0.5 * (l.v + r.v);
    let p = 0.5 * (l.rho + r.rho) / (bl + br);
    let vel2 = 0.5 * (l.u * l.u + l.v * l.v + r.u * r.u + r.v * r.v);
    let f1 = rho_ln * (u * n[0] + v * n[1]);
    let f2 = f1 * u + p * n[0];
    let f3 = f1 * v + p * n[1];
    let f4 = f1 * (1.0 / (2.0 * (g - 1.0) * b_ln) - 0.5 * vel2) + u * f2 + v * f3;
    [f1, f2, f3, f4]
}

/// Roe upwind flux in direction `n`; `l` is the interior state, `r` the exterior.
pub fn roe_flux(th: &EulerThermo, ql: &State, qr: &State, n: [f64; 2]) -> Result<State> {
    let g = th.gamma;
    let l = th.primitive(ql)?;
    let r = th.primitive(qr)?;
    let nn = n[0].hypot(n[1]);
    let (nx, ny) = (n[0] / nn, n[1] / nn);
    let fl = th.flux_prim(&l, ql[3], n);
    let fr = th.flux_prim(&r, qr[3], n);
    let sl = l.rho.sqrt();
    let sr = r.rho.sqrt();
    let hl = (ql[3] + l.p) / l.rho;
    let hr = (qr[3] + r.p) / r.rho;
    let u = (sl * l.u + sr * r.u) / (sl + sr);
    let v = (sl * l.v + sr * r.v) / (sl + sr);
    let h = (sl * hl + sr * hr) / (sl + sr);
    let rho = sl * sr;
    let a2 = (g - 1.0) * (h - 0.5 * (u * u + v * v));
    let a = a2.sqrt();
    let qn = u * nx + v * ny;
    let dp = r.p - l.p;
    let drho = r.rho - l.rho;
    let du = r.u - l.u;
    let dv = r.v - l.v;
    let dqn = du * nx + dv * ny;
    let a1 = (dp - rho * a * dqn) / (2.0 * a2);
    let a4 = (dp + rho * a * dqn) / (2.0 * a2);
    let a2w = drho - dp / a2;
    let (l1, l2, l4) = ((qn - a).abs(), qn.abs(), (qn + a).abs());
    let r1 = [1.0, u - a * nx, v - a * ny, h - a * qn];
    let r4 = [1.0, u + a * nx, v + a * ny, h + a * qn];
    let r2 = [1.0, u, v, 0.5 * (u * u + v * v)];
    let r3 = [0.0, du - dqn * nx, dv - dqn * ny, u * du + v * dv - qn * dqn];
    let mut out = [0.0; 4];
    for k in 0..4 {
        let diss = l1 * a1 * r1[k] + l2 * (a2w * r2[k] + rho * r3[k]) + l4 * a4 * r4[k];
        out[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * nn * diss;
    }
    Ok(out)
}

/// Slip-wall flux: pressure only in direction `n`.
pub fn wall_flux(th: &EulerThermo, q: &State, n: [f64; 2]) -> Result<State> {
    let p = th.primitive(q)?.p;
    Ok([0.0, p * n[0], p * n[1], 0.0])
}
