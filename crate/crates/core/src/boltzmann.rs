//! Non-cutoff Boltzmann operator with a grazing cutoff `theta_min`.
//!
//! The kernel is `B = C_B |v - u|^gamma b(cos theta)` with
//! `sin(theta) b(cos theta) = theta^{-1-2s}` on `(theta_min, pi/2]`.
//! Writing `phi = f / sqrt(mu)` and using
//! `sqrt(mu(u')) sqrt(mu(v')) = sqrt(mu(u)) sqrt(mu(v))`,
//!
//! ```text
//! Gamma(f, g)(v) = sqrt(mu(v)) sum_u mu(u) sum_sigma B
//!                  [phi_f(u') phi_g(v') - phi_f(u) phi_g(v)].
//! ```
//!
//! Off-grid values of `phi` come from tensor-quadratic Lagrange
//! interpolation, which reproduces `1, v_i, |v|^2` exactly, so the
//! collision invariants are annihilated up to the zero extension outside
//! the box. Pairs `(v, u)` whose Maxwellian factor falls below
//! `pair_cutoff` relative to its peak are skipped as a whole.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{KineticError, Result};
use crate::grid::{maxwellian_at, VelocityGrid, WeightSpec, C64};
use crate::symmetry::{family_action, fundamental_rows, stabilizer_size, CubeSymmetry, FamilyAction};

/// `v' = (v+u)/2 + |v-u| sigma / 2`, `u' = (v+u)/2 - |v-u| sigma / 2`.
pub fn post_collision(v: [f64; 3], u: [f64; 3], sigma: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let r = ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2) + (v[2] - u[2]).powi(2)).sqrt();
    let vp = std::array::from_fn(|i| 0.5 * (v[i] + u[i]) + 0.5 * r * sigma[i]);
    let up = std::array::from_fn(|i| 0.5 * (v[i] + u[i]) - 0.5 * r * sigma[i]);
    (vp, up)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Product rule on the hemisphere `cos theta >= 0` around the relative
/// velocity, with the angular kernel folded into the weights: Gauss-Legendre
/// in `log theta` on `[log theta_min, log pi/2]` times a uniform azimuth.
#[derive(Debug, Clone)]
pub struct SphereRule {
    /// `(cos theta, sin theta, cos phi, sin phi, weight)`.
    pub nodes: Vec<[f64; 5]>,
    pub total_weight: f64,
}

impl SphereRule {
    pub fn new(s: f64, theta_min: f64, n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        // Gauss-Legendre in log(theta) absorbs the theta^{-1-2s} singularity.
        let (a, b) = (theta_min.ln(), (PI / 2.0).ln());
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let theta = (0.5 * (b - a) * xi + 0.5 * (b + a)).exp();
            let wt = 0.5 * (b - a) * wi * theta.powf(-2.0 * s) * 2.0 * PI / n_phi as f64;
            for l in 0..n_phi {
                let phi = 2.0 * PI * (l as f64 + 0.5) / n_phi as f64;
                nodes.push([theta.cos(), theta.sin(), phi.cos(), phi.sin(), wt]);
            }
        }
        let total_weight = nodes.iter().map(|n| n[4]).sum();
        Self { nodes, total_weight }
    }

    /// Direction `sigma` for node `k` in the frame of the unit vector `e`.
    #[inline]
    pub fn direction(&self, k: usize, frame: &[[f64; 3]; 3]) -> [f64; 3] {
        let [ct, st, cp, sp, _] = self.nodes[k];
        std::array::from_fn(|i| ct * frame[0][i] + st * (cp * frame[1][i] + sp * frame[2][i]))
    }
}

/// Orthonormal frame whose first vector is `e`.
pub fn frame_for(e: [f64; 3]) -> [[f64; 3]; 3] {
    let a = if e[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else if e[1].abs() < 0.6 { [0.0, 1.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let cross = |p: [f64; 3], q: [f64; 3]| [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]];
    let t = cross(a, e);
    let nt = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    let e1 = [t[0] / nt, t[1] / nt, t[2] / nt];
    [e, e1, cross(e, e1)]
}

/// Quadratic Lagrange data for one axis and one fixed offset.
#[derive(Debug, Clone, Copy)]
struct AxisInterp {
    /// First node of the three-point stencil, or `usize::MAX` outside the box.
    base: usize,
    w: [f64; 3],
}

const OUTSIDE: AxisInterp = AxisInterp { base: usize::MAX, w: [0.0; 3] };

#[inline]
fn axis_interp(p: f64, n: usize) -> AxisInterp {
    // p is the fractional index; cell-centred nodes cover [-1/2, n - 1/2]
    if !(p >= -0.5 && p <= n as f64 - 0.5) {
        return OUTSIDE;
    }
    let c = (p.round() as i64).clamp(1, n as i64 - 2);
    let t = p - c as f64;
    AxisInterp { base: (c - 1) as usize, w: [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)] }
}

fn fill_table(table: &mut Vec<AxisInterp>, shift: f64, n: usize) {
    table.clear();
    table.extend((0..n).map(|i| axis_interp(i as f64 + shift, n)));
}

/// Interpolates `m` interleaved fields at the point described by three
/// axis stencils.
#[inline]
fn interp(phi: &[f64], m: usize, n: usize, s: [AxisInterp; 3], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for a in 0..3 {
        for b in 0..3 {
            let wab = s[0].w[a] * s[1].w[b];
            let row = ((s[0].base + a) * n + s[1].base + b) * n + s[2].base;
            for c in 0..3 {
                let wt = wab * s[2].w[c];
                let src = &phi[(row + c) * m..(row + c + 1) * m];
                for (o, p) in out.iter_mut().zip(src) {
                    *o += wt * p;
                }
            }
        }
    }
}

/// One term `sign * Gamma(F_a, G_b)` routed to output slot `out`.
#[derive(Debug, Clone, Copy)]
pub struct PairTerm {
    pub a: usize,
    pub b: usize,
    pub out: usize,
    pub sign: f64,
}

/// Per-weight D-form data for a batch of real fields.
#[derive(Debug, Clone)]
pub struct DGram {
    /// Row-major `m x m` Gram matrices, one per requested weight.
    pub grams: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct BoltzmannModel {
    pub gamma: f64,
    pub s: f64,
    pub c_b: f64,
    pub theta_min: f64,
    pub grid: VelocityGrid,
    pub sphere: SphereRule,
    /// Relative threshold below which a `(v, u)` pair is dropped.
    pub pair_cutoff: f64,
    sqrt_mu: Vec<f64>,
    mu: Vec<f64>,
    dense: OnceLock<DMatrix<f64>>,
}

/// One quadrature event of a row traversal.
enum RowEvent {
    /// Loss term for partner `u` with kinetic factor `kin`.
    Loss { u: usize, kin: f64 },
    /// Gain term for partner `u` at one sphere node.
    Gain { u: usize, c0: f64, vp: [AxisInterp; 3], up: [AxisInterp; 3], dvp: [f64; 3] },
}

fn inside(s: &[AxisInterp; 3]) -> bool {
    s.iter().all(|a| a.base != usize::MAX)
}

impl BoltzmannModel {
    pub fn new(grid: VelocityGrid, gamma: f64, s: f64, theta_min: f64) -> Result<Self> {
        Self::with_quadrature(grid, gamma, s, theta_min, 16, 16)
    }

    pub fn with_quadrature(
        grid: VelocityGrid,
        gamma: f64,
        s: f64,
        theta_min: f64,
        n_theta: usize,
        n_phi: usize,
    ) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(KineticError::InvalidModel(format!("s = {s} outside (0, 1)")));
        }
        let floor = (-3.0f64).max(-1.5 - 2.0 * s);
        if gamma <= floor {
            return Err(KineticError::InvalidModel(format!("gamma = {gamma} must exceed {floor}")));
        }
        if !(theta_min > 0.0 && theta_min < PI / 2.0) {
            return Err(KineticError::InvalidModel(format!("theta_min = {theta_min} outside (0, pi/2)")));
        }
        if n_theta < 2 || n_phi < 2 {
            return Err(KineticError::InvalidModel("sphere rule needs at least 2x2 nodes".into()));
        }
        let sphere = SphereRule::new(s, theta_min, n_theta, n_phi);
        let mu = grid.maxwellian();
        let sqrt_mu = grid.sqrt_maxwellian();
        Ok(Self { gamma, s, c_b: 1.0, theta_min, grid, sphere, pair_cutoff: 1e-16, sqrt_mu, mu, dense: OnceLock::new() })
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    /// `phi = f / sqrt(mu)` for a batch of real fields, node-major.
    fn interleave_phi(&self, fields: &[&[f64]]) -> Vec<f64> {
        let m = fields.len();
        let mut out = vec![0.0; self.grid.len() * m];
        for (a, f) in fields.iter().enumerate() {
            for (idx, (x, sm)) in f.iter().zip(&self.sqrt_mu).enumerate() {
                out[idx * m + a] = x / sm;
            }
        }
        out
    }

    /// Collects `(j, k)` pairs on slab `i1` for offset `d` whose Maxwellian
    /// factor `mu(u)^pu mu(v)^pv` passes the cutoff.
    fn slab_pairs(&self, i1: usize, d: [i64; 3], pu: f64, pv: f64, out: &mut Vec<(usize, usize)>) {
        let n = self.grid.n_per_dim as i64;
        out.clear();
        let peak = maxwellian_at([0.0; 3]).powf(pu + pv);
        let lo = |di: i64| di.max(0);
        let hi = |di: i64| (n + di).min(n);
        for j in lo(d[1])..hi(d[1]) {
            for k in lo(d[2])..hi(d[2]) {
                let v = self.grid.index(i1, j as usize, k as usize);
                let u = self.grid.index((i1 as i64 - d[0]) as usize, (j - d[1]) as usize, (k - d[2]) as usize);
                if self.mu[u].powf(pu) * self.mu[v].powf(pv) >= self.pair_cutoff * peak {
                    out.push((j as usize, k as usize));
                }
            }
        }
    }

    /// Batched bilinear evaluation: `out[t.out] += t.sign * Gamma(F_{t.a}, G_{t.b})`.
    pub fn bilinear_batch(&self, f_fields: &[&[f64]], g_fields: &[&[f64]], terms: &[PairTerm], n_out: usize) -> Vec<Vec<f64>> {
        let n = self.grid.n_per_dim;
        let (mf, mg) = (f_fields.len(), g_fields.len());
        let phi_f = self.interleave_phi(f_fields);
        let phi_g = self.interleave_phi(g_fields);
        let h = self.grid.spacing;
        let slabs: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i1| {
                let mut slab = vec![0.0; n_out * n * n];
                let mut pairs = Vec::new();
                let (mut tv2, mut tv3, mut tu2, mut tu3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                let mut iu = vec![0.0; mf];
                let mut ig = vec![0.0; mg];
                for d0 in (i1 as i64 + 1 - n as i64)..=(i1 as i64) {
                    for d1 in -(n as i64 - 1)..(n as i64) {
                        for d2 in -(n as i64 - 1)..(n as i64) {
                            if d0 == 0 && d1 == 0 && d2 == 0 {
                                continue;
                            }
                            let d = [d0, d1, d2];
                            self.slab_pairs(i1, d, 1.0, 0.5, &mut pairs);
                            if pairs.is_empty() {
                                continue;
                            }
                            let z = [d0 as f64 * h, d1 as f64 * h, d2 as f64 * h];
                            let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
                            let kin = self.c_b * r.powf(self.gamma);
                            // loss
                            let loss = kin * self.sphere.total_weight;
                            for &(j, k) in &pairs {
                                let v = self.grid.index(i1, j, k);
                                let u = self.grid.index((i1 as i64 - d0) as usize, (j as i64 - d1) as usize, (k as i64 - d2) as usize);
                                let c = loss * self.mu[u];
                                for t in terms {
                                    slab[t.out * n * n + j * n + k] -= t.sign * c * phi_f[u * mf + t.a] * phi_g[v * mg + t.b];
                                }
                            }
                            let frame = frame_for([z[0] / r, z[1] / r, z[2] / r]);
                            for node in 0..self.sphere.nodes.len() {
                                let sg = self.sphere.direction(node, &frame);
                                let dv: [f64; 3] = std::array::from_fn(|i| 0.5 * (r * sg[i] - z[i]) / h);
                                let du: [f64; 3] = std::array::from_fn(|i| -0.5 * (r * sg[i] + z[i]) / h);
                                let v1 = axis_interp(i1 as f64 + dv[0], n);
                                let u1 = axis_interp(i1 as f64 + du[0], n);
                                if v1.base == usize::MAX || u1.base == usize::MAX {
                                    continue;
                                }
                                fill_table(&mut tv2, dv[1], n);
                                fill_table(&mut tv3, dv[2], n);
                                fill_table(&mut tu2, du[1], n);
                                fill_table(&mut tu3, du[2], n);
                                let c0 = kin * self.sphere.nodes[node][4];
                                for &(j, k) in &pairs {
                                    let (a2, a3, b2, b3) = (tv2[j], tv3[k], tu2[j], tu3[k]);
                                    if a2.base == usize::MAX || a3.base == usize::MAX || b2.base == usize::MAX || b3.base == usize::MAX {
                                        continue;
                                    }
                                    let u = self.grid.index((i1 as i64 - d0) as usize, (j as i64 - d1) as usize, (k as i64 - d2) as usize);
                                    interp(&phi_f, mf, n, [u1, b2, b3], &mut iu);
                                    interp(&phi_g, mg, n, [v1, a2, a3], &mut ig);
                                    let c = c0 * self.mu[u];
                                    for t in terms {
                                        slab[t.out * n * n + j * n + k] += t.sign * c * iu[t.a] * ig[t.b];
                                    }
                                }
                            }
                        }
                    }
                }
                slab
            })
            .collect();
        let mut out = vec![vec![0.0; self.grid.len()]; n_out];
        for (i1, slab) in slabs.iter().enumerate() {
            for (o, field) in out.iter_mut().enumerate() {
                for jk in 0..n * n {
                    let idx = i1 * n * n + jk;
                    field[idx] = slab[o * n * n + jk] * self.sqrt_mu[idx] * self.grid.cell_volume;
                }
            }
        }
        out
    }

    /// `L e_a` for a batch of real fields.
    pub fn linear_batch(&self, fields: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut all: Vec<&[f64]> = vec![&self.sqrt_mu];
        all.extend_from_slice(fields);
        let terms: Vec<PairTerm> = (0..fields.len())
            .flat_map(|a| {
                [PairTerm { a: 0, b: a + 1, out: a, sign: -1.0 }, PairTerm { a: a + 1, b: 0, out: a, sign: -1.0 }]
            })
            .collect();
        self.bilinear_batch(&all, &all, &terms, fields.len())
    }

    fn split(f: &[C64]) -> (Vec<f64>, Vec<f64>) {
        (f.iter().map(|z| z.re).collect(), f.iter().map(|z| z.im).collect())
    }

    pub fn apply_linear(&self, f: &[C64]) -> Vec<C64> {
        let (re, im) = Self::split(f);
        let out = self.linear_batch(&[&re, &im]);
        out[0].iter().zip(&out[1]).map(|(&a, &b)| C64::new(a, b)).collect()
    }

    pub fn apply_gamma(&self, f: &[C64], g: &[C64]) -> Vec<C64> {
        let (fr, fi) = Self::split(f);
        let (gr, gi) = Self::split(g);
        let terms = [
            PairTerm { a: 0, b: 0, out: 0, sign: 1.0 },
            PairTerm { a: 1, b: 1, out: 0, sign: -1.0 },
            PairTerm { a: 0, b: 1, out: 1, sign: 1.0 },
            PairTerm { a: 1, b: 0, out: 1, sign: 1.0 },
        ];
        let out = self.bilinear_batch(&[&fr, &fi], &[&gr, &gi], &terms, 2);
        out[0].iter().zip(&out[1]).map(|(&a, &b)| C64::new(a, b)).collect()
    }

    /// D-form Gram matrices of a batch of real fields for each weight `w^2`.
    pub fn d_gram(&self, fields: &[&[f64]], weights_sq: &[&[f64]]) -> DGram {
        let n = self.grid.n_per_dim;
        let m = fields.len();
        let nw = weights_sq.len();
        let phi = self.interleave_phi(fields);
        let h = self.grid.spacing;
        let axis = &self.grid.axis;
        struct Partial {
            gram1: Vec<f64>,
            diag: Vec<f64>,
        }
        let parts: Vec<Partial> = (0..n)
            .into_par_iter()
            .map(|i1| {
                let mut gram1 = vec![0.0; nw * m * m];
                let mut diag = vec![0.0; nw * self.grid.len()];
                let mut pairs = Vec::new();
                let mut all = Vec::new();
                let (mut tv2, mut tv3) = (Vec::new(), Vec::new());
                let mut ig = vec![0.0; m];
                let mut delta = vec![0.0; m];
                let (mut e2, mut e3) = (vec![0.0; n], vec![0.0; n]);
                for d0 in (i1 as i64 + 1 - n as i64)..=(i1 as i64) {
                    for d1 in -(n as i64 - 1)..(n as i64) {
                        for d2 in -(n as i64 - 1)..(n as i64) {
                            if d0 == 0 && d1 == 0 && d2 == 0 {
                                continue;
                            }
                            let d = [d0, d1, d2];
                            self.slab_pairs(i1, d, 1.0, 1.0, &mut pairs);
                            self.slab_pairs(i1, d, 0.0, 0.0, &mut all);
                            let z = [d0 as f64 * h, d1 as f64 * h, d2 as f64 * h];
                            let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
                            let kin = self.c_b * r.powf(self.gamma);
                            let frame = frame_for([z[0] / r, z[1] / r, z[2] / r]);
                            for node in 0..self.sphere.nodes.len() {
                                let sg = self.sphere.direction(node, &frame);
                                let dvp: [f64; 3] = std::array::from_fn(|i| 0.5 * (r * sg[i] - z[i]));
                                let c0 = kin * self.sphere.nodes[node][4];
                                // sqrt(mu(v')) / sqrt(mu(v)) factorizes over axes
                                let shift = (-(dvp[0] * dvp[0] + dvp[1] * dvp[1] + dvp[2] * dvp[2]) / 4.0).exp();
                                let e1 = (-axis[i1] * dvp[0] / 2.0).exp() * shift;
                                for j in 0..n {
                                    e2[j] = (-axis[j] * dvp[1] / 2.0).exp();
                                    e3[j] = (-axis[j] * dvp[2] / 2.0).exp();
                                }
                                // second term: |f(u)|^2 (sqrt mu(v') - sqrt mu(v))^2
                                for &(j, k) in &all {
                                    let v = self.grid.index(i1, j, k);
                                    let u = self.grid.index((i1 as i64 - d0) as usize, (j as i64 - d1) as usize, (k as i64 - d2) as usize);
                                    let ratio = e1 * e2[j] * e3[k];
                                    let diff = self.sqrt_mu[v] * (ratio - 1.0);
                                    let base = c0 * diff * diff;
                                    for (wi, w2) in weights_sq.iter().enumerate() {
                                        diag[wi * self.grid.len() + u] += base * w2[v];
                                    }
                                }
                                if pairs.is_empty() {
                                    continue;
                                }
                                let v1 = axis_interp(i1 as f64 + dvp[0] / h, n);
                                fill_table(&mut tv2, dvp[1] / h, n);
                                fill_table(&mut tv3, dvp[2] / h, n);
                                for &(j, k) in &pairs {
                                    let v = self.grid.index(i1, j, k);
                                    let u = self.grid.index((i1 as i64 - d0) as usize, (j as i64 - d1) as usize, (k as i64 - d2) as usize);
                                    let st = [v1, tv2[j], tv3[k]];
                                    let ratio = e1 * e2[j] * e3[k];
                                    if st.iter().any(|a| a.base == usize::MAX) {
                                        for a in 0..m {
                                            delta[a] = -phi[v * m + a];
                                        }
                                    } else {
                                        interp(&phi, m, n, st, &mut ig);
                                        for a in 0..m {
                                            delta[a] = ratio * ig[a] - phi[v * m + a];
                                        }
                                    }
                                    let c = c0 * self.mu[u] * self.mu[v];
                                    for (wi, w2) in weights_sq.iter().enumerate() {
                                        let cw = c * w2[v];
                                        let g = &mut gram1[wi * m * m..(wi + 1) * m * m];
                                        for a in 0..m {
                                            let da = cw * delta[a];
                                            for b in a..m {
                                                g[a * m + b] += da * delta[b];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Partial { gram1, diag }
            })
            .collect();
        let vol2 = self.grid.cell_volume * self.grid.cell_volume;
        let mut grams = vec![vec![0.0; m * m]; nw];
        let mut diag = vec![0.0; nw * self.grid.len()];
        for p in &parts {
            for (wi, g) in grams.iter_mut().enumerate() {
                for a in 0..m {
                    for b in a..m {
                        g[a * m + b] += p.gram1[wi * m * m + a * m + b];
                    }
                }
            }
            for (x, y) in diag.iter_mut().zip(&p.diag) {
                *x += y;
            }
        }
        for (wi, g) in grams.iter_mut().enumerate() {
            for a in 0..m {
                for b in a..m {
                    let second: f64 = (0..self.grid.len())
                        .map(|u| diag[wi * self.grid.len() + u] * fields[a][u] * fields[b][u])
                        .sum();
                    let val = (g[a * m + b] + second) * vol2;
                    g[a * m + b] = val;
                    g[b * m + a] = val;
                }
            }
        }
        DGram { grams }
    }

    /// `|w f|_D^2`.
    pub fn d_norm_sq(&self, f: &[C64], w: &WeightSpec) -> Result<f64> {
        let w2: Vec<f64> = self.grid.weight_field(w)?.iter().map(|x| x * x).collect();
        let (re, im) = Self::split(f);
        let g = self.d_gram(&[&re, &im], &[&w2]);
        Ok((g.grams[0][0] + g.grams[0][3]).max(0.0))
    }
}

/// Equivariant assembly. Rows are computed only for one representative per
/// orbit of the cube group and propagated by symmetry, after averaging over
/// the stabilizer. This defines an exactly equivariant discretization and
/// costs about 1/48 of a full sweep.
impl BoltzmannModel {
    /// Visits every quadrature event contributing to output row `v`.
    fn visit_row(&self, v: usize, pu: f64, pv: f64, mut visit: impl FnMut(RowEvent)) {
        let n = self.grid.n_per_dim;
        let h = self.grid.spacing;
        let c = [v / (n * n), (v / n) % n, v % n];
        let peak = maxwellian_at([0.0; 3]).powf(pu + pv);
        let xv = self.grid.nodes[v];
        for u in 0..self.grid.len() {
            if u == v || self.mu[u].powf(pu) * self.mu[v].powf(pv) < self.pair_cutoff * peak {
                continue;
            }
            let xu = self.grid.nodes[u];
            let z = [xv[0] - xu[0], xv[1] - xu[1], xv[2] - xu[2]];
            let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
            let kin = self.c_b * r.powf(self.gamma);
            visit(RowEvent::Loss { u, kin });
            let frame = frame_for([z[0] / r, z[1] / r, z[2] / r]);
            for node in 0..self.sphere.nodes.len() {
                let sg = self.sphere.direction(node, &frame);
                let dvp: [f64; 3] = std::array::from_fn(|i| 0.5 * (r * sg[i] - z[i]));
                let vp = std::array::from_fn(|i| axis_interp(c[i] as f64 + dvp[i] / h, n));
                let up = std::array::from_fn(|i| axis_interp(c[i] as f64 - (0.5 * (r * sg[i] + z[i])) / h, n));
                visit(RowEvent::Gain { u, c0: kin * self.sphere.nodes[node][4], vp, up, dvp });
            }
        }
    }

    fn symmetry_tables(&self) -> Vec<Vec<usize>> {
        CubeSymmetry::all().iter().map(|r| r.index_table(self.grid.n_per_dim)).collect()
    }

    /// Dense matrix of `L` (cached after the first call).
    pub fn dense_linear(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| self.assemble_dense())
    }

    fn assemble_dense(&self) -> DMatrix<f64> {
        let len = self.grid.len();
        let n = self.grid.n_per_dim;
        let vol = self.grid.cell_volume;
        let tables = self.symmetry_tables();
        let rows = fundamental_rows(&self.grid);
        let built: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&v| {
                // coefficients on phi_f = f / sqrt(mu)
                let mut acc = vec![0.0; len];
                let scatter = |acc: &mut [f64], s: &[AxisInterp; 3], wt: f64| {
                    for a in 0..3 {
                        for b in 0..3 {
                            let wab = wt * s[0].w[a] * s[1].w[b];
                            let row = ((s[0].base + a) * n + s[1].base + b) * n + s[2].base;
                            for c in 0..3 {
                                acc[row + c] += wab * s[2].w[c];
                            }
                        }
                    }
                };
                self.visit_row(v, 1.0, 0.5, |ev| match ev {
                    RowEvent::Loss { u, kin } => {
                        let c = kin * self.sphere.total_weight * self.mu[u];
                        acc[v] -= c;
                        acc[u] -= c;
                    }
                    RowEvent::Gain { u, c0, vp, up, .. } => {
                        if inside(&vp) && inside(&up) {
                            let c = c0 * self.mu[u];
                            scatter(&mut acc, &vp, c);
                            scatter(&mut acc, &up, c);
                        }
                    }
                });
                let pre = -self.sqrt_mu[v] * vol;
                let raw: Vec<f64> = acc.iter().zip(&self.sqrt_mu).map(|(a, sm)| pre * a / sm).collect();
                // average over the stabilizer of v
                let stab: Vec<&Vec<usize>> = tables.iter().filter(|t| t[v] == v).collect();
                let mut row = vec![0.0; len];
                for t in &stab {
                    for x in 0..len {
                        row[x] += raw[t[x]];
                    }
                }
                let k = 1.0 / stab.len() as f64;
                row.iter_mut().for_each(|x| *x *= k);
                row
            })
            .collect();
        let mut mat = DMatrix::zeros(len, len);
        for (&v, row) in rows.iter().zip(&built) {
            for t in &tables {
                let rv = t[v];
                for x in 0..len {
                    mat[(rv, t[x])] = row[x];
                }
            }
        }
        mat
    }

    /// D-form Gram matrices `(|w e_a|, |w e_b|)_D` for a family of real
    /// fields closed under the cube group, one per radial weight `w^2`.
    pub fn family_d_gram(&self, fields: &[&[f64]], weights_sq: &[&[f64]]) -> Result<DGram> {
        let tables = self.symmetry_tables();
        let action = family_action(fields, &tables)?;
        let m = fields.len();
        let nw = weights_sq.len();
        let n = self.grid.n_per_dim;
        let len = self.grid.len();
        let phi = self.interleave_phi(fields);
        let cut = self.pair_cutoff * maxwellian_at([0.0; 3]).powi(2);
        let rows = fundamental_rows(&self.grid);
        let local: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&v| {
                let mut m1 = vec![0.0; m * m];
                let mut diag = vec![0.0; len];
                let mut ig = vec![0.0; m];
                let mut delta = vec![0.0; m];
                let xv = self.grid.nodes[v];
                self.visit_row(v, 0.0, 0.0, |ev| {
                    if let RowEvent::Gain { u, c0, vp, dvp, .. } = ev {
                        let ratio = (-(xv[0] * dvp[0] + xv[1] * dvp[1] + xv[2] * dvp[2]) / 2.0
                            - (dvp[0] * dvp[0] + dvp[1] * dvp[1] + dvp[2] * dvp[2]) / 4.0)
                            .exp();
                        let diff = self.sqrt_mu[v] * (ratio - 1.0);
                        diag[u] += c0 * diff * diff;
                        if self.mu[u] * self.mu[v] < cut {
                            return;
                        }
                        if inside(&vp) {
                            interp(&phi, m, n, vp, &mut ig);
                            for a in 0..m {
                                delta[a] = ratio * ig[a] - phi[v * m + a];
                            }
                        } else {
                            for a in 0..m {
                                delta[a] = -phi[v * m + a];
                            }
                        }
                        let c = c0 * self.mu[u] * self.mu[v];
                        for a in 0..m {
                            let da = c * delta[a];
                            for b in a..m {
                                m1[a * m + b] += da * delta[b];
                            }
                        }
                    }
                });
                for a in 0..m {
                    for b in a..m {
                        let second: f64 = (0..len).map(|u| diag[u] * fields[a][u] * fields[b][u]).sum();
                        m1[a * m + b] += second;
                        m1[b * m + a] = m1[a * m + b];
                    }
                }
                m1
            })
            .collect();
        let vol2 = self.grid.cell_volume * self.grid.cell_volume;
        let mut grams = vec![vec![0.0; m * m]; nw];
        for (&v, loc) in rows.iter().zip(&local) {
            let k = vol2 / stabilizer_size(v, &tables) as f64;
            for act in &action {
                for a in 0..m {
                    let (pa, sa) = act[a];
                    for b in 0..m {
                        let (pb, sb) = act[b];
                        let val = k * sa * sb * loc[pa * m + pb];
                        for (g, w2) in grams.iter_mut().zip(weights_sq) {
                            g[a * m + b] += val * w2[v];
                        }
                    }
                }
            }
        }
        Ok(DGram { grams })
    }

    /// Trilinear tensor `T[i][j][k] = (Gamma(e_i, e_j), w^2 e_k)` for a family
    /// closed under the cube group and a radial weight `w^2`.
    pub fn family_gamma_tensor(&self, fields: &[&[f64]], w2: &[f64]) -> Result<Vec<f64>> {
        let tables = self.symmetry_tables();
        let action: FamilyAction = family_action(fields, &tables)?;
        let m = fields.len();
        let n = self.grid.n_per_dim;
        let phi = self.interleave_phi(fields);
        let rows = fundamental_rows(&self.grid);
        let local: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&v| {
                let mut acc = vec![0.0; m * m];
                let (mut iu, mut iv) = (vec![0.0; m], vec![0.0; m]);
                let mut loss = vec![0.0; m];
                self.visit_row(v, 1.0, 0.5, |ev| match ev {
                    RowEvent::Loss { u, kin } => {
                        let c = kin * self.sphere.total_weight * self.mu[u];
                        for a in 0..m {
                            loss[a] += c * phi[u * m + a];
                        }
                    }
                    RowEvent::Gain { u, c0, vp, up, .. } => {
                        if inside(&vp) && inside(&up) {
                            interp(&phi, m, n, up, &mut iu);
                            interp(&phi, m, n, vp, &mut iv);
                            let c = c0 * self.mu[u];
                            for a in 0..m {
                                let ca = c * iu[a];
                                for b in 0..m {
                                    acc[a * m + b] += ca * iv[b];
                                }
                            }
                        }
                    }
                });
                for a in 0..m {
                    for b in 0..m {
                        acc[a * m + b] -= loss[a] * phi[v * m + b];
                    }
                }
                let k = self.sqrt_mu[v] * self.grid.cell_volume;
                acc.iter_mut().for_each(|x| *x *= k);
                acc
            })
            .collect();
        let vol = self.grid.cell_volume;
        let mut t = vec![0.0; m * m * m];
        for (&v, loc) in rows.iter().zip(&local) {
            let k = vol * w2[v] / stabilizer_size(v, &tables) as f64;
            for act in &action {
                for a in 0..m {
                    let (pa, sa) = act[a];
                    for b in 0..m {
                        let (pb, sb) = act[b];
                        let g = k * sa * sb * loc[pa * m + pb];
                        for c in 0..m {
                            let (pc, sc) = act[c];
                            t[(a * m + b) * m + c] += g * sc * fields[pc][v];
                        }
                    }
                }
            }
        }
        Ok(t)
    }
}
