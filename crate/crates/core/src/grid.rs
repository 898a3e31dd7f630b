//! Velocity lattice, quadrature, Maxwellian and the exponential weight family.
//!
//! Nodes are cell centred: with `n` nodes per axis on `[-v_max, v_max]` the
//! spacing is `2 v_max / n` and node `i` sits at `-v_max + (i + 1/2) h`. An
//! even `n` keeps `v = 0` off the lattice, and every quadrature weight is
//! `h^3` (the midpoint rule, which is the trapezoid rule for data that has
//! decayed at the box edge).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KineticError, Result};

pub type C64 = Complex64;

/// Which collision model a parameter set refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Landau,
    Boltzmann,
}

/// Parameters of the weight `w(v) = exp(q <v>^theta / 4)` together with the
/// potential exponents that decide which `(q, theta)` are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub q: f64,
    pub theta: f64,
    pub model_kind: ModelKind,
    pub gamma: f64,
    /// Angular singularity order; ignored for Landau.
    pub s: f64,
}

impl WeightSpec {
    /// The trivial weight `w = 1` for a hard-potential model.
    pub fn unit(model_kind: ModelKind, gamma: f64, s: f64) -> Self {
        Self { q: 0.0, theta: 1.0, model_kind, gamma, s }
    }

    pub fn is_trivial(&self) -> bool {
        self.q == 0.0
    }

    /// Hard range: `gamma + 2 >= 0` (Landau) or `gamma + 2s >= 0` (Boltzmann).
    pub fn is_hard(&self) -> bool {
        match self.model_kind {
            ModelKind::Landau => self.gamma >= -2.0,
            ModelKind::Boltzmann => self.gamma + 2.0 * self.s >= 0.0,
        }
    }

    /// Checks the weight hypothesis and the admissible potential range.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(KineticError::Hypothesis(msg));
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return fail(format!("q = {} must be finite and nonnegative", self.q));
        }
        match self.model_kind {
            ModelKind::Landau => {
                if !(-3.0..=1.0).contains(&self.gamma) {
                    return fail(format!("Landau gamma = {} outside [-3, 1]", self.gamma));
                }
                if self.gamma >= -2.0 {
                    if self.q != 0.0 {
                        return fail(format!("Landau gamma = {} needs q = 0", self.gamma));
                    }
                } else {
                    if self.q <= 0.0 {
                        return fail(format!("Landau gamma = {} needs q > 0", self.gamma));
                    }
                    if !(self.theta > 0.0 && self.theta <= 2.0) {
                        return fail(format!("theta = {} outside (0, 2]", self.theta));
                    }
                    if self.theta == 2.0 && self.q >= 1.0 {
                        return fail("theta = 2 needs q < 1".to_string());
                    }
                }
            }
            ModelKind::Boltzmann => {
                if !(self.s > 0.0 && self.s < 1.0) {
                    return fail(format!("s = {} outside (0, 1)", self.s));
                }
                let floor = (-3.0f64).max(-1.5 - 2.0 * self.s);
                if self.gamma <= floor {
                    return fail(format!("gamma = {} must exceed {floor}", self.gamma));
                }
                if self.gamma + 2.0 * self.s >= 0.0 {
                    if self.q != 0.0 {
                        return fail(format!(
                            "Boltzmann gamma + 2s = {} >= 0 needs q = 0",
                            self.gamma + 2.0 * self.s
                        ));
                    }
                } else {
                    if self.q <= 0.0 {
                        return fail("soft Boltzmann potentials need q > 0".to_string());
                    }
                    if self.theta != 1.0 {
                        return fail(format!("soft Boltzmann needs theta = 1, got {}", self.theta));
                    }
                }
            }
        }
        Ok(())
    }

    /// `w(v)` at a single velocity.
    pub fn value(&self, v: [f64; 3]) -> f64 {
        if self.q == 0.0 {
            return 1.0;
        }
        (self.q * japanese(v).powf(self.theta) / 4.0).exp()
    }
}

/// `<v> = sqrt(1 + |v|^2)`.
pub fn japanese(v: [f64; 3]) -> f64 {
    (1.0 + norm_sq(v)).sqrt()
}

pub fn norm_sq(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// `(2 pi)^{-3/2} exp(-|v|^2 / 2)`.
pub fn maxwellian_at(v: [f64; 3]) -> f64 {
    (2.0 * PI).powf(-1.5) * (-0.5 * norm_sq(v)).exp()
}

/// Uniform cell-centred velocity lattice on `[-v_max, v_max]^3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub n_per_dim: usize,
    pub v_max: f64,
    pub spacing: f64,
    /// One-dimensional node coordinates shared by all three axes.
    pub axis: Vec<f64>,
    pub nodes: Vec<[f64; 3]>,
    /// Uniform quadrature weight `spacing^3`.
    pub cell_volume: f64,
}

impl VelocityGrid {
    pub fn new(n_per_dim: usize, v_max: f64) -> Result<Self> {
        if n_per_dim < 8 {
            return Err(KineticError::InvalidGrid(format!("n_per_dim = {n_per_dim} < 8")));
        }
        if n_per_dim % 2 != 0 {
            return Err(KineticError::InvalidGrid(format!(
                "n_per_dim = {n_per_dim} is odd, which puts v = 0 on the lattice"
            )));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(KineticError::InvalidGrid(format!("v_max = {v_max} must be positive")));
        }
        let h = 2.0 * v_max / n_per_dim as f64;
        let axis: Vec<f64> = (0..n_per_dim).map(|i| -v_max + (i as f64 + 0.5) * h).collect();
        let mut nodes = Vec::with_capacity(n_per_dim.pow(3));
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    nodes.push([x, y, z]);
                }
            }
        }
        Ok(Self { n_per_dim, v_max, spacing: h, axis, nodes, cell_volume: h * h * h })
    }

    /// Total number of nodes `n^3`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_per_dim + j) * self.n_per_dim + k
    }

    /// Index of the node mirrored through `v_1 -> -v_1`.
    #[inline]
    pub fn mirror_v1(&self, idx: usize) -> usize {
        let n = self.n_per_dim;
        let (i, rest) = (idx / (n * n), idx % (n * n));
        (n - 1 - i) * n * n + rest
    }

    pub fn quad_weights(&self) -> Vec<f64> {
        vec![self.cell_volume; self.len()]
    }

    pub fn maxwellian(&self) -> Vec<f64> {
        self.nodes.iter().map(|&v| maxwellian_at(v)).collect()
    }

    pub fn sqrt_maxwellian(&self) -> Vec<f64> {
        self.nodes.iter().map(|&v| maxwellian_at(v).sqrt()).collect()
    }

    /// Samples `w_{q,theta}` after checking the weight hypothesis.
    pub fn weight_field(&self, w: &WeightSpec) -> Result<Vec<f64>> {
        w.validate()?;
        Ok(self.nodes.iter().map(|&v| w.value(v)).collect())
    }

    /// Quadrature of `f conj(g)`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        debug_assert_eq!(f.len(), g.len());
        let s: C64 = f.iter().zip(g).map(|(a, b)| a * b.conj()).sum();
        s * self.cell_volume
    }

    /// Checked variant of [`VelocityGrid::inner`].
    pub fn inner_product(&self, f: &VelocityField, g: &VelocityField) -> Result<C64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.inner(&f.values, &g.values))
    }

    /// Quadrature of `f g` for real fields.
    pub fn inner_real(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume
    }

    /// `L^2_v` norm.
    pub fn norm(&self, f: &[C64]) -> f64 {
        (f.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.cell_volume).sqrt()
    }

    pub fn check(&self, f: &VelocityField) -> Result<()> {
        if f.values.len() != self.len() {
            return Err(KineticError::DimensionMismatch { expected: self.len(), got: f.values.len() });
        }
        Ok(())
    }

    /// `{sqrt(mu), v_1 sqrt(mu), v_2 sqrt(mu), v_3 sqrt(mu), |v|^2 sqrt(mu)}`.
    pub fn collision_invariants(&self) -> [Vec<f64>; 5] {
        let sm = self.sqrt_maxwellian();
        let comp = |f: &dyn Fn([f64; 3]) -> f64| -> Vec<f64> {
            self.nodes.iter().zip(&sm).map(|(&v, &m)| f(v) * m).collect()
        };
        [
            comp(&|_| 1.0),
            comp(&|v| v[0]),
            comp(&|v| v[1]),
            comp(&|v| v[2]),
            comp(&norm_sq),
        ]
    }

    /// The first `count` functions `sqrt(mu) He_a(v_1) He_b(v_2) He_c(v_3)`,
    /// ordered by total degree and then lexicographically in `(a, b, c)`.
    pub fn hermite_basis(&self, count: usize) -> Vec<Vec<f64>> {
        let sm = self.sqrt_maxwellian();
        hermite_multi_indices(count)
            .into_iter()
            .map(|alpha| {
                self.nodes
                    .iter()
                    .zip(&sm)
                    .map(|(v, m)| {
                        m * hermite_he(alpha[0], v[0]) * hermite_he(alpha[1], v[1]) * hermite_he(alpha[2], v[2])
                    })
                    .collect()
            })
            .collect()
    }
}

/// Multi-indices sorted by degree, then lexicographically descending in the
/// first slot so that `(1,0,0)` precedes `(0,1,0)`.
pub fn hermite_multi_indices(count: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(count);
    let mut deg = 0;
    while out.len() < count {
        for a in (0..=deg).rev() {
            for b in (0..=deg - a).rev() {
                out.push([a, b, deg - a - b]);
            }
        }
        deg += 1;
    }
    out.truncate(count);
    out
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_he(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Complex function of `v` on a velocity grid: one Fourier mode of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub values: Vec<C64>,
}

impl VelocityField {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self { values: values.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Promotes a real vector to a complex one.
pub fn complexify(values: &[f64]) -> Vec<C64> {
    values.iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_moment_1d(p: i32) -> f64 {
        // E[X^p] for a standard normal
        match p {
            0 => 1.0,
            p if p % 2 == 1 => 0.0,
            p => (1..p).step_by(2).map(|k| k as f64).product(),
        }
    }

    #[test]
    fn layout_and_errors() {
        let g = VelocityGrid::new(8, 8.0).unwrap();
        assert_eq!(g.len(), 512);
        assert!((g.spacing - 2.0).abs() < 1e-15);
        assert!((g.quad_weights().iter().sum::<f64>() - 16f64.powi(3)).abs() < 1e-9);
        assert!(g.axis.iter().all(|&x| x != 0.0));
        assert!(VelocityGrid::new(9, 8.0).is_err());
        assert!(VelocityGrid::new(6, 8.0).is_err());
        assert!(VelocityGrid::new(8, -1.0).is_err());
    }

    #[test]
    fn gaussian_moments_up_to_fourth_order() {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let mu = g.maxwellian();
        assert!((g.inner_real(&mu, &vec![1.0; g.len()]) - 1.0).abs() < 1e-6);
        for alpha in hermite_multi_indices(35) {
            let mono: Vec<f64> = g
                .nodes
                .iter()
                .zip(&mu)
                .map(|(v, m)| m * v[0].powi(alpha[0] as i32) * v[1].powi(alpha[1] as i32) * v[2].powi(alpha[2] as i32))
                .collect();
            let quad: f64 = mono.iter().sum::<f64>() * g.cell_volume;
            let exact: f64 = alpha.iter().map(|&a| gaussian_moment_1d(a as i32)).product();
            assert!((quad - exact).abs() < 1e-5, "alpha {alpha:?}: {quad} vs {exact}");
        }
        assert!((maxwellian_at([0.0; 3]) - 0.063494).abs() < 1e-6);
    }

    #[test]
    fn invariants_inner_products() {
        let g = VelocityGrid::new(16, 8.0).unwrap();
        let inv = g.collision_invariants();
        let ip = |a: &[f64], b: &[f64]| g.inner_real(a, b);
        assert!((ip(&inv[0], &inv[0]) - 1.0).abs() < 1e-6);
        assert!((ip(&inv[0], &inv[4]) - 3.0).abs() < 1e-5);
        assert!(ip(&inv[1], &inv[2]).abs() < 1e-14);
        assert!((ip(&inv[1], &inv[1]) - 1.0).abs() < 1e-5);
        assert!(ip(&inv[1], &inv[0]).abs() < 1e-14);
        let f = VelocityField::from_real(&inv[1]);
        let h = VelocityField::from_real(&inv[4]);
        let a = g.inner_product(&f, &h).unwrap();
        let b = g.inner_product(&h, &f).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        assert_eq!(g.inner_product(&f, &VelocityField::zeros(g.len())).unwrap(), C64::new(0.0, 0.0));
        assert!(g.inner_product(&f, &VelocityField::zeros(3)).is_err());
    }

    #[test]
    fn weight_family() {
        let g = VelocityGrid::new(8, 8.0).unwrap();
        let hard = WeightSpec::unit(ModelKind::Landau, 0.0, 0.0);
        assert!(g.weight_field(&hard).unwrap().iter().all(|&x| x == 1.0));
        let w = WeightSpec { q: 0.5, theta: 2.0, model_kind: ModelKind::Landau, gamma: -3.0, s: 0.0 };
        assert!(((WeightSpec { q: 1.0 - 1e-12, ..w }).value([0.0; 3]) - 0.25f64.exp()).abs() < 1e-9);
        assert!(WeightSpec { q: 1.0, ..w }.validate().is_err());
        assert!(WeightSpec { q: 0.0, ..w }.validate().is_err());
        assert!(WeightSpec { q: 0.5, ..hard }.validate().is_err());
        let b = WeightSpec { q: 0.5, theta: 1.0, model_kind: ModelKind::Boltzmann, gamma: -1.0, s: 0.25 };
        assert!(b.validate().is_ok());
        assert!(WeightSpec { theta: 2.0, ..b }.validate().is_err());
        assert!(WeightSpec { gamma: -2.9, s: 0.3, ..b }.validate().is_err());
        // monotone in |v|
        let vals = g.weight_field(&w).unwrap();
        let mut pairs: Vec<(f64, f64)> = g.nodes.iter().map(|v| norm_sq(*v)).zip(vals).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|p| p[1].1 >= p[0].1));
    }

    #[test]
    fn hermite_recurrence() {
        assert_eq!(hermite_he(2, 3.0), 8.0);
        assert_eq!(hermite_he(3, 2.0), 2.0);
        let idx = hermite_multi_indices(20);
        assert_eq!(idx[0], [0, 0, 0]);
        assert_eq!(idx[1], [1, 0, 0]);
        assert_eq!(idx[19], [0, 0, 3]);
    }
}
