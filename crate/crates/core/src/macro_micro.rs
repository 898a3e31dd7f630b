//! Macro-micro decomposition and the fluid-type moment system.
//!
//! `P f = {a + b . v + (|v|^2 - 3) c / 2} sqrt(mu)`. The coefficients come
//! from a 5x5 Gram solve against the quadrature, so `P` is an exact
//! orthogonal projection on the grid. Moments are linear in `f`:
//! `Theta_jm(f) = int (v_j v_m - 1) sqrt(mu) f`,
//! `Lambda_j(f) = int (|v|^2 - 5) v_j sqrt(mu) f / 10`.
//!
//! With `Pf` normalized as above, taking these moments of
//! `d_t f + i k.v f + L f = H` gives, for `g = (I - P) f`,
//!
//! ```text
//! d_t a + i k.b                                         = 0
//! d_t b_j + i k_j (a + c) + i k_m Theta_jm(g)            = 0
//! d_t c + (2/3) i k.b + (10/3) i k.Lambda(g)             = 0
//! d_t [Theta_jm(g) + c delta_jm] + i k_j b_m + i k_m b_j = Theta_jm(r + h)
//! d_t Lambda_j(g) + (1/2) i k_j c                        = Lambda_j(r + h)
//! ```
//!
//! with `r = -i k.v g` and `h = -L g + H`.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::collision::CollisionModel;
use crate::error::{KineticError, Result};
use crate::grid::{norm_sq, VelocityGrid, C64};
use crate::lattice::SpectralField;

/// Macroscopic coefficients of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub a: C64,
    pub b: [C64; 3],
    pub c: C64,
}

impl MacroState {
    pub fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        Self { a: z, b: [z; 3], c: z }
    }

    fn as_array(&self) -> [C64; 5] {
        [self.a, self.b[0], self.b[1], self.b[2], self.c]
    }
}

/// The macroscopic basis `{sqrt(mu), v_i sqrt(mu), (|v|^2 - 3) sqrt(mu) / 2}`.
fn macro_basis(grid: &VelocityGrid) -> [Vec<f64>; 5] {
    let sm = grid.sqrt_maxwellian();
    let comp = |f: &dyn Fn([f64; 3]) -> f64| -> Vec<f64> { grid.nodes.iter().zip(&sm).map(|(&v, &m)| f(v) * m).collect() };
    [
        comp(&|_| 1.0),
        comp(&|v| v[0]),
        comp(&|v| v[1]),
        comp(&|v| v[2]),
        comp(&|v| 0.5 * (norm_sq(v) - 3.0)),
    ]
}

/// Linear moment `int chi f` by quadrature.
fn moment(grid: &VelocityGrid, chi: &[f64], f: &[C64]) -> C64 {
    chi.iter().zip(f).map(|(c, z)| z * *c).sum::<C64>() * grid.cell_volume
}

/// Projection onto the macroscopic subspace with precomputed Gram data.
#[derive(Debug, Clone)]
pub struct MacroProjector {
    basis: [Vec<f64>; 5],
    gram_inv: Matrix5<f64>,
    theta_w: [[Vec<f64>; 3]; 3],
    lambda_w: [Vec<f64>; 3],
    grid: VelocityGrid,
}

impl MacroProjector {
    pub fn new(grid: &VelocityGrid) -> Self {
        let basis = macro_basis(grid);
        let gram = Matrix5::from_fn(|i, j| grid.inner_real(&basis[i], &basis[j]));
        let gram_inv = gram.try_inverse().expect("macroscopic Gram matrix is positive definite");
        let sm = grid.sqrt_maxwellian();
        let theta_w = std::array::from_fn(|j| {
            std::array::from_fn(|m| grid.nodes.iter().zip(&sm).map(|(v, s)| (v[j] * v[m] - 1.0) * s).collect())
        });
        let lambda_w =
            std::array::from_fn(|j| grid.nodes.iter().zip(&sm).map(|(v, s)| 0.1 * (norm_sq(*v) - 5.0) * v[j] * s).collect());
        Self { basis, gram_inv, theta_w, lambda_w, grid: grid.clone() }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn coefficients(&self, f: &[C64]) -> MacroState {
        let rhs = Vector5::from_fn(|i, _| moment(&self.grid, &self.basis[i], f));
        let re = self.gram_inv * rhs.map(|z| z.re);
        let im = self.gram_inv * rhs.map(|z| z.im);
        let c = |i: usize| C64::new(re[i], im[i]);
        MacroState { a: c(0), b: [c(1), c(2), c(3)], c: c(4) }
    }

    pub fn synthesize(&self, m: &MacroState) -> Vec<C64> {
        let coef = m.as_array();
        (0..self.grid.len()).map(|idx| (0..5).map(|i| coef[i] * self.basis[i][idx]).sum()).collect()
    }

    /// `(a, b, c)` and `P f`.
    pub fn project(&self, f: &[C64]) -> (MacroState, Vec<C64>) {
        let m = self.coefficients(f);
        let pf = self.synthesize(&m);
        (m, pf)
    }

    /// `(I - P) f`.
    pub fn micro(&self, f: &[C64]) -> Vec<C64> {
        let (_, pf) = self.project(f);
        f.iter().zip(&pf).map(|(a, b)| a - b).collect()
    }

    pub fn theta(&self, f: &[C64]) -> [[C64; 3]; 3] {
        std::array::from_fn(|j| std::array::from_fn(|m| moment(&self.grid, &self.theta_w[j][m], f)))
    }

    pub fn lambda(&self, f: &[C64]) -> [C64; 3] {
        std::array::from_fn(|j| moment(&self.grid, &self.lambda_w[j], f))
    }
}

/// `(a, b, c)` and `P f`.
pub fn project_p(f: &[C64], grid: &VelocityGrid) -> (MacroState, Vec<C64>) {
    MacroProjector::new(grid).project(f)
}

/// `(I - P) f`.
pub fn micro_part(f: &[C64], grid: &VelocityGrid) -> Vec<C64> {
    MacroProjector::new(grid).micro(f)
}

pub fn theta_moment(f: &[C64], grid: &VelocityGrid) -> [[C64; 3]; 3] {
    MacroProjector::new(grid).theta(f)
}

pub fn lambda_moment(f: &[C64], grid: &VelocityGrid) -> [C64; 3] {
    MacroProjector::new(grid).lambda(f)
}

/// Source term `h = -L g + H` used on the right of the moment system.
pub enum MomentSource<'a> {
    /// `h = 0`: the trajectory solves free transport.
    FreeTransport,
    /// `h = -L g`: linear run.
    Linear(&'a CollisionModel),
    /// `h = -L g + Gamma_hat(f, f)(k)`: nonlinear run.
    Nonlinear(&'a CollisionModel),
}

/// Residual time series of the five equations, evaluated at interior
/// samples with centred differences. Vector and matrix equations report
/// the largest component modulus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentResiduals {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl MomentResiduals {
    /// Largest residual of each equation over the series.
    pub fn max_per_equation(&self) -> [f64; 5] {
        let mx = |v: &Vec<f64>| v.iter().cloned().fold(0.0, f64::max);
        [mx(&self.mass), mx(&self.momentum), mx(&self.energy), mx(&self.theta), mx(&self.lambda)]
    }
}

/// Evaluates the moment system along a stored torus trajectory at mode `k`.
pub fn moment_system_residual(
    trajectory: &[(f64, SpectralField)],
    k: [i64; 3],
    grid: &VelocityGrid,
    source: MomentSource<'_>,
) -> Result<MomentResiduals> {
    if trajectory.len() < 3 {
        return Err(KineticError::InvalidArgument(format!(
            "moment residual needs at least 3 samples, got {}",
            trajectory.len()
        )));
    }
    let proj = MacroProjector::new(grid);
    let idx = trajectory[0]
        .1
        .lattice
        .index(k)
        .ok_or_else(|| KineticError::InvalidArgument(format!("mode {k:?} outside the truncation")))?;
    let ik: [C64; 3] = std::array::from_fn(|d| C64::new(0.0, k[d] as f64));
    struct Sample {
        m: MacroState,
        theta: [[C64; 3]; 3],
        lambda: [C64; 3],
        theta_rh: [[C64; 3]; 3],
        lambda_rh: [C64; 3],
    }
    let samples: Vec<Sample> = trajectory
        .iter()
        .map(|(_, field)| {
            let f = &field.modes[idx];
            let (m, pf) = proj.project(f);
            let g: Vec<C64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
            // r + h
            let mut rh: Vec<C64> = g
                .iter()
                .zip(&grid.nodes)
                .map(|(z, v)| -z * C64::new(0.0, k[0] as f64 * v[0] + k[1] as f64 * v[1] + k[2] as f64 * v[2]))
                .collect();
            match &source {
                MomentSource::FreeTransport => {}
                MomentSource::Linear(model) | MomentSource::Nonlinear(model) => {
                    let lg = model.apply_linear(&g);
                    rh.iter_mut().zip(&lg).for_each(|(a, b)| *a -= b);
                    if let MomentSource::Nonlinear(model) = &source {
                        let hk = crate::torus::gamma_hat_convolution(field, k, model);
                        rh.iter_mut().zip(&hk).for_each(|(a, b)| *a += b);
                    }
                }
            }
            Sample { m, theta: proj.theta(&g), lambda: proj.lambda(&g), theta_rh: proj.theta(&rh), lambda_rh: proj.lambda(&rh) }
        })
        .collect();
    let mut out = MomentResiduals::default();
    for n in 1..samples.len() - 1 {
        let (t0, t1) = (trajectory[n - 1].0, trajectory[n + 1].0);
        let inv = 1.0 / (t1 - t0);
        let (p, s, q) = (&samples[n - 1], &samples[n], &samples[n + 1]);
        let dt = |a: C64, b: C64| (b - a) * inv;
        let ikb: C64 = (0..3).map(|d| ik[d] * s.m.b[d]).sum();
        let ikl: C64 = (0..3).map(|d| ik[d] * s.lambda[d]).sum();
        let mass = (dt(p.m.a, q.m.a) + ikb).norm();
        let momentum = (0..3)
            .map(|j| {
                let div: C64 = (0..3).map(|m| ik[m] * s.theta[j][m]).sum();
                (dt(p.m.b[j], q.m.b[j]) + ik[j] * (s.m.a + s.m.c) + div).norm()
            })
            .fold(0.0, f64::max);
        let energy = (dt(p.m.c, q.m.c) + ikb * (2.0 / 3.0) + ikl * (10.0 / 3.0)).norm();
        let mut theta: f64 = 0.0;
        for j in 0..3 {
            for m in 0..3 {
                let d = if j == m { 1.0 } else { 0.0 };
                let lhs = dt(p.theta[j][m] + p.m.c * d, q.theta[j][m] + q.m.c * d) + ik[j] * s.m.b[m] + ik[m] * s.m.b[j];
                theta = theta.max((lhs - s.theta_rh[j][m]).norm());
            }
        }
        let lambda = (0..3)
            .map(|j| (dt(p.lambda[j], q.lambda[j]) + ik[j] * s.m.c * 0.5 - s.lambda_rh[j]).norm())
            .fold(0.0, f64::max);
        out.t.push(trajectory[n].0);
        out.mass.push(mass);
        out.momentum.push(momentum);
        out.energy.push(energy);
        out.theta.push(theta);
        out.lambda.push(lambda);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::complexify;

    fn grid() -> VelocityGrid {
        VelocityGrid::new(16, 8.0).unwrap()
    }

    #[test]
    fn projection_oracles() {
        let g = grid();
        let proj = MacroProjector::new(&g);
        let sm = g.sqrt_maxwellian();
        let (m, pf) = proj.project(&complexify(&sm));
        assert!((m.a - 1.0).norm() < 1e-10 && m.c.norm() < 1e-10);
        assert!(g.norm(&proj.micro(&complexify(&sm))) < 1e-10);
        let v1: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, s)| v[0] * s).collect();
        let m1 = proj.coefficients(&complexify(&v1));
        assert!((m1.b[0] - 1.0).norm() < 1e-10 && m1.a.norm() < 1e-10);
        let e: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, s)| norm_sq(*v) * s).collect();
        let me = proj.coefficients(&complexify(&e));
        assert!((me.a - 3.0).norm() < 1e-5 && (me.c - 2.0).norm() < 1e-5, "{me:?}");
        // idempotence
        let (m2, pf2) = proj.project(&pf);
        assert!((m2.a - m.a).norm() < 1e-12);
        assert!(pf.iter().zip(&pf2).all(|(a, b)| (a - b).norm() < 1e-12));
        // v1^2 sqrt(mu) -> (1, 0, 2/3)
        let q: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, s)| v[0] * v[0] * s).collect();
        let mq = proj.coefficients(&complexify(&q));
        assert!((mq.a - 1.0).norm() < 1e-5 && (mq.c - 2.0 / 3.0).norm() < 1e-5);
        let micro = proj.micro(&complexify(&q));
        assert!(g.norm(&micro) > 0.1);
        for z in g.collision_invariants() {
            assert!(g.inner(&micro, &complexify(&z)).norm() < 1e-12);
        }
        let again = proj.micro(&micro);
        assert!(micro.iter().zip(&again).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn moment_oracles() {
        let g = grid();
        let proj = MacroProjector::new(&g);
        let sm = g.sqrt_maxwellian();
        let th = proj.theta(&complexify(&sm));
        for j in 0..3 {
            for m in 0..3 {
                let want = if j == m { 0.0 } else { -1.0 };
                assert!((th[j][m].re - want).abs() < 1e-5);
            }
        }
        let zero = vec![C64::new(0.0, 0.0); g.len()];
        assert_eq!(proj.lambda(&zero), [C64::new(0.0, 0.0); 3]);
        let v1: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, s)| v[0] * s).collect();
        assert!(proj.lambda(&complexify(&v1))[0].norm() < 1e-5);
        // int (|v|^2-5)^2 v1^2 mu / 10 = (E|v|^4 v1^2 - 10 E|v|^2 v1^2 + 25) / 10 = (35 - 50 + 25) / 10 = 1
        let q: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, s)| (norm_sq(*v) - 5.0) * v[0] * s).collect();
        let lq = proj.lambda(&complexify(&q))[0].re;
        assert!((lq - 1.0).abs() < 1e-4, "{lq}");
        let r: Vec<C64> = (0..g.len()).map(|i| C64::new((i as f64 * 0.3).sin(), (i as f64).cos()) * sm[i]).collect();
        let t = proj.theta(&r);
        for j in 0..3 {
            for m in 0..3 {
                assert!((t[j][m] - t[m][j]).norm() < 1e-14);
            }
        }
    }
}
