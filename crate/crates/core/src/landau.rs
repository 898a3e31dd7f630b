//! Landau collision operator in a symmetric weak form.
//!
//! With the twisted gradient `Pi g = sqrt(mu) d(g / sqrt(mu))` the
//! linearized operator is assembled as
//!
//! ```text
//! L g = Pi^T [ sigma Pi g - sqrt(mu) psi * (sqrt(mu) Pi g) ]
//! ```
//!
//! and the bilinear term as
//!
//! ```text
//! Gamma(f, g) = -Pi^T [ A(f) Pi^- g - g b(f) ],
//! A(f) = psi * (sqrt(mu) f),  b(f)_i = psi_ij * (sqrt(mu) (Pi^- f)_j),
//! ```
//!
//! where `Pi^- = Pi - v`. Because `Pi` is exact on `sqrt(mu) {1, v, |v|^2}`
//! and the lattice kernel satisfies `psi(z) z = 0` node by node, `L` is
//! symmetric, vanishes on the collision invariants up to roundoff, equals
//! `-Gamma(sqrt(mu), .) - Gamma(., sqrt(mu))`, and `Gamma` conserves mass
//! exactly (momentum and energy after symmetrization in its arguments).

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{KineticError, Result};
use crate::fft::{Convolver, KernelSpectrum};
use crate::grid::{complexify, VelocityGrid, WeightSpec, C64};
use crate::stencil::TwistedGradient;

/// Symmetric 3x3 index pairs in storage order.
pub const SYM: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[inline]
pub fn sym_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// `psi(z) = (I - z z^T / |z|^2) |z|^{gamma + 2}`.
pub fn psi_kernel(z: [f64; 3], gamma: f64) -> Result<[[f64; 3]; 3]> {
    let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if r2 == 0.0 {
        return Err(KineticError::InvalidArgument("psi is singular at z = 0".into()));
    }
    let scale = r2.powf((gamma + 2.0) / 2.0);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[i][j] = (delta - z[i] * z[j] / r2) * scale;
        }
    }
    Ok(out)
}

/// Convolution products `A(f)`, `b(f)` and `Pi^- f` used by the bilinear term.
#[derive(Debug, Clone)]
pub struct GammaParts {
    pub f: Vec<C64>,
    pub a: [Vec<C64>; 6],
    pub b: [Vec<C64>; 3],
    pub grad_minus: [Vec<C64>; 3],
}

impl GammaParts {
    pub fn conj(&self) -> Self {
        let c = |v: &Vec<C64>| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
        Self {
            f: c(&self.f),
            a: std::array::from_fn(|s| c(&self.a[s])),
            b: std::array::from_fn(|s| c(&self.b[s])),
            grad_minus: std::array::from_fn(|s| c(&self.grad_minus[s])),
        }
    }
}

#[derive(Debug)]
pub struct LandauModel {
    pub gamma: f64,
    pub grid: VelocityGrid,
    /// `sigma = psi * mu` in [`SYM`] order at each node.
    pub sigma: Vec<[f64; 6]>,
    sqrt_mu: Vec<f64>,
    grad: TwistedGradient,
    conv: Convolver,
    psi_hat: [KernelSpectrum; 6],
    dense: OnceLock<DMatrix<f64>>,
}

impl LandauModel {
    pub fn new(grid: VelocityGrid, gamma: f64) -> Result<Self> {
        if !(-3.0..=1.0).contains(&gamma) {
            return Err(KineticError::InvalidModel(format!("Landau gamma = {gamma} outside [-3, 1]")));
        }
        let conv = Convolver::new(grid.n_per_dim);
        let h = grid.spacing;
        let vol = grid.cell_volume;
        let psi_hat = std::array::from_fn(|slot| {
            let (i, j) = SYM[slot];
            conv.kernel_spectrum(|d| {
                if d == [0, 0, 0] {
                    return 0.0;
                }
                let z = [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h];
                psi_kernel(z, gamma).expect("nonzero offset")[i][j] * vol
            })
        });
        let sqrt_mu = grid.sqrt_maxwellian();
        let grad = TwistedGradient::new(&grid);
        let mut model = Self { gamma, grid, sigma: Vec::new(), sqrt_mu, grad, conv, psi_hat, dense: OnceLock::new() };
        let mu_hat = model.conv.forward(&complexify(&model.grid.maxwellian()));
        let comps: Vec<Vec<C64>> = (0..6).map(|s| model.conv.combine(&[(&model.psi_hat[s], &mu_hat)])).collect();
        model.sigma = (0..model.grid.len()).map(|idx| std::array::from_fn(|s| comps[s][idx].re)).collect();
        Ok(model)
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    pub fn gradient(&self) -> &TwistedGradient {
        &self.grad
    }

    /// `sigma(v)` as a full matrix at node `idx`.
    pub fn sigma_at(&self, idx: usize) -> [[f64; 3]; 3] {
        let s = &self.sigma[idx];
        std::array::from_fn(|i| std::array::from_fn(|j| s[sym_slot(i, j)]))
    }

    /// `out_i = sum_j psi_ij * x_j` for a vector field `x`.
    fn psi_apply_vector(&self, x: &[Vec<C64>; 3]) -> [Vec<C64>; 3] {
        let hats: Vec<Vec<C64>> = x.iter().map(|c| self.conv.forward(c)).collect();
        std::array::from_fn(|i| {
            let terms: Vec<(&KernelSpectrum, &[C64])> =
                (0..3).map(|j| (&self.psi_hat[sym_slot(i, j)], hats[j].as_slice())).collect();
            self.conv.combine(&terms)
        })
    }

    /// Linearized operator `L f`.
    pub fn apply_linear(&self, f: &[C64]) -> Vec<C64> {
        let p = self.grad.gradient(f);
        let x: [Vec<C64>; 3] = std::array::from_fn(|d| p[d].iter().zip(&self.sqrt_mu).map(|(a, m)| a * m).collect());
        let c = self.psi_apply_vector(&x);
        let flux: [Vec<C64>; 3] = std::array::from_fn(|i| {
            (0..f.len())
                .map(|idx| {
                    let s = &self.sigma[idx];
                    let sp = s[sym_slot(i, 0)] * p[0][idx] + s[sym_slot(i, 1)] * p[1][idx] + s[sym_slot(i, 2)] * p[2][idx];
                    sp - c[i][idx] * self.sqrt_mu[idx]
                })
                .collect()
        });
        self.grad.divergence_transpose(&flux)
    }

    /// Precomputes the convolution data of one argument of `Gamma`.
    pub fn gamma_parts(&self, f: &[C64]) -> GammaParts {
        let sf: Vec<C64> = f.iter().zip(&self.sqrt_mu).map(|(a, m)| a * m).collect();
        let sf_hat = self.conv.forward(&sf);
        let a = std::array::from_fn(|s| self.conv.combine(&[(&self.psi_hat[s], &sf_hat)]));
        let grad_minus = self.grad.gradient_minus(f);
        let x: [Vec<C64>; 3] =
            std::array::from_fn(|d| grad_minus[d].iter().zip(&self.sqrt_mu).map(|(a, m)| a * m).collect());
        let b = self.psi_apply_vector(&x);
        GammaParts { f: f.to_vec(), a, b, grad_minus }
    }

    /// Adds `A(f) Pi^- g - g b(f)` to the flux accumulator.
    pub fn accumulate_flux(fp: &GammaParts, gp: &GammaParts, flux: &mut [Vec<C64>; 3]) {
        let n = gp.f.len();
        for (i, out) in flux.iter_mut().enumerate() {
            let (a0, a1, a2) = (&fp.a[sym_slot(i, 0)], &fp.a[sym_slot(i, 1)], &fp.a[sym_slot(i, 2)]);
            let bi = &fp.b[i];
            let (p0, p1, p2) = (&gp.grad_minus[0], &gp.grad_minus[1], &gp.grad_minus[2]);
            for idx in 0..n {
                out[idx] += a0[idx] * p0[idx] + a1[idx] * p1[idx] + a2[idx] * p2[idx] - gp.f[idx] * bi[idx];
            }
        }
    }

    /// `Gamma = -Pi^T flux`.
    pub fn gamma_from_flux(&self, flux: &[Vec<C64>; 3]) -> Vec<C64> {
        let mut out = self.grad.divergence_transpose(flux);
        out.iter_mut().for_each(|z| *z = -*z);
        out
    }

    pub fn apply_gamma(&self, f: &[C64], g: &[C64]) -> Vec<C64> {
        let fp = self.gamma_parts(f);
        let gp = GammaParts { f: g.to_vec(), a: Default::default(), b: Default::default(), grad_minus: self.grad.gradient_minus(g) };
        let mut flux: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); g.len()]);
        Self::accumulate_flux(&fp, &gp, &mut flux);
        self.gamma_from_flux(&flux)
    }

    /// Sesquilinear D-form `D_w(f, g)`, so that `|w f|_D^2 = D_w(f, f)`.
    pub fn d_form(&self, f: &[C64], g: &[C64], w2: Option<&[f64]>) -> C64 {
        let df = self.grad.derivative(f);
        let dg = self.grad.derivative(g);
        self.d_form_with_derivatives(f, &df, g, &dg, w2)
    }

    pub fn d_form_with_derivatives(
        &self,
        f: &[C64],
        df: &[Vec<C64>; 3],
        g: &[C64],
        dg: &[Vec<C64>; 3],
        w2: Option<&[f64]>,
    ) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (idx, v) in self.grid.nodes.iter().enumerate() {
            let s = self.sigma_at(idx);
            let mut term = C64::new(0.0, 0.0);
            let mut vsv = 0.0;
            for j in 0..3 {
                for m in 0..3 {
                    term += df[j][idx] * dg[m][idx].conj() * s[j][m];
                    vsv += v[j] * s[j][m] * v[m];
                }
            }
            term += f[idx] * g[idx].conj() * (0.25 * vsv);
            acc += term * w2.map_or(1.0, |w| w[idx]);
        }
        acc * self.grid.cell_volume
    }

    /// `|w f|_D^2` for the weight `w`.
    pub fn d_norm_sq(&self, f: &[C64], w: &WeightSpec) -> Result<f64> {
        let w2: Vec<f64> = self.grid.weight_field(w)?.iter().map(|x| x * x).collect();
        Ok(self.d_form(f, f, Some(&w2)).re.max(0.0))
    }

    /// Dense matrix of `L` in the nodal basis (cached after the first call).
    pub fn dense_linear(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| self.assemble_dense())
    }

    fn assemble_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[j] = C64::new(1.0, 0.0);
                self.apply_linear(&e).into_iter().map(|z| z.re).collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }
}
