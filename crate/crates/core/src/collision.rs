//! A single handle over the two collision models.

use nalgebra::{DMatrix, DVector};

use crate::boltzmann::BoltzmannModel;
use crate::error::Result;
use crate::grid::{complexify, ModelKind, VelocityGrid, WeightSpec, C64};
use crate::landau::{GammaParts, LandauModel};

#[derive(Debug)]
pub enum CollisionModel {
    Landau(LandauModel),
    Boltzmann(BoltzmannModel),
}

impl CollisionModel {
    pub fn landau(grid: VelocityGrid, gamma: f64) -> Result<Self> {
        Ok(Self::Landau(LandauModel::new(grid, gamma)?))
    }

    pub fn boltzmann(grid: VelocityGrid, gamma: f64, s: f64, theta_min: f64) -> Result<Self> {
        Ok(Self::Boltzmann(BoltzmannModel::new(grid, gamma, s, theta_min)?))
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Landau(_) => ModelKind::Landau,
            Self::Boltzmann(_) => ModelKind::Boltzmann,
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        match self {
            Self::Landau(m) => &m.grid,
            Self::Boltzmann(m) => &m.grid,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Self::Landau(m) => m.gamma,
            Self::Boltzmann(m) => m.gamma,
        }
    }

    /// Angular singularity order; zero for Landau.
    pub fn s(&self) -> f64 {
        match self {
            Self::Landau(_) => 0.0,
            Self::Boltzmann(m) => m.s,
        }
    }

    /// The unit weight for this model.
    pub fn unit_weight(&self) -> WeightSpec {
        WeightSpec::unit(self.kind(), self.gamma(), self.s())
    }

    /// `L f`. The Boltzmann operator goes through its cached dense matrix.
    pub fn apply_linear(&self, f: &[C64]) -> Vec<C64> {
        match self {
            Self::Landau(m) => m.apply_linear(f),
            Self::Boltzmann(m) => {
                let d = m.dense_linear();
                let re = d * DVector::from_iterator(f.len(), f.iter().map(|z| z.re));
                let im = d * DVector::from_iterator(f.len(), f.iter().map(|z| z.im));
                re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b)).collect()
            }
        }
    }

    pub fn apply_gamma(&self, f: &[C64], g: &[C64]) -> Vec<C64> {
        match self {
            Self::Landau(m) => m.apply_gamma(f, g),
            Self::Boltzmann(m) => m.apply_gamma(f, g),
        }
    }

    pub fn dense_linear(&self) -> &DMatrix<f64> {
        match self {
            Self::Landau(m) => m.dense_linear(),
            Self::Boltzmann(m) => m.dense_linear(),
        }
    }

    pub fn d_norm_sq(&self, f: &[C64], w: &WeightSpec) -> Result<f64> {
        match self {
            Self::Landau(m) => m.d_norm_sq(f, w),
            Self::Boltzmann(m) => m.d_norm_sq(f, w),
        }
    }

    /// D-form Gram matrices of real fields, one per squared weight. For
    /// Boltzmann the family must be closed under the grid symmetries.
    pub fn d_gram(&self, fields: &[&[f64]], weights_sq: &[&[f64]]) -> Result<Vec<DMatrix<f64>>> {
        let m = fields.len();
        match self {
            Self::Landau(model) => {
                let cf: Vec<Vec<C64>> = fields.iter().map(|f| complexify(f)).collect();
                let der: Vec<[Vec<C64>; 3]> = cf.iter().map(|f| model.gradient().derivative(f)).collect();
                Ok(weights_sq
                    .iter()
                    .map(|w2| {
                        let mut g = DMatrix::zeros(m, m);
                        for a in 0..m {
                            for b in a..m {
                                let v = model.d_form_with_derivatives(&cf[a], &der[a], &cf[b], &der[b], Some(w2)).re;
                                g[(a, b)] = v;
                                g[(b, a)] = v;
                            }
                        }
                        g
                    })
                    .collect())
            }
            Self::Boltzmann(model) => {
                let grams = model.family_d_gram(fields, weights_sq)?;
                Ok(grams.grams.into_iter().map(|g| DMatrix::from_row_slice(m, m, &g)).collect())
            }
        }
    }

    /// `T[(i m + j) m + k] = (Gamma(e_i, e_j), w^2 e_k)` for real fields.
    pub fn gamma_tensor(&self, fields: &[&[f64]], w2: &[f64]) -> Result<Vec<f64>> {
        let m = fields.len();
        match self {
            Self::Landau(model) => {
                let cf: Vec<Vec<C64>> = fields.iter().map(|f| complexify(f)).collect();
                let parts: Vec<GammaParts> = cf.iter().map(|f| model.gamma_parts(f)).collect();
                let len = model.grid.len();
                let vol = model.grid.cell_volume;
                let mut t = vec![0.0; m * m * m];
                for i in 0..m {
                    for j in 0..m {
                        let mut flux: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
                        LandauModel::accumulate_flux(&parts[i], &parts[j], &mut flux);
                        let g = model.gamma_from_flux(&flux);
                        for k in 0..m {
                            let s: f64 = (0..len).map(|x| g[x].re * w2[x] * fields[k][x]).sum();
                            t[(i * m + j) * m + k] = s * vol;
                        }
                    }
                }
                Ok(t)
            }
            Self::Boltzmann(model) => model.family_gamma_tensor(fields, w2),
        }
    }
}
