//! Fourier-mode evolution on the torus:
//! `d_t f(k) + i k.v f(k) + L f(k) = sum_l Gamma(f(k - l), f(l))`.
//!
//! Transport is integrated exactly as a phase rotation, `L` either
//! explicitly or through a precomputed dense propagator, and the
//! convolution nonlinearity explicitly under Galerkin truncation.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::boltzmann::PairTerm;
use crate::collision::CollisionModel;
use crate::error::{KineticError, Result};
use crate::grid::{complexify, norm_sq, VelocityGrid, C64};
use crate::landau::{GammaParts, LandauModel};
use crate::lattice::{ModeLattice, SpectralField};
use crate::macro_micro::MacroProjector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SingleModeMicro,
    RandomMicro,
    MacroWave,
}

impl FromStr for Preset {
    type Err = KineticError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_mode_micro" => Ok(Self::SingleModeMicro),
            "random_micro" => Ok(Self::RandomMicro),
            "macro_wave" => Ok(Self::MacroWave),
            other => Err(KineticError::InvalidArgument(format!("unknown preset '{other}'"))),
        }
    }
}

/// Fixed smooth velocity profile used by the single-mode preset.
fn profile(grid: &VelocityGrid) -> Vec<C64> {
    let sm = grid.sqrt_maxwellian();
    grid.nodes
        .iter()
        .zip(&sm)
        .map(|(v, s)| C64::new(s * (v[0] * v[1] + 0.5 * (v[0] * v[0] - 1.0) + 0.3 * v[2].powi(3)), 0.0))
        .collect()
}

fn normalized(grid: &VelocityGrid, f: Vec<C64>, amplitude: f64) -> Vec<C64> {
    let nrm = grid.norm(&f);
    f.into_iter().map(|z| z * (amplitude / nrm)).collect()
}

/// Initial data with zero macroscopic content at `k = 0`, so that mass,
/// momentum and energy of the perturbation vanish.
pub fn init_field(preset: Preset, amplitude: f64, lattice: ModeLattice, grid: &VelocityGrid, seed: u64) -> Result<SpectralField> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(KineticError::InvalidArgument(format!("amplitude = {amplitude} must be nonnegative")));
    }
    let mut field = SpectralField::zeros(lattice, grid);
    if amplitude == 0.0 {
        return Ok(field);
    }
    let proj = MacroProjector::new(grid);
    let k0 = if lattice.dim == 3 { [1, 0, 0] } else { [0, 1, 0] };
    if lattice.k_max < 1 && preset != Preset::RandomMicro {
        return Err(KineticError::InvalidArgument("preset needs k_max >= 1".into()));
    }
    match preset {
        Preset::SingleModeMicro => {
            let f = normalized(grid, proj.micro(&profile(grid)), 0.5 * amplitude);
            field.set_mode(k0, &f)?;
        }
        Preset::MacroWave => {
            let m = crate::macro_micro::MacroState {
                a: C64::new(1.0, 0.0),
                b: [C64::new(0.0, 0.5), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                c: C64::new(0.5, 0.0),
            };
            let f = normalized(grid, proj.synthesize(&m), 0.5 * amplitude);
            field.set_mode(k0, &f)?;
        }
        Preset::RandomMicro => {
            let basis = grid.hermite_basis(20);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for idx in lattice.half() {
                let mut f = vec![C64::new(0.0, 0.0); grid.len()];
                let real_only = idx == lattice.center();
                for b in &basis {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = if real_only { 0.0 } else { StandardNormal.sample(&mut rng) };
                    let c = C64::new(re, im) / lattice.bracket(idx).powi(2);
                    f.iter_mut().zip(b).for_each(|(z, x)| *z += c * x);
                }
                field.modes[idx] = proj.micro(&f);
            }
            field.complete_conjugates();
            let total = field.l1k_l2v(grid);
            field.scale(amplitude / total);
        }
    }
    Ok(field)
}

/// Right-hand-side contribution `-i (k.v) f` of transport.
pub fn transport_term(k: [i64; 3], f: &[C64], grid: &VelocityGrid) -> Vec<C64> {
    f.iter().zip(&grid.nodes).map(|(z, v)| -z * C64::new(0.0, kdot(k, v))).collect()
}

#[inline]
fn kdot(k: [i64; 3], v: &[f64; 3]) -> f64 {
    k[0] as f64 * v[0] + k[1] as f64 * v[1] + k[2] as f64 * v[2]
}

/// Exact transport over time `tau`: `f <- exp(-i k.v tau) f`.
pub fn rotate(k: [i64; 3], f: &mut [C64], grid: &VelocityGrid, tau: f64) {
    for (z, v) in f.iter_mut().zip(&grid.nodes) {
        *z *= C64::from_polar(1.0, -kdot(k, v) * tau);
    }
}

/// `sum_l Gamma(f(k - l), f(l))` over pairs inside the truncation, by
/// direct summation.
pub fn gamma_hat_convolution(field: &SpectralField, k: [i64; 3], model: &CollisionModel) -> Vec<C64> {
    let lat = field.lattice;
    let mut out = vec![C64::new(0.0, 0.0); field.n_velocity];
    for l_idx in 0..lat.len() {
        let l = lat.point(l_idx);
        let Some(kl) = lat.index([k[0] - l[0], k[1] - l[1], k[2] - l[2]]) else { continue };
        if field.is_zero_mode(l_idx) || field.is_zero_mode(kl) {
            continue;
        }
        let g = model.apply_gamma(&field.modes[kl], &field.modes[l_idx]);
        out.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    out
}

/// Convolution pairs `(k - l, l)` for each half-lattice `k`, skipping zero
/// modes.
fn convolution_pairs(field: &SpectralField) -> Vec<(usize, Vec<(usize, usize)>)> {
    let lat = field.lattice;
    let nonzero: Vec<bool> = (0..lat.len()).map(|i| !field.is_zero_mode(i)).collect();
    lat.half()
        .map(|k_idx| {
            let k = lat.point(k_idx);
            let pairs = (0..lat.len())
                .filter_map(|l_idx| {
                    let l = lat.point(l_idx);
                    let kl = lat.index([k[0] - l[0], k[1] - l[1], k[2] - l[2]])?;
                    (nonzero[l_idx] && nonzero[kl]).then_some((kl, l_idx))
                })
                .collect();
            (k_idx, pairs)
        })
        .collect()
}

/// The nonlinearity at every mode.
pub fn gamma_hat_all(field: &SpectralField, model: &CollisionModel) -> SpectralField {
    let lat = field.lattice;
    let mut out = SpectralField { lattice: lat, n_velocity: field.n_velocity, modes: vec![Vec::new(); lat.len()] };
    let zero = vec![C64::new(0.0, 0.0); field.n_velocity];
    let pairs = convolution_pairs(field);
    match model {
        CollisionModel::Landau(m) => {
            let mut parts: Vec<Option<GammaParts>> = vec![None; lat.len()];
            for idx in lat.half() {
                if !field.is_zero_mode(idx) {
                    let p = m.gamma_parts(&field.modes[idx]);
                    let neg = lat.neg(idx);
                    if neg != idx {
                        parts[neg] = Some(p.conj());
                    }
                    parts[idx] = Some(p);
                }
            }
            for (k_idx, list) in &pairs {
                let mut flux: [Vec<C64>; 3] = std::array::from_fn(|_| zero.clone());
                for &(a, b) in list {
                    LandauModel::accumulate_flux(parts[a].as_ref().unwrap(), parts[b].as_ref().unwrap(), &mut flux);
                }
                out.modes[*k_idx] = if list.is_empty() { zero.clone() } else { m.gamma_from_flux(&flux) };
            }
        }
        CollisionModel::Boltzmann(m) => {
            // one batched sweep over all (k - l, l) pairs, real and imaginary parts separately
            let mut slot = vec![usize::MAX; lat.len()];
            let mut reals: Vec<Vec<f64>> = Vec::new();
            for idx in 0..lat.len() {
                if !field.is_zero_mode(idx) {
                    slot[idx] = reals.len();
                    reals.push(field.modes[idx].iter().map(|z| z.re).collect());
                    reals.push(field.modes[idx].iter().map(|z| z.im).collect());
                }
            }
            let refs: Vec<&[f64]> = reals.iter().map(|v| v.as_slice()).collect();
            let mut terms = Vec::new();
            for (o, (_, list)) in pairs.iter().enumerate() {
                for &(a, b) in list {
                    let (fa, gb) = (slot[a], slot[b]);
                    terms.push(PairTerm { a: fa, b: gb, out: 2 * o, sign: 1.0 });
                    terms.push(PairTerm { a: fa + 1, b: gb + 1, out: 2 * o, sign: -1.0 });
                    terms.push(PairTerm { a: fa, b: gb + 1, out: 2 * o + 1, sign: 1.0 });
                    terms.push(PairTerm { a: fa + 1, b: gb, out: 2 * o + 1, sign: 1.0 });
                }
            }
            let res = if terms.is_empty() { vec![vec![0.0; field.n_velocity]; 2 * pairs.len()] } else { m.bilinear_batch(&refs, &refs, &terms, 2 * pairs.len()) };
            for (o, (k_idx, _)) in pairs.iter().enumerate() {
                out.modes[*k_idx] = res[2 * o].iter().zip(&res[2 * o + 1]).map(|(&a, &b)| C64::new(a, b)).collect();
            }
        }
    }
    out.complete_conjugates();
    out
}

/// Mass, momentum and energy of the perturbation, read off `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

pub fn conservation_functionals(field: &SpectralField, grid: &VelocityGrid) -> Conservation {
    let f0 = &field.modes[field.lattice.center()];
    let inv = grid.collision_invariants();
    let m = |z: &Vec<f64>| f0.iter().zip(z).map(|(a, b)| a.re * b).sum::<f64>() * grid.cell_volume;
    Conservation { mass: m(&inv[0]), momentum: [m(&inv[1]), m(&inv[2]), m(&inv[3])], energy: m(&inv[4]) }
}

/// Running norms for the solution space and the dissipation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormAccumulators {
    /// `sup_t |f(t, k)|_{L^2_v}` per mode.
    pub sup_l2: Vec<f64>,
    /// `sup_t |w f(t, k)|_{L^2_v}` per mode.
    pub sup_weighted: Vec<f64>,
    /// `int_0^t |w f(s, k)|_D^2 ds` per mode (rectangle rule).
    pub dnorm_int: Vec<f64>,
    pub samples: usize,
}

impl NormAccumulators {
    pub fn new(lattice: ModeLattice) -> Self {
        let n = lattice.len();
        Self { sup_l2: vec![0.0; n], sup_weighted: vec![0.0; n], dnorm_int: vec![0.0; n], samples: 0 }
    }

    /// `sum_k sup_t |f(k)|`.
    pub fn x_norm(&self) -> f64 {
        self.sup_l2.iter().sum()
    }

    pub fn x_norm_weighted(&self) -> f64 {
        self.sup_weighted.iter().sum()
    }

    /// `sum_k (int |w f(k)|_D^2)^{1/2}`.
    pub fn dissipation(&self) -> f64 {
        self.dnorm_int.iter().map(|x| x.sqrt()).sum()
    }
}

/// Folds one snapshot into the accumulators. `width` is the time span the
/// sample represents in the dissipation integral; `dnorm_sq` evaluates
/// `|w f|_D^2` for one mode (skipped when `None`).
pub fn record_norms(
    acc: &mut NormAccumulators,
    field: &SpectralField,
    grid: &VelocityGrid,
    w: &[f64],
    width: f64,
    dnorm_sq: Option<&dyn Fn(&[C64]) -> f64>,
) {
    for (idx, f) in field.modes.iter().enumerate() {
        if field.is_zero_mode(idx) {
            continue;
        }
        acc.sup_l2[idx] = acc.sup_l2[idx].max(grid.norm(f));
        let wf: Vec<C64> = f.iter().zip(w).map(|(z, x)| z * x).collect();
        acc.sup_weighted[idx] = acc.sup_weighted[idx].max(grid.norm(&wf));
        if let Some(d) = dnorm_sq {
            // conjugate modes share the value
            let neg = field.lattice.neg(idx);
            if idx >= neg {
                let val = d(f) * width;
                acc.dnorm_int[idx] += val;
                if neg != idx {
                    acc.dnorm_int[neg] += val;
                }
            }
        }
    }
    acc.samples += 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRk2,
    ImexEuler,
    ImexStrang,
}

impl Scheme {
    pub fn is_implicit(&self) -> bool {
        !matches!(self, Self::ExplicitRk2)
    }
}

impl FromStr for Scheme {
    type Err = KineticError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit_rk2" => Ok(Self::ExplicitRk2),
            "imex_euler" => Ok(Self::ImexEuler),
            "imex_strang" => Ok(Self::ImexStrang),
            other => Err(KineticError::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Dense one-step map of `d_t f = -L f` for an implicit scheme:
/// backward Euler, or the L-stable two-stage SDIRK method with
/// `g = 1 - 1/sqrt(2)` for the Strang scheme.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub scheme: Scheme,
    pub dt: f64,
    pub matrix: DMatrix<f64>,
}

impl Propagator {
    pub fn new(l: &DMatrix<f64>, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(KineticError::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let n = l.nrows();
        let resolvent = |a: f64| -> Result<DMatrix<f64>> {
            let m = DMatrix::identity(n, n) + l * a;
            m.lu().try_inverse().ok_or_else(|| KineticError::InvalidArgument("singular implicit operator".into()))
        };
        let matrix = match scheme {
            Scheme::ExplicitRk2 => return Err(KineticError::InvalidArgument("explicit scheme has no propagator".into())),
            Scheme::ImexEuler => resolvent(dt)?,
            Scheme::ImexStrang => {
                let g = 1.0 - 1.0 / 2f64.sqrt();
                let r = resolvent(g * dt)?;
                let lr = l * &r;
                &r - (&r * lr) * ((1.0 - g) * dt)
            }
        };
        Ok(Self { scheme, dt, matrix })
    }

    /// Applies the propagator to the listed modes in place.
    pub fn apply(&self, field: &mut SpectralField, modes: &[usize]) {
        if modes.is_empty() {
            return;
        }
        let n = field.n_velocity;
        let mut x = DMatrix::zeros(n, 2 * modes.len());
        for (c, &idx) in modes.iter().enumerate() {
            for (r, z) in field.modes[idx].iter().enumerate() {
                x[(r, 2 * c)] = z.re;
                x[(r, 2 * c + 1)] = z.im;
            }
        }
        let y = &self.matrix * x;
        for (c, &idx) in modes.iter().enumerate() {
            for (r, z) in field.modes[idx].iter_mut().enumerate() {
                *z = C64::new(y[(r, 2 * c)], y[(r, 2 * c + 1)]);
            }
        }
    }
}

/// Time stepper for the torus problem.
pub struct TorusStepper<'a> {
    pub model: &'a CollisionModel,
    pub scheme: Scheme,
    pub dt: f64,
    pub nonlinear: bool,
    /// Remove the macroscopic part of `k = 0` after each step.
    pub reproject: bool,
    propagator: Option<Propagator>,
    projector: MacroProjector,
}

impl<'a> TorusStepper<'a> {
    /// Builds the stepper. Implicit schemes need `propagator` for the same
    /// `dt` and scheme.
    pub fn new(model: &'a CollisionModel, scheme: Scheme, dt: f64, nonlinear: bool, propagator: Option<Propagator>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(KineticError::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if scheme.is_implicit() {
            match &propagator {
                None => return Err(KineticError::InvalidArgument(format!("scheme {scheme:?} needs a dense propagator"))),
                Some(p) if p.scheme != scheme || (p.dt - dt).abs() > 1e-15 * dt => {
                    return Err(KineticError::InvalidArgument("propagator built for a different scheme or dt".into()))
                }
                _ => {}
            }
        }
        let projector = MacroProjector::new(model.grid());
        Ok(Self { model, scheme, dt, nonlinear, reproject: false, propagator, projector })
    }

    fn grid(&self) -> &VelocityGrid {
        self.model.grid()
    }

    fn rotate_all(&self, f: &mut SpectralField, tau: f64) {
        let lat = f.lattice;
        for idx in lat.half() {
            if !f.is_zero_mode(idx) {
                rotate(lat.point(idx), &mut f.modes[idx], self.grid(), tau);
            }
        }
        f.complete_conjugates();
    }

    fn gamma_or_zero(&self, f: &SpectralField) -> Option<SpectralField> {
        self.nonlinear.then(|| gamma_hat_all(f, self.model))
    }

    /// `-L f + Gamma_hat(f)` on nonzero half-lattice modes.
    fn explicit_rhs(&self, f: &SpectralField, with_linear: bool) -> SpectralField {
        let mut out = self.gamma_or_zero(f).unwrap_or_else(|| SpectralField::zeros(f.lattice, self.grid()));
        if with_linear {
            for idx in f.lattice.half() {
                if !f.is_zero_mode(idx) {
                    let l = self.model.apply_linear(&f.modes[idx]);
                    out.modes[idx].iter_mut().zip(&l).for_each(|(a, b)| *a -= b);
                }
            }
            out.complete_conjugates();
        }
        out
    }

    fn axpy(f: &SpectralField, a: f64, g: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        for (o, x) in out.modes.iter_mut().zip(&g.modes) {
            o.iter_mut().zip(x).for_each(|(p, q)| *p += q * a);
        }
        out
    }

    /// Lawson-Heun step of length `tau` for `d_t f = -i k.v f + N(f)`.
    fn lawson_heun(&self, f: &SpectralField, tau: f64, with_linear: bool) -> SpectralField {
        let k1 = self.explicit_rhs(f, with_linear);
        let mut pred = Self::axpy(f, tau, &k1);
        self.rotate_all(&mut pred, tau);
        let k2 = self.explicit_rhs(&pred, with_linear);
        let mut base = Self::axpy(f, 0.5 * tau, &k1);
        self.rotate_all(&mut base, tau);
        Self::axpy(&base, 0.5 * tau, &k2)
    }

    fn implicit(&self, f: &mut SpectralField) {
        let modes: Vec<usize> = f.lattice.half().filter(|&i| !f.is_zero_mode(i)).collect();
        self.propagator.as_ref().expect("checked at construction").apply(f, &modes);
        f.complete_conjugates();
    }

    /// Advances the field by one step.
    pub fn step(&self, f: &SpectralField) -> Result<SpectralField> {
        let dt = self.dt;
        let mut out = match self.scheme {
            Scheme::ExplicitRk2 => self.lawson_heun(f, dt, true),
            Scheme::ImexEuler => {
                let mut g = match self.gamma_or_zero(f) {
                    Some(n) => Self::axpy(f, dt, &n),
                    None => f.clone(),
                };
                self.rotate_all(&mut g, dt);
                self.implicit(&mut g);
                g
            }
            Scheme::ImexStrang => {
                let half = |x: &SpectralField| {
                    if self.nonlinear {
                        self.lawson_heun(x, 0.5 * dt, false)
                    } else {
                        let mut y = x.clone();
                        self.rotate_all(&mut y, 0.5 * dt);
                        y
                    }
                };
                let mut g = half(f);
                self.implicit(&mut g);
                half(&g)
            }
        };
        if self.reproject {
            let c = out.lattice.center();
            out.modes[c] = self.projector.micro(&out.modes[c]);
            out.complete_conjugates();
        }
        if !out.is_finite() {
            return Err(KineticError::InvalidArgument("solution became non-finite; reduce dt".into()));
        }
        Ok(out)
    }
}

/// `|v|^2`-moment helper used in tests and diagnostics.
pub fn energy_density(grid: &VelocityGrid) -> Vec<C64> {
    let sm = grid.sqrt_maxwellian();
    complexify(&grid.nodes.iter().zip(&sm).map(|(v, s)| norm_sq(*v) * s).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn landau(n: usize, gamma: f64) -> CollisionModel {
        CollisionModel::landau(VelocityGrid::new(n, 6.0).unwrap(), gamma).unwrap()
    }

    #[test]
    fn presets_conserve_and_are_symmetric() {
        let grid = VelocityGrid::new(8, 6.0).unwrap();
        let lat = ModeLattice::new(3, 1).unwrap();
        for p in ["single_mode_micro", "random_micro", "macro_wave"] {
            let f = init_field(p.parse().unwrap(), 1e-2, lat, &grid, 7).unwrap();
            let c = conservation_functionals(&f, &grid);
            assert!(c.mass.abs() < 1e-12 && c.energy.abs() < 1e-12 && c.momentum.iter().all(|m| m.abs() < 1e-12));
            assert!(f.conjugate_defect() < 1e-15);
        }
        let z = init_field(Preset::RandomMicro, 0.0, lat, &grid, 7).unwrap();
        assert_eq!(z.l1k_l2v(&grid), 0.0);
        let s = init_field(Preset::SingleModeMicro, 1.0, lat, &grid, 0).unwrap();
        let nz: Vec<[i64; 3]> = (0..lat.len()).filter(|&i| !s.is_zero_mode(i)).map(|i| lat.point(i)).collect();
        assert_eq!(nz, vec![[-1, 0, 0], [1, 0, 0]]);
        assert!("bogus".parse::<Preset>().is_err());
    }

    #[test]
    fn transport_properties() {
        let grid = VelocityGrid::new(8, 6.0).unwrap();
        let f: Vec<C64> = (0..grid.len()).map(|i| C64::new((i as f64).sin(), 0.5)).collect();
        assert!(transport_term([0, 0, 0], &f, &grid).iter().all(|z| z.norm() == 0.0));
        let t = transport_term([1, -2, 0], &f, &grid);
        for ((a, b), v) in t.iter().zip(&f).zip(&grid.nodes) {
            assert!((a.norm() - (v[0] - 2.0 * v[1]).abs() * b.norm()).abs() < 1e-12);
        }
        let mut g = f.clone();
        rotate([2, 1, 0], &mut g, &grid, 0.37);
        assert!((grid.norm(&g) - grid.norm(&f)).abs() < 1e-12);
    }

    #[test]
    fn convolution_support_and_direct_sum() {
        let model = landau(8, 0.0);
        let grid = model.grid().clone();
        let lat = ModeLattice::new(3, 2).unwrap();
        let f = init_field(Preset::SingleModeMicro, 1.0, lat, &grid, 0).unwrap();
        let g = gamma_hat_all(&f, &model);
        for idx in 0..lat.len() {
            let k = lat.point(idx);
            let allowed = matches!(k, [0, 0, 0] | [2, 0, 0] | [-2, 0, 0]);
            if !allowed {
                assert!(g.is_zero_mode(idx) || grid.norm(&g.modes[idx]) == 0.0, "{k:?}");
            }
        }
        let f1 = f.mode([1, 0, 0]).unwrap();
        let direct = model.apply_gamma(f1, f1);
        let got = g.mode([2, 0, 0]).unwrap();
        assert!(direct.iter().zip(got).all(|(a, b)| (a - b).norm() < 1e-12 * (1.0 + a.norm())));
        let brute = gamma_hat_convolution(&f, [0, 0, 0], &model);
        let fast = g.mode([0, 0, 0]).unwrap();
        assert!(brute.iter().zip(fast).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(g.conjugate_defect() < 1e-14);
        let zero = SpectralField::zeros(lat, &grid);
        assert_eq!(gamma_hat_all(&zero, &model).l1k_l2v(&grid), 0.0);
    }

    #[test]
    fn linear_steps_contract_and_conserve() {
        let model = landau(8, 0.0);
        let grid = model.grid().clone();
        let lat = ModeLattice::new(3, 1).unwrap();
        let f0 = init_field(Preset::RandomMicro, 1e-2, lat, &grid, 3).unwrap();
        let dense = model.dense_linear().clone();
        for scheme in [Scheme::ImexEuler, Scheme::ImexStrang] {
            let prop = Propagator::new(&dense, 0.05, scheme).unwrap();
            let st = TorusStepper::new(&model, scheme, 0.05, false, Some(prop)).unwrap();
            let mut f = f0.clone();
            for _ in 0..10 {
                let g = st.step(&f).unwrap();
                for idx in 0..lat.len() {
                    assert!(grid.norm(&g.modes[idx]) <= grid.norm(&f.modes[idx]) * (1.0 + 1e-12));
                }
                f = g;
            }
            assert!(f.conjugate_defect() < 1e-14);
        }
        assert!(TorusStepper::new(&model, Scheme::ImexEuler, 0.05, false, None).is_err());
        assert!(TorusStepper::new(&model, Scheme::ExplicitRk2, -1.0, false, None).is_err());
    }

    #[test]
    fn nonlinear_run_conserves() {
        let model = landau(8, 0.0);
        let grid = model.grid().clone();
        let lat = ModeLattice::new(3, 1).unwrap();
        let mut f = init_field(Preset::RandomMicro, 1e-1, lat, &grid, 5).unwrap();
        let st = TorusStepper::new(&model, Scheme::ExplicitRk2, 0.01, true, None).unwrap();
        for _ in 0..5 {
            f = st.step(&f).unwrap();
        }
        let c = conservation_functionals(&f, &grid);
        assert!(c.mass.abs() < 1e-13 && c.energy.abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn accumulator_semantics() {
        let grid = VelocityGrid::new(8, 6.0).unwrap();
        let lat = ModeLattice::new(3, 1).unwrap();
        let f = init_field(Preset::RandomMicro, 1.0, lat, &grid, 1).unwrap();
        let ones = vec![1.0; grid.len()];
        let mut acc = NormAccumulators::new(lat);
        record_norms(&mut acc, &SpectralField::zeros(lat, &grid), &grid, &ones, 1.0, None);
        assert_eq!(acc.x_norm(), 0.0);
        record_norms(&mut acc, &f, &grid, &ones, 1.0, None);
        assert!((acc.x_norm() - f.l1k_l2v(&grid)).abs() < 1e-12);
        let mut small = f.clone();
        small.scale(0.5);
        let before = acc.x_norm();
        record_norms(&mut acc, &small, &grid, &ones, 1.0, None);
        assert_eq!(acc.x_norm(), before);
    }
}
