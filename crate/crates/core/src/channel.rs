//! The channel `(-1, 1) x T^2`: cell-centred finite differences in `x_1`,
//! Fourier modes in `x_bar`, inflow or specular walls.
//!
//! One step is a splitting: `v_1 d_{x_1}` by second-order upwinding (first
//! order in the wall-adjacent cell) under SSP-RK3, the exact phase
//! `exp(-i kbar.vbar dt)`, an explicit nonlinear increment, and backward
//! Euler for `L` through the dense propagator.

use serde::{Deserialize, Serialize};

use crate::collision::CollisionModel;
use crate::error::{KineticError, Result};
use crate::grid::{VelocityGrid, WeightSpec, C64};
use crate::lattice::{ModeLattice, SpectralField};
use crate::macro_micro::MacroProjector;
use crate::torus::{gamma_hat_all, rotate, Propagator};

/// Largest admissible `max|v_1| dt / dx`. SSP-RK3 with second-order
/// upwinding is stable up to about 0.628.
pub const CFL_LIMIT: f64 = 0.6;

#[inline]
fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `f(t, x_1, kbar, v)` stored as `modes[kbar][cell][v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub n_x1: usize,
    pub lattice: ModeLattice,
    pub n_velocity: usize,
    pub time: f64,
    pub modes: Vec<Vec<Vec<C64>>>,
}

impl ChannelState {
    pub fn zeros(n_x1: usize, kbar_max: i64, grid: &VelocityGrid) -> Result<Self> {
        if n_x1 < 4 || n_x1 % 2 != 0 {
            return Err(KineticError::InvalidArgument(format!("n_x1 = {n_x1} must be even and at least 4")));
        }
        let lattice = ModeLattice::new(2, kbar_max)?;
        Ok(Self {
            n_x1,
            lattice,
            n_velocity: grid.len(),
            time: 0.0,
            modes: vec![vec![vec![zero(); grid.len()]; n_x1]; lattice.len()],
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.n_x1 as f64
    }

    /// Cell centres, symmetric about 0.
    pub fn x1_nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_x1).map(|i| -1.0 + (i as f64 + 0.5) * dx).collect()
    }

    pub fn is_zero_mode(&self, idx: usize) -> bool {
        self.modes[idx].iter().all(|c| c.iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    pub fn complete_conjugates(&mut self) {
        for idx in self.lattice.half() {
            let neg = self.lattice.neg(idx);
            if neg == idx {
                self.modes[idx].iter_mut().flatten().for_each(|z| z.im = 0.0);
            } else {
                let c: Vec<Vec<C64>> = self.modes[idx].iter().map(|cell| cell.iter().map(|z| z.conj()).collect()).collect();
                self.modes[neg] = c;
            }
        }
    }

    pub fn conjugate_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.lattice.len() {
            let neg = self.lattice.neg(idx);
            for (a, b) in self.modes[idx].iter().flatten().zip(self.modes[neg].iter().flatten()) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    pub fn scale(&mut self, c: f64) {
        self.modes.iter_mut().flatten().flatten().for_each(|z| *z *= c);
    }

    /// `|f(kbar)|_{L^2_{x_1, v}}`.
    pub fn mode_norm(&self, idx: usize, grid: &VelocityGrid, w: Option<&[f64]>) -> f64 {
        let mut s = 0.0;
        for cell in &self.modes[idx] {
            for (i, z) in cell.iter().enumerate() {
                s += z.norm_sqr() * w.map_or(1.0, |w| w[i] * w[i]);
            }
        }
        (s * grid.cell_volume * self.dx()).sqrt()
    }

    /// `sum_kbar |f(kbar)|_{L^2_{x_1, v}}`.
    pub fn l1k_l2xv(&self, grid: &VelocityGrid) -> f64 {
        (0..self.lattice.len()).map(|i| self.mode_norm(i, grid, None)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().flatten().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// The modes at one `x_1` cell, as a spectral field on the `kbar` lattice.
    pub fn slice(&self, cell: usize) -> SpectralField {
        SpectralField { lattice: self.lattice, n_velocity: self.n_velocity, modes: self.modes.iter().map(|m| m[cell].clone()).collect() }
    }
}

/// Inflow data sampled in time. Values live on the incoming half of velocity
/// space (`v_1 > 0` for `g_minus` at `x_1 = -1`, `v_1 < 0` for `g_plus` at
/// `x_1 = 1`); other entries are zeroed on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub times: Vec<f64>,
    pub g_minus: Vec<SpectralField>,
    pub g_plus: Vec<SpectralField>,
}

/// `true` where `v_1 > 0`.
fn right_moving(grid: &VelocityGrid) -> Vec<bool> {
    grid.nodes.iter().map(|v| v[0] > 0.0).collect()
}

impl BoundaryData {
    pub fn new(times: Vec<f64>, mut g_minus: Vec<SpectralField>, mut g_plus: Vec<SpectralField>, grid: &VelocityGrid) -> Result<Self> {
        if times.is_empty() || g_minus.len() != times.len() || g_plus.len() != times.len() {
            return Err(KineticError::InvalidArgument("boundary data needs one sample of g_minus and g_plus per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KineticError::InvalidArgument("boundary sample times must increase".into()));
        }
        let lattice = g_minus[0].lattice;
        if g_minus.iter().chain(&g_plus).any(|f| f.lattice != lattice || f.n_velocity != grid.len() || f.lattice.dim != 2) {
            return Err(KineticError::InvalidArgument("boundary samples must share a 2-d lattice and the velocity grid".into()));
        }
        let pos = right_moving(grid);
        for (set, incoming) in [(&mut g_minus, true), (&mut g_plus, false)] {
            for f in set.iter_mut() {
                for m in &mut f.modes {
                    m.iter_mut().zip(&pos).filter(|(_, &p)| p != incoming).for_each(|(z, _)| *z = zero());
                }
                f.complete_conjugates();
            }
        }
        Ok(Self { times, g_minus, g_plus })
    }

    /// Time-independent data.
    pub fn constant(g_minus: SpectralField, g_plus: SpectralField, horizon: f64, grid: &VelocityGrid) -> Result<Self> {
        let times = vec![0.0, 0.5 * horizon, horizon];
        Self::new(times, vec![g_minus.clone(); 3], vec![g_plus.clone(); 3], grid)
    }

    pub fn lattice(&self) -> ModeLattice {
        self.g_minus[0].lattice
    }

    /// Linear interpolation in time, constant beyond the samples.
    pub fn at(&self, t: f64) -> (SpectralField, SpectralField) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (self.g_minus[0].clone(), self.g_plus[0].clone());
        }
        if t >= self.times[n - 1] {
            return (self.g_minus[n - 1].clone(), self.g_plus[n - 1].clone());
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let th = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        let mix = |a: &SpectralField, b: &SpectralField| {
            let mut out = a.clone();
            for (o, x) in out.modes.iter_mut().zip(&b.modes) {
                o.iter_mut().zip(x).for_each(|(p, q)| *p = *p * (1.0 - th) + q * th);
            }
            out
        };
        (mix(&self.g_minus[j], &self.g_minus[j + 1]), mix(&self.g_plus[j], &self.g_plus[j + 1]))
    }

    /// Centred time differences (one-sided at the ends).
    fn time_derivative(samples: &[SpectralField], times: &[f64], j: usize) -> SpectralField {
        let n = times.len();
        let (a, b) = if j == 0 { (0, 1) } else if j == n - 1 { (n - 2, n - 1) } else { (j - 1, j + 1) };
        let mut out = samples[b].clone();
        let inv = 1.0 / (times[b] - times[a]);
        for (o, x) in out.modes.iter_mut().zip(&samples[a].modes) {
            o.iter_mut().zip(x).for_each(|(p, q)| *p = (*p - q) * inv);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    Inflow(BoundaryData),
    Specular,
}

/// Ghost cells just outside both walls, per mode. Only incoming velocities
/// are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostLayer {
    pub left: Vec<Vec<C64>>,
    pub right: Vec<Vec<C64>>,
}

/// Specular ghosts: the incoming value at a wall is the `v_1`-mirror of the
/// adjacent interior cell.
pub fn apply_specular_bc(state: &ChannelState, grid: &VelocityGrid) -> GhostLayer {
    let pos = right_moving(grid);
    let last = state.n_x1 - 1;
    let mirror = |cell: &Vec<C64>, incoming_right: bool| -> Vec<C64> {
        (0..grid.len()).map(|i| if pos[i] == incoming_right { cell[grid.mirror_v1(i)] } else { zero() }).collect()
    };
    GhostLayer {
        left: state.modes.iter().map(|m| mirror(&m[0], true)).collect(),
        right: state.modes.iter().map(|m| mirror(&m[last], false)).collect(),
    }
}

/// Inflow ghosts `2 g - f` so that the wall average equals `g`.
fn inflow_ghosts(state: &ChannelState, grid: &VelocityGrid, g: &(SpectralField, SpectralField)) -> Result<GhostLayer> {
    if g.0.lattice != state.lattice {
        return Err(KineticError::InvalidArgument("boundary data lattice differs from the channel lattice".into()));
    }
    let pos = right_moving(grid);
    let last = state.n_x1 - 1;
    let build = |data: &SpectralField, cell: usize, incoming_right: bool| -> Vec<Vec<C64>> {
        state
            .modes
            .iter()
            .zip(&data.modes)
            .map(|(m, gm)| (0..grid.len()).map(|i| if pos[i] == incoming_right { gm[i] * 2.0 - m[cell][i] } else { zero() }).collect())
            .collect()
    };
    Ok(GhostLayer { left: build(&g.0, 0, true), right: build(&g.1, last, false) })
}

/// `-v_1 d_{x_1} f` with second-order upwinding in the interior and first
/// order in the cell next to the inflow side.
fn transport_x1(state: &ChannelState, ghosts: &GhostLayer, grid: &VelocityGrid, active: &[usize]) -> Vec<Vec<Vec<C64>>> {
    let n = state.n_x1;
    let dx = state.dx();
    let mut out = vec![Vec::new(); state.lattice.len()];
    for &idx in active {
        let f = &state.modes[idx];
        let mut r = vec![vec![zero(); grid.len()]; n];
        for (vi, v) in grid.nodes.iter().enumerate() {
            let v1 = v[0];
            if v1 > 0.0 {
                let at = |i: isize| if i < 0 { ghosts.left[idx][vi] } else { f[i as usize][vi] };
                for i in 0..n as isize {
                    let d = if i == 0 { (at(0) - at(-1)) / dx } else { (at(i) * 3.0 - at(i - 1) * 4.0 + at(i - 2)) / (2.0 * dx) };
                    r[i as usize][vi] = -d * v1;
                }
            } else {
                let at = |i: usize| if i >= n { ghosts.right[idx][vi] } else { f[i][vi] };
                for i in 0..n {
                    let d = if i == n - 1 { (at(n) - at(n - 1)) / dx } else { (at(i) * -3.0 + at(i + 1) * 4.0 - at(i + 2)) / (2.0 * dx) };
                    r[i][vi] = -d * v1;
                }
            }
        }
        out[idx] = r;
    }
    out
}

/// Channel time stepper. `propagator = None` switches `L` off.
pub struct ChannelStepper<'a> {
    pub model: &'a CollisionModel,
    pub dt: f64,
    pub bc: BoundaryCondition,
    pub nonlinear: bool,
    propagator: Option<Propagator>,
}

impl<'a> ChannelStepper<'a> {
    pub fn new(model: &'a CollisionModel, dt: f64, bc: BoundaryCondition, nonlinear: bool, propagator: Option<Propagator>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(KineticError::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if let Some(p) = &propagator {
            if (p.dt - dt).abs() > 1e-15 * dt {
                return Err(KineticError::InvalidArgument("propagator built for a different dt".into()));
            }
        }
        Ok(Self { model, dt, bc, nonlinear, propagator })
    }

    fn ghosts(&self, state: &ChannelState, t: f64) -> Result<GhostLayer> {
        match &self.bc {
            BoundaryCondition::Specular => Ok(apply_specular_bc(state, self.model.grid())),
            BoundaryCondition::Inflow(data) => inflow_ghosts(state, self.model.grid(), &data.at(t)),
        }
    }

    /// Modes that are nonzero or forced by boundary data.
    fn active(&self, state: &ChannelState) -> Vec<usize> {
        let forced = |idx: usize| match &self.bc {
            BoundaryCondition::Specular => false,
            BoundaryCondition::Inflow(d) => {
                d.g_minus.iter().chain(&d.g_plus).any(|g| !g.is_zero_mode(idx))
            }
        };
        (0..state.lattice.len()).filter(|&i| !state.is_zero_mode(i) || forced(i) || self.nonlinear).collect()
    }

    fn combine(base: &ChannelState, a: f64, x: &ChannelState, b: f64, rhs: &[Vec<Vec<C64>>], c: f64, active: &[usize]) -> ChannelState {
        let mut out = base.clone();
        for &idx in active {
            for ((o, xc), rc) in out.modes[idx].iter_mut().zip(&x.modes[idx]).zip(&rhs[idx]) {
                for ((p, q), r) in o.iter_mut().zip(xc).zip(rc) {
                    *p = *p * a + q * b + r * c;
                }
            }
        }
        out
    }

    /// Advances the state by one step.
    pub fn step(&self, state: &ChannelState) -> Result<ChannelState> {
        let grid = self.model.grid();
        if state.n_velocity != grid.len() {
            return Err(KineticError::DimensionMismatch { expected: grid.len(), got: state.n_velocity });
        }
        let vmax = grid.nodes.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
        let cfl = vmax * self.dt / state.dx();
        if cfl > CFL_LIMIT {
            return Err(KineticError::InvalidArgument(format!("CFL number {cfl:.3} exceeds {CFL_LIMIT}; reduce dt")));
        }
        let (t, dt) = (state.time, self.dt);
        let active = self.active(state);

        // SSP-RK3 for the x_1 transport
        let l0 = transport_x1(state, &self.ghosts(state, t)?, grid, &active);
        let s1 = Self::combine(state, 1.0, state, 0.0, &l0, dt, &active);
        let l1 = transport_x1(&s1, &self.ghosts(&s1, t + dt)?, grid, &active);
        let s2 = Self::combine(state, 0.75, &s1, 0.25, &l1, 0.25 * dt, &active);
        let l2 = transport_x1(&s2, &self.ghosts(&s2, t + 0.5 * dt)?, grid, &active);
        let mut out = Self::combine(state, 1.0 / 3.0, &s2, 2.0 / 3.0, &l2, 2.0 / 3.0 * dt, &active);

        if self.nonlinear {
            for cell in 0..state.n_x1 {
                let g = gamma_hat_all(&state.slice(cell), self.model);
                for idx in 0..state.lattice.len() {
                    out.modes[idx][cell].iter_mut().zip(&g.modes[idx]).for_each(|(p, q)| *p += q * dt);
                }
            }
        }
        for idx in state.lattice.half() {
            let k = state.lattice.point(idx);
            if k != [0, 0, 0] {
                for cell in &mut out.modes[idx] {
                    rotate(k, cell, grid, dt);
                }
            }
        }
        if let Some(p) = &self.propagator {
            let half: Vec<usize> = state.lattice.half().filter(|&i| !out.is_zero_mode(i)).collect();
            for cell in 0..state.n_x1 {
                let mut slice = out.slice(cell);
                p.apply(&mut slice, &half);
                for &idx in &half {
                    out.modes[idx][cell] = std::mem::take(&mut slice.modes[idx]);
                }
            }
        }
        out.complete_conjugates();
        out.time = t + dt;
        if !out.is_finite() {
            return Err(KineticError::InvalidArgument("channel state became non-finite; reduce dt".into()));
        }
        Ok(out)
    }
}

/// `max |f(x_1, kbar, v_1, vbar) - f(-x_1, kbar, -v_1, vbar)|`.
pub fn symmetry_defect(state: &ChannelState, grid: &VelocityGrid) -> f64 {
    let n = state.n_x1;
    let mut worst: f64 = 0.0;
    for m in &state.modes {
        for i in 0..n {
            for (vi, z) in m[i].iter().enumerate() {
                worst = worst.max((z - m[n - 1 - i][grid.mirror_v1(vi)]).norm());
            }
        }
    }
    worst
}

/// `-i kbar.vbar g`.
fn phase_term(k: [i64; 3], g: &[C64], grid: &VelocityGrid) -> Vec<C64> {
    g.iter().zip(&grid.nodes).map(|(z, v)| z * C64::new(0.0, -((k[1] as f64) * v[1] + (k[2] as f64) * v[2]))).collect()
}

/// Wall traces of `d_{x_1} f` implied by the equation on incoming velocities:
/// `-(d_t g + i kbar.vbar g + L g - Gamma(g, g)) / v_1`, at sample `j`.
pub fn boundary_x1_derivative(g: &BoundaryData, model: &CollisionModel, j: usize) -> Result<(SpectralField, SpectralField)> {
    if j >= g.times.len() {
        return Err(KineticError::InvalidArgument(format!("sample {j} out of range")));
    }
    let grid = model.grid();
    let pos = right_moving(grid);
    let trace = |samples: &[SpectralField], incoming_right: bool| -> SpectralField {
        let dt = if samples.len() > 1 { Some(BoundaryData::time_derivative(samples, &g.times, j)) } else { None };
        let gam = gamma_hat_all(&samples[j], model);
        let mut out = samples[j].clone();
        for idx in 0..out.lattice.len() {
            let gm = &samples[j].modes[idx];
            let lg = model.apply_linear(gm);
            let ph = phase_term(out.lattice.point(idx), gm, grid);
            for (vi, o) in out.modes[idx].iter_mut().enumerate() {
                if pos[vi] != incoming_right {
                    *o = zero();
                    continue;
                }
                let dtv = dt.as_ref().map_or(zero(), |d| d.modes[idx][vi]);
                // i kbar.vbar g = -phase
                *o = -(dtv - ph[vi] + lg[vi] - gam.modes[idx][vi]) / grid.nodes[vi][0];
            }
        }
        out
    };
    Ok((trace(&g.g_minus, true), trace(&g.g_plus, false)))
}

/// `E(g) = sum_kbar <kbar>^m sqrt(E_kbar(g))` over samples with `t <= horizon`,
/// trapezoid in time.
pub fn boundary_functional_e(g: &BoundaryData, model: &CollisionModel, horizon: f64, m: u32) -> Result<f64> {
    let js: Vec<usize> = (0..g.times.len()).filter(|&j| g.times[j] <= horizon + 1e-12).collect();
    if js.len() < 3 {
        return Err(KineticError::InvalidArgument(format!("{} boundary samples up to the horizon; at least 3 required", js.len())));
    }
    let grid = model.grid();
    let lat = g.lattice();
    let pos = right_moving(grid);
    let mut per_mode = vec![0.0; lat.len()];
    for (pj, &j) in js.iter().enumerate() {
        let w = {
            let left = if pj > 0 { g.times[j] - g.times[js[pj - 1]] } else { 0.0 };
            let right = if pj + 1 < js.len() { g.times[js[pj + 1]] - g.times[j] } else { 0.0 };
            0.5 * (left + right)
        };
        for (samples, incoming_right) in [(&g.g_minus, true), (&g.g_plus, false)] {
            let dtg = BoundaryData::time_derivative(samples, &g.times, j);
            let gam = gamma_hat_all(&samples[j], model);
            for idx in 0..lat.len() {
                let gm = &samples[j].modes[idx];
                if samples[j].is_zero_mode(idx) && dtg.is_zero_mode(idx) {
                    continue;
                }
                let k = lat.point(idx);
                let k2 = (k[1] * k[1] + k[2] * k[2]) as f64;
                let lg = model.apply_linear(gm);
                let mut acc = 0.0;
                for (vi, v) in grid.nodes.iter().enumerate() {
                    if pos[vi] != incoming_right {
                        continue;
                    }
                    let a1 = v[0].abs();
                    let kv = k[1] as f64 * v[1] + k[2] as f64 * v[2];
                    let g2 = gm[vi].norm_sqr();
                    acc += (dtg.modes[idx][vi].norm_sqr() + kv * kv * g2 + lg[vi].norm_sqr() + gam.modes[idx][vi].norm_sqr()) / a1
                        + a1 * (1.0 + k2) * g2;
                }
                per_mode[idx] += w * acc * grid.cell_volume;
            }
        }
    }
    Ok(per_mode.iter().enumerate().map(|(idx, e)| lat.bracket(idx).powi(m as i32) * e.sqrt()).sum())
}

/// `d_{x_1}` by central differences (one-sided at the ends).
fn dx1(cells: &[Vec<C64>], dx: f64) -> Vec<Vec<C64>> {
    let n = cells.len();
    (0..n)
        .map(|i| {
            let (a, b, h) = if i == 0 { (0, 1, dx) } else if i == n - 1 { (n - 2, n - 1, dx) } else { (i - 1, i + 1, 2.0 * dx) };
            cells[b].iter().zip(&cells[a]).map(|(p, q)| (p - q) / h).collect()
        })
        .collect()
}

/// Running pieces of `E_{T,w}` and `D_{T,w}`, indexed `[alpha * modes + kbar]`
/// with `alpha` running over `1, d_{x_1}, d_{x_2}, d_{x_3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEnergy {
    /// `sup_t |w d^alpha f(kbar)|_{L^2_{x_1, v}}`.
    pub sup: Vec<f64>,
    /// `int_0^t |d^alpha [a, b, c](kbar)|^2_{L^2_{x_1}}`.
    pub macro_int: Vec<f64>,
    /// `int_0^t |w (I - P) d^alpha f(kbar)|^2_{L^2_{x_1} D}`.
    pub micro_int: Vec<f64>,
}

impl ChannelEnergy {
    pub fn new(lattice: ModeLattice) -> Self {
        let n = 4 * lattice.len();
        Self { sup: vec![0.0; n], macro_int: vec![0.0; n], micro_int: vec![0.0; n] }
    }

    /// Folds in one snapshot standing for a time span `width` (rectangle
    /// rule). `with_dissipation = false` skips the D-norm evaluations.
    pub fn record(&mut self, st: &ChannelState, model: &CollisionModel, w: &WeightSpec, width: f64, with_dissipation: bool) -> Result<()> {
        let grid = model.grid();
        let wf = grid.weight_field(w)?;
        let w2: Vec<f64> = wf.iter().map(|x| x * x).collect();
        let proj = MacroProjector::new(grid);
        let lat = st.lattice;
        let dx = st.dx();
        let vol = grid.cell_volume;
        for idx in 0..lat.len() {
            if st.is_zero_mode(idx) {
                continue;
            }
            let k = lat.point(idx);
            let base = &st.modes[idx];
            let derivs: [Vec<Vec<C64>>; 4] = [
                base.clone(),
                dx1(base, dx),
                base.iter().map(|c| c.iter().map(|z| z * C64::new(0.0, k[1] as f64)).collect()).collect(),
                base.iter().map(|c| c.iter().map(|z| z * C64::new(0.0, k[2] as f64)).collect()).collect(),
            ];
            for (a, d) in derivs.iter().enumerate() {
                let slot = a * lat.len() + idx;
                let mut l2 = 0.0;
                let mut m2 = 0.0;
                let mut d2 = 0.0;
                for cell in d {
                    l2 += cell.iter().zip(&w2).map(|(z, x)| z.norm_sqr() * x).sum::<f64>() * vol;
                    if cell.iter().all(|z| z.norm_sqr() == 0.0) {
                        continue;
                    }
                    let (abc, pf) = proj.project(cell);
                    m2 += abc.a.norm_sqr() + abc.b.iter().map(|z| z.norm_sqr()).sum::<f64>() + abc.c.norm_sqr();
                    if with_dissipation {
                        let micro: Vec<C64> = cell.iter().zip(&pf).map(|(x, y)| x - y).collect();
                        d2 += model.d_norm_sq(&micro, w)?;
                    }
                }
                self.sup[slot] = self.sup[slot].max((l2 * dx).sqrt());
                self.macro_int[slot] += m2 * dx * width;
                self.micro_int[slot] += d2 * dx * width;
            }
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.sup.iter().sum()
    }

    pub fn dissipation(&self) -> f64 {
        self.macro_int.iter().chain(&self.micro_int).map(|x| x.sqrt()).sum()
    }
}

/// `(E_{T,w}, D_{T,w})` over snapshots spaced `width` apart in time
/// (rectangle rule). Derivatives: `d_{x_1}` by central differences and
/// `d_{x_2}, d_{x_3}` by multiplication with `i kbar`.
pub fn energy_functionals(trajectory: &[ChannelState], model: &CollisionModel, w: &WeightSpec, width: f64) -> Result<(f64, f64)> {
    let Some(first) = trajectory.first() else { return Ok((0.0, 0.0)) };
    let mut acc = ChannelEnergy::new(first.lattice);
    for st in trajectory {
        acc.record(st, model, w, width, true)?;
    }
    Ok((acc.energy(), acc.dissipation()))
}

/// `sum_{|alpha| <= 1} |w d^alpha f|_{L^1_kbar L^2_{x_1, v}}` at one time.
pub fn derivative_norm(state: &ChannelState, grid: &VelocityGrid, w: &WeightSpec) -> Result<f64> {
    let wf = grid.weight_field(w)?;
    let dx = state.dx();
    let mut total = 0.0;
    for idx in 0..state.lattice.len() {
        let k = state.lattice.point(idx);
        let base = &state.modes[idx];
        let l2 = |cells: &[Vec<C64>], scale: f64| -> f64 {
            let s: f64 = cells.iter().flat_map(|c| c.iter().zip(&wf).map(|(z, x)| (z * x).norm_sqr())).sum();
            scale * (s * grid.cell_volume * dx).sqrt()
        };
        total += l2(base, 1.0) + l2(&dx1(base, dx), 1.0) + l2(base, k[1].abs() as f64) + l2(base, k[2].abs() as f64);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPreset {
    /// Even under `(x_1, v_1) -> (-x_1, -v_1)`.
    SymmetricBump,
    /// Zero interior data; the inflow drives the solution.
    Quiet,
}

impl std::str::FromStr for ChannelPreset {
    type Err = KineticError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric_bump" => Ok(Self::SymmetricBump),
            "quiet" => Ok(Self::Quiet),
            other => Err(KineticError::InvalidArgument(format!("unknown channel preset '{other}'"))),
        }
    }
}

/// Microscopic velocity profile even in `v_1`.
fn even_profile(grid: &VelocityGrid) -> Vec<C64> {
    let sm = grid.sqrt_maxwellian();
    let raw: Vec<C64> = grid
        .nodes
        .iter()
        .zip(&sm)
        .map(|(v, s)| C64::new(s * (v[0] * v[0] - 1.0 + 0.5 * v[1] * v[2] + 0.25 * (v[2] * v[2] - 1.0)), 0.0))
        .collect();
    MacroProjector::new(grid).micro(&raw)
}

/// Initial data of the given preset scaled to `|f_0|_{L^1_kbar L^2_{x_1, v}} = amplitude`.
pub fn channel_init(preset: ChannelPreset, amplitude: f64, n_x1: usize, kbar_max: i64, grid: &VelocityGrid) -> Result<ChannelState> {
    let mut st = ChannelState::zeros(n_x1, kbar_max, grid)?;
    if preset == ChannelPreset::Quiet || amplitude == 0.0 {
        return Ok(st);
    }
    let prof = even_profile(grid);
    let xs = st.x1_nodes();
    let c = st.lattice.center();
    for (i, x) in xs.iter().enumerate() {
        let bump = (std::f64::consts::FRAC_PI_2 * x).cos();
        st.modes[c][i] = prof.iter().map(|z| z * bump).collect();
        if kbar_max >= 1 {
            let idx = st.lattice.index([0, 0, 1]).expect("inside the lattice");
            st.modes[idx][i] = prof.iter().map(|z| z * C64::new(0.3, 0.2) * bump * bump).collect();
        }
    }
    st.complete_conjugates();
    let nrm = st.l1k_l2xv(grid);
    st.scale(amplitude / nrm);
    Ok(st)
}

/// Smooth time-dependent inflow of size `amplitude` at `kbar = 0` (and a
/// weaker `kbar = (0, 1)` component), mirrored between the two walls.
pub fn inflow_preset(amplitude: f64, kbar_max: i64, grid: &VelocityGrid, horizon: f64, samples: usize) -> Result<BoundaryData> {
    if samples < 3 {
        return Err(KineticError::InvalidArgument("at least 3 boundary samples required".into()));
    }
    let lattice = ModeLattice::new(2, kbar_max)?;
    let sm = grid.sqrt_maxwellian();
    let shape: Vec<C64> = grid.nodes.iter().zip(&sm).map(|(v, s)| C64::new(s * (0.5 * v[0] * v[0] - 0.25 + 0.2 * v[1]), 0.0)).collect();
    let times: Vec<f64> = (0..samples).map(|j| horizon * j as f64 / (samples - 1) as f64).collect();
    let mut gm = Vec::with_capacity(samples);
    let mut gp = Vec::with_capacity(samples);
    for &t in &times {
        let mut a = SpectralField::zeros(lattice, grid);
        let amp = amplitude * (1.0 + 0.5 * t.sin());
        a.modes[lattice.center()] = shape.iter().map(|z| z * amp).collect();
        if kbar_max >= 1 {
            a.set_mode([0, 0, 1], &shape.iter().map(|z| z * C64::new(0.0, 0.3 * amp)).collect::<Vec<_>>())?;
        }
        let mut b = SpectralField::zeros(lattice, grid);
        for (bm, am) in b.modes.iter_mut().zip(&a.modes) {
            *bm = (0..grid.len()).map(|i| am[grid.mirror_v1(i)]).collect();
        }
        gm.push(a);
        gp.push(b);
    }
    BoundaryData::new(times, gm, gp, grid)
}

/// One row of a boundary-data file: the value of `g_minus` (`side = "minus"`,
/// wall `x_1 = -1`) or `g_plus` (`side = "plus"`) at sample `time_index`, mode
/// `(k2, k3)` and velocity node `v_index`. Entries not listed are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub time_index: usize,
    pub t: f64,
    pub side: String,
    pub k2: i64,
    pub k3: i64,
    pub v_index: usize,
    pub re: f64,
    pub im: f64,
}

/// Reads boundary data from a CSV file of [`BoundaryRow`]s.
pub fn read_boundary_csv(path: &std::path::Path, kbar_max: i64, grid: &VelocityGrid) -> Result<BoundaryData> {
    let lattice = ModeLattice::new(2, kbar_max)?;
    let mut rd = csv::Reader::from_path(path)?;
    let rows: Vec<BoundaryRow> = rd.deserialize().collect::<std::result::Result<_, _>>()?;
    let samples = rows.iter().map(|r| r.time_index + 1).max().unwrap_or(0);
    let mut times = vec![f64::NAN; samples];
    let mut gm = vec![SpectralField::zeros(lattice, grid); samples];
    let mut gp = gm.clone();
    for r in &rows {
        let bad = |m: String| KineticError::InvalidArgument(format!("boundary row {r:?}: {m}"));
        if !times[r.time_index].is_nan() && times[r.time_index] != r.t {
            return Err(bad("conflicting times for one time_index".into()));
        }
        times[r.time_index] = r.t;
        let idx = lattice.index([0, r.k2, r.k3]).ok_or_else(|| bad("mode outside the lattice".into()))?;
        if r.v_index >= grid.len() {
            return Err(bad("velocity index out of range".into()));
        }
        let target = match r.side.as_str() {
            "minus" => &mut gm,
            "plus" => &mut gp,
            other => return Err(bad(format!("side '{other}' is not 'minus' or 'plus'"))),
        };
        target[r.time_index].modes[idx][r.v_index] = C64::new(r.re, r.im);
    }
    if times.iter().any(|t| t.is_nan()) {
        return Err(KineticError::InvalidArgument("boundary file skips a time_index".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KineticError::InvalidArgument("boundary times must increase with time_index".into()));
    }
    BoundaryData::new(times, gm, gp, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Scheme;

    fn model(n: usize) -> CollisionModel {
        CollisionModel::landau(VelocityGrid::new(n, 5.0).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn boundary_csv_round_trip() {
        let grid = VelocityGrid::new(8, 5.0).unwrap();
        let d = inflow_preset(0.01, 1, &grid, 1.0, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let mut w = csv::Writer::from_path(&p).unwrap();
        for (j, &t) in d.times.iter().enumerate() {
            for (side, f) in [("minus", &d.g_minus[j]), ("plus", &d.g_plus[j])] {
                for (idx, m) in f.modes.iter().enumerate() {
                    let k = f.lattice.point(idx);
                    for (v, z) in m.iter().enumerate().filter(|(_, z)| z.norm() > 0.0) {
                        w.serialize(BoundaryRow { time_index: j, t, side: side.into(), k2: k[1], k3: k[2], v_index: v, re: z.re, im: z.im }).unwrap();
                    }
                }
            }
        }
        w.flush().unwrap();
        drop(w);
        let back = read_boundary_csv(&p, 1, &grid).unwrap();
        assert_eq!(back, d);
        std::fs::write(&p, "time_index,t,side,k2,k3,v_index,re,im\n0,0.0,left,0,0,0,1.0,0.0\n").unwrap();
        assert!(read_boundary_csv(&p, 1, &grid).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let m = model(8);
        let st = ChannelState::zeros(8, 1, m.grid()).unwrap();
        let quiet = inflow_preset(0.0, 1, m.grid(), 1.0, 3).unwrap();
        for bc in [BoundaryCondition::Specular, BoundaryCondition::Inflow(quiet)] {
            let s = ChannelStepper::new(&m, 0.01, bc, false, None).unwrap();
            let out = s.step(&st).unwrap();
            assert_eq!(out.l1k_l2xv(m.grid()), 0.0);
        }
        let g = apply_specular_bc(&st, m.grid());
        assert!(g.left.iter().flatten().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn specular_keeps_symmetry() {
        let m = model(8);
        let grid = m.grid().clone();
        let st0 = channel_init(ChannelPreset::SymmetricBump, 1e-2, 8, 1, &grid).unwrap();
        assert!(symmetry_defect(&st0, &grid) < 1e-18);
        let dt = 0.02;
        let prop = Propagator::new(m.dense_linear(), dt, Scheme::ImexEuler).unwrap();
        let s = ChannelStepper::new(&m, dt, BoundaryCondition::Specular, true, Some(prop)).unwrap();
        let mut st = st0.clone();
        for _ in 0..10 {
            st = s.step(&st).unwrap();
            assert!(symmetry_defect(&st, &grid) < 1e-14);
        }
        assert!(st.l1k_l2xv(&grid) > 0.0);
        let mut broken = st.clone();
        broken.modes[4][2][5] += C64::new(1e-3, 0.0);
        assert!((symmetry_defect(&broken, &grid) - 1e-3).abs() < 1e-12);
        let mut sc = broken.clone();
        sc.scale(-2.0);
        assert!((symmetry_defect(&sc, &grid) - 2e-3).abs() < 1e-12);
        // mirrored ghosts
        let gh = apply_specular_bc(&st, &grid);
        let vi = (0..grid.len()).find(|&i| grid.nodes[i][0] > 0.0).unwrap();
        assert_eq!(gh.left[4][vi], st.modes[4][0][grid.mirror_v1(vi)]);
    }

    #[test]
    fn inflow_matches_characteristics() {
        let m = model(8);
        let grid = m.grid().clone();
        let n_x1 = 64;
        let lat = ModeLattice::new(2, 1).unwrap();
        let sm = grid.sqrt_maxwellian();
        let prof: Vec<C64> = sm.iter().map(|s| C64::new(*s, 0.0)).collect();
        let mut gm = SpectralField::zeros(lat, &grid);
        gm.modes[lat.center()] = prof.clone();
        gm.set_mode([0, 0, 1], &prof).unwrap();
        let gp = SpectralField::zeros(lat, &grid);
        let data = BoundaryData::constant(gm.clone(), gp, 100.0, &grid).unwrap();
        let st0 = ChannelState::zeros(n_x1, 1, &grid).unwrap();
        let vmax = grid.nodes.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
        let dt = 0.5 * st0.dx() / vmax;
        let s = ChannelStepper::new(&m, dt, BoundaryCondition::Inflow(data), false, None).unwrap();
        let mut st = st0;
        let vi = grid.index(6, 5, 6);
        let v = grid.nodes[vi];
        let steps = (4.0 / v[0] / dt) as usize;
        for _ in 0..steps {
            st = s.step(&st).unwrap();
        }
        let idx = lat.index([0, 0, 1]).unwrap();
        let f = &st.modes[idx];
        let trace = (f[n_x1 - 1][vi] * 3.0 - f[n_x1 - 2][vi]) / 2.0;
        let exact = prof[vi] * C64::from_polar(1.0, -v[2] * 2.0 / v[0]);
        assert!((trace - exact).norm() < 2e-2 * exact.norm(), "{trace} vs {exact}");
        let c = &st.modes[lat.center()];
        assert!((c[n_x1 / 2][vi] - prof[vi]).norm() < 1e-6 * prof[vi].norm());
        assert!(ChannelStepper::new(&m, 1.0, BoundaryCondition::Specular, false, None).unwrap().step(&st).is_err());
    }

    #[test]
    fn boundary_functionals() {
        let m = model(8);
        let grid = m.grid().clone();
        let quiet = inflow_preset(0.0, 1, &grid, 2.0, 5).unwrap();
        assert_eq!(boundary_functional_e(&quiet, &m, 2.0, 0).unwrap(), 0.0);
        let (a, b) = boundary_x1_derivative(&quiet, &m, 1).unwrap();
        assert_eq!(a.l1k_l2v(&grid) + b.l1k_l2v(&grid), 0.0);
        let g1 = inflow_preset(1e-4, 1, &grid, 2.0, 5).unwrap();
        let g2 = inflow_preset(2e-4, 1, &grid, 2.0, 5).unwrap();
        let e1 = boundary_functional_e(&g1, &m, 2.0, 0).unwrap();
        let e2 = boundary_functional_e(&g2, &m, 2.0, 0).unwrap();
        assert!((e2 / e1 - 2.0).abs() < 1e-3, "{}", e2 / e1);
        assert!(boundary_functional_e(&g1, &m, 2.0, 2).unwrap() > e1);
        assert!(boundary_functional_e(&g1, &m, 0.1, 0).is_err());
        // stationary data, phase term only
        let st = BoundaryData::constant(g1.g_minus[0].clone(), g1.g_plus[0].clone(), 1.0, &grid).unwrap();
        let lat = st.lattice();
        let idx = lat.index([0, 0, 1]).unwrap();
        let (tr, _) = boundary_x1_derivative(&st, &m, 1).unwrap();
        let g = &st.g_minus[1].modes[idx];
        let lg = m.apply_linear(g);
        let gam = gamma_hat_all(&st.g_minus[1], &m);
        for vi in 0..grid.len() {
            let v = grid.nodes[vi];
            if v[0] > 0.0 {
                let want = -(C64::new(0.0, v[2]) * g[vi] + lg[vi] - gam.modes[idx][vi]) / v[0];
                assert!((tr.modes[idx][vi] - want).norm() < 1e-14);
            } else {
                assert_eq!(tr.modes[idx][vi], zero());
            }
        }
    }

    #[test]
    fn energy_functional_examples() {
        let m = model(8);
        let grid = m.grid().clone();
        let w = m.unit_weight();
        let z = ChannelState::zeros(8, 1, &grid).unwrap();
        assert_eq!(energy_functionals(&[z], &m, &w, 0.1).unwrap(), (0.0, 0.0));
        let st = channel_init(ChannelPreset::SymmetricBump, 1e-2, 8, 1, &grid).unwrap();
        let (e1, d1) = energy_functionals(std::slice::from_ref(&st), &m, &w, 0.5).unwrap();
        let (e2, d2) = energy_functionals(std::slice::from_ref(&st), &m, &w, 2.0).unwrap();
        assert_eq!(e1, e2);
        assert!((d2 / d1 - 2.0).abs() < 1e-12);
        assert!((e1 - derivative_norm(&st, &grid, &w).unwrap()).abs() < 1e-12 * e1);
    }
}
