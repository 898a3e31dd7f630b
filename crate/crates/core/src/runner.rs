//! Scenario orchestration: initial data, the step loop, norm recording,
//! CSV and JSON output, checkpoints and decay fits.

use std::fs::OpenOptions;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{
    boundary_functional_e, channel_init, read_boundary_csv, derivative_norm, inflow_preset, symmetry_defect, BoundaryCondition, ChannelEnergy,
    ChannelPreset, ChannelState, ChannelStepper,
};
use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointState};
use crate::collision::CollisionModel;
use crate::config::RunConfig;
use crate::decay::{fit_subexponential, kappa_theory, DecayFit};
use crate::error::{KineticError, Result};
use crate::estimates::high_order_norm;
use crate::grid::{VelocityGrid, WeightSpec, C64};
use crate::lattice::{ModeLattice, SpectralField};
use crate::torus::{
    conservation_functionals, init_field, record_norms, NormAccumulators, Preset, Propagator, Scheme, TorusStepper,
};

pub const CSV_NAME: &str = "run.csv";
pub const SUMMARY_NAME: &str = "summary.json";
pub const CHECKPOINT_NAME: &str = "checkpoint.bin";
/// Boundary samples used for inflow data.
const INFLOW_SAMPLES: usize = 41;
/// Sample points per dimension of the positivity monitor.
const MIN_F_POINTS: usize = 4;

/// One CSV row; the column order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub t: f64,
    #[serde(rename = "norm_L1k_L2v")]
    pub norm_l1k_l2v: f64,
    pub weighted_norm: f64,
    pub dnorm_cumulative: f64,
    pub mass: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub mom_z: f64,
    pub energy: f64,
    pub sym_defect: Option<f64>,
    #[serde(rename = "min_F")]
    pub min_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub energy_functional: f64,
    pub dissipation_functional: f64,
    /// `sum_{|alpha| <= 1} |w d^alpha f_0|_{L^1_kbar L^2_{x_1, v}}`.
    pub initial_derivative_norm: f64,
    /// `E(w g)` of the inflow data (0 for specular walls).
    pub boundary_e: f64,
    pub max_symmetry_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub domain: String,
    pub model: String,
    pub gamma: f64,
    pub s: f64,
    pub n_per_dim: usize,
    pub v_max: f64,
    pub scheme: String,
    pub dt: f64,
    pub steps: u64,
    pub final_time: f64,
    pub seed: u64,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// `sum_k sup_t |f(k)|` (torus) over the recorded samples.
    pub x_norm: f64,
    pub x_norm_weighted: f64,
    pub dissipation: f64,
    pub max_conservation_drift: f64,
    pub max_conjugate_defect: f64,
    /// `sum_k <k>^2 |w f(k)|` at t = 0 and its running maximum.
    pub high_order_norm_initial: f64,
    pub high_order_norm_max: f64,
    pub min_f: f64,
    pub kappa_theory: String,
    pub kappa_theory_value: f64,
    pub fit: Option<DecayFit>,
    pub fit_late: Option<DecayFit>,
    pub channel: Option<ChannelSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `min (mu + sqrt(mu) f)` over a uniform `x` sample of the torus
/// (`MIN_F_POINTS` per dimension) and all velocity nodes.
pub fn min_density_torus(field: &SpectralField, grid: &VelocityGrid) -> f64 {
    let lat = field.lattice;
    let side = MIN_F_POINTS;
    let mu = grid.maxwellian();
    let sm = grid.sqrt_maxwellian();
    let active: Vec<usize> = (0..lat.len()).filter(|&i| !field.is_zero_mode(i)).collect();
    let mut worst = f64::INFINITY;
    let npts = side.pow(lat.dim as u32);
    let mut vals = vec![0.0; grid.len()];
    for p in 0..npts {
        let mut x = [0.0f64; 3];
        let mut rest = p;
        for d in 0..lat.dim {
            x[3 - lat.dim + d] = std::f64::consts::TAU * (rest % side) as f64 / side as f64;
            rest /= side;
        }
        vals.iter_mut().for_each(|v| *v = 0.0);
        for &idx in &active {
            let k = lat.point(idx);
            let ph = C64::from_polar(1.0, k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
            for (v, z) in vals.iter_mut().zip(&field.modes[idx]) {
                *v += (z * ph).re;
            }
        }
        for i in 0..grid.len() {
            worst = worst.min(mu[i] + sm[i] * vals[i]);
        }
    }
    worst
}

fn min_density_channel(st: &ChannelState, grid: &VelocityGrid) -> f64 {
    (0..st.n_x1).map(|c| min_density_torus(&st.slice(c), grid)).fold(f64::INFINITY, f64::min)
}

fn weighted_norm(modes: &[Vec<C64>], wf: &[f64], grid: &VelocityGrid) -> f64 {
    modes
        .iter()
        .map(|m| {
            let g: Vec<C64> = m.iter().zip(wf).map(|(z, x)| z * x).collect();
            grid.norm(&g)
        })
        .sum()
}

/// Series of `(t, norm)` and running scalars kept across checkpoints.
#[derive(Debug, Clone, Default)]
struct Running {
    times: Vec<f64>,
    norms: Vec<f64>,
    max_drift: f64,
    max_conj: f64,
    ho_max: f64,
    min_f: f64,
    initial_norm: f64,
    ho_initial: f64,
    initial_deriv: f64,
    max_sym: f64,
    /// Conserved quantities at t = 0.
    baseline: Vec<f64>,
}

impl Running {
    fn to_aux(&self) -> Vec<Vec<f64>> {
        vec![
            self.times.clone(),
            self.norms.clone(),
            vec![
                self.max_drift,
                self.max_conj,
                self.ho_max,
                self.min_f,
                self.initial_norm,
                self.ho_initial,
                self.initial_deriv,
                self.max_sym,
            ],
            self.baseline.clone(),
        ]
    }

    fn from_aux(aux: &[Vec<f64>]) -> Result<Self> {
        if aux.len() != 4 || aux[2].len() != 8 {
            return Err(KineticError::Checkpoint("missing run-state arrays".into()));
        }
        let s = &aux[2];
        Ok(Self {
            times: aux[0].clone(),
            norms: aux[1].clone(),
            max_drift: s[0],
            max_conj: s[1],
            ho_max: s[2],
            min_f: s[3],
            initial_norm: s[4],
            ho_initial: s[5],
            initial_deriv: s[6],
            max_sym: s[7],
            baseline: aux[3].clone(),
        })
    }
}

struct Output {
    csv: csv::Writer<std::fs::File>,
}

impl Output {
    fn open(dir: &Path, append: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(CSV_NAME);
        let exists = path.exists();
        let file = if append && exists {
            OpenOptions::new().append(true).open(&path)?
        } else {
            std::fs::File::create(&path)?
        };
        let csv = csv::WriterBuilder::new().has_headers(!(append && exists)).from_writer(file);
        Ok(Self { csv })
    }

    fn row(&mut self, r: &CsvRow) -> Result<()> {
        self.csv.serialize(r)?;
        Ok(())
    }
}

fn fits(run: &Running, t_final: f64) -> (Option<DecayFit>, Option<DecayFit>) {
    let series: Vec<(f64, f64)> = run.times.iter().copied().zip(run.norms.iter().copied()).collect();
    (fit_subexponential(&series, (0.2 * t_final, t_final)).ok(), fit_subexponential(&series, (0.5 * t_final, t_final)).ok())
}

fn base_summary(cfg: &RunConfig, model: &CollisionModel, w: &WeightSpec, steps: u64, time: f64, run: &Running) -> Result<RunSummary> {
    let kappa = kappa_theory(w)?;
    let (fit, fit_late) = fits(run, time);
    Ok(RunSummary {
        domain: cfg.domain.kind.clone(),
        model: cfg.model.kind.clone(),
        gamma: model.gamma(),
        s: model.s(),
        n_per_dim: cfg.grid.n_per_dim,
        v_max: cfg.grid.v_max,
        scheme: cfg.time.scheme.clone(),
        dt: cfg.time.dt,
        steps,
        final_time: time,
        seed: cfg.seed,
        initial_norm: run.initial_norm,
        final_norm: run.norms.last().copied().unwrap_or(0.0),
        x_norm: 0.0,
        x_norm_weighted: 0.0,
        dissipation: 0.0,
        max_conservation_drift: run.max_drift,
        max_conjugate_defect: run.max_conj,
        high_order_norm_initial: run.ho_initial,
        high_order_norm_max: run.ho_max,
        min_f: run.min_f,
        kappa_theory: kappa.to_string(),
        kappa_theory_value: kappa.value(),
        fit,
        fit_late,
        channel: None,
    })
}

/// Runs the configured scenario, optionally continuing from a checkpoint,
/// and writes `run.csv`, `summary.json` and `checkpoint.bin` to the output
/// directory.
pub fn run_scenario(cfg: &RunConfig, resume: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let w = cfg.weight_spec()?;
    let resume_cp = resume.map(read_checkpoint).transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| KineticError::Config(format!("worker pool: {e}")))?;
    let summary = pool.install(|| {
        if cfg.domain.is_channel() {
            run_channel(cfg, &model, &w, resume_cp)
        } else {
            run_torus(cfg, &model, &w, resume_cp)
        }
    })?;
    std::fs::write(cfg.output.dir.join(SUMMARY_NAME), summary.to_json()?)?;
    Ok(summary)
}

fn total_steps(cfg: &RunConfig) -> u64 {
    (cfg.time.t_final / cfg.time.dt).round() as u64
}

fn run_torus(cfg: &RunConfig, model: &CollisionModel, w: &WeightSpec, resume: Option<Checkpoint>) -> Result<RunSummary> {
    let grid = model.grid().clone();
    let lattice = ModeLattice::new(3, cfg.domain.k_max)?;
    let scheme = cfg.scheme()?;
    let dt = cfg.time.dt;
    let wf = grid.weight_field(w)?;
    let steps = total_steps(cfg);
    let every = cfg.output.record_every as u64;

    let (mut field, mut step, mut acc, mut run) = match resume {
        Some(cp) => {
            let CheckpointState::Torus(f) = cp.state else {
                return Err(KineticError::Checkpoint("checkpoint holds a channel state".into()));
            };
            if f.lattice != lattice || f.n_velocity != grid.len() {
                return Err(KineticError::Checkpoint("checkpoint dimensions differ from the config".into()));
            }
            if cp.aux.len() != 7 {
                return Err(KineticError::Checkpoint("missing accumulator arrays".into()));
            }
            let acc = NormAccumulators { sup_l2: cp.aux[0].clone(), sup_weighted: cp.aux[1].clone(), dnorm_int: cp.aux[2].clone(), samples: 0 };
            (f, cp.step, acc, Running::from_aux(&cp.aux[3..])?)
        }
        None => {
            let preset = Preset::from_str(&cfg.initial.preset)?;
            let f = init_field(preset, cfg.initial.amplitude, lattice, &grid, cfg.seed)?;
            let run = Running {
                initial_norm: f.l1k_l2v(&grid),
                ho_initial: high_order_norm(&f, 2, w, &grid)?,
                min_f: f64::INFINITY,
                ..Default::default()
            };
            (f, 0, NormAccumulators::new(lattice), run)
        }
    };
    let mut out = Output::open(&cfg.output.dir, step > 0)?;

    let propagator = if scheme.is_implicit() { Some(Propagator::new(model.dense_linear(), dt, scheme)?) } else { None };
    let mut stepper = TorusStepper::new(model, scheme, dt, cfg.flags.nonlinear, propagator)?;
    stepper.reproject = cfg.flags.reproject;
    let record_d = cfg.record_dnorm();
    let dnorm = |f: &[C64]| model.d_norm_sq(f, w).unwrap_or(f64::NAN);
    if run.baseline.is_empty() {
        let c = conservation_functionals(&field, &grid);
        run.baseline = vec![c.mass, c.momentum[0], c.momentum[1], c.momentum[2], c.energy];
    }

    let record = |field: &SpectralField, step: u64, acc: &mut NormAccumulators, run: &mut Running, out: &mut Output| -> Result<()> {
        let t = step as f64 * dt;
        // right-endpoint rule; the width depends only on the previous record
        let width = run.times.last().map_or(0.0, |&tp| t - tp);
        record_norms(acc, field, &grid, &wf, width, if record_d { Some(&dnorm) } else { None });
        let c = conservation_functionals(field, &grid);
        let now = [c.mass, c.momentum[0], c.momentum[1], c.momentum[2], c.energy];
        let drift = now.iter().zip(&run.baseline).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let norm = field.l1k_l2v(&grid);
        let min_f = min_density_torus(field, &grid);
        run.max_drift = run.max_drift.max(drift);
        run.max_conj = run.max_conj.max(field.conjugate_defect());
        run.ho_max = run.ho_max.max(high_order_norm(field, 2, w, &grid)?);
        run.min_f = run.min_f.min(min_f);
        run.times.push(t);
        run.norms.push(norm);
        out.row(&CsvRow {
            t,
            norm_l1k_l2v: norm,
            weighted_norm: weighted_norm(&field.modes, &wf, &grid),
            dnorm_cumulative: acc.dissipation(),
            mass: c.mass,
            mom_x: c.momentum[0],
            mom_y: c.momentum[1],
            mom_z: c.momentum[2],
            energy: c.energy,
            sym_defect: None,
            min_f,
        })
    };
    let checkpoint = |field: &SpectralField, step: u64, acc: &NormAccumulators, run: &Running| -> Result<()> {
        let mut aux = vec![acc.sup_l2.clone(), acc.sup_weighted.clone(), acc.dnorm_int.clone()];
        aux.extend(run.to_aux());
        write_checkpoint(
            &cfg.output.dir.join(CHECKPOINT_NAME),
            &Checkpoint { step, time: step as f64 * dt, state: CheckpointState::Torus(field.clone()), aux },
        )
    };

    if step == 0 {
        record(&field, 0, &mut acc, &mut run, &mut out)?;
    }
    while step < steps {
        field = stepper.step(&field)?;
        step += 1;
        if step % every == 0 || step == steps {
            record(&field, step, &mut acc, &mut run, &mut out)?;
        }
        if cfg.output.checkpoint_every > 0 && step % cfg.output.checkpoint_every as u64 == 0 {
            out.csv.flush()?;
            checkpoint(&field, step, &acc, &run)?;
        }
    }
    out.csv.flush()?;
    checkpoint(&field, step, &acc, &run)?;

    let mut s = base_summary(cfg, model, w, step, step as f64 * dt, &run)?;
    s.x_norm = acc.x_norm();
    s.x_norm_weighted = acc.x_norm_weighted();
    s.dissipation = if record_d { acc.dissipation() } else { f64::NAN };
    Ok(s)
}

fn run_channel(cfg: &RunConfig, model: &CollisionModel, w: &WeightSpec, resume: Option<Checkpoint>) -> Result<RunSummary> {
    let grid = model.grid().clone();
    let dt = cfg.time.dt;
    let wf = grid.weight_field(w)?;
    let steps = total_steps(cfg);
    let every = cfg.output.record_every as u64;
    let lattice = ModeLattice::new(2, cfg.domain.kbar_max)?;

    let bc = if let Some(path) = &cfg.domain.boundary_file {
        BoundaryCondition::Inflow(read_boundary_csv(path, cfg.domain.kbar_max, &grid)?)
    } else if cfg.domain.bc == "inflow" {
        BoundaryCondition::Inflow(inflow_preset(cfg.domain.inflow_amplitude, cfg.domain.kbar_max, &grid, cfg.time.t_final, INFLOW_SAMPLES)?)
    } else {
        BoundaryCondition::Specular
    };
    let (mut st, mut step, mut energy, mut run) = match resume {
        Some(cp) => {
            let CheckpointState::Channel(c) = cp.state else {
                return Err(KineticError::Checkpoint("checkpoint holds a torus state".into()));
            };
            if c.lattice != lattice || c.n_x1 != cfg.domain.n_x1 || c.n_velocity != grid.len() {
                return Err(KineticError::Checkpoint("checkpoint dimensions differ from the config".into()));
            }
            if cp.aux.len() != 7 {
                return Err(KineticError::Checkpoint("missing accumulator arrays".into()));
            }
            let e = ChannelEnergy { sup: cp.aux[0].clone(), macro_int: cp.aux[1].clone(), micro_int: cp.aux[2].clone() };
            (c, cp.step, e, Running::from_aux(&cp.aux[3..])?)
        }
        None => {
            let preset = ChannelPreset::from_str(&cfg.initial.preset)?;
            let c = channel_init(preset, cfg.initial.amplitude, cfg.domain.n_x1, cfg.domain.kbar_max, &grid)?;
            let run = Running {
                initial_norm: c.l1k_l2xv(&grid),
                initial_deriv: derivative_norm(&c, &grid, w)?,
                min_f: f64::INFINITY,
                ..Default::default()
            };
            (c, 0, ChannelEnergy::new(lattice), run)
        }
    };
    let boundary_e = match &bc {
        BoundaryCondition::Inflow(d) => {
            // E(w g): the weight multiplies the data
            let mut wd = d.clone();
            for f in wd.g_minus.iter_mut().chain(wd.g_plus.iter_mut()) {
                for m in &mut f.modes {
                    m.iter_mut().zip(&wf).for_each(|(z, x)| *z *= x);
                }
            }
            boundary_functional_e(&wd, model, cfg.time.t_final, 0)?
        }
        BoundaryCondition::Specular => 0.0,
    };
    let mut out = Output::open(&cfg.output.dir, step > 0)?;
    let propagator = Propagator::new(model.dense_linear(), dt, Scheme::ImexEuler)?;
    let stepper = ChannelStepper::new(model, dt, bc, cfg.flags.nonlinear, Some(propagator))?;
    let record_d = cfg.record_dnorm();
    let center = lattice.center();
    let inv = grid.collision_invariants();
    let moments = |st: &ChannelState| -> [f64; 5] {
        std::array::from_fn(|i| {
            st.modes[center].iter().map(|cell| cell.iter().zip(&inv[i]).map(|(z, b)| z.re * b).sum::<f64>()).sum::<f64>()
                * grid.cell_volume
                * st.dx()
        })
    };
    if run.baseline.is_empty() {
        run.baseline = moments(&st).to_vec();
    }

    let record = |st: &ChannelState, step: u64, energy: &mut ChannelEnergy, run: &mut Running, out: &mut Output| -> Result<()> {
        let t = step as f64 * dt;
        // right-endpoint rule; the width depends only on the previous record
        let width = run.times.last().map_or(0.0, |&tp| t - tp);
        energy.record(st, model, w, width, record_d)?;
        let m = moments(st);
        let drift = m.iter().zip(&run.baseline).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let sym = symmetry_defect(st, &grid);
        let norm = st.l1k_l2xv(&grid);
        let min_f = min_density_channel(st, &grid);
        run.max_drift = run.max_drift.max(drift);
        run.max_conj = run.max_conj.max(st.conjugate_defect());
        run.max_sym = run.max_sym.max(sym);
        run.min_f = run.min_f.min(min_f);
        run.times.push(t);
        run.norms.push(norm);
        let wn: f64 = (0..lattice.len()).map(|i| st.mode_norm(i, &grid, Some(&wf))).sum();
        out.row(&CsvRow {
            t,
            norm_l1k_l2v: norm,
            weighted_norm: wn,
            dnorm_cumulative: energy.dissipation(),
            mass: m[0],
            mom_x: m[1],
            mom_y: m[2],
            mom_z: m[3],
            energy: m[4],
            sym_defect: Some(sym),
            min_f,
        })
    };
    let checkpoint = |st: &ChannelState, step: u64, energy: &ChannelEnergy, run: &Running| -> Result<()> {
        let mut aux = vec![energy.sup.clone(), energy.macro_int.clone(), energy.micro_int.clone()];
        aux.extend(run.to_aux());
        write_checkpoint(
            &cfg.output.dir.join(CHECKPOINT_NAME),
            &Checkpoint { step, time: st.time, state: CheckpointState::Channel(st.clone()), aux },
        )
    };

    if step == 0 {
        record(&st, 0, &mut energy, &mut run, &mut out)?;
    }
    while step < steps {
        st = stepper.step(&st)?;
        step += 1;
        if step % every == 0 || step == steps {
            record(&st, step, &mut energy, &mut run, &mut out)?;
        }
        if cfg.output.checkpoint_every > 0 && step % cfg.output.checkpoint_every as u64 == 0 {
            out.csv.flush()?;
            checkpoint(&st, step, &energy, &run)?;
        }
    }
    out.csv.flush()?;
    checkpoint(&st, step, &energy, &run)?;

    let mut s = base_summary(cfg, model, w, step, step as f64 * dt, &run)?;
    s.x_norm = energy.sup[..lattice.len()].iter().sum();
    s.dissipation = energy.dissipation();
    s.channel = Some(ChannelSummary {
        energy_functional: energy.energy(),
        dissipation_functional: energy.dissipation(),
        initial_derivative_norm: run.initial_deriv,
        boundary_e,
        max_symmetry_defect: run.max_sym,
    });
    Ok(s)
}

/// Reads `(t, norm_L1k_L2v)` from a run CSV.
pub fn read_norm_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rd.deserialize::<CsvRow>() {
        let r = row?;
        out.push((r.t, r.norm_l1k_l2v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            "seed = 4\n[model]\nkind = \"landau\"\n[grid]\nn_per_dim = 8\nv_max = 5.0\n[domain]\nk_max = 1\n[time]\ndt = 0.05\nt_final = 0.5\n[output]\ndir = \"{}\"\nrecord_every = 2\n{extra}",
            dir.display()
        );
        RunConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_zero_norms() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "");
        c.initial.amplitude = 0.0;
        let s = run_scenario(&c, None).unwrap();
        assert_eq!(s.x_norm, 0.0);
        let series = read_norm_series(&dir.path().join(CSV_NAME)).unwrap();
        assert_eq!(series.len(), 6);
        assert!(series.iter().all(|p| p.1 == 0.0));
        let back: RunSummary = serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_NAME)).unwrap()).unwrap();
        assert_eq!(back.steps, s.steps);
    }

    #[test]
    fn resume_is_bit_identical() {
        let full = tempfile::tempdir().unwrap();
        let s_full = run_scenario(&cfg(full.path(), ""), None).unwrap();
        let part = tempfile::tempdir().unwrap();
        let mut c = cfg(part.path(), "");
        c.time.t_final = 0.2;
        run_scenario(&c, None).unwrap();
        let c2 = cfg(part.path(), "");
        let s_res = run_scenario(&c2, Some(&part.path().join(CHECKPOINT_NAME))).unwrap();
        assert_eq!(s_res.final_norm.to_bits(), s_full.final_norm.to_bits());
        assert_eq!(s_res.x_norm.to_bits(), s_full.x_norm.to_bits());
        let a = read_checkpoint(&full.path().join(CHECKPOINT_NAME)).unwrap();
        let b = read_checkpoint(&part.path().join(CHECKPOINT_NAME)).unwrap();
        assert_eq!(a, b);
        let ra = std::fs::read_to_string(full.path().join(CSV_NAME)).unwrap();
        let rb = std::fs::read_to_string(part.path().join(CSV_NAME)).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn channel_run_writes_symmetry_column() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "");
        c.domain.kind = "channel".into();
        c.domain.n_x1 = 8;
        c.domain.kbar_max = 1;
        c.initial.preset = "symmetric_bump".into();
        c.time.dt = 0.02;
        c.time.t_final = 0.1;
        let s = run_scenario(&c, None).unwrap();
        let ch = s.channel.unwrap();
        assert!(ch.max_symmetry_defect < 1e-14 && ch.energy_functional > 0.0);
    }
}
