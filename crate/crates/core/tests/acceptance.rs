//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Run all criteria with `cargo test --release --test acceptance`, or a
//! subset with `cargo test --release --test acceptance -- 4 6`.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wienerkin::channel::{channel_init, symmetry_defect, BoundaryCondition, ChannelPreset, ChannelStepper};
use wienerkin::collision::CollisionModel;
use wienerkin::config::RunConfig;
use wienerkin::decay::{fit_subexponential, kappa_theory};
use wienerkin::estimates::{estimate_coercivity, sample_trilinear_constant, wiener_convolution_check};
use wienerkin::grid::{ModelKind, VelocityGrid, WeightSpec, C64};
use wienerkin::lattice::ModeLattice;
use wienerkin::macro_micro::{moment_system_residual, MomentSource};
use wienerkin::runner::{read_norm_series, run_scenario, CsvRow, RunSummary, CSV_NAME};
use wienerkin::torus::{init_field, Preset, Propagator, Scheme, TorusStepper};

type Outcome = (bool, String);

fn landau(n: usize, v_max: f64, gamma: f64) -> CollisionModel {
    CollisionModel::landau(VelocityGrid::new(n, v_max).unwrap(), gamma).unwrap()
}

fn boltzmann(n: usize, v_max: f64, gamma: f64, s: f64) -> CollisionModel {
    CollisionModel::boltzmann(VelocityGrid::new(n, v_max).unwrap(), gamma, s, 0.1).unwrap()
}

/// The four model points: Landau gamma in {0, -3}, Boltzmann (gamma, s) in
/// {(0, 0.5), (-1, 0.25)}.
fn model_points(n: usize, v_max: f64) -> Vec<(String, CollisionModel)> {
    vec![
        ("landau(0)".into(), landau(n, v_max, 0.0)),
        ("landau(-3)".into(), landau(n, v_max, -3.0)),
        ("boltzmann(0,0.5)".into(), boltzmann(n, v_max, 0.0, 0.5)),
        ("boltzmann(-1,0.25)".into(), boltzmann(n, v_max, -1.0, 0.25)),
    ]
}

fn torus_config(dir: &Path, body: &str) -> RunConfig {
    let text = format!("{body}\n[output]\ndir = \"{}\"\nrecord_every = 1\n", dir.display());
    let mut cfg = RunConfig::from_toml(&text).unwrap();
    cfg.output.record_every = 1;
    cfg
}

fn with_record_every(mut cfg: RunConfig, every: usize) -> RunConfig {
    cfg.output.record_every = every;
    cfg
}

fn read_rows(dir: &Path) -> Vec<CsvRow> {
    csv::Reader::from_path(dir.join(CSV_NAME)).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

fn run(cfg: &RunConfig) -> RunSummary {
    run_scenario(cfg, None).unwrap()
}

fn criterion_1() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, model, tol) in [("landau n=16", landau(16, 6.0, 0.0), 1e-3), ("boltzmann n=16", boltzmann(16, 8.0, 0.0, 0.5), 1e-2)] {
        let grid = model.grid();
        let worst = grid
            .collision_invariants()
            .iter()
            .map(|b| {
                let f: Vec<C64> = b.iter().map(|x| C64::new(*x, 0.0)).collect();
                grid.norm(&model.apply_linear(&f))
            })
            .fold(0.0, f64::max);
        ok &= worst < tol;
        detail.push(format!("{name} max|L inv| = {worst:.2e} (< {tol:.0e})"));
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_record_every(
        torus_config(
            dir.path(),
            "[model]\nkind = \"landau\"\ngamma = 0.0\n[grid]\nn_per_dim = 12\nv_max = 6.0\n[domain]\nk_max = 2\n\
             [time]\ndt = 0.01\nt_final = 10.0\nscheme = \"imex_euler\"\n[initial]\npreset = \"random_micro\"\namplitude = 0.01\n\
             [flags]\nnonlinear = true\nreproject = false\nrecord_dnorm = false\n",
        ),
        10,
    );
    let t0 = Instant::now();
    run(&cfg);
    let secs = t0.elapsed().as_secs_f64();
    let rows = read_rows(dir.path());
    let mx = |f: &dyn Fn(&CsvRow) -> f64| rows.iter().map(f).fold(0.0f64, |a, b| a.max(b.abs()));
    let mass = mx(&|r| r.mass);
    let mom = mx(&|r| r.mom_x).max(mx(&|r| r.mom_y)).max(mx(&|r| r.mom_z));
    let energy = mx(&|r| r.energy);
    ok &= mass < 1e-6 && mom < 1e-6 && energy < 1e-6 && secs < 600.0;
    detail.push(format!("nonlinear T=10: |mass| {mass:.1e}, |mom| {mom:.1e}, |energy| {energy:.1e} (< 1e-6), {secs:.0}s (< 600s)"));
    (ok, detail.join("; "))
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let coarse = model_points(12, 6.0);
    let fine = model_points(16, 6.0);
    for ((name, m12), (_, m16)) in coarse.iter().zip(&fine) {
        let r12 = estimate_coercivity(m12, 1000, 11).unwrap();
        let r16 = estimate_coercivity(m16, 1000, 11).unwrap();
        let (a, b) = (r12.constant, r16.constant);
        let drift = (a - b).abs() / a.max(b);
        let mut line = format!("{name} delta0 {a:.3}/{b:.3} drift {:.0}%", 100.0 * drift);
        ok &= a > 0.0 && b > 0.0 && drift <= 0.5;
        if m12.kind() == ModelKind::Boltzmann {
            let c0 = r12.params["c0"].max(r16.params["c0"]);
            ok &= c0 < 1e3;
            line.push_str(&format!(" C0 {c0:.2}"));
        }
        detail.push(line);
    }
    (ok, detail.join("; "))
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let sets: Vec<Vec<(String, CollisionModel)>> = [8, 12, 16].iter().map(|&n| model_points(n, 6.0)).collect();
    for i in 0..4 {
        let consts: Vec<f64> = sets
            .iter()
            .map(|set| {
                let m = &set[i].1;
                let mut w = m.unit_weight();
                if !w.is_hard() {
                    // soft potentials need a growing weight
                    w.q = 0.5;
                }
                sample_trilinear_constant(m, &w, 100, 5).unwrap().constant
            })
            .collect();
        let finite = consts.iter().all(|c| c.is_finite() && *c > 0.0);
        let spread = consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= finite && spread <= 2.0;
        detail.push(format!("{} C(8,12,16) = {:.3}/{:.3}/{:.3} spread {spread:.2}", sets[0][i].0, consts[0], consts[1], consts[2]));
    }
    (ok, detail.join("; "))
}

fn criterion_4() -> Outcome {
    let fit_for = |preset: &str| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = with_record_every(
            torus_config(
                dir.path(),
                &format!(
                    "[model]\nkind = \"landau\"\ngamma = 0.0\n[grid]\nn_per_dim = 12\nv_max = 6.0\n[domain]\nk_max = 4\n\
                     [time]\ndt = 0.05\nt_final = 20.0\nscheme = \"imex_euler\"\n[initial]\npreset = \"{preset}\"\namplitude = 0.01\n\
                     [flags]\nnonlinear = false\nrecord_dnorm = false\n"
                ),
            ),
            2,
        );
        let t0 = Instant::now();
        run(&cfg);
        let secs = t0.elapsed().as_secs_f64();
        (fit_subexponential(&read_norm_series(&dir.path().join(CSV_NAME)).unwrap(), (2.0, 20.0)).unwrap(), secs)
    };
    let (fit, secs) = fit_for("single_mode_micro");
    // broadband data mixes many modal rates; reported, not gated
    let (broad, _) = fit_for("random_micro");
    let ok = (0.85..=1.15).contains(&fit.kappa) && secs < 1200.0;
    (
        ok,
        format!(
            "kappa {:.3} in [0.85, 1.15], lambda {:.3}, {secs:.0}s (< 1200s); random_micro data gives kappa {:.3} on the same window",
            fit.kappa, fit.lambda, broad.kappa
        ),
    )
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut kappas = Vec::new();
    for v_max in [6.0, 8.0, 10.0] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = with_record_every(
            torus_config(
                dir.path(),
                &format!(
                    "[model]\nkind = \"landau\"\ngamma = -3.0\n[weight]\nq = 0.5\ntheta = 2.0\n[grid]\nn_per_dim = 16\nv_max = {v_max}\n\
                     [domain]\nk_max = 1\n[time]\ndt = 0.1\nt_final = 100.0\nscheme = \"imex_euler\"\n\
                     [initial]\npreset = \"random_micro\"\namplitude = 0.01\n[flags]\nnonlinear = false\nrecord_dnorm = false\n"
                ),
            ),
            5,
        );
        let s = run(&cfg);
        let fit = s.fit.expect("fit on [0.2T, T]");
        kappas.push(fit.kappa);
    }
    let secs = t0.elapsed().as_secs_f64();
    let target = 2.0 / 3.0;
    let below = kappas.iter().skip(1).all(|k| *k < 0.85);
    let toward = kappas.windows(2).all(|w| (w[1] - target).abs() < (w[0] - target).abs());
    let band = (0.55..=0.85).contains(&kappas[2]);
    let ok = below && toward && band && secs < 7200.0;
    (
        ok,
        format!(
            "kappa(v_max = 6, 8, 10) = {:.3}, {:.3}, {:.3}; below 0.85 {below}, monotone toward 2/3 {toward}, kappa(10) in [0.55, 0.85] {band}, {secs:.0}s (< 7200s)",
            kappas[0], kappas[1], kappas[2]
        ),
    )
}

fn criterion_6() -> Outcome {
    let w = |kind, gamma, s, q, theta| WeightSpec { q, theta, model_kind: kind, gamma, s };
    let cases = [
        (w(ModelKind::Landau, 0.0, 0.0, 0.0, 1.0), (1, 1)),
        (w(ModelKind::Landau, 0.0, 0.0, 0.0, 2.0), (1, 1)),
        (w(ModelKind::Landau, -3.0, 0.0, 0.5, 2.0), (2, 3)),
        (w(ModelKind::Landau, -2.5, 0.0, 0.5, 1.0), (2, 3)),
        (w(ModelKind::Boltzmann, -1.0, 0.25, 0.5, 1.0), (2, 3)),
    ];
    let mut ok = true;
    let mut got = Vec::new();
    for (weight, (p, q)) in cases {
        let k = kappa_theory(&weight).unwrap();
        ok &= k.numer == p && k.denom == q;
        got.push(k.to_string());
    }
    (ok, format!("kappa = {} (expected 1, 1, 2/3, 2/3, 2/3)", got.join(", ")))
}

fn criterion_7() -> Outcome {
    let model = landau(12, 6.0, 0.0);
    let grid = model.grid();
    let mut st = channel_init(ChannelPreset::SymmetricBump, 1e-2, 32, 2, grid).unwrap();
    let dt = 0.005;
    let prop = Propagator::new(model.dense_linear(), dt, Scheme::ImexEuler).unwrap();
    let stepper = ChannelStepper::new(&model, dt, BoundaryCondition::Specular, true, Some(prop)).unwrap();
    let t0 = Instant::now();
    let mut cumulative = symmetry_defect(&st, grid);
    for _ in 0..1000 {
        st = stepper.step(&st).unwrap();
        cumulative += symmetry_defect(&st, grid);
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = cumulative < 1e-8 && st.is_finite();
    (ok, format!("cumulative symmetry defect over 1000 steps {cumulative:.2e} (< 1e-8), {secs:.0}s"))
}

fn criterion_8() -> Outcome {
    let mut ratios = Vec::new();
    for eps in [1e-3, 1e-2] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = with_record_every(
            torus_config(
                dir.path(),
                &format!(
                    "[model]\nkind = \"landau\"\ngamma = 0.0\n[grid]\nn_per_dim = 8\nv_max = 5.0\n\
                     [domain]\nkind = \"channel\"\nn_x1 = 16\nkbar_max = 1\nbc = \"inflow\"\ninflow_amplitude = {eps}\n\
                     [time]\ndt = 0.01\nt_final = 2.0\nscheme = \"imex_euler\"\n[initial]\npreset = \"symmetric_bump\"\namplitude = {eps}\n\
                     [flags]\nnonlinear = true\n"
                ),
            ),
            1,
        );
        let s = run(&cfg);
        let ch = s.channel.unwrap();
        let r = (ch.energy_functional + ch.dissipation_functional) / (ch.initial_derivative_norm + ch.boundary_e);
        ratios.push(r);
    }
    let change = (ratios[1] - ratios[0]).abs() / ratios[0];
    (change < 0.25, format!("ratio(1e-3) {:.4}, ratio(1e-2) {:.4}, change {:.2}% (< 25%)", ratios[0], ratios[1], 100.0 * change))
}

fn criterion_9() -> Outcome {
    let lattice = ModeLattice::new(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for _ in 0..10_000 {
        let mut draw = || -> Vec<C64> {
            let density: f64 = rng.random_range(0.05..1.0);
            (0..lattice.len())
                .map(|_| if rng.random::<f64>() < density { C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) } else { C64::new(0.0, 0.0) })
                .collect()
        };
        let a = draw();
        let b = draw();
        let (lhs, rhs) = wiener_convolution_check(lattice, &a, &b).unwrap();
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations in 10^4 random pairs"))
}

fn criterion_10() -> Outcome {
    let mut ratios = Vec::new();
    let mut bounded = true;
    let mut ho = Vec::new();
    for eps in [1e-3, 1e-2] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = with_record_every(
            torus_config(
                dir.path(),
                &format!(
                    "[model]\nkind = \"landau\"\ngamma = 0.0\n[grid]\nn_per_dim = 8\nv_max = 5.0\n[domain]\nk_max = 2\n\
                     [time]\ndt = 0.01\nt_final = 5.0\nscheme = \"imex_euler\"\n[initial]\npreset = \"random_micro\"\namplitude = {eps}\n\
                     [flags]\nnonlinear = true\nrecord_dnorm = false\n"
                ),
            ),
            5,
        );
        let s = run(&cfg);
        ratios.push(s.x_norm / s.initial_norm);
        let growth = s.high_order_norm_max / s.high_order_norm_initial;
        bounded &= growth.is_finite() && growth <= 10.0;
        ho.push(growth);
    }
    let change = (ratios[1] - ratios[0]).abs() / ratios[0];
    (
        change < 0.25 && bounded,
        format!(
            "X/initial {:.4} vs {:.4}, change {:.2}% (< 25%); high-order norm max/initial {:.3}, {:.3} (<= 10)",
            ratios[0],
            ratios[1],
            100.0 * change,
            ho[0],
            ho[1]
        ),
    )
}

fn criterion_11() -> Outcome {
    let model = landau(8, 5.0, 0.0);
    let grid = model.grid();
    let dt = 0.01;
    let lattice = ModeLattice::new(3, 1).unwrap();
    let mut f = init_field(Preset::MacroWave, 1e-2, lattice, grid, 3).unwrap();
    let prop = Propagator::new(model.dense_linear(), dt, Scheme::ImexStrang).unwrap();
    let stepper = TorusStepper::new(&model, Scheme::ImexStrang, dt, true, Some(prop)).unwrap();
    let mut traj = vec![(0.0, f.clone())];
    for n in 1..=50 {
        f = stepper.step(&f).unwrap();
        traj.push((n as f64 * dt, f.clone()));
    }
    let tol = 10.0 * (dt * dt + grid.spacing * grid.spacing);
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [[0, 0, 0], [1, 0, 0], [0, 1, 1]] {
        let r = moment_system_residual(&traj, k, grid, MomentSource::Nonlinear(&model)).unwrap().max_per_equation();
        ok &= r.iter().all(|x| *x < tol);
        detail.push(format!("k={k:?} [{}]", r.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(", ")));
    }
    (ok, format!("max residual per equation {} (< {tol:.3})", detail.join(" ")))
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = 0;
    for (id, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = f();
        failed += usize::from(!ok);
        println!("criterion {id:>2}: {} {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
