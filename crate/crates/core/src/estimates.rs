//! Empirical constants for the coercivity and trilinear inequalities.
//!
//! Random test functions are Gaussian combinations of the 20 Hermite grid
//! functions of degree at most three, so every quadratic or cubic form
//! reduces to a small Gram matrix or tensor that is assembled once and then
//! sampled cheaply.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::collision::CollisionModel;
use crate::error::{KineticError, Result};
use crate::grid::{complexify, japanese, ModelKind, VelocityGrid, WeightSpec, C64};
use crate::lattice::{ModeLattice, SpectralField};
use crate::macro_micro::MacroProjector;

/// Size of the sampling family.
pub const FAMILY_SIZE: usize = 20;
/// Samples with a squared denominator below this are skipped.
pub const DEGENERATE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub model: String,
    pub gamma: f64,
    pub s: f64,
    pub n_per_dim: usize,
    pub v_max: f64,
    pub samples: usize,
    pub skipped: usize,
    /// Minimum (lower bounds) or maximum (upper bounds) of the sampled ratio.
    pub constant: f64,
    /// Largest sampled ratio for two-sided bounds.
    pub upper: Option<f64>,
    /// 5%, 50% and 95% quantiles of the ratio.
    pub quantiles: [f64; 3],
    /// Independent value from a generalized eigenproblem, when available.
    pub cross_check: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub passed: bool,
}

impl EstimateReport {
    fn new(id: &str, model: &CollisionModel, samples: usize) -> Self {
        let grid = model.grid();
        Self {
            id: id.to_string(),
            model: match model.kind() {
                ModelKind::Landau => "landau".into(),
                ModelKind::Boltzmann => "boltzmann".into(),
            },
            gamma: model.gamma(),
            s: model.s(),
            n_per_dim: grid.n_per_dim,
            v_max: grid.v_max,
            samples,
            skipped: 0,
            constant: f64::NAN,
            upper: None,
            quantiles: [f64::NAN; 3],
            cross_check: None,
            params: BTreeMap::new(),
            passed: false,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < 100 {
        return Err(KineticError::InvalidArgument(format!("{n} samples; at least 100 required")));
    }
    Ok(())
}

fn quantiles(mut r: Vec<f64>) -> [f64; 3] {
    if r.is_empty() {
        return [f64::NAN; 3];
    }
    r.sort_by(f64::total_cmp);
    let at = |p: f64| r[((r.len() - 1) as f64 * p).round() as usize];
    [at(0.05), at(0.5), at(0.95)]
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| StandardNormal.sample(rng))
}

#[inline]
fn quad(c: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    c.dot(&(m * c))
}

/// `(a, b) -> h^3 sum_v e_a e_b chi` for a real multiplier `chi`.
fn mass_gram(grid: &VelocityGrid, fields: &[Vec<f64>], chi: &[f64]) -> DMatrix<f64> {
    let m = fields.len();
    DMatrix::from_fn(m, m, |a, b| {
        fields[a].iter().zip(&fields[b]).zip(chi).map(|((x, y), c)| x * y * c).sum::<f64>() * grid.cell_volume
    })
}

/// Symmetric part of `(L e_a, chi e_b)`.
fn linear_gram(model: &CollisionModel, fields: &[Vec<f64>], chi: &[f64]) -> DMatrix<f64> {
    let grid = model.grid();
    let l = model.dense_linear();
    let m = fields.len();
    let e = DMatrix::from_fn(grid.len(), m, |i, a| fields[a][i]);
    let le = l * &e;
    let k = DMatrix::from_fn(m, m, |a, b| {
        (0..grid.len()).map(|i| le[(i, a)] * chi[i] * e[(i, b)]).sum::<f64>() * grid.cell_volume
    });
    (&k + k.transpose()) * 0.5
}

fn refs(fields: &[Vec<f64>]) -> Vec<&[f64]> {
    fields.iter().map(|f| f.as_slice()).collect()
}

/// Smallest eigenvalue of the pencil `(k, d)` on the span of the family,
/// with the span orthonormalized through the `L^2` Gram matrix `g`.
fn pencil_min(k: &DMatrix<f64>, d: &DMatrix<f64>, g: &DMatrix<f64>) -> Option<f64> {
    let eg = SymmetricEigen::new(g.clone());
    let top = eg.eigenvalues.max();
    let keep: Vec<usize> = (0..g.nrows()).filter(|&i| eg.eigenvalues[i] > 1e-10 * top).collect();
    let q = DMatrix::from_fn(g.nrows(), keep.len(), |r, c| eg.eigenvectors[(r, keep[c])] / eg.eigenvalues[keep[c]].sqrt());
    let dt = q.transpose() * d * &q;
    let kt = q.transpose() * k * &q;
    let chol = nalgebra::Cholesky::new((&dt + dt.transpose()) * 0.5)?;
    let linv = chol.l().try_inverse()?;
    let s = &linv * kt * linv.transpose();
    Some(SymmetricEigen::new((&s + s.transpose()) * 0.5).eigenvalues.min())
}

/// `min (L g, g) / |g|_D^2` over random microscopic `g`; for Boltzmann also
/// the two-sided constant `C_0 = max(max ratio, 1 / min ratio)`.
pub fn estimate_coercivity(model: &CollisionModel, n_samples: usize, seed: u64) -> Result<EstimateReport> {
    check_samples(n_samples)?;
    let grid = model.grid();
    let proj = MacroProjector::new(grid);
    let fields: Vec<Vec<f64>> =
        grid.hermite_basis(FAMILY_SIZE).iter().map(|e| proj.micro(&complexify(e)).iter().map(|z| z.re).collect()).collect();
    let ones = vec![1.0; grid.len()];
    let k = linear_gram(model, &fields, &ones);
    let d = model.d_gram(&refs(&fields), &[&ones])?.remove(0);
    let g = mass_gram(grid, &fields, &ones);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EstimateReport::new("coercivity", model, n_samples);
    let mut ratios = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let c = gaussian(&mut rng, fields.len());
        let y = quad(&c, &d);
        if y < DEGENERATE * c.norm_squared() {
            report.skipped += 1;
            continue;
        }
        ratios.push(quad(&c, &k) / y);
    }
    if ratios.is_empty() {
        return Err(KineticError::InvalidArgument("every coercivity sample was degenerate".into()));
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.constant = lo;
    report.upper = Some(hi);
    report.quantiles = quantiles(ratios);
    report.cross_check = pencil_min(&k, &d, &g);
    let c0 = hi.max(1.0 / lo);
    report.params.insert("c0".into(), c0);
    report.passed = lo > 0.0 && lo.is_finite() && hi.is_finite();
    if model.kind() == ModelKind::Boltzmann {
        report.passed &= c0 < 1e3;
    }
    Ok(report)
}

/// Largest `delta` such that `(L g, w^2 g) >= delta |w g|_D^2 - C |g|^2_{L^2(B_R)}`
/// holds on the samples for a finite `C`. `delta` is read off samples
/// supported outside `B_R`, where the `C` term vanishes; `C` is then the
/// smallest constant covering unrestricted samples.
pub fn verify_weighted_coercivity(model: &CollisionModel, w: &WeightSpec, radius: f64, n_samples: usize, seed: u64) -> Result<EstimateReport> {
    check_samples(n_samples)?;
    if !(radius > 0.0) {
        return Err(KineticError::InvalidArgument(format!("radius = {radius} must be positive")));
    }
    let grid = model.grid();
    let wf = grid.weight_field(w)?;
    let w2: Vec<f64> = wf.iter().map(|x| x * x).collect();
    let basis = grid.hermite_basis(FAMILY_SIZE);
    let inside: Vec<f64> = grid.nodes.iter().map(|v| if v.iter().map(|x| x * x).sum::<f64>() < radius * radius { 1.0 } else { 0.0 }).collect();
    let mut fields = basis.clone();
    fields.extend(basis.iter().map(|e| e.iter().zip(&inside).map(|(x, c)| x * (1.0 - c)).collect::<Vec<f64>>()));
    if fields[FAMILY_SIZE..].iter().all(|f| f.iter().all(|&x| x == 0.0)) {
        return Err(KineticError::InvalidArgument(format!("ball of radius {radius} covers the velocity grid")));
    }
    let x = linear_gram(model, &fields, &w2);
    let y = model.d_gram(&refs(&fields), &[&w2])?.remove(0);
    let z = mass_gram(grid, &fields, &inside);
    let l2 = mass_gram(grid, &fields, &vec![1.0; grid.len()]);
    let m = fields.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EstimateReport::new("weighted_coercivity", model, n_samples);
    let half = n_samples / 2;
    let mut far = Vec::with_capacity(half);
    for _ in 0..half {
        let mut c = DVector::zeros(m);
        c.rows_mut(FAMILY_SIZE, FAMILY_SIZE).copy_from(&gaussian(&mut rng, FAMILY_SIZE));
        let yy = quad(&c, &y);
        if yy < DEGENERATE * quad(&c, &l2) {
            report.skipped += 1;
            continue;
        }
        far.push(quad(&c, &x) / yy);
    }
    let delta = far.iter().copied().fold(f64::INFINITY, f64::min);
    let mut big_c: f64 = 0.0;
    for _ in half..n_samples {
        let mut c = DVector::zeros(m);
        c.rows_mut(0, FAMILY_SIZE).copy_from(&gaussian(&mut rng, FAMILY_SIZE));
        let zz = quad(&c, &z);
        if zz < DEGENERATE * c.norm_squared() {
            report.skipped += 1;
            continue;
        }
        big_c = big_c.max((delta * quad(&c, &y) - quad(&c, &x)) / zz);
    }
    report.constant = delta;
    report.quantiles = quantiles(far);
    report.params.insert("radius".into(), radius);
    report.params.insert("c".into(), big_c);
    report.params.insert("q".into(), w.q);
    report.params.insert("theta".into(), w.theta);
    report.passed = delta > 0.0 && delta.is_finite() && big_c.is_finite();
    Ok(report)
}

/// Maximum of `|(Gamma(f, g), w^2 h)|` over the right-hand side of the
/// weighted trilinear estimate. Soft Boltzmann cases use the mixed form with
/// `<v>^{gamma/2 + s}` factors; the constant of the other branch of its
/// minimum is reported as `max_branch_constant`.
pub fn sample_trilinear_constant(model: &CollisionModel, w: &WeightSpec, n_samples: usize, seed: u64) -> Result<EstimateReport> {
    check_samples(n_samples)?;
    let grid = model.grid();
    let wf = grid.weight_field(w)?;
    let w2: Vec<f64> = wf.iter().map(|x| x * x).collect();
    let ones = vec![1.0; grid.len()];
    let fields = grid.hermite_basis(FAMILY_SIZE);
    let m = fields.len();
    let t = model.gamma_tensor(&refs(&fields), &w2)?;
    let dg = model.d_gram(&refs(&fields), &[&ones, &w2])?;
    let (d1, dw) = (&dg[0], &dg[1]);
    let mw = mass_gram(grid, &fields, &w2);
    let m1 = mass_gram(grid, &fields, &ones);
    let soft_boltzmann = model.kind() == ModelKind::Boltzmann && model.gamma() + 2.0 * model.s() < 0.0;
    let p = model.gamma() / 2.0 + model.s();
    let rho2: Vec<f64> = grid.nodes.iter().map(|v| japanese(*v).powf(2.0 * p)).collect();
    let mr = mass_gram(grid, &fields, &rho2);
    let rw2: Vec<f64> = rho2.iter().zip(&w2).map(|(a, b)| a * b).collect();
    let mrw = mass_gram(grid, &fields, &rw2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EstimateReport::new("trilinear", model, n_samples);
    let mut ratios = Vec::with_capacity(n_samples);
    let mut other_branch: f64 = 0.0;
    for _ in 0..n_samples {
        let (cf, cg, ch) = (gaussian(&mut rng, m), gaussian(&mut rng, m), gaussian(&mut rng, m));
        let mut tri = 0.0;
        for i in 0..m {
            for j in 0..m {
                let base = (i * m + j) * m;
                let s: f64 = (0..m).map(|k| t[base + k] * ch[k]).sum();
                tri += cf[i] * cg[j] * s;
            }
        }
        let nrm = |c: &DVector<f64>, g: &DMatrix<f64>| quad(c, g).max(0.0).sqrt();
        let wh_d = nrm(&ch, dw);
        let (rhs, alt) = if soft_boltzmann {
            let first = nrm(&cf, &mrw) * nrm(&cg, d1) + nrm(&cg, &mr) * nrm(&cf, dw);
            let b1 = nrm(&cf, &mw) * nrm(&cg, &mr);
            let b2 = nrm(&cg, &m1) * nrm(&cf, &mrw);
            let last = nrm(&cg, &mw) * nrm(&cf, &mrw);
            ((first + b1.min(b2) + last) * wh_d, (first + b1.max(b2) + last) * wh_d)
        } else {
            let r = (nrm(&cf, &mw) * nrm(&cg, dw) + nrm(&cf, dw) * nrm(&cg, &mw)) * wh_d;
            (r, r)
        };
        if !(rhs > 1e-300) {
            report.skipped += 1;
            continue;
        }
        ratios.push(tri.abs() / rhs);
        other_branch = other_branch.max(tri.abs() / alt);
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    report.constant = hi;
    report.quantiles = quantiles(ratios);
    report.params.insert("q".into(), w.q);
    report.params.insert("theta".into(), w.theta);
    if soft_boltzmann {
        report.params.insert("max_branch_constant".into(), other_branch);
    }
    report.passed = hi.is_finite();
    Ok(report)
}

/// `(sum_k |sum_l a(k - l) b(l)|, (sum |a|)(sum |b|))` for scalar lattice
/// functions; the convolution is taken on the full doubled lattice.
pub fn wiener_convolution_check(lattice: ModeLattice, a: &[C64], b: &[C64]) -> Result<(f64, f64)> {
    for x in [a, b] {
        if x.len() != lattice.len() {
            return Err(KineticError::DimensionMismatch { expected: lattice.len(), got: x.len() });
        }
    }
    let big = ModeLattice::new(lattice.dim, 2 * lattice.k_max)?;
    let mut conv = vec![C64::new(0.0, 0.0); big.len()];
    for (i, ai) in a.iter().enumerate() {
        if ai.norm() == 0.0 {
            continue;
        }
        let ki = lattice.point(i);
        for (j, bj) in b.iter().enumerate() {
            let kj = lattice.point(j);
            let idx = big.index([ki[0] + kj[0], ki[1] + kj[1], ki[2] + kj[2]]).expect("sum stays in the doubled lattice");
            conv[idx] += ai * bj;
        }
    }
    let l1 = |x: &[C64]| x.iter().map(|z| z.norm()).sum::<f64>();
    Ok((l1(&conv), l1(a) * l1(b)))
}

/// `sum_k <k>^m |w f(k)|_{L^2_v}`.
pub fn high_order_norm(field: &SpectralField, m: u32, w: &WeightSpec, grid: &VelocityGrid) -> Result<f64> {
    let wf = grid.weight_field(w)?;
    Ok(field
        .modes
        .iter()
        .enumerate()
        .map(|(idx, f)| {
            let g: Vec<C64> = f.iter().zip(&wf).map(|(z, x)| z * x).collect();
            field.lattice.bracket(idx).powi(m as i32) * grid.norm(&g)
        })
        .sum())
}
