//! Decay exponents: the predicted `kappa`, least-squares fits of
//! `C exp(-lambda t^kappa)` to norm histories, and the time-velocity
//! splitting diagnostic.

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul};
use serde::{Deserialize, Serialize};

use crate::error::{KineticError, Result};
use crate::grid::{japanese, ModelKind, VelocityGrid, WeightSpec, C64};
use crate::lattice::SpectralField;

/// Search interval for the fitted exponent.
pub const KAPPA_RANGE: (f64, f64) = (0.1, 1.5);

/// `kappa` as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kappa {
    pub numer: i64,
    pub denom: i64,
}

impl Kappa {
    pub fn value(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl std::fmt::Display for Kappa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.denom == 1 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, self.denom)
        }
    }
}

fn exact(x: f64) -> Result<Ratio<i128>> {
    let r: Ratio<i64> =
        Ratio::approximate_float(x).ok_or_else(|| KineticError::InvalidArgument(format!("{x} has no rational form")))?;
    Ok(Ratio::new(i128::from(*r.numer()), i128::from(*r.denom())))
}

/// Predicted exponent: 1 for hard potentials, `theta / (theta + |gamma + 2|)`
/// for soft Landau and `theta / (theta + |gamma + 2s|)` for soft Boltzmann.
pub fn kappa_theory(w: &WeightSpec) -> Result<Kappa> {
    w.validate()?;
    if w.is_hard() {
        return Ok(Kappa { numer: 1, denom: 1 });
    }
    let overflow = || KineticError::InvalidArgument("kappa has no i64 rational form".into());
    let theta = exact(w.theta)?;
    let shift = match w.model_kind {
        ModelKind::Landau => Ratio::from_integer(2),
        ModelKind::Boltzmann => exact(w.s)?.checked_mul(&Ratio::from_integer(2)).ok_or_else(overflow)?,
    };
    let gap = exact(w.gamma)?.checked_add(&shift).ok_or_else(overflow)?;
    let gap = if gap < Ratio::from_integer(0) { -gap } else { gap };
    let k = theta.checked_div(&theta.checked_add(&gap).ok_or_else(overflow)?).ok_or_else(overflow)?;
    Ok(Kappa {
        numer: i64::try_from(*k.numer()).map_err(|_| overflow())?,
        denom: i64::try_from(*k.denom()).map_err(|_| overflow())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub rss: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// The optimum sits on the search boundary or the series does not decay.
    pub flagged: bool,
}

/// Least squares for `y = a - lambda x`, with `lambda` clamped at zero.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let mut lambda = if sxx > 0.0 { -sxy / sxx } else { 0.0 };
    let mut a = my + lambda * mx;
    if lambda < 0.0 {
        lambda = 0.0;
        a = my;
    }
    let rss = x.iter().zip(y).map(|(xi, yi)| (yi - a + lambda * xi).powi(2)).sum();
    (a, lambda, rss)
}

/// Fits `log v = log C - lambda t^kappa` on the window: an inner linear solve
/// for `(log C, lambda)` and a golden-section search over `kappa`.
pub fn fit_subexponential(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(KineticError::Fit(format!("degenerate window ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < 10 {
        return Err(KineticError::Fit(format!("{} points in window; at least 10 required", pts.len())));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(KineticError::Fit(format!("nonpositive value {v} at t = {t}")));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let eval = |k: f64| {
        let x: Vec<f64> = t.iter().map(|s| s.powf(k)).collect();
        linear_fit(&x, &y)
    };
    let (mut a, mut b) = KAPPA_RANGE;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c).2, eval(d).2);
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c).2;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d).2;
        }
    }
    // also compare against the interval ends, where golden section may stall
    let mut best = (0.5 * (a + b), eval(0.5 * (a + b)));
    for k in [KAPPA_RANGE.0, KAPPA_RANGE.1] {
        let r = eval(k);
        if r.2 < best.1 .2 {
            best = (k, r);
        }
    }
    let (kappa, (logc, lambda, rss)) = best;
    let edge = (kappa - KAPPA_RANGE.0).abs() < 1e-3 || (KAPPA_RANGE.1 - kappa).abs() < 1e-3;
    Ok(DecayFit { c: logc.exp(), lambda, kappa, rss, window, points: pts.len(), flagged: edge || lambda <= 1e-12 })
}

/// `L^1_k L^2_v` norms of `f` restricted to `{<v> <= rho t^p}` and to its
/// complement.
pub fn splitting_diagnostic(field: &SpectralField, t: f64, rho: f64, p_prime: f64, grid: &VelocityGrid) -> Result<(f64, f64)> {
    if !(t > 0.0) || !(rho > 0.0) {
        return Err(KineticError::InvalidArgument(format!("need t > 0 and rho > 0, got t = {t}, rho = {rho}")));
    }
    let cut = rho * t.powf(p_prime);
    let inside: Vec<bool> = grid.nodes.iter().map(|v| japanese(*v) <= cut).collect();
    let mut low = 0.0;
    let mut high = 0.0;
    for f in &field.modes {
        let part = |keep: bool| {
            let g: Vec<C64> = f.iter().zip(&inside).map(|(z, &i)| if i == keep { *z } else { C64::new(0.0, 0.0) }).collect();
            grid.norm(&g)
        };
        low += part(true);
        high += part(false);
    }
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ModeLattice;
    use crate::torus::{init_field, Preset};

    fn w(kind: ModelKind, gamma: f64, s: f64, q: f64, theta: f64) -> WeightSpec {
        WeightSpec { q, theta, model_kind: kind, gamma, s }
    }

    #[test]
    fn kappa_values() {
        let one = kappa_theory(&w(ModelKind::Landau, 0.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!((one.numer, one.denom), (1, 1));
        let k = kappa_theory(&w(ModelKind::Landau, -3.0, 0.0, 0.5, 2.0)).unwrap();
        assert_eq!((k.numer, k.denom), (2, 3));
        assert_eq!(k.to_string(), "2/3");
        let k = kappa_theory(&w(ModelKind::Landau, -2.5, 0.0, 0.5, 1.0)).unwrap();
        assert_eq!((k.numer, k.denom), (2, 3));
        let k = kappa_theory(&w(ModelKind::Boltzmann, -1.0, 0.25, 0.5, 1.0)).unwrap();
        assert_eq!((k.numer, k.denom), (2, 3));
        assert!(kappa_theory(&w(ModelKind::Landau, -3.0, 0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn fits_constructed_series() {
        let series: Vec<(f64, f64)> = (0..200).map(|i| 1.0 + 49.0 * i as f64 / 199.0).map(|t| (t, (-0.5 * t.powf(2.0 / 3.0)).exp())).collect();
        let fit = fit_subexponential(&series, (1.0, 50.0)).unwrap();
        assert!((fit.lambda - 0.5).abs() < 1e-3 && (fit.kappa - 2.0 / 3.0).abs() < 1e-3, "{fit:?}");
        let scaled: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, 7.0 * v)).collect();
        let f2 = fit_subexponential(&scaled, (1.0, 50.0)).unwrap();
        assert!((f2.kappa - fit.kappa).abs() < 1e-6 && (f2.c / fit.c - 7.0).abs() < 1e-6);
        let exp: Vec<(f64, f64)> = (1..100).map(|i| i as f64 * 0.2).map(|t| (t, (-t).exp())).collect();
        let fe = fit_subexponential(&exp, (0.2, 20.0)).unwrap();
        assert!((fe.kappa - 1.0).abs() < 1e-3 && (fe.lambda - 1.0).abs() < 1e-3);
        let flat: Vec<(f64, f64)> = (1..50).map(|i| (i as f64, 3.0)).collect();
        let ff = fit_subexponential(&flat, (1.0, 49.0)).unwrap();
        assert!(ff.lambda.abs() < 1e-12 && ff.flagged);
        assert!(fit_subexponential(&flat[..5], (1.0, 49.0)).is_err());
        assert!(fit_subexponential(&flat, (0.0, 49.0)).is_err());
        let mut bad = flat.clone();
        bad[3].1 = 0.0;
        assert!(fit_subexponential(&bad, (1.0, 49.0)).is_err());
    }

    #[test]
    fn splitting_examples() {
        let grid = VelocityGrid::new(8, 6.0).unwrap();
        let lat = ModeLattice::new(3, 1).unwrap();
        let f = init_field(Preset::RandomMicro, 1.0, lat, &grid, 2).unwrap();
        let (lo, hi) = splitting_diagnostic(&f, 1e6, 1.0, 1.0, &grid).unwrap();
        assert_eq!(hi, 0.0);
        assert!((lo - f.l1k_l2v(&grid)).abs() < 1e-12);
        let (lo, _) = splitting_diagnostic(&f, 1e-3, 1.0, 1.0, &grid).unwrap();
        assert_eq!(lo, 0.0);
        let z = SpectralField::zeros(lat, &grid);
        assert_eq!(splitting_diagnostic(&z, 2.0, 1.0, 0.5, &grid).unwrap(), (0.0, 0.0));
        let (lo, hi) = splitting_diagnostic(&f, 2.0, 2.0, 0.5, &grid).unwrap();
        let total: f64 = f.modes.iter().map(|m| grid.norm(m)).sum();
        assert!(lo + hi >= total - 1e-12);
    }
}
